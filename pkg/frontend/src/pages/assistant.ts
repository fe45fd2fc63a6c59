// Assistant page: streaming chat with template shortcuts and history export.

import { api, ApiError } from "../api.js";
import { banner, clear, el } from "../dom.js";
import { openAssistantStream } from "../sse.js";

export function renderAssistant(container: HTMLElement): void {
  clear(container);
  container.append(el("h2", {}, ["AI assistant"]));

  const providerSelect = el("select", {});
  const newSessionButton = el("button", {}, ["New session"]);
  const exportJson = el("a", { class: "small", href: "#" }, ["export .json"]);
  const exportTxt = el("a", { class: "small", href: "#" }, ["export .txt"]);
  container.append(
    el("div", { class: "toolbar" }, [
      el("label", {}, ["provider ", providerSelect]),
      newSessionButton,
      exportJson,
      exportTxt,
    ]),
  );

  const transcript = el("div", { class: "transcript" });
  const input = el("textarea", { placeholder: "ask about the analyzed data...", rows: "3" });
  const sendButton = el("button", {}, ["Send"]);
  const templateSelect = el("select", {});
  for (const templateId of ["", "vawg_detect", "sexism_detect", "explain_prediction"]) {
    templateSelect.append(
      el("option", { value: templateId }, [templateId || "free text"]),
    );
  }
  container.append(
    transcript,
    el("div", { class: "toolbar" }, [templateSelect, input, sendButton]),
  );

  let sessionId: string | null = null;
  let streaming = false; // at most one open stream per session view

  void (async () => {
    try {
      const config = await api.config();
      for (const provider of (config.providers as { provider_id: string }[]) ?? []) {
        providerSelect.append(
          el("option", { value: provider.provider_id }, [provider.provider_id]),
        );
      }
      await newSession();
    } catch (error) {
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  })();

  async function newSession(): Promise<void> {
    const created = await api.createSession();
    sessionId = created.session_id;
    clear(transcript);
    updateExportLinks();
  }

  function updateExportLinks(): void {
    if (!sessionId) return;
    exportJson.setAttribute("href", api.exportSessionUrl(sessionId, "json"));
    exportTxt.setAttribute("href", api.exportSessionUrl(sessionId, "txt"));
  }

  newSessionButton.addEventListener("click", () => void newSession());

  function bubble(role: string, text: string): HTMLElement {
    const node = el("div", { class: `bubble ${role}` }, [text]);
    transcript.append(node);
    transcript.scrollTop = transcript.scrollHeight;
    return node;
  }

  sendButton.addEventListener("click", async () => {
    if (!sessionId || streaming) return;
    const text = input.value.trim();
    const templateId = templateSelect.value;
    if (!text && !templateId) return;
    input.value = "";
    bubble("user", templateId ? `[${templateId}] ${text}` : text);
    const reply = bubble("assistant", "");
    streaming = true;
    const body: Record<string, unknown> = { provider_id: providerSelect.value };
    if (templateId) {
      body.template_id = templateId;
      body.bindings = { conversation: text, labels: text };
    } else {
      body.text = text;
    }
    await openAssistantStream(sessionId, body, {
      onUpdate: (soFar) => {
        reply.textContent = soFar;
        transcript.scrollTop = transcript.scrollHeight;
      },
      onDone: (full) => {
        reply.textContent = full;
        streaming = false;
      },
      onError: (message) => {
        reply.textContent = reply.textContent || "(no reply)";
        banner(container, message);
        streaming = false;
      },
    });
  });
}
