// Summarization page: submit the job, track monotone progress, render the
// per-group, per-speaker summaries with flagged toxic references.

import { api, ApiError } from "../api.js";
import { banner, clear, el } from "../dom.js";
import { pollJob } from "../progress.js";
import type { SummariesPayload } from "../types.js";

export function renderSummarization(container: HTMLElement): void {
  clear(container);
  container.append(el("h2", {}, ["Toxic-aware summarization"]));

  const datasetSelect = el("select", {});
  const conversationSelect = el("select", {});
  const providerSelect = el("select", {});
  const startButton = el("button", {}, ["Summarize"]);
  container.append(
    el("div", { class: "toolbar" }, [
      el("label", {}, ["dataset ", datasetSelect]),
      el("label", {}, ["conversation ", conversationSelect]),
      el("label", {}, ["provider ", providerSelect]),
      startButton,
    ]),
  );
  const barOuter = el("div", { class: "progress-outer" });
  const barInner = el("div", { class: "progress-inner" });
  barOuter.append(barInner);
  const status = el("p", { class: "muted" }, [""]);
  const output = el("div", {});
  container.append(barOuter, status, output);

  datasetSelect.addEventListener("change", () => void loadConversations());

  async function loadConversations(): Promise<void> {
    clear(conversationSelect);
    try {
      const { conversations } = await api.conversations(datasetSelect.value);
      for (const key of conversations) {
        conversationSelect.append(el("option", { value: key }, [key]));
      }
    } catch {
      // ignore: not a conversation-level dataset
    }
  }

  void (async () => {
    try {
      const [{ datasets }, config] = await Promise.all([api.listDatasets(), api.config()]);
      for (const dataset of datasets) {
        if (dataset.layout === "conversation-level") {
          datasetSelect.append(el("option", { value: dataset.dataset_id }, [dataset.name]));
        }
      }
      for (const provider of (config.providers as { provider_id: string }[]) ?? []) {
        providerSelect.append(
          el("option", { value: provider.provider_id }, [provider.provider_id]),
        );
      }
      await loadConversations();
    } catch (error) {
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  })();

  startButton.addEventListener("click", async () => {
    clear(output);
    barInner.style.width = "0%";
    status.textContent = "submitting...";
    try {
      const handle = await api.submitJob("summarization", {
        dataset_id: datasetSelect.value,
        conversation_key: conversationSelect.value,
        provider_id: providerSelect.value,
      });
      pollJob(() => api.pollJob(handle.job_id), {
        intervalMs: 400,
        onProgress: (fraction, snapshot) => {
          barInner.style.width = `${Math.round(fraction * 100)}%`;
          status.textContent = `${snapshot.state}: ${snapshot.completed}/${snapshot.total} chunks`;
        },
        onDone: (snapshot) => {
          status.textContent = "done";
          show(snapshot.result as SummariesPayload);
        },
        onFailed: (snapshot) => {
          status.textContent = snapshot.state;
          banner(container, snapshot.error ?? "summarization failed");
        },
      });
    } catch (error) {
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  });

  function show(payload: SummariesPayload): void {
    clear(output);
    for (const group of payload.groups) {
      const section = el("section", { class: "group" }, [
        el("h3", {}, [`topic group ${group.group_id}`]),
      ]);
      for (const chunk of group.chunks) {
        const card = el("div", { class: "card" }, [
          el("h4", {}, [`turns ${chunk.start}-${chunk.end} (${chunk.chunk_id})`]),
        ]);
        for (const [speaker, text] of Object.entries(chunk.per_speaker)) {
          card.append(el("p", {}, [el("strong", {}, [speaker + ": "]), text]));
        }
        if (chunk.flagged_refs.length) {
          card.append(
            el("p", { class: "flagged" }, [
              `flagged toxic messages: ${chunk.flagged_refs.join(", ")}`,
            ]),
          );
        }
        if (chunk.failed_speakers.length) {
          card.append(
            el("p", { class: "muted" }, [
              `failed speakers: ${chunk.failed_speakers.join(", ")}`,
            ]),
          );
        }
        section.append(card);
      }
      output.append(section);
    }
  }
}
