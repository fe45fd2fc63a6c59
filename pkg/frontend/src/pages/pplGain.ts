// Perplexity-gain page: run an attribution and shade the conversation.

import { api, ApiError } from "../api.js";
import { banner, clear, el } from "../dom.js";
import { heatmapCells, HeatmapLengthMismatch } from "../heatmap.js";
import type { PplGainPayload } from "../types.js";

export function renderPplGain(container: HTMLElement): void {
  clear(container);
  container.append(el("h2", {}, ["Perplexity gain"]));

  const datasetSelect = el("select", {});
  const conversationSelect = el("select", {});
  const providerSelect = el("select", {});
  const outputInput = el("input", {
    type: "text",
    placeholder: "output to attribute (blank = let the model answer first)",
    class: "wide",
  });
  const runButton = el("button", {}, ["Analyze"]);
  container.append(
    el("div", { class: "toolbar" }, [
      el("label", {}, ["dataset ", datasetSelect]),
      el("label", {}, ["conversation ", conversationSelect]),
      el("label", {}, ["provider ", providerSelect]),
    ]),
    el("div", { class: "toolbar" }, [outputInput, runButton]),
  );
  const output = el("div", {});
  container.append(output);

  datasetSelect.addEventListener("change", () => void loadConversations());

  async function loadConversations(): Promise<void> {
    clear(conversationSelect);
    try {
      const { conversations } = await api.conversations(datasetSelect.value);
      for (const key of conversations) {
        conversationSelect.append(el("option", { value: key }, [key]));
      }
    } catch {
      // message-level datasets have no conversations; leave the list empty
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

  runButton.addEventListener("click", async () => {
    clear(output);
    output.append(el("p", {}, ["scoring..."]));
    try {
      const payload = await api.pplGain({
        dataset_id: datasetSelect.value,
        conversation_key: conversationSelect.value,
        provider_id: providerSelect.value,
        output_text: outputInput.value || undefined,
      });
      show(payload);
    } catch (error) {
      clear(output);
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  });

  function show(payload: PplGainPayload): void {
    clear(output);
    let cells;
    try {
      cells = heatmapCells(
        payload.units,
        payload.scores.map((score) => score.intensity),
      );
    } catch (error) {
      if (error instanceof HeatmapLengthMismatch) {
        banner(container, `cannot render heatmap: ${error.message}`);
        return; // no partial render
      }
      throw error;
    }
    output.append(
      el("p", {}, [
        `output: "${payload.output_text ?? ""}"  base perplexity ${payload.ppl_full.toFixed(4)}`,
      ]),
    );
    const list = el("div", { class: "heatmap" });
    for (const cell of cells) {
      list.append(
        el(
          "div",
          { class: "heatmap-row", style: `background: ${cell.background}` },
          [
            el("span", { class: "muted mono" }, [`${cell.index} `]),
            cell.text,
            el("span", { class: "muted" }, [`  (${cell.intensity.toFixed(3)})`]),
          ],
        ),
      );
    }
    output.append(list);
  }
}
