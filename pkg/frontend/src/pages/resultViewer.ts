// Result viewer: browse stored classification results with top-k labels,
// including the 2nd most probable.

import { api, ApiError } from "../api.js";
import { banner, clear, el } from "../dom.js";
import { rankedLabels } from "../report.js";
import type { ClassificationPayload, Prediction } from "../types.js";

export function renderResultViewer(container: HTMLElement): void {
  clear(container);
  container.append(el("h2", {}, ["Result viewer"]));

  const datasetSelect = el("select", {});
  const kSelect = el("select", {});
  for (const k of [1, 2, 3]) {
    kSelect.append(el("option", { value: String(k) }, [`top-${k}`]));
  }
  kSelect.value = "2";
  const loadButton = el("button", {}, ["Load latest result"]);
  container.append(
    el("div", { class: "toolbar" }, [
      el("label", {}, ["dataset ", datasetSelect]),
      el("label", {}, ["labels ", kSelect]),
      loadButton,
    ]),
  );
  const output = el("div", {});
  container.append(output);

  void (async () => {
    try {
      const { datasets } = await api.listDatasets();
      for (const dataset of datasets) {
        datasetSelect.append(el("option", { value: dataset.dataset_id }, [dataset.name]));
      }
    } catch (error) {
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  })();

  loadButton.addEventListener("click", async () => {
    clear(output);
    try {
      const payload = (await api.latestResult(
        datasetSelect.value,
        "classification",
      )) as unknown as ClassificationPayload;
      show(payload, Number(kSelect.value));
    } catch (error) {
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  });

  function show(payload: ClassificationPayload, k: number): void {
    const table = el("table", { class: "data-table" });
    const header = el("tr", {}, []);
    for (const column of ["message", "prediction", `top-${k} (label: probability)`]) {
      header.append(el("th", {}, [column]));
    }
    table.append(header);
    for (const prediction of payload.predictions as Prediction[]) {
      const ranked = rankedLabels(prediction, k)
        .map((r) => `${r.rank}. ${r.label}: ${r.probability.toFixed(4)}`)
        .join("  ");
      table.append(
        el("tr", {}, [
          el("td", { class: "mono" }, [prediction.message_id]),
          el("td", {}, [prediction.argmax_label]),
          el("td", {}, [ranked]),
        ]),
      );
    }
    output.append(
      el("p", {}, [
        `classifier ${payload.classifier_id} on schema ${payload.schema_id}`,
      ]),
      table,
    );
  }
}
