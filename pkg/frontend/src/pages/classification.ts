// Classification page: pick dataset/classifier/schema, run, show the report.

import { api, ApiError } from "../api.js";
import { banner, clear, el } from "../dom.js";
import { reportRows, reportSummary } from "../report.js";
import type { ClassificationPayload } from "../types.js";

export function renderClassification(container: HTMLElement): void {
  clear(container);
  container.append(el("h2", {}, ["Classification"]));

  const datasetSelect = el("select", {});
  const classifierSelect = el("select", {});
  const schemaSelect = el("select", {});
  const startButton = el("button", {}, ["Start"]);
  container.append(
    el("div", { class: "toolbar" }, [
      el("label", {}, ["dataset ", datasetSelect]),
      el("label", {}, ["classifier ", classifierSelect]),
      el("label", {}, ["schema ", schemaSelect]),
      startButton,
    ]),
  );
  const output = el("div", {});
  container.append(output);

  void (async () => {
    try {
      const [{ datasets }, config] = await Promise.all([
        api.listDatasets(),
        api.config(),
      ]);
      for (const dataset of datasets) {
        datasetSelect.append(
          el("option", { value: dataset.dataset_id }, [dataset.name]),
        );
      }
      const classifiers = (config.classifiers as { classifier_id: string }[]) ?? [];
      for (const classifier of classifiers) {
        classifierSelect.append(
          el("option", { value: classifier.classifier_id }, [classifier.classifier_id]),
        );
      }
      for (const ensembleId of Object.keys(
        (config.ensembles as Record<string, unknown>) ?? {},
      )) {
        classifierSelect.append(el("option", { value: ensembleId }, [ensembleId]));
      }
      for (const schema of ["sexism-binary", "sexism-4class", "sexism-11class"]) {
        schemaSelect.append(el("option", { value: schema }, [schema]));
      }
    } catch (error) {
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  })();

  startButton.addEventListener("click", async () => {
    clear(output);
    output.append(el("p", {}, ["running..."]));
    try {
      const payload = await api.classify(
        datasetSelect.value,
        classifierSelect.value,
        schemaSelect.value,
      );
      showResult(payload);
    } catch (error) {
      clear(output);
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  });

  function showResult(payload: ClassificationPayload): void {
    clear(output);
    output.append(
      el("p", {}, [`${payload.predictions.length} messages classified`]),
    );
    if (!payload.report) {
      output.append(el("p", { class: "muted" }, ["no usable gold labels, report skipped"]));
      return;
    }
    const summary = reportSummary(payload.report);
    output.append(
      el("p", {}, [
        "macro F1 ",
        el("strong", { class: "metric-macro-f1" }, [summary.macroF1]),
        "  accuracy ",
        el("strong", { class: "metric-accuracy" }, [summary.accuracy]),
      ]),
    );
    const table = el("table", { class: "data-table" });
    const header = el("tr", {}, []);
    for (const column of ["label", "precision", "recall", "f1", "support"]) {
      header.append(el("th", {}, [column]));
    }
    table.append(header);
    for (const row of reportRows(payload.report)) {
      table.append(
        el("tr", {}, [
          el("td", {}, [row.label]),
          el("td", {}, [row.precision]),
          el("td", {}, [row.recall]),
          el("td", {}, [row.f1]),
          el("td", {}, [String(row.support)]),
        ]),
      );
    }
    output.append(table);
  }
}
