// Data manager: upload files, list datasets, preview records, delete uploads.

import { api, ApiError } from "../api.js";
import { banner, clear, el } from "../dom.js";

export function renderDataManager(container: HTMLElement): void {
  clear(container);
  container.append(el("h2", {}, ["Data manager"]));

  const fileInput = el("input", { type: "file", accept: ".csv,.jsonl" });
  const nameInput = el("input", { type: "text", placeholder: "dataset name" });
  const uploadButton = el("button", {}, ["Upload"]);
  container.append(el("div", { class: "toolbar" }, [fileInput, nameInput, uploadButton]));

  const table = el("table", { class: "data-table" });
  const preview = el("pre", { class: "preview" });
  container.append(table, preview);

  uploadButton.addEventListener("click", async () => {
    const file = fileInput.files?.[0];
    if (!file) {
      banner(container, "choose a file first");
      return;
    }
    try {
      const result = await api.uploadDataset(file, nameInput.value || file.name);
      banner(
        container,
        `ingested ${result.report.record_count} records` +
          (result.report.dropped_empty
            ? ` (${result.report.dropped_empty} empty rows dropped)`
            : ""),
      );
      await refresh();
    } catch (error) {
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  });

  async function refresh(): Promise<void> {
    clear(table);
    const header = el("tr", {}, []);
    for (const column of ["name", "id", "layout", "records", "origin", ""]) {
      header.append(el("th", {}, [column]));
    }
    table.append(header);
    try {
      const { datasets } = await api.listDatasets();
      for (const dataset of datasets) {
        const row = el("tr", {}, [
          el("td", {}, [dataset.name]),
          el("td", { class: "mono" }, [dataset.dataset_id]),
          el("td", {}, [dataset.layout]),
          el("td", {}, [String(dataset.record_count)]),
          el("td", {}, [dataset.origin]),
        ]);
        const actions = el("td", {}, []);
        const previewButton = el("button", { class: "small" }, ["preview"]);
        previewButton.addEventListener("click", async () => {
          const { records } = await api.records(dataset.dataset_id, 0, 10);
          preview.textContent = records
            .map((record) => JSON.stringify(record))
            .join("\n");
        });
        actions.append(previewButton);
        if (dataset.origin === "user-upload") {
          const deleteButton = el("button", { class: "small danger" }, ["delete"]);
          deleteButton.addEventListener("click", async () => {
            try {
              await api.deleteDataset(dataset.dataset_id);
              await refresh();
            } catch (error) {
              banner(container, error instanceof ApiError ? error.detail : String(error));
            }
          });
          actions.append(deleteButton);
        }
        row.append(actions);
        table.append(row);
      }
    } catch (error) {
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  }

  void refresh();
}
