// Persona page: radar plot over the five traits plus per-trait explanations.

import { api, ApiError } from "../api.js";
import { banner, clear, el } from "../dom.js";
import { MissingTrait, radarGeometry, radarSvg, TRAIT_LABELS, TRAIT_ORDER } from "../radar.js";
import type { PersonaPayload } from "../types.js";

export function renderPersona(container: HTMLElement): void {
  clear(container);
  container.append(el("h2", {}, ["Persona analysis"]));

  const datasetSelect = el("select", {});
  const speakerInput = el("input", { type: "text", placeholder: "speaker" });
  const providerSelect = el("select", {});
  const runButton = el("button", {}, ["Analyze"]);
  container.append(
    el("div", { class: "toolbar" }, [
      el("label", {}, ["dataset ", datasetSelect]),
      el("label", {}, ["speaker ", speakerInput]),
      el("label", {}, ["provider ", providerSelect]),
      runButton,
    ]),
  );
  const output = el("div", { class: "persona-grid" });
  container.append(output);

  void (async () => {
    try {
      const [{ datasets }, config] = await Promise.all([api.listDatasets(), api.config()]);
      for (const dataset of datasets) {
        datasetSelect.append(el("option", { value: dataset.dataset_id }, [dataset.name]));
      }
      for (const provider of (config.providers as { provider_id: string }[]) ?? []) {
        providerSelect.append(
          el("option", { value: provider.provider_id }, [provider.provider_id]),
        );
      }
    } catch (error) {
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  })();

  runButton.addEventListener("click", async () => {
    clear(output);
    output.append(el("p", {}, ["profiling..."]));
    try {
      const payload = await api.persona(speakerInput.value, {
        dataset_id: datasetSelect.value,
        provider_id: providerSelect.value,
      });
      show(payload);
    } catch (error) {
      clear(output);
      banner(container, error instanceof ApiError ? error.detail : String(error));
    }
  });

  function show(payload: PersonaPayload): void {
    clear(output);
    let geometry;
    try {
      geometry = radarGeometry(payload.scores);
    } catch (error) {
      if (error instanceof MissingTrait) {
        banner(container, `malformed profile: ${error.message}`);
        return;
      }
      throw error;
    }
    const plot = el("div", { class: "radar-wrap" });
    plot.innerHTML = radarSvg(geometry);
    const panel = el("div", { class: "card" }, [
      el("h3", {}, [`${payload.speaker}`]),
    ]);
    for (const trait of TRAIT_ORDER) {
      panel.append(
        el("p", {}, [
          el("strong", {}, [`${TRAIT_LABELS[trait]} (${payload.scores[trait]}/10): `]),
          payload.explanations[trait] ?? "",
        ]),
      );
    }
    panel.append(el("p", {}, [el("strong", {}, ["Overall: "]), payload.overall]));
    if (payload.warnings.length) {
      panel.append(el("p", { class: "flagged" }, [payload.warnings.join("; ")]));
    }
    panel.append(el("p", { class: "disclaimer" }, [payload.disclaimer]));
    output.append(plot, panel);
  }
}
