// Application shell: sidebar navigation over the seven pages.

import { clear, el } from "./dom.js";
import { renderAssistant } from "./pages/assistant.js";
import { renderClassification } from "./pages/classification.js";
import { renderDataManager } from "./pages/dataManager.js";
import { renderPersona } from "./pages/persona.js";
import { renderPplGain } from "./pages/pplGain.js";
import { renderResultViewer } from "./pages/resultViewer.js";
import { renderSummarization } from "./pages/summarization.js";

const PAGES: { id: string; title: string; render: (c: HTMLElement) => void }[] = [
  { id: "data", title: "Data manager", render: renderDataManager },
  { id: "classify", title: "Classification", render: renderClassification },
  { id: "results", title: "Result viewer", render: renderResultViewer },
  { id: "ppl", title: "Perplexity gain", render: renderPplGain },
  { id: "summarize", title: "Summarization", render: renderSummarization },
  { id: "persona", title: "Persona", render: renderPersona },
  { id: "assistant", title: "Assistant", render: renderAssistant },
];

function mount(): void {
  const root = document.getElementById("app");
  if (!root) return;
  clear(root);
  const sidebar = el("nav", { class: "sidebar" }, [el("h1", {}, ["toxiscope"])]);
  const main = el("main", { class: "content" });
  root.append(sidebar, main);

  const links = new Map<string, HTMLElement>();
  for (const page of PAGES) {
    const link = el("a", { href: `#/${page.id}` }, [page.title]);
    links.set(page.id, link);
    sidebar.append(link);
  }

  function route(): void {
    const id = window.location.hash.replace("#/", "") || PAGES[0].id;
    const page = PAGES.find((p) => p.id === id) ?? PAGES[0];
    for (const [pageId, link] of links) {
      link.classList.toggle("active", pageId === page.id);
    }
    page.render(main);
  }

  window.addEventListener("hashchange", route);
  route();
}

document.addEventListener("DOMContentLoaded", mount);
