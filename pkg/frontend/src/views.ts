/** DOM construction for the three screens. Corpus text is always injected
 * through textContent (never innerHTML): documents are untrusted and must
 * render as plain text. */

import type {
  ClusterCard,
  Exemplar,
  ExemplarSet,
  Progress,
} from "./types.js";
import { DROP_REASONS, REASON_LABELS } from "./types.js";
import {
  VerdictFormState,
  canSubmit,
  emptyForm,
  prefilledForm,
  validationMessage,
} from "./verdictForm.js";

type Child = Node | string;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Child[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

export function lowestUndecided(clusters: ClusterCard[]): number | null {
  const undecided = clusters
    .filter((c) => !c.decided)
    .map((c) => c.cluster_id);
  return undecided.length ? Math.min(...undecided) : null;
}

export function verdictBadge(card: ClusterCard): HTMLElement {
  if (!card.decided || card.verdict === null) {
    return el("span", { class: "badge undecided" }, ["undecided"]);
  }
  return el("span", { class: `badge ${card.verdict}` }, [card.verdict]);
}

export function renderClusterList(
  container: HTMLElement,
  clusters: ClusterCard[],
  onOpen: (clusterId: number) => void,
): void {
  container.replaceChildren();
  const rows = clusters.map((card) => {
    const open = el("button", { class: "open", "data-cluster": String(card.cluster_id) }, [
      `cluster ${card.cluster_id}`,
    ]);
    open.addEventListener("click", () => onOpen(card.cluster_id));
    return el("tr", { "data-cluster": String(card.cluster_id) }, [
      el("td", {}, [open]),
      el("td", { class: "num" }, [String(card.size)]),
      el("td", { class: "num" }, [card.mean_distance.toFixed(4)]),
      el("td", {}, [verdictBadge(card)]),
    ]);
  });
  container.append(
    el("table", { class: "clusters" }, [
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["cluster"]),
          el("th", {}, ["size"]),
          el("th", {}, ["mean distance"]),
          el("th", {}, ["verdict"]),
        ]),
      ]),
      el("tbody", {}, rows),
    ]),
  );
}

function exemplarItem(
  exemplar: Exemplar,
  onExpand: (docId: string, target: HTMLElement) => void,
): HTMLElement {
  const excerpt = el("pre", { class: "excerpt" });
  excerpt.textContent = exemplar.excerpt;
  const expand = el("button", { class: "expand" }, ["full text"]);
  const fullText = el("pre", { class: "full-text", hidden: "" });
  expand.addEventListener("click", () => onExpand(exemplar.doc_id, fullText));
  return el("li", { "data-doc": exemplar.doc_id }, [
    el("div", { class: "exemplar-head" }, [
      el("code", {}, [exemplar.doc_id]),
      el("span", { class: "distance" }, [exemplar.distance.toFixed(6)]),
      expand,
    ]),
    excerpt,
    fullText,
  ]);
}

export interface ReviewHandlers {
  onSubmit: (state: VerdictFormState) => void;
  onExpandDoc: (docId: string, target: HTMLElement) => void;
}

export function renderClusterReview(
  container: HTMLElement,
  card: ClusterCard,
  exemplars: ExemplarSet,
  handlers: ReviewHandlers,
  defaultAnnotator = "",
): void {
  container.replaceChildren();
  const state: VerdictFormState =
    card.decided && card.verdict !== null
      ? prefilledForm(card.verdict, null, defaultAnnotator)
      : emptyForm(defaultAnnotator);

  container.append(
    el("header", { class: "cluster-header" }, [
      el("h2", {}, [`Cluster ${card.cluster_id}`]),
      el("span", { class: "meta" }, [
        `${exemplars.size} documents, mean distance ${card.mean_distance.toFixed(4)}`,
      ]),
      verdictBadge(card),
    ]),
  );

  const listSection = (title: string, items: Exemplar[]) =>
    el("section", { class: "exemplars" }, [
      el("h3", {}, [title]),
      el(
        "ul",
        {},
        items.map((item) => exemplarItem(item, handlers.onExpandDoc)),
      ),
    ]);
  container.append(listSection("Closest to centroid", exemplars.closest));
  container.append(listSection("Farthest from centroid", exemplars.farthest));

  // verdict form
  const error = el("p", { class: "form-error", role: "alert" });
  const submit = el("button", { class: "submit", type: "submit" }, [
    "Record decision",
  ]) as HTMLButtonElement;
  const reasonSelect = el("select", { class: "reason", name: "reason" }, [
    el("option", { value: "" }, ["choose a reason"]),
    ...DROP_REASONS.map((reason) =>
      el("option", { value: reason }, [REASON_LABELS[reason] ?? reason]),
    ),
  ]) as HTMLSelectElement;
  const annotatorInput = el("input", {
    class: "annotator",
    name: "annotator",
    placeholder: "annotator",
    value: state.annotator,
  }) as HTMLInputElement;
  const noteInput = el("textarea", { class: "note", name: "note" }) as HTMLTextAreaElement;

  const sync = () => {
    reasonSelect.disabled = state.verdict !== "drop";
    submit.disabled = !canSubmit(state);
    error.textContent = submit.disabled ? (validationMessage(state) ?? "") : "";
  };

  const radio = (value: "keep" | "drop") => {
    const input = el("input", {
      type: "radio",
      name: "verdict",
      value,
    }) as HTMLInputElement;
    if (state.verdict === value) input.checked = true;
    input.addEventListener("change", () => {
      state.verdict = value;
      if (value === "keep") state.reason = null;
      sync();
    });
    return el("label", { class: `verdict-${value}` }, [input, value]);
  };

  reasonSelect.addEventListener("change", () => {
    state.reason = (reasonSelect.value || null) as VerdictFormState["reason"];
    sync();
  });
  annotatorInput.addEventListener("input", () => {
    state.annotator = annotatorInput.value;
    sync();
  });
  noteInput.addEventListener("input", () => {
    state.note = noteInput.value;
  });

  const form = el("form", { class: "verdict-form" }, [
    el("fieldset", {}, [radio("keep"), radio("drop")]),
    reasonSelect,
    annotatorInput,
    noteInput,
    submit,
    error,
  ]);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (canSubmit(state)) handlers.onSubmit(state);
  });
  if (state.verdict === "drop") {
    // prefill leaves reason unset on purpose: re-dropping needs a fresh reason
    reasonSelect.value = "";
  }
  sync();
  container.append(form);
}

export function renderDashboard(
  container: HTMLElement,
  progress: Progress,
  onNextUndecided: (() => void) | null,
): void {
  container.replaceChildren();
  const stat = (label: string, value: number, cls: string) =>
    el("div", { class: `stat ${cls}` }, [
      el("span", { class: "value" }, [String(value)]),
      el("span", { class: "label" }, [label]),
    ]);
  container.append(
    el("section", { class: "stats" }, [
      stat("clusters", progress.total_clusters, "total"),
      stat("decided", progress.decided, "decided"),
      stat("undecided", progress.undecided, "undecided"),
      stat("kept", progress.kept, "kept"),
      stat("dropped", progress.dropped, "dropped"),
    ]),
  );

  const reasonRows = Object.entries(progress.drop_reasons).map(([reason, count]) =>
    el("tr", { "data-reason": reason }, [
      el("td", {}, [REASON_LABELS[reason] ?? reason]),
      el("td", { class: "num" }, [String(count)]),
    ]),
  );
  container.append(
    el("section", { class: "drop-reasons" }, [
      el("h3", {}, ["Drop reasons"]),
      reasonRows.length
        ? el("table", {}, [el("tbody", {}, reasonRows)])
        : el("p", {}, ["No drops recorded."]),
    ]),
  );

  if (onNextUndecided) {
    const next = el("button", { class: "next-undecided" }, [
      "Review next undecided (n)",
    ]);
    next.addEventListener("click", onNextUndecided);
    container.append(next);
  }
}

export function renderRetryBanner(
  container: HTMLElement,
  message: string,
  onRetry: () => void,
): void {
  container.replaceChildren();
  const retry = el("button", { class: "retry" }, ["Retry"]);
  retry.addEventListener("click", onRetry);
  container.append(
    el("div", { class: "banner error" }, [
      el("span", {}, [message]),
      retry,
    ]),
  );
}
