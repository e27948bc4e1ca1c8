/** Hash-routed single-page app over the review API.
 *
 * Routes: #/clusters (default), #/cluster/<id>, #/progress. Every verdict
 * mutation POSTs to the service and re-reads server state afterwards; the
 * UI never computes decision state locally.
 */

import { ApiError, ReviewApi } from "./api.js";
import { VerdictFormState, toDecisionRequest } from "./verdictForm.js";
import {
  lowestUndecided,
  renderClusterList,
  renderClusterReview,
  renderDashboard,
  renderRetryBanner,
} from "./views.js";

const api = new ReviewApi("");
const ANNOTATOR_KEY = "corpus-prune.annotator";

function appRoot(): HTMLElement {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  return root;
}

function navigate(hash: string): void {
  if (window.location.hash === hash) {
    void route();
  } else {
    window.location.hash = hash;
  }
}

async function showClusterList(): Promise<void> {
  const root = appRoot();
  const clusters = await api.listClusters();
  renderClusterList(root, clusters, (id) => navigate(`#/cluster/${id}`));
}

async function showDashboard(): Promise<void> {
  const root = appRoot();
  const [progress, clusters] = await Promise.all([
    api.progress(),
    api.listClusters(),
  ]);
  const next = lowestUndecided(clusters);
  renderDashboard(root, progress, next === null ? null : () => navigate(`#/cluster/${next}`));
}

async function showClusterReview(clusterId: number): Promise<void> {
  const root = appRoot();
  const [clusters, exemplars] = await Promise.all([
    api.listClusters(),
    api.exemplars(clusterId),
  ]);
  const card = clusters.find((c) => c.cluster_id === clusterId);
  if (!card) throw new Error(`unknown cluster ${clusterId}`);

  renderClusterReview(
    root,
    card,
    exemplars,
    {
      onSubmit: (state) => void submitVerdict(clusterId, state),
      onExpandDoc: (docId, target) => void expandDocument(docId, target),
    },
    window.localStorage.getItem(ANNOTATOR_KEY) ?? "",
  );
}

async function submitVerdict(clusterId: number, state: VerdictFormState): Promise<void> {
  const root = appRoot();
  const errorSlot = root.querySelector<HTMLElement>(".form-error");
  try {
    window.localStorage.setItem(ANNOTATOR_KEY, state.annotator.trim());
    await api.postDecision(clusterId, toDecisionRequest(state));
  } catch (err) {
    if (err instanceof ApiError && errorSlot) {
      errorSlot.textContent = err.detail; // 422: inline validation message
      return;
    }
    throw err;
  }
  await showClusterReview(clusterId); // re-read server state
}

async function expandDocument(docId: string, target: HTMLElement): Promise<void> {
  const doc = await api.document(docId);
  target.textContent = doc.text;
  target.removeAttribute("hidden");
}

async function route(): Promise<void> {
  const hash = window.location.hash || "#/clusters";
  const review = hash.match(/^#\/cluster\/(\d+)$/);
  try {
    if (review && review[1] !== undefined) {
      await showClusterReview(Number(review[1]));
    } else if (hash === "#/progress") {
      await showDashboard();
    } else {
      await showClusterList();
    }
  } catch (err) {
    const message =
      err instanceof ApiError
        ? `Service error: ${err.detail}`
        : "Review service unreachable.";
    renderRetryBanner(appRoot(), message, () => void route());
  }
}

async function jumpToNextUndecided(): Promise<void> {
  const clusters = await api.listClusters();
  const next = lowestUndecided(clusters);
  if (next !== null) navigate(`#/cluster/${next}`);
}

export function start(): void {
  window.addEventListener("hashchange", () => void route());
  window.addEventListener("keydown", (event) => {
    const target = event.target as HTMLElement | null;
    const typing =
      target instanceof HTMLInputElement ||
      target instanceof HTMLTextAreaElement ||
      target instanceof HTMLSelectElement;
    if (event.key === "n" && !typing) {
      void jumpToNextUndecided();
    }
  });
  void route();
}

start();
