// @vitest-environment happy-dom
import { beforeEach, describe, expect, it, vi } from "vitest";

import type { ClusterCard, ExemplarSet, Progress } from "../src/types.js";
import {
  lowestUndecided,
  renderClusterList,
  renderClusterReview,
  renderDashboard,
  renderRetryBanner,
} from "../src/views.js";

function card(overrides: Partial<ClusterCard> = {}): ClusterCard {
  return {
    cluster_id: 0,
    size: 12,
    mean_distance: 0.25,
    decided: false,
    verdict: null,
    ...overrides,
  };
}

function exemplarSet(overrides: Partial<ExemplarSet> = {}): ExemplarSet {
  return {
    cluster_id: 0,
    size: 12,
    closest: [
      { doc_id: "a", distance: 0.01, excerpt: "close one" },
      { doc_id: "b", distance: 0.02, excerpt: "close two" },
    ],
    farthest: [{ doc_id: "z", distance: 0.91, excerpt: "far one" }],
    ...overrides,
  };
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "<main id='app'></main>";
  root = document.getElementById("app") as HTMLElement;
});

describe("cluster list", () => {
  it("renders one row per cluster with server-provided verdict badges", () => {
    const clusters = [
      card({ cluster_id: 0 }),
      card({ cluster_id: 1, decided: true, verdict: "drop" }),
      card({ cluster_id: 2, decided: true, verdict: "keep" }),
    ];
    renderClusterList(root, clusters, () => {});
    const rows = root.querySelectorAll("tbody tr");
    expect(rows).toHaveLength(3);
    expect(rows[1]?.querySelector(".badge")?.textContent).toBe("drop");
    expect(rows[2]?.querySelector(".badge")?.textContent).toBe("keep");
    expect(rows[0]?.querySelector(".badge")?.textContent).toBe("undecided");
  });

  it("open button navigates by cluster id", () => {
    const onOpen = vi.fn();
    renderClusterList(root, [card({ cluster_id: 7 })], onOpen);
    (root.querySelector("button.open") as HTMLButtonElement).click();
    expect(onOpen).toHaveBeenCalledWith(7);
  });
});

describe("cluster review", () => {
  const handlers = () => ({ onSubmit: vi.fn(), onExpandDoc: vi.fn() });

  it("shows both exemplar lists with distances", () => {
    renderClusterReview(root, card(), exemplarSet(), handlers());
    const sections = root.querySelectorAll("section.exemplars");
    expect(sections).toHaveLength(2);
    expect(sections[0]?.querySelectorAll("li")).toHaveLength(2);
    expect(sections[1]?.querySelectorAll("li")).toHaveLength(1);
    expect(sections[0]?.textContent).toContain("0.010000");
  });

  it("renders adversarial text as plain text, never markup", () => {
    const hostile = '<img src=x onerror="window.pwned = true"><script>bad()</script>';
    renderClusterReview(
      root,
      card(),
      exemplarSet({ closest: [{ doc_id: "evil", distance: 0.1, excerpt: hostile }], farthest: [] }),
      handlers(),
    );
    const excerpt = root.querySelector("pre.excerpt") as HTMLElement;
    expect(excerpt.textContent).toBe(hostile);
    expect(excerpt.querySelector("img")).toBeNull();
    expect(excerpt.querySelector("script")).toBeNull();
    expect((window as unknown as { pwned?: boolean }).pwned).toBeUndefined();
  });

  it("submit stays disabled for drop until a reason is chosen", () => {
    renderClusterReview(root, card(), exemplarSet(), handlers(), "annie");
    const submit = root.querySelector("button.submit") as HTMLButtonElement;
    const reason = root.querySelector("select.reason") as HTMLSelectElement;
    const drop = root.querySelector(
      "input[name=verdict][value=drop]",
    ) as HTMLInputElement;

    expect(submit.disabled).toBe(true); // nothing picked yet
    drop.click();
    expect(submit.disabled).toBe(true); // drop without reason
    expect(root.querySelector(".form-error")?.textContent).toMatch(/reason/);
    expect(reason.disabled).toBe(false);

    reason.value = "near_duplicates";
    reason.dispatchEvent(new Event("change"));
    expect(submit.disabled).toBe(false);
  });

  it("keep is submittable immediately and disables the reason select", () => {
    renderClusterReview(root, card(), exemplarSet(), handlers(), "annie");
    const keep = root.querySelector(
      "input[name=verdict][value=keep]",
    ) as HTMLInputElement;
    keep.click();
    expect((root.querySelector("select.reason") as HTMLSelectElement).disabled).toBe(true);
    expect((root.querySelector("button.submit") as HTMLButtonElement).disabled).toBe(false);
  });

  it("submit hands the form state to the handler", () => {
    const h = handlers();
    renderClusterReview(root, card(), exemplarSet(), h, "annie");
    (root.querySelector("input[name=verdict][value=keep]") as HTMLInputElement).click();
    root
      .querySelector("form.verdict-form")!
      .dispatchEvent(new Event("submit", { cancelable: true }));
    expect(h.onSubmit).toHaveBeenCalledOnce();
    expect(h.onSubmit.mock.calls[0]?.[0]).toMatchObject({
      verdict: "keep",
      annotator: "annie",
    });
  });

  it("never submits an invalid form even on a forced submit event", () => {
    const h = handlers();
    renderClusterReview(root, card(), exemplarSet(), h, "annie");
    (root.querySelector("input[name=verdict][value=drop]") as HTMLInputElement).click();
    root
      .querySelector("form.verdict-form")!
      .dispatchEvent(new Event("submit", { cancelable: true }));
    expect(h.onSubmit).not.toHaveBeenCalled();
  });

  it("recorded verdict shows badge and pre-fills the form", () => {
    renderClusterReview(
      root,
      card({ decided: true, verdict: "keep" }),
      exemplarSet(),
      handlers(),
      "annie",
    );
    expect(root.querySelector("header .badge")?.textContent).toBe("keep");
    const keep = root.querySelector(
      "input[name=verdict][value=keep]",
    ) as HTMLInputElement;
    expect(keep.checked).toBe(true);
  });

  it("full-text expansion delegates to the handler with the target node", () => {
    const h = handlers();
    renderClusterReview(root, card(), exemplarSet(), h);
    (root.querySelector("button.expand") as HTMLButtonElement).click();
    expect(h.onExpandDoc).toHaveBeenCalledOnce();
    const [docId, target] = h.onExpandDoc.mock.calls[0] as [string, HTMLElement];
    expect(docId).toBe("a");
    expect(target.classList.contains("full-text")).toBe(true);
  });
});

describe("dashboard", () => {
  const progress: Progress = {
    total_clusters: 10,
    decided: 6,
    undecided: 4,
    kept: 4,
    dropped: 2,
    drop_reasons: { near_duplicates: 1, other: 1 },
  };

  it("shows decided/undecided counts and per-reason tallies", () => {
    renderDashboard(root, progress, null);
    const values = Array.from(root.querySelectorAll(".stat .value")).map(
      (n) => n.textContent,
    );
    expect(values).toEqual(["10", "6", "4", "4", "2"]);
    const reasonRows = root.querySelectorAll(".drop-reasons tr");
    expect(reasonRows).toHaveLength(2);
    expect(root.querySelector("tr[data-reason=near_duplicates] td.num")?.textContent).toBe("1");
  });

  it("next-undecided shortcut button fires the callback", () => {
    const onNext = vi.fn();
    renderDashboard(root, progress, onNext);
    (root.querySelector("button.next-undecided") as HTMLButtonElement).click();
    expect(onNext).toHaveBeenCalledOnce();
  });

  it("omits the shortcut when everything is decided", () => {
    renderDashboard(root, progress, null);
    expect(root.querySelector("button.next-undecided")).toBeNull();
  });
});

describe("navigation helpers", () => {
  it("lowestUndecided picks the smallest undecided id", () => {
    const clusters = [
      card({ cluster_id: 5 }),
      card({ cluster_id: 2, decided: true, verdict: "keep" }),
      card({ cluster_id: 3 }),
    ];
    expect(lowestUndecided(clusters)).toBe(3);
  });

  it("lowestUndecided is null when all are decided", () => {
    expect(
      lowestUndecided([card({ cluster_id: 1, decided: true, verdict: "drop" })]),
    ).toBeNull();
  });
});

describe("retry banner", () => {
  it("renders the message and retries on click", () => {
    const onRetry = vi.fn();
    renderRetryBanner(root, "Review service unreachable.", onRetry);
    expect(root.textContent).toContain("unreachable");
    (root.querySelector("button.retry") as HTMLButtonElement).click();
    expect(onRetry).toHaveBeenCalledOnce();
  });
});
