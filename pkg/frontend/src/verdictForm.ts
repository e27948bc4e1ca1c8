/** Verdict form state and the client-side mirror of the server invariant:
 * a drop verdict needs a concrete reason, a keep verdict carries
 * "not_applicable". The server re-checks either way (422 on violation). */

import type { DecisionRequest, DropReason, Verdict } from "./types.js";

export interface VerdictFormState {
  verdict: Verdict | null;
  reason: DropReason | null;
  annotator: string;
  note: string;
}

export function emptyForm(annotator = ""): VerdictFormState {
  return { verdict: null, reason: null, annotator, note: "" };
}

/** Pre-fill from an existing decision so the form mirrors recorded state. */
export function prefilledForm(
  verdict: Verdict,
  reason: string | null,
  annotator = "",
): VerdictFormState {
  const dropReason =
    verdict === "drop" && reason && reason !== "not_applicable"
      ? (reason as DropReason)
      : null;
  return { verdict, reason: dropReason, annotator, note: "" };
}

export function canSubmit(state: VerdictFormState): boolean {
  if (state.verdict === null) return false;
  if (state.annotator.trim() === "") return false;
  if (state.verdict === "drop" && state.reason === null) return false;
  return true;
}

export function validationMessage(state: VerdictFormState): string | null {
  if (state.verdict === null) return "Pick keep or drop.";
  if (state.annotator.trim() === "") return "Annotator name is required.";
  if (state.verdict === "drop" && state.reason === null)
    return "Dropping a cluster requires a reason.";
  return null;
}

export function toDecisionRequest(state: VerdictFormState): DecisionRequest {
  if (!canSubmit(state)) {
    throw new Error(validationMessage(state) ?? "form is not submittable");
  }
  return {
    verdict: state.verdict as Verdict,
    reason: state.verdict === "keep" ? "not_applicable" : (state.reason as DropReason),
    annotator: state.annotator.trim(),
    note: state.note.trim() === "" ? null : state.note.trim(),
  };
}
