/**
 * Principle review flow: load ranked candidates, build a selection basket
 * (capped at three), optionally add free-text principles, confirm the
 * selection, trigger generation, and surface the disclaimer-wrapped answer.
 *
 * The model layer is DOM-free so the cap and gating rules are directly
 * testable; the view in dom.ts renders from it.
 */

import type { AnswerRecord, ApiClient, Candidate, CandidatesResponse, ChosenEntry, SelectionRecord } from "./api.js";

export const MAX_BASKET = 3;

export type BasketEntry =
  | { kind: "candidate"; candidate: Candidate }
  | { kind: "free_text"; text: string };

export type AddResult = { added: true } | { added: false; reason: string };

export class ReviewModel {
  candidates: CandidatesResponse | null = null;
  basket: BasketEntry[] = [];
  selection: SelectionRecord | null = null;
  answer: AnswerRecord | null = null;

  constructor(private api: ApiClient, readonly quandaryId: string) {}

  async load(topK?: number): Promise<void> {
    this.candidates = await this.api.getCandidates(this.quandaryId, topK);
    this.basket = [];
    this.selection = null;
    this.answer = null;
  }

  /** Re-fetch candidates after an expired token; basket state is dropped. */
  async refresh(): Promise<void> {
    await this.load(this.candidates?.top_k);
  }

  get polarityLabel(): string {
    if (!this.candidates) return "";
    return this.candidates.polarity === "lower_better" ? "lower is better" : "higher is better";
  }

  addCandidate(candidateId: string): AddResult {
    if (!this.candidates) return { added: false, reason: "candidates not loaded" };
    if (this.basket.length >= MAX_BASKET) {
      return { added: false, reason: `at most ${MAX_BASKET} principles may be selected` };
    }
    const candidate = this.candidates.candidates.find((c) => c.id === candidateId);
    if (!candidate) return { added: false, reason: `unknown candidate ${candidateId}` };
    if (this.basket.some((e) => e.kind === "candidate" && e.candidate.id === candidateId)) {
      return { added: false, reason: "already in the basket" };
    }
    this.basket.push({ kind: "candidate", candidate });
    return { added: true };
  }

  addFreeText(text: string): AddResult {
    const trimmed = text.trim();
    if (!trimmed) return { added: false, reason: "empty principle text" };
    if (this.basket.length >= MAX_BASKET) {
      return { added: false, reason: `at most ${MAX_BASKET} principles may be selected` };
    }
    this.basket.push({ kind: "free_text", text: trimmed });
    return { added: true };
  }

  removeAt(index: number): void {
    this.basket.splice(index, 1);
  }

  get canConfirm(): boolean {
    return (
      this.candidates !== null &&
      this.selection === null &&
      this.basket.length >= 1 &&
      this.basket.length <= MAX_BASKET
    );
  }

  chosenEntries(): ChosenEntry[] {
    return this.basket.map((entry) =>
      entry.kind === "candidate" ? entry.candidate.id : { text: entry.text },
    );
  }

  /** Confirm the basket, then immediately generate the guided answer. */
  async confirm(annotator: string, seed: number = 0): Promise<AnswerRecord> {
    if (!this.candidates) throw new Error("candidates not loaded");
    if (!this.canConfirm) throw new Error("basket must hold 1..3 principles");
    this.selection = await this.api.postSelection(
      this.quandaryId,
      this.candidates.token,
      this.chosenEntries(),
      annotator,
    );
    this.answer = await this.api.postAnswer(this.quandaryId, seed);
    return this.answer;
  }
}

/**
 * Lines to render for a generated answer: the leading disclaimer, one block
 * per principle-guided segment, the trailing disclaimer. The first and last
 * visible lines are always the disclaimer sentence.
 */
export function answerDisplayLines(answer: AnswerRecord): string[] {
  const wrapped = answer.disclaimer_wrapped.split("\n").filter((line) => line.trim() !== "");
  const disclaimer = wrapped[0] ?? "";
  const segmentBlocks = answer.segments.map((s) => s.text);
  return [disclaimer, ...segmentBlocks, disclaimer];
}
