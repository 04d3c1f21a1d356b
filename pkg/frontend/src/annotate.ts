/**
 * Blind A/B annotation flow: fetch the next pair, answer the three criterion
 * questions with one of {A, B, Both, None}, submit, advance. Submission is
 * gated until every question is answered; payloads only ever carry the A/B
 * labels, never system identities.
 */

import type { ApiClient, Choice, Criterion, SessionNext } from "./api.js";

export const CRITERIA: Criterion[] = ["multi_perspective", "coherence", "justification"];
export const CHOICES: Choice[] = ["A", "B", "Both", "None"];

export class AnnotateModel {
  current: SessionNext | null = null;
  choices: Partial<Record<Criterion, Choice>> = {};
  submitted = 0;

  constructor(private api: ApiClient, readonly sessionId: string) {}

  async loadNext(): Promise<SessionNext> {
    this.current = await this.api.sessionNext(this.sessionId);
    this.choices = {};
    return this.current;
  }

  get done(): boolean {
    return this.current?.done === true;
  }

  setChoice(criterion: Criterion, choice: Choice): void {
    if (!CRITERIA.includes(criterion)) throw new Error(`unknown criterion ${criterion}`);
    if (!CHOICES.includes(choice)) throw new Error(`invalid choice ${choice}`);
    this.choices[criterion] = choice;
  }

  /** Submit is allowed only when all three questions are answered. */
  get canSubmit(): boolean {
    return (
      this.current !== null &&
      !this.current.done &&
      CRITERIA.every((criterion) => this.choices[criterion] !== undefined)
    );
  }

  async submit(annotator: string): Promise<SessionNext> {
    if (!this.current || this.current.done || !this.current.pair_id) {
      throw new Error("no pair is being served");
    }
    if (!this.canSubmit) throw new Error("answer all three questions before submitting");
    await this.api.postVote(this.sessionId, this.current.pair_id, annotator, this.choices);
    this.submitted += 1;
    return this.loadNext();
  }
}
