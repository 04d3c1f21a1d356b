/** Small DOM helpers plus the two view renderers. */

import type { AnswerRecord, ApiClient } from "./api.js";
import { AnnotateModel, CHOICES, CRITERIA } from "./annotate.js";
import { answerDisplayLines, MAX_BASKET, ReviewModel } from "./review.js";

type Attrs = Record<string, string | ((event: Event) => void)>;

export function h(tag: string, attrs: Attrs = {}, children: (Node | string)[] = []): HTMLElement {
  const el = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      el.addEventListener(key.replace(/^on/, ""), value);
    } else if (key === "class") {
      el.className = value;
    } else {
      el.setAttribute(key, value);
    }
  }
  for (const child of children) {
    el.append(child);
  }
  return el;
}

export function clear(el: HTMLElement): void {
  while (el.firstChild) el.removeChild(el.firstChild);
}

function notice(text: string, kind: "info" | "error" = "info"): HTMLElement {
  return h("div", { class: `notice ${kind}` }, [text]);
}

// ---------------------------------------------------------------------------
// Review view
// ---------------------------------------------------------------------------

export class ReviewView {
  private model: ReviewModel;
  private message = "";

  constructor(private api: ApiClient, private root: HTMLElement, quandaryId: string) {
    this.model = new ReviewModel(api, quandaryId);
  }

  /** An unconfirmed basket survives a hard refresh: it is stashed per
   * pending-selection token and replayed when the same token comes back. */
  private basketKey(): string {
    return `basket:${this.model.candidates?.token ?? ""}`;
  }

  private persistBasket(): void {
    if (!this.model.candidates) return;
    localStorage.setItem(this.basketKey(), JSON.stringify(this.model.chosenEntries()));
  }

  private restoreBasket(): void {
    const stored = this.model.candidates ? localStorage.getItem(this.basketKey()) : null;
    if (!stored) return;
    try {
      for (const entry of JSON.parse(stored) as (string | { text: string })[]) {
        if (typeof entry === "string") this.model.addCandidate(entry);
        else this.model.addFreeText(entry.text);
      }
    } catch {
      localStorage.removeItem(this.basketKey());
    }
  }

  async mount(): Promise<void> {
    try {
      await this.model.load();
      this.restoreBasket();
    } catch (error) {
      this.message = String(error);
    }
    await this.render();
  }

  private async render(): Promise<void> {
    clear(this.root);
    const model = this.model;
    this.root.append(h("h2", {}, [`Principle review — ${model.quandaryId}`]));
    if (this.message) this.root.append(notice(this.message, "error"));

    try {
      const quandary = await this.api.getQuandary(model.quandaryId);
      const ctx = h("div", { class: "quandary" });
      for (const paragraph of quandary.context) ctx.append(h("p", {}, [paragraph]));
      ctx.append(h("p", { class: "question" }, [quandary.question]));
      this.root.append(ctx);
    } catch {
      // Pair payloads may carry the quandary inline instead; keep rendering.
    }

    const candidates = model.candidates;
    if (!candidates) return;

    if (candidates.scorer_fallback) {
      this.root.append(
        notice(
          `The ${candidates.requested_scorer ?? "remote"} scorer is unavailable; ` +
            "showing lexical fallback scores.",
          "error",
        ),
      );
    }
    this.root.append(
      h("p", { class: "meta" }, [
        `scorer ${candidates.scorer_id} (${model.polarityLabel}), ` +
          `threshold ${candidates.threshold}, ${candidates.candidates.length} candidates`,
      ]),
    );

    const list = h("ul", { class: "candidates" });
    for (const candidate of candidates.candidates) {
      list.append(
        h("li", {}, [
          h("span", { class: `badge ${candidate.provenance}` }, [candidate.provenance]),
          h("span", { class: "score" }, [candidate.score.toFixed(3)]),
          h("span", { class: "text" }, [candidate.text]),
          h("button", {
            onclick: () => {
              const result = this.model.addCandidate(candidate.id);
              this.message = result.added ? "" : result.reason;
              this.persistBasket();
              void this.render();
            },
          }, ["add"]),
        ]),
      );
    }
    this.root.append(list);

    const basket = h("ul", { class: "basket" });
    model.basket.forEach((entry, index) => {
      const label = entry.kind === "candidate" ? entry.candidate.text : `${entry.text} (free text)`;
      basket.append(
        h("li", {}, [
          h("span", {}, [label]),
          h("button", {
            onclick: () => {
              this.model.removeAt(index);
              this.persistBasket();
              void this.render();
            },
          }, ["remove"]),
        ]),
      );
    });
    this.root.append(h("h3", {}, [`Basket (${model.basket.length}/${MAX_BASKET})`]), basket);

    const freeText = h("input", { type: "text", placeholder: "Add a principle of your own" }) as HTMLInputElement;
    const annotator = h("input", { type: "text", placeholder: "Your reviewer id" }) as HTMLInputElement;
    const addFree = h("button", {
      onclick: () => {
        const result = this.model.addFreeText(freeText.value);
        this.message = result.added ? "" : result.reason;
        freeText.value = "";
        this.persistBasket();
        void this.render();
      },
    }, ["add free text"]);

    const confirm = h("button", {
      class: "confirm",
      onclick: async () => {
        if (!annotator.value.trim()) {
          this.message = "enter a reviewer id before confirming";
          void this.render();
          return;
        }
        try {
          this.message = "";
          await this.model.confirm(annotator.value.trim());
          localStorage.removeItem(this.basketKey());
        } catch (error) {
          this.message = String(error);
          if (this.message.includes("expired")) {
            await this.model.refresh();
            this.message += " — candidates were re-fetched, please reselect.";
          }
        }
        void this.render();
      },
    }, ["confirm and generate"]) as HTMLButtonElement;
    confirm.disabled = !model.canConfirm;

    this.root.append(h("div", { class: "controls" }, [freeText, addFree, annotator, confirm]));

    if (model.answer) this.root.append(renderAnswer(model.answer));
  }
}

export function renderAnswer(answer: AnswerRecord): HTMLElement {
  const panel = h("div", { class: "answer" });
  const lines = answerDisplayLines(answer);
  panel.append(h("p", { class: "disclaimer" }, [lines[0] ?? ""]));
  for (const block of lines.slice(1, -1)) {
    const section = h("div", { class: "segment" });
    for (const paragraph of block.split("\n\n")) section.append(h("p", {}, [paragraph]));
    panel.append(section);
  }
  panel.append(h("p", { class: "disclaimer" }, [lines[lines.length - 1] ?? ""]));
  return panel;
}

// ---------------------------------------------------------------------------
// Annotation view
// ---------------------------------------------------------------------------

export class AnnotateView {
  private model: AnnotateModel;
  private message = "";

  constructor(private api: ApiClient, private root: HTMLElement, sessionId: string) {
    this.model = new AnnotateModel(api, sessionId);
  }

  async mount(): Promise<void> {
    try {
      await this.model.loadNext();
    } catch (error) {
      this.message = String(error);
    }
    this.render();
  }

  private render(): void {
    clear(this.root);
    const model = this.model;
    this.root.append(h("h2", {}, [`Annotation — session ${model.sessionId}`]));
    if (this.message) this.root.append(notice(this.message, "error"));

    const current = model.current;
    if (!current) return;
    if (current.done) {
      this.root.append(notice(`Session complete: ${current.completed} pairs annotated. Thank you.`));
      return;
    }

    this.root.append(h("p", { class: "meta" }, [`pair ${current.position} of ${current.total}`]));
    if (current.quandary) {
      const ctx = h("div", { class: "quandary" });
      for (const paragraph of current.quandary.context) ctx.append(h("p", {}, [paragraph]));
      ctx.append(h("p", { class: "question" }, [current.quandary.question]));
      this.root.append(ctx);
    }

    const panes = h("div", { class: "panes" });
    for (const label of ["A", "B"] as const) {
      const pane = h("div", { class: "pane" }, [h("h3", {}, [`Answer ${label}`])]);
      for (const paragraph of (current.answers?.[label] ?? "").split("\n\n")) {
        pane.append(h("p", {}, [paragraph]));
      }
      panes.append(pane);
    }
    this.root.append(panes);

    for (const criterion of CRITERIA) {
      const block = h("div", { class: "criterion" }, [
        h("p", { class: "question" }, [current.questions?.[criterion] ?? criterion]),
      ]);
      for (const choice of CHOICES) {
        const id = `${criterion}-${choice}`;
        const input = h("input", {
          type: "radio",
          name: criterion,
          id,
          onchange: () => {
            this.model.setChoice(criterion, choice);
            this.render();
          },
        }) as HTMLInputElement;
        input.checked = model.choices[criterion] === choice;
        block.append(input, h("label", { for: id }, [choice]));
      }
      this.root.append(block);
    }

    const annotator = h("input", { type: "text", placeholder: "Your annotator id" }) as HTMLInputElement;
    annotator.value = localStorage.getItem("annotator") ?? "";
    const submit = h("button", {
      class: "confirm",
      onclick: async () => {
        if (!annotator.value.trim()) {
          this.message = "enter an annotator id";
          this.render();
          return;
        }
        localStorage.setItem("annotator", annotator.value.trim());
        try {
          this.message = "";
          await this.model.submit(annotator.value.trim());
        } catch (error) {
          this.message = String(error);
        }
        this.render();
      },
    }, ["submit votes"]) as HTMLButtonElement;
    submit.disabled = !model.canSubmit;
    this.root.append(h("div", { class: "controls" }, [annotator, submit]));
  }
}
