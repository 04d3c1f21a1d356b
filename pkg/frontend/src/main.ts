/** Hash router: #/review/<quandary-id> and #/annotate/<session-id>. */

import { ApiClient } from "./api.js";
import { AnnotateView, clear, h, ReviewView } from "./dom.js";

const api = new ApiClient("");

function home(root: HTMLElement): void {
  clear(root);
  const reviewInput = h("input", { type: "text", placeholder: "quandary id" }) as HTMLInputElement;
  const annotateInput = h("input", { type: "text", placeholder: "session id" }) as HTMLInputElement;
  root.append(
    h("h2", {}, ["Quandary workbench"]),
    h("p", {}, [
      "Two workflows: review and confirm the principles that will guide an answer, " +
        "or blindly compare answer pairs.",
    ]),
    h("div", { class: "controls" }, [
      reviewInput,
      h("button", { onclick: () => (location.hash = `#/review/${reviewInput.value.trim()}`) }, ["open review"]),
    ]),
    h("div", { class: "controls" }, [
      annotateInput,
      h("button", { onclick: () => (location.hash = `#/annotate/${annotateInput.value.trim()}`) }, [
        "open annotation session",
      ]),
    ]),
  );
}

async function route(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const hash = location.hash;
  const review = hash.match(/^#\/review\/(.+)$/);
  const annotate = hash.match(/^#\/annotate\/(.+)$/);
  if (review?.[1]) {
    await new ReviewView(api, root, decodeURIComponent(review[1])).mount();
  } else if (annotate?.[1]) {
    await new AnnotateView(api, root, decodeURIComponent(annotate[1])).mount();
  } else {
    home(root);
  }
}

window.addEventListener("hashchange", () => void route());
void route();
