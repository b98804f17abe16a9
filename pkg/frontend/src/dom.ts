// Vanilla-DOM view: two images side by side, then two answer buttons in
// the session's fixed order. Blanking removes the image sources so no
// pixels stay in the document once the display window closes.

import { Choice } from "./api.js";
import { FlowView } from "./flow.js";

export class DomView implements FlowView {
  private left: HTMLImageElement;
  private right: HTMLImageElement;
  private buttons: HTMLDivElement;
  private status: HTMLDivElement;
  private onAnswer: (choice: Choice) => void = () => undefined;

  constructor(root: HTMLElement) {
    root.innerHTML = "";
    const frame = document.createElement("div");
    frame.style.cssText =
      "display:flex;flex-direction:column;align-items:center;gap:16px;" +
      "font-family:sans-serif;margin-top:24px;";

    const pair = document.createElement("div");
    pair.style.cssText = "display:flex;gap:24px;min-height:280px;align-items:center;";
    this.left = document.createElement("img");
    this.right = document.createElement("img");
    for (const img of [this.left, this.right]) {
      img.width = 280;
      img.height = 280;
      img.style.cssText = "image-rendering:pixelated;background:#222;";
      pair.appendChild(img);
    }

    this.buttons = document.createElement("div");
    this.buttons.style.cssText = "display:flex;gap:24px;";

    this.status = document.createElement("div");
    this.status.textContent = "Are the two images identical or different?";

    frame.append(this.status, pair, this.buttons);
    root.appendChild(frame);
  }

  setAnswerHandler(handler: (choice: Choice) => void): void {
    this.onAnswer = handler;
  }

  showPair(left: string, right: string, buttonOrder: string[]): void {
    this.left.src = left;
    this.right.src = right;
    this.left.style.visibility = "visible";
    this.right.style.visibility = "visible";
    this.buttons.innerHTML = "";
    for (const label of buttonOrder) {
      const button = document.createElement("button");
      button.textContent = label.charAt(0).toUpperCase() + label.slice(1);
      button.style.cssText = "padding:10px 28px;font-size:16px;cursor:pointer;";
      button.addEventListener("click", () => this.onAnswer(label as Choice));
      this.buttons.appendChild(button);
    }
  }

  hidePair(): void {
    // drop the sources entirely; visibility alone would leave bytes around
    this.left.removeAttribute("src");
    this.right.removeAttribute("src");
    this.left.style.visibility = "hidden";
    this.right.style.visibility = "hidden";
  }

  showCompletion(submitted: number): void {
    this.buttons.innerHTML = "";
    this.hidePair();
    this.status.textContent =
      `Done - thank you! ${submitted} responses were recorded.`;
  }
}

export function preloadImage(url: string): Promise<void> {
  return new Promise((resolve) => {
    const img = new Image();
    img.onload = () => resolve();
    img.onerror = () => resolve(); // missing preload must not block the study
    img.src = url;
  });
}
