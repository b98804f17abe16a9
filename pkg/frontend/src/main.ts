import { StudyApi } from "./api.js";
import { DomView, preloadImage } from "./dom.js";
import { StudyFlow } from "./flow.js";

function start(): void {
  const root = document.getElementById("app") ?? document.body;
  const intro = document.createElement("div");
  intro.style.cssText = "font-family:sans-serif;text-align:center;margin-top:48px;";
  intro.innerHTML =
    "<h2>Image comparison study</h2>" +
    "<p>You will see pairs of images side by side for a few seconds each.<br>" +
    "For every pair, judge whether the two images are identical or different.<br>" +
    "You can answer while the images are visible or take as long as you need after.</p>";
  const button = document.createElement("button");
  button.textContent = "Begin";
  button.style.cssText = "padding:12px 40px;font-size:18px;cursor:pointer;";
  intro.appendChild(button);
  root.appendChild(intro);

  button.addEventListener("click", async () => {
    intro.remove();
    const api = new StudyApi("");
    const view = new DomView(root as HTMLElement);
    const flow = new StudyFlow(api, view, undefined, { preload: preloadImage });
    view.setAnswerHandler((choice) => flow.answer(choice));
    try {
      await flow.run();
    } catch (err) {
      const msg = document.createElement("p");
      msg.textContent = `The study hit an error: ${String(err)}. Please tell the experimenter.`;
      root.appendChild(msg);
    }
  });
}

start();
