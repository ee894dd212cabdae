// Browser wiring: one container re-rendered on every state change.

import { ApiClient } from "./api.js";
import { renderApp } from "./render.js";
import { ConsoleController } from "./state.js";

const controller = new ConsoleController(new ApiClient(""));
const app = document.getElementById("app");
if (!app) {
  throw new Error("missing #app container");
}

controller.subscribe((state) => {
  app.innerHTML = renderApp(state);

  const promptBox = document.getElementById("prompt") as HTMLInputElement | null;
  const prompt = () => {
    const value = promptBox?.value.trim();
    return value ? value : undefined;
  };

  document.getElementById("btn-start")?.addEventListener("click", () => {
    void controller.start({ max_depth: 6 });
  });
  document.getElementById("btn-platform")?.addEventListener("click", () => {
    void controller.requestPlatform(prompt());
  });
  document.getElementById("btn-tilt")?.addEventListener("click", () => {
    void controller.requestTilt(prompt());
  });
});
