import { ReviewApi } from "./api.js";
import { ReviewApp } from "./app.js";
import { renderRunPicker, renderServiceDown } from "./render.js";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const api = new ReviewApi("");
  const runId = new URLSearchParams(window.location.search).get("run");
  if (runId) {
    new ReviewApp(root, api, runId).start();
    return;
  }
  try {
    root.innerHTML = renderRunPicker(await api.getRuns());
  } catch (err) {
    root.innerHTML = renderServiceDown(err instanceof Error ? err.message : String(err));
    root
      .querySelector<HTMLButtonElement>('[data-role="retry"]')
      ?.addEventListener("click", () => void boot());
  }
}

void boot();
