// Browser wiring: token entry, live queue, decision screen. The token is
// held in sessionStorage only; the API base URL comes from the
// `complygate-api-base` meta tag (same origin by default).

import { ApiClient } from "./api.js";
import { render } from "./render.js";
import { ConsoleController } from "./state.js";
import type { Release } from "./types.js";

const TOKEN_KEY = "complygate_token";
const REFRESH_INTERVAL_MS = 15_000;

function apiBase(): string {
  const meta = document.querySelector('meta[name="complygate-api-base"]');
  return meta?.getAttribute("content") ?? "";
}

function main(): void {
  const app = document.getElementById("app");
  if (!app) throw new Error("missing #app container");

  const controller = new ConsoleController();
  let rationale = "";

  const redraw = () => {
    app.innerHTML = render(controller.state, rationale, new Date());
  };
  controller.onChange(redraw);
  redraw();

  const connect = (token: string) => {
    sessionStorage.setItem(TOKEN_KEY, token);
    void controller.connect(new ApiClient(apiBase(), token));
  };

  const savedToken = sessionStorage.getItem(TOKEN_KEY);
  if (savedToken) connect(savedToken);

  setInterval(() => {
    if (controller.state.phase === "queue" && !controller.state.submitting) {
      void controller.refresh();
    }
  }, REFRESH_INTERVAL_MS);

  app.addEventListener("submit", (event) => {
    const form = event.target as HTMLFormElement;
    const action = form.dataset.action;
    if (!action) return;
    event.preventDefault();
    const data = new FormData(form);
    if (action === "connect") {
      const token = String(data.get("token") ?? "").trim();
      if (token) connect(token);
    } else if (action === "filter") {
      void controller.setFilters({
        ecosystem: String(data.get("ecosystem") ?? "").trim() || undefined,
        license: String(data.get("license") ?? "").trim() || undefined,
      });
    }
  });

  app.addEventListener("input", (event) => {
    const target = event.target as HTMLTextAreaElement;
    if (target.name === "rationale") {
      rationale = target.value;
      // Only the reject button's disabled state depends on the rationale;
      // update it in place so typing does not lose focus to a redraw.
      const reject = app.querySelector<HTMLButtonElement>('[data-action="reject"]');
      if (reject && !controller.state.reviewerBlocked && !controller.state.submitting) {
        reject.disabled = rationale.trim().length === 0;
      }
    }
  });

  app.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!target) return;
    const action = target.dataset.action;
    if (action === "open") {
      const releaseId = target.dataset.releaseId;
      const release = controller.state.items.find(
        (r: Release) => r.release_id === releaseId,
      );
      if (release) {
        rationale = "";
        void controller.select(release);
      }
    } else if (action === "back") {
      event.preventDefault();
      rationale = "";
      controller.deselect();
    } else if (action === "retry") {
      void controller.refresh();
    } else if (action === "dismiss-notice") {
      controller.dismissNotice();
    } else if (action === "approve") {
      event.preventDefault();
      void controller.decide("cleared", rationale).then(() => (rationale = ""));
    } else if (action === "reject") {
      event.preventDefault();
      void controller.decide("rejected", rationale).then(() => (rationale = ""));
    }
  });
}

main();
