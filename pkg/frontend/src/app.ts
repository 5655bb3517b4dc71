/**
 * Two-screen annotation app: blind labeling and rectification of model
 * predictions. All state lives on the server; every button is one API call
 * and the client never recomputes features or labels.
 */

import { ApiClient, ApiError, PairView } from "./api.js";
import { escapeHtml, fmt3, meters, osmLink, percent } from "./format.js";

type Screen = "label" | "rectify";

export class App {
  private readonly api: ApiClient;
  private readonly doc: Document;
  private screen: Screen = "label";
  private current: PairView | null = null;
  private retryAction: (() => Promise<void>) | null = null;

  constructor(doc: Document, apiBase = "") {
    this.doc = doc;
    this.api = new ApiClient(apiBase);
  }

  async start(): Promise<void> {
    this.renderChrome();
    this.doc.addEventListener("keydown", (ev) => this.onKey(ev as KeyboardEvent));
    await this.refreshStats();
    await this.showLabelScreen();
  }

  private $(id: string): HTMLElement {
    const el = this.doc.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el;
  }

  private renderChrome(): void {
    this.$("app").innerHTML = `
      <header class="topbar">
        <span class="brand">placelink annotate</span>
        <nav>
          <button id="nav-label" class="tab active">Label</button>
          <button id="nav-rectify" class="tab">Rectify</button>
        </nav>
        <span id="stats" class="stats">loading…</span>
      </header>
      <div id="banner" class="banner hidden">
        <span id="banner-text"></span>
        <button id="banner-retry">Retry</button>
      </div>
      <main id="screen"></main>
    `;
    this.$("nav-label").addEventListener("click", () => void this.showLabelScreen());
    this.$("nav-rectify").addEventListener("click", () => void this.showRectifyScreen());
    this.$("banner-retry").addEventListener("click", () => void this.retry());
  }

  private setTab(screen: Screen): void {
    this.screen = screen;
    this.$("nav-label").classList.toggle("active", screen === "label");
    this.$("nav-rectify").classList.toggle("active", screen === "rectify");
  }

  // -- error banner ---------------------------------------------------------

  private showBanner(message: string, retry: (() => Promise<void>) | null): void {
    this.retryAction = retry;
    this.$("banner-text").textContent = message;
    this.$("banner").classList.remove("hidden");
    (this.$("banner-retry") as HTMLButtonElement).style.display = retry ? "" : "none";
  }

  private hideBanner(): void {
    this.$("banner").classList.add("hidden");
    this.retryAction = null;
  }

  private async retry(): Promise<void> {
    const action = this.retryAction;
    this.hideBanner();
    if (action) await action();
  }

  /** Run an API action; network failures raise the retry banner. */
  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
      this.hideBanner();
    } catch (err) {
      if (err instanceof ApiError) {
        // conflict or stale pair: surface it and move on to fresh state
        this.showBanner(`Server said ${err.status}: ${err.message}`, null);
        await this.reloadCurrentScreen();
      } else {
        this.showBanner("Network failure; nothing was saved.", action);
      }
    }
  }

  private async reloadCurrentScreen(): Promise<void> {
    if (this.screen === "label") await this.showLabelScreen();
    else await this.showRectifyScreen();
  }

  // -- stats ----------------------------------------------------------------

  private async refreshStats(): Promise<void> {
    try {
      const s = await this.api.stats();
      this.$("stats").textContent =
        `round ${s.round} · labeled ${s.labeled} · pending ${s.pending} · ` +
        `matched ${percent(s.matched_fraction)}`;
    } catch {
      this.$("stats").textContent = "stats unavailable";
    }
  }

  // -- shared pair card -----------------------------------------------------

  private pairCard(pair: PairView): string {
    const f = pair.features;
    const prediction =
      pair.predicted_label !== undefined
        ? `<div class="prediction">model: ${pair.predicted_label === 1 ? "matched" : "unmatched"}` +
          (pair.score !== undefined ? ` (score ${fmt3(pair.score)})` : "") +
          `</div>`
        : "";
    const side = (title: string, p: PairView["restaurant"]) => `
      <div class="side">
        <h3>${title}</h3>
        <div class="place-name">${escapeHtml(p.name)}</div>
        <div class="place-street">${p.street ? escapeHtml(p.street) : "<em>no street</em>"}</div>
        <div class="place-geo">${p.lat.toFixed(5)}, ${p.lon.toFixed(5)}
          <a href="${osmLink(p.lat, p.lon)}" target="_blank" rel="noopener">map</a>
        </div>
      </div>`;
    return `
      <div class="pair-card" data-pair-id="${escapeHtml(pair.pair_id)}">
        ${prediction}
        <div class="sides">
          ${side("Restaurant", pair.restaurant)}
          ${side("POI", pair.poi)}
        </div>
        <table class="features">
          <tr>
            <td>distance <b>${meters(f.geo_distance_m)}</b></td>
            <td>name lev <b>${fmt3(f.name_lev)}</b></td>
            <td>name jaro <b>${fmt3(f.name_jaro)}</b></td>
            <td>street lev <b>${fmt3(f.street_lev)}</b>${f.street_missing ? " (imputed)" : ""}</td>
          </tr>
        </table>
      </div>`;
  }

  private roundForm(): string {
    return `
      <div class="round-form">
        <label>sample <input id="round-n" type="number" value="2000" min="1"></label>
        <label>seed <input id="round-seed" type="number" value="0"></label>
        <button id="round-go">Run bootstrap round</button>
        <span id="round-result"></span>
      </div>`;
  }

  private bindRoundForm(): void {
    this.$("round-go").addEventListener("click", () => void this.runRound());
  }

  private async runRound(): Promise<void> {
    const n = parseInt((this.$("round-n") as HTMLInputElement).value, 10) || 2000;
    const seed = parseInt((this.$("round-seed") as HTMLInputElement).value, 10) || 0;
    await this.guard(async () => {
      const result = await this.api.bootstrapRound(n, seed);
      this.$("round-result").textContent =
        `auto negatives ${result.auto_negatives}, queued for rectify ${result.queued_for_rectify}`;
      await this.refreshStats();
    });
  }

  // -- label screen -----------------------------------------------------------

  async showLabelScreen(): Promise<void> {
    this.setTab("label");
    await this.guard(async () => {
      this.current = await this.api.nextPair();
      if (this.current === null) {
        this.$("screen").innerHTML = `
          <div class="empty">
            <p>Queue empty — nothing awaits a label.</p>
            <p>Run a bootstrap round to triage a fresh sample:</p>
            ${this.roundForm()}
          </div>`;
        this.bindRoundForm();
        return;
      }
      this.$("screen").innerHTML = `
        ${this.pairCard(this.current)}
        <div class="actions">
          <button id="btn-matched" class="matched">Matched (m)</button>
          <button id="btn-unmatched" class="unmatched">Unmatched (u)</button>
        </div>`;
      this.$("btn-matched").addEventListener("click", () => void this.label(1));
      this.$("btn-unmatched").addEventListener("click", () => void this.label(0));
    });
  }

  private async label(value: 0 | 1): Promise<void> {
    const pair = this.current;
    if (!pair) return;
    await this.guard(async () => {
      await this.api.labelPair(pair.pair_id, value);
      await this.refreshStats();
      await this.showLabelScreen(); // optimistic advance to the next pair
    });
  }

  private onKey(ev: KeyboardEvent): void {
    if (this.screen !== "label" || this.current === null) return;
    if (ev.key === "m") void this.label(1);
    else if (ev.key === "u") void this.label(0);
  }

  // -- rectify screen ---------------------------------------------------------

  async showRectifyScreen(): Promise<void> {
    this.setTab("rectify");
    await this.guard(async () => {
      const queue = await this.api.rectifyQueue(50);
      const rows = queue
        .map(
          (pair) => `
          <div class="rectify-row" data-pair-id="${escapeHtml(pair.pair_id)}">
            ${this.pairCard(pair)}
            <div class="actions">
              <button class="confirm matched">Confirm match</button>
              <button class="override unmatched">Override: unmatched</button>
            </div>
          </div>`,
        )
        .join("");
      this.$("screen").innerHTML = `
        <div class="rectify-top">
          <p>${queue.length} predicted matches awaiting review.
             <span id="rectify-status" class="rectify-status"></span></p>
          ${this.roundForm()}
        </div>
        <div id="rectify-list">${rows || "<p class='empty'>Nothing to rectify.</p>"}</div>`;
      this.bindRoundForm();
      for (const row of Array.from(this.doc.querySelectorAll(".rectify-row"))) {
        const pairId = (row as HTMLElement).dataset.pairId!;
        row.querySelector(".confirm")!.addEventListener("click", () => void this.rectify(pairId, 1));
        row.querySelector(".override")!.addEventListener("click", () => void this.rectify(pairId, 0));
      }
    });
  }

  private async rectify(pairId: string, value: 0 | 1): Promise<void> {
    await this.guard(async () => {
      const saved = await this.api.rectify(pairId, value);
      for (const row of Array.from(this.doc.querySelectorAll(".rectify-row"))) {
        if ((row as HTMLElement).dataset.pairId === pairId) row.remove();
      }
      const status = this.doc.getElementById("rectify-status");
      if (status) status.textContent = `${pairId} saved as ${saved.provenance}`;
      await this.refreshStats();
    });
  }
}

export async function initApp(doc: Document, apiBase = ""): Promise<App> {
  const app = new App(doc, apiBase);
  await app.start();
  return app;
}
