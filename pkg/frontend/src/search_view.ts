import { ApiClient, clampK } from "./api.js";
import { StickFigurePlayer } from "./player.js";
import type { MetaResponse, SearchResult } from "./types.js";

/** Query box plus ranked result cards.  Card order and scores mirror the
 * API response exactly; clicking a card's caption pre-fills it as the next
 * query.  Rendering is a pure function of the last response. */
export class SearchView {
  readonly input: HTMLInputElement;
  readonly kInput: HTMLInputElement;
  readonly button: HTMLButtonElement;
  readonly error: HTMLElement;
  readonly results: HTMLElement;
  players: StickFigurePlayer[] = [];

  constructor(
    readonly root: HTMLElement,
    private api: ApiClient,
    private meta: MetaResponse,
  ) {
    root.innerHTML = `
      <form class="search-bar">
        <input class="query" type="text" placeholder="describe a motion" />
        <input class="k" type="number" min="1" max="50" value="10" />
        <button type="submit">Search</button>
      </form>
      <p class="error" hidden></p>
      <div class="results"></div>`;
    this.input = root.querySelector(".query") as HTMLInputElement;
    this.kInput = root.querySelector(".k") as HTMLInputElement;
    this.button = root.querySelector("button") as HTMLButtonElement;
    this.error = root.querySelector(".error") as HTMLElement;
    this.results = root.querySelector(".results") as HTMLElement;
    (root.querySelector("form") as HTMLFormElement).addEventListener(
      "submit",
      (ev) => {
        ev.preventDefault();
        void this.submit();
      },
    );
  }

  async submit(): Promise<void> {
    const q = this.input.value.trim();
    if (!q) {
      this.error.textContent = "Enter a query first.";
      this.error.hidden = false;
      return;
    }
    this.error.hidden = true;
    const k = clampK(Number(this.kInput.value) || 10, this.meta.count);
    this.kInput.value = String(k);
    const results = await this.api.search(q, k);
    if (results === null) return; // superseded by a newer query
    this.renderResults(results);
  }

  renderResults(results: SearchResult[]): void {
    for (const p of this.players) p.pause();
    this.players = [];
    this.results.textContent = "";
    results.forEach((r, i) => {
      const card = document.createElement("div");
      card.className = "card";
      card.dataset.id = r.id;
      card.innerHTML = `
        <span class="rank">#${i + 1}</span>
        <span class="score">${r.score.toFixed(2)}</span>
        <canvas width="160" height="160"></canvas>
        <a href="#" class="caption"></a>`;
      const caption = card.querySelector(".caption") as HTMLAnchorElement;
      caption.textContent = r.text;
      caption.addEventListener("click", (ev) => {
        ev.preventDefault();
        this.input.value = r.text;
      });
      this.results.appendChild(card);
      void this.attachPlayer(card, r.id);
    });
  }

  private async attachPlayer(card: HTMLElement, id: string): Promise<void> {
    try {
      const motion = await this.api.motion(id);
      const canvas = card.querySelector("canvas") as HTMLCanvasElement;
      const player = new StickFigurePlayer(canvas, motion, this.meta.bones);
      this.players.push(player);
      player.render();
      player.play();
    } catch {
      // motions without stored joints keep a blank canvas; search still works
    }
  }
}
