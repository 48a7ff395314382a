import { ApiError, StudioApi } from "./api.js";
import { debounce, Debounced, LatestWins } from "./debounce.js";
import {
  MAX_PINS,
  StudioState,
  clampAttribute,
  decodeFragment,
  encodeFragment,
  initialState,
  pinSnapshot,
  stateKey,
} from "./state.js";
import { SweepCache } from "./sweep.js";
import type { Schema, Snapshot, SynthesisResponse } from "./types.js";

export interface StudioOptions {
  debounceMs?: number;
  retryMs?: number;
  sweepSteps?: number;
  randomSeed?: () => number;
}

/**
 * The attribute studio: sliders drive debounced synthesis of all modalities;
 * snapshots can be pinned and scrubbed through a prefetched interpolation.
 */
export class Studio {
  schema: Schema | null = null;
  state: StudioState = { attributes: {}, seed: 0, pins: [] };
  requestCount = 0;

  private api: StudioApi;
  private root: HTMLElement;
  private win: Window;
  private debounced: Debounced<[]>;
  private inflight = new LatestWins<SynthesisResponse | null>();
  private lastKey: string | null = null;
  private retryMs: number;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private randomSeed: () => number;
  sweeps: SweepCache;

  constructor(root: HTMLElement, api: StudioApi, win: Window, options: StudioOptions = {}) {
    this.root = root;
    this.api = api;
    this.win = win;
    this.retryMs = options.retryMs ?? 2000;
    this.randomSeed = options.randomSeed ?? (() => Math.floor(Math.random() * 2 ** 31));
    this.debounced = debounce(() => void this.synthesizeNow(), options.debounceMs ?? 250);
    this.sweeps = new SweepCache(api, options.sweepSteps ?? 9);
  }

  async init(): Promise<void> {
    try {
      this.schema = await this.api.getSchema();
    } catch (e) {
      this.renderBanner(`cannot reach service: ${String(e)}`);
      return;
    }
    this.state = decodeFragment(this.win.location.hash, this.schema);
    this.renderControls();
    await this.synthesizeNow();
  }

  /** Slider/seed change entry point; clamps, syncs the fragment, debounces. */
  onControlChange(name: string, value: number): void {
    this.state = {
      ...this.state,
      attributes: { ...this.state.attributes, [name]: clampAttribute(value) },
    };
    this.syncFragment();
    this.debounced.call();
  }

  onSeedChange(seed: number): void {
    this.state = { ...this.state, seed: Math.max(0, Math.floor(seed)) };
    this.syncFragment();
    this.debounced.call();
  }

  reroll(): void {
    const seed = this.randomSeed();
    const field = this.root.querySelector<HTMLInputElement>("#seed-field");
    if (field) field.value = String(seed);
    this.onSeedChange(seed);
  }

  pin(): void {
    if (this.state.pins.length >= MAX_PINS) {
      this.renderBanner(`at most ${MAX_PINS} pins`);
      return;
    }
    this.state = pinSnapshot(this.state);
    this.renderPins();
  }

  async scrub(from: Snapshot, to: Snapshot, position: number): Promise<void> {
    try {
      const frames = await this.sweeps.frames(from, to);
      const frame = this.sweeps.frameAt(frames, position);
      this.renderImages(frame.images);
    } catch (e) {
      this.renderBanner(`sweep failed: ${String(e)}`);
    }
  }

  private syncFragment(): void {
    if (!this.schema) return;
    this.win.location.hash = encodeFragment(this.state, this.schema);
  }

  async synthesizeNow(): Promise<void> {
    if (!this.schema) return;
    const key = stateKey(this.state, this.schema);
    if (key === this.lastKey) return; // identical state: cache hit, no request
    this.requestCount += 1;
    const result = await this.inflight.run(() =>
      this.api
        .synthesize({ attributes: this.state.attributes, seed: this.state.seed })
        .catch((e: unknown) => {
          this.markStale(String(e instanceof ApiError ? e.status : e));
          return null;
        }),
    );
    if (result === undefined) return; // an newer request superseded this one
    if (result === null) {
      this.retryTimer = setTimeout(() => void this.synthesizeNow(), this.retryMs);
      return;
    }
    this.lastKey = key;
    this.clearStale();
    this.renderImages(result.images);
  }

  private markStale(reason: string): void {
    const badge = this.root.querySelector<HTMLElement>("#stale-badge");
    if (badge) {
      badge.hidden = false;
      badge.textContent = `stale (${reason}); retrying`;
    }
  }

  private clearStale(): void {
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.retryTimer = null;
    const badge = this.root.querySelector<HTMLElement>("#stale-badge");
    if (badge) badge.hidden = true;
  }

  private renderBanner(message: string): void {
    let banner = this.root.querySelector<HTMLElement>("#error-banner");
    if (!banner) {
      banner = this.win.document.createElement("div");
      banner.id = "error-banner";
      this.root.prepend(banner);
    }
    banner.textContent = message;
  }

  renderControls(): void {
    if (!this.schema) return;
    const doc = this.win.document;
    this.root.innerHTML = `
      <div id="stale-badge" hidden></div>
      <section id="controls"></section>
      <section id="seed-row">
        <label>seed <input id="seed-field" type="number" min="0" value="${this.state.seed}"></label>
        <button id="reroll">re-roll</button>
        <button id="pin">pin</button>
      </section>
      <section id="grid"></section>
      <section id="pins"></section>
      <section id="scrub-row" hidden>
        <input id="scrubber" type="range" min="0" max="1" step="0.01" value="0">
      </section>`;
    const controls = this.root.querySelector("#controls")!;
    for (const name of this.schema.attributes) {
      const row = doc.createElement("label");
      row.className = "slider-row";
      const slider = doc.createElement("input");
      slider.type = "range";
      slider.min = "-1";
      slider.max = "1";
      slider.step = "0.01";
      slider.value = String(this.state.attributes[name] ?? 0);
      slider.dataset.attribute = name;
      slider.addEventListener("input", () => {
        this.onControlChange(name, Number(slider.value));
      });
      row.append(name, slider);
      controls.append(row);
    }
    const seedField = this.root.querySelector<HTMLInputElement>("#seed-field")!;
    seedField.addEventListener("change", () => this.onSeedChange(Number(seedField.value)));
    this.root.querySelector("#reroll")!.addEventListener("click", () => this.reroll());
    this.root.querySelector("#pin")!.addEventListener("click", () => this.pin());

    const grid = this.root.querySelector("#grid")!;
    for (const modality of this.schema.modalities) {
      const cell = doc.createElement("figure");
      const img = doc.createElement("img");
      img.dataset.modality = modality;
      img.alt = modality;
      const caption = doc.createElement("figcaption");
      caption.textContent = modality;
      cell.append(img, caption);
      grid.append(cell);
    }
  }

  /** Images land in /schema modality order regardless of response key order. */
  renderImages(images: Record<string, string>): void {
    if (!this.schema) return;
    for (const modality of this.schema.modalities) {
      const img = this.root.querySelector<HTMLImageElement>(
        `img[data-modality="${modality}"]`,
      );
      const payload = images[modality];
      if (img && payload) img.src = `data:image/png;base64,${payload}`;
    }
  }

  private renderPins(): void {
    const pins = this.root.querySelector<HTMLElement>("#pins");
    if (!pins) return;
    pins.textContent = this.state.pins
      .map((p, i) => `#${i} seed=${p.seed}`)
      .join("  ");
    const scrubRow = this.root.querySelector<HTMLElement>("#scrub-row");
    if (scrubRow && this.state.pins.length >= 2) {
      scrubRow.hidden = false;
      const scrubber = this.root.querySelector<HTMLInputElement>("#scrubber")!;
      scrubber.oninput = () => {
        const [from, to] = [this.state.pins[0]!, this.state.pins[1]!];
        void this.scrub(from, to, Number(scrubber.value));
      };
    }
  }
}
