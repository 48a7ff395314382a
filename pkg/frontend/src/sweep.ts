import type { StudioApi } from "./api.js";
import type { InterpolateFrame, Snapshot } from "./types.js";

function snapshotKey(s: Snapshot): string {
  const names = Object.keys(s.attributes).sort();
  return `${s.seed}|${names.map((n) => `${n}:${s.attributes[n]}`).join(",")}`;
}

/**
 * Interpolation frames between two pinned snapshots. The sweep is fetched
 * once; scrubbing is pure client-side frame selection afterwards.
 */
export class SweepCache {
  private cache = new Map<string, InterpolateFrame[]>();
  fetchCount = 0;

  constructor(private readonly api: StudioApi, readonly steps = 9) {}

  private key(from: Snapshot, to: Snapshot): string {
    return `${snapshotKey(from)}=>${snapshotKey(to)}|${this.steps}`;
  }

  async frames(from: Snapshot, to: Snapshot): Promise<InterpolateFrame[]> {
    const key = this.key(from, to);
    let frames = this.cache.get(key);
    if (!frames) {
      this.fetchCount += 1;
      const response = await this.api.interpolate(
        { attributes: from.attributes, seed: from.seed },
        { attributes: to.attributes, seed: to.seed },
        this.steps,
      );
      frames = response.frames;
      this.cache.set(key, frames);
    }
    return frames;
  }

  /** Map a scrub position in [0, 1] to its nearest frame. */
  frameAt(frames: InterpolateFrame[], position: number): InterpolateFrame {
    const clamped = Math.min(1, Math.max(0, position));
    const index = Math.round(clamped * (frames.length - 1));
    const frame = frames[index];
    if (!frame) throw new Error("empty sweep");
    return frame;
  }
}
