import type { Schema, Snapshot } from "./types.js";

export const MAX_PINS = 8;

export interface StudioState {
  attributes: Record<string, number>;
  seed: number;
  pins: Snapshot[];
}

/** Attribute values can never leave [-1, 1], whatever the control emits. */
export function clampAttribute(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(1, Math.max(-1, value));
}

export function initialState(schema: Schema, seed = 0): StudioState {
  const attributes: Record<string, number> = {};
  for (const name of schema.attributes) attributes[name] = -1;
  return { attributes, seed, pins: [] };
}

export function setAttribute(state: StudioState, name: string, value: number): StudioState {
  return {
    ...state,
    attributes: { ...state.attributes, [name]: clampAttribute(value) },
  };
}

export function pinSnapshot(state: StudioState): StudioState {
  if (state.pins.length >= MAX_PINS) return state;
  const snap: Snapshot = { attributes: { ...state.attributes }, seed: state.seed };
  return { ...state, pins: [...state.pins, snap] };
}

/** Key identifying one synthesis request; equal keys mean a cache hit. */
export function stateKey(state: StudioState, schema: Schema): string {
  const parts = schema.attributes.map((n) => `${n}:${state.attributes[n] ?? 0}`);
  return `${state.seed}|${parts.join(",")}`;
}

/**
 * URL-fragment serialization. The fragment fully determines the grid:
 * `#seed=42&a_round=1&a_large=-0.5`. Unknown keys are ignored on decode.
 */
export function encodeFragment(state: StudioState, schema: Schema): string {
  const params = new URLSearchParams();
  params.set("seed", String(state.seed));
  for (const name of schema.attributes) {
    params.set(`a_${name}`, String(state.attributes[name] ?? 0));
  }
  return params.toString();
}

export function decodeFragment(fragment: string, schema: Schema): StudioState {
  const params = new URLSearchParams(fragment.replace(/^#/, ""));
  const state = initialState(schema);
  const seed = params.get("seed");
  if (seed !== null && /^\d+$/.test(seed)) state.seed = Number(seed);
  for (const name of schema.attributes) {
    const raw = params.get(`a_${name}`);
    if (raw === null) continue;
    const value = Number(raw);
    if (!Number.isNaN(value)) state.attributes[name] = clampAttribute(value);
  }
  return state;
}
