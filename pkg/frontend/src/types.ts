export interface Schema {
  attributes: string[];
  modalities: string[];
  max_resolution: number;
  model_hash: string;
}

export interface SynthesisRequest {
  attributes: Record<string, number>;
  seed?: number;
  modalities?: string[];
  resolution?: number;
}

export interface SynthesisResponse {
  images: Record<string, string>; // modality -> base64 PNG
  attributes: Record<string, number>;
  seed: number | null;
  model_hash: string;
}

export interface InterpolateFrame extends SynthesisResponse {
  beta: number;
}

export interface InterpolateResponse {
  frames: InterpolateFrame[];
  from_seed: number;
  to_seed: number;
}

/** One pinned (attributes, seed) snapshot for compare/scrub. */
export interface Snapshot {
  attributes: Record<string, number>;
  seed: number;
}
