export interface SearchResult {
  id: string;
  score: number;
  text: string;
}

export interface MotionPayload {
  fps: number;
  joints: number[][][]; // frames x J x 3
}

export interface Segment {
  start: number;
  end: number;
  score: number;
}

export interface LocalizeResponse {
  curve: number[];
  window: number;
  stride: number;
  best: Segment;
}

export interface MetaResponse {
  count: number;
  d: number;
  fps: number;
  joint_count: number | null;
  bones: number[][] | null;
  split: string | null;
}
