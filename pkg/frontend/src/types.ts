/** Shared data shapes for the rating instrument. */

/** One stimulus: a scene rendered under one blinded method alias. */
export interface ManifestInstance {
  id: string;
  scene: string;
  alias: string;
  file: string;
}

/** The study manifest produced by the preparation tool. */
export interface SurveyManifest {
  version: number;
  seed: number;
  scenes: string[];
  /** alias token -> method name; never shown to subjects. */
  methods: Record<string, string>;
  instances: ManifestInstance[];
  /** subject id -> ordered instance ids. */
  orders: Record<string, string[]>;
  anchors: { five: string; one: string };
}

/** One collected judgment, already blinded (alias in `method`). */
export interface RatingRecord {
  subject: string;
  scene: string;
  method: string;
  score: number;
  timestamp: string;
}

/** Loads raw bytes for a manifest-relative path (fetch in the browser,
 * the filesystem in tests). */
export type FileReader = (path: string) => Promise<ArrayBuffer>;

export class MissingFile extends Error {
  constructor(public readonly path: string) {
    super(`referenced file is missing: ${path}`);
    this.name = "MissingFile";
  }
}

export class BadManifest extends Error {
  constructor(detail: string) {
    super(`manifest is invalid: ${detail}`);
    this.name = "BadManifest";
  }
}

export class OutOfRangeScore extends Error {
  constructor(score: number) {
    super(`score must be an integer 1..5, got ${score}`);
    this.name = "OutOfRangeScore";
  }
}

export class AlreadyRated extends Error {
  constructor(instanceId: string) {
    super(`instance already rated: ${instanceId}`);
    this.name = "AlreadyRated";
  }
}
