/** Session state machine: blinded, ordered presentation with immutable
 * one-shot ratings and a loss-free JSON-lines export. */

import {
  AlreadyRated,
  BadManifest,
  FileReader,
  ManifestInstance,
  MissingFile,
  OutOfRangeScore,
  RatingRecord,
  SurveyManifest,
} from "./types.js";

export class SurveySession {
  readonly subject: string;
  readonly manifest: SurveyManifest;
  /** Presentation order for this subject, as manifest instances. */
  readonly order: ManifestInstance[];
  private cursorIndex = 0;
  private readonly ratings: RatingRecord[] = [];
  private readonly rated = new Set<string>();
  private readonly clock: () => string;

  constructor(manifest: SurveyManifest, subject: string,
              clock?: () => string) {
    const byId = new Map(manifest.instances.map((i) => [i.id, i]));
    const order = manifest.orders[subject];
    if (!order) {
      throw new BadManifest(`no presentation order for subject ${subject}`);
    }
    if (order.length !== manifest.instances.length ||
        new Set(order).size !== order.length) {
      throw new BadManifest(`order for ${subject} is not a permutation`);
    }
    this.order = order.map((id) => {
      const inst = byId.get(id);
      if (!inst) throw new BadManifest(`order references unknown instance ${id}`);
      return inst;
    });
    this.manifest = manifest;
    this.subject = subject;
    this.clock = clock ?? (() => new Date().toISOString());
  }

  get cursor(): number {
    return this.cursorIndex;
  }

  get total(): number {
    return this.order.length;
  }

  get complete(): boolean {
    return this.cursorIndex >= this.order.length;
  }

  get records(): readonly RatingRecord[] {
    return this.ratings;
  }

  current(): ManifestInstance {
    if (this.complete) throw new Error("session already complete");
    return this.order[this.cursorIndex];
  }

  /** Record a 1-5 score for the current instance and advance; ratings are
   * immutable and an instance can never be rated twice. */
  recordRating(score: number): void {
    if (!Number.isInteger(score) || score < 1 || score > 5) {
      throw new OutOfRangeScore(score);
    }
    const inst = this.current();
    if (this.rated.has(inst.id)) throw new AlreadyRated(inst.id);
    this.rated.add(inst.id);
    this.ratings.push({
      subject: this.subject,
      scene: inst.scene,
      method: inst.alias,
      score,
      timestamp: this.clock(),
    });
    this.cursorIndex += 1;
  }

  /** JSON-lines export consumed by the aggregation tool; partial sessions
   * are flagged in a leading comment line. */
  exportRatings(): string {
    const lines: string[] = [];
    if (!this.complete) {
      lines.push(`# incomplete: ${this.ratings.length} of ${this.total} rated`);
    }
    for (const r of this.ratings) {
      lines.push(JSON.stringify(r));
    }
    return lines.join("\n") + "\n";
  }
}

function checkManifestShape(m: SurveyManifest): void {
  if (!Array.isArray(m.instances) || m.instances.length === 0) {
    throw new BadManifest("no instances");
  }
  if (!m.methods || Object.keys(m.methods).length < 2) {
    throw new BadManifest("fewer than two blinded methods");
  }
  if (!m.anchors || !m.anchors.five || !m.anchors.one) {
    throw new BadManifest("missing anchor examples");
  }
  for (const inst of m.instances) {
    if (!m.methods[inst.alias]) {
      throw new BadManifest(`instance ${inst.id} uses unknown alias`);
    }
  }
}

/** Parse the manifest, verify every referenced PLY file loads, and open a
 * session for the given subject. The returned point-cloud bytes are keyed
 * by instance file path (anchors included under their paths). */
export async function loadManifest(
  manifestText: string,
  readFile: FileReader,
  subject: string,
  clock?: () => string,
): Promise<{ session: SurveySession; files: Map<string, ArrayBuffer> }> {
  let manifest: SurveyManifest;
  try {
    manifest = JSON.parse(manifestText) as SurveyManifest;
  } catch (e) {
    throw new BadManifest(`not valid JSON (${(e as Error).message})`);
  }
  checkManifestShape(manifest);

  const files = new Map<string, ArrayBuffer>();
  const wanted = [
    manifest.anchors.five,
    manifest.anchors.one,
    ...manifest.instances.map((i) => i.file),
  ];
  for (const path of wanted) {
    try {
      files.set(path, await readFile(path));
    } catch {
      throw new MissingFile(path);
    }
  }
  return { session: new SurveySession(manifest, subject, clock), files };
}
