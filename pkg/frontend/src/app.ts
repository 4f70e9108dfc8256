/** Browser wiring: calibration screen, blinded stimulus loop, rating
 * buttons, export download. Serve the survey output directory (manifest.json
 * + ply/) next to this app. */

import { parsePly } from "./ply.js";
import { loadManifest } from "./session.js";
import { PointCloudViewer } from "./viewer.js";

const fetchFile = async (path: string): Promise<ArrayBuffer> => {
  const resp = await fetch(path);
  if (!resp.ok) throw new Error(`${resp.status} for ${path}`);
  return resp.arrayBuffer();
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

type Phase = "cal-five" | "cal-one" | "rating" | "done";

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const subject = params.get("subject") ?? "subject_00";

  const manifestText = new TextDecoder().decode(
    await fetchFile("manifest.json"));
  const { session, files } = await loadManifest(manifestText, fetchFile,
    subject);
  const manifest = session.manifest;

  const canvas = el<HTMLCanvasElement>("view");
  const viewer = new PointCloudViewer(canvas, canvas.clientWidth,
    canvas.clientHeight);
  const status = el<HTMLDivElement>("status");
  const buttons = el<HTMLDivElement>("buttons");

  let phase: Phase = "cal-five";

  const render = () => {
    switch (phase) {
      case "cal-five":
        viewer.show(parsePly(files.get(manifest.anchors.five)!), "anchor");
        status.textContent =
          "Calibration: this is category 5 (excellent quality). " +
          "Press any button to continue.";
        break;
      case "cal-one":
        viewer.show(parsePly(files.get(manifest.anchors.one)!), "anchor");
        status.textContent =
          "Calibration: this is category 1 (bad quality). " +
          "Press any button to begin.";
        break;
      case "rating": {
        const inst = session.current();
        viewer.show(parsePly(files.get(inst.file)!), inst.scene);
        status.textContent =
          `Stimulus ${session.cursor + 1} of ${session.total}` +
          ` — ${viewer.pointCount} points — rate 1 (bad) to 5 (excellent)`;
        break;
      }
      case "done": {
        status.textContent = "Session complete — thank you.";
        const blob = new Blob([session.exportRatings()],
          { type: "application/x-ndjson" });
        const link = el<HTMLAnchorElement>("download");
        link.href = URL.createObjectURL(blob);
        link.download = `ratings_${subject}.jsonl`;
        link.style.display = "inline";
        link.textContent = "Download ratings";
        break;
      }
    }
  };

  const onScore = (score: number) => {
    if (phase === "cal-five") {
      phase = "cal-one";
    } else if (phase === "cal-one") {
      phase = "rating";
    } else if (phase === "rating") {
      session.recordRating(score);
      if (session.complete) phase = "done";
    }
    render();
  };

  for (let score = 1; score <= 5; score++) {
    const b = document.createElement("button");
    b.textContent = String(score);
    b.onclick = () => onScore(score);
    buttons.appendChild(b);
  }

  render();
}

start().catch((e) => {
  document.body.textContent = `failed to start: ${e}`;
});
