/** Point-cloud rendering: deterministic per-scene camera, distance-based
 * coloring (brighter = closer), orbit/zoom interaction via three.js. */

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { ParsedCloud } from "./ply.js";

/** Stable 32-bit FNV-1a hash; seeds the per-scene camera. */
export function hashString(s: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** Fixed initial camera pose for a scene: every method of that scene is
 * viewed from exactly the same slightly-elevated orbit position. */
export function initialCamera(sceneId: string): {
  position: [number, number, number];
  target: [number, number, number];
} {
  const h = hashString(sceneId);
  const azimuth = ((h % 360) / 360) * 2 * Math.PI;
  const radius = 28;
  return {
    position: [
      radius * Math.cos(azimuth),
      radius * Math.sin(azimuth),
      14,
    ],
    target: [0, 0, 0],
  };
}

/** Grayscale-ish ramp, brighter for closer points. */
export function distanceColor(dist: number, maxDist: number): [number, number, number] {
  const t = Math.min(Math.max(dist / Math.max(maxDist, 1e-6), 0), 1);
  const b = 1.0 - 0.85 * t;
  return [b, b, 0.25 + 0.75 * b];
}

export function cloudColors(cloud: ParsedCloud): Float32Array {
  const colors = new Float32Array(cloud.count * 3);
  let maxDist = 0;
  const dists = new Float32Array(cloud.count);
  for (let i = 0; i < cloud.count; i++) {
    const x = cloud.positions[i * 3];
    const y = cloud.positions[i * 3 + 1];
    const z = cloud.positions[i * 3 + 2];
    const d = Math.sqrt(x * x + y * y + z * z);
    dists[i] = d;
    if (d > maxDist) maxDist = d;
  }
  for (let i = 0; i < cloud.count; i++) {
    const [r, g, b] = distanceColor(dists[i], maxDist);
    colors[i * 3] = r;
    colors[i * 3 + 1] = g;
    colors[i * 3 + 2] = b;
  }
  return colors;
}

export class PointCloudViewer {
  private renderer: THREE.WebGLRenderer;
  private scene: THREE.Scene;
  private camera: THREE.PerspectiveCamera;
  private controls: OrbitControls;
  private points: THREE.Points | null = null;
  pointCount = 0;

  constructor(canvas: HTMLCanvasElement, width: number, height: number) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setSize(width, height, false);
    this.scene = new THREE.Scene();
    this.scene.background = new THREE.Color(0x0b0e14);
    this.camera = new THREE.PerspectiveCamera(55, width / height, 0.1, 500);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.enableDamping = true;
    const loop = () => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
  }

  /** Replace the displayed cloud; the camera resets to the scene pose. */
  show(cloud: ParsedCloud, sceneId: string): void {
    if (this.points) {
      this.scene.remove(this.points);
      this.points.geometry.dispose();
      (this.points.material as THREE.Material).dispose();
      this.points = null;
    }
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position",
      new THREE.BufferAttribute(cloud.positions, 3));
    geometry.setAttribute("color",
      new THREE.BufferAttribute(cloudColors(cloud), 3));
    const material = new THREE.PointsMaterial({
      size: 0.18,
      vertexColors: true,
      sizeAttenuation: true,
    });
    this.points = new THREE.Points(geometry, material);
    this.scene.add(this.points);
    this.pointCount = cloud.count;

    const pose = initialCamera(sceneId);
    this.camera.position.set(...pose.position);
    this.camera.up.set(0, 0, 1);
    this.controls.target.set(...pose.target);
    this.controls.update();
  }
}
