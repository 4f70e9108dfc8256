/** Binary little-endian PLY parsing for the point clouds the study uses:
 * float x/y/z vertex properties plus an optional uchar class column. */

export interface ParsedCloud {
  positions: Float32Array; // x0,y0,z0,x1,...
  classes: Uint8Array | null;
  count: number;
}

const HEADER_END = "end_header\n";

export function parsePly(buffer: ArrayBuffer): ParsedCloud {
  const probe = new TextDecoder("ascii").decode(buffer.slice(0, 2048));
  const endIdx = probe.indexOf(HEADER_END);
  if (!probe.startsWith("ply") || endIdx < 0) {
    throw new Error("not a PLY file (missing header)");
  }
  const header = probe.slice(0, endIdx);
  let count = 0;
  const props: { name: string; bytes: number }[] = [];
  for (const line of header.split("\n")) {
    const parts = line.trim().split(/\s+/);
    if (parts[0] === "format" && parts[1] !== "binary_little_endian") {
      throw new Error(`unsupported PLY format ${parts[1]}`);
    }
    if (parts[0] === "element" && parts[1] === "vertex") {
      count = parseInt(parts[2], 10);
    } else if (parts[0] === "property") {
      const bytes = parts[1] === "float" ? 4 : parts[1] === "uchar" ? 1 : 0;
      if (bytes === 0) throw new Error(`unsupported property type ${parts[1]}`);
      props.push({ name: parts[2], bytes });
    }
  }
  const stride = props.reduce((s, p) => s + p.bytes, 0);
  const body = new DataView(buffer, endIdx + HEADER_END.length);
  if (body.byteLength < count * stride) {
    throw new Error("PLY body shorter than the vertex count promises");
  }

  const positions = new Float32Array(count * 3);
  const hasClass = props.some((p) => p.name === "class");
  const classes = hasClass ? new Uint8Array(count) : null;
  for (let i = 0; i < count; i++) {
    let off = i * stride;
    for (const p of props) {
      const slot = ["x", "y", "z"].indexOf(p.name);
      if (slot >= 0) {
        positions[i * 3 + slot] = body.getFloat32(off, true);
      } else if (p.name === "class" && classes) {
        classes[i] = body.getUint8(off);
      }
      off += p.bytes;
    }
  }
  return { positions, classes, count };
}
