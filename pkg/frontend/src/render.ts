import { SvgDoc } from "./svg.js";
import { FEET, Foot, TraceRow, WorldConfig } from "./schema.js";

/** Locomotion-stage colors; transition-adjacent stages echo the hardware
 * figures (blue inspection, green waypoint, red transition-ready, yellow
 * pre-motion, purple transition). */
export const ZONE_COLORS: Record<string, string> = {
  search: "#999999",
  inspect: "#1f6fd8",
  waypoint: "#1faa59",
  approach: "#d62728",
  premotion: "#e6b400",
  transition: "#8e44ad",
  postmotion: "#b07a3c",
  safe: "#16a2a2",
  halted: "#222222",
  done: "#444444",
};

export const FOOT_COLORS: Record<Foot, string> = {
  fl: "#1f6fd8", // front-left: blue
  fr: "#111111", // front-right: black
  bl: "#d62728", // back-left: red
  br: "#8e44ad", // back-right: purple
};

export const SCALE_PX_PER_M = 400;
const MARGIN_PX = 40;

export interface GeometryMap {
  scale: number;
  width: number;
  height: number;
  toPx(x: number, y: number): [number, number];
}

export function geometryMap(world: WorldConfig): GeometryMap {
  const extent = world.tray_radius_m * 1.1;
  const scale = SCALE_PX_PER_M;
  const width = Math.round(2 * extent * scale) + 2 * MARGIN_PX;
  const height = width;
  const cx = width / 2;
  const cy = height / 2;
  return {
    scale,
    width,
    height,
    toPx: (x: number, y: number) => [cx + x * scale, cy - y * scale],
  };
}

function rectCorners(
  center: [number, number],
  theta: number,
  long: number,
  short: number,
): Array<[number, number]> {
  const c = Math.cos(theta);
  const s = Math.sin(theta);
  const out: Array<[number, number]> = [];
  for (const [su, sv] of [
    [-1, -1],
    [1, -1],
    [1, 1],
    [-1, 1],
  ]) {
    const u = (su * long) / 2;
    const v = (sv * short) / 2;
    out.push([center[0] + c * u - s * v, center[1] + s * u + c * v]);
  }
  return out;
}

/** Tray circle, manway rectangle, buffered rectangle and keep-out ellipse. */
export function drawWorld(doc: SvgDoc, world: WorldConfig, map: GeometryMap): void {
  const [cx, cy] = map.toPx(0, 0);
  doc.circle(cx, cy, world.tray_radius_m * map.scale, {
    fill: "none",
    stroke: "black",
    "stroke-width": 2,
    id: "tray-circle",
  });
  doc.circle(cx, cy, (world.tray_radius_m - world.epsilon_m) * map.scale, {
    fill: "none",
    stroke: "#555555",
    "stroke-width": 1,
    "stroke-dasharray": "6 4",
    id: "safe-circle",
  });
  const { center, theta, L_l, L_s } = world.manway;
  doc.polygon(
    rectCorners(center, theta, L_l, L_s).map(([x, y]) => map.toPx(x, y)),
    { fill: "#a8c7f0", stroke: "#1f6fd8", "stroke-width": 2, id: "manway-rect" },
  );
  doc.polygon(
    rectCorners(
      center,
      theta,
      L_l + 2 * world.buffer_margin_m,
      L_s + 2 * world.buffer_margin_m,
    ).map(([x, y]) => map.toPx(x, y)),
    { fill: "none", stroke: "#d62728", "stroke-width": 2, id: "buffer-rect" },
  );
  const [ex, ey] = map.toPx(center[0], center[1]);
  doc.ellipse(
    ex,
    ey,
    (L_l + world.pad_l_m) * map.scale,
    (L_s + world.pad_s_m) * map.scale,
    (-theta * 180) / Math.PI,
    {
      fill: "none",
      stroke: "#888888",
      "stroke-width": 1,
      "stroke-dasharray": "4 4",
      id: "keepout-ellipse",
    },
  );
}

/** Figure 1: base path, colored by mission zone. */
export function renderPath(world: WorldConfig, rows: TraceRow[]): string {
  const map = geometryMap(world);
  const doc = new SvgDoc(map.width, map.height);
  drawWorld(doc, world, map);
  let segment: Array<[number, number]> = [];
  let zone: string | null = null;
  const flush = () => {
    if (segment.length > 1 && zone !== null) {
      doc.polyline(segment, {
        stroke: ZONE_COLORS[zone] ?? "#666666",
        "stroke-width": 2.5,
        class: `path-${zone}`,
      });
    }
    segment = [];
  };
  for (const row of rows) {
    if (row.zone !== zone) {
      const last = segment[segment.length - 1];
      flush();
      zone = row.zone;
      if (last) segment.push(last);
    }
    segment.push(map.toPx(row.x, row.y));
  }
  flush();
  doc.text(10, 20, "base path by mission stage");
  return doc.render();
}

/** Figure 2: the two barrier values against time, zero line dashed. */
export function renderBarriers(rows: TraceRow[], dt = 0.01): string {
  const width = 900;
  const height = 420;
  const margin = 50;
  const doc = new SvgDoc(width, height);
  const values = rows.flatMap((r) => [r.h1, r.h2]);
  const hMin = Math.min(0, ...(values.length ? values : [0])) - 0.1;
  const hMax = Math.max(1, ...(values.length ? values : [1])) + 0.1;
  const tMax = Math.max(rows.length - 1, 1) * dt;
  const toPx = (t: number, h: number): [number, number] => [
    margin + ((width - 2 * margin) * t) / tMax,
    height - margin - ((height - 2 * margin) * (h - hMin)) / (hMax - hMin),
  ];
  doc.line(margin, height - margin, width - margin, height - margin, {
    stroke: "black",
    "stroke-width": 1,
  });
  doc.line(margin, margin, margin, height - margin, { stroke: "black", "stroke-width": 1 });
  const [, zeroY] = toPx(0, 0);
  doc.line(margin, zeroY, width - margin, zeroY, {
    stroke: "black",
    "stroke-width": 1,
    "stroke-dasharray": "6 4",
    id: "zero-line",
  });
  if (rows.length > 0) {
    doc.polyline(
      rows.map((r) => toPx(r.tick * dt, r.h1)),
      { stroke: "#1f6fd8", "stroke-width": 1.5, id: "h1-series" },
    );
    doc.polyline(
      rows.map((r) => toPx(r.tick * dt, r.h2)),
      { stroke: "#e6720e", "stroke-width": 1.5, id: "h2-series" },
    );
  }
  doc.text(margin, 24, "barrier values vs time (manway: blue, tray edge: orange)");
  doc.text(width - margin - 60, height - margin + 28, "time [s]");
  return doc.render();
}

/** Figure 3: committed stance positions per foot over the run. */
export function renderFootholds(world: WorldConfig, rows: TraceRow[]): string {
  const map = geometryMap(world);
  const doc = new SvgDoc(map.width, map.height);
  drawWorld(doc, world, map);
  const seen = new Set<string>();
  for (const row of rows) {
    if (row.zone === "transition") continue;
    for (const foot of FEET) {
      if (row.swing.toLowerCase() === foot) continue;
      const [x, y] = row.feet[foot];
      const key = `${foot}:${x}:${y}`;
      if (seen.has(key)) continue;
      seen.add(key);
      const [px, py] = map.toPx(x, y);
      doc.circle(px, py, 4, {
        fill: FOOT_COLORS[foot],
        "fill-opacity": 0.8,
        stroke: "none",
        class: `foot-${foot}`,
      });
    }
  }
  doc.text(10, 20, "footholds (FL blue, FR black, BL red, BR purple)");
  return doc.render();
}

export interface RenderedFigures {
  path: string;
  barriers: string;
  footholds: string;
}

export function renderAll(world: WorldConfig, rows: TraceRow[]): RenderedFigures {
  return {
    path: renderPath(world, rows),
    barriers: renderBarriers(rows),
    footholds: renderFootholds(world, rows),
  };
}
