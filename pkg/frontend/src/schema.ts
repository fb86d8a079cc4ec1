import { z } from "zod";

export const WorldConfigSchema = z.object({
  tray_radius_m: z.number().positive(),
  layer_gap_m: z.number().positive(),
  layers: z.number().int().positive(),
  manway: z.object({
    center: z.tuple([z.number(), z.number()]),
    theta: z.number(),
    L_l: z.number().positive(),
    L_s: z.number().positive(),
  }),
  epsilon_m: z.number().nonnegative(),
  pad_l_m: z.number(),
  pad_s_m: z.number(),
  buffer_margin_m: z.number().nonnegative(),
});

export type WorldConfig = z.infer<typeof WorldConfigSchema>;

export const TRACE_HEADER =
  "tick,node,layer,x,y,yaw,vx,vy,h1,h2,filter," +
  "fl_x,fl_y,fr_x,fr_y,bl_x,bl_y,br_x,br_y,swing,zone";

export const FEET = ["fl", "fr", "bl", "br"] as const;
export type Foot = (typeof FEET)[number];

export interface TraceRow {
  tick: number;
  node: string;
  layer: number;
  x: number;
  y: number;
  yaw: number;
  vx: number;
  vy: number;
  h1: number;
  h2: number;
  filter: boolean;
  feet: Record<Foot, [number, number]>;
  swing: string;
  zone: string;
}

export class TraceSchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TraceSchemaError";
  }
}

/** Parse the mission trace CSV; the header is part of the contract. */
export function parseTrace(text: string): TraceRow[] {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0 || lines[0] !== TRACE_HEADER) {
    throw new TraceSchemaError(
      `trace header mismatch: expected "${TRACE_HEADER}", got "${lines[0] ?? ""}"`,
    );
  }
  const expected = TRACE_HEADER.split(",").length;
  const rows: TraceRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== expected) {
      throw new TraceSchemaError(`row ${i} has ${parts.length} columns, expected ${expected}`);
    }
    const num = (idx: number): number => {
      const v = Number(parts[idx]);
      if (!Number.isFinite(v)) {
        throw new TraceSchemaError(`row ${i} column ${idx} is not a number: ${parts[idx]}`);
      }
      return v;
    };
    rows.push({
      tick: num(0),
      node: parts[1],
      layer: num(2),
      x: num(3),
      y: num(4),
      yaw: num(5),
      vx: num(6),
      vy: num(7),
      h1: num(8),
      h2: num(9),
      filter: parts[10] === "1",
      feet: {
        fl: [num(11), num(12)],
        fr: [num(13), num(14)],
        bl: [num(15), num(16)],
        br: [num(17), num(18)],
      },
      swing: parts[19],
      zone: parts[20],
    });
  }
  return rows;
}

export function parseWorld(text: string): WorldConfig {
  const parsed = WorldConfigSchema.safeParse(JSON.parse(text));
  if (!parsed.success) {
    throw new TraceSchemaError(`world config invalid: ${parsed.error.message}`);
  }
  return parsed.data;
}
