#!/usr/bin/env node
/** CLI: plot_trace TRACE.csv WORLD.json OUTDIR
 *
 * Writes path.svg, barriers.svg and footholds.svg into OUTDIR. Read-only
 * over its inputs; repeated runs overwrite the same outputs.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { parseTrace, parseWorld, TraceSchemaError } from "./schema.js";
import { renderAll } from "./render.js";

export function plotTrace(tracePath: string, worldPath: string, outDir: string): string[] {
  const rows = parseTrace(readFileSync(tracePath, "utf-8"));
  const world = parseWorld(readFileSync(worldPath, "utf-8"));
  const figures = renderAll(world, rows);
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  for (const [name, content] of Object.entries({
    "path.svg": figures.path,
    "barriers.svg": figures.barriers,
    "footholds.svg": figures.footholds,
  })) {
    const target = join(outDir, name);
    writeFileSync(target, content);
    written.push(target);
  }
  return written;
}

function main(): number {
  const args = process.argv.slice(2);
  if (args.length !== 3) {
    console.error("usage: plot_trace TRACE.csv WORLD.json OUTDIR");
    return 2;
  }
  try {
    const written = plotTrace(args[0], args[1], args[2]);
    for (const path of written) {
      console.log(`wrote ${path}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof TraceSchemaError) {
      console.error(`schema error: ${err.message}`);
    } else {
      console.error(String(err));
    }
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("plot_trace.js")) {
  process.exit(main());
}
