export { parseTrace, parseWorld, TraceSchemaError, TRACE_HEADER, FEET } from "./schema.js";
export type { TraceRow, WorldConfig, Foot } from "./schema.js";
export {
  FOOT_COLORS,
  SCALE_PX_PER_M,
  ZONE_COLORS,
  geometryMap,
  renderAll,
  renderBarriers,
  renderFootholds,
  renderPath,
} from "./render.js";
export { plotTrace } from "./plot_trace.js";
