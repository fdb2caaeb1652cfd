/**
 * Flat-array bindings for the irstd loss kernels.
 *
 * Grids travel as contiguous row-major typed arrays (float32 for
 * probabilities and gradients, uint8 for masks in {0,1} and 8-bit
 * images). Each call spawns one `python -m irstd.bridgeio` process and
 * exchanges a single request/response over stdin/stdout; results come
 * back as integer status codes, never as exceptions, so training loops
 * are never aborted by the boundary.
 *
 * The Python interpreter is resolved from IRSTD_BRIDGE_PYTHON (default
 * "python3") and must have the irstd package installed. The core
 * library version is verified on first use; a mismatch refuses all
 * calls until resolved.
 */

import { spawnSync } from "node:child_process";

import { decodeResponse, encodeRequest, f32FromBytes, f32ToBytes } from "./proto.js";

/** Version of the core library this wrapper was written against. */
export const EXPECTED_CORE_VERSION = "0.1.0";

export const STATUS = {
  OK: 0,
  SHAPE_MISMATCH: 1,
  STATS_ERROR: 2,
  BAD_REQUEST: 3,
  INTERNAL: 4,
  /** wrapper-level: interpreter could not be spawned or spoke garbage */
  TRANSPORT: 5,
  /** wrapper-level: core library version differs from EXPECTED_CORE_VERSION */
  VERSION_MISMATCH: 6,
} as const;

export type ElementKind = "f32" | "u8";

/** Pointer-free grid descriptor: buffer + dimensions + element kind. */
export interface ArrayView {
  data: Float32Array | Uint8Array;
  height: number;
  width: number;
  kind: ElementKind;
}

export function f32View(data: Float32Array, height: number, width: number): ArrayView {
  return { data, height, width, kind: "f32" };
}

export function u8View(data: Uint8Array, height: number, width: number): ArrayView {
  return { data, height, width, kind: "u8" };
}

function viewOk(v: ArrayView, kind: ElementKind): boolean {
  return (
    v.kind === kind &&
    v.height >= 1 &&
    v.width >= 1 &&
    v.data.length === v.height * v.width &&
    (kind === "f32" ? v.data instanceof Float32Array : v.data instanceof Uint8Array)
  );
}

export type BaseKind = "bce" | "focal" | "tversky" | "iou" | "dice";

export interface TdaOptions {
  sMean: number;
  cMean: number;
  wT: number;
  base: BaseKind;
  seed: number;
  gamma?: number;
  alpha?: number;
  beta?: number;
  eps?: number;
  patchSize?: number;
  dMin?: number;
  dMax?: number;
  fixedP?: number;
}

export interface TdaResult {
  status: number;
  loss: number;
  baseLoss: number;
  tdaLoss: number;
  error?: string;
}

export interface TargetTable {
  status: number;
  count: number;
  label: number[];
  x0: number[];
  y0: number[];
  x1: number[];
  y1: number[];
  scale: number[];
  contrast: number[];
  error?: string;
}

function pythonCommand(): string {
  return process.env.IRSTD_BRIDGE_PYTHON ?? "python3";
}

interface CallOutcome {
  status: number;
  header: Record<string, unknown>;
  payload: Buffer;
  error?: string;
}

function callService(header: Record<string, unknown>, payloads: Uint8Array[]): CallOutcome {
  const request = encodeRequest(header, payloads);
  const run = spawnSync(pythonCommand(), ["-m", "irstd.bridgeio"], {
    input: request,
    maxBuffer: 1 << 28,
  });
  if (run.error || run.status !== 0 || !run.stdout || run.stdout.length === 0) {
    const detail = run.error ? String(run.error) : run.stderr?.toString() ?? "no output";
    return { status: STATUS.TRANSPORT, header: {}, payload: Buffer.alloc(0), error: detail };
  }
  let decoded;
  try {
    decoded = decodeResponse(run.stdout);
  } catch (exc) {
    return { status: STATUS.TRANSPORT, header: {}, payload: Buffer.alloc(0), error: String(exc) };
  }
  const status = typeof decoded.header.status === "number" ? decoded.header.status : STATUS.TRANSPORT;
  return {
    status,
    header: decoded.header,
    payload: decoded.payload,
    error: typeof decoded.header.error === "string" ? decoded.header.error : undefined,
  };
}

let verifiedVersion: string | null = null;

function coreVersion(): CallOutcome & { version?: string } {
  const outcome = callService({ op: "version" }, []);
  if (outcome.status !== STATUS.OK) return outcome;
  return { ...outcome, version: String(outcome.header.version) };
}

/**
 * Version handshake: returns the core library's semantic version after
 * verifying it matches what this wrapper was built against. Throws on
 * mismatch (refusing the load) and on transport failure.
 */
export function bridgeVersion(): string {
  const outcome = coreVersion();
  if (outcome.status !== STATUS.OK || !outcome.version) {
    throw new Error(`irstd bridge: cannot reach the core library (${outcome.error ?? "unknown"})`);
  }
  if (outcome.version !== EXPECTED_CORE_VERSION) {
    throw new Error(
      `irstd bridge: core library is ${outcome.version}, ` +
        `wrapper expects ${EXPECTED_CORE_VERSION}; refusing to proceed`,
    );
  }
  verifiedVersion = outcome.version;
  return outcome.version;
}

function ensureVersion(): number {
  if (verifiedVersion === EXPECTED_CORE_VERSION) return STATUS.OK;
  const outcome = coreVersion();
  if (outcome.status !== STATUS.OK || !outcome.version) return STATUS.TRANSPORT;
  if (outcome.version !== EXPECTED_CORE_VERSION) return STATUS.VERSION_MISMATCH;
  verifiedVersion = outcome.version;
  return STATUS.OK;
}

/**
 * Combined loss (base + wT * per-target patch term) and its gradient.
 *
 * `grad` is caller-allocated with length height*width; on OK status it
 * is fully overwritten, on any failure it is left untouched.
 */
export function tdaForwardBackward(
  pred: ArrayView,
  mask: ArrayView,
  image: ArrayView,
  grad: Float32Array,
  opts: TdaOptions,
): TdaResult {
  const fail = (status: number, error: string): TdaResult => ({
    status,
    loss: NaN,
    baseLoss: NaN,
    tdaLoss: NaN,
    error,
  });
  if (!viewOk(pred, "f32") || !viewOk(mask, "u8") || !viewOk(image, "u8")) {
    return fail(STATUS.SHAPE_MISMATCH, "malformed input view");
  }
  if (
    mask.height !== pred.height ||
    mask.width !== pred.width ||
    image.height !== pred.height ||
    image.width !== pred.width
  ) {
    return fail(STATUS.SHAPE_MISMATCH, "input views disagree on dimensions");
  }
  if (grad.length !== pred.height * pred.width) {
    return fail(STATUS.SHAPE_MISMATCH, `grad buffer has ${grad.length} elements, need ${pred.height * pred.width}`);
  }
  const versionStatus = ensureVersion();
  if (versionStatus !== STATUS.OK) {
    return fail(versionStatus, "core library version check failed");
  }
  const header: Record<string, unknown> = {
    op: "tda_forward_backward",
    height: pred.height,
    width: pred.width,
    s_mean: opts.sMean,
    c_mean: opts.cMean,
    w_T: opts.wT,
    base: opts.base,
    seed: opts.seed,
  };
  if (opts.gamma !== undefined) header.gamma = opts.gamma;
  if (opts.alpha !== undefined) header.alpha = opts.alpha;
  if (opts.beta !== undefined) header.beta = opts.beta;
  if (opts.eps !== undefined) header.eps = opts.eps;
  if (opts.patchSize !== undefined) header.patch_size = opts.patchSize;
  if (opts.dMin !== undefined) header.d_min = opts.dMin;
  if (opts.dMax !== undefined) header.d_max = opts.dMax;
  if (opts.fixedP !== undefined) header.fixed_p = opts.fixedP;

  const outcome = callService(header, [
    f32ToBytes(pred.data as Float32Array),
    mask.data as Uint8Array,
    image.data as Uint8Array,
  ]);
  if (outcome.status !== STATUS.OK) {
    return fail(outcome.status, outcome.error ?? "call failed");
  }
  if (outcome.payload.byteLength !== grad.length * 4) {
    return fail(STATUS.TRANSPORT, `gradient payload is ${outcome.payload.byteLength} bytes`);
  }
  grad.set(f32FromBytes(outcome.payload));
  return {
    status: STATUS.OK,
    loss: outcome.header.loss as number,
    baseLoss: outcome.header.base_loss as number,
    tdaLoss: outcome.header.tda_loss as number,
  };
}

/**
 * Per-target descriptor table (label, tight bbox, scale, contrast) for
 * one mask/image pair, serialized as parallel arrays.
 */
export function extractTargets(mask: ArrayView, image: ArrayView, dilation: number): TargetTable {
  const fail = (status: number, error: string): TargetTable => ({
    status,
    count: 0,
    label: [],
    x0: [],
    y0: [],
    x1: [],
    y1: [],
    scale: [],
    contrast: [],
    error,
  });
  if (!viewOk(mask, "u8") || !viewOk(image, "u8")) {
    return fail(STATUS.SHAPE_MISMATCH, "malformed input view");
  }
  if (mask.height !== image.height || mask.width !== image.width) {
    return fail(STATUS.SHAPE_MISMATCH, "mask and image disagree on dimensions");
  }
  const versionStatus = ensureVersion();
  if (versionStatus !== STATUS.OK) {
    return fail(versionStatus, "core library version check failed");
  }
  const outcome = callService(
    { op: "extract_targets", height: mask.height, width: mask.width, dilation },
    [mask.data as Uint8Array, image.data as Uint8Array],
  );
  if (outcome.status !== STATUS.OK) {
    return fail(outcome.status, outcome.error ?? "call failed");
  }
  const h = outcome.header as Record<string, unknown>;
  return {
    status: STATUS.OK,
    count: h.count as number,
    label: h.label as number[],
    x0: h.x0 as number[],
    y0: h.y0 as number[],
    x1: h.x1 as number[],
    y1: h.y1 as number[],
    scale: h.scale as number[],
    contrast: h.contrast as number[],
  };
}

/** Test seam: forget the cached version handshake. */
export function resetVersionCache(): void {
  verifiedVersion = null;
}
