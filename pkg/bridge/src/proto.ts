/**
 * Wire protocol for the raw-array loss service.
 *
 * A request is one UTF-8 JSON header line followed by raw payload
 * bytes; the response mirrors it. All multi-byte values are
 * little-endian, grids row-major. One request per process invocation.
 */

const HOST_IS_LE = (() => {
  const probe = new Uint8Array(new Uint16Array([1]).buffer);
  return probe[0] === 1;
})();

export function f32ToBytes(a: Float32Array): Uint8Array {
  if (HOST_IS_LE) {
    return new Uint8Array(a.buffer, a.byteOffset, a.byteLength);
  }
  const out = new Uint8Array(a.length * 4);
  const view = new DataView(out.buffer);
  for (let i = 0; i < a.length; i++) view.setFloat32(4 * i, a[i], true);
  return out;
}

export function f32FromBytes(buf: Uint8Array): Float32Array {
  if (buf.byteLength % 4 !== 0) {
    throw new Error(`float32 payload length ${buf.byteLength} not a multiple of 4`);
  }
  const n = buf.byteLength / 4;
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) out[i] = view.getFloat32(4 * i, true);
  return out;
}

export function encodeRequest(
  header: Record<string, unknown>,
  payloads: Uint8Array[],
): Buffer {
  const head = Buffer.from(JSON.stringify(header) + "\n", "utf-8");
  return Buffer.concat([head, ...payloads.map((p) => Buffer.from(p.buffer, p.byteOffset, p.byteLength))]);
}

export interface DecodedResponse {
  header: Record<string, unknown>;
  payload: Buffer;
}

export function decodeResponse(blob: Buffer): DecodedResponse {
  const newline = blob.indexOf(0x0a);
  if (newline < 0) {
    throw new Error("malformed response: missing header line");
  }
  const header = JSON.parse(blob.subarray(0, newline).toString("utf-8"));
  return { header, payload: blob.subarray(newline + 1) };
}
