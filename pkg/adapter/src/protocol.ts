/**
 * Wire protocol: one JSON object per line on the adapter's stdin/stdout.
 *
 *   request:  {"id": <int>, "op": "detect"|"embed", "image_path": <string>}
 *   response: {"id": <int>, "label": 0|1}
 *             {"id": <int>, "vector": [<number>, ...]}
 *             {"id": <int>, "error": <string>}
 *
 * Response ids echo request ids, in request order. A line that cannot be
 * parsed at all is answered with id -1.
 */

export type Op = 'detect' | 'embed';

export interface AdapterRequest {
  id: number;
  op: Op;
  image_path: string;
}

export type AdapterResponse =
  | { id: number; label: 0 | 1 }
  | { id: number; vector: number[] }
  | { id: number; error: string };

export const UNPARSEABLE_ID = -1;

/** Outcome of validating one input line. */
export type ParseResult =
  | { ok: true; request: AdapterRequest }
  | { ok: false; id: number; error: string };

export function parseRequest(line: string): ParseResult {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    return { ok: false, id: UNPARSEABLE_ID, error: 'request is not valid JSON' };
  }
  if (typeof raw !== 'object' || raw === null || Array.isArray(raw)) {
    return { ok: false, id: UNPARSEABLE_ID, error: 'request must be a JSON object' };
  }
  const obj = raw as Record<string, unknown>;
  const id = Number.isInteger(obj.id) ? (obj.id as number) : UNPARSEABLE_ID;
  if (id === UNPARSEABLE_ID) {
    return { ok: false, id, error: 'request id must be an integer' };
  }
  if (obj.op !== 'detect' && obj.op !== 'embed') {
    return { ok: false, id, error: `unknown op ${JSON.stringify(obj.op)}` };
  }
  if (typeof obj.image_path !== 'string' || obj.image_path.length === 0) {
    return { ok: false, id, error: 'image_path must be a non-empty string' };
  }
  return { ok: true, request: { id, op: obj.op, image_path: obj.image_path } };
}

export function serializeResponse(response: AdapterResponse): string {
  return JSON.stringify(response) + '\n';
}
