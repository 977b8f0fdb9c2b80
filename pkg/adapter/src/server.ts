import * as readline from 'readline';
import { Readable, Writable } from 'stream';

import { Backend } from './backends';
import { parseRequest, serializeResponse, AdapterResponse } from './protocol';

/**
 * Serve the line protocol until the input stream closes.
 *
 * Requests are answered strictly in arrival order, one response line per
 * request line, even if a backend resolves asynchronously. Malformed input
 * produces an error response and never kills the process.
 */
export function serve(backend: Backend, input: Readable, output: Writable): Promise<void> {
  const rl = readline.createInterface({ input, terminal: false });
  let pipeline: Promise<void> = Promise.resolve();

  rl.on('line', (line) => {
    if (line.trim() === '') {
      return;
    }
    pipeline = pipeline.then(async () => {
      let response: AdapterResponse;
      const parsed = parseRequest(line);
      if (!parsed.ok) {
        response = { id: parsed.id, error: parsed.error };
      } else {
        try {
          response = await backend.handle(parsed.request);
        } catch (err) {
          response = { id: parsed.request.id, error: String(err) };
        }
      }
      output.write(serializeResponse(response));
    });
  });

  return new Promise((resolve) => {
    rl.on('close', () => {
      void pipeline.then(() => resolve());
    });
  });
}
