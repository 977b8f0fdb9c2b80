import * as fs from 'fs';

import { AdapterRequest, AdapterResponse } from './protocol';

export type Mode = 'echo' | 'dlib' | 'facenet' | 'arcface' | 'mtcnn' | 'retinaface';

export const MODES: Mode[] = ['echo', 'dlib', 'facenet', 'arcface', 'mtcnn', 'retinaface'];

export interface AdapterConfig {
  mode: Mode;
  /** Canned detect answer in echo mode. */
  label: 0 | 1;
  /** Verification threshold, required by real modes. */
  threshold?: number;
  /** Model asset directory, required by real modes. */
  assets?: string;
}

export interface Backend {
  handle(request: AdapterRequest): AdapterResponse | Promise<AdapterResponse>;
}

/** Fixed unit-norm 8-dim vector answered by echo-mode embed requests. */
export const ECHO_VECTOR: number[] = Array(8).fill(1 / Math.sqrt(8));

export class EchoBackend implements Backend {
  constructor(private readonly label: 0 | 1) {}

  handle(request: AdapterRequest): AdapterResponse {
    if (request.op === 'detect') {
      return { id: request.id, label: this.label };
    }
    return { id: request.id, vector: [...ECHO_VECTOR] };
  }
}

export class ConfigError extends Error {}

/**
 * Validate the configuration and build the backend.
 *
 * Real model modes require their asset directory up front; the models
 * themselves are not bundled here, so configuration fails loudly rather
 * than answering requests with a model that does not exist.
 */
export function createBackend(config: AdapterConfig): Backend {
  if (!MODES.includes(config.mode)) {
    throw new ConfigError(`unknown mode '${config.mode}' (expected one of ${MODES.join(', ')})`);
  }
  if (config.mode === 'echo') {
    return new EchoBackend(config.label);
  }
  if (!config.assets) {
    throw new ConfigError(`mode '${config.mode}' requires --assets <model directory>`);
  }
  if (!fs.existsSync(config.assets)) {
    throw new ConfigError(`assets path '${config.assets}' does not exist`);
  }
  if (config.threshold === undefined || !(config.threshold > 0)) {
    throw new ConfigError(`mode '${config.mode}' requires --threshold > 0`);
  }
  throw new ConfigError(
    `mode '${config.mode}' is configured but no model runtime is bundled; ` +
      'install a model backend or use --mode echo',
  );
}
