import { AdapterConfig, ConfigError, createBackend, Mode, MODES } from './backends';
import { serve } from './server';

const USAGE = `usage: fringe-adapter [--mode <${MODES.join('|')}>] [--label 0|1] [--threshold <delta>] [--assets <dir>]

Serves the newline-delimited JSON oracle protocol on stdin/stdout.
Echo mode answers canned values and needs no assets.`;

export function parseArgs(argv: string[]): AdapterConfig {
  const config: AdapterConfig = { mode: 'echo', label: 1 };
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i];
    const next = (): string => {
      i += 1;
      if (i >= argv.length) {
        throw new ConfigError(`${arg} needs a value`);
      }
      return argv[i];
    };
    switch (arg) {
      case '--mode':
        config.mode = next() as Mode;
        break;
      case '--label': {
        const label = Number(next());
        if (label !== 0 && label !== 1) {
          throw new ConfigError('--label must be 0 or 1');
        }
        config.label = label;
        break;
      }
      case '--threshold':
        config.threshold = Number(next());
        break;
      case '--assets':
        config.assets = next();
        break;
      case '--help':
      case '-h':
        process.stdout.write(USAGE + '\n');
        process.exit(0);
        break;
      default:
        throw new ConfigError(`unknown argument '${arg}'`);
    }
  }
  return config;
}

export async function main(argv: string[]): Promise<number> {
  let config: AdapterConfig;
  try {
    config = parseArgs(argv);
    const backend = createBackend(config);
    await serve(backend, process.stdin, process.stdout);
    return 0;
  } catch (err) {
    if (err instanceof ConfigError) {
      process.stderr.write(`fringe-adapter: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
}

if (require.main === module) {
  void main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
