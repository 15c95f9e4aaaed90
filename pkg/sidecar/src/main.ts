import { DEFAULT_CONFIG, serve, type SidecarConfig } from "./server.js";

function parseArgs(argv: string[]): SidecarConfig {
  const config: SidecarConfig = { ...DEFAULT_CONFIG };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      const value = argv[++i];
      if (value === undefined) throw new Error(`${arg} needs a value`);
      return value;
    };
    switch (arg) {
      case "--model":
        config.model = next();
        break;
      case "--device":
        config.device = next();
        break;
      case "--max-batch":
        config.maxBatch = Number(next());
        break;
      case "--precision":
        config.precision = next();
        break;
      case "--addr":
        config.addr = next();
        break;
      case "--help":
        console.log(
          "usage: main.js [--model ID] [--device cpu] [--max-batch N] " +
            "[--precision f64] [--addr host:port]",
        );
        process.exit(0);
        break;
      default:
        throw new Error(`unknown argument ${arg}`);
    }
  }
  return config;
}

try {
  serve(parseArgs(process.argv.slice(2)));
} catch (err) {
  console.error(err instanceof Error ? err.message : String(err));
  process.exit(2);
}
