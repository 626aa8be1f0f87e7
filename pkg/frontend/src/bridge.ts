import { spawn } from "node:child_process";

export interface CliOptions {
  /** executable to run; default $CDAWGKIT_BIN or "cdawgkit" on PATH */
  bin?: string;
  env?: NodeJS.ProcessEnv;
}

export class CliError extends Error {
  constructor(
    message: string,
    readonly exitCode: number | null,
    readonly stderr: string,
  ) {
    super(message);
    this.name = "CliError";
  }
}

export function cliExecutable(options: CliOptions = {}): string {
  return options.bin ?? process.env.CDAWGKIT_BIN ?? "cdawgkit";
}

/**
 * Run one cdawgkit subcommand, feeding `input` to stdin, resolving with
 * stdout. All data rides the JSONL/CSV wire formats; nothing is computed
 * on this side of the process boundary.
 */
export function runCli(
  args: string[],
  input?: string,
  options: CliOptions = {},
): Promise<string> {
  return new Promise((resolve, reject) => {
    const child = spawn(cliExecutable(options), args, {
      stdio: ["pipe", "pipe", "pipe"],
      env: options.env ?? process.env,
    });
    let stdout = "";
    let stderr = "";
    child.stdout.setEncoding("utf8");
    child.stderr.setEncoding("utf8");
    child.stdout.on("data", (d) => (stdout += d));
    child.stderr.on("data", (d) => (stderr += d));
    child.on("error", (err) =>
      reject(new CliError(`failed to spawn ${cliExecutable(options)}: ${err.message}`, null, "")),
    );
    child.on("close", (code) => {
      if (code !== 0) {
        const tail = stderr.trim().split("\n").slice(-3).join("\n");
        return reject(new CliError(`cdawgkit ${args[0]} exited ${code}: ${tail}`, code, stderr));
      }
      resolve(stdout);
    });
    if (input !== undefined) {
      child.stdin.write(input);
    }
    child.stdin.end();
  });
}
