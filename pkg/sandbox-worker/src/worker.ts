/**
 * One-shot sandboxed code execution worker.
 *
 * Protocol: exactly one JSON job line on stdin, exactly one JSON line on
 * stdout. A job is {"code", "timeout_s", "stdout_cap_bytes", "cwd"?}; the
 * result is {"stdout", "stderr", "exit_status", "timed_out"}. The worker
 * exits 0 whenever the protocol ran, even if the user code failed; a
 * malformed job or a spawn failure produces an {"error": ...} line and a
 * nonzero exit instead.
 *
 * The child runs in its own process group and the whole group is killed on
 * timeout, so code that forks cannot leave orphans behind.
 */

import { spawn } from "node:child_process";
import { constants as osConstants } from "node:os";

interface SandboxJob {
  code: string;
  timeout_s: number;
  stdout_cap_bytes: number;
  cwd?: string;
}

interface SandboxResult {
  stdout: string;
  stderr: string;
  exit_status: number;
  timed_out: boolean;
}

/** Collects stream bytes up to a cap, draining the rest so pipes never stall. */
class CappedSink {
  private chunks: Buffer[] = [];
  private size = 0;

  constructor(private readonly cap: number) {}

  push(chunk: Buffer): void {
    if (this.size >= this.cap) return;
    const room = this.cap - this.size;
    const take = chunk.length > room ? chunk.subarray(0, room) : chunk;
    this.chunks.push(take);
    this.size += take.length;
  }

  /** Decoded text, trimmed so its UTF-8 byte length stays within the cap. */
  text(): string {
    let s = Buffer.concat(this.chunks).toString("utf-8");
    // A cut mid-codepoint decodes to a replacement char that can re-encode
    // wider than the bytes it replaced; trim until the cap truly holds.
    while (Buffer.byteLength(s, "utf-8") > this.cap) {
      s = s.slice(0, -1);
    }
    return s;
  }
}

function parseJob(line: string): SandboxJob {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new Error("job line is not valid JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("job must be a JSON object");
  }
  const job = raw as Record<string, unknown>;
  if (typeof job.code !== "string") {
    throw new Error("job.code must be a string");
  }
  if (typeof job.timeout_s !== "number" || !isFinite(job.timeout_s) || job.timeout_s <= 0) {
    throw new Error("job.timeout_s must be a positive number");
  }
  if (
    typeof job.stdout_cap_bytes !== "number" ||
    !Number.isInteger(job.stdout_cap_bytes) ||
    job.stdout_cap_bytes <= 0
  ) {
    throw new Error("job.stdout_cap_bytes must be a positive integer");
  }
  if (job.cwd !== undefined && typeof job.cwd !== "string") {
    throw new Error("job.cwd must be a string when present");
  }
  return {
    code: job.code,
    timeout_s: job.timeout_s,
    stdout_cap_bytes: job.stdout_cap_bytes,
    cwd: job.cwd as string | undefined,
  };
}

function emit(line: object, exitCode: number): void {
  process.stdout.write(JSON.stringify(line) + "\n", () => process.exit(exitCode));
}

function protocolError(message: string): void {
  emit({ error: message }, 1);
}

function signalExitStatus(signal: NodeJS.Signals | null): number {
  if (signal === null) return 1;
  const num = (osConstants.signals as Record<string, number>)[signal];
  return 128 + (num ?? 1);
}

function runJob(job: SandboxJob): void {
  const child = spawn("python3", ["-c", job.code], {
    cwd: job.cwd,
    detached: true,
    stdio: ["ignore", "pipe", "pipe"],
  });

  const out = new CappedSink(job.stdout_cap_bytes);
  // stderr is capped at the same bound; the contract only sizes stdout but
  // an unbounded error stream would be a memory hole.
  const err = new CappedSink(job.stdout_cap_bytes);
  let timedOut = false;
  let settled = false;

  const killGroup = () => {
    if (child.pid === undefined) return;
    try {
      process.kill(-child.pid, "SIGKILL");
    } catch {
      // Group already gone; racing the natural exit is fine.
    }
  };

  const timer = setTimeout(() => {
    timedOut = true;
    killGroup();
  }, job.timeout_s * 1000);

  child.stdout.on("data", (chunk: Buffer) => out.push(chunk));
  child.stderr.on("data", (chunk: Buffer) => err.push(chunk));

  child.on("error", (error) => {
    if (settled) return;
    settled = true;
    clearTimeout(timer);
    protocolError(`failed to spawn python3: ${error.message}`);
  });

  // "close" rather than "exit": it fires only after both pipes have drained.
  child.on("close", (code, signal) => {
    if (settled) return;
    settled = true;
    clearTimeout(timer);
    killGroup(); // reap any forked survivors even on a natural exit
    let exitStatus = code !== null ? code : signalExitStatus(signal);
    if (timedOut && exitStatus === 0) {
      exitStatus = 124; // the child won the race against SIGKILL; still a timeout
    }
    const result: SandboxResult = {
      stdout: out.text(),
      stderr: err.text(),
      exit_status: exitStatus,
      timed_out: timedOut,
    };
    emit(result, 0);
  });
}

function main(): void {
  let buffered = "";
  let launched = false;

  const launch = (line: string) => {
    if (launched) return;
    launched = true;
    process.stdin.pause();
    let job: SandboxJob;
    try {
      job = parseJob(line);
    } catch (error) {
      protocolError((error as Error).message);
      return;
    }
    runJob(job);
  };

  process.stdin.on("data", (chunk: Buffer) => {
    buffered += chunk.toString("utf-8");
    const newline = buffered.indexOf("\n");
    if (newline >= 0) {
      launch(buffered.slice(0, newline));
    }
  });

  process.stdin.on("end", () => {
    if (!launched) {
      if (buffered.trim() === "") {
        protocolError("no job line on stdin");
      } else {
        launch(buffered);
      }
    }
  });
}

main();
