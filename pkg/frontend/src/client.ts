// Thin client around the rirgen command line: every result comes from the
// core binary and its serialized formats, nothing acoustic is reimplemented.

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { decodeWav } from "./wav.js";

export const SUPPORTED_INTERFACE = 1;

export interface EnvSpec {
  room: [number, number, number];
  source: [number, number, number];
  listener: [number, number, number];
  t60: number;
}

export interface CoreVersion {
  package: string;
  interface: number;
}

export interface GeneratedRir {
  sampleRate: number;
  samples: Float32Array;
  wavBytes: Buffer;
  path: string;
}

export interface ReverbRecord {
  segmentId: string;
  rirId: string;
  gainApplied: number;
  outputPath: string;
}

export interface ClientOptions {
  /** Core executable; defaults to $RIRGEN_BIN, then "rirgen" on PATH. */
  binary?: string;
  /** Flags appended to every invocation, e.g. ["--config", "recipe.cfg"]. */
  defaultArgs?: string[];
}

export class CoreError extends Error {
  constructor(message: string, readonly exitCode: number | null) {
    super(message);
    this.name = "CoreError";
  }
}

function formatVec(v: [number, number, number]): string {
  return v.join(",");
}

export class ToolkitClient {
  private readonly binary: string;
  private readonly defaultArgs: string[];
  private handshaken = false;

  constructor(options: ClientOptions = {}) {
    this.binary = options.binary ?? process.env.RIRGEN_BIN ?? "rirgen";
    this.defaultArgs = options.defaultArgs ?? [];
  }

  private invoke(args: string[], skipHandshake = false): string {
    if (!skipHandshake && !this.handshaken) {
      this.ensureCompatible();
    }
    const result = spawnSync(this.binary, [...this.defaultArgs, ...args], {
      encoding: "utf-8",
      maxBuffer: 64 * 1024 * 1024,
    });
    if (result.error) {
      throw new CoreError(`failed to launch ${this.binary}: ${result.error.message}`, null);
    }
    if (result.status !== 0) {
      const detail = (result.stderr || result.stdout || "").trim();
      throw new CoreError(detail || `core exited with status ${result.status}`, result.status);
    }
    return result.stdout;
  }

  version(): CoreVersion {
    const stdout = this.invoke(["version"], true);
    let parsed: unknown;
    try {
      parsed = JSON.parse(stdout);
    } catch {
      throw new CoreError(`core did not report a parseable version: ${stdout.trim()}`, 0);
    }
    const info = parsed as CoreVersion;
    if (typeof info.interface !== "number" || typeof info.package !== "string") {
      throw new CoreError("core version report is missing fields", 0);
    }
    return info;
  }

  /** Refuses to proceed when the core speaks a different interface version. */
  ensureCompatible(): CoreVersion {
    const info = this.version();
    if (info.interface !== SUPPORTED_INTERFACE) {
      throw new CoreError(
        `core interface version ${info.interface} is incompatible with this client ` +
          `(supports ${SUPPORTED_INTERFACE})`,
        0,
      );
    }
    this.handshaken = true;
    return info;
  }

  /**
   * Generate one impulse response through core inference.
   *
   * The returned samples are decoded from the exact WAV the core wrote,
   * so they are bit-identical to a direct CLI invocation with the same
   * arguments.
   */
  generateRir(env: EnvSpec, checkpoint: string, outPath?: string): GeneratedRir {
    const path = outPath ?? join(mkdtempSync(join(tmpdir(), "rirgen-")), "rir.wav");
    this.invoke([
      "infer",
      "--room", formatVec(env.room),
      "--src", formatVec(env.source),
      "--lst", formatVec(env.listener),
      "--t60", String(env.t60),
      "--ckpt", checkpoint,
      "--out", path,
    ]);
    const wavBytes = readFileSync(path);
    const { sampleRate, samples } = decodeWav(wavBytes);
    return { sampleRate, samples, wavBytes, path };
  }

  /**
   * Reverberate clean recordings with RIRs drawn from a corpus manifest;
   * returns the parsed pairing manifest the core wrote.
   */
  reverberate(
    cleanPaths: string[],
    manifestPath: string,
    outDir: string,
    seed = 0,
    options: { split?: boolean } = {},
  ): ReverbRecord[] {
    if (cleanPaths.length === 0) {
      throw new CoreError("need at least one clean recording", null);
    }
    const args = [
      "reverb",
      "--clean", cleanPaths.join(","),
      "--manifest", manifestPath,
      "--out-dir", outDir,
      "--seed", String(seed),
    ];
    if (options.split) {
      args.push("--split");
    }
    this.invoke(args);
    return parseReverbManifest(readFileSync(join(outDir, "reverb_manifest.csv"), "utf-8"));
  }
}

export function parseReverbManifest(csv: string): ReverbRecord[] {
  const lines = csv.trim().split(/\r?\n/);
  const header = lines[0];
  if (header !== "segment_id,rir_id,gain_applied,output_path") {
    throw new CoreError(`unexpected reverb manifest header: ${header}`, 0);
  }
  return lines.slice(1).map((line) => {
    const [segmentId, rirId, gain, outputPath] = line.split(",");
    return {
      segmentId,
      rirId,
      gainApplied: Number(gain),
      outputPath,
    };
  });
}
