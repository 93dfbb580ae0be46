import { spawnSync } from "node:child_process";
import { chmodSync, existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import {
  CoreError,
  SUPPORTED_INTERFACE,
  ToolkitClient,
  type EnvSpec,
} from "../src/client.js";
import { decodeWav, encodeWavFloat32 } from "../src/wav.js";

const BINARY = process.env.RIRGEN_BIN ?? "rirgen";

let workDir: string;
let corpusDir: string;
let checkpoint: string;

function runCli(args: string[]): { status: number | null; stderr: string } {
  const result = spawnSync(BINARY, args, { encoding: "utf-8" });
  if (result.error) {
    throw result.error;
  }
  return { status: result.status, stderr: result.stderr };
}

function randomEnv(rand: () => number): EnvSpec {
  const room: [number, number, number] = [
    8 + 3 * rand(),
    6 + 2 * rand(),
    2.5 + rand(),
  ];
  const inside = (dim: number) => 0.4 + (dim - 0.8) * rand();
  return {
    room,
    source: [inside(room[0]), inside(room[1]), inside(room[2])],
    listener: [inside(room[0]), inside(room[1]), inside(room[2])],
    t60: 0.3 + 0.25 * rand(),
  };
}

// deterministic LCG so the ten parity environments are stable across runs
function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

beforeAll(() => {
  workDir = mkdtempSync(join(tmpdir(), "rirgen-client-"));
  corpusDir = join(workDir, "corpus");
  checkpoint = join(workDir, "model.bin");

  let result = runCli([
    "gen-corpus", "--out", corpusDir,
    "--lengths", "2", "--length-range", "8,11",
    "--widths", "1", "--width-range", "6,8",
    "--heights", "1", "--height-range", "2.5,3.5",
    "--per-room", "2", "--t60-range", "0.3,0.6",
    "--sample-rate", "16000", "--n-samples", "512", "--seed", "7",
  ]);
  expect(result.status).toBe(0);

  result = runCli([
    "train", "--manifest", join(corpusDir, "manifest.json"),
    "--out", checkpoint, "--epochs", "0", "--base-channels", "16",
  ]);
  expect(result.status).toBe(0);
}, 120_000);

describe("version handshake", () => {
  it("reports the core version", () => {
    const info = new ToolkitClient({ binary: BINARY }).version();
    expect(info.interface).toBe(SUPPORTED_INTERFACE);
    expect(info.package).toMatch(/^\d+\.\d+\.\d+$/);
  });

  it("refuses an incompatible core", () => {
    const fake = join(workDir, "fake-core.sh");
    writeFileSync(fake, '#!/bin/sh\necho \'{"package": "9.9.9", "interface": 999}\'\n');
    chmodSync(fake, 0o755);
    const client = new ToolkitClient({ binary: fake });
    expect(() => client.ensureCompatible()).toThrow(/incompatible/);
    expect(() =>
      client.generateRir(
        { room: [10, 7, 3], source: [1, 1, 1], listener: [4, 5, 1], t60: 0.5 },
        checkpoint,
      ),
    ).toThrow(/incompatible/);
  });
});

describe("generateRir", () => {
  it("is byte-identical to the CLI for 10 random environments", () => {
    const client = new ToolkitClient({ binary: BINARY });
    const rand = lcg(12345);
    for (let i = 0; i < 10; i++) {
      const env = randomEnv(rand);
      const viaClient = client.generateRir(env, checkpoint, join(workDir, `client_${i}.wav`));

      const direct = join(workDir, `direct_${i}.wav`);
      const result = runCli([
        "infer",
        "--room", env.room.join(","),
        "--src", env.source.join(","),
        "--lst", env.listener.join(","),
        "--t60", String(env.t60),
        "--ckpt", checkpoint,
        "--out", direct,
      ]);
      expect(result.status).toBe(0);
      expect(viaClient.wavBytes.equals(readFileSync(direct))).toBe(true);
      expect(viaClient.sampleRate).toBe(16000);
      expect(viaClient.samples.length).toBe(512);
    }
  }, 120_000);

  it("propagates validation errors with the field name", () => {
    const client = new ToolkitClient({ binary: BINARY });
    const bad: EnvSpec = {
      room: [10, 7, 3],
      source: [12, 1, 1], // outside the room
      listener: [4, 5, 1],
      t60: 0.5,
    };
    expect(() => client.generateRir(bad, checkpoint)).toThrow(/source_pos/);
    expect(() =>
      client.generateRir({ ...bad, source: [1, 1, 1], t60: -0.2 }, checkpoint),
    ).toThrow(/t60/);
  });

  it("surfaces missing checkpoints as core errors", () => {
    const client = new ToolkitClient({ binary: BINARY });
    expect(() =>
      client.generateRir(
        { room: [10, 7, 3], source: [1, 1, 1], listener: [4, 5, 1], t60: 0.5 },
        join(workDir, "missing.bin"),
      ),
    ).toThrow(CoreError);
  });
});

describe("reverberate", () => {
  function writeClean(name: string): string {
    const fs = 16000;
    const samples = new Float32Array(fs);
    for (let i = 0; i < fs; i++) {
      samples[i] = 0.3 * Math.sin((2 * Math.PI * 440 * i) / fs);
    }
    const path = join(workDir, name);
    writeFileSync(path, encodeWavFloat32(fs, samples));
    return path;
  }

  it("wraps the core pipeline and parses its manifest", () => {
    const client = new ToolkitClient({ binary: BINARY });
    const clean = writeClean("clean.wav");
    const outDir = join(workDir, "wet");
    const records = client.reverberate([clean], join(corpusDir, "manifest.json"), outDir, 3);
    expect(records).toHaveLength(1);
    expect(records[0].rirId).toMatch(/^rir_/);
    expect(records[0].gainApplied).toBeGreaterThan(0);
    const wet = decodeWav(readFileSync(join(outDir, records[0].outputPath)));
    expect(wet.sampleRate).toBe(16000);
    expect(wet.samples.length).toBe(16000 + 512 - 1);
  });

  it("pairs deterministically for a fixed seed", () => {
    const client = new ToolkitClient({ binary: BINARY });
    const clean = writeClean("clean2.wav");
    const a = client.reverberate([clean], join(corpusDir, "manifest.json"),
                                 join(workDir, "wet_a"), 11);
    const b = client.reverberate([clean], join(corpusDir, "manifest.json"),
                                 join(workDir, "wet_b"), 11);
    expect(a.map((r) => r.rirId)).toEqual(b.map((r) => r.rirId));
    const bytesA = readFileSync(join(workDir, "wet_a", a[0].outputPath));
    const bytesB = readFileSync(join(workDir, "wet_b", b[0].outputPath));
    expect(bytesA.equals(bytesB)).toBe(true);
  });

  it("rejects empty inputs before touching the core", () => {
    const client = new ToolkitClient({ binary: BINARY });
    expect(() =>
      client.reverberate([], join(corpusDir, "manifest.json"), join(workDir, "wet_c")),
    ).toThrow(/at least one/);
  });
});

describe("wav codec", () => {
  it("round-trips float32 audio", () => {
    const samples = new Float32Array([0, 0.5, -0.5, 0.25, 1, -1]);
    const decoded = decodeWav(encodeWavFloat32(8000, samples));
    expect(decoded.sampleRate).toBe(8000);
    expect(Array.from(decoded.samples)).toEqual(Array.from(samples));
  });

  it("rejects non-wav bytes", () => {
    expect(() => decodeWav(Buffer.from("definitely not audio data, sorry"))).toThrow(/RIFF/);
  });
});
