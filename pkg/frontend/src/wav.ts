// Minimal mono WAV codec for the formats the core writes (32-bit float)
// and accepts (additionally 16-bit PCM).

export interface WavData {
  sampleRate: number;
  samples: Float32Array;
}

export function decodeWav(bytes: Buffer): WavData {
  if (bytes.length < 44 || bytes.toString("ascii", 0, 4) !== "RIFF" ||
      bytes.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error("not a RIFF/WAVE file");
  }
  let offset = 12;
  let format: number | null = null;
  let channels = 0;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let data: Buffer | null = null;
  while (offset + 8 <= bytes.length) {
    const id = bytes.toString("ascii", offset, offset + 4);
    const size = bytes.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (id === "fmt ") {
      format = bytes.readUInt16LE(body);
      channels = bytes.readUInt16LE(body + 2);
      sampleRate = bytes.readUInt32LE(body + 4);
      bitsPerSample = bytes.readUInt16LE(body + 14);
    } else if (id === "data") {
      data = bytes.subarray(body, body + size);
    }
    offset = body + size + (size % 2);
  }
  if (format === null || data === null) {
    throw new Error("missing fmt or data chunk");
  }
  if (channels !== 1) {
    throw new Error(`expected mono audio, got ${channels} channels`);
  }
  if (format === 3 && bitsPerSample === 32) {
    const samples = new Float32Array(data.length / 4);
    for (let i = 0; i < samples.length; i++) {
      samples[i] = data.readFloatLE(i * 4);
    }
    return { sampleRate, samples };
  }
  if (format === 1 && bitsPerSample === 16) {
    const samples = new Float32Array(data.length / 2);
    for (let i = 0; i < samples.length; i++) {
      samples[i] = data.readInt16LE(i * 2) / 32768;
    }
    return { sampleRate, samples };
  }
  throw new Error(`unsupported WAV encoding (format ${format}, ${bitsPerSample} bits)`);
}

export function encodeWavFloat32(sampleRate: number, samples: Float32Array): Buffer {
  const dataSize = samples.length * 4;
  const out = Buffer.alloc(44 + dataSize);
  out.write("RIFF", 0, "ascii");
  out.writeUInt32LE(36 + dataSize, 4);
  out.write("WAVE", 8, "ascii");
  out.write("fmt ", 12, "ascii");
  out.writeUInt32LE(16, 16);
  out.writeUInt16LE(3, 20); // IEEE float
  out.writeUInt16LE(1, 22);
  out.writeUInt32LE(sampleRate, 24);
  out.writeUInt32LE(sampleRate * 4, 28);
  out.writeUInt16LE(4, 32);
  out.writeUInt16LE(32, 34);
  out.write("data", 36, "ascii");
  out.writeUInt32LE(dataSize, 40);
  for (let i = 0; i < samples.length; i++) {
    out.writeFloatLE(samples[i], 44 + i * 4);
  }
  return out;
}
