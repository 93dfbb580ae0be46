export {
  CoreError,
  SUPPORTED_INTERFACE,
  ToolkitClient,
  parseReverbManifest,
} from "./client.js";
export type {
  ClientOptions,
  CoreVersion,
  EnvSpec,
  GeneratedRir,
  ReverbRecord,
} from "./client.js";
export { decodeWav, encodeWavFloat32 } from "./wav.js";
export type { WavData } from "./wav.js";
