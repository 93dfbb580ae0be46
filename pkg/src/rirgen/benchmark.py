"""Wall-clock benchmark harness for batched RIR generation.

Every generator is timed on the same pre-sampled environment list through
a shared interface (a callable taking a list of environments and
returning the batch of waveforms). Runs are repeated after a warm-up and
the median is reported, along with the spread across repetitions as a
flakiness signal.
"""

from __future__ import annotations

import csv
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CorpusGrid
from .env import AcousticEnv, NormalizationConfig, build_embedding, sample_environment
from .errors import ValidationError
from .synthesis import SynthConfig, generate_reference_rir, image_method_rir


@dataclass
class BenchmarkRow:
    generator: str
    batch_size: int
    n_rirs: int
    total_s: float        # median across repetitions
    per_rir_s: float
    runs_s: list
    spread: float         # (max - min) / median across repetitions
    error: str = ""


@dataclass
class BenchmarkReport:
    rows: list
    cpu: str
    threads: int
    n_rirs: int
    repeats: int

    def save_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write(f"# cpu={self.cpu}\n")
            fh.write(f"# threads={self.threads}\n")
            fh.write(f"# n_rirs={self.n_rirs} repeats={self.repeats}\n")
            writer = csv.writer(fh)
            writer.writerow(
                ["generator", "batch_size", "n_rirs", "total_s", "per_rir_s", "spread", "error"]
            )
            for row in self.rows:
                writer.writerow(
                    [row.generator, row.batch_size, row.n_rirs, f"{row.total_s:.6f}",
                     f"{row.per_rir_s:.9f}", f"{row.spread:.4f}", row.error]
                )

    def table(self) -> str:
        lines = [
            f"{'generator':<18} {'batch':>5} {'total [s]':>12} {'per RIR [s]':>14}",
            "-" * 52,
        ]
        for row in self.rows:
            if row.error:
                lines.append(f"{row.generator:<18} {row.batch_size:>5} failed: {row.error}")
            else:
                lines.append(
                    f"{row.generator:<18} {row.batch_size:>5} {row.total_s:>12.3f} "
                    f"{row.per_rir_s:>14.6f}"
                )
        return "\n".join(lines)

    def per_rir(self, generator: str, batch_size: int) -> float:
        for row in self.rows:
            if row.generator == generator and row.batch_size == batch_size and not row.error:
                return row.per_rir_s
        raise ValidationError(f"no timing for {generator} at batch size {batch_size}")


def _cpu_description() -> str:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def sample_benchmark_envs(n: int, seed: int = 0, grid: CorpusGrid | None = None) -> list:
    grid = grid or CorpusGrid()
    return [sample_environment((seed, i), grid) for i in range(n)]


def make_neural_generator(model, normalization: NormalizationConfig):
    """Batch adapter: environments -> embeddings -> generator forward."""

    def generate(envs: list) -> np.ndarray:
        emb = np.stack([build_embedding(env, normalization) for env in envs]).astype(model.dtype)
        return model.generator.forward(emb, training=False)

    return generate


def make_reference_generator(synth: SynthConfig):
    def generate(envs: list) -> np.ndarray:
        return np.stack([generate_reference_rir(env, synth).samples for env in envs])

    return generate


def make_image_generator(synth: SynthConfig):
    def generate(envs: list) -> np.ndarray:
        return np.stack([image_method_rir(env, synth).samples for env in envs])

    return generate


def _time_once(generate, envs: list, batch_size: int) -> float:
    start = time.perf_counter()
    for i in range(0, len(envs), batch_size):
        generate(envs[i : i + batch_size])
    return time.perf_counter() - start


def benchmark_runtime(
    generators: dict,
    n_rirs: int,
    batch_sizes: dict,
    seed: int = 0,
    repeats: int = 3,
    warmup: int = 1,
    grid: CorpusGrid | None = None,
) -> BenchmarkReport:
    """Time every generator on the same environments.

    ``generators`` maps name -> batch callable; ``batch_sizes`` maps
    name -> list of batch sizes to exercise (classical generators are
    typically pinned to [1]). Failures are recorded per row and excluded
    from timings rather than aborting the harness.
    """
    if n_rirs < 1:
        raise ValidationError("n_rirs must be >= 1")
    envs = sample_benchmark_envs(n_rirs, seed=seed, grid=grid)
    rows = []
    for name, generate in generators.items():
        for batch_size in batch_sizes.get(name, [1]):
            try:
                warm = envs[: min(len(envs), max(batch_size, 8))]
                for _ in range(warmup):
                    _time_once(generate, warm, batch_size)
                runs = [_time_once(generate, envs, batch_size) for _ in range(repeats)]
            except Exception as exc:  # recorded, not raised: other rows still run
                rows.append(BenchmarkRow(name, batch_size, n_rirs, float("nan"),
                                         float("nan"), [], float("nan"), error=str(exc)))
                continue
            total = float(np.median(runs))
            spread = float((max(runs) - min(runs)) / total) if total > 0 else 0.0
            rows.append(
                BenchmarkRow(name, batch_size, n_rirs, total, total / n_rirs, runs, spread)
            )
    return BenchmarkReport(
        rows=rows,
        cpu=_cpu_description(),
        threads=os.cpu_count() or 1,
        n_rirs=n_rirs,
        repeats=repeats,
    )
