"""Per-stage latency recording and distribution summaries.

Conventions are pinned so results are reproducible: sample standard
deviation uses the n-1 denominator (0.0 for a single sample), and p99 is
the nearest-rank percentile, i.e. the ceil(0.99*n)-th order statistic.
"""

from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass

from .errors import ContractError, NoDataError
from .model import Stage, StageLatencies

STAGES = (Stage.STT, Stage.VISION, Stage.LLM, Stage.TTS, Stage.RESIDUAL, Stage.TOTAL)


@dataclass(frozen=True)
class StatsSummary:
    stage: Stage
    n: int
    mean_ms: float
    std_ms: float
    p99_ms: float
    min_ms: float
    max_ms: float

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "n": self.n,
            "mean_ms": self.mean_ms,
            "std_ms": self.std_ms,
            "p99_ms": self.p99_ms,
            "min_ms": self.min_ms,
            "max_ms": self.max_ms,
        }


def nearest_rank_p99(samples: list[float]) -> float:
    """ceil(0.99*n)-th smallest value (1-based rank)."""
    ordered = sorted(samples)
    rank = math.ceil(0.99 * len(ordered))
    return ordered[rank - 1]


def summarize_samples(stage: Stage, samples: list[float]) -> StatsSummary:
    if not samples:
        raise NoDataError(f"no samples recorded for stage '{stage.value}'")
    n = len(samples)
    mean = math.fsum(samples) / n
    if n > 1:
        variance = math.fsum((x - mean) ** 2 for x in samples) / (n - 1)
        std = math.sqrt(variance)
    else:
        std = 0.0
    return StatsSummary(
        stage=stage,
        n=n,
        mean_ms=mean,
        std_ms=std,
        p99_ms=nearest_rank_p99(samples),
        min_ms=min(samples),
        max_ms=max(samples),
    )


class LatencyRecorder:
    """Accepts StageLatencies samples from any number of sessions.

    Appends are linearizable (a lock guards them); summaries see a
    consistent snapshot.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._samples: dict[Stage, list[float]] = {stage: [] for stage in STAGES}
        self._rows: list[tuple[str, StageLatencies]] = []

    def record(self, session_id: str, latencies: StageLatencies) -> None:
        # StageLatencies validates non-negativity and the total identity on
        # construction; re-check here so foreign objects cannot sneak in.
        parts = (
            latencies.stt_ms
            + latencies.vision_ms
            + latencies.llm_ms
            + latencies.tts_ms
            + latencies.residual_ms
        )
        if not math.isclose(latencies.total_ms, parts, rel_tol=1e-9, abs_tol=1e-6):
            raise ContractError("total_ms must equal the sum of the stage fields")
        with self._lock:
            for stage in STAGES:
                value = latencies.get(stage)
                if value < 0:
                    raise ContractError(f"{stage.value} latency is negative")
                self._samples[stage].append(value)
            self._rows.append((session_id, latencies))

    def count(self) -> int:
        with self._lock:
            return len(self._rows)

    def samples(self, stage: Stage) -> list[float]:
        with self._lock:
            return list(self._samples[Stage(stage)])

    def summarize(self, stage: Stage) -> StatsSummary:
        stage = Stage(stage)
        return summarize_samples(stage, self.samples(stage))

    def summaries(self) -> dict[Stage, StatsSummary]:
        return {stage: self.summarize(stage) for stage in STAGES if self.samples(stage)}

    def to_table(self) -> str:
        """Plain-text report, one row per stage: mean +/- std and p99."""
        lines = [
            f"{'stage':<10}{'n':>6}{'mean_ms':>12}{'std_ms':>12}{'p99_ms':>12}{'min_ms':>12}{'max_ms':>12}"
        ]
        for stage, summary in self.summaries().items():
            lines.append(
                f"{stage.value:<10}{summary.n:>6}"
                f"{summary.mean_ms:>12.1f}{summary.std_ms:>12.1f}{summary.p99_ms:>12.1f}"
                f"{summary.min_ms:>12.1f}{summary.max_ms:>12.1f}"
            )
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["stage", "n", "mean_ms", "std_ms", "p99_ms", "min_ms", "max_ms"])
        for stage, s in self.summaries().items():
            writer.writerow([stage.value, s.n, s.mean_ms, s.std_ms, s.p99_ms, s.min_ms, s.max_ms])
        return buf.getvalue()

    def rows_csv(self) -> str:
        """Raw per-turn samples, one row per recorded StageLatencies."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["session_id", "stt_ms", "vision_ms", "llm_ms", "tts_ms", "residual_ms", "total_ms"])
        with self._lock:
            rows = list(self._rows)
        for session_id, lat in rows:
            writer.writerow([
                session_id, lat.stt_ms, lat.vision_ms, lat.llm_ms, lat.tts_ms,
                lat.residual_ms, lat.total_ms,
            ])
        return buf.getvalue()
