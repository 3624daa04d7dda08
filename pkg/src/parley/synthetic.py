"""Synthetic per-stage latency generator for benchmarking the stats engine.

Each stage draws from a normal distribution configured with a mean and
standard deviation. A stage may additionally pin its 99th percentile; the
draw is then passed through a piecewise-linear transform of the standard
normal that keeps the configured mean and standard deviation exact while
placing the 0.99 quantile at the pinned value. Latency distributions
measured in the field routinely have tails that disagree with a fitted
normal, so mean/std alone cannot reproduce an observed p99.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import ContractError
from .model import StageLatencies

_Z99 = 2.3263478740408408  # 0.99 quantile of the standard normal
_KNEE_Z = 1.0  # where the tail transform bends


def _phi(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def pinned_tail_transform(mean: float, std: float, p99: float) -> tuple[float, float, float, float]:
    """Coefficients (a, d, c, knee) of g(z) = c + a*z + d*max(z - knee, 0).

    Solved so that for z ~ N(0,1): E[g] = 0, E[g^2] = 1, and
    g(z_0.99) = (p99 - mean)/std. The sample mean/std of mean + std*g(z)
    then match the configured values while the 0.99 quantile sits at p99.
    """
    k = _KNEE_Z
    t = (p99 - mean) / std
    p_tail = 1.0 - _cdf(k)
    m1 = _phi(k) - k * p_tail
    m2 = (1.0 + k * k) * p_tail - k * _phi(k)

    # With c = -d*m1 substituted, the variance condition is quadratic in d.
    u = (_Z99 - k - m1) / _Z99
    s = t / _Z99
    qa = u * u - 2.0 * u * p_tail + (m2 - m1 * m1)
    qb = 2.0 * s * (p_tail - u)
    qc = s * s - 1.0
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0:
        raise ContractError(f"p99 {p99} is unreachable for mean {mean}, std {std}")
    for d in ((-qb - math.sqrt(disc)) / (2.0 * qa), (-qb + math.sqrt(disc)) / (2.0 * qa)):
        a = s - u * d
        if a > 0 and a + d > 0:  # keep g strictly increasing
            return a, d, -d * m1, k
    raise ContractError(f"no monotone transform reaches p99 {p99} for mean {mean}, std {std}")


@dataclass(frozen=True)
class StageModel:
    mean_ms: float
    std_ms: float
    p99_ms: float | None = None

    def sampler(self):
        if self.p99_ms is None:
            def draw(z: float) -> float:
                return max(0.0, self.mean_ms + self.std_ms * z)
            return draw
        a, d, c, knee = pinned_tail_transform(self.mean_ms, self.std_ms, self.p99_ms)

        def draw(z: float) -> float:
            g = c + a * z + (d * (z - knee) if z > knee else 0.0)
            return max(0.0, self.mean_ms + self.std_ms * g)

        return draw


@dataclass(frozen=True)
class LatencyModel:
    stt: StageModel
    vision: StageModel
    llm: StageModel
    tts: StageModel
    residual: StageModel

    def sample(self, n: int, seed: int = 0) -> list[StageLatencies]:
        """Draw n independent per-stage samples; totals are exact sums."""
        if n <= 0:
            raise ContractError("n must be positive")
        rng = random.Random(seed)
        draws = {
            name: getattr(self, name).sampler()
            for name in ("stt", "vision", "llm", "tts", "residual")
        }
        out: list[StageLatencies] = []
        for _ in range(n):
            out.append(
                StageLatencies.from_stages(
                    stt_ms=draws["stt"](rng.gauss(0.0, 1.0)),
                    vision_ms=draws["vision"](rng.gauss(0.0, 1.0)),
                    llm_ms=draws["llm"](rng.gauss(0.0, 1.0)),
                    tts_ms=draws["tts"](rng.gauss(0.0, 1.0)),
                    residual_ms=draws["residual"](rng.gauss(0.0, 1.0)),
                )
            )
        return out


# Profile measured on the reference deployment. The residual spread is set
# so the five stage variances sum to the observed total variance
# (5500^2 ms^2), making the generated totals match 27960 +/- 5500 ms.
_TOTAL_MEAN = 27_960.0
_TOTAL_STD = 5_500.0
_STAGE_MEANS = {"stt": 1_300.0, "vision": 2_130.0, "llm": 9_720.0, "tts": 930.0}
_STAGE_STDS = {"stt": 250.0, "vision": 320.0, "llm": 2_900.0, "tts": 180.0}
_RESIDUAL_MEAN = _TOTAL_MEAN - sum(_STAGE_MEANS.values())
_RESIDUAL_STD = math.sqrt(_TOTAL_STD**2 - sum(v**2 for v in _STAGE_STDS.values()))

REFERENCE_MODEL = LatencyModel(
    stt=StageModel(_STAGE_MEANS["stt"], _STAGE_STDS["stt"]),
    vision=StageModel(_STAGE_MEANS["vision"], _STAGE_STDS["vision"]),
    llm=StageModel(_STAGE_MEANS["llm"], _STAGE_STDS["llm"], p99_ms=14_680.0),
    tts=StageModel(_STAGE_MEANS["tts"], _STAGE_STDS["tts"]),
    residual=StageModel(_RESIDUAL_MEAN, _RESIDUAL_STD),
)

REFERENCE_TOTAL = StageModel(_TOTAL_MEAN, _TOTAL_STD, p99_ms=40_860.0)
