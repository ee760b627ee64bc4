"""Laplace sampling and the integer law of the rounded-up noisy set size.

Sampling goes through the inverse CDF so a draw is a pure function of the
generator state; paired-seed experiments on neighboring datasets rely on
that. The learner only ever consumes ceil(mu + w), an integer, and the exact
auditor works directly with that integer pmf, which side-steps the usual
floating-point pathologies of continuous noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams

# smallest positive double; keeps log() finite at the u = 0 edge of the
# inverse CDF without disturbing any other draw
_TINY = 5e-324


@dataclass(frozen=True)
class LaplaceSpec:
    mean: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidParams(f"scale must be positive, got {self.scale}")


def sample_laplace(spec: LaplaceSpec, rng: np.random.Generator, size=None):
    """Inverse-CDF Laplace draw(s); deterministic given the generator state."""
    u = rng.random(size)
    centered = u - 0.5
    mag = np.maximum(1.0 - 2.0 * np.abs(centered), _TINY)
    w = spec.mean - spec.scale * np.sign(centered) * np.log(mag)
    if size is None:
        return float(w)
    return w


def laplace_cdf(x, scale: float):
    """CDF of Laplace(0, scale) in closed form."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x < 0,
                   0.5 * np.exp(np.minimum(x, 0.0) / scale),
                   1.0 - 0.5 * np.exp(-np.maximum(x, 0.0) / scale))
    if out.ndim == 0:
        return float(out)
    return out


def ceil_shifted_laplace_pmf(mu: float, scale: float, k):
    """Pr[ceil(mu + w) = k] for w ~ Laplace(0, scale).

    The event is mu + w in (k-1, k], so the pmf is a CDF difference.
    """
    if not scale > 0:
        raise InvalidParams(f"scale must be positive, got {scale}")
    k = np.asarray(k, dtype=np.float64)
    out = laplace_cdf(k - mu, scale) - laplace_cdf(k - 1.0 - mu, scale)
    if np.ndim(out) == 0:
        return float(out)
    return out


def ceil_shifted_laplace_cdf(mu: float, scale: float, k):
    """Pr[ceil(mu + w) <= k] = Pr[w <= k - mu]."""
    if not scale > 0:
        raise InvalidParams(f"scale must be positive, got {scale}")
    return laplace_cdf(np.asarray(k, dtype=np.float64) - mu, scale)
