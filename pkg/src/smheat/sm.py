"""Stochastic measures on [0, T] represented by cumulative paths on a dyadic grid.

A measure mu is stored through L(t_k) = mu((0, t_k]) on t_k = k 2^-levels T, so
mu((a, b]) = L(b) - L(a) after snapping a and b to the grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .catalog import FunctionSpec, Role
from .errors import ConfigError

MAX_LEVELS = 24
MAX_FBM_LEVELS = 14
RNG_ALGORITHM = "numpy.random.PCG64"


class SmKind(str, enum.Enum):
    WIENER = "wiener"
    WEIGHTED_FBM = "weighted_fbm"
    ALPHA_STABLE = "alpha_stable"
    COMPENSATED_POISSON = "compensated_poisson"
    ZERO = "zero"
    DETERMINISTIC_LINEAR = "deterministic_linear"

    @classmethod
    def parse(cls, text: str) -> "SmKind":
        key = text.strip().lower().replace("-", "_")
        aliases = {"fbm": "weighted_fbm", "weightedfbm": "weighted_fbm",
                   "alphastable": "alpha_stable", "stable": "alpha_stable",
                   "poisson": "compensated_poisson", "compensatedpoisson": "compensated_poisson",
                   "linear": "deterministic_linear", "deterministiclinear": "deterministic_linear"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown stochastic measure kind {text!r}") from None


JUMP_KINDS = frozenset({SmKind.ALPHA_STABLE, SmKind.COMPENSATED_POISSON})


@dataclass(frozen=True)
class SmSpec:
    """Parameters of a stochastic-measure generator.

    ``claimed_beta_mu`` is the supremum Hölder exponent of the cumulative path
    (1/2 for Wiener, H for fBm); the safety margin is applied downstream.
    None means assumption A7 is not claimed.
    """

    kind: SmKind
    hurst: Optional[float] = None
    weight: Optional[FunctionSpec] = None
    alpha: Optional[float] = None
    scale: float = 1.0
    intensity: Optional[float] = None
    jump_mean: Optional[float] = None
    claimed_beta_mu: Optional[float] = field(default=None)

    def __post_init__(self):
        k = self.kind
        if (self.hurst is not None) != (k is SmKind.WEIGHTED_FBM):
            raise ConfigError("hurst must be given exactly for weighted_fbm")
        if (self.alpha is not None) != (k is SmKind.ALPHA_STABLE):
            raise ConfigError("alpha must be given exactly for alpha_stable")
        if k is SmKind.WEIGHTED_FBM:
            if not 0.5 < self.hurst < 1.0:
                raise ConfigError(f"hurst must lie in (1/2, 1), got {self.hurst}")
            if self.weight is None:
                raise ConfigError("weighted_fbm requires a weight function")
            if self.weight.role is not Role.WEIGHT:
                raise ConfigError("weighted_fbm weight must be a Weight catalog entry")
        if k is SmKind.ALPHA_STABLE:
            if not 0.0 < self.alpha < 2.0:
                raise ConfigError(f"alpha must lie in (0, 2), got {self.alpha}")
            if not self.scale > 0:
                raise ConfigError(f"stable scale must be positive, got {self.scale}")
        if k is SmKind.COMPENSATED_POISSON:
            if self.intensity is None or not self.intensity > 0:
                raise ConfigError("compensated_poisson requires intensity > 0")
            if self.jump_mean is None or not math.isfinite(self.jump_mean):
                raise ConfigError("compensated_poisson requires a finite jump_mean")
        if k in JUMP_KINDS:
            if self.claimed_beta_mu is not None:
                raise ConfigError(f"{k.value} paths are not continuous; claimed_beta_mu must be none")
        elif self.claimed_beta_mu is not None and not self.claimed_beta_mu > 0:
            raise ConfigError(f"claimed_beta_mu must be positive, got {self.claimed_beta_mu}")

    @classmethod
    def create(cls, kind, **kw) -> "SmSpec":
        """Build a spec, filling ``claimed_beta_mu`` with the kind's default."""
        kind = SmKind.parse(kind) if isinstance(kind, str) else kind
        if "claimed_beta_mu" not in kw:
            kw["claimed_beta_mu"] = default_beta_mu(kind, kw.get("hurst"))
        return cls(kind, **kw)


def default_beta_mu(kind: SmKind, hurst: Optional[float] = None) -> Optional[float]:
    if kind is SmKind.WIENER:
        return 0.5
    if kind is SmKind.WEIGHTED_FBM:
        return hurst
    if kind is SmKind.DETERMINISTIC_LINEAR:
        return 1.0
    # Zero: flat path carries no temporal information; jump kinds fail A7.
    return None


@dataclass(frozen=True, eq=False)
class MeasurePath:
    horizon: float
    levels: int
    cumulative: np.ndarray
    spec: SmSpec
    seed: int

    @property
    def n_intervals(self) -> int:
        return 1 << self.levels

    @property
    def step(self) -> float:
        return self.horizon / self.n_intervals

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_intervals + 1) * self.step

    def increments(self, levels: Optional[int] = None) -> np.ndarray:
        """mu over the 2^levels consecutive grid cells of (0, T]."""
        return np.diff(self.coarse_cumulative(levels))

    def coarse_cumulative(self, levels: Optional[int] = None) -> np.ndarray:
        if levels is None:
            return self.cumulative
        if not 0 <= levels <= self.levels:
            raise ValueError(f"requested {levels} levels from a path with {self.levels}")
        return self.cumulative[:: 1 << (self.levels - levels)]

    def snap(self, t: float) -> int:
        """Grid index nearest to t, ties rounded toward 0."""
        if not 0.0 <= t <= self.horizon:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        return int(math.ceil(t / self.step - 0.5))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def fgn_circulant(hurst: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact fractional Gaussian noise with unit step via circulant embedding.

    The fGn autocovariance is embedded in a circulant matrix of size 2n whose
    eigenvalues are nonnegative for H in (0, 1); the factorization is exact in
    law.
    """
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * hurst
    gamma = 0.5 * ((k + 1) ** h2 - 2.0 * k ** h2 + np.abs(k - 1) ** h2)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise ArithmeticError("circulant embedding has negative eigenvalues")
    lam = np.clip(lam, 0.0, None)
    m = len(row)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.fft.fft(np.sqrt(lam / m) * z).real[:n]


def symmetric_stable(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Chambers-Mallows-Stuck symmetric alpha-stable variates, unit scale."""
    phi = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size)
    if alpha == 1.0:
        return np.tan(phi)
    w = rng.standard_exponential(size)
    return (np.sin(alpha * phi) / np.cos(phi) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * phi) / w) ** ((1.0 - alpha) / alpha))


def sample_path(spec: SmSpec, horizon: float, levels: int, seed: int) -> MeasurePath:
    """Draw one realization of the measure on the 2^levels dyadic grid of [0, horizon]."""
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if not 1 <= levels <= MAX_LEVELS:
        raise ValueError(f"levels must be in [1, {MAX_LEVELS}], got {levels}")
    if seed < 0:
        raise ValueError("seed must be unsigned")
    n = 1 << levels
    dt = horizon / n
    rng = _rng(seed)
    kind = spec.kind

    if kind is SmKind.ZERO:
        inc = np.zeros(n)
    elif kind is SmKind.DETERMINISTIC_LINEAR:
        cum = np.arange(n + 1) * dt
        return _freeze(horizon, levels, cum, spec, seed)
    elif kind is SmKind.WIENER:
        inc = rng.standard_normal(n) * math.sqrt(dt)
    elif kind is SmKind.WEIGHTED_FBM:
        if levels > MAX_FBM_LEVELS:
            raise ValueError(f"weighted_fbm supports at most {MAX_FBM_LEVELS} levels")
        dw = fgn_circulant(spec.hurst, n, rng) * dt ** spec.hurst
        left = np.arange(n) * dt
        inc = np.asarray(spec.weight(left), dtype=float) * dw
    elif kind is SmKind.ALPHA_STABLE:
        inc = symmetric_stable(spec.alpha, n, rng) * spec.scale * dt ** (1.0 / spec.alpha)
    elif kind is SmKind.COMPENSATED_POISSON:
        counts = rng.poisson(spec.intensity * dt, n)
        inc = spec.jump_mean * (counts - spec.intensity * dt)
    else:  # pragma: no cover
        raise ValueError(f"unsupported kind {kind}")

    cum = np.empty(n + 1)
    cum[0] = 0.0
    np.cumsum(inc, out=cum[1:])
    return _freeze(horizon, levels, cum, spec, seed)


def _freeze(horizon, levels, cum, spec, seed) -> MeasurePath:
    cum = np.ascontiguousarray(cum, dtype=float)
    cum.flags.writeable = False
    return MeasurePath(float(horizon), int(levels), cum, spec, int(seed))


def measure(path: MeasurePath, a: float, b: float) -> float:
    """mu((a, b]) with both endpoints snapped to the path grid."""
    if a > b:
        raise ValueError(f"interval endpoints out of order: {a} > {b}")
    if a == b:
        return 0.0
    ia, ib = path.snap(a), path.snap(b)
    return float(path.cumulative[ib] - path.cumulative[ia])


def dyadic_increments(path: MeasurePath, n: int, t: float) -> np.ndarray:
    """mu of the 2^n dyadic intervals ((k-1) 2^-n t, k 2^-n t], k = 1..2^n."""
    if not 1 <= n <= path.levels:
        raise ValueError(f"dyadic level {n} exceeds path resolution {path.levels}")
    if not 0 < t <= path.horizon:
        raise ValueError(f"t must lie in (0, {path.horizon}], got {t}")
    bounds = np.arange((1 << n) + 1) * (t / (1 << n))
    idx = np.ceil(bounds / path.step - 0.5).astype(np.int64)
    idx[-1] = path.snap(t)
    return np.diff(path.cumulative[idx])


def dyadic_sum(path: MeasurePath, epsilon: float, t: float, n_max: Optional[int] = None) -> np.ndarray:
    """Partial sums S_N = sum_{n<=N} 2^{-n eps} sum_k mu(Delta_kn)^2 for N = 1..n_max."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if n_max is None:
        n_max = path.levels
    if not 1 <= n_max <= path.levels:
        raise ValueError(f"n_max must be in [1, {path.levels}]")
    terms = np.array([2.0 ** (-n * epsilon) * np.sum(dyadic_increments(path, n, t) ** 2)
                      for n in range(1, n_max + 1)])
    return np.cumsum(terms)
