"""Regularity diagnostics: w2 modulus, Besov B^alpha_22 norm, chaining bracket,
empirical Hölder exponents, and the per-field regularity report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import FlatPathError
from .sm import MeasurePath, dyadic_sum, measure

DELTA_REPORT = 0.05
PASS_TOLERANCE = 0.1
MIN_FIT_R2 = 0.9
ROW_FRACTIONS = (0.25, 0.375, 0.5, 0.75, 1.0)
COLUMN_FRACTIONS = (1 / 6, 1 / 3, 1 / 2, 2 / 3, 5 / 6)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Uniform samples of g on [start, stop]."""

    samples: np.ndarray
    start: float
    stop: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or len(samples) < 9:
            raise ValueError("a sampled function needs at least 9 samples")
        if not self.stop > self.start:
            raise ValueError("empty sampling domain")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def on_grid(cls, samples, grid) -> "SampledFunction":
        grid = np.asarray(grid, dtype=float)
        steps = np.diff(grid)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("grid is not uniform")
        return cls(samples, float(grid[0]), float(grid[-1]))

    @property
    def count(self) -> int:
        return len(self.samples)

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.count - 1)

    @property
    def length(self) -> float:
        return self.stop - self.start


def _shift_energy(g: SampledFunction, max_lag: Optional[int] = None) -> np.ndarray:
    """E[k] = trapezoid integral of |g(s + k step) - g(s)|^2 over [c, d - k step]."""
    x = g.samples
    n = g.count
    if max_lag is None:
        max_lag = n - 1
    out = np.zeros(max_lag + 1)
    for k in range(1, min(max_lag, n - 2) + 1):
        d2 = np.square(x[k:] - x[:-k])
        out[k] = g.step * (d2.sum() - 0.5 * (d2[0] + d2[-1]))
    return out


def w2_modulus(g: SampledFunction, r: float) -> float:
    """sup over grid shifts h <= r of the L2 norm of g(. + h) - g(.)."""
    if not 0 <= r <= g.length * (1 + 1e-12):
        raise ValueError(f"r must lie in [0, {g.length}], got {r}")
    k = int(math.floor(r / g.step + 1e-9))
    if k == 0:
        return 0.0
    return float(math.sqrt(_shift_energy(g, k).max()))


@dataclass(frozen=True)
class BesovNorm:
    value: float
    l2: float
    seminorm: float
    bands: tuple
    tail: float
    diverging: bool

    def __float__(self):
        return self.value


def _log_mean(ga: float, gb: float) -> float:
    if ga <= 0 or gb <= 0:
        return 0.5 * (ga + gb)
    if ga == gb:
        return ga
    return (ga - gb) / math.log(ga / gb)


def besov_norm(g: SampledFunction, alpha: float) -> BesovNorm:
    """Norm of g in B^alpha_22([c, d]): L2 norm plus the weighted w2 integral.

    The r-integral is split at r_m = (d - c) 2^-m. Inside each band the
    integrand is interpolated as a power law in r, which integrates the
    w2^2 r^(-2 alpha - 1) shape exactly when w2 is itself a power law. Below
    the finest grid lag w2 is extended linearly (the piecewise-linear
    interpolant of the samples). ``diverging`` is set when the finest band
    does not shrink relative to the one above it.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    x = g.samples
    l2 = math.sqrt(g.step * (np.square(x).sum() - 0.5 * (x[0] ** 2 + x[-1] ** 2)))
    w2sq = np.maximum.accumulate(_shift_energy(g))
    levels = int(math.floor(math.log2(g.count - 1)))
    lags = [max(1, int(round((g.count - 1) / 2.0 ** m))) for m in range(levels + 1)]
    rs = [k * g.step for k in lags]
    G = [w2sq[k] * r ** (-2.0 * alpha) for k, r in zip(lags, rs)]
    bands = []
    for m in range(levels):
        du = math.log(rs[m] / rs[m + 1])
        bands.append(du * _log_mean(G[m], G[m + 1]))
    tail = G[-1] / (2.0 - 2.0 * alpha)
    integral = math.fsum(bands) + tail
    semi = math.sqrt(integral)
    diverging = bool(len(bands) >= 2 and bands[-1] > 0 and bands[-1] >= bands[-2])
    return BesovNorm(l2 + semi, l2, semi, tuple(bands), tail, diverging)


@dataclass(frozen=True)
class ChainingBracket:
    term_zero: float
    besov: float
    dyadic_root: float

    @property
    def bound(self) -> float:
        """Bracket value with the unknown universal constant set to 1."""
        return self.term_zero + self.besov * self.dyadic_root


def chaining_bracket(q: SampledFunction, path: MeasurePath, alpha: float,
                     n_max: Optional[int] = None) -> ChainingBracket:
    """Computable pieces bounding |int_[0,t] q dmu| up to a universal constant.

    ``q`` is sampled on [0, t]; the dyadic sum is truncated at ``n_max``
    levels (default: the path resolution).
    """
    if not 0.5 < alpha < 1:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")
    if q.start != 0.0:
        raise ValueError("q must be sampled on [0, t]")
    t = q.stop
    if abs(path.snap(t) * path.step - t) > 1e-9 * path.horizon:
        raise ValueError(f"t = {t} is not aligned with the path grid")
    term_zero = abs(q.samples[0] * measure(path, 0.0, t))
    bes = besov_norm(q, alpha).value
    sums = dyadic_sum(path, 2.0 * alpha - 1.0, t, n_max)
    return ChainingBracket(float(term_zero), float(bes), float(math.sqrt(sums[-1])))


@dataclass(frozen=True)
class HolderEstimate:
    exponent: float
    fit_r2: float
    lags_used: tuple
    constant: float


def holder_exponent(g: SampledFunction, min_lag: int = 1, max_lag: int = 16) -> HolderEstimate:
    """Slope of log max_i |g(s_i + h) - g(s_i)| against log h over dyadic lags h."""
    if min_lag < 1:
        raise ValueError("min_lag must be at least 1")
    if max_lag > g.count // 4:
        raise ValueError(f"max_lag {max_lag} exceeds count/4 = {g.count // 4}")
    ks = [1 << j for j in range(int(math.log2(max_lag)) + 1) if (1 << j) >= min_lag and (1 << j) <= max_lag]
    if len(ks) < 4:
        raise ValueError(f"need at least 4 dyadic lags in [{min_lag}, {max_lag}]")
    x = g.samples
    m = np.array([np.max(np.abs(x[k:] - x[:-k])) for k in ks])
    if np.any(m <= 0) or not np.all(np.isfinite(m)):
        raise FlatPathError("flat path: increments vanish at some lag")
    h = np.array(ks, dtype=float) * g.step
    fit = stats.linregress(np.log(h), np.log(m))
    r2 = min(1.0, max(0.0, fit.rvalue ** 2))
    return HolderEstimate(float(fit.slope), float(r2), tuple(h.tolist()), float(math.exp(fit.intercept)))


@dataclass
class RegularityReport:
    gamma1_predicted: float
    gamma2_predicted: Optional[float]
    spatial_rows: list
    spatial_estimates: list
    temporal_columns: list
    temporal_estimates: list
    besov: dict
    dyadic: dict
    spatial_status: str
    temporal_status: str
    remark_observed: dict = field(default_factory=dict)

    @property
    def pass_spatial(self) -> bool:
        return self.spatial_status == "pass"

    @property
    def pass_temporal(self) -> bool:
        return self.temporal_status == "pass"

    @property
    def spatial_median(self) -> Optional[float]:
        return _median_exponent(self.spatial_estimates)

    @property
    def temporal_median(self) -> Optional[float]:
        return _median_exponent(self.temporal_estimates)

    def to_dict(self) -> dict:
        def est(e):
            if e is None:
                return None
            return {"exponent": e.exponent, "fit_r2": e.fit_r2, "constant": e.constant}

        return {
            "predicted": {"gamma1": self.gamma1_predicted, "gamma2": self.gamma2_predicted},
            "spatial": {"t": self.spatial_rows, "estimates": [est(e) for e in self.spatial_estimates],
                        "median": self.spatial_median},
            "temporal": {"x": self.temporal_columns, "estimates": [est(e) for e in self.temporal_estimates],
                         "median": self.temporal_median},
            "besov": self.besov,
            "dyadic": self.dyadic,
            "flags": {"spatial": self.spatial_status, "temporal": self.temporal_status},
            "remark_observed": self.remark_observed,
        }


def _median_exponent(estimates) -> Optional[float]:
    vals = [e.exponent for e in estimates if e is not None]
    return float(np.median(vals)) if vals else None


def predicted_exponents(beta_sigma: float, beta_mu: Optional[float]) -> tuple:
    """Predicted (gamma1, gamma2) with the reporting margin subtracted."""
    g1 = beta_sigma - 0.5 - DELTA_REPORT
    g2 = None if beta_mu is None else min(beta_mu, beta_sigma - 0.5) - DELTA_REPORT
    return g1, g2


def status(estimates, predicted: Optional[float]) -> str:
    if predicted is None:
        return "not-applicable"
    good = [e for e in estimates if e is not None]
    if not good:
        return "inconclusive"
    if np.median([e.fit_r2 for e in good]) < MIN_FIT_R2:
        return "inconclusive"
    med = float(np.median([e.exponent for e in good]))
    return "pass" if med >= predicted - PASS_TOLERANCE else "fail"


def _estimate(g: SampledFunction, lags) -> Optional[HolderEstimate]:
    lo, hi = lags
    hi = min(hi, g.count // 4)
    if hi < 8 * lo:
        # too few dyadic lags on a coarse grid: no estimate
        return None
    try:
        return holder_exponent(g, lo, hi)
    except FlatPathError:
        return None


def analyze(fld, sc, path: MeasurePath, delta: Optional[float] = None,
            alphas: Sequence[float] = (0.75,), epsilons: Sequence[float] = (0.5,),
            spatial_lags=(1, 8), temporal_lags=(1, 16)) -> RegularityReport:
    """Estimate space and time Hölder exponents of a solved field and compare
    them with the exponents the scenario's coefficients predict."""
    T = sc.horizon
    if delta is None:
        delta = T / 16
    if not 0 < delta < T / 4:
        raise ValueError(f"delta must lie in (0, T/4), got {delta}")
    values = np.asarray(fld.values)
    tg, xg = np.asarray(fld.t_grid), np.asarray(fld.x_grid)
    nt = len(tg) - 1

    g1, g2 = predicted_exponents(sc.sigma.holder_exponent, sc.sm.claimed_beta_mu)

    row_idx = sorted({int(round(fr * nt)) for fr in ROW_FRACTIONS})
    row_idx = [i for i in row_idx if tg[i] >= delta]
    col_idx = sorted({int(round(fr * (len(xg) - 1))) for fr in COLUMN_FRACTIONS})
    i0 = int(np.searchsorted(tg, delta - 1e-12 * T))

    rows = [SampledFunction.on_grid(values[i], xg) for i in row_idx]
    cols = [SampledFunction.on_grid(values[i0:, j], tg[i0:]) for j in col_idx]
    spatial = [_estimate(g, spatial_lags) for g in rows]
    temporal = [_estimate(g, temporal_lags) for g in cols]

    besov = {}
    for alpha in alphas:
        key = repr(float(alpha))
        sp = [besov_norm(g, alpha) for g in rows]
        tm = [besov_norm(g, alpha) for g in cols]
        besov[key] = {
            "spatial": [b.value for b in sp], "spatial_diverging": [b.diverging for b in sp],
            "temporal": [b.value for b in tm], "temporal_diverging": [b.diverging for b in tm],
        }

    dyadic = {}
    n_max = min(path.levels, int(round(math.log2(nt))))
    for eps in epsilons:
        sums = dyadic_sum(path, eps, T, n_max)
        top = sums[-1]
        converged = bool(top == 0 or (len(sums) >= 3 and top / sums[-3] < 1.05))
        entry = {"converged": converged}
        if converged:
            entry["partial_sums"] = sums.tolist()
        dyadic[repr(float(eps))] = entry

    beta_sigma = sc.sigma.holder_exponent
    beta_mu = sc.sm.claimed_beta_mu
    remark = {
        "gamma1_conjectured": beta_sigma,
        "gamma2_conjectured": None if beta_mu is None else min(beta_mu, beta_sigma),
        "spatial_median": _median_exponent(spatial),
        "temporal_median": _median_exponent(temporal),
    }
    return RegularityReport(
        gamma1_predicted=g1, gamma2_predicted=g2,
        spatial_rows=[float(tg[i]) for i in row_idx], spatial_estimates=spatial,
        temporal_columns=[float(xg[j]) for j in col_idx], temporal_estimates=temporal,
        besov=besov, dyadic=dyadic,
        spatial_status=status(spatial, g1), temporal_status=status(temporal, g2),
        remark_observed=remark,
    )
