"""Mild-solution assembly and Picard iteration on a space-time grid.

The solution is sought as the fixed point of

    u(t, x) = [heat flow of u0] + int_0^t ds [heat flow over t-s of f(s, ., u(s, .))]
              + int_(0,t] dmu(s) [heat flow over t-s of sigma(s, .)]

on t_i = i 2^-n_t T and a uniform x grid. The first and last terms do not
depend on u and are computed once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import toeplitz

from . import kernel
from .catalog import FunctionSpec, Role, check_assumptions
from .errors import AssumptionError, ConfigError, ConvergenceError
from .sm import MeasurePath, SmKind, SmSpec

SQRT_PI = kernel.SQRT_PI


@dataclass(frozen=True)
class Scenario:
    a: float = 1.0
    horizon: float = 1.0
    x_min: float = -6.0
    x_max: float = 6.0
    n_t: int = 8
    n_x: int = 101
    u0: Optional[FunctionSpec] = None
    f: Optional[FunctionSpec] = None
    sigma: Optional[FunctionSpec] = None
    sm: Optional[SmSpec] = None
    sm_levels: Optional[int] = None
    seed: int = 0
    quad_nodes: int = 64
    picard_tol: float = 1e-10
    picard_max_iter: int = 50

    def __post_init__(self):
        if self.a == 0 or not math.isfinite(self.a):
            raise ConfigError("diffusion coefficient a must be finite and nonzero")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.x_min < self.x_max:
            raise ConfigError("spatial window needs x_min < x_max")
        if not 1 <= self.n_t <= 24:
            raise ConfigError(f"n_t must be in [1, 24], got {self.n_t}")
        if self.n_x < 2:
            raise ConfigError("n_x must be at least 2")
        if not 16 <= self.quad_nodes <= 128:
            raise ConfigError(f"quad_nodes must be in [16, 128], got {self.quad_nodes}")
        if not self.picard_tol > 0:
            raise ConfigError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ConfigError("picard_max_iter must be at least 1")
        if self.sm_levels is not None and self.sm_levels < self.n_t:
            raise ConfigError(f"sm levels {self.sm_levels} below time grid levels {self.n_t}")
        for spec, role in ((self.u0, Role.INITIAL_CONDITION), (self.f, Role.DRIFT),
                           (self.sigma, Role.DIFFUSION)):
            if spec is None:
                raise ConfigError(f"scenario is missing its {role.value} function")
            if spec.role is not role:
                raise ConfigError(f"{spec.name} is a {spec.role.value} entry, expected {role.value}")
            check_assumptions(spec)
        if self.sm is None:
            raise ConfigError("scenario is missing its stochastic measure")
        if self.sm.weight is not None:
            check_assumptions(self.sm.weight)

    @property
    def path_levels(self) -> int:
        return self.n_t if self.sm_levels is None else self.sm_levels

    @property
    def dt(self) -> float:
        return self.horizon / (1 << self.n_t)

    @property
    def t_grid(self) -> np.ndarray:
        return np.arange((1 << self.n_t) + 1) * self.dt

    @property
    def x_grid(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def rule(self) -> kernel.QuadratureRule:
        return kernel.gauss_hermite(self.quad_nodes)


@dataclass(frozen=True, eq=False)
class Field:
    values: np.ndarray
    t_grid: np.ndarray
    x_grid: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.t_grid), len(self.x_grid)):
            raise ValueError("field values do not match the grid")
        for arr in (self.values, self.t_grid, self.x_grid):
            arr.flags.writeable = False


@dataclass(frozen=True, eq=False)
class Solution:
    field: Field
    iterations: int
    residuals: list
    initial: np.ndarray
    stochastic: np.ndarray


def _check_path(sc: Scenario, path: MeasurePath) -> None:
    if not math.isclose(path.horizon, sc.horizon, rel_tol=0, abs_tol=1e-12 * sc.horizon):
        raise ValueError(f"path horizon {path.horizon} differs from scenario horizon {sc.horizon}")
    if path.levels < sc.n_t:
        raise ValueError(f"path resolution {path.levels} below time grid levels {sc.n_t}")


def initial_term(sc: Scenario, t, x):
    """Heat flow of u0; u0(x) itself at t = 0."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(t < 0) or np.any(t > sc.horizon * (1 + 1e-12)):
        raise ValueError("t must lie in [0, T]")
    t, x = np.broadcast_arrays(t, x)
    out = np.empty(t.shape)
    zero = t == 0
    out[zero] = sc.u0(x[zero])
    if np.any(~zero):
        out[~zero] = kernel.convolve(t[~zero], x[~zero], sc.a, sc.u0, sc.rule)
    return out if out.ndim else float(out)


def _interp_rows(u: np.ndarray, x_grid: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Linear interpolation of each row of u at points y, constant outside the grid."""
    x0, dx = x_grid[0], x_grid[1] - x_grid[0]
    pos = np.clip((y - x0) / dx, 0.0, len(x_grid) - 1)
    lo = np.minimum(np.floor(pos).astype(np.int64), len(x_grid) - 2)
    w = pos - lo
    return u[..., lo] * (1.0 - w) + u[..., lo + 1] * w


def _inner_drift(sc: Scenario, s, row, lag: float, x):
    """int p(lag, x - y) f(s, y, u~(s, y)) dy; f(s, x, u(s, x)) at zero lag."""
    xg = sc.x_grid
    if lag == 0:
        return sc.f(s, x, _interp_rows(row, xg, np.asarray(x, dtype=float)))
    return kernel.convolve(lag, x, sc.a, lambda y: sc.f(s, y, _interp_rows(row, xg, y)), sc.rule)


def _trapezoid_weights(i: int, dt: float) -> np.ndarray:
    w = np.full(i + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def drift_term(sc: Scenario, u: np.ndarray, i_t: int, j_x: int) -> float:
    """Composite trapezoid in s over rows 0..i_t of the drift convolution at one node."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] <= i_t or u.shape[1] != sc.n_x:
        raise ValueError("field rows missing for drift evaluation")
    if i_t == 0:
        return 0.0
    tg = sc.t_grid
    x = sc.x_grid[j_x]
    w = _trapezoid_weights(i_t, sc.dt)
    vals = [_inner_drift(sc, tg[l], u[l], (i_t - l) * sc.dt, x) for l in range(i_t + 1)]
    return float(np.dot(w, vals))


def phi(sc: Scenario, t: float, x, s):
    """Heat flow over t - s of sigma(s, .) evaluated at x; sigma(t, x) at s = t."""
    s = np.asarray(s, dtype=float)
    lag = t - s
    if np.any(lag < 0):
        raise ValueError("phi requires s <= t")
    x = np.asarray(x, dtype=float)
    lag, x, s = np.broadcast_arrays(lag, x, s)
    out = np.empty(lag.shape)
    at = lag == 0
    out[at] = sc.sigma(s[at], x[at])
    if np.any(~at):
        ss = s[~at][:, None]
        out[~at] = kernel.convolve(lag[~at], x[~at], sc.a, lambda y: sc.sigma(ss, y), sc.rule)
    return out if out.ndim else float(out)


def stochastic_term(sc: Scenario, path: MeasurePath, i_t: int, j_x: int) -> float:
    """Left-endpoint Stieltjes sum of phi(t_i, x_j, .) against mu over (0, t_i]."""
    _check_path(sc, path)
    if i_t == 0:
        return 0.0
    mu = path.increments(sc.n_t)[:i_t]
    s = sc.t_grid[:i_t]
    vals = phi(sc, sc.t_grid[i_t], sc.x_grid[j_x], s)
    return float(np.dot(mu, vals))


class MildSolver:
    """Picard solver for one scenario; caches every path-independent table.

    Reusing an instance across ensemble members avoids recomputing the heat
    flow of u0 and the per-lag convolution tables of sigma.
    """

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.t_grid = sc.t_grid
        self.x_grid = sc.x_grid
        self._initial = None
        self._sigma_tables = None

    @property
    def initial(self) -> np.ndarray:
        if self._initial is None:
            sc = self.sc
            out = np.empty((len(self.t_grid), sc.n_x))
            out[0] = sc.u0(self.x_grid)
            for i in range(1, len(self.t_grid)):
                out[i] = kernel.convolve(self.t_grid[i], self.x_grid, sc.a, sc.u0, sc.rule)
            self._initial = out
        return self._initial

    def _tables(self):
        # K[lag, j] = heat flow over lag*dt of the space factor, at x_j; K[0] unused
        if self._sigma_tables is None:
            sc = self.sc
            n = len(self.t_grid)
            lags = np.arange(1, n) * sc.dt
            tables = []
            for term in sc.sigma.terms:
                if term.space_constant:
                    k0 = float(kernel.convolve(sc.dt, 0.0, sc.a, term.space_factor, sc.rule))
                    tables.append(k0)
                    continue
                tab = np.zeros((n, sc.n_x))
                for m, lag in enumerate(lags, start=1):
                    tab[m] = kernel.convolve(lag, self.x_grid, sc.a, term.space_factor, sc.rule)
                tables.append(tab)
            self._sigma_tables = tables
        return self._sigma_tables

    def stochastic(self, path: MeasurePath) -> np.ndarray:
        """Stochastic convolution on the whole grid, S[i, j] = sum_{l<i} mu_l phi(t_i, x_j, s_l)."""
        sc = self.sc
        _check_path(sc, path)
        n = len(self.t_grid)
        cum = path.coarse_cumulative(sc.n_t)
        mu = np.diff(cum)
        s_left = self.t_grid[:-1]
        out = np.zeros((n, sc.n_x))
        for term, tab in zip(sc.sigma.terms, self._tables()):
            if term.time_constant:
                c = float(term.time_factor(0.0))
                weighted = None
            else:
                weighted = np.asarray(term.time_factor(s_left), dtype=float) * mu
            if term.space_constant:
                if weighted is None:
                    col = (c * tab) * cum
                else:
                    col = np.concatenate([[0.0], np.cumsum(weighted)]) * tab
                out += col[:, None]
                continue
            if weighted is None:
                weighted = c * mu
            # T[i, m] = weighted[i - m]; column m = 0 meets tab[0] = 0
            first_col = np.concatenate([weighted, [0.0]])
            lower = toeplitz(first_col, np.zeros(n))
            out += lower @ tab
        return out

    def drift(self, u: np.ndarray) -> np.ndarray:
        """Drift convolution on the whole grid for the iterate u."""
        sc = self.sc
        n = len(self.t_grid)
        dt = sc.dt
        xg = self.x_grid
        rule = sc.rule
        out = np.zeros((n, sc.n_x))
        if sc.f.is_zero:
            return out
        s_col = self.t_grid[:, None]
        # lag 0 (delta limit): contributes dt/2 * f(t_i, x, u(t_i, x)) to row i >= 1
        g0 = np.asarray(sc.f(s_col, xg[None, :], u), dtype=float)
        out[1:] += 0.5 * dt * g0[1:]
        for m in range(1, n):
            spread = 2.0 * sc.a * math.sqrt(m * dt)
            y = xg[:, None] - spread * rule.nodes[None, :]
            rows = u[: n - m]
            vals = sc.f(s_col[: n - m, :, None], y[None], _interp_rows(rows, xg, y))
            g = np.asarray(vals, dtype=float) @ rule.weights / SQRT_PI
            # source row l = 0 carries half weight; every other source row l < i full weight
            g[0] *= 0.5
            out[m:] += dt * g
        return out

    def solve(self, path: MeasurePath, initial_guess=0.0) -> Solution:
        sc = self.sc
        base = self.initial + self.stochastic(path)
        if sc.f.is_zero:
            values = base.copy()
            return self._finish(values, 1, [float(np.max(np.abs(values - initial_guess)))], base)
        u = np.broadcast_to(np.asarray(initial_guess, dtype=float), base.shape).copy()
        u[0] = self.initial[0]
        residuals = []
        for it in range(1, sc.picard_max_iter + 1):
            new = base + self.drift(u)
            res = float(np.max(np.abs(new - u)))
            residuals.append(res)
            u = new
            if not np.all(np.isfinite(u)):
                raise ConvergenceError("Picard iterate became non-finite", residuals)
            if res < sc.picard_tol:
                return self._finish(u, it, residuals, base)
        raise ConvergenceError(
            f"Picard iteration did not reach tol {sc.picard_tol:g} in {sc.picard_max_iter} "
            f"iterations (last residual {residuals[-1]:.3e})", residuals)

    def _finish(self, values, iterations, residuals, base) -> Solution:
        values[0] = self.initial[0]
        fld = Field(values, self.t_grid.copy(), self.x_grid.copy())
        return Solution(fld, iterations, residuals, self.initial, base - self.initial)


def picard_solve(sc: Scenario, path: MeasurePath, initial_guess=0.0) -> Solution:
    return MildSolver(sc).solve(path, initial_guess)


def residual_ratios(residuals) -> np.ndarray:
    r = np.asarray(residuals, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return r[1:] / r[:-1]
