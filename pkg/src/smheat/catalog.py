"""Named coefficient functions with their regularity metadata.

Each entry carries the constants the standing assumptions ask for: a sup-norm
bound, a Lipschitz constant in (y, v) for drifts, and a Hölder exponent for
initial conditions and diffusion coefficients. ``check_assumptions`` turns the
metadata into named diagnostics.

Diffusion coefficients are stored as sums of separable terms
``time_factor(s) * space_factor(y)``; the solver relies on this to tabulate
spatial convolutions once per time lag.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AssumptionError, ConfigError


class Role(str, enum.Enum):
    INITIAL_CONDITION = "u0"
    DRIFT = "f"
    DIFFUSION = "sigma"
    WEIGHT = "weight"


@dataclass(frozen=True)
class SeparableTerm:
    time_factor: Callable
    space_factor: Callable
    time_constant: bool = False
    space_constant: bool = False


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: tuple
    role: Role
    bound: float
    lipschitz: Optional[float]
    holder_exponent: Optional[float]
    fn: Callable = field(compare=False, repr=False)
    terms: tuple = field(default=(), compare=False, repr=False)
    is_zero: bool = field(default=False, compare=False)

    def __call__(self, *args):
        return self.fn(*args)


def _const_like(c):
    return lambda *args: np.full(np.shape(args[-1]), c, dtype=float)


# --- initial conditions u0(y) -------------------------------------------------

def _gaussian_bump(p):
    c = p[0] if p else 1.0
    return dict(params=(c,), bound=abs(c), lipschitz=abs(c) * math.sqrt(2.0 / math.e),
                holder_exponent=1.0, fn=lambda y: c * np.exp(-np.square(y)))


def _scaled_sine(p):
    c, k = (tuple(p) + (1.0, 1.0)[len(p):])[:2]
    return dict(params=(c, k), bound=abs(c), lipschitz=abs(c * k), holder_exponent=1.0,
                fn=lambda y: c * np.sin(k * y))


def _constant_u0(p):
    c = p[0] if p else 1.0
    return dict(params=(c,), bound=abs(c), lipschitz=0.0, holder_exponent=1.0, fn=_const_like(c))


def _rough_sine(p):
    c, k, beta = (tuple(p) + (1.0, 1.0, 0.75)[len(p):])[:3]
    return dict(params=(c, k, beta), bound=abs(c), lipschitz=None, holder_exponent=beta,
                fn=lambda y: c * np.abs(np.sin(k * y)) ** beta)


# --- drifts f(s, y, v) -----------------------------------------------------------

def _zero_f(p):
    return dict(params=(), bound=0.0, lipschitz=0.0, holder_exponent=None,
                fn=lambda s, y, v: np.zeros(np.broadcast(s, y, v).shape), is_zero=True)


def _constant_f(p):
    c = p[0] if p else 1.0
    return dict(params=(c,), bound=abs(c), lipschitz=0.0, holder_exponent=None,
                fn=lambda s, y, v: np.full(np.broadcast(s, y, v).shape, c, dtype=float),
                is_zero=c == 0)


def _bounded_logistic(p):
    c = p[0] if p else 1.0
    # max |d/dv v/(1+v^2)| = 1 at v = 0
    return dict(params=(c,), bound=abs(c) / 2.0, lipschitz=abs(c), holder_exponent=None,
                fn=lambda s, y, v: np.broadcast_to(c * v / (1.0 + np.square(v)),
                                                   np.broadcast(s, y, v).shape))


def _damped_sine(p):
    c = p[0] if p else 1.0
    return dict(params=(c,), bound=abs(c), lipschitz=abs(c) * (1.0 + math.sqrt(2.0 / math.e)),
                holder_exponent=None,
                fn=lambda s, y, v: np.broadcast_to(c * np.sin(v + y) * np.exp(-np.square(y)),
                                                   np.broadcast(s, y, v).shape))


def _linear_f(p):
    c = p[0] if p else 1.0
    return dict(params=(c,), bound=math.inf if c else 0.0, lipschitz=abs(c), holder_exponent=None,
                fn=lambda s, y, v: np.broadcast_to(c * np.asarray(v, dtype=float),
                                                   np.broadcast(s, y, v).shape))


# --- diffusion coefficients sigma(s, y) --------------------------------------------

def _constant_sigma(p):
    c = p[0] if p else 1.0
    term = SeparableTerm(_const_like(c), _const_like(1.0), True, True)
    return dict(params=(c,), bound=abs(c), lipschitz=0.0, holder_exponent=1.0,
                fn=lambda s, y: np.full(np.broadcast(s, y).shape, c, dtype=float), terms=(term,))


def _time_space_sine(p):
    c, omega, k = (tuple(p) + (1.0, 2.0, 1.0)[len(p):])[:3]
    terms = (SeparableTerm(_const_like(0.5 * c), _const_like(1.0), True, True),
             SeparableTerm(lambda s: 0.5 * c * np.sin(omega * np.asarray(s, dtype=float)),
                           lambda y: np.cos(k * y)))
    return dict(params=(c, omega, k), bound=abs(c), lipschitz=None, holder_exponent=1.0,
                fn=lambda s, y: 0.5 * c * (1.0 + np.sin(omega * s) * np.cos(k * y)), terms=terms)


def _holder_rough(p):
    beta, omega, k = (tuple(p) + (0.75, 2.0, 1.0)[len(p):])[:3]
    c = p[3] if len(p) > 3 else 1.0
    terms = (SeparableTerm(lambda s: c * np.abs(np.sin(omega * np.asarray(s, dtype=float))) ** beta,
                           lambda y: np.cos(k * y)),)
    params = (beta, omega, k) if len(p) <= 3 else (beta, omega, k, c)
    return dict(params=params, bound=abs(c), lipschitz=None, holder_exponent=beta,
                fn=lambda s, y: c * np.abs(np.sin(omega * s)) ** beta * np.cos(k * y), terms=terms)


# --- weights for fBm-driven measures ---------------------------------------------------

def _constant_weight(p):
    c = p[0] if p else 1.0
    return dict(params=(c,), bound=abs(c), lipschitz=0.0, holder_exponent=None, fn=_const_like(c))


def _cosine_weight(p):
    c, omega = (tuple(p) + (1.0, 1.0)[len(p):])[:2]
    return dict(params=(c, omega), bound=abs(c), lipschitz=abs(c * omega), holder_exponent=None,
                fn=lambda t: c * np.cos(omega * np.asarray(t, dtype=float)))


CATALOG = {
    Role.INITIAL_CONDITION: {"gaussian_bump": _gaussian_bump, "scaled_sine": _scaled_sine,
                             "constant": _constant_u0, "rough_sine": _rough_sine},
    Role.DRIFT: {"zero": _zero_f, "constant": _constant_f, "bounded_logistic": _bounded_logistic,
                 "damped_sine": _damped_sine, "linear": _linear_f},
    Role.DIFFUSION: {"constant": _constant_sigma, "time_space_sine": _time_space_sine,
                     "holder_rough": _holder_rough},
    Role.WEIGHT: {"constant": _constant_weight, "cosine": _cosine_weight},
}

# positional index of the Hölder exponent among a diffusion entry's params, for sweeps
HOLDER_PARAM_INDEX = {"holder_rough": 0}


def make(role: Role | str, name: str, params: Sequence[float] = ()) -> FunctionSpec:
    """Look up a catalog entry. Assumptions are not checked here."""
    role = Role(role)
    try:
        builder = CATALOG[role][name]
    except KeyError:
        known = ", ".join(sorted(CATALOG[role]))
        raise ConfigError(f"unknown {role.value} catalog name {name!r} (known: {known})") from None
    params = tuple(float(v) for v in params)
    kw = builder(params)
    return FunctionSpec(name=name, role=role, **kw)


def check_assumptions(spec: FunctionSpec) -> None:
    """Raise AssumptionError naming the first violated assumption."""
    role = spec.role
    if role is Role.INITIAL_CONDITION:
        if not math.isfinite(spec.bound):
            raise AssumptionError("A1", f"u0 {spec.name} is unbounded")
        if spec.holder_exponent is None or spec.holder_exponent < 0.5:
            raise AssumptionError("A2", f"u0 holder_exponent {spec.holder_exponent} < 0.5")
        if spec.holder_exponent > 1.0:
            raise AssumptionError("A2", f"u0 holder_exponent {spec.holder_exponent} > 1")
    elif role is Role.DRIFT:
        if not math.isfinite(spec.bound):
            raise AssumptionError("A3", f"f {spec.name} is unbounded")
        if spec.lipschitz is None or not math.isfinite(spec.lipschitz):
            raise AssumptionError("A4", f"f {spec.name} has no finite Lipschitz constant")
    elif role is Role.DIFFUSION:
        if not math.isfinite(spec.bound):
            raise AssumptionError("A5", f"sigma {spec.name} is unbounded")
        beta = spec.holder_exponent
        if beta is None or beta <= 0.5:
            raise AssumptionError("A6", f"sigma holder_exponent {beta} ≤ 0.5")
        if beta > 1.0:
            raise AssumptionError("A6", f"sigma holder_exponent {beta} > 1")
    elif role is Role.WEIGHT:
        if not math.isfinite(spec.bound):
            raise ConfigError(f"weight {spec.name} must be bounded")
