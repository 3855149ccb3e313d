"""Test-function pairs (f, f_hat), averaging weights, and the variance model.

Fourier convention: f_hat(u) = int f(x) exp(-2 pi i x u) dx, so f_hat(0) = int f.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

__all__ = [
    "TestFunction",
    "VarianceModel",
    "WeightFunction",
    "make_test_function",
    "make_weight",
    "sigma_model",
    "triangle_sigma_integral",
]

Evaluator = Callable[[np.ndarray], np.ndarray]

BUMP_GRID_HALFWIDTH = 50.0
BUMP_GRID_POINTS = 2**16


def _as_out(x, out):
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class TestFunction:
    """An even f with f_hat supported in [-support_radius, support_radius].

    ``x_cut`` bounds the effective support of f: the mean-term integral is
    taken over |x| <= x_cut.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    f: Evaluator
    f_hat: Evaluator
    support_radius: float = 1.0
    x_cut: float = 50.0


def _triangle_f(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(under="ignore"):
        return _as_out(x, np.sinc(x) ** 2)


def _triangle_f_hat(u):
    u = np.asarray(u, dtype=float)
    return _as_out(u, np.clip(1.0 - np.abs(u), 0.0, None))


def _bump_f_hat(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    with np.errstate(under="ignore"):
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return _as_out(u, out)


@lru_cache(maxsize=1)
def _bump_spline() -> CubicSpline:
    # f(x) = 2 int_0^1 f_hat(u) cos(2 pi x u) du, sampled on a fixed grid
    x = np.linspace(0.0, BUMP_GRID_HALFWIDTH, BUMP_GRID_POINTS // 2 + 1)
    nodes, weights = np.polynomial.legendre.leggauss(256)
    u = 0.5 * (nodes + 1.0)
    w = 0.5 * weights * _bump_f_hat(u)
    vals = np.empty_like(x)
    for s in range(0, len(x), 4096):
        vals[s : s + 4096] = 2.0 * np.cos(2 * np.pi * np.outer(x[s : s + 4096], u)) @ w
    return CubicSpline(x, vals, bc_type=((1, 0.0), "not-a-knot"))


def _bump_f(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.zeros_like(ax)
    inside = ax <= BUMP_GRID_HALFWIDTH
    out[inside] = _bump_spline()(ax[inside])
    return _as_out(x, out)


def make_test_function(kind: str = "triangle") -> TestFunction:
    if kind == "triangle":
        # envelope 1/(pi x)^2 falls below 1e-12 at x = 1e6/pi
        return TestFunction("triangle", _triangle_f, _triangle_f_hat, 1.0, 1.0 / (math.pi * 1e-6))
    if kind in ("bump", "smooth-bump"):
        return TestFunction("bump", _bump_f, _bump_f_hat, 1.0, BUMP_GRID_HALFWIDTH)
    raise ValueError(f"unknown test function kind {kind!r}")


# ---------------------------------------------------------------- weights


@dataclass(frozen=True)
class WeightFunction:
    kind: str
    w: Evaluator
    support: tuple[float, float]

    def inverse_cdf(self, q: np.ndarray) -> np.ndarray:
        """Quantile function of the probability density w."""
        a, b = self.support
        if self.kind == "indicator":
            return a + (b - a) * np.asarray(q, dtype=float)
        x, cdf = _bump_cdf_table()
        return np.interp(q, cdf, x)


def _bump_raw(x):
    x = np.asarray(x, dtype=float)
    t = 2.0 * x - 3.0
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    with np.errstate(under="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@lru_cache(maxsize=1)
def _bump_norm() -> float:
    val, _ = integrate.quad(lambda x: float(_bump_raw(x)), 1.0, 2.0, epsabs=0, epsrel=1e-13, limit=200)
    return val


@lru_cache(maxsize=1)
def _bump_cdf_table():
    x = np.linspace(1.0, 2.0, 200_001)
    with np.errstate(under="ignore"):
        y = _bump_raw(x) / _bump_norm()
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))])
        cdf /= cdf[-1]
    return x, cdf


def _bump_w(x):
    return _as_out(x, _bump_raw(x) / _bump_norm())


def _indicator_w(x):
    x = np.asarray(x, dtype=float)
    return _as_out(x, ((x >= 1.0) & (x <= 2.0)).astype(float))


def make_weight(kind: str = "bump") -> WeightFunction:
    if kind in ("bump", "smooth-bump"):
        return WeightFunction("bump", _bump_w, (1.0, 2.0))
    if kind == "indicator":
        return WeightFunction("indicator", _indicator_w, (1.0, 2.0))
    raise ValueError(f"unknown weight kind {kind!r}")


# ---------------------------------------------------------------- variance model


@dataclass(frozen=True)
class VarianceModel:
    L: float
    sigma_sq: float
    kappa: float
    f_kind: str

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)


def triangle_sigma_integral(a: float) -> float:
    """int_0^1 (1-u)^2 e^{a u} du for a > 0, in a cancellation-free form."""
    if a < 1e-2:
        # Taylor series: sum_k a^k / k! * 2/((k+1)(k+2)(k+3))
        return math.fsum(a**k / math.factorial(k) * 2.0 / ((k + 1) * (k + 2) * (k + 3)) for k in range(12))
    # (2/a^3) e^a - (1/a + 2/a^2 + 2/a^3) = (2/a^3)(e^a - 1 - a - a^2/2)
    tail = math.expm1(a) - a - 0.5 * a * a
    return 2.0 * tail / a**3


def sigma_model(L: float, f: TestFunction, kappa: float) -> VarianceModel:
    """sigma_L^2 = (2 kappa/(pi L)) int_0^inf f_hat(u)^2 e^{pi L u} du."""
    if not L > 0:
        raise ValueError("L must be positive")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    a = math.pi * L
    if f.kind == "triangle":
        integral = triangle_sigma_integral(a)
    else:
        integral, _ = integrate.quad(
            lambda u: float(f.f_hat(u)) ** 2 * math.exp(a * u),
            0.0,
            f.support_radius,
            epsabs=0,
            epsrel=1e-10,
            limit=200,
        )
    return VarianceModel(float(L), 2.0 * kappa / a * integral, float(kappa), f.kind)
