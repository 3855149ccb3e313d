"""Terms of the trace-formula expansion of the smoothed spectral counting function.

    W(tau) = mean_term(tau) + hyperbolic_sum(tau) + residual_term(tau)

with test function h(r) = f(L(r - tau)) + f(L(-r - tau)).  Everything here is
pure; ``hyperbolic_sum`` is the hot loop and is evaluated blockwise over tau.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import expit

from .amplitude import AmplitudeTable, log_norm
from .testfn import TestFunction

__all__ = [
    "AREA",
    "WEYL_C1",
    "EigenvalueList",
    "ExperimentConfig",
    "RegimeError",
    "TableRangeError",
    "digamma",
    "elliptic_term",
    "hyperbolic_sum",
    "hyperbolic_sum_naive",
    "log_norm",
    "mean_density",
    "mean_density_derivative",
    "mean_term",
    "mean_term_derivative",
    "read_eigenvalues",
    "required_nmax",
    "residual_parts",
    "residual_term",
    "residual_term_derivative",
    "spectral_side",
    "trigamma",
    "weyl_count",
]

AREA = math.pi / 3
WEYL_C1 = (2.0 + math.log(math.pi / 2)) / math.pi
BLOCK = 512


class RegimeError(ValueError):
    """pi L >= log T: outside the regime where the variance asymptotic holds."""


class TableRangeError(ValueError):
    """The amplitude table does not reach the support of f_hat."""


@dataclass(frozen=True)
class ExperimentConfig:
    T: float
    L: float
    M: int = 200_000
    seed: int = 0
    f_kind: str = "triangle"
    w_kind: str = "bump"
    mode: str = "montecarlo"
    workers: int = 1

    def __post_init__(self):
        if not (self.T > 1 and self.L > 0):
            raise ValueError("need T > 1 and L > 0")
        if self.mode not in ("montecarlo", "quadrature"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.M < 1 or self.workers < 1:
            raise ValueError("M and workers must be positive")
        ratio = math.pi * self.L / math.log(self.T)
        if ratio >= 1:
            raise RegimeError(f"pi*L = {math.pi * self.L:.4g} >= log T = {math.log(self.T):.4g}")
        if ratio > 0.9:
            warnings.warn(f"pi*L/log T = {ratio:.3f} is above 0.9", RuntimeWarning, stacklevel=2)

    @property
    def n_levels(self) -> float:
        """Expected number of levels in the window near the centre tau ~ T."""
        return self.T / (6.0 * self.L)

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "L": self.L,
            "M": self.M,
            "seed": self.seed,
            "f": self.f_kind,
            "w": self.w_kind,
            "mode": self.mode,
            "workers": self.workers,
        }


# ---------------------------------------------------------------- hyperbolic sum


def required_nmax(L: float) -> int:
    return math.ceil(math.exp(math.pi * L))


def _hyperbolic_coefficients(L: float, f: TestFunction, table: AmplitudeTable):
    need = required_nmax(L * f.support_radius)
    if table.n_max < need:
        raise TableRangeError(f"table n_max={table.n_max} < {need} required at L={L}")
    m = min(need + 1, table.n_max)
    ell = table.log_norm[: m - 2]
    fh = f.f_hat(ell / (2 * math.pi * L))
    keep = fh != 0
    coef = 2.0 / (math.pi * L) * table.amp[: m - 2][keep] * fh[keep]
    return ell[keep], coef


def hyperbolic_sum(tau, L: float, f: TestFunction, table: AmplitudeTable, workers: int = 1):
    """S(tau) = (1/(pi L)) sum amp(n) f_hat(log N(n)/(2 pi L)) 2 cos(tau log N(n)).

    tau may be scalar or an array; arrays are evaluated in fixed blocks so the
    result does not depend on the number of workers.
    """
    ell, coef = _hyperbolic_coefficients(L, f, table)
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.zeros(t.shape)
    if len(ell):
        starts = range(0, len(t), BLOCK)

        def block(s):
            out[s : s + BLOCK] = np.cos(np.multiply.outer(t[s : s + BLOCK], ell)) @ coef

        if workers > 1 and len(t) > BLOCK:
            with ThreadPoolExecutor(workers) as pool:
                list(pool.map(block, starts))
        else:
            for s in starts:
                block(s)
    return float(out[0]) if np.ndim(tau) == 0 else out


def hyperbolic_sum_naive(tau: float, L: float, f: TestFunction, table: AmplitudeTable) -> float:
    """Scalar reference loop over the table."""
    if table.n_max < required_nmax(L * f.support_radius):
        raise TableRangeError("table too short")
    total = 0.0
    for e in table.entries:
        fh = float(f.f_hat(e.log_norm / (2 * math.pi * L)))
        if fh != 0.0:
            total += e.amp * fh * 2.0 * math.cos(tau * e.log_norm)
    return total / (math.pi * L)


# ---------------------------------------------------------------- digamma

# B_{2k} for k = 1..7
_BERN = np.array([1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6])
_SHIFT = 10


def _shift_mask(z):
    return np.abs(z) < _SHIFT


def digamma(z):
    """psi(z) for complex z with Re z > 0: recurrence up to |z| >= 10, then Stirling."""
    z = np.asarray(z, dtype=complex)
    z1 = z.copy()
    acc = np.zeros_like(z)
    small = _shift_mask(z)
    if small.any():
        zs = z[small]
        for k in range(_SHIFT):
            acc[small] -= 1.0 / (zs + k)
        z1[small] = zs + _SHIFT
    inv2 = 1.0 / (z1 * z1)
    series = np.zeros_like(z1)
    for k in range(len(_BERN), 0, -1):
        series = series * inv2 + _BERN[k - 1] / (2 * k)
    out = np.log(z1) - 0.5 / z1 - series * inv2 + acc
    return out[()] if out.ndim == 0 else out


def trigamma(z):
    """psi'(z) for complex z with Re z > 0."""
    z = np.asarray(z, dtype=complex)
    z1 = z.copy()
    acc = np.zeros_like(z)
    small = _shift_mask(z)
    if small.any():
        zs = z[small]
        for k in range(_SHIFT):
            acc[small] += 1.0 / (zs + k) ** 2
        z1[small] = zs + _SHIFT
    inv = 1.0 / z1
    inv2 = inv * inv
    series = np.zeros_like(z1)
    for k in range(len(_BERN), 0, -1):
        series = series * inv2 + _BERN[k - 1]
    out = inv + 0.5 * inv2 + series * inv2 * inv + acc
    return out[()] if out.ndim == 0 else out


def mean_density(r):
    """M(r) = (area/2) r tanh(pi r) - Re psi(1 + i r) - Re psi(1/2 + i r)."""
    r = np.asarray(r, dtype=float)
    out = (
        AREA / 2 * r * np.tanh(np.pi * r)
        - digamma(1 + 1j * r).real
        - digamma(0.5 + 1j * r).real
    )
    return float(out) if out.ndim == 0 else out


def mean_density_derivative(r):
    r = np.asarray(r, dtype=float)
    pr = np.pi * r
    out = (
        AREA / 2 * (np.tanh(pr) + pr / np.cosh(np.minimum(np.abs(pr), 350.0)) ** 2)
        + trigamma(1 + 1j * r).imag
        + trigamma(0.5 + 1j * r).imag
    )
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- smooth integrals

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_CHUNK = 1 << 15


_FINE_RCUT = 30.0


def _cells(tau: float, L: float, lo: float, hi: float) -> np.ndarray:
    """Cell edges: the integer grid, refined to width L/8 where |tau + x/L| < 30.

    The integer grid resolves the oscillation of f (period 1 for the triangle);
    the refinement resolves G near r = 0, where it varies on the scale 1/pi.
    """
    edges = np.arange(math.floor(lo), math.ceil(hi) + 1, dtype=float)
    step = min(1.0, L / 8)
    flo = max(lo, L * (-_FINE_RCUT - tau))
    fhi = min(hi, L * (_FINE_RCUT - tau))
    if step < 1.0 and fhi > flo:
        edges = np.union1d(edges, np.arange(flo, fhi, step))
    edges = edges[(edges > lo) & (edges < hi)]
    return np.concatenate([[lo], edges, [hi]])


def _x_integral(tau, L: float, f: TestFunction, G, lo: float, hi: float) -> np.ndarray:
    """int_lo^hi f(x) G(tau + x/L) dx with 8-point Gauss-Legendre on each cell."""
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.zeros(t.shape)
    if hi <= lo:
        return out
    for i, ti in enumerate(t):
        edges = _cells(ti, L, lo, hi)
        acc = []
        for s in range(0, len(edges) - 1, _CHUNK):
            a = edges[s : s + _CHUNK + 1]
            half = 0.5 * np.diff(a)
            mid = 0.5 * (a[1:] + a[:-1])
            x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
            wts = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
            acc.append(math.fsum(f.f(x) * wts * G(ti + x / L)))
        out[i] = math.fsum(acc)
    return out


def _check_pos(tau, L, allow_zero=False):
    t = np.asarray(tau)
    if not L > 0 or np.any(t < 0) or (not allow_zero and np.any(t == 0)):
        raise ValueError("tau and L must be positive")


def mean_term(tau, L: float, f: TestFunction):
    """(1/2pi) int [f(L(r - tau)) + f(L(-r - tau))] M(r) dr, f cut at |x| <= f.x_cut.

    With x = L(r - tau) and M even this is (1/(pi L)) int f(x) M(tau + x/L) dx.
    tau = 0 is allowed: the two halves coincide.
    """
    _check_pos(tau, L, allow_zero=True)
    out = _x_integral(tau, L, f, mean_density, -f.x_cut, f.x_cut) / (math.pi * L)
    return float(out[0]) if np.ndim(tau) == 0 else out


def mean_term_derivative(tau, L: float, f: TestFunction):
    _check_pos(tau, L)
    out = _x_integral(tau, L, f, mean_density_derivative, -f.x_cut, f.x_cut) / (math.pi * L)
    return float(out[0]) if np.ndim(tau) == 0 else out


# ---------------------------------------------------------------- residual

# (order m, number of conjugacy classes of that order)
ELLIPTIC_CLASSES = ((2, 1), (3, 2))
_ELLIPTIC_RCUT = 30.0


def _elliptic_parts():
    for m, count in ELLIPTIC_CLASSES:
        for k in range(1, m):
            yield count / (m * math.sin(math.pi * k / m)), 2 * math.pi * k / m


def _kernel(r, a):
    # e^{-a r}/(1 + e^{-2 pi r}) without overflow
    r = np.asarray(r, dtype=float)
    pos = r >= 0
    rp = np.where(pos, r, 0.0)
    rn = np.where(pos, 0.0, r)
    return np.where(
        pos,
        np.exp(-a * rp) / (1 + np.exp(-2 * np.pi * rp)),
        np.exp((2 * np.pi - a) * rn) / (1 + np.exp(2 * np.pi * rn)),
    )


def _elliptic_density(r):
    r = np.asarray(r, dtype=float)
    return sum(c * (_kernel(r, a) + _kernel(-r, a)) for c, a in _elliptic_parts())


def _elliptic_density_derivative(r):
    r = np.asarray(r, dtype=float)
    total = np.zeros_like(r)
    for c, a in _elliptic_parts():
        dlog_pos = -a + 2 * np.pi * expit(-2 * np.pi * r)
        dlog_neg = -a + 2 * np.pi * expit(2 * np.pi * r)
        total += c * (_kernel(r, a) * dlog_pos - _kernel(-r, a) * dlog_neg)
    return total


def _elliptic(tau, L, f, G):
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.zeros(t.shape)
    # only |tau + x/L| <= rcut contributes; evaluate tau by tau on that window
    for i, ti in enumerate(t):
        lo = max(-f.x_cut, L * (-_ELLIPTIC_RCUT - ti))
        hi = min(f.x_cut, L * (_ELLIPTIC_RCUT - ti))
        if hi > lo:
            out[i] = _x_integral(ti, L, f, G, lo, hi)[0] / L
    return out


def elliptic_term(tau, L: float, f: TestFunction):
    """Order-2 and order-3 class contributions, sum_k over k = 1..m-1.

    int h(r) e^{-2 pi k r/m}/(1 + e^{-2 pi r}) dr folds to
    (1/L) int f(x) E(tau + x/L) dx with E the even part of the kernel sum.
    """
    _check_pos(tau, L)
    out = _elliptic(tau, L, f, _elliptic_density)
    return float(out[0]) if np.ndim(tau) == 0 else out


@lru_cache(maxsize=32)
def _mangoldt_terms(n_max: int):
    n = np.arange(n_max + 1)
    spf = np.zeros(n_max + 1, dtype=np.int64)
    for p in range(2, n_max + 1):
        if spf[p] == 0:
            spf[p::p][spf[p::p] == 0] = p
    lam = np.zeros(n_max + 1)
    for k in range(2, n_max + 1):
        p = spf[k]
        m = k
        while m % p == 0:
            m //= p
        if m == 1:
            lam[k] = math.log(p)
    idx = np.flatnonzero(lam)
    return n[idx].astype(float), lam[idx]


def _mangoldt_coefficients(L: float, f: TestFunction):
    n, lam = _mangoldt_terms(max(2, math.floor(math.exp(math.pi * L * f.support_radius))))
    logn = np.log(n)
    fh = f.f_hat(logn / (math.pi * L))
    keep = fh != 0
    return 2 * logn[keep], 2.0 / (math.pi * L) * lam[keep] / n[keep] * fh[keep]


def residual_parts(tau, L: float, f: TestFunction) -> dict:
    """The three pieces of the residual term, each vectorized over tau.

    constant:  (1/(pi L)) f_hat(0) log(pi/2)
    mangoldt:  (1/(pi L)) sum_n Lambda(n)/n f_hat(log n/(pi L)) 2 cos(2 tau log n)
    elliptic:  elliptic_term
    """
    _check_pos(tau, L)
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    freq, coef = _mangoldt_coefficients(L, f)
    osc = np.zeros(t.shape)
    for s in range(0, len(t), BLOCK):
        osc[s : s + BLOCK] = np.cos(np.multiply.outer(t[s : s + BLOCK], freq)) @ coef
    return {
        "constant": float(f.f_hat(0.0)) * math.log(math.pi / 2) / (math.pi * L),
        "mangoldt": osc,
        "elliptic": _elliptic(t, L, f, _elliptic_density),
    }


def residual_term(tau, L: float, f: TestFunction):
    """Parabolic remainder plus elliptic terms; see residual_parts."""
    parts = residual_parts(tau, L, f)
    out = parts["constant"] + parts["mangoldt"] + parts["elliptic"]
    return float(out[0]) if np.ndim(tau) == 0 else out


def residual_term_derivative(tau, L: float, f: TestFunction):
    _check_pos(tau, L)
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    freq, coef = _mangoldt_coefficients(L, f)
    out = -(np.sin(np.multiply.outer(t, freq)) @ (coef * freq))
    out += _elliptic(t, L, f, _elliptic_density_derivative)
    return float(out[0]) if np.ndim(tau) == 0 else out


# ---------------------------------------------------------------- Weyl law


def weyl_count(T: float) -> float:
    """(area/4pi) T^2 - (2/pi) T log T + WEYL_C1 T, remainder not modelled."""
    if not T > 1:
        raise ValueError("T must exceed 1")
    return AREA / (4 * math.pi) * T * T - 2 / math.pi * T * math.log(T) + WEYL_C1 * T


# ---------------------------------------------------------------- spectral side


@dataclass(frozen=True)
class EigenvalueList:
    r_values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r_values, dtype=float)
        if r.ndim != 1 or len(r) == 0:
            raise ValueError("eigenvalue list is empty")
        if np.any(r < 0):
            raise ValueError("spectral parameters must be nonnegative")
        if np.any(np.diff(r) <= 0):
            i = int(np.flatnonzero(np.diff(r) <= 0)[0])
            raise ValueError(f"values not strictly ascending at index {i + 1}")
        object.__setattr__(self, "r_values", r)

    @property
    def energies(self) -> np.ndarray:
        return 0.25 + self.r_values**2


def read_eigenvalues(path: str | os.PathLike) -> EigenvalueList:
    """One r value per line; '#' starts a comment; blank lines ignored."""
    values: list[float] = []
    prev = -math.inf
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: cannot parse {text!r}") from None
        if v < 0:
            raise ValueError(f"{path}:{lineno}: negative value {v}")
        if v <= prev:
            raise ValueError(f"{path}:{lineno}: value {v} not above previous {prev}")
        values.append(v)
        prev = v
    if not values:
        raise ValueError(f"{path}: no eigenvalues found")
    return EigenvalueList(np.array(values))


def spectral_side(tau: float, L: float, f: TestFunction, eigs: EigenvalueList) -> float:
    """sum_j f(L(r_j - tau)) + f(L(-r_j - tau)) over the supplied list.

    Only a qualitative comparator: the list is truncated and the continuous
    spectrum is absent, so it matches the geometric side only when the list
    covers the effective window around tau.
    """
    r = eigs.r_values
    return math.fsum(f.f(L * (r - tau))) + math.fsum(f.f(L * (-r - tau)))
