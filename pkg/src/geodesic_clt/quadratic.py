"""Exact arithmetic of real quadratic discriminants.

Pell units, Kronecker characters, Dirichlet L-values at s=1, class numbers
via cycles of reduced indefinite forms, and the triple count nu(X).

Class numbers are *narrow* (proper equivalence of primitive forms) and the
regulator is log of the least norm +1 unit, so that

    h(d) * log(eps_d) == sqrt(d) * L(1, chi_d)

holds for every discriminant, fundamental or not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import digamma
from sympy.ntheory import sqrt_mod

__all__ = [
    "DiscriminantData",
    "NotADiscriminant",
    "PellSolution",
    "PrecisionError",
    "QuadraticForm",
    "class_data",
    "dirichlet_L1",
    "dirichlet_L1_with_bound",
    "factorize",
    "fundamental_part",
    "is_discriminant",
    "kronecker_chi",
    "kronecker_table",
    "nu_count",
    "pell_fundamental",
    "principal_form",
    "reduced_forms",
]

# discriminants up to this bound get L(1, chi_d) from the series in class_data
L1_CROSSCHECK_MAX = 10**5


class NotADiscriminant(ValueError):
    pass


class PrecisionError(ArithmeticError):
    """Requested accuracy is not reachable at the given truncation."""


def is_discriminant(d: int) -> bool:
    d = int(d)
    if d < 1:
        return False
    r = math.isqrt(d)
    return d % 4 in (0, 1) and r * r != d


def _require(d: int) -> int:
    d = int(d)
    if not is_discriminant(d):
        raise NotADiscriminant(f"{d} is not a positive non-square discriminant")
    return d


def factorize(m: int) -> dict[int, int]:
    """Trial-division factorization; fine for m up to ~1e12."""
    m = int(m)
    if m < 1:
        raise ValueError("factorize expects a positive integer")
    out: dict[int, int] = {}
    for p in (2, 3):
        while m % p == 0:
            out[p] = out.get(p, 0) + 1
            m //= p
    p = 5
    while p * p <= m:
        for q in (p, p + 2):
            while m % q == 0:
                out[q] = out.get(q, 0) + 1
                m //= q
        p += 6
    if m > 1:
        out[m] = out.get(m, 0) + 1
    return out


def fundamental_part(d: int) -> tuple[int, int]:
    """Split d = d0 * f**2 with d0 the fundamental discriminant of Q(sqrt d)."""
    d = _require(d)
    kernel = 1
    for p, e in factorize(d).items():
        if e % 2:
            kernel *= p
    d0 = kernel if kernel % 4 == 1 else 4 * kernel
    f = math.isqrt(d // d0)
    assert d0 * f * f == d
    return d0, f


# ---------------------------------------------------------------- forms


@dataclass(frozen=True, order=True)
class QuadraticForm:
    """The form a x^2 + b x y + c y^2."""

    a: int
    b: int
    c: int

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    @property
    def is_primitive(self) -> bool:
        return math.gcd(math.gcd(self.a, self.b), self.c) == 1

    def is_reduced(self) -> bool:
        # 0 < b < sqrt(d) and sqrt(d) - b < 2|a| < sqrt(d) + b, in integers
        d = self.discriminant
        a2, b = 2 * abs(self.a), self.b
        if b <= 0 or b * b >= d:
            return False
        if (a2 + b) ** 2 <= d:
            return False
        return a2 - b <= 0 or (a2 - b) ** 2 < d

    def rho(self) -> tuple["QuadraticForm", int]:
        """One reduction step; returns the neighbour and the shift t of
        the transformation matrix [[0, -1], [1, t]]."""
        a, b, c = self.a, self.b, self.c
        d = self.discriminant
        s = math.isqrt(d)
        m = 2 * abs(c)
        b1 = s - ((s + b) % m)
        a1 = (b1 * b1 - d) // (4 * c)
        return QuadraticForm(c, b1, a1), (b1 + b) // (2 * c)

    def step_log(self) -> float:
        return math.log((self.b + math.sqrt(self.discriminant)) / (2 * abs(self.a)))


def principal_form(d: int) -> QuadraticForm:
    d = _require(d)
    s = math.isqrt(d)
    b = s if (s - d) % 2 == 0 else s - 1
    return QuadraticForm(1, b, (b * b - d) // 4)


def reduced_forms(d: int) -> list[QuadraticForm]:
    """All primitive reduced forms of discriminant d, sorted.

    For each |a| <= sqrt(d) the middle coefficient solves b^2 = d mod 4|a|
    and lies in the window (|sqrt(d) - 2|a||, sqrt(d)), which is shorter
    than 4|a|, so each root class contributes at most one b.
    """
    d = _require(d)
    s = math.isqrt(d)
    out = []
    for A in range(1, s + 1):
        m = 4 * A
        roots = sqrt_mod(d % m, m, all_roots=True) or []
        # b >= lo + 1 is the integer form of b > |sqrt(d) - 2A|
        lo = s - 2 * A if 2 * A <= s else 2 * A - s - 1
        for r in roots:
            b = r + m * max(0, -(-(lo + 1 - r) // m))
            if b <= 0 or b * b >= d:
                continue
            q = (b * b - d) // m
            for a in (A, -A):
                f = QuadraticForm(a, b, q if a > 0 else -q)
                if f.is_reduced() and f.is_primitive:
                    out.append(f)
    return sorted(set(out))


def _cycle(start: QuadraticForm) -> list[tuple[QuadraticForm, int]]:
    cyc = []
    f = start
    while True:
        g, t = f.rho()
        cyc.append((f, t))
        f = g
        if f == start:
            return cyc


def _log_unit(t: int, u: int, d: int) -> float | None:
    """log((t + u sqrt d)/2) when t is within float range."""
    if t.bit_length() > 1000:
        return None
    tf = float(t)
    return math.log(tf) + math.log1p(math.sqrt(max(0.0, 1.0 - 4.0 / (tf * tf)))) - math.log(2.0)


# ---------------------------------------------------------------- Pell


@dataclass(frozen=True)
class PellSolution:
    d: int
    t: int
    u: int
    log_eps: float

    def check(self) -> bool:
        return self.t * self.t - self.d * self.u * self.u == 4


@lru_cache(maxsize=4096)
def pell_fundamental(d: int) -> PellSolution:
    """Fundamental solution of t^2 - d u^2 = 4 from the principal cycle.

    The unit is never formed as a float: log(eps) is the fsum of the step
    logarithms along the cycle, and (t, u) come from the exact integer
    product of the step matrices (an automorph of the principal form).
    """
    d = _require(d)
    cyc = _cycle(principal_form(d))
    p, q, r, s = 1, 0, 0, 1
    for _, t in cyc:
        # right-multiply by [[0, -1], [1, t]]
        p, q, r, s = q, -p + t * q, s, -r + t * s
    t_, u_ = abs(p + s), abs(r)
    log_eps = math.fsum(f.step_log() for f, _ in cyc)
    return PellSolution(d, t_, u_, log_eps)


# ---------------------------------------------------------------- characters


def _jacobi(a: int, n: int) -> int:
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def kronecker_chi(d: int, n: int) -> int:
    """Kronecker symbol (d/n) for a discriminant d and n >= 1."""
    d, n = int(d), int(n)
    if n < 1:
        raise ValueError("n must be positive")
    if math.gcd(d, n) != 1:
        return 0
    v = (n & -n).bit_length() - 1
    n >>= v
    sign = 1
    if v and d % 8 == 5:  # d is odd here, so d = 1 or 5 mod 8
        sign = -1 if v % 2 else 1
    return sign * _jacobi(d, n)


def kronecker_table(d: int, n: np.ndarray) -> np.ndarray:
    """Vectorised kronecker_chi(d, n) over an integer array n >= 1."""
    d = int(d)
    n = np.asarray(n, dtype=np.int64)
    if np.any(n < 1):
        raise ValueError("n must be positive")
    out = np.ones(n.shape, dtype=np.int64)
    # power of two
    v = np.zeros(n.shape, dtype=np.int64)
    odd = n.copy()
    while True:
        ev = odd % 2 == 0
        if not ev.any():
            break
        odd[ev] //= 2
        v[ev] += 1
    if d % 2 == 0:
        out[v > 0] = 0
    elif d % 8 == 5:
        out[v % 2 == 1] *= -1
    # Jacobi (d / odd) by the binary algorithm, elementwise
    a = np.mod(d, odd)
    m = odd.copy()
    sgn = np.ones(n.shape, dtype=np.int64)
    live = a != 0
    while live.any():
        while True:
            ev = live & (a % 2 == 0)
            if not ev.any():
                break
            a[ev] //= 2
            flip = ev & ((m % 8 == 3) | (m % 8 == 5))
            sgn[flip] *= -1
        flip = live & (a % 4 == 3) & (m % 4 == 3)
        sgn[flip] *= -1
        a_l, m_l = a[live], m[live]
        a[live], m[live] = m_l % a_l, a_l
        live = a != 0
    sgn[m != 1] = 0
    return out * sgn


def _default_truncation(d: int) -> int:
    return math.ceil(math.sqrt(d) * (math.log(d) + 10) * 1000)


def dirichlet_L1_with_bound(d: int, truncation: int | None = None) -> tuple[float, float]:
    """Partial sum of sum_{n<=N} chi_d(n)/n and a rigorous tail bound.

    N is the truncation rounded up to a multiple of the period d.  The
    partial sum is then evaluated exactly in O(d) through
        sum_{k<K} 1/(kd + a) = (psi(a/d + K) - psi(a/d)) / d,
    and by Abel summation the tail is at most max|sum_{n<=x} chi(n)| / (N+1).
    """
    d = _require(d)
    N = _default_truncation(d) if truncation is None else int(truncation)
    if N < 1:
        raise ValueError("truncation must be positive")
    K = -(-N // d)
    N = K * d
    a = np.arange(1, d + 1)
    chi = kronecker_table(d, a).astype(float)
    x = a / d
    value = float(np.dot(chi, digamma(x + K) - digamma(x)) / d)
    bound = float(np.max(np.abs(np.cumsum(chi)))) / (N + 1)
    return value, bound


def dirichlet_L1(d: int, truncation: int | None = None, rtol: float | None = None) -> float:
    """L(1, chi_d) from the truncated Dirichlet series.

    Cross-check path only.  With ``rtol`` set, raises PrecisionError when the
    tail bound at this truncation exceeds rtol * value.
    """
    value, bound = dirichlet_L1_with_bound(d, truncation)
    if rtol is not None and bound > rtol * abs(value):
        raise PrecisionError(
            f"d={d}: tail bound {bound:.3g} exceeds rtol*L1 = {rtol * abs(value):.3g}; "
            f"raise the truncation"
        )
    return value


# ---------------------------------------------------------------- class data


@dataclass(frozen=True)
class DiscriminantData:
    d: int
    pell: PellSolution
    h: int
    L1: float
    cycle_lengths: tuple[int, ...] = ()

    @property
    def log_eps(self) -> float:
        return self.pell.log_eps

    @property
    def class_formula_residual(self) -> float:
        """|h log eps - sqrt(d) L1| / (sqrt(d) L1)."""
        rhs = math.sqrt(self.d) * self.L1
        return abs(self.h * self.log_eps - rhs) / rhs


@lru_cache(maxsize=65536)
def class_data(d: int, l1_crosscheck_max: int = L1_CROSSCHECK_MAX) -> DiscriminantData:
    d = _require(d)
    remaining = set(reduced_forms(d))
    pell = pell_fundamental(d)
    lengths = []
    while remaining:
        start = min(remaining)
        cyc = _cycle(start)
        lengths.append(len(cyc))
        remaining.difference_update(f for f, _ in cyc)
        reg = math.fsum(f.step_log() for f, _ in cyc)
        if abs(reg - pell.log_eps) > 1e-9 * pell.log_eps:
            raise ArithmeticError(f"d={d}: cycle of {start} has regulator {reg}, expected {pell.log_eps}")
    h = len(lengths)
    if d <= l1_crosscheck_max:
        L1 = dirichlet_L1(d)
    else:
        L1 = h * pell.log_eps / math.sqrt(d)
    return DiscriminantData(d, pell, h, L1, tuple(lengths))


# ---------------------------------------------------------------- nu(X)


def _spf_sieve(n: int) -> np.ndarray:
    spf = np.zeros(n + 1, dtype=np.int64)
    for p in range(2, math.isqrt(n) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    rest = spf == 0
    spf[rest] = np.arange(n + 1)[rest]
    return spf


def nu_count(X: float) -> int:
    """Number of triples (d, x, y), d = 0,1 mod 4, x^2 - d y^2 = 4, 2 < x < X."""
    if X <= 0:
        raise ValueError("X must be positive")
    x_hi = math.ceil(X)  # x < X  <=>  x <= x_hi - 1
    if x_hi <= 3:
        return 0
    spf = _spf_sieve(x_hi + 2).tolist()
    total = 0
    for x in range(3, x_hi):
        exps: dict[int, int] = {}
        for m in (x - 2, x + 2):
            while m > 1:
                p = spf[m]
                exps[p] = exps.get(p, 0) + 1
                m //= p
        D = x * x - 4
        ys = [1]
        for p, e in exps.items():
            ys = [y * p**k for y in ys for k in range(e // 2 + 1)]
        total += sum(1 for y in ys if (D // (y * y)) % 4 in (0, 1))
    return total
