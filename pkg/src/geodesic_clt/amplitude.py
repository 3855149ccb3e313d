"""The amplitude Lambda(n) of hyperbolic classes with trace n, and Peter's constant.

    amp(n) = sum_{d u^2 = n^2 - 4} h(d) log(eps_d) / (u sqrt(d))

Two exact routes are provided.  ``amp`` works one trace at a time through
``decompose`` and ``class_data``.  ``build_table`` sums the regulators of
all conjugacy classes of trace n <= n_max in one pass: every hyperbolic
class of SL(2, Z) with positive trace is a cyclic word in
R = [[1, 1], [0, 1]] and L = [[1, 0], [1, 1]], and the rotations that begin
with an L-block L^k and end with R carry weights log(1 + k y), y the
attracting fixed point of the rotated word, which add up to log(eps) of the
primitive class.
"""
from __future__ import annotations

import hashlib
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .quadratic import class_data, dirichlet_L1, factorize

__all__ = [
    "AmplitudeEntry",
    "AmplitudeTable",
    "CacheError",
    "Decomposition",
    "amp",
    "amp_lseries",
    "build_table",
    "cache_path",
    "decompose",
    "kappa_tail_bound",
    "log_norm",
    "partial_stats",
    "peter_euler_factor",
    "peter_kappa",
]

TABLE_VERSION = "v1"
DEFAULT_KAPPA_PMAX = 10**6


class CacheError(RuntimeError):
    """A cache file exists but is corrupt (checksum or shape mismatch)."""


def log_norm(n):
    """log N(n) = 2 log((n + sqrt(n^2 - 4))/2) = 2 arccosh(n/2)."""
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr <= 2):
        raise ValueError("log_norm needs trace n > 2")
    out = 2.0 * np.arccosh(n_arr / 2.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- per-n path


@dataclass(frozen=True)
class Decomposition:
    n: int
    parts: tuple[tuple[int, int], ...]  # (d, u) with d u^2 = n^2 - 4


def decompose(n: int) -> Decomposition:
    n = int(n)
    if n <= 2:
        raise ValueError(f"trace must exceed 2, got {n}")
    exps = factorize(n - 2)
    for p, e in factorize(n + 2).items():
        exps[p] = exps.get(p, 0) + e
    D = n * n - 4
    us = [1]
    for p, e in exps.items():
        us = [u * p**k for u in us for k in range(e // 2 + 1)]
    parts = tuple((D // (u * u), u) for u in sorted(us) if (D // (u * u)) % 4 in (0, 1))
    return Decomposition(n, parts)


def amp(n: int) -> float:
    """Exact amplitude from class numbers and regulators."""
    dec = decompose(n)
    return math.fsum(
        class_data(d).h * class_data(d).log_eps / (u * math.sqrt(d)) for d, u in dec.parts
    )


def amp_lseries(n: int, truncation: int | None = None) -> float:
    """Independent oracle: sum of L(1, chi_d)/u from the truncated series."""
    return math.fsum(dirichlet_L1(d, truncation) / u for d, u in decompose(n).parts)


# ---------------------------------------------------------------- table kernel


@numba.njit(cache=True)
def _regulator_sums(n_max, cap):  # pragma: no cover - compiled
    """acc[n] = sum over classes of trace n of log(eps) of the primitive class.

    Returns (acc, ok); ok is False when the DFS stack of size cap overflowed.
    """
    acc = np.zeros(n_max + 1)
    sa = np.empty(cap, np.int64)
    sb = np.empty(cap, np.int64)
    sc = np.empty(cap, np.int64)
    sd = np.empty(cap, np.int64)
    sk = np.empty(cap, np.int64)
    for k in range(1, n_max):
        j = 1
        while k * j + 2 <= n_max:
            # root L^k R^j
            sa[0] = 1
            sb[0] = j
            sc[0] = k
            sd[0] = k * j + 1
            sk[0] = k
            top = 1
            while top > 0:
                top -= 1
                a = sa[top]
                b = sb[top]
                c = sc[top]
                d = sd[top]
                kk = sk[top]
                n = a + d
                # rotate the leading L^kk to the back: L^-kk g L^kk
                a2 = a + kk * b
                c2 = c - kk * a + kk * (d - kk * b)
                d2 = d - kk * b
                s = math.sqrt(float(n) * n - 4.0)
                diff = float(a2 - d2)
                if diff >= 0.0:
                    y = (diff + s) / (2.0 * c2)
                else:
                    y = 2.0 * b / (s - diff)
                acc[n] += math.log1p(kk * y)
                # children g L^i R^jj
                i = 1
                while True:
                    A = a + i * b
                    C = c + i * d
                    if A + d + C > n_max:
                        break
                    jj = 1
                    while A + d + jj * C <= n_max:
                        if top >= cap:
                            return acc, False
                        sa[top] = A
                        sb[top] = b + jj * A
                        sc[top] = C
                        sd[top] = d + jj * C
                        sk[top] = kk
                        top += 1
                        jj += 1
                    i += 1
            j += 1
    return acc, True


def _class_sums(n_max: int) -> np.ndarray:
    cap = 32 * n_max + 1024
    while True:
        acc, ok = _regulator_sums(n_max, cap)
        if ok:
            return acc
        cap *= 4


# ---------------------------------------------------------------- table


@dataclass(frozen=True)
class AmplitudeEntry:
    n: int
    amp: float
    log_norm: float


@dataclass(frozen=True)
class AmplitudeTable:
    n_max: int
    n: np.ndarray
    amp: np.ndarray
    log_norm: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.n)

    @property
    def entries(self) -> list[AmplitudeEntry]:
        return [AmplitudeEntry(int(n), float(a), float(l)) for n, a, l in zip(self.n, self.amp, self.log_norm)]

    def to_bytes(self) -> bytes:
        buf = io.StringIO()
        buf.write(
            f"# amp-table {TABLE_VERSION} n_max={self.n_max} "
            f"kappa_pmax={self.meta.get('kappa_pmax', DEFAULT_KAPPA_PMAX)}\n"
        )
        buf.write("n,amp,log_norm\n")
        for n, a, l in zip(self.n.tolist(), self.amp.tolist(), self.log_norm.tolist()):
            buf.write(f"{n},{a:.17g},{l:.17g}\n")
        body = buf.getvalue().encode()
        return body + f"# sha256={hashlib.sha256(body).hexdigest()}\n".encode()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "AmplitudeTable":
        """Parse a cache file.  Raises CacheError on any corruption."""
        body, sep, tail = raw.rstrip(b"\n").rpartition(b"\n")
        body += sep
        if not tail.startswith(b"# sha256="):
            raise CacheError("missing checksum line")
        if hashlib.sha256(body).hexdigest() != tail[len(b"# sha256=") :].decode().strip():
            raise CacheError("checksum mismatch")
        lines = body.decode().splitlines()
        if len(lines) < 2 or not lines[0].startswith(f"# amp-table {TABLE_VERSION} "):
            raise CacheError("bad header line")
        meta = dict(tok.split("=", 1) for tok in lines[0].split()[3:])
        header_nmax = int(meta["n_max"])
        if lines[1] != "n,amp,log_norm":
            raise CacheError("bad column header")
        try:
            rows = np.array([ln.split(",") for ln in lines[2:]], dtype=float)
        except ValueError as exc:
            raise CacheError(f"unparseable row: {exc}") from None
        if rows.shape != (header_nmax - 2, 3) or not np.array_equal(
            rows[:, 0], np.arange(3, header_nmax + 1)
        ):
            raise CacheError(f"table shape does not match n_max={header_nmax}")
        return cls(
            header_nmax,
            rows[:, 0].astype(np.int64),
            rows[:, 1].copy(),
            rows[:, 2].copy(),
            {"kappa_pmax": int(meta.get("kappa_pmax", DEFAULT_KAPPA_PMAX)), "version": TABLE_VERSION},
        )


def cache_path(cache_dir: str | os.PathLike, n_max: int) -> Path:
    return Path(cache_dir) / f"amp_table_{TABLE_VERSION}_{int(n_max)}.csv"


def _compute_table(n_max: int, kappa_pmax: int) -> AmplitudeTable:
    acc = _class_sums(n_max)
    n = np.arange(3, n_max + 1, dtype=np.int64)
    amps = acc[3:] / np.sqrt(n.astype(float) ** 2 - 4.0)
    meta = {"kappa_pmax": kappa_pmax, "version": TABLE_VERSION, "package": __version__}
    return AmplitudeTable(n_max, n, amps, log_norm(n), meta)


def build_table(
    n_max: int,
    cache_dir: str | os.PathLike | None = None,
    kappa_pmax: int = DEFAULT_KAPPA_PMAX,
) -> AmplitudeTable:
    """Dense table of (n, amp(n), log N(n)) for 2 < n <= n_max.

    With a cache directory, a file keyed by n_max is loaded when present;
    a file whose header names another n_max is a miss and gets rebuilt,
    a file failing its checksum or shape raises CacheError.
    """
    n_max = int(n_max)
    if n_max < 3:
        raise ValueError("n_max must be at least 3")
    path = cache_path(cache_dir, n_max) if cache_dir is not None else None
    if path is not None and path.exists():
        table = AmplitudeTable.from_bytes(path.read_bytes())
        if table.n_max == n_max:
            return table
    table = _compute_table(n_max, kappa_pmax)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(table.to_bytes())
        os.replace(tmp, path)
    return table


def partial_stats(table: AmplitudeTable, N: int) -> tuple[float, float]:
    """(sum amp(n), sum amp(n)^2) over 2 < n <= N."""
    N = int(N)
    if not 3 <= N <= table.n_max:
        raise ValueError(f"N={N} outside [3, {table.n_max}]")
    a = table.amp[: N - 2]
    return math.fsum(a), math.fsum(a * a)


# ---------------------------------------------------------------- Peter's constant


def peter_euler_factor(p: int) -> float:
    return 1.0 + (p**4 - 2 * p**3 + 1) / (p * p - 1) ** 3


def _odd_primes(p_max: int) -> np.ndarray:
    sieve = np.ones(p_max + 1, dtype=bool)
    sieve[:3] = False
    sieve[4::2] = False
    for p in range(3, math.isqrt(p_max) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return np.flatnonzero(sieve)


def peter_kappa(p_max: int) -> float:
    """1015/864 times the Euler product over odd primes p <= p_max."""
    p_max = int(p_max)
    if p_max < 3:
        raise ValueError("p_max must be at least 3")
    p = _odd_primes(p_max).astype(float)
    logs = np.log1p((p**4 - 2 * p**3 + 1) / (p * p - 1) ** 3)
    return 1015 / 864 * math.exp(math.fsum(logs))


def kappa_tail_bound(p_max: int) -> float:
    """Upper bound on kappa(inf)/kappa(p_max) - 1.

    Each omitted log-factor is below p^4/(p^2-1)^3 <= (1 + 1/(P^2-1))^2/(p^2-1),
    and summing 1/(m^2-1) over all m > P gives (1/P + 1/(P+1))/2.
    """
    P = int(p_max)
    s = (1 + 1 / (P * P - 1)) ** 2 * 0.5 * (1 / P + 1 / (P + 1))
    return math.expm1(s)
