"""Multiplicative relations among the norms N(n) and gap bounds between them.

Every N(n) is the square of the unit (n + sqrt(n^2 - 4))/2 of the real quadratic
field Q(sqrt(n^2 - 4)), hence an exact power eps_d^(2k) of the fundamental unit
for the field discriminant d.  Candidate relations are found with a floating
meet-in-the-middle search and then accepted or rejected on the integer pairs (d, k).
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from .amplitude import log_norm
from .quadratic import fundamental_part, pell_fundamental

__all__ = [
    "LiouvilleReport",
    "NormRelation",
    "RelationSearch",
    "find_relations",
    "liouville_gap_check",
    "relation_search",
    "unit_power",
]

PREFILTER_TOL = 1e-6
Term = tuple[int, int]  # (n, sign)


@lru_cache(maxsize=None)
def unit_power(n: int) -> tuple[int, int]:
    """(d, k) with d the field discriminant and N(n) = eps_d^(2k), checked exactly."""
    d, f = fundamental_part(n * n - 4)
    sol = pell_fundamental(d)
    t, u, k = sol.t, sol.u, 1
    while t < n:
        # ((t + u sqrt d)/2) * ((t1 + u1 sqrt d)/2)
        t, u = (t * sol.t + d * u * sol.u) // 2, (t * sol.u + u * sol.t) // 2
        k += 1
    if (t, u) != (n, f):
        raise ArithmeticError(f"trace {n} is not a power of the fundamental unit of {d}")
    return d, k


@dataclass(frozen=True)
class NormRelation:
    terms: tuple[Term, ...]
    blocks: tuple[tuple[int, tuple[int, ...]], ...]  # (d, indices into terms)
    non_degenerate: bool

    @property
    def log_sum(self) -> float:
        return math.fsum(s * log_norm(n) for n, s in self.terms)

    def exact_block_sums(self) -> dict[int, int]:
        return {d: sum(self.terms[i][1] * unit_power(self.terms[i][0])[1] for i in idx) for d, idx in self.blocks}

    def __str__(self) -> str:
        lhs = [str(n) for n, s in self.terms if s > 0]
        rhs = [str(n) for n, s in self.terms if s < 0]
        return " * ".join(f"N({n})" for n in lhs) + " = " + " * ".join(f"N({n})" for n in rhs)


def canonical(terms) -> tuple[Term, ...]:
    """Sorted terms, signs flipped so that the largest n carries sign -1."""
    terms = tuple(sorted(terms))
    if terms[-1][1] > 0:
        terms = tuple(sorted((n, -s) for n, s in terms))
    # the largest n may occur with both signs only in excluded relations
    return terms


def _field_blocks(terms) -> tuple[tuple[int, tuple[int, ...]], ...]:
    groups: dict[int, list[int]] = defaultdict(list)
    for i, (n, _) in enumerate(terms):
        groups[unit_power(n)[0]].append(i)
    return tuple((d, tuple(idx)) for d, idx in sorted(groups.items()))


def _exactly_vanishes(terms) -> bool:
    sums: dict[int, int] = defaultdict(int)
    for n, s in terms:
        d, k = unit_power(n)
        sums[d] += s * k
    return all(v == 0 for v in sums.values())


def _non_degenerate(terms) -> bool:
    m = len(terms)
    for r in range(1, m):
        for sub in itertools.combinations(range(m), r):
            if _exactly_vanishes([terms[i] for i in sub]):
                return False
    return True


@dataclass(frozen=True)
class RelationSearch:
    n_max: int
    k_max: int
    relations: tuple[NormRelation, ...]
    near_misses: tuple[tuple[tuple[Term, ...], float], ...]  # float-close but not exact


def _half_combos(ns: np.ndarray, ells: np.ndarray):
    """All signed multisets of one or two terms without an n in both signs."""
    items: list[tuple[Term, ...]] = []
    sums: list[float] = []
    for i, n in enumerate(ns):
        for s in (1, -1):
            items.append(((int(n), s),))
            sums.append(s * ells[i])
    for i in range(len(ns)):
        for j in range(i, len(ns)):
            for s1, s2 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                if i == j and s1 != s2:
                    continue
                items.append(tuple(sorted(((int(ns[i]), s1), (int(ns[j]), s2)))))
                sums.append(s1 * ells[i] + s2 * ells[j])
    uniq = dict(zip(items, sums))
    keys = list(uniq)
    return keys, np.array([uniq[k] for k in keys])


def relation_search(n_max: int, k_max: int) -> RelationSearch:
    if not 3 <= n_max <= 500:
        raise ValueError("n_max must lie in [3, 500]")
    if not 2 <= k_max <= 4:
        raise ValueError("k_max must lie in [2, 4]")
    ns = np.arange(3, n_max + 1)
    ells = log_norm(ns) if n_max > 3 else np.array([log_norm(3)])
    keys, sums = _half_combos(ns, np.atleast_1d(ells))
    order = np.argsort(sums, kind="stable")
    sorted_sums = sums[order]
    lo = np.searchsorted(sorted_sums, -sums - PREFILTER_TOL, side="left")
    hi = np.searchsorted(sorted_sums, -sums + PREFILTER_TOL, side="right")
    candidates: set[tuple[Term, ...]] = set()
    for a in np.flatnonzero(hi > lo):
        for b in order[lo[a] : hi[a]]:
            terms = keys[a] + keys[b]
            if len(terms) > k_max:
                continue
            signs = defaultdict(set)
            for n, s in terms:
                signs[n].add(s)
            if any(len(v) > 1 for v in signs.values()):
                continue
            candidates.add(canonical(terms))
    relations, misses = [], []
    for terms in sorted(candidates):
        if _exactly_vanishes(terms):
            relations.append(NormRelation(terms, _field_blocks(terms), _non_degenerate(terms)))
        else:
            with mpmath.workdps(60):
                val = mpmath.fsum(s * 2 * mpmath.acosh(mpmath.mpf(n) / 2) for n, s in terms)
            if val == 0:
                raise ArithmeticError(f"high-precision zero not explained by units: {terms}")
            misses.append((terms, float(val)))
    return RelationSearch(n_max, k_max, tuple(relations), tuple(misses))


def find_relations(n_max: int, k_max: int) -> list[NormRelation]:
    """All signed multisets of at most k_max norms with product 1.

    Relations using one n with both signs are excluded; they cancel trivially.
    """
    return list(relation_search(n_max, k_max).relations)


# ---------------------------------------------------------------- Liouville-type gaps


@dataclass(frozen=True)
class LiouvilleReport:
    n_max: int
    min_gap_product: float  # min over m < n of |log N(m) - log N(n)| * m
    argmin_pair: tuple[int, int]
    part_i_ok: bool
    # part (ii): min over nonzero signed sums of K <= 3 terms of
    # log|sum| + (2^(K-1) - 1/2) * sum log N(n_j); nonnegative means the bound holds
    min_log_margin: float
    argmin_terms: tuple[Term, ...]
    part_ii_ok: bool
    sums_checked: int


def _part_ii(ns: np.ndarray, ells: np.ndarray):
    best = (math.inf, ())
    count = 0
    idx = np.arange(len(ns))

    def consider(vals, expo_sum, K, labels, valid=None):
        nonlocal best, count
        if valid is None:
            valid = np.ones(len(vals), dtype=bool)
        small = np.abs(vals) <= 1e-9
        for lab in np.flatnonzero(small & valid):
            terms = labels(lab)
            if not _exactly_vanishes(terms):
                raise ArithmeticError(f"unresolved near-zero sum {terms}")
        nz = valid & ~small
        count += int(nz.sum())
        margin = np.where(nz, np.log(np.where(nz, np.abs(vals), 1.0)) + (2 ** (K - 1) - 0.5) * expo_sum, np.inf)
        j = int(np.argmin(margin))
        if margin[j] < best[0]:
            best = (float(margin[j]), labels(j))

    # K = 1
    consider(ells, ells, 1, lambda j: ((int(ns[j]), 1),))
    # K = 2, i <= j
    I, J = np.triu_indices(len(ns))
    for s in (1, -1):
        vals = ells[I] + s * ells[J]
        keep = (I != J) | (s == 1)
        consider(
            vals,
            ells[I] + ells[J],
            2,
            lambda j, s=s: ((int(ns[I[j]]), 1), (int(ns[J[j]]), s)),
            keep,
        )
    # K = 3, i <= j <= k, first sign fixed to + (a global flip changes nothing)
    for i in idx:
        J3, K3 = np.triu_indices(len(ns) - i)
        J3, K3 = J3 + i, K3 + i
        for s2, s3 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            ok = np.ones(len(J3), dtype=bool)
            if s2 < 0:
                ok &= J3 != i
            if s3 < 0:
                ok &= K3 != i
            if s2 != s3:
                ok &= J3 != K3
            vals = ells[i] + s2 * ells[J3] + s3 * ells[K3]
            consider(
                vals,
                ells[i] + ells[J3] + ells[K3],
                3,
                lambda j, i=i, J3=J3, K3=K3, s2=s2, s3=s3: (
                    (int(ns[i]), 1),
                    (int(ns[J3[j]]), s2),
                    (int(ns[K3[j]]), s3),
                ),
                ok,
            )
    return best, count


def liouville_gap_check(n_max: int) -> LiouvilleReport:
    """Check the separation bounds between log-norms for traces up to n_max.

    (i)  |log N(m) - log N(n)| * min(m, n) >= 1 for all 2 < m < n <= n_max.
    (ii) |sum_j +-log N(n_j)| >= (prod_j N(n_j))^-(2^(K-1) - 1/2) for every
         nonzero signed sum of K <= 3 terms.
    """
    if n_max < 4:
        raise ValueError("n_max must be at least 4")
    ns = np.arange(3, n_max + 1)
    ells = log_norm(ns)
    # the minimum over n > m of the gap is at n = m + 1, but scan all pairs anyway
    I, J = np.triu_indices(len(ns), k=1)
    prod = (ells[J] - ells[I]) * ns[I]
    j = int(np.argmin(prod))
    (margin, terms), count = _part_ii(ns, ells)
    return LiouvilleReport(
        n_max=n_max,
        min_gap_product=float(prod[j]),
        argmin_pair=(int(ns[I[j]]), int(ns[J[j]])),
        part_i_ok=bool(prod[j] >= 1.0),
        min_log_margin=margin,
        argmin_terms=terms,
        part_ii_ok=margin >= 0,
        sums_checked=count,
    )
