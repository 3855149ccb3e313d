"""Experiment harness: tau sampling, weighted averages, moments of S/sigma_L."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from . import __version__
from .amplitude import AmplitudeTable, DEFAULT_KAPPA_PMAX, peter_kappa
from .testfn import WeightFunction, make_test_function, make_weight, sigma_model
from .trace import ExperimentConfig, _hyperbolic_coefficients, hyperbolic_sum, residual_term

__all__ = [
    "FormFactorModel",
    "MomentReport",
    "SampleSet",
    "UndersamplingError",
    "default_kappa",
    "diagonal_variance",
    "form_factor_reference",
    "ks_distance",
    "moment_report",
    "quadrature_step",
    "residual_rms",
    "sample_taus",
    "weighted_average",
]

N_BATCHES = 20
HIST_EDGES = np.linspace(-5.0, 5.0, 82)
GAUSSIAN_MOMENTS = {3: 0.0, 4: 3.0, 5: 0.0, 6: 15.0}


class UndersamplingError(ValueError):
    """The quadrature step is too coarse for the highest frequency present."""


@lru_cache(maxsize=4)
def default_kappa(p_max: int = DEFAULT_KAPPA_PMAX) -> float:
    return peter_kappa(p_max)


@dataclass(frozen=True)
class SampleSet:
    taus: np.ndarray
    weights: np.ndarray
    seed: int
    mode: str
    T: float

    def __len__(self) -> int:
        return len(self.taus)


def quadrature_step(L: float, support_radius: float = 1.0) -> float:
    """Largest step with step * max log N(n) <= pi/4; log N(n) <= 2 pi L on the support."""
    return (math.pi / 4) / (2 * math.pi * L * support_radius)


def sample_taus(cfg: ExperimentConfig, w: WeightFunction | None = None) -> SampleSet:
    w = w or make_weight(cfg.w_kind)
    T = cfg.T
    if cfg.mode == "montecarlo":
        if cfg.M < 1000:
            raise ValueError("montecarlo mode needs M >= 1000")
        rng = np.random.default_rng(cfg.seed)
        taus = T * w.inverse_cdf(rng.random(cfg.M))
        weights = np.full(cfg.M, 1.0 / cfg.M)
    else:
        step = T / cfg.M
        need = quadrature_step(cfg.L)
        if step > need:
            raise UndersamplingError(
                f"quadrature step {step:.4g} exceeds {need:.4g}; use M >= {math.ceil(T / need)}"
            )
        taus = T + (np.arange(cfg.M) + 0.5) * step
        weights = w.w(taus / T) * step / T
        weights = weights / math.fsum(weights)
    return SampleSet(taus, weights, cfg.seed, cfg.mode, T)


def weighted_average(values, s: SampleSet) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape != s.weights.shape:
        raise ValueError(f"{values.shape[0] if values.ndim else 0} values for {len(s)} samples")
    return float(np.dot(s.weights, values))


def ks_distance(standardized, weights=None) -> float:
    """sup |F_emp - Phi| over the sample points (both one-sided limits)."""
    x = np.asarray(standardized, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    order = np.argsort(x, kind="stable")
    x = x[order]
    wts = np.full(len(x), 1.0 / len(x)) if weights is None else np.asarray(weights, float)[order] / np.sum(weights)
    upper = np.cumsum(wts)
    lower = upper - wts
    phi = ndtr(x)
    return float(max(np.max(np.abs(upper - phi)), np.max(np.abs(phi - lower))))


def diagonal_variance(L: float, f, table: AmplitudeTable) -> float:
    """Large-T variance of S with distinct frequencies: 2/(pi L)^2 sum amp^2 f_hat^2."""
    _, coef = _hyperbolic_coefficients(L, f, table)
    # coef = 2 amp f_hat / (pi L); each cosine has mean square 1/2
    return 0.5 * math.fsum(coef * coef)


@dataclass(frozen=True)
class MomentReport:
    config: dict
    sigma_sq: float
    kappa: float
    mean: float
    var_ratio: float
    moments: dict  # raw moments E[(S/sigma_L)^k], k = 3..6
    stderr: dict  # batch standard errors of mean, var_ratio, m3..m6
    ks: float
    hist_counts: np.ndarray
    overflow: tuple[int, int]  # below -5, above 5
    empirical_moments: dict  # moments of (S - mean)/sd, k = 3..6
    diag_ratio: float  # diagonal variance / sigma_L^2
    n_levels: float
    n_samples: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "sigma_model": {"sigma_sq": self.sigma_sq, "kappa": self.kappa},
            "mean": self.mean,
            "var_ratio": self.var_ratio,
            "moments": {f"m{k}": v for k, v in self.moments.items()},
            "stderr": self.stderr,
            "ks": self.ks,
            "histogram": {
                "edges": HIST_EDGES.tolist(),
                "counts": self.hist_counts.tolist(),
                "overflow": list(self.overflow),
            },
            "empirical_moments": {f"m{k}": v for k, v in self.empirical_moments.items()},
            "diag_ratio": self.diag_ratio,
            "n_levels": self.n_levels,
            "n_samples": self.n_samples,
            "version": __version__,
            **self.extras,
        }

    def histogram_rows(self):
        for left, right, c in zip(HIST_EDGES[:-1], HIST_EDGES[1:], self.hist_counts):
            yield float(left), float(right), int(c)


def _moment_estimates(z: np.ndarray, w: np.ndarray) -> dict:
    w = w / w.sum()
    mean = float(np.dot(w, z))
    m2 = float(np.dot(w, z * z))
    out = {"mean": mean, "var_ratio": m2 - mean * mean}
    zk = z * z
    for k in range(3, 7):
        zk = zk * z
        out[f"m{k}"] = float(np.dot(w, zk))
    return out


def moment_report(
    cfg: ExperimentConfig,
    table: AmplitudeTable,
    kappa: float | None = None,
    samples: SampleSet | None = None,
) -> MomentReport:
    """Moments of S/sigma_L over tau drawn from the averaging weight."""
    f = make_test_function(cfg.f_kind)
    kappa = default_kappa() if kappa is None else kappa
    model = sigma_model(cfg.L, f, kappa)
    samples = samples or sample_taus(cfg)
    S = hyperbolic_sum(samples.taus, cfg.L, f, table, workers=cfg.workers)
    z = S / model.sigma
    w = samples.weights
    est = _moment_estimates(z, w)
    batches = [_moment_estimates(zb, wb) for zb, wb in zip(np.array_split(z, N_BATCHES), np.array_split(w, N_BATCHES))]
    stderr = {
        key: float(np.std([b[key] for b in batches], ddof=1) / math.sqrt(N_BATCHES)) for key in est
    }
    sd = math.sqrt(est["var_ratio"])
    u = (z - est["mean"]) / sd
    emp = {k: float(np.dot(w, u**k) / w.sum()) for k in range(3, 7)}
    counts, _ = np.histogram(z, bins=HIST_EDGES)
    overflow = (int(np.sum(z < HIST_EDGES[0])), int(np.sum(z > HIST_EDGES[-1])))
    return MomentReport(
        config=cfg.as_dict(),
        sigma_sq=model.sigma_sq,
        kappa=kappa,
        mean=est["mean"],
        var_ratio=est["var_ratio"],
        moments={k: est[f"m{k}"] for k in range(3, 7)},
        stderr=stderr,
        ks=ks_distance(z, w),
        hist_counts=counts,
        overflow=overflow,
        empirical_moments=emp,
        diag_ratio=diagonal_variance(cfg.L, f, table) / model.sigma_sq,
        n_levels=cfg.n_levels,
        n_samples=len(z),
    )


def residual_rms(cfg: ExperimentConfig, kappa: float | None = None, samples: SampleSet | None = None) -> float:
    """sqrt(<R^2>) / sigma_L over the sample set."""
    f = make_test_function(cfg.f_kind)
    kappa = default_kappa() if kappa is None else kappa
    sigma = sigma_model(cfg.L, f, kappa).sigma
    samples = samples or sample_taus(cfg)
    R = residual_term(samples.taus, cfg.L, f)
    return math.sqrt(weighted_average(R * R, samples)) / sigma


# ---------------------------------------------------------------- form factors


@dataclass(frozen=True)
class FormFactorModel:
    kind: str  # poisson | goe | arithmetic
    kappa: float | None = None
    E: float | None = None

    @property
    def ff_c1(self) -> float:
        return 6 * (self.kappa if self.kappa is not None else default_kappa()) / math.pi

    @property
    def ff_c2(self) -> float:
        return math.pi / 6


def form_factor_reference(model: FormFactorModel, tau):
    t = np.abs(np.asarray(tau, dtype=float))
    if model.kind == "poisson":
        out = np.ones_like(t)
    elif model.kind == "goe":
        small = t <= 1
        ts = np.where(small, t, 0.0)
        tl = np.where(small, 2.0, t)
        out = np.where(
            small,
            2 * ts - ts * np.log1p(2 * ts),
            2 - tl * np.log((1 + 2 * tl) / (2 * tl - 1)),
        )
    elif model.kind == "arithmetic":
        if not (model.E and model.E > 0):
            raise ValueError("arithmetic form factor needs E > 0")
        rE = math.sqrt(model.E)
        out = model.ff_c1 * np.exp(model.ff_c2 * rE * t) / rE
    else:
        raise ValueError(f"unknown form factor kind {model.kind!r}")
    return float(out) if out.ndim == 0 else out
