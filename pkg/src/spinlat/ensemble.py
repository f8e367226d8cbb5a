"""Disorder-ensemble campaigns with deterministic seeding and parallel workers.

Seeding: every realization draws its configuration from the counter-based
Philox generator with a derived seed ``campaign_seed * 2**32 + N * 2**16 + k``
(k = realization index), so results are bitwise reproducible regardless of
worker count or scheduling; reductions are index ordered.

Medians (not means) summarize every cell: the T_ii distributions are
heavily skewed by rare tightly coupled configurations, and the median is
the statistic that survives them.  Uncertainties come from percentile
bootstrap (68% interval) with a fixed resample count.
"""
from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize

from .geometry import (coupling_matrix, coupling_stats, generate_configuration,
                       place_gateway, with_labels)
from .liouvillian import build_hamiltonian
from .measures import SolverError, refine_log_minimum, transfer_matrix, dephasing_builder

SEED_STRIDE = 2 ** 32
REALIZATION_STRIDE = 2 ** 16

CAMPAIGN_MODES = ("gateway", "fixed-density", "fixed-radius")


class CampaignError(RuntimeError):
    """Campaign-level failure (bad spec or too many excluded realizations)."""


@dataclass(frozen=True)
class CampaignSpec:
    """Declarative description of one ensemble run.

    ``base_radius`` is the disc radius at n=10 sites; fixed-density mode
    scales it as R_N = base_radius * sqrt(N/10), fixed-radius mode keeps it
    constant.  ``realizations`` falls back to round(2000/N) in fixed-density
    mode and 50 otherwise.  ``min_separation`` defaults to one length unit,
    the separation at which the coupling reaches j_max.
    """

    mode: str
    n_values: tuple = (10,)
    gammas: tuple = ()
    j_values: tuple = ()
    realizations: Optional[int] = None
    base_radius: float = 32.0
    seed: int = 0
    statistic: str = "median"
    bootstrap_resamples: int = 400
    min_separation: float = 1.0
    workers: Optional[int] = None
    max_exclusion_fraction: float = 0.05

    def __post_init__(self):
        if self.mode not in CAMPAIGN_MODES:
            raise CampaignError(f"mode must be one of {CAMPAIGN_MODES}")
        if self.statistic != "median":
            raise CampaignError("median is the only supported statistic")
        if self.realizations is not None and self.realizations < 1:
            raise CampaignError("realizations must be >= 1")
        if not self.gammas or np.any(np.asarray(self.gammas) <= 0):
            raise CampaignError("a positive dephasing grid is required")
        if self.mode == "gateway":
            if not self.j_values:
                raise CampaignError("gateway mode needs j_values")
            if np.any((np.asarray(self.j_values) < 1e-4)
                      | (np.asarray(self.j_values) > 1.0)):
                raise CampaignError("gateway couplings must lie in [1e-4, 1]")

    def radius_for(self, n: int) -> float:
        if self.mode == "fixed-radius":
            return self.base_radius
        return self.base_radius * np.sqrt(n / 10.0)

    def realizations_for(self, n: int) -> int:
        if self.realizations is not None:
            return self.realizations
        if self.mode == "fixed-density":
            return max(1, round(2000 / n))
        return 50

    def config_seed(self, n: int, k: int) -> int:
        return self.seed * SEED_STRIDE + n * REALIZATION_STRIDE + k

    def effective_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        return max(1, os.cpu_count() or 1)


def _run_tasks(fn, tasks, workers: int):
    """Index-ordered map over spawned single-threaded workers.

    Tasks always run in fresh processes with pinned BLAS threading, so a
    campaign's numbers are bitwise identical for any worker count; the
    reduction is ordered by task index, not completion time.
    """
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    ctx = multiprocessing.get_context("spawn")
    results = [None] * len(tasks)
    with ProcessPoolExecutor(max_workers=max(1, workers), mp_context=ctx) as pool:
        futures = {pool.submit(fn, t): i for i, t in enumerate(tasks)}
        for fut in as_completed(futures):
            results[futures[fut]] = fut.result()
    return results


# --------------------------------------------------------------------------
# statistics helpers

@dataclass(frozen=True)
class BootstrapResult:
    median: float
    ci_lo: float
    ci_hi: float


def bootstrap_median(samples, resamples: int, seed: int = 0) -> BootstrapResult:
    """Percentile-bootstrap 68% interval of the median; deterministic."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise ValueError("need at least 2 samples")
    if resamples < 100:
        raise ValueError("need at least 100 resamples")
    rng = np.random.Generator(np.random.Philox(key=np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(0xB00)])))
    idx = rng.integers(0, samples.size, size=(resamples, samples.size))
    meds = np.median(samples[idx], axis=1)
    lo, hi = np.percentile(meds, [16.0, 84.0])
    return BootstrapResult(median=float(np.median(samples)),
                           ci_lo=float(lo), ci_hi=float(hi))


FIT_MODELS = ("power", "linear", "quadratic", "exponential")


@dataclass(frozen=True)
class FitResult:
    """Parameters with bootstrap confidence intervals and a goodness score."""

    model: str
    params: dict
    ci: dict
    residual_norm: float
    n_points: int


def _fit_once(xs, ys, model, weights):
    if model == "power":
        w = np.ones_like(xs) if weights is None else weights
        coeff = np.polyfit(np.log(xs), np.log(ys), 1, w=w)
        return {"amplitude": float(np.exp(coeff[1])), "exponent": float(coeff[0])}
    if model == "linear":
        w = np.ones_like(xs) if weights is None else weights
        coeff = np.polyfit(xs, ys, 1, w=w)
        return {"slope": float(coeff[0]), "intercept": float(coeff[1])}
    if model == "quadratic":
        x2 = xs ** 2
        return {"coefficient": float((x2 @ ys) / (x2 @ x2))}
    if model == "exponential":
        b0 = min(ys.min(), ys[-1]) * 0.5
        c0 = max(ys[0] - b0, 1e-30)
        a0 = max(np.log(max(ys[0] - b0, 1e-30) / max(ys[-1] - b0, 1e-30))
                 / max(xs[-1] - xs[0], 1e-30), 1e-6)
        # wild intermediate parameter draws may overflow; the optimizer
        # simply rejects those costs
        with np.errstate(over="ignore", invalid="ignore"):
            popt, _ = scipy.optimize.curve_fit(
                lambda x, c, a, b: c * np.exp(-np.clip(a * x, -700.0, 700.0)) + b,
                xs, ys, p0=(c0, a0, b0), maxfev=20000)
        return {"amplitude": float(popt[0]), "rate": float(popt[1]),
                "offset": float(popt[2])}
    raise ValueError(f"model must be one of {FIT_MODELS}")


def _fit_predict(xs, model, params):
    if model == "power":
        return params["amplitude"] * xs ** params["exponent"]
    if model == "linear":
        return params["slope"] * xs + params["intercept"]
    if model == "quadratic":
        return params["coefficient"] * xs ** 2
    return params["amplitude"] * np.exp(-params["rate"] * xs) + params["offset"]


def fit_model(xs, ys, model: str, weights=None, resamples: int = 400,
              seed: int = 0) -> FitResult:
    """Least squares fit (log-log space for power laws) with bootstrap CIs.

    Confidence intervals come from resampling the points; with few points
    they are wide, which is the honest answer.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if model not in FIT_MODELS:
        raise ValueError(f"model must be one of {FIT_MODELS}")
    n_par = {"power": 2, "linear": 2, "quadratic": 1, "exponential": 3}[model]
    if xs.size < n_par + 1:
        raise ValueError(f"{model} fit needs at least {n_par + 1} points")
    if model == "power" and np.any(ys <= 0):
        raise ValueError("power-law fit needs positive values")
    params = _fit_once(xs, ys, model, weights)
    pred = _fit_predict(xs, model, params)
    if model == "power":
        resid = float(np.sqrt(np.mean((np.log(ys) - np.log(pred)) ** 2)))
    else:
        resid = float(np.sqrt(np.mean((ys - pred) ** 2)))
    rng = np.random.Generator(np.random.Philox(key=np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(0xF17)])))
    draws: dict[str, list] = {k: [] for k in params}
    for _ in range(resamples):
        pick = rng.integers(0, xs.size, size=xs.size)
        if np.unique(xs[pick]).size < n_par + (1 if model != "quadratic" else 0):
            continue
        try:
            p = _fit_once(xs[pick], ys[pick], model,
                          None if weights is None else np.asarray(weights)[pick])
        except Exception:
            continue
        for k, v in p.items():
            draws[k].append(v)
    ci = {}
    for k, v in params.items():
        if draws[k]:
            lo, hi = np.percentile(draws[k], [16.0, 84.0])
            ci[k] = (float(min(lo, v)), float(max(hi, v)))
        else:
            ci[k] = (v, v)
    return FitResult(model=model, params=params, ci=ci,
                     residual_norm=resid, n_points=int(xs.size))


# --------------------------------------------------------------------------
# gateway campaign

def _gateway_task(args):
    """One disorder realization of the gateway model, all (J, Gamma) points."""
    spec, k = args
    n_bath = spec.n_values[0]
    cfg_seed = spec.config_seed(n_bath, k)
    base = with_labels(
        generate_configuration(n_bath, spec.radius_for(n_bath), cfg_seed,
                               min_separation=spec.min_separation),
        excitation=0)
    gammas = np.asarray(spec.gammas, dtype=float)
    t_table = np.full((len(spec.j_values), gammas.size), np.nan)
    eps_link = np.full(len(spec.j_values), np.nan)
    eps_bath = np.full(len(spec.j_values), np.nan)
    failures = []
    for jv, j_target in enumerate(spec.j_values):
        try:
            cfg = place_gateway(base, j_target, seed=cfg_seed + 1 + jv,
                                min_separation=spec.min_separation)
            cm = coupling_matrix(cfg)
            exc, gw = cfg.labels["excitation"], cfg.labels["gateway"]
            bath = [s for s in range(cfg.n_sites) if s not in (exc, gw)]
            jmat = cm.values
            # escape-channel scale: root-sum-square of the symmetric-state
            # couplings out of the excitation/gateway pair (the quantity the
            # golden-rule escape rate actually contains)
            eps_link[jv] = float(np.sqrt(np.sum(
                (jmat[exc, bath] + jmat[gw, bath]) ** 2 / 2.0)))
            # redistribution scale: algebraic-connectivity of the bath graph
            # weighted by the squared couplings (incoherent hopping rates)
            w = jmat[np.ix_(bath, bath)] ** 2
            lap = np.diag(w.sum(axis=1)) - w
            lam2 = np.sort(np.linalg.eigvalsh(lap))[1]
            eps_bath[jv] = float(np.sqrt(max(lam2, 0.0)))
            h = build_hamiltonian(cfg, cm)
            build = dephasing_builder(h)
            for gv, g in enumerate(gammas):
                t_table[jv, gv] = transfer_matrix(build(g), sites=[exc]
                                                  ).values[exc, exc]
        except (SolverError, ValueError) as err:
            failures.append((jv, str(err)))
    return k, t_table, eps_link, eps_bath, failures


@dataclass(frozen=True)
class GatewayCampaignResult:
    spec: CampaignSpec
    gammas: np.ndarray
    j_values: np.ndarray
    t_median: np.ndarray            # (J, Gamma)
    t_ci: np.ndarray                # (J, Gamma, 2)
    gamma_star: np.ndarray          # per J, refined minimum location
    t_min: np.ndarray               # per J
    eps_link: float                 # campaign medians of the measured scales
    eps_bath: float
    raw: np.ndarray                 # (realization, J, Gamma)
    excluded: list = field(default_factory=list)

    def survival_at(self, gamma: float) -> np.ndarray:
        """Median T_ii(J) at the grid point nearest to ``gamma``."""
        g = int(np.argmin(np.abs(self.gammas - gamma)))
        return self.t_median[:, g]

    def large_j_window(self, factor: float = 10.0) -> np.ndarray:
        """Mask of J values in the hierarchical branch, J >= factor*eps_link."""
        return self.j_values >= factor * self.eps_link


def run_gateway_campaign(spec: CampaignSpec) -> GatewayCampaignResult:
    """Median excitation-site survival over (J, Gamma) with bootstrap CIs."""
    if spec.mode != "gateway":
        raise CampaignError("spec.mode must be 'gateway'")
    n_real = spec.realizations_for(spec.n_values[0])
    tasks = [(spec, k) for k in range(n_real)]
    results = _run_tasks(_gateway_task, tasks, spec.effective_workers())
    gammas = np.asarray(spec.gammas, dtype=float)
    j_values = np.asarray(spec.j_values, dtype=float)
    raw = np.full((n_real, j_values.size, gammas.size), np.nan)
    links, baths, excluded = [], [], []
    for k, t_table, eps_link, eps_bath, failures in results:
        raw[k] = t_table
        links.extend(eps_link[np.isfinite(eps_link)])
        baths.extend(eps_bath[np.isfinite(eps_bath)])
        excluded.extend((k, jv, msg) for jv, msg in failures)
    n_cells = n_real * j_values.size
    if len(excluded) > spec.max_exclusion_fraction * n_cells:
        raise CampaignError(
            f"{len(excluded)} of {n_cells} realization points failed")
    t_median = np.nanmedian(raw, axis=0)
    t_ci = np.empty((j_values.size, gammas.size, 2))
    for jv in range(j_values.size):
        for gv in range(gammas.size):
            vals = raw[:, jv, gv]
            vals = vals[np.isfinite(vals)]
            bs = bootstrap_median(vals, spec.bootstrap_resamples,
                                  seed=spec.seed + 7919 * jv + gv)
            t_ci[jv, gv] = (bs.ci_lo, bs.ci_hi)
    gamma_star = np.empty(j_values.size)
    t_min = np.empty(j_values.size)
    for jv in range(j_values.size):
        gamma_star[jv], t_min[jv] = refine_log_minimum(gammas, t_median[jv])
    return GatewayCampaignResult(
        spec=spec, gammas=gammas, j_values=j_values, t_median=t_median,
        t_ci=t_ci, gamma_star=gamma_star, t_min=t_min,
        eps_link=float(np.median(links)), eps_bath=float(np.median(baths)),
        raw=raw, excluded=excluded)


# --------------------------------------------------------------------------
# scaling campaigns (fixed density / fixed radius)

def _scaling_task(args):
    """One realization: site-resolved T_ii over the full Gamma grid."""
    spec, n, k = args
    cfg = generate_configuration(n, spec.radius_for(n), spec.config_seed(n, k),
                                 min_separation=spec.min_separation)
    cm = coupling_matrix(cfg)
    stats = coupling_stats(cm)
    h = build_hamiltonian(cfg, cm)
    build = dephasing_builder(h)
    gammas = np.asarray(spec.gammas, dtype=float)
    t_sites = np.full((gammas.size, n), np.nan)
    failures = []
    for gv, g in enumerate(gammas):
        try:
            tm = transfer_matrix(build(g))
            t_sites[gv] = np.diag(tm.values)
        except SolverError as err:
            failures.append((gv, str(err)))
    return k, t_sites, stats.m, float(stats.jmax_bath), failures


@dataclass(frozen=True)
class ScalingCampaignResult:
    spec: CampaignSpec
    gammas: np.ndarray
    n_values: np.ndarray
    t_median: dict                  # n -> median |T_ii| per Gamma (pooled sites)
    t_ci: dict                      # n -> (Gamma, 2) bootstrap interval
    gamma_star: dict                # n -> refined minimum location
    t_min: dict                     # n -> minimum median survival
    site_values: dict               # n -> (realization, Gamma, n) raw T_ii
    m_samples: dict                 # n -> pooled per-site strongest couplings
    jmax_bath: dict                 # n -> per-realization global maxima
    excluded: list

    def median_abs_at(self, gamma: float) -> np.ndarray:
        g = int(np.argmin(np.abs(self.gammas - gamma)))
        return np.array([self.t_median[n][g] for n in self.n_values])

    def gamma_star_bootstrap_slope(self, resamples: int = 200, seed: int = 1
                                   ) -> tuple:
        """Linear slope of Gamma*(N) with a realization-bootstrap 68% CI."""
        rng = np.random.Generator(np.random.Philox(key=np.array(
            [np.uint64(seed), np.uint64(0x5107E)])))
        slopes = []
        for _ in range(resamples):
            stars = []
            for n in self.n_values:
                vals = self.site_values[n]
                pick = rng.integers(0, vals.shape[0], size=vals.shape[0])
                pooled = np.abs(vals[pick]).reshape(vals.shape[1], -1)
                med = np.nanmedian(pooled, axis=1)
                stars.append(refine_log_minimum(self.gammas, med)[0])
            slopes.append(np.polyfit(self.n_values, stars, 1)[0])
        point = np.polyfit(self.n_values,
                           [self.gamma_star[n] for n in self.n_values], 1)[0]
        lo, hi = np.percentile(slopes, [16.0, 84.0])
        return float(point), float(lo), float(hi)


def run_scaling_campaign(spec: CampaignSpec) -> ScalingCampaignResult:
    """Site-pooled median survival statistics against system size."""
    if spec.mode not in ("fixed-density", "fixed-radius"):
        raise CampaignError("spec.mode must be fixed-density or fixed-radius")
    gammas = np.asarray(spec.gammas, dtype=float)
    t_median, t_ci, gamma_star, t_min = {}, {}, {}, {}
    site_values, m_samples, jmax_bath = {}, {}, {}
    excluded = []
    for n in spec.n_values:
        n_real = spec.realizations_for(n)
        tasks = [(spec, n, k) for k in range(n_real)]
        results = _run_tasks(_scaling_task, tasks, spec.effective_workers())
        vals = np.full((n_real, gammas.size, n), np.nan)
        m_pool, jmax_list = [], []
        n_failed = 0
        for k, t_sites, m_i, jm, failures in results:
            vals[k] = t_sites
            m_pool.extend(m_i)
            jmax_list.append(jm)
            n_failed += len(failures)
            excluded.extend((n, k, gv, msg) for gv, msg in failures)
        if n_failed > spec.max_exclusion_fraction * n_real * gammas.size:
            raise CampaignError(f"too many solver failures at N={n}")
        pooled = np.abs(vals).transpose(1, 0, 2).reshape(gammas.size, -1)
        med = np.nanmedian(pooled, axis=1)
        ci = np.empty((gammas.size, 2))
        for gv in range(gammas.size):
            cell = pooled[gv][np.isfinite(pooled[gv])]
            bs = bootstrap_median(cell, spec.bootstrap_resamples,
                                  seed=spec.seed + 104729 * n + gv)
            ci[gv] = (bs.ci_lo, bs.ci_hi)
        t_median[n] = med
        t_ci[n] = ci
        gamma_star[n], t_min[n] = refine_log_minimum(gammas, med)
        site_values[n] = vals
        m_samples[n] = np.asarray(m_pool)
        jmax_bath[n] = np.asarray(jmax_list)
    return ScalingCampaignResult(
        spec=spec, gammas=gammas, n_values=np.asarray(spec.n_values),
        t_median=t_median, t_ci=t_ci, gamma_star=gamma_star, t_min=t_min,
        site_values=site_values, m_samples=m_samples, jmax_bath=jmax_bath,
        excluded=excluded)


def tidy_rows(result) -> list:
    """Flatten a campaign result into tidy CSV rows."""
    rows = []
    if isinstance(result, GatewayCampaignResult):
        n = result.spec.n_values[0]
        for k in range(result.raw.shape[0]):
            for jv, j in enumerate(result.j_values):
                for gv, g in enumerate(result.gammas):
                    v = result.raw[k, jv, gv]
                    if np.isfinite(v):
                        rows.append(("gateway", n, j, g, k, 0, v))
    elif isinstance(result, ScalingCampaignResult):
        for n in result.n_values:
            vals = result.site_values[int(n)]
            for k in range(vals.shape[0]):
                for gv, g in enumerate(result.gammas):
                    for site in range(vals.shape[2]):
                        v = vals[k, gv, site]
                        if np.isfinite(v):
                            rows.append((result.spec.mode, int(n), "", g, k,
                                         site, v))
    else:
        raise TypeError("unsupported result type")
    return rows
