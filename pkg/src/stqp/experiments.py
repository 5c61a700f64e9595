"""Monte Carlo campaigns and numerical verification experiments.

Ties the generator, the solver and the bound formulas together:

* support-size campaigns: empirical law of the optimal support size
  against the union-bound estimate ``n * E[(1-G(...))^n]``;
* frequencies of the pairwise dominance event behind the ``2^n/(n+1)!``
  bound;
* concentration of the average log-reciprocal of uniform order statistics;
* convolution tail asymptotics of the symmetrised (half-sum) model and
  the divergence of the diagonal-to-off-diagonal tail ratio.

Campaign outputs are reproducible from ``(config, seed)`` alone; worker
count never changes results because replication streams are keyed by the
replication index.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad

from . import rng as rng_mod
from .bounds import MCEstimate, convolved_tail_params, mc_key_expectation
from .distributions import (
    DistributionSpec,
    TailParams,
    log_cdf,
    log_density,
    order_stats_batch,
    sample,
    spec_from_dict,
    spec_to_dict,
)
from .errors import DomainError, NumericalFailureError
from .instance import Model, generate
from .solver import solve_global

__all__ = [
    "CampaignConfig", "SupportHistogram", "CampaignResult",
    "run_support_campaign", "run_pairwise_dominance_frequency",
    "FokTailFit", "verify_convolution_tail",
    "RatioTable", "verify_tail_ratio_divergence",
    "SConcentration", "run_s_concentration",
    "log_conv_cdf",
]


# ---------------------------------------------------------------------------
# campaign configuration and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CampaignConfig:
    """Inputs of a support-size campaign.

    ``k_max`` overrides the default enumeration cap ``ceil(alpha*sqrt(n))``.
    """

    model: Model
    n_list: tuple
    reps: int
    seed: int
    diag: Optional[DistributionSpec] = None
    offdiag: Optional[DistributionSpec] = None
    entry: Optional[DistributionSpec] = None
    alpha: float = 4.0
    k_max: Optional[int] = None
    schema: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise DomainError("need reps >= 1")
        if any(n < 2 for n in self.n_list):
            raise DomainError("campaign dimensions must be >= 2")
        if self.model is Model.SYMMETRIC_IID and (self.diag is None or self.offdiag is None):
            raise DomainError("symmetric_iid campaign needs diag and offdiag specs")
        if self.model is Model.WIGNER_AVERAGE and self.entry is None:
            raise DomainError("wigner_average campaign needs the entry spec")

    def k_cap(self, n: int) -> int:
        if self.k_max is not None:
            return self.k_max
        return int(math.ceil(self.alpha * math.sqrt(n)))

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "model": self.model.value,
            "n_list": list(self.n_list),
            "reps": self.reps,
            "seed": self.seed,
            "alpha": self.alpha,
            "k_max": self.k_max,
            "diag": spec_to_dict(self.diag) if self.diag else None,
            "offdiag": spec_to_dict(self.offdiag) if self.offdiag else None,
            "entry": spec_to_dict(self.entry) if self.entry else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "CampaignConfig":
        if d.get("schema", 1) != 1:
            raise DomainError(f"unsupported config schema {d.get('schema')}")
        def _spec(key):
            return spec_from_dict(d[key]) if d.get(key) else None
        return CampaignConfig(
            model=Model(d["model"]),
            n_list=tuple(int(n) for n in d["n_list"]),
            reps=int(d["reps"]),
            seed=int(d["seed"]),
            diag=_spec("diag"),
            offdiag=_spec("offdiag"),
            entry=_spec("entry"),
            alpha=float(d.get("alpha", 4.0)),
            k_max=d.get("k_max"),
        )

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class SupportHistogram:
    """Observed support sizes for one dimension.

    ``counts`` excludes replications whose search frontier saturated the
    enumeration cap (``capped_count``) and replications the solver flagged
    as numerical failures (``failed_count``), so that
    ``sum(counts) + capped_count + failed_count == reps``.
    """

    n: int
    counts: dict
    capped_count: int
    failed_count: int
    reps: int
    seed: int
    k_cap: int

    @property
    def solved(self) -> int:
        return self.reps - self.capped_count - self.failed_count

    def frequency(self, k: int) -> float:
        return self.counts.get(k, 0) / max(1, self.solved)

    def survival(self) -> list:
        """Pairs ``(k, P{K >= k})`` over the observed range."""
        if not self.counts:
            return []
        kmax = max(self.counts)
        total = max(1, self.solved)
        out = []
        acc = 0
        for k in range(kmax, 0, -1):
            acc += self.counts.get(k, 0)
            out.append((k, acc / total))
        return out[::-1]

    def mode(self) -> int:
        return max(self.counts, key=lambda k: (self.counts[k], -k))


@dataclass
class CampaignResult:
    config: CampaignConfig
    histogram: SupportHistogram
    bound_rows: list = field(default_factory=list)
    # rows: (k, freq of K=k+1, n*(est+3se), est, se, reps)


def _campaign_worker(args):
    cfg_dict, n, lo, hi = args
    cfg = CampaignConfig.from_dict(cfg_dict)
    cap = cfg.k_cap(n)
    out = []
    for rep in range(lo, hi):
        seed_i = rng_mod.substream_seed(cfg.seed, n, rep)
        inst = generate(cfg.model, n, seed_i, diag_spec=cfg.diag,
                        offdiag_spec=cfg.offdiag, entry_spec=cfg.entry)
        try:
            sol = solve_global(inst, k_max=cap)
        except NumericalFailureError:
            out.append(-1)
            continue
        out.append(-2 if sol.cap_reached else sol.k)
    return out


def run_support_campaign(cfg: CampaignConfig, jobs: int = 1,
                         out_dir: Optional[str] = None,
                         svg: bool = False,
                         bound_reps: int = 100_000) -> list:
    """Run the campaign; returns one :class:`CampaignResult` per dimension.

    For the symmetric iid model each result carries the union-bound
    cross-check rows ``P{K=k+1} <= n*(estimate + 3*SE)`` for every observed
    k; the half-sum model has no closed off-diagonal quantile, so the
    cross-check is skipped there.

    ``jobs`` only distributes replications; outputs are identical for any
    worker count.
    """
    results = []
    cfg_dict = cfg.to_dict()
    for n in cfg.n_list:
        chunk = max(1, min(cfg.reps, (cfg.reps + 4 * max(1, jobs) - 1) // (4 * max(1, jobs))))
        tasks = [(cfg_dict, n, lo, min(lo + chunk, cfg.reps))
                 for lo in range(0, cfg.reps, chunk)]
        if jobs > 1:
            with get_context("fork").Pool(processes=jobs) as pool:
                parts = pool.map(_campaign_worker, tasks)
        else:
            parts = [_campaign_worker(t) for t in tasks]
        codes = [c for part in parts for c in part]
        counts = Counter(c for c in codes if c > 0)
        hist = SupportHistogram(
            n=n, counts=dict(sorted(counts.items())),
            capped_count=sum(1 for c in codes if c == -2),
            failed_count=sum(1 for c in codes if c == -1),
            reps=cfg.reps, seed=cfg.seed, k_cap=cfg.k_cap(n))
        rows = []
        if cfg.model is Model.SYMMETRIC_IID:
            for s in sorted(hist.counts):
                k = s - 1
                if k < 1:
                    continue
                est = mc_key_expectation(cfg.diag, cfg.offdiag, n, k, bound_reps,
                                         rng_mod.substream_seed(cfg.seed, n, 0xB0, k))
                rows.append((k, hist.frequency(s), n * (est.value + 3.0 * est.se),
                             est.value, est.se, est.reps))
        results.append(CampaignResult(config=cfg, histogram=hist, bound_rows=rows))
    if out_dir is not None:
        _write_campaign_outputs(cfg, results, Path(out_dir), svg=svg)
    return results


def _write_campaign_outputs(cfg, results, out_dir: Path, svg: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash()
    cfg_path = out_dir / "config.json"
    cfg_path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    for res in results:
        hist = res.histogram
        with (out_dir / f"hist_n{hist.n}.csv").open("w") as fh:
            fh.write(f"# config_hash: {h}\n")
            fh.write(f"# capped: {hist.capped_count} failed: {hist.failed_count} "
                     f"reps: {hist.reps} k_cap: {hist.k_cap}\n")
            fh.write("n,k,count\n")
            for k in sorted(hist.counts):
                fh.write(f"{hist.n},{k},{hist.counts[k]}\n")
        if res.bound_rows:
            with (out_dir / f"bound_check_n{hist.n}.csv").open("w") as fh:
                fh.write(f"# config_hash: {h}\n")
                fh.write("n,k,freq_k_plus_1,n_times_bound,estimate,se,reps\n")
                for k, freq, nb, est, se, reps in res.bound_rows:
                    fh.write(f"{hist.n},{k},{freq:.8g},{nb:.8g},{est:.8g},{se:.3g},{reps}\n")
        if svg:
            _write_survival_svg(res, out_dir / f"survival_n{hist.n}.svg", h)


def _write_survival_svg(res, path: Path, cfg_hash: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    hist = res.histogram
    surv = hist.survival()
    fig, ax = plt.subplots(figsize=(5, 3.4))
    if surv:
        ks, ps = zip(*surv)
        ax.step(ks, ps, where="post", label="empirical P{K >= k}")
    if res.bound_rows:
        kb = [k + 1 for k, *_ in res.bound_rows]
        vb = [min(1.0, row[2]) for row in res.bound_rows]
        ax.plot(kb, vb, "o--", label="n*(estimate+3SE)")
    ax.set_yscale("log")
    ax.set_xlabel("support size k")
    ax.set_title(f"n={hist.n} ({cfg_hash})", fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# pairwise dominance event
# ---------------------------------------------------------------------------


def run_pairwise_dominance_frequency(n: int, spec: DistributionSpec,
                                     reps: int, seed: int) -> MCEstimate:
    """Frequency of ``Q_ij <= max(Q_ii, Q_jj)`` holding for every pair in a
    symmetric iid matrix with all entries drawn from ``spec``."""
    if not 2 <= n <= 12:
        raise DomainError("event frequency is tracked for 2 <= n <= 12")
    if reps < 1000:
        raise DomainError("need reps >= 1000")
    gen = rng_mod.stream(seed, 0x6264)
    iu, ju = np.triu_indices(n, k=1)
    diag = sample(spec, (reps, n), gen)
    off = sample(spec, (reps, iu.size), gen)
    ok = np.all(off <= np.maximum(diag[:, iu], diag[:, ju]), axis=1)
    freq = float(ok.mean())
    se = float(ok.std(ddof=1) / math.sqrt(reps))
    return MCEstimate(freq, se, reps, seed)


# ---------------------------------------------------------------------------
# convolution tail of the half-sum model
# ---------------------------------------------------------------------------


def log_conv_cdf(spec_g: DistributionSpec, x: float,
                 quad_tol: float = 1e-10) -> float:
    """``log (G*G)(2x) = log P{X + Y <= 2x}`` by log-domain quadrature.

    The integrand ``G(2x-u) g(u)`` is scanned for its peak on a wide grid,
    shifted by the peak value, and integrated adaptively over the region
    contributing more than ``exp(-60)`` of the maximum.
    """
    width = max(60.0, 4.0 * abs(x))
    us = np.linspace(2.0 * x - width, width, 6001)
    hv = log_cdf(spec_g, 2.0 * x - us) + log_density(spec_g, us)
    hv = np.where(np.isfinite(hv), hv, -np.inf)
    imax = int(np.argmax(hv))
    hmax = float(hv[imax])
    if not math.isfinite(hmax):
        raise NumericalFailureError("vanishing convolution integrand")
    keep = np.nonzero(hv >= hmax - 60.0)[0]
    du = us[1] - us[0]
    u_lo = us[keep[0]] - du
    u_hi = us[keep[-1]] + du

    def f(u):
        h = float(log_cdf(spec_g, 2.0 * x - u) + log_density(spec_g, u))
        return math.exp(h - hmax) if math.isfinite(h) else 0.0

    pts = []
    tail = spec_g.tail
    if tail is not None and spec_g.family == "exp_tail":
        y_cut = spec_g.impl().y_cut + tail.x0
        for p in (y_cut, 2.0 * x - y_cut):
            if u_lo < p < u_hi:
                pts.append(p)
    val, _ = quad(f, u_lo, u_hi, points=sorted(pts) or None,
                  limit=400, epsabs=1e-14, epsrel=quad_tol)
    if val <= 0:
        raise NumericalFailureError("convolution quadrature underflowed")
    return hmax + math.log(val)


@dataclass
class FokTailFit:
    """Least-squares fit of ``log F(x) = log c' + a' log|x| - r' |x|^b`` on a
    grid in the left tail, for ``F = (G*G)(2x)``."""

    x: np.ndarray
    log_f: np.ndarray
    b: float
    a_fit: float
    r_fit: float
    log_c_fit: float
    a_target: float
    r_target: float
    max_residual: float


def verify_convolution_tail(tail: TailParams, x_grid=None,
                            quad_tol: float = 1e-10,
                            fit_b: bool = False) -> FokTailFit:
    """Measure the tail of the half-sum convolution and fit its parameters.

    The entry law is the exp_tail family realising ``tail`` exactly on its
    left piece.  The default three-basis fit keeps ``b`` fixed at the entry
    value (the convolution provably preserves it); ``fit_b=True`` adds b to
    the regression for diagnostic use.
    """
    if x_grid is None:
        x_grid = np.linspace(-8.0, -4.0, 17)
    x = np.asarray(x_grid, dtype=float)
    if np.any(x >= 0):
        raise DomainError("tail grid must be negative")
    spec = DistributionSpec.exp_tail(a=tail.a, b=tail.b, c=tail.c, r=tail.r,
                                     x0=tail.x0, kappa=tail.kappa)
    log_f = np.array([log_conv_cdf(spec, float(xi), quad_tol) for xi in x])
    conv = convolved_tail_params(tail.a, tail.b)
    r_target = tail.r * conv.r_prime
    b = tail.b
    if fit_b:
        from scipy.optimize import least_squares

        def resid(p):
            logc, a_p, r_p, b_p = p
            return logc + a_p * np.log(np.abs(x)) - r_p * np.abs(x) ** b_p - log_f

        sol = least_squares(resid, x0=[0.0, conv.a_prime, r_target, b])
        logc, a_fit, r_fit, b = sol.x
        res = resid(sol.x)
    else:
        basis = np.column_stack([np.ones_like(x), np.log(np.abs(x)), -np.abs(x) ** b])
        coef, *_ = np.linalg.lstsq(basis, log_f, rcond=None)
        logc, a_fit, r_fit = coef
        res = basis @ coef - log_f
    return FokTailFit(x=x, log_f=log_f, b=float(b), a_fit=float(a_fit),
                      r_fit=float(r_fit), log_c_fit=float(logc),
                      a_target=float(conv.a_prime), r_target=float(r_target),
                      max_residual=float(np.max(np.abs(res))))


@dataclass
class RatioTable:
    """Tail ratio ``G(x)/F(x)`` of the entry law to its half-sum
    convolution, on a grid going down the left tail."""

    x: np.ndarray
    log_ratio: np.ndarray
    increasing_towards_minus_inf: bool
    slope_fit: float
    slope_target: float


def verify_tail_ratio_divergence(tail: TailParams, x_grid=None,
                                 quad_tol: float = 1e-10) -> RatioTable:
    """Tabulate ``log G - log F`` on the grid and fit its growth rate
    against ``|x|^b`` (target ``(2^min(1,b) - 1) * r``)."""
    if x_grid is None:
        x_grid = np.linspace(-8.0, -4.0, 9)
    x = np.asarray(x_grid, dtype=float)
    spec = DistributionSpec.exp_tail(a=tail.a, b=tail.b, c=tail.c, r=tail.r,
                                     x0=tail.x0, kappa=tail.kappa)
    log_f = np.array([log_conv_cdf(spec, float(xi), quad_tol) for xi in x])
    log_g = np.asarray(log_cdf(spec, x), dtype=float)
    log_ratio = log_g - log_f
    order = np.argsort(x)
    increasing = bool(np.all(np.diff(log_ratio[order]) < 0.0))
    basis = np.column_stack([np.ones_like(x), np.abs(x) ** tail.b])
    coef, *_ = np.linalg.lstsq(basis, log_ratio, rcond=None)
    target = (2.0 ** min(1.0, tail.b) - 1.0) * tail.r
    return RatioTable(x=x, log_ratio=log_ratio,
                      increasing_towards_minus_inf=increasing,
                      slope_fit=float(coef[1]), slope_target=float(target))


# ---------------------------------------------------------------------------
# concentration of the average log-reciprocal order statistic
# ---------------------------------------------------------------------------


@dataclass
class SConcentration:
    frequency: float
    bound: float
    threshold: float
    se: float
    reps: int
    seed: int


def run_s_concentration(n: int, k: int, alpha: float, beta: float,
                        reps: int, seed: int) -> SConcentration:
    """Empirical ``P{ (1/k) sum log(1/U_j) > log(n/(alpha*k)) }`` against the
    Chernoff-style bound ``(alpha*e/(1-beta))^(beta*k)``.

    Requires ``alpha * e < 1 - beta`` (otherwise the bound is vacuous).
    """
    if not 0 < alpha < 1.0 / math.e:
        raise DomainError("need 0 < alpha < 1/e")
    if not 0 < beta < 1.0 - alpha * math.e:
        raise DomainError("need 0 < beta < 1 - alpha*e")
    if not 1 <= k <= n - 1:
        raise DomainError("need 1 <= k <= n-1")
    gen = rng_mod.stream(seed, 0x7363)
    u = order_stats_batch(n - 1, k, reps, gen)
    s_vals = -np.mean(np.log(u), axis=1)
    threshold = math.log(n / (alpha * k))
    hits = s_vals > threshold
    freq = float(hits.mean())
    se = float(hits.std(ddof=1) / math.sqrt(reps))
    bound = (alpha * math.e / (1.0 - beta)) ** (beta * k)
    return SConcentration(frequency=freq, bound=float(bound),
                          threshold=threshold, se=se, reps=reps, seed=seed)
