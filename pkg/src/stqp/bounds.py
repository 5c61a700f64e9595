"""Closed-form tail bounds and Monte Carlo estimators for the support size.

All combinatorial factors go through ``gammaln``; probability-scale results
are produced in the log domain first and exponentiated at the end, so the
formulas stay evaluable for n up to 1e6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, logsumexp

from . import rng as rng_mod
from .distributions import (
    DistributionSpec,
    LeftEdgeParams,
    TailParams,
    cdf,
    density,
    log_cdf,
    order_stats_batch,
    quantile,
    sf,
)
from .errors import DomainError, UnsupportedFamilyError

__all__ = [
    "E_SQRT2",
    "BoundInputs", "BoundRow", "BoundReport",
    "MCEstimate", "PhiValue", "DeltaThreshold", "TailBound", "PolylogBound",
    "ConvolvedTail", "EdgeRatio",
    "s_nk", "s_nk_tail", "gamma_alpha", "pairwise_dominance_bound", "delta_n",
    "c_nu", "gamma_weights", "phi_of_u", "log_sf", "mc_key_expectation",
    "h_nk", "mc_rho_hat", "support_tail_bound", "sigma_ab",
    "polylog_support_bound", "convolved_tail_params", "euler_gamma_moments",
    "edge_ratio_bounds", "phi_lower_bound_check",
]

E_SQRT2 = math.e * math.sqrt(2.0)  # support-cap threshold for the sqrt-n regime


# ---------------------------------------------------------------------------
# result containers
# ---------------------------------------------------------------------------


class MCEstimate(NamedTuple):
    value: float
    se: float
    reps: int
    seed: int


class PhiValue(NamedTuple):
    value: float
    log_value: float


class DeltaThreshold(NamedTuple):
    value: float
    clamped: bool


class TailBound(NamedTuple):
    value: float
    log_value: float


class PolylogBound(NamedTuple):
    value: float
    threshold: float


class ConvolvedTail(NamedTuple):
    a_prime: float
    r_prime: float


class EdgeRatio(NamedTuple):
    sigma_lo: float   # inf of F(x)/x^nu on (0, F^{-1}(delta)]
    sigma_hi: float   # sup of the same ratio (may be inf)
    gamma: float      # sigma_lo / sigma_hi, or 0 when the ratio is unbounded


@dataclass(frozen=True)
class BoundInputs:
    """Grid point for bound evaluation."""

    n: int
    k: int = 0
    alpha: float = 4.0
    tail: Optional[TailParams] = None
    edge: Optional[LeftEdgeParams] = None


@dataclass(frozen=True)
class BoundRow:
    formula_id: str
    n: Optional[int]
    k: Optional[int]
    value: float
    log_value: float
    se: Optional[float] = None
    reps: Optional[int] = None
    seed: Optional[int] = None


@dataclass
class BoundReport:
    """Evaluated bound curves with reproducibility metadata."""

    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, formula_id, value, n=None, k=None, se=None, reps=None, seed=None):
        log_value = math.log(value) if value > 0 else -math.inf
        if not math.isfinite(log_value):
            raise DomainError(f"non-finite log for {formula_id}: value={value}")
        self.rows.append(BoundRow(formula_id, n, k, float(value), log_value,
                                  se, reps, seed))

    def write_csv(self, fh):
        for key in sorted(self.metadata):
            fh.write(f"# {key}: {self.metadata[key]}\n")
        fh.write("formula_id,n,k,value,log_value,se,reps,seed\n")
        for r in self.rows:
            logcell = f"{r.log_value:.12g}" if math.isfinite(r.log_value) else ""
            cells = [r.formula_id,
                     "" if r.n is None else str(r.n),
                     "" if r.k is None else str(r.k),
                     f"{r.value:.12g}", logcell,
                     "" if r.se is None else f"{r.se:.6g}",
                     "" if r.reps is None else str(r.reps),
                     "" if r.seed is None else str(r.seed)]
            fh.write(",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# combinatorial bounds for the sqrt(n) support cap
# ---------------------------------------------------------------------------


def s_nk(n: int, k: int) -> float:
    """log of ``C(n,k) * 2^k / (k+1)!``.

    Union bound on the expected number of size-k index sets whose centred
    submatrix admits the pairwise dominance pattern forced by second-order
    optimality.
    """
    if not 1 <= k <= n:
        raise DomainError("need 1 <= k <= n")
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
                 + k * math.log(2.0) - gammaln(k + 2))


def s_nk_tail(n: int, k_from: int) -> float:
    """``sum_{k >= k_from} exp(s_nk(n, k))`` in the linear domain."""
    if not 1 <= k_from <= n:
        raise DomainError("need 1 <= k_from <= n")
    ks = np.arange(k_from, n + 1, dtype=float)
    logs = (gammaln(n + 1) - gammaln(ks + 1) - gammaln(n - ks + 1)
            + ks * math.log(2.0) - gammaln(ks + 2))
    return float(np.exp(logsumexp(logs)))


def gamma_alpha(alpha: float) -> float:
    """Negative exponent rate ``2*alpha*log(e*sqrt(2)/alpha)`` governing the
    probability that the support exceeds ``ceil(alpha*sqrt(n))``."""
    if alpha <= E_SQRT2:
        raise DomainError(f"alpha must exceed e*sqrt(2) ~= {E_SQRT2:.5f}")
    return 2.0 * alpha * math.log(E_SQRT2 / alpha)


def pairwise_dominance_bound(n: int) -> float:
    """log of ``2^n / (n+1)!``: bound for the probability that every
    off-diagonal entry is at most the larger of its two diagonal entries."""
    if n < 2:
        raise DomainError("need n >= 2")
    return float(n * math.log(2.0) - gammaln(n + 2))


def delta_n(n: int, k_n: int) -> DeltaThreshold:
    """Order-statistic truncation threshold ``2.1 * k_n * log(n) / n``,
    clamped into (0, 1) with a flag when the raw value is out of range."""
    if n < 2:
        raise DomainError("need n >= 2")
    raw = 2.1 * k_n * math.log(n) / n
    if raw >= 1.0:
        return DeltaThreshold(1.0 - 1e-12, True)
    return DeltaThreshold(raw, False)


# ---------------------------------------------------------------------------
# exponential decay constant and face-weight minorant
# ---------------------------------------------------------------------------


def c_nu(nu: float, method: str = "quadrature") -> float:
    """Decay constant ``int_0^1 log(1 + x^nu) dx``.

    ``method="series"`` evaluates the alternating series
    ``sum_j (-1)^(j-1) / (j*(nu*j + 1))`` instead; the two agree to 1e-10
    and serve as mutual cross-checks.
    """
    if nu <= 0:
        raise DomainError("need nu > 0")
    if method == "quadrature":
        val, _ = quad(lambda x: math.log1p(x ** nu), 0.0, 1.0,
                      epsabs=1e-13, epsrel=1e-13, limit=200)
        return float(val)
    if method == "series":
        n_terms = int(min(4.0e6, max(1000.0, math.ceil(math.sqrt(1.0 / (nu * 2e-13))))))
        j = np.arange(1, n_terms + 1, dtype=float)
        t = 1.0 / (j * (nu * j + 1.0))
        return float(t[::2].sum() - t[1::2].sum())
    raise DomainError(f"unknown method {method!r}")


def gamma_weights(k: int, nu: float, gamma_total: float) -> np.ndarray:
    """Telescoping weights ``gamma * [(1-(j-1)/k)^nu - (1-j/k)^nu]``.

    They sum to ``gamma_total`` and minorise the face functional:
    ``phi(u) >= sum_j gamma_j u_j`` for sorted u (requires nu >= 1).
    """
    if k < 1:
        raise DomainError("need k >= 1")
    if nu < 1.0:
        raise DomainError("weights are only valid for nu >= 1")
    if gamma_total <= 0:
        raise DomainError("need gamma_total > 0")
    j = np.arange(1, k + 1, dtype=float)
    w = (1.0 - (j - 1.0) / k) ** nu - (1.0 - j / k) ** nu
    return gamma_total * w


def log_sf(spec: DistributionSpec, x):
    """``log(1 - F(x))`` with the stable branch on either side of 1/2."""
    c = cdf(spec, x)
    with np.errstate(divide="ignore"):
        return np.where(c < 0.5, np.log1p(-np.minimum(c, 0.5)),
                        np.log(np.maximum(sf(spec, x), 0.0)))


def phi_of_u(spec_f: DistributionSpec, u) -> PhiValue:
    """``F`` of the average quantile: ``F(k^{-1} sum_j F^{-1}(u_j))``."""
    u = np.asarray(u, dtype=float)
    m = float(np.mean(quantile(spec_f, u)))
    return PhiValue(float(cdf(spec_f, m)), float(log_cdf(spec_f, m)))


# ---------------------------------------------------------------------------
# Monte Carlo estimators
# ---------------------------------------------------------------------------


def mc_key_expectation(spec_g: DistributionSpec, spec_f: DistributionSpec,
                       n: int, k: int, reps: int, seed: int) -> MCEstimate:
    """Estimate ``E[(1 - G(k^{-1} sum_j F^{-1}(U_j)))^n]``.

    Equals the probability that the sum of the k smallest of n-1
    off-diagonal values drops below k times the smallest of n diagonal
    values.  The n-th power is taken as ``exp(n*log(1-G))`` to survive
    G values within 1e-300 of 0 or 1.
    """
    if reps < 1000:
        raise DomainError("need reps >= 1000")
    if not 1 <= k <= n - 1:
        raise DomainError("need 1 <= k <= n-1")
    gen = rng_mod.stream(seed, 0x6B65)
    u = order_stats_batch(n - 1, k, reps, gen)
    means = quantile(spec_f, u).mean(axis=1)
    vals = np.exp(n * log_sf(spec_g, means))
    se = float(vals.std(ddof=1) / math.sqrt(reps))
    return MCEstimate(float(vals.mean()), se, reps, seed)


def h_nk(spec_g: DistributionSpec, n: int, k: int, w: float,
         quad_tol: float = 1e-10) -> float:
    """Integrand of the residual union-bound term:

    ``H(w) = -(1-G(w/k))^n/(n-1)
             + n(k+1)/(n-1) * int_{w/k}^inf g((k+1)v - w) (1-G(v))^{n-1} dv``
    """
    if k < 1 or n < 2:
        raise DomainError("need k >= 1 and n >= 2")
    impl = spec_g.impl()
    lo = w / k
    first = -math.exp(n * float(log_sf(spec_g, lo))) / (n - 1)

    def integrand(v):
        arg = (k + 1) * v - w
        g = float(density(spec_g, arg))
        if g == 0.0:
            return 0.0
        return g * math.exp((n - 1) * float(log_sf(spec_g, v)))

    sup_lo, sup_hi = impl.support
    breaks = []
    if math.isfinite(sup_hi):
        hi = min(sup_hi, (sup_hi + w) / (k + 1))
        if hi <= lo:
            return first
    else:
        hi = lo + 1.0
        peak = max(integrand(lo), integrand(lo + 0.5), 1e-300)
        while integrand(hi) > 1e-18 * peak and hi < lo + 1e6:
            hi = lo + 2.0 * (hi - lo)
    for edge in (sup_lo, sup_hi):
        if math.isfinite(edge):
            for v in (edge, (edge + w) / (k + 1)):
                if lo < v < hi:
                    breaks.append(v)
    integral, _ = quad(integrand, lo, hi, points=sorted(breaks) or None,
                       limit=300, epsabs=1e-14, epsrel=quad_tol)
    return first + n * (k + 1) / (n - 1) * integral


def mc_rho_hat(spec_g: DistributionSpec, spec_f: DistributionSpec,
               n: int, k: int, reps: int, seed: int) -> MCEstimate:
    """Estimate ``(n-1) * E[H_{n,k}(Wbar_k)]`` with ``Wbar_k`` the sum of the
    k smallest of n-1 iid F draws."""
    if reps < 100:
        raise DomainError("need reps >= 100")
    gen = rng_mod.stream(seed, 0x7268)
    u = order_stats_batch(n - 1, k, reps, gen)
    wbar = quantile(spec_f, u).sum(axis=1)
    vals = np.array([(n - 1) * h_nk(spec_g, n, k, float(wi)) for wi in wbar])
    se = float(vals.std(ddof=1) / math.sqrt(reps))
    return MCEstimate(float(vals.mean()), se, reps, seed)


# ---------------------------------------------------------------------------
# tail-parameter arithmetic
# ---------------------------------------------------------------------------


def support_tail_bound(n: int, k: int, a: float, b: float,
                       denom_c: float = 2.0) -> TailBound:
    """Bound ``n*(8/9)^(k/4) + n*exp(-k*(log(n/k))^min(0,a/b) / (denom_c*e))``
    for the probability of support size k+1, valid for tail power b > 1.

    ``denom_c`` defaults to 2; values in (3/2, 2) tighten the second term
    at the cost of the hidden constant.
    """
    if b <= 1.0:
        raise DomainError("this bound requires tail power b > 1")
    if not 1 <= k < n:
        raise DomainError("need 1 <= k < n")
    p = min(0.0, a / b)
    log_n = math.log(n)
    t1 = log_n + (k / 4.0) * math.log(8.0 / 9.0)
    t2 = log_n - k * math.log(n / k) ** p / (denom_c * math.e)
    log_value = float(logsumexp([t1, t2]))
    return TailBound(math.exp(log_value), log_value)


def sigma_ab(a: float, b: float) -> float:
    """Smallest admissible exponent ``sigma`` for the polylog regime:
    ``1 + (1+2a)/b`` for a > 0, ``1 + (1+|a|)/b`` otherwise (b <= 1)."""
    if not 0.0 < b <= 1.0:
        raise DomainError("need 0 < b <= 1")
    if a > 0:
        return 1.0 + (1.0 + 2.0 * a) / b
    return 1.0 + (1.0 + abs(a)) / b


def polylog_support_bound(n: int, d: float) -> PolylogBound:
    """Bound ``exp(-(log n)^(1+d))`` for the probability that the support
    exceeds ``(log n)^(1+d)``; the admissibility window for d is reported
    by callers, not enforced here."""
    if n < 3:
        raise DomainError("need n >= 3")
    if d <= 0:
        raise DomainError("need d > 0")
    threshold = math.log(n) ** (1.0 + d)
    return PolylogBound(math.exp(-threshold), threshold)


def convolved_tail_params(a: float, b: float) -> ConvolvedTail:
    """Tail parameters of the half-sum convolution ``(G*G)(2x)``.

    For entry tail ``|x|^a exp(-|x|^b)`` the symmetrised matrix has
    off-diagonal tail ``|x|^a' exp(-r'|x|^b)`` with ``r' = 2^min(1,b)`` and
    ``a'`` depending on the branch of b; requires a > -1 when b <= 1.
    """
    if b <= 0:
        raise DomainError("need b > 0")
    if b <= 1.0 and a <= -1.0:
        raise DomainError("need a > -1 when b <= 1")
    if b > 1.0:
        a_prime = 2.0 * a + b / 2.0
    elif b < 1.0:
        a_prime = a + b - 1.0
    else:
        a_prime = 2.0 * a + 1.0
    return ConvolvedTail(a_prime, 2.0 ** min(1.0, b))


def euler_gamma_moments() -> tuple:
    """First two log-moments of a unit exponential, by quadrature.

    Returns ``(E[log w], E[log^2 w]) = (Gamma'(1), Gamma''(1))``, i.e.
    ``(-euler_gamma, euler_gamma^2 + pi^2/6)``.  The substitution
    ``w = exp(t)`` removes the endpoint singularity.
    """
    m1, _ = quad(lambda t: math.exp(t - math.exp(t)) * t, -60.0, 40.0,
                 epsabs=1e-13, epsrel=1e-13, limit=300)
    m2, _ = quad(lambda t: math.exp(t - math.exp(t)) * t * t, -60.0, 40.0,
                 epsabs=1e-13, epsrel=1e-13, limit=300)
    return float(m1), float(m2)


# ---------------------------------------------------------------------------
# face-weight minorant verification
# ---------------------------------------------------------------------------


def edge_ratio_bounds(spec_f: DistributionSpec, delta: float, nu: float) -> EdgeRatio:
    """Extremes of ``F(x)/x^nu`` on ``(0, F^{-1}(delta)]``.

    The supremum is infinite whenever ``nu`` exceeds the family's true edge
    power (the ratio blows up at 0), in which case ``gamma = 0`` and the
    minorant degenerates to the trivial bound.
    """
    edge = spec_f.edge
    if edge is None:
        raise UnsupportedFamilyError("family has no left-edge expansion")
    if not 0.0 < delta < 1.0:
        raise DomainError("need delta in (0, 1)")
    x_hi = float(quantile(spec_f, delta))
    if nu == edge.nu:
        limit0 = edge.rho
    elif nu > edge.nu:
        limit0 = math.inf
    else:
        limit0 = 0.0
    xs = np.linspace(x_hi * 1e-6, x_hi, 4097)
    ratio = cdf(spec_f, xs) / xs ** nu
    lo = min(float(ratio.min()), limit0)
    hi = max(float(ratio.max()), limit0)
    gamma = lo / hi if (lo > 0.0 and math.isfinite(hi)) else 0.0
    return EdgeRatio(lo, hi, gamma)


def phi_lower_bound_check(spec_f: DistributionSpec, k: int, delta: float,
                          trials: int, seed: int, nu: Optional[float] = None,
                          tol: float = 1e-10) -> int:
    """Count violations of ``phi(u) >= sum_j gamma_j u_j`` over random draws
    of sorted ``u`` with ``u_k <= delta``.

    The scalar ``gamma`` comes from the exact ratio extremes of the family's
    edge; the weight profile may use any ``nu >= 1`` (the bound is valid for
    every admissible profile, degenerating to 0 when the ratio is unbounded
    at that power).  A correct implementation returns 0.
    """
    if nu is None:
        nu = spec_f.edge.nu if spec_f.edge is not None else 1.0
    if nu < 1.0:
        raise DomainError("minorant requires nu >= 1")
    ratios = edge_ratio_bounds(spec_f, delta, nu)
    gen = rng_mod.stream(seed, 0x7068)
    u = np.sort(gen.uniform(0.0, delta, size=(trials, k)), axis=1)
    u = np.maximum(u, 1e-300)
    phis = cdf(spec_f, quantile(spec_f, u).mean(axis=1))
    if ratios.gamma == 0.0:
        rhs = np.zeros(trials)
    else:
        rhs = u @ gamma_weights(k, nu, ratios.gamma)
    return int(np.count_nonzero(phis < rhs - tol))
