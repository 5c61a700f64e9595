"""Distribution families used by the random-matrix models.

Each family provides a cdf, a survival function, a log-domain cdf (the left
tails reach below 1e-300 in the regimes we probe), a density, a quantile,
and a sampler.  Two parameter records describe the analytic behaviour the
rest of the package relies on:

* :class:`TailParams` -- left-tail shape ``c * |x - x0|^a * exp(-r|x - x0|^b)``
  for laws supported down to minus infinity.
* :class:`LeftEdgeParams` -- edge shape ``rho * x^nu`` near a finite left
  endpoint (normalised to 0), plus the dominated-variation constant of the
  density.

The ``exp_tail`` family realises a *given* tail record exactly: its cdf
equals the tail expression on ``(-inf, x0 + y_cut]`` and is completed by an
exponential piece on the right, which keeps every tail computation in this
package closed-form in log space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import DomainError, UnsupportedFamilyError

__all__ = [
    "TailParams",
    "LeftEdgeParams",
    "Role",
    "DistributionSpec",
    "OrderStatSample",
    "cdf",
    "sf",
    "log_cdf",
    "density",
    "log_density",
    "quantile",
    "sample",
    "sample_order_stats",
    "order_stats_batch",
    "s_statistic",
    "dominated_variation_beta",
    "spec_to_dict",
    "spec_from_dict",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TailParams:
    """Left-tail shape ``c*|x-x0|^a*exp(-r*|x-x0|^b)`` as ``x -> -inf``.

    ``kappa`` is the power of the relative correction term: the stated form
    holds up to a factor ``1 + O(|x|^-kappa)``.
    """

    a: float
    b: float
    c: float
    r: float = 1.0
    x0: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (self.b > 0 and self.c > 0 and self.r > 0 and self.kappa > 0):
            raise DomainError("tail params require b, c, r, kappa > 0")


@dataclass(frozen=True)
class LeftEdgeParams:
    """Edge shape ``F(x) = rho*x^nu + O(x^(nu+1))`` at a finite left endpoint.

    The endpoint is normalised to ``A = 0``; ``B`` may be ``inf``.  ``beta``
    is the supremum of density ratios ``f(x')/f(x)`` over ``x' in [x, 2x]``,
    which is >= 1 because the interval contains ``x' = x``.
    """

    nu: float
    rho: float = 1.0
    beta: float = 1.0
    A: float = 0.0
    B: float = math.inf

    def __post_init__(self):
        if not (self.nu > 0 and self.rho > 0):
            raise DomainError("edge params require nu > 0 and rho > 0")
        if self.beta < 1.0:
            raise DomainError("dominated-variation constant beta must be >= 1")


class Role(str, Enum):
    """Intended slot of a spec inside a random matrix."""

    DIAGONAL = "diagonal"
    OFFDIAGONAL = "offdiagonal"


# ---------------------------------------------------------------------------
# family implementations
# ---------------------------------------------------------------------------


class _Uniform01:
    support = (0.0, 1.0)
    edge = LeftEdgeParams(nu=1.0, rho=1.0, beta=1.0, B=1.0)
    tail = None

    @staticmethod
    def cdf(x):
        return np.clip(x, 0.0, 1.0)

    @staticmethod
    def sf(x):
        return np.clip(1.0 - np.asarray(x, dtype=float), 0.0, 1.0)

    @staticmethod
    def log_cdf(x):
        with np.errstate(divide="ignore"):
            return np.log(np.clip(x, 0.0, 1.0))

    @staticmethod
    def density(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0.0) & (x <= 1.0), 1.0, 0.0)

    @staticmethod
    def quantile(u):
        return np.asarray(u, dtype=float)

    @staticmethod
    def sample(size, rng):
        return rng.random(size)


class _Exponential:
    support = (0.0, math.inf)
    edge = LeftEdgeParams(nu=1.0, rho=1.0, beta=1.0, B=math.inf)
    tail = None

    @staticmethod
    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0.0, -np.expm1(-np.maximum(x, 0.0)), 0.0)

    @staticmethod
    def sf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0.0, np.exp(-np.maximum(x, 0.0)), 1.0)

    @staticmethod
    def log_cdf(x):
        with np.errstate(divide="ignore"):
            return np.log(_Exponential.cdf(x))

    @staticmethod
    def density(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, np.exp(-np.maximum(x, 0.0)), 0.0)

    @staticmethod
    def quantile(u):
        return -np.log1p(-np.asarray(u, dtype=float))

    @staticmethod
    def sample(size, rng):
        return rng.standard_exponential(size)


class _LeftBoundedPower:
    """Pure power law ``F(x) = rho*x^nu`` on ``[0, rho^(-1/nu)]``."""

    tail = None

    def __init__(self, nu: float, rho: float = 1.0):
        if nu <= 0 or rho <= 0:
            raise DomainError("power family requires nu > 0 and rho > 0")
        self.nu = float(nu)
        self.rho = float(rho)
        self.B = rho ** (-1.0 / nu)
        self.support = (0.0, self.B)
        beta = max(1.0, 2.0 ** (nu - 1.0))
        self.edge = LeftEdgeParams(nu=nu, rho=rho, beta=beta, B=self.B)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip(self.rho * np.maximum(x, 0.0) ** self.nu, 0.0, 1.0)

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def log_cdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.cdf(x))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0.0) & (x <= self.B)
        with np.errstate(invalid="ignore"):
            d = self.nu * self.rho * np.maximum(x, 0.0) ** (self.nu - 1.0)
        return np.where(inside, d, 0.0)

    def quantile(self, u):
        return (np.asarray(u, dtype=float) / self.rho) ** (1.0 / self.nu)

    def sample(self, size, rng):
        return self.quantile(rng.random(size))


class _Normal:
    support = (-math.inf, math.inf)
    edge = None
    tail = TailParams(a=-1.0, b=2.0, c=1.0 / _SQRT_2PI, r=0.5, x0=0.0, kappa=2.0)

    @staticmethod
    def cdf(x):
        return ndtr(np.asarray(x, dtype=float))

    @staticmethod
    def sf(x):
        return ndtr(-np.asarray(x, dtype=float))

    @staticmethod
    def log_cdf(x):
        return log_ndtr(np.asarray(x, dtype=float))

    @staticmethod
    def density(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x) / _SQRT_2PI

    @staticmethod
    def quantile(u):
        return ndtri(np.asarray(u, dtype=float))

    @staticmethod
    def sample(size, rng):
        return rng.standard_normal(size)


class _TwoSidedExponential:
    """Unit Laplace law; the left tail is exactly ``0.5*exp(-|x|)``."""

    support = (-math.inf, math.inf)
    edge = None
    tail = TailParams(a=0.0, b=1.0, c=0.5, r=1.0, x0=0.0, kappa=1.0)

    @staticmethod
    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 0.5 * np.exp(np.minimum(x, 0.0)),
                        1.0 - 0.5 * np.exp(-np.maximum(x, 0.0)))

    @staticmethod
    def sf(x):
        return _TwoSidedExponential.cdf(-np.asarray(x, dtype=float))

    @staticmethod
    def log_cdf(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            right = np.log1p(-0.5 * np.exp(-np.maximum(x, 0.0)))
        return np.where(x < 0.0, math.log(0.5) + np.minimum(x, 0.0), right)

    @staticmethod
    def density(x):
        return 0.5 * np.exp(-np.abs(np.asarray(x, dtype=float)))

    @staticmethod
    def quantile(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            lo = np.log(2.0 * u)
            hi = -np.log(2.0 * (1.0 - u))
        return np.where(u < 0.5, lo, hi)

    @staticmethod
    def sample(size, rng):
        return _TwoSidedExponential.quantile(rng.random(size))


class _Cosh:
    """Hyperbolic-secant law: density ``1/(pi*cosh x)``.

    Left tail ``(2/pi)*exp(x)*(1 + O(exp(2x)))``, i.e. a = 0, b = 1.
    """

    support = (-math.inf, math.inf)
    edge = None
    tail = TailParams(a=0.0, b=1.0, c=2.0 / math.pi, r=1.0, x0=0.0, kappa=2.0)

    @staticmethod
    def cdf(x):
        x = np.asarray(x, dtype=float)
        return (2.0 / math.pi) * np.arctan(np.exp(np.minimum(x, 700.0)))

    @staticmethod
    def sf(x):
        return _Cosh.cdf(-np.asarray(x, dtype=float))

    @staticmethod
    def log_cdf(x):
        x = np.asarray(x, dtype=float)
        # arctan(e^x) = e^x * (1 - e^2x/3 + ...) keeps precision for x << 0
        small = x < -20.0
        with np.errstate(over="ignore"):
            generic = np.log(_Cosh.cdf(np.where(small, 0.0, x)))
        return np.where(small, math.log(2.0 / math.pi) + x, generic)

    @staticmethod
    def density(x):
        return 1.0 / (math.pi * np.cosh(np.asarray(x, dtype=float)))

    @staticmethod
    def quantile(u):
        u = np.asarray(u, dtype=float)
        return np.log(np.tan(0.5 * math.pi * u))

    @staticmethod
    def sample(size, rng):
        return _Cosh.quantile(rng.random(size))


class _ExpTail:
    """Law whose cdf *equals* ``c|y|^a exp(-r|y|^b)``, ``y = x - x0``, on
    ``(-inf, x0 + y_cut]``, completed by an exponential approach to 1.

    ``y_cut`` is chosen so the tail expression is increasing and at most
    1/4 (or ``c`` when ``a == 0`` and ``c <= 1/2``) at the junction.
    """

    edge = None

    def __init__(self, params: TailParams):
        self.params = params
        a, b, c, r = params.a, params.b, params.c, params.r
        if a == 0.0 and c <= 0.5:
            s = 0.0
        else:
            s = 1.0
            if a > 0:
                s = max(s, (2.0 * a / (r * b)) ** (1.0 / b))
            while c * s ** a * math.exp(-r * s ** b) > 0.25:
                s *= 1.5
        self.y_cut = -s
        self.log_fcut = self._log_tail(self.y_cut)
        self.f_cut = math.exp(self.log_fcut)
        g_cut = self._tail_density(self.y_cut) if s > 0 else (
            c * r if b == 1.0 else math.inf)
        if math.isfinite(g_cut) and g_cut > 0:
            self.beta = g_cut / (1.0 - self.f_cut)
        else:
            self.beta = 1.0
        self.support = (-math.inf, math.inf)
        self.tail = params

    # tail expression in log domain, y <= y_cut (scalar or array)
    def _log_tail(self, y):
        p = self.params
        ay = np.abs(y)
        with np.errstate(divide="ignore"):
            return math.log(p.c) + p.a * np.log(ay) - p.r * ay ** p.b

    def _tail_density(self, y):
        p = self.params
        ay = np.abs(y)
        return np.exp(self._log_tail(y)) * (p.r * p.b * ay ** p.b - p.a) / ay

    def log_cdf(self, x):
        y = np.asarray(x, dtype=float) - self.params.x0
        left = y <= self.y_cut
        yl = np.where(left, y, self.y_cut)
        yr = np.where(left, self.y_cut, y)
        with np.errstate(divide="ignore"):
            right = np.log1p(-(1.0 - self.f_cut) * np.exp(-self.beta * (yr - self.y_cut)))
        return np.where(left, self._log_tail(yl), right)

    def cdf(self, x):
        return np.exp(self.log_cdf(x))

    def sf(self, x):
        y = np.asarray(x, dtype=float) - self.params.x0
        left = y <= self.y_cut
        yl = np.where(left, y, self.y_cut)
        yr = np.where(left, self.y_cut, y)
        right = (1.0 - self.f_cut) * np.exp(-self.beta * (yr - self.y_cut))
        return np.where(left, 1.0 - np.exp(self._log_tail(yl)), right)

    def density(self, x):
        y = np.asarray(x, dtype=float) - self.params.x0
        left = y <= self.y_cut
        yl = np.where(left, np.minimum(y, -1e-300), self.y_cut - 1.0)
        yr = np.where(left, self.y_cut, y)
        right = (1.0 - self.f_cut) * self.beta * np.exp(-self.beta * (yr - self.y_cut))
        return np.where(left, self._tail_density(yl), right)

    def log_density(self, x):
        p = self.params
        y = np.asarray(x, dtype=float) - p.x0
        left = y <= self.y_cut
        yl = np.where(left, np.minimum(y, -1e-300), self.y_cut - 1.0)
        yr = np.where(left, self.y_cut, y)
        ay = np.abs(yl)
        with np.errstate(divide="ignore"):
            lt = self._log_tail(yl) + np.log(p.r * p.b * ay ** p.b - p.a) - np.log(ay)
        lr = math.log((1.0 - self.f_cut) * self.beta) - self.beta * (yr - self.y_cut)
        return np.where(left, lt, lr)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        left = u <= self.f_cut
        if np.any(left):
            out[left] = self._tail_quantile(u[left])
        if np.any(~left):
            ur = u[~left]
            out[~left] = self.y_cut - np.log((1.0 - ur) / (1.0 - self.f_cut)) / self.beta
        return (out + self.params.x0) if u.ndim else float(out + self.params.x0)

    def _tail_quantile(self, u):
        """Solve ``a*log s - r*s^b = log(u/c)`` for ``s = |y|`` (decreasing
        in s on the tail piece); bisection bracket then Newton polish."""
        p = self.params
        t = np.log(u) - math.log(p.c)

        def h(s):
            with np.errstate(divide="ignore"):
                return p.a * np.log(s) - p.r * s ** p.b

        lo = np.full_like(t, max(-self.y_cut, 1e-12))
        hi = np.maximum(2.0 * lo, (np.maximum(-t + abs(p.a) + 1.0, 1.0) / p.r) ** (1.0 / p.b))
        for _ in range(100):
            bad = h(hi) > t
            if not np.any(bad):
                break
            hi = np.where(bad, hi * 2.0, hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            high_side = h(mid) > t
            lo = np.where(high_side, mid, lo)
            hi = np.where(high_side, hi, mid)
        s = 0.5 * (lo + hi)
        for _ in range(4):
            hp = p.a / s - p.r * p.b * s ** (p.b - 1.0)
            step = (h(s) - t) / hp
            s_new = s - step
            s = np.where((s_new >= lo) & (s_new <= hi), s_new, s)
        return -s

    def sample(self, size, rng):
        return self.quantile(rng.random(size))


_FIXED_FAMILIES = {
    "uniform01": _Uniform01(),
    "exponential": _Exponential(),
    "normal": _Normal(),
    "two_sided_exponential": _TwoSidedExponential(),
    "cosh": _Cosh(),
}


@dataclass(frozen=True)
class DistributionSpec:
    """A distribution family plus parameters, with an intended matrix role.

    ``family`` is one of ``uniform01``, ``exponential``, ``normal``,
    ``two_sided_exponential``, ``cosh``, ``left_bounded_power`` (params
    ``nu``, ``rho``) or ``exp_tail`` (params ``a``, ``b``, ``c``, ``r``,
    ``x0``, ``kappa``).
    """

    family: str
    role: Role = Role.OFFDIAGONAL
    edge: Optional[LeftEdgeParams] = None
    tail: Optional[TailParams] = None

    def __post_init__(self):
        if self.family in _FIXED_FAMILIES:
            impl = _FIXED_FAMILIES[self.family]
            object.__setattr__(self, "edge", impl.edge)
            object.__setattr__(self, "tail", impl.tail)
        elif self.family == "left_bounded_power":
            if self.edge is None:
                raise DomainError("left_bounded_power requires edge params")
            object.__setattr__(self, "tail", None)
        elif self.family == "exp_tail":
            if self.tail is None:
                raise DomainError("exp_tail requires tail params")
            object.__setattr__(self, "edge", None)
        else:
            raise UnsupportedFamilyError(f"unknown family {self.family!r}")

    # -- constructors -------------------------------------------------
    @staticmethod
    def uniform01(role: Role = Role.OFFDIAGONAL) -> "DistributionSpec":
        return DistributionSpec("uniform01", role)

    @staticmethod
    def exponential(role: Role = Role.OFFDIAGONAL) -> "DistributionSpec":
        return DistributionSpec("exponential", role)

    @staticmethod
    def normal(role: Role = Role.OFFDIAGONAL) -> "DistributionSpec":
        return DistributionSpec("normal", role)

    @staticmethod
    def two_sided_exponential(role: Role = Role.OFFDIAGONAL) -> "DistributionSpec":
        return DistributionSpec("two_sided_exponential", role)

    @staticmethod
    def cosh(role: Role = Role.OFFDIAGONAL) -> "DistributionSpec":
        return DistributionSpec("cosh", role)

    @staticmethod
    def left_bounded_power(nu: float, rho: float = 1.0,
                           role: Role = Role.OFFDIAGONAL) -> "DistributionSpec":
        impl = _LeftBoundedPower(nu, rho)
        return DistributionSpec("left_bounded_power", role, edge=impl.edge)

    @staticmethod
    def exp_tail(a: float, b: float, c: float = 0.25, r: float = 1.0,
                 x0: float = 0.0, kappa: float = 1.0,
                 role: Role = Role.OFFDIAGONAL) -> "DistributionSpec":
        return DistributionSpec("exp_tail", role,
                                tail=TailParams(a=a, b=b, c=c, r=r, x0=x0, kappa=kappa))

    def impl(self):
        if self.family in _FIXED_FAMILIES:
            return _FIXED_FAMILIES[self.family]
        if self.family == "left_bounded_power":
            return _LeftBoundedPower(self.edge.nu, self.edge.rho)
        return _ExpTail(self.tail)

    @property
    def support(self):
        return self.impl().support


# ---------------------------------------------------------------------------
# spec-level operations
# ---------------------------------------------------------------------------


def cdf(spec: DistributionSpec, x):
    """Distribution function; total on the reals, monotone, values in [0,1]."""
    return spec.impl().cdf(x)


def sf(spec: DistributionSpec, x):
    """Survival function ``1 - F(x)``, computed without cancellation."""
    return spec.impl().sf(x)


def log_cdf(spec: DistributionSpec, x):
    """``log F(x)``; exact deep in the left tail where ``F`` underflows."""
    return spec.impl().log_cdf(x)


def density(spec: DistributionSpec, x):
    return spec.impl().density(x)


def log_density(spec: DistributionSpec, x):
    """``log f(x)``; exact in the deep tail for the exp_tail family."""
    impl = spec.impl()
    if hasattr(impl, "log_density"):
        return impl.log_density(x)
    with np.errstate(divide="ignore"):
        return np.log(impl.density(x))


def quantile(spec: DistributionSpec, u):
    """Inverse cdf; strictly increasing, ``|F(quantile(u)) - u| <= 1e-12``.

    Raises :class:`DomainError` unless ``u`` lies in the open interval (0,1).
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("quantile argument must lie in (0, 1)")
    out = spec.impl().quantile(arr)
    return float(out) if np.ndim(u) == 0 else out


def sample(spec: DistributionSpec, size, rng: np.random.Generator):
    return spec.impl().sample(size, rng)


# ---------------------------------------------------------------------------
# order statistics of uniforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrderStatSample:
    """First ``k`` order statistics of ``n_pop`` iid uniforms on (0,1).

    ``spacings`` keeps the k unit exponentials behind the sample for
    diagnostics when the sample came from the spacings construction.
    """

    n_pop: int
    k: int
    u: np.ndarray
    spacings: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (1 <= self.k <= self.n_pop):
            raise DomainError("order-statistic sample requires 1 <= k <= n_pop")
        u = np.asarray(self.u, dtype=float)
        if u.shape != (self.k,):
            raise DomainError("u must have length k")
        if not (np.all(u > 0.0) and np.all(u < 1.0) and np.all(np.diff(u) >= 0.0)):
            raise DomainError("u must be sorted and inside (0, 1)")


def sample_order_stats(n_pop: int, k: int, rng: np.random.Generator,
                       spacings=None) -> OrderStatSample:
    """Draw the first ``k`` order statistics of ``n_pop`` iid uniforms.

    Uses the renewal representation: with ``w_1, ..., w_{n_pop+1}`` iid unit
    exponentials and partial sums ``W_i``, the vector ``W_i / W_{n_pop+1}``
    is distributed as the full set of order statistics.  Only the first
    ``k`` spacings are materialised; the remaining ``n_pop + 1 - k`` are
    drawn as one gamma variate.

    ``spacings`` is a test hook: a full vector of ``n_pop + 1`` spacings to
    use instead of random draws.
    """
    if not 1 <= k <= n_pop:
        raise DomainError(f"need 1 <= k <= n_pop, got k={k}, n_pop={n_pop}")
    if spacings is not None:
        w = np.asarray(spacings, dtype=float)
        if w.shape != (n_pop + 1,) or np.any(w <= 0):
            raise DomainError("spacings must be n_pop + 1 positive values")
        head, total = w[:k], float(w.sum())
    else:
        head = rng.standard_exponential(k)
        total = float(head.sum() + rng.standard_gamma(n_pop + 1 - k))
    u = np.cumsum(head) / total
    return OrderStatSample(n_pop=n_pop, k=k, u=u, spacings=head.copy())


def order_stats_batch(n_pop: int, k: int, reps: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Vectorised :func:`sample_order_stats`: a ``(reps, k)`` array."""
    if not 1 <= k <= n_pop:
        raise DomainError(f"need 1 <= k <= n_pop, got k={k}, n_pop={n_pop}")
    w = rng.standard_exponential((reps, k))
    tail = rng.standard_gamma(n_pop + 1 - k, size=reps)
    total = w.sum(axis=1) + tail
    return np.cumsum(w, axis=1) / total[:, None]


def s_statistic(sample) -> float:
    """Average log-reciprocal ``(1/k) * sum_j log(1/u_j)`` of the sample.

    Accepts an :class:`OrderStatSample` or a bare array; zero entries are a
    domain error.
    """
    u = sample.u if isinstance(sample, OrderStatSample) else np.asarray(sample, dtype=float)
    if np.any(u <= 0.0):
        raise DomainError("s_statistic requires strictly positive entries")
    return float(-np.mean(np.log(u)))


# ---------------------------------------------------------------------------
# dominated variation of the density
# ---------------------------------------------------------------------------

_DV_FAMILIES = ("uniform01", "exponential", "left_bounded_power")


def dominated_variation_beta(spec: DistributionSpec, j: float,
                             grid: int = 512) -> float:
    """Grid estimate of ``sup f(x')/f(x)`` over ``x' in [x, j*x]``.

    Only families with a positive density on an interval ``(0, B)`` are
    supported.  The estimate is nondecreasing in ``j`` and approximately
    sub-multiplicative: ``beta(j1*j2) <= beta(j1)*beta(j2)`` up to grid
    resolution.
    """
    if j <= 1.0:
        raise DomainError("ratio horizon j must exceed 1")
    if spec.family not in _DV_FAMILIES:
        raise UnsupportedFamilyError(
            f"{spec.family} has no density on an interval (0, B)")
    impl = spec.impl()
    b_sup = impl.support[1]
    x_max = b_sup * (1.0 - 1e-9) if math.isfinite(b_sup) else float(quantile(spec, 1.0 - 1e-6))
    x = np.logspace(math.log10(x_max) - 7.0, math.log10(x_max), int(grid))
    mult = np.linspace(1.0, j, 64)
    xp = x[:, None] * mult[None, :]
    valid = xp <= x_max
    fx = impl.density(x)
    fxp = impl.density(np.where(valid, xp, x_max))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(valid & (fx[:, None] > 0.0), fxp / fx[:, None], 0.0)
    return float(ratio.max())


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def spec_to_dict(spec: DistributionSpec) -> dict:
    """Serialise as ``{"family": ..., "role": ..., "params": {...}}``."""
    params: dict = {}
    if spec.family == "left_bounded_power":
        params = {"nu": spec.edge.nu, "rho": spec.edge.rho}
    elif spec.family == "exp_tail":
        params = asdict(spec.tail)
    return {"family": spec.family, "role": spec.role.value, "params": params}


def spec_from_dict(d: dict) -> DistributionSpec:
    family = d["family"]
    role = Role(d.get("role", Role.OFFDIAGONAL.value))
    params = d.get("params", {}) or {}
    if family == "left_bounded_power":
        return DistributionSpec.left_bounded_power(role=role, **params)
    if family == "exp_tail":
        return DistributionSpec.exp_tail(role=role, **params)
    return DistributionSpec(family, role)


def spec_to_json(spec: DistributionSpec) -> str:
    return json.dumps(spec_to_dict(spec), sort_keys=True)


def spec_from_json(text: str) -> DistributionSpec:
    return spec_from_dict(json.loads(text))
