"""Certified global minimisation of ``x^T Q x`` over the probability simplex.

The optimum of the quadratic form over the simplex is attained at a point
that is interior-stationary on the face spanned by its support, so the
global problem reduces to sifting supports.  Enumerating all ``2^n - 1``
faces is hopeless beyond toy sizes; instead the search uses a hereditary
necessary condition implied by second-order optimality.  If ``x*`` is
optimal with support ``S`` and value ``lam*``, then ``Q_S - lam* E_S`` is
positive semidefinite.  Every principal submatrix inherits that, and the
optimal value is bounded below by the smallest matrix entry ``lam_lb``
(the form is an average of entries), so with ``E`` the all-ones matrix:

    ``Q_T - lam_lb * E  is PSD  for every subset T of S``.

The shift ``lam_lb`` is known up front, so a depth-first search that only
extends index sets keeping ``Q_T - lam_lb E`` positive semidefinite visits
every support that could be optimal.  The factor is maintained as an
incremental Cholesky; it also solves each face's stationarity system
``Q_T x = lam e`` in ``O(k^2)`` via ``x = M^{-1}e / (e^T M^{-1} e)`` and
``lam = lam_lb + 1/(e^T M^{-1} e)`` with ``M = Q_T - lam_lb E``.

Candidate faces are screened by strict positivity of the face weights,
the first-order condition ``(Qx)_i >= lam`` for every coordinate, and the
second-order condition above.  The minimum over screened candidates,
including the vertices, is the global optimum.

A brute-force oracle with no optimality shortcuts (all supports, bordered
solves, positivity only) is provided for cross-validation at small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import CostGuardError, DomainError, NumericalFailureError
from .instance import Instance

__all__ = [
    "POSITIVITY_TOL", "STATIONARITY_TOL", "FIRST_ORDER_TOL", "EIGENVALUE_TOL",
    "FaceSolveResult", "Solution",
    "face_solve", "check_first_order", "check_second_order",
    "check_row_mean_condition", "solve_global", "brute_force_oracle",
]

POSITIVITY_TOL = 1e-12
STATIONARITY_TOL = 1e-9
FIRST_ORDER_TOL = 1e-9
EIGENVALUE_TOL = 1e-8

_EXHAUSTIVE_N_CAP = 25
_ORACLE_N_CAP = 15
_DIMENSION_CAP = 2048


@dataclass(frozen=True)
class FaceSolveResult:
    """Outcome of the stationarity solve on one face.

    ``feasible`` means the bordered system was nonsingular and every weight
    strictly positive.  ``degenerate`` marks a singular system (skipped,
    not an error: boundary optima reappear on smaller faces).
    """

    feasible: bool
    x_k: Optional[np.ndarray]
    lam: Optional[float]
    degenerate: bool = False


@dataclass(frozen=True)
class Solution:
    """Optimal support, weights and value, with optimality certificates."""

    n: int
    support: tuple
    x: np.ndarray
    lambda_star: float
    first_order_slack: float
    second_order_mineig: float
    stationarity_residual: float
    certificate: str              # "exhaustive" or "size_bounded"
    k_max: Optional[int] = None   # cap when certificate == "size_bounded"
    cap_reached: bool = False     # search frontier saturated the cap

    @property
    def k(self) -> int:
        return len(self.support)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "support": [i + 1 for i in self.support],  # 1-based for humans
            "x": [float(v) for v in self.x],
            "lambda_star": self.lambda_star,
            "first_order_slack": self.first_order_slack,
            "second_order_mineig": self.second_order_mineig,
            "stationarity_residual": self.stationarity_residual,
            "certificate": self.certificate,
            "k_max": self.k_max,
            "cap_reached": self.cap_reached,
        }


def face_solve(q_k: np.ndarray, positivity_tol: float = POSITIVITY_TOL) -> FaceSolveResult:
    """Solve the interior stationarity system on one face.

    Solves the bordered linear system ``[Q_k, -e; e^T, 0] (x, lam) = (0, 1)``,
    i.e. ``Q_k x = lam e`` with ``e^T x = 1``.  Feasible iff nonsingular and
    all weights exceed ``positivity_tol``.
    """
    q_k = np.asarray(q_k, dtype=float)
    k = q_k.shape[0]
    if k < 1:
        raise DomainError("face must contain at least one index")
    if k == 1:
        return FaceSolveResult(True, np.array([1.0]), float(q_k[0, 0]))
    a = np.empty((k + 1, k + 1))
    a[:k, :k] = q_k
    a[:k, k] = -1.0
    a[k, :k] = 1.0
    a[k, k] = 0.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        return FaceSolveResult(False, None, None, degenerate=True)
    x, lam = sol[:k], float(sol[k])
    scale = max(1.0, float(np.abs(q_k).max()))
    if np.max(np.abs(q_k @ x - lam)) > 1e-6 * scale:
        return FaceSolveResult(False, None, None, degenerate=True)
    feasible = bool(np.all(x > positivity_tol))
    return FaceSolveResult(feasible, x, lam)


def check_first_order(q: np.ndarray, x: np.ndarray, lam: float) -> float:
    """Slack ``min_i (Qx)_i - lam`` of the first-order condition.

    At a global optimum the gradient coordinates off the support dominate
    ``lam`` and the support coordinates equal it, so the slack is >= 0 up
    to roundoff.
    """
    gx = np.asarray(q, dtype=float) @ np.asarray(x, dtype=float)
    return float(gx.min() - lam)


def check_second_order(q_k: np.ndarray, lam: float) -> float:
    """Minimum eigenvalue of ``Q_k - lam * E_k`` (E_k the all-ones matrix)."""
    q_k = np.asarray(q_k, dtype=float)
    k = q_k.shape[0]
    if k < 1:
        raise DomainError("face must contain at least one index")
    if k == 1:
        return float(q_k[0, 0] - lam)
    return float(np.linalg.eigvalsh(q_k - lam).min())


def check_row_mean_condition(q: np.ndarray, support) -> Optional[bool]:
    """Whether some support row has mean below the smallest diagonal entry.

    Necessary at any optimum with more than one positive coordinate.
    Returns ``None`` for singleton supports, where the condition does not
    apply.
    """
    support = sorted(int(i) for i in support)
    if len(support) <= 1:
        return None
    q = np.asarray(q, dtype=float)
    sub = q[np.ix_(support, support)]
    return bool(sub.mean(axis=1).min() < q.diagonal().min())


def _matrix_of(inst) -> np.ndarray:
    q = inst.q if isinstance(inst, Instance) else np.asarray(inst, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise DomainError("expected a square matrix")
    return q


def _better(lam, support, best_lam, best_sup):
    """Candidate ordering: smaller value wins; exact ties go to the
    lexicographically smallest support."""
    if lam < best_lam:
        return True
    return lam == best_lam and best_sup is not None and support < best_sup


def solve_global(inst, k_max: Optional[int] = None) -> Solution:
    """Global simplex minimum of the quadratic form, by pruned support search.

    ``k_max=None`` requests the unrestricted search (allowed up to n = 25;
    the certificate reads ``exhaustive``).  With an integer cap the search
    stops at supports of that size and the certificate reads
    ``size_bounded``; ``cap_reached`` reports whether any feasible set of
    the cap size existed, i.e. whether a larger optimal support is even
    conceivable.

    Raises :class:`NumericalFailureError` if no candidate passes the
    optimality screens (impossible in unrestricted mode short of numerical
    breakdown).
    """
    q = _matrix_of(inst)
    n = q.shape[0]
    if n > _DIMENSION_CAP:
        raise CostGuardError(f"dimension capped at {_DIMENSION_CAP}")
    if k_max is None:
        if n > _EXHAUSTIVE_N_CAP:
            raise CostGuardError(
                f"unrestricted search is limited to n <= {_EXHAUSTIVE_N_CAP}; pass k_max")
        kmax_eff = n
    else:
        k_max = int(k_max)
        if k_max < 1:
            raise DomainError("k_max must be at least 1")
        kmax_eff = min(k_max, n)
    exhaustive = kmax_eff >= n

    ql = q.tolist()
    diag = [ql[i][i] for i in range(n)]
    diag_arr = q.diagonal().copy()
    v1 = float(diag_arr.min())
    scale = max(1.0, float(np.abs(q).max()))
    psd_tol = 1e-9 * scale
    fo_tol = FIRST_ORDER_TOL * scale
    pos_tol = POSITIVITY_TOL

    best_lam = math.inf
    best_sup: Optional[tuple] = None
    best_x: Optional[list] = None
    cap_hit = False

    # vertices: first-order screen is min of the column against the diagonal
    colmin = q.min(axis=0)
    for r in range(n):
        if colmin[r] - diag[r] >= -fo_tol and _better(diag[r], (r,), best_lam, best_sup):
            best_lam, best_sup, best_x = diag[r], (r,), [1.0]

    if kmax_eff >= 2 and n >= 2:
        shift = float(q.min()) - psd_tol    # lower bound for the optimal value
        det_tol = psd_tol * scale
        mdiag = diag_arr - shift            # all > 0 by construction
        moff = q - shift
        pair_ok = (mdiag[:, None] * mdiag[None, :] - moff * moff) >= -det_tol
        np.fill_diagonal(pair_ok, False)
        masks = [int.from_bytes(np.packbits(pair_ok[i], bitorder="little").tobytes(),
                                "little") for i in range(n)]
        all_bits = (1 << n) - 1

        def candidate(support, y):
            """Score a face from its solved shifted system ``M y = e``."""
            nonlocal best_lam, best_sup, best_x
            total = 0.0
            for v in y:
                total += v
            if total <= 0.0:
                return
            floor = pos_tol * total
            for v in y:
                if v <= floor:
                    return
            lam = shift + 1.0 / total
            if not _better(lam, support, best_lam, best_sup):
                return
            idx = list(support)
            xvec = np.array(y) / total
            slack = float((q[:, idx] @ xvec).min() - lam)
            if slack < -fo_tol:
                return
            best_lam, best_sup, best_x = lam, support, list(xvec)

        def extend(r, members, lrows, zvec, allowed, minq):
            nonlocal cap_hit
            t = len(members)
            size_new = t + 1
            mask = allowed
            while mask:
                mbit = mask & -mask
                m = mbit.bit_length() - 1
                mask ^= mbit
                qm = ql[m]
                col = []
                mn = minq if qm[m] >= minq else qm[m]
                for i in members:
                    e = qm[i]
                    if e < mn:
                        mn = e
                    col.append(e - shift)
                # incremental Cholesky of the shifted submatrix Q_S - shift*E
                w = []
                s2 = 0.0
                for j in range(t):
                    acc = col[j]
                    lj = lrows[j]
                    for l in range(j):
                        acc -= lj[l] * w[l]
                    wj = acc / lj[j]
                    w.append(wj)
                    s2 += wj * wj
                d = (qm[m] - shift) - s2
                if d < -psd_tol:
                    continue
                if d <= psd_tol:
                    # semidefinite boundary: fall back to dense linear algebra
                    slow(r, members[1:] + [m],
                         allowed & masks[m] & (all_bits ^ ((mbit << 1) - 1)), mn)
                    continue
                pivot = math.sqrt(d)
                zm = 1.0
                for l in range(t):
                    zm -= w[l] * zvec[l]
                zm /= pivot
                support = (*members, m)
                if mn <= min(best_lam, v1) + psd_tol:
                    w.append(pivot)
                    zvec.append(zm)
                    lrows.append(w)
                    candidate(support, _backward(lrows, zvec))
                    lrows.pop()
                    zvec.pop()
                    w.pop()
                if size_new >= kmax_eff:
                    if size_new == kmax_eff:
                        cap_hit = True
                    continue
                child = allowed & masks[m] & (all_bits ^ ((mbit << 1) - 1))
                if child:
                    w.append(pivot)
                    zvec.append(zm)
                    lrows.append(w)
                    members.append(m)
                    extend(r, members, lrows, zvec, child, mn)
                    members.pop()
                    lrows.pop()
                    zvec.pop()

        def slow(r, others, allowed, minq):
            """Search continuation for semidefinite-boundary nodes."""
            nonlocal cap_hit, best_lam, best_sup, best_x
            s_idx = [r] + others
            size = len(s_idx)
            support = tuple(s_idx)
            res = face_solve(q[np.ix_(s_idx, s_idx)], pos_tol)
            if res.feasible:
                lam = float(res.lam)
                if _better(lam, support, best_lam, best_sup):
                    xfull = np.zeros(n)
                    xfull[s_idx] = res.x_k
                    if check_first_order(q, xfull, lam) >= -fo_tol:
                        best_lam, best_sup, best_x = lam, support, list(res.x_k)
            if size >= kmax_eff:
                if size == kmax_eff:
                    cap_hit = True
                return
            mask = allowed
            while mask:
                mbit = mask & -mask
                m = mbit.bit_length() - 1
                mask ^= mbit
                s_new = s_idx + [m]
                shifted = q[np.ix_(s_new, s_new)] - shift
                if np.linalg.eigvalsh(shifted).min() < -psd_tol:
                    continue
                mn = min(minq, float(q[m, s_new].min()))
                slow(r, others + [m], allowed & masks[m] & (all_bits ^ ((mbit << 1) - 1)), mn)

        higher_cache = [(1 << n) - 1 - ((1 << (r + 1)) - 1) for r in range(n)]
        for r in range(n):
            root_allowed = masks[r] & higher_cache[r]
            if root_allowed:
                d0 = diag[r] - shift
                extend(r, [r], [[math.sqrt(d0)]], [1.0 / math.sqrt(d0)],
                       root_allowed, diag[r])

    if best_sup is None:
        raise NumericalFailureError("no support passed the optimality screens")

    return _finish(q, best_sup, best_x, best_lam,
                   certificate="exhaustive" if exhaustive else "size_bounded",
                   k_max=None if exhaustive else kmax_eff,
                   cap_reached=cap_hit and not exhaustive)


def _backward(lrows, zvec):
    """Solve ``L^T y = z`` for the incremental Cholesky rows."""
    t = len(zvec)
    y = [0.0] * t
    for j in range(t - 1, -1, -1):
        acc = zvec[j]
        for l in range(j + 1, t):
            acc -= lrows[l][j] * y[l]
        y[j] = acc / lrows[j][j]
    return y


def _finish(q, support, x_sup, lam, certificate, k_max, cap_reached) -> Solution:
    n = q.shape[0]
    s_idx = list(support)
    # re-solve the winning face with the bordered system for a crisp residual
    res = face_solve(q[np.ix_(s_idx, s_idx)])
    if res.feasible:
        x_sup, lam = list(res.x_k), float(res.lam)
    x = np.zeros(n)
    x[s_idx] = x_sup
    sub = q[np.ix_(s_idx, s_idx)]
    residual = float(np.max(np.abs(sub @ np.asarray(x_sup) - lam)))
    slack = check_first_order(q, x, lam)
    mineig = check_second_order(sub, lam)
    return Solution(n=n, support=tuple(s_idx), x=x, lambda_star=lam,
                    first_order_slack=slack, second_order_mineig=mineig,
                    stationarity_residual=residual, certificate=certificate,
                    k_max=k_max, cap_reached=cap_reached)


def brute_force_oracle(inst) -> Solution:
    """Independent oracle: bordered solve on every nonempty support.

    No optimality-condition shortcuts are taken; among all interior-feasible
    stationary points and all vertices, the minimum value wins (ties to the
    lexicographically smallest support).  Limited to n <= 15.
    """
    q = _matrix_of(inst)
    n = q.shape[0]
    if n > _ORACLE_N_CAP:
        raise CostGuardError(f"oracle is limited to n <= {_ORACLE_N_CAP}")
    scale = max(1.0, float(np.abs(q).max()))

    best_lam = math.inf
    best_sup: Optional[tuple] = None
    best_x: Optional[list] = None

    for k in range(1, n + 1):
        supports = list(combinations(range(n), k))
        idx = np.array(supports)                      # (m, k)
        sub = q[idx[:, :, None], idx[:, None, :]]     # (m, k, k)
        m = len(supports)
        a = np.zeros((m, k + 1, k + 1))
        a[:, :k, :k] = sub
        a[:, :k, k] = -1.0
        a[:, k, :k] = 1.0
        rhs = np.zeros((m, k + 1, 1))
        rhs[:, k, 0] = 1.0
        try:
            sol = np.linalg.solve(a, rhs)[:, :, 0]
            x = sol[:, :k]
            lam = sol[:, k]
            resid = np.max(np.abs(np.einsum("mij,mj->mi", sub, x) - lam[:, None]), axis=1)
            feas = np.all(x > POSITIVITY_TOL, axis=1) & (resid <= 1e-6 * scale)
        except np.linalg.LinAlgError:
            x = np.zeros((m, k))
            lam = np.full(m, math.inf)
            feas = np.zeros(m, dtype=bool)
            for i, s in enumerate(supports):
                res = face_solve(q[np.ix_(s, s)])
                if res.feasible:
                    feas[i] = True
                    x[i] = res.x_k
                    lam[i] = res.lam
        if not feas.any():
            continue
        cand = np.nonzero(feas & (lam <= best_lam))[0]
        for i in cand:
            li, si = float(lam[i]), supports[i]
            if li < best_lam or (li == best_lam and (best_sup is None or si < best_sup)):
                best_lam, best_sup, best_x = li, si, list(x[i])

    if best_sup is None:
        raise NumericalFailureError("oracle found no feasible stationary point")
    return _finish(q, best_sup, best_x, best_lam,
                   certificate="exhaustive", k_max=None, cap_reached=False)
