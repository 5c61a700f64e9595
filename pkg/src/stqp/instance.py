"""Random symmetric matrices for simplex-constrained quadratic programs.

Two generation models:

* ``symmetric_iid`` -- diagonal entries iid with law G, strict upper
  triangle iid with law F, mirrored below.
* ``wigner_average`` -- a full iid matrix M with entry law G, symmetrised
  as ``Q = (M + M^T)/2``; the diagonal then has law G while off-diagonal
  entries follow the half-sum convolution ``(G * G)(2x)``.

Entries are drawn row by row from independent streams so generation can be
parallelised without changing the result.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from . import rng as rng_mod
from .distributions import DistributionSpec, Role, sample, spec_from_dict, spec_to_dict
from .errors import DegenerateInstanceError, DomainError

__all__ = ["Model", "Instance", "generate", "relabel_by_diagonal",
           "write_instance", "read_instance"]

MAX_DIMENSION = 2048


class Model(str, Enum):
    SYMMETRIC_IID = "symmetric_iid"
    WIGNER_AVERAGE = "wigner_average"


@dataclass(frozen=True)
class Instance:
    """A symmetric matrix together with its generation provenance."""

    n: int
    q: np.ndarray
    model: Optional[Model] = None
    diag_spec: Optional[DistributionSpec] = None
    offdiag_spec: Optional[DistributionSpec] = None
    seed: Optional[int] = None
    relabeled: bool = False

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (self.n, self.n):
            raise DomainError(f"matrix must be {self.n}x{self.n}")
        if not np.array_equal(q, q.T):
            raise DomainError("matrix must be exactly symmetric")
        object.__setattr__(self, "q", q)


def generate(model: Model | str, n: int, seed: int,
             diag_spec: Optional[DistributionSpec] = None,
             offdiag_spec: Optional[DistributionSpec] = None,
             entry_spec: Optional[DistributionSpec] = None) -> Instance:
    """Draw an instance of the given model.

    ``symmetric_iid`` needs ``diag_spec`` and ``offdiag_spec``;
    ``wigner_average`` needs the single ``entry_spec`` for M.
    """
    model = Model(model)
    if n < 1:
        raise DomainError("dimension must be at least 1")
    if n > MAX_DIMENSION:
        raise DomainError(f"dimension capped at {MAX_DIMENSION}")

    if model is Model.SYMMETRIC_IID:
        if diag_spec is None or offdiag_spec is None:
            raise DomainError("symmetric_iid requires diag and offdiag specs")
        q = np.zeros((n, n))
        diag = sample(diag_spec, n, rng_mod.stream(seed, 0))
        q[np.diag_indices(n)] = diag
        for i in range(n - 1):
            row = sample(offdiag_spec, n - 1 - i, rng_mod.stream(seed, 1, i))
            q[i, i + 1:] = row
            q[i + 1:, i] = row
        return Instance(n=n, q=q, model=model, seed=int(seed),
                        diag_spec=_with_role(diag_spec, Role.DIAGONAL),
                        offdiag_spec=_with_role(offdiag_spec, Role.OFFDIAGONAL))

    if entry_spec is None:
        raise DomainError("wigner_average requires the entry spec for M")
    m = np.empty((n, n))
    for i in range(n):
        m[i] = sample(entry_spec, n, rng_mod.stream(seed, 1, i))
    q = 0.5 * (m + m.T)
    return Instance(n=n, q=q, model=model, seed=int(seed),
                    diag_spec=_with_role(entry_spec, Role.DIAGONAL),
                    offdiag_spec=None)


def _with_role(spec: DistributionSpec, role: Role) -> DistributionSpec:
    if spec.role is role:
        return spec
    d = spec_to_dict(spec)
    d["role"] = role.value
    return spec_from_dict(d)


def relabel_by_diagonal(inst: Instance) -> Instance:
    """Permute indices so the diagonal is strictly increasing.

    The permutation is applied symmetrically, so the off-diagonal multiset
    and the spectrum are unchanged.  Exact diagonal ties are degenerate
    (they have probability zero under a continuous law) and raise.
    """
    diag = inst.q.diagonal()
    order = np.argsort(diag, kind="stable")
    if np.any(np.diff(diag[order]) == 0.0):
        raise DegenerateInstanceError("tied diagonal entries cannot be ordered")
    q = inst.q[np.ix_(order, order)]
    return Instance(n=inst.n, q=q, model=inst.model, seed=inst.seed,
                    diag_spec=inst.diag_spec, offdiag_spec=inst.offdiag_spec,
                    relabeled=True)


# ---------------------------------------------------------------------------
# text format + provenance sidecar
# ---------------------------------------------------------------------------


def write_instance(inst: Instance, path: str | Path) -> Path:
    """Write the matrix as text (17 significant digits, full matrix) and a
    JSON sidecar ``<path>.json`` with the provenance."""
    path = Path(path)
    lines = [str(inst.n)]
    for row in inst.q:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n")

    sidecar = {
        "model": inst.model.value if inst.model else None,
        "diag": spec_to_dict(inst.diag_spec) if inst.diag_spec else None,
        "offdiag": spec_to_dict(inst.offdiag_spec) if inst.offdiag_spec else None,
        "seed": inst.seed,
        "relabeled": inst.relabeled,
        "n": inst.n,
    }
    sidecar_path = path.with_name(path.name + ".json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def read_instance(path: str | Path) -> Instance:
    """Read a matrix written by :func:`write_instance`; the sidecar is
    optional (provenance fields default to ``None`` without it)."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        n = int(first.strip())
        q = np.loadtxt(fh, ndmin=2)
    if q.shape != (n, n):
        raise DomainError(f"expected {n}x{n} matrix, found shape {q.shape}")
    if not np.array_equal(q, q.T):
        scale = max(1.0, float(np.abs(q).max()))
        if float(np.abs(q - q.T).max()) > 1e-12 * scale:
            raise DomainError("matrix in file is not symmetric")
        q = 0.5 * (q + q.T)

    model = diag_spec = offdiag_spec = seed = None
    relabeled = False
    sidecar_path = path.with_name(path.name + ".json")
    if sidecar_path.exists():
        meta = json.loads(sidecar_path.read_text())
        model = Model(meta["model"]) if meta.get("model") else None
        diag_spec = spec_from_dict(meta["diag"]) if meta.get("diag") else None
        offdiag_spec = spec_from_dict(meta["offdiag"]) if meta.get("offdiag") else None
        seed = meta.get("seed")
        relabeled = bool(meta.get("relabeled", False))
    return Instance(n=n, q=q, model=model, diag_spec=diag_spec,
                    offdiag_spec=offdiag_spec, seed=seed, relabeled=relabeled)
