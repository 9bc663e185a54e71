"""Eigenvalue machinery: Sturm bisection, inverse iteration, spectral diagnostics.

The workhorse is a Sturm-sequence bisection solver for symmetric
tridiagonal matrices.  Eigenvalue counts below a shift come from the signs
of the LDL^T pivots, so every returned eigenvalue carries a guaranteed
bracket; results are deterministic and independent of threading.  Dense
solves (``numpy.linalg.eigvalsh``) are used only as independent oracles in
tests and for small non-separable boxes.

Operators are passed either as a ``(diagonal, offdiagonal)`` pair or as any
object exposing ``tridiagonal()`` / ``matvec()`` / ``dense()`` in the style
of :class:`lsc.lattice.SymmetricLatticeOperator`.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    AllZero,
    ConvergenceFailure,
    Exhausted,
    IllConditionedSpan,
    NonPositiveFunction,
    ZeroVector,
)

__all__ = [
    "SpectrumResult",
    "NodalReport",
    "eigs_tridiag",
    "eigvec_inverse_iteration",
    "eigenpairs",
    "eigs_separable",
    "k_smallest_sums",
    "nodal_domains",
    "classify_symmetry",
    "verify_superharmonic",
    "rayleigh",
    "subspace_upper_bounds",
    "converged_spectrum",
    "dense_eigvalsh",
]

BISECTION_RTOL = 1e-13
CLUSTER_RTOL = 1e-10
RESIDUAL_RTOL = 1e-8
BOX_DOUBLING_RTOL = 1e-11

# run-wide overrides, set once by the CLI before dispatch
_tolerance_overrides: dict = {}


def set_tolerance_overrides(bisection: float | None = None, box: float | None = None):
    """Install run-wide tolerance overrides; None restores the default."""
    _tolerance_overrides.clear()
    if bisection is not None:
        _tolerance_overrides["bisection"] = float(bisection)
    if box is not None:
        _tolerance_overrides["box"] = float(box)


def _as_tridiagonal(op) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(op, "tridiagonal"):
        diag, off = op.tridiagonal()
    else:
        diag, off = op
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    if diag.ndim != 1 or off.shape != (max(diag.size - 1, 0),):
        raise ValueError("expected a (diagonal, offdiagonal) tridiagonal pair")
    return diag, off


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Sorted low-lying eigenvalues with optional vectors and metadata."""

    values: np.ndarray
    vectors: np.ndarray | None = None
    residual_norms: np.ndarray | None = None
    box: object | None = None
    truncation_converged: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if np.any(np.diff(self.values) < 0):
            raise ValueError("eigenvalues must be nondecreasing")

    def multiplicity_clusters(self, rtol: float = CLUSTER_RTOL) -> list[list[int]]:
        """Group indices whose eigenvalues agree within relative gap ``rtol``."""
        clusters: list[list[int]] = []
        for i, lam in enumerate(self.values):
            if clusters and abs(lam - self.values[clusters[-1][-1]]) <= rtol * (
                1.0 + abs(lam)
            ):
                clusters[-1].append(i)
            else:
                clusters.append([i])
        return clusters


@dataclass(frozen=True)
class NodalReport:
    """Sign-run count of an eigenvector on the path graph."""

    count: int
    threshold: float
    index: int | None = None
    symmetry: str | None = None


def _sturm_counts(diag, off2, shifts, pivmin) -> np.ndarray:
    """Number of eigenvalues below each shift, from LDL^T pivot signs."""
    d = diag[0] - shifts
    d[np.abs(d) < pivmin] = -pivmin
    counts = (d < 0).astype(np.int64)
    for i in range(1, diag.size):
        d = (diag[i] - shifts) - off2[i - 1] / d
        small = np.abs(d) < pivmin
        if small.any():
            d[small] = -pivmin
        counts += d < 0
    return counts


def eigs_tridiag(op, k: int, rel_tol: float | None = None) -> SpectrumResult:
    """Lowest ``k`` eigenvalues by Sturm-sequence bisection.

    Each eigenvalue is bracketed until the bracket width falls below
    ``rel_tol`` relative to its magnitude (with an absolute floor at the
    underflow scale), so the result is deterministic to the stated width.
    """
    if rel_tol is None:
        rel_tol = _tolerance_overrides.get("bisection", BISECTION_RTOL)
    diag, off = _as_tridiagonal(op)
    n = diag.size
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for size {n}")
    off2 = off * off
    pivmin = max(1.0, float(off2.max(initial=0.0))) * np.finfo(float).tiny * 4.0
    radius = np.zeros(n)
    if n > 1:
        radius[:-1] += np.abs(off)
        radius[1:] += np.abs(off)
    lo = np.full(k, float((diag - radius).min()))
    hi = np.full(k, float((diag + radius).max()))
    idx = np.arange(k)
    scale_floor = 4.0 * np.finfo(float).tiny
    for _ in range(160):
        mid = 0.5 * (lo + hi)
        counts = _sturm_counts(diag, off2, mid.copy(), pivmin)
        above = counts > idx
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        width = hi - lo
        if np.all(width <= rel_tol * np.maximum(np.abs(lo), np.abs(hi)) + scale_floor):
            break
    values = 0.5 * (lo + hi)
    return SpectrumResult(values=values, box=getattr(op, "box", None))


def dense_eigvalsh(op) -> np.ndarray:
    """All eigenvalues via a dense symmetric solve (oracle / small boxes)."""
    if hasattr(op, "dense"):
        return np.linalg.eigvalsh(op.dense())
    diag, off = _as_tridiagonal(op)
    A = np.diag(diag)
    if off.size:
        A += np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigvalsh(A)


def _tridiag_matvec(diag, off, v):
    w = diag * v
    if off.size:
        w[:-1] += off * v[1:]
        w[1:] += off * v[:-1]
    return w


def eigvec_inverse_iteration(
    op,
    lam: float,
    *,
    orthogonal_to: Sequence[np.ndarray] = (),
    max_iter: int = 100,
    seed: int = 1234,
) -> np.ndarray:
    """Normalized eigenvector for a computed eigenvalue, by inverse iteration.

    The residual contract ``|Hv - lam v| <= 1e-8 (1 + |lam|)`` is enforced;
    exceeding ``max_iter`` raises :class:`ConvergenceFailure`.  The sign is
    normalized so the first nonzero entry is positive.  Vectors in
    ``orthogonal_to`` are projected out each step (degenerate-pair path).
    """
    diag, off = _as_tridiagonal(op)
    n = diag.size
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    shift = lam
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[2, :-1] = off
    tol = RESIDUAL_RTOL * (1.0 + abs(lam))
    for _ in range(max_iter):
        ab[1, :] = diag - shift
        try:
            w = scipy.linalg.solve_banded((1, 1), ab, v)
        except np.linalg.LinAlgError:
            shift = lam + 1e-13 * (1.0 + abs(lam))
            continue
        if not np.all(np.isfinite(w)):
            shift = lam + 1e-13 * (1.0 + abs(lam))
            continue
        for u in orthogonal_to:
            w -= np.dot(u, w) * u
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        v = w / nrm
        resid = np.linalg.norm(_tridiag_matvec(diag, off, v) - lam * v)
        if resid <= tol:
            first = np.flatnonzero(np.abs(v) > 1e-12 * np.abs(v).max())
            if first.size and v[first[0]] < 0:
                v = -v
            return v
    raise ConvergenceFailure(
        f"inverse iteration did not reach residual {tol:.1e} in {max_iter} steps"
    )


def eigenpairs(op, k: int) -> SpectrumResult:
    """Lowest ``k`` eigenpairs; near-degenerate values are handled as clusters."""
    result = eigs_tridiag(op, k)
    diag, off = _as_tridiagonal(op)
    vectors = np.empty((diag.size, k))
    residuals = np.empty(k)
    done: list[np.ndarray] = []
    for cluster in result.multiplicity_clusters():
        cluster_vecs: list[np.ndarray] = []
        for j, i in enumerate(cluster):
            v = eigvec_inverse_iteration(
                op, float(result.values[i]), orthogonal_to=cluster_vecs, seed=1234 + i
            )
            cluster_vecs.append(v)
            vectors[:, i] = v
            residuals[i] = np.linalg.norm(
                _tridiag_matvec(diag, off, v) - result.values[i] * v
            )
        done.extend(cluster_vecs)
    return SpectrumResult(
        values=result.values,
        vectors=vectors,
        residual_norms=residuals,
        box=getattr(op, "box", None),
    )


def k_smallest_sums(lists: Sequence[Sequence[float]], k: int):
    """The ``k`` smallest sums picking one entry per sorted list.

    Best-first heap enumeration; ties are resolved by the lexicographic
    multi-index, so the output order is deterministic.  Returns a list of
    ``(value, multi_index)`` pairs.  Raises :class:`Exhausted` when fewer
    than ``k`` combinations exist.
    """
    arrays = [np.asarray(l, dtype=float) for l in lists]
    if any(a.size == 0 for a in arrays):
        raise Exhausted("an axis list is empty")
    total = 1
    for a in arrays:
        total *= a.size
        if total >= k:
            break
    if total < k:
        raise Exhausted(f"only {total} combinations available, requested {k}")
    start = (0,) * len(arrays)
    heap = [(float(sum(a[0] for a in arrays)), start)]
    seen = {start}
    out: list[tuple[float, tuple[int, ...]]] = []
    while heap and len(out) < k:
        value, idx = heapq.heappop(heap)
        out.append((value, idx))
        for ax, a in enumerate(arrays):
            if idx[ax] + 1 < a.size:
                nxt = idx[:ax] + (idx[ax] + 1,) + idx[ax + 1 :]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(
                        heap, (float(sum(arr[i] for arr, i in zip(arrays, nxt))), nxt)
                    )
    return out


def eigs_separable(axis_spectra: Sequence[Sequence[float]], k: int) -> np.ndarray:
    """Lowest ``k`` sums of one eigenvalue per axis (separable operators)."""
    return np.array([v for v, _ in k_smallest_sums(axis_spectra, k)])


def nodal_domains(
    vec: np.ndarray, threshold_rel: float = 1e-9, index: int | None = None
) -> NodalReport:
    """Count maximal runs of constant nonzero sign on a path graph.

    Entries below ``threshold_rel`` times the sup norm count as zeros and
    separate domains.  Raises :class:`AllZero` when nothing survives.
    """
    v = np.asarray(vec, dtype=float)
    cut = threshold_rel * np.abs(v).max()
    signs = np.sign(v)
    signs[np.abs(v) < cut] = 0
    runs = 0
    prev = 0
    for s in signs:
        if s == 0:
            prev = 0
        elif s != prev:
            runs += 1
            prev = s
    if runs == 0:
        raise AllZero("every entry is below the zero threshold")
    symmetry = classify_symmetry(v) if v.size % 2 == 1 else None
    return NodalReport(count=runs, threshold=threshold_rel, index=index, symmetry=symmetry)


def classify_symmetry(vec: np.ndarray, tol: float = 1e-8) -> str:
    """Classify a vector on a symmetric box as symmetric / antisymmetric / neither."""
    v = np.asarray(vec, dtype=float)
    if v.size % 2 != 1:
        raise ValueError("symmetry classification needs a box symmetric about 0")
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ZeroVector("cannot classify the zero vector")
    if np.linalg.norm(v - v[::-1]) <= tol * nrm:
        return "symmetric"
    if np.linalg.norm(v + v[::-1]) <= tol * nrm:
        return "antisymmetric"
    return "neither"


def verify_superharmonic(op, alpha: float, u: np.ndarray, region=None):
    """Pointwise check that ``(H + alpha) u >= 0`` on the region.

    ``u`` lives on the operator's box and is implicitly zero outside it.
    A ``True`` verdict certifies that the ground energy of ``H`` is at
    least ``-alpha``.  Returns ``(ok, min_slack)``.
    """
    u = np.asarray(u, dtype=float)
    mask = np.ones(u.size, dtype=bool) if region is None else np.asarray(region, bool)
    if np.any(u[mask] <= 0.0):
        raise NonPositiveFunction("certificate function must be > 0 on the region")
    slack = op.matvec(u) + alpha * u
    min_slack = float(slack[mask].min())
    return min_slack >= 0.0, min_slack


def rayleigh(op, vec: np.ndarray) -> float:
    """Rayleigh quotient ``<v, Hv> / <v, v>``."""
    v = np.asarray(vec, dtype=float)
    denom = float(np.dot(v, v))
    if denom == 0.0:
        raise ZeroVector("Rayleigh quotient of the zero vector")
    return float(np.dot(v, op.matvec(v))) / denom


def subspace_upper_bounds(op, test_vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Ritz values on the span of the test vectors (certified upper bounds).

    Solves ``A y = theta B y`` with ``A_ij = <v_i, H v_j>`` and
    ``B_ij = <v_i, v_j>``; by the min-max principle ``theta_n >= E_n``.
    """
    V = np.column_stack([np.asarray(v, dtype=float) for v in test_vectors])
    HV = np.column_stack([op.matvec(V[:, j]) for j in range(V.shape[1])])
    A = V.T @ HV
    A = 0.5 * (A + A.T)
    B = V.T @ V
    B = 0.5 * (B + B.T)
    if np.linalg.cond(B) > 1e12:
        raise IllConditionedSpan("Gram matrix of test vectors is too ill-conditioned")
    return scipy.linalg.eigh(A, B, eigvals_only=True)


def converged_spectrum(
    assemble: Callable[[int], object],
    M0: int,
    k: int,
    rel: float | None = None,
    max_doublings: int = 14,
) -> SpectrumResult:
    """Solve on boxes of doubling half-width until the spectrum stabilizes.

    ``assemble(M)`` must build the operator on the half-width ``M`` box.
    Stops once every eigenvalue moves by at most ``rel * (1 + |E|)`` under
    a doubling; the result carries the final box and a convergence flag.
    """
    if rel is None:
        rel = _tolerance_overrides.get("box", BOX_DOUBLING_RTOL)
    M = int(M0)
    prev = eigs_tridiag(assemble(M), k)
    for _ in range(max_doublings):
        M *= 2
        cur = eigs_tridiag(assemble(M), k)
        if np.all(np.abs(cur.values - prev.values) <= rel * (1.0 + np.abs(cur.values))):
            return SpectrumResult(values=cur.values, box=cur.box, truncation_converged=True)
        prev = cur
    return SpectrumResult(values=prev.values, box=prev.box, truncation_converged=False)
