"""Finite lattice boxes and the operators assembled on them.

Every operator here has the form ``diag(v) - coupling * A`` with ``A`` the
adjacency pattern of nearest neighbors inside a box and Dirichlet
truncation at the boundary (couplings to outside points are dropped, the
diagonal keeps its full value).  This keeps the hopping part "Laplace
type": off-diagonal entries are nonpositive and interior row sums of the
hopping part vanish.  Dirichlet truncation only raises eigenvalues, and
for confining potentials the truncation error vanishes superexponentially
in the box size.

The module also builds the interval decompositions attached to the zeros
of a Hermite polynomial, the one-point spike modification of the quadratic
potential, and quadratic partitions of unity with their localization
remainders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse

from .errors import (
    BoxTooSmall,
    DegenerateDecomposition,
    OverlappingSupports,
    PartitionNotUnity,
)
from .potentials import Potential, ScalingParams, sample_on_lattice

__all__ = [
    "LatticeBox",
    "SymmetricLatticeOperator",
    "ModifiedPotentialParams",
    "IntervalDecomposition",
    "assemble_laplacian",
    "assemble_Hkappa",
    "assemble_HN",
    "assemble_modified",
    "build_interval_decomposition",
    "beta_rate_bound",
    "restrict",
    "ims_partition",
    "ims_remainder",
    "ims_identity_residual",
    "double_commutator_norms",
    "partition_variation",
]


@dataclass(frozen=True)
class LatticeBox:
    """Axis-aligned product of integer ranges with a C-order index map."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(int(v) for v in np.atleast_1d(self.lo))
        hi = tuple(int(v) for v in np.atleast_1d(self.hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box bounds lo={lo} hi={hi}")

    @classmethod
    def centered(cls, d: int, M: int) -> "LatticeBox":
        return cls(lo=(-int(M),) * d, hi=(int(M),) * d)

    @classmethod
    def interval(cls, a: int, b: int) -> "LatticeBox":
        return cls(lo=(int(a),), hi=(int(b),))

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def index(self, point) -> int:
        pt = tuple(int(v) for v in np.atleast_1d(point))
        if not self.contains(pt):
            raise KeyError(f"{pt} outside box")
        return int(np.ravel_multi_index(
            tuple(p - l for p, l in zip(pt, self.lo)), self.shape
        ))

    def point(self, index: int) -> tuple[int, ...]:
        offs = np.unravel_index(int(index), self.shape)
        return tuple(int(o) + l for o, l in zip(offs, self.lo))

    def contains(self, point) -> bool:
        pt = np.atleast_1d(point)
        return bool(
            np.all(pt >= np.array(self.lo)) and np.all(pt <= np.array(self.hi))
        )

    def contains_box(self, other: "LatticeBox") -> bool:
        return all(a <= b for a, b in zip(self.lo, other.lo)) and all(
            a >= b for a, b in zip(self.hi, other.hi)
        )

    def coords(self) -> np.ndarray:
        if self.dimension != 1:
            raise ValueError("coords() is one-dimensional; use point_array()")
        return np.arange(self.lo[0], self.hi[0] + 1)

    def point_array(self) -> np.ndarray:
        """All lattice points as an ``(size, d)`` array in index order."""
        axes = [np.arange(l, h + 1) for l, h in zip(self.lo, self.hi)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1).reshape(self.size, self.dimension)

    def neighbor_index_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Index pairs (i, j), i < j, of nearest neighbors inside the box."""
        idx = np.arange(self.size).reshape(self.shape)
        lefts, rights = [], []
        for ax in range(self.dimension):
            sl_a = [slice(None)] * self.dimension
            sl_b = [slice(None)] * self.dimension
            sl_a[ax] = slice(None, -1)
            sl_b[ax] = slice(1, None)
            lefts.append(idx[tuple(sl_a)].ravel())
            rights.append(idx[tuple(sl_b)].ravel())
        return np.concatenate(lefts), np.concatenate(rights)


@dataclass(frozen=True, eq=False)
class SymmetricLatticeOperator:
    """Diagonal plus constant nearest-neighbor coupling, Dirichlet-truncated.

    The matrix is ``diag(diagonal)`` with entry ``-coupling`` between every
    pair of neighboring box points, hence exactly symmetric by
    construction.
    """

    box: LatticeBox
    diagonal: np.ndarray
    coupling: float

    def __post_init__(self):
        diag = np.asarray(self.diagonal, dtype=float).reshape(self.box.size)
        object.__setattr__(self, "diagonal", diag)
        if self.coupling < 0:
            raise ValueError("coupling must be nonnegative (Laplace-type sign)")

    @property
    def size(self) -> int:
        return self.box.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(self.size)
        out = self.diagonal * v
        if self.coupling:
            g = v.reshape(self.box.shape)
            acc = np.zeros_like(g)
            for ax in range(self.box.dimension):
                sl_a = [slice(None)] * self.box.dimension
                sl_b = [slice(None)] * self.box.dimension
                sl_a[ax] = slice(None, -1)
                sl_b[ax] = slice(1, None)
                acc[tuple(sl_a)] += g[tuple(sl_b)]
                acc[tuple(sl_b)] += g[tuple(sl_a)]
            out -= self.coupling * acc.reshape(self.size)
        return out

    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        if self.box.dimension != 1:
            raise ValueError("tridiagonal storage is one-dimensional")
        return self.diagonal, np.full(self.size - 1, -self.coupling)

    def dense(self) -> np.ndarray:
        if self.size > 6000:
            raise MemoryError(f"dense assembly refused for size {self.size}")
        A = np.diag(self.diagonal)
        i, j = self.box.neighbor_index_pairs()
        A[i, j] = -self.coupling
        A[j, i] = -self.coupling
        return A

    def restrict(self, sub: LatticeBox) -> "SymmetricLatticeOperator":
        """Principal submatrix on a sub-box: outside couplings dropped."""
        if not self.box.contains_box(sub):
            raise ValueError("restriction target is not contained in the box")
        slices = tuple(
            slice(sl - bl, sh - bl + 1)
            for sl, sh, bl in zip(sub.lo, sub.hi, self.box.lo)
        )
        diag = self.diagonal.reshape(self.box.shape)[slices].reshape(sub.size)
        return SymmetricLatticeOperator(box=sub, diagonal=diag, coupling=self.coupling)

    def hopping_norm_bound(self) -> float:
        """Operator norm bound of the hopping part (4d * coupling)."""
        return 4.0 * self.box.dimension * self.coupling

    def dropped_neighbor_count(self) -> np.ndarray:
        """Per point, how many of the 2d couplings were cut by the boundary."""
        counts = np.zeros(self.box.shape, dtype=np.int64)
        for ax in range(self.box.dimension):
            sl_first = [slice(None)] * self.box.dimension
            sl_last = [slice(None)] * self.box.dimension
            sl_first[ax] = 0
            sl_last[ax] = -1
            counts[tuple(sl_first)] += 1
            counts[tuple(sl_last)] += 1
        return counts.reshape(self.size)


def restrict(op: SymmetricLatticeOperator, sub: LatticeBox) -> SymmetricLatticeOperator:
    """Module-level alias for :meth:`SymmetricLatticeOperator.restrict`."""
    return op.restrict(sub)


def assemble_laplacian(box: LatticeBox) -> SymmetricLatticeOperator:
    """Graph Laplacian ``(Lf)(x) = 2d f(x) - sum of neighbors`` on the box."""
    d = box.dimension
    return SymmetricLatticeOperator(
        box=box, diagonal=np.full(box.size, 2.0 * d), coupling=1.0
    )


def assemble_Hkappa(kappa: float, box: LatticeBox) -> SymmetricLatticeOperator:
    """One-dimensional quadratic-well operator ``Delta + kappa^4 x^2``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if box.dimension != 1:
        raise ValueError("this reduced operator is one-dimensional")
    x = box.coords().astype(float)
    return SymmetricLatticeOperator(
        box=box, diagonal=2.0 + kappa**4 * x * x, coupling=1.0
    )


def assemble_HN(
    V: Potential, params: ScalingParams, box: LatticeBox
) -> SymmetricLatticeOperator:
    """Scaled lattice Schrodinger operator ``(N^2/2) Delta + N^(2(1-gamma)) V(./N)``."""
    if V.dimension != box.dimension:
        raise ValueError("potential and box dimension differ")
    N = params.N
    d = box.dimension
    coupling = 0.5 * float(N) ** 2
    strength = float(N) ** (2.0 * (1.0 - params.gamma))
    diag = d * float(N) ** 2 + strength * sample_on_lattice(V, N, box)
    return SymmetricLatticeOperator(box=box, diagonal=diag, coupling=coupling)


@dataclass(frozen=True)
class ModifiedPotentialParams:
    """One-point spike modification of the quadratic lattice potential.

    The potential keeps its quadratic values except at ``|x| = x_delta =
    floor(kappa^-(1+delta))`` where it is raised to ``kappa^-delta``.  The
    exponent is restricted to ``delta in (0, 1/2)``, the range in which the
    spiked comparison operator controls the quasimode error on the
    unbounded interval.
    """

    kappa: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta < 0.5:
            raise ValueError("spike exponent delta must lie in (0, 1/2)")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")
        if self.x_delta < 1:
            raise ValueError("spike location collapsed to the origin")
        if not self.spike_value > self.kappa**4 * self.x_delta**2:
            raise ValueError("spike does not dominate the quadratic potential")

    @property
    def x_delta(self) -> int:
        return int(math.floor(self.kappa ** -(1.0 + self.delta)))

    @property
    def spike_value(self) -> float:
        return self.kappa**-self.delta


def assemble_modified(
    params: ModifiedPotentialParams, box: LatticeBox
) -> SymmetricLatticeOperator:
    """The quadratic-well operator with the potential spiked at ``+-x_delta``."""
    if box.dimension != 1:
        raise ValueError("the modified operator is one-dimensional")
    xd = params.x_delta
    if not (box.contains((xd,)) and box.contains((-xd,))):
        raise BoxTooSmall(f"box {box.lo}..{box.hi} does not cover the spikes at +-{xd}")
    op = assemble_Hkappa(params.kappa, box)
    diag = op.diagonal.copy()
    x = box.coords()
    diag[np.abs(x) == xd] = 2.0 + params.spike_value
    return SymmetricLatticeOperator(box=box, diagonal=diag, coupling=1.0)


# ----------------------------------------------------------------------
# interval decomposition attached to Hermite zeros
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IntervalDecomposition:
    """Disjoint intervals whose union plus a few single points tiles the line.

    For degree ``n`` with nonnegative Hermite zeros ``z_1 < ... < z_k`` the
    positive intervals are ``I_j = [a_j, b_j]`` with scale factors
    ``beta_j`` anchoring ``beta_j kappa (a_j - 1)`` exactly at ``z_j``; the
    last interval is unbounded and gets capped at the truncation edge.  The
    excluded single points are ``+-(a_j - 1)``.  For even ``n`` a central
    interval ``[-(a_1 - 2), a_1 - 2]`` is included; for odd ``n`` the
    origin itself is an excluded point.  Degree 0 has no zeros: the whole
    line is one interval and nothing is excluded.
    """

    degree: int
    kappa: float
    zeros: np.ndarray
    a: np.ndarray
    b: np.ndarray
    beta: np.ndarray
    excluded: tuple[int, ...]

    @property
    def k(self) -> int:
        return int(self.a.size)

    def min_halfwidth(self) -> int:
        """Smallest truncation half-width on which the tiling makes sense."""
        return int(self.a[-1] + 1) if self.k else 1

    def pieces(self, M: int):
        """Concrete integer intervals ``(lo, hi, label, beta)`` on ``[-M, M]``.

        Labels run ``-k..k`` with 0 the central interval; the unbounded
        pieces are capped at ``+-M``.
        """
        M = int(M)
        if self.k == 0:
            return [(-M, M, 0, 1.0)]
        if M < self.min_halfwidth():
            raise BoxTooSmall(f"half-width {M} below {self.min_halfwidth()}")
        out = []
        if self.degree % 2 == 0:
            b0 = int(self.a[0]) - 2
            out.append((-b0, b0, 0, 1.0))
        for j in range(1, self.k + 1):
            lo = int(self.a[j - 1])
            hi = M if j == self.k else int(self.b[j - 1])
            out.append((lo, hi, j, float(self.beta[j - 1])))
            out.append((-hi, -lo, -j, float(self.beta[j - 1])))
        return out

    def cover_ok(self, M: int) -> bool:
        """Exact set check: pieces plus excluded points tile ``[-M, M]``."""
        marks = np.zeros(2 * int(M) + 1, dtype=np.int64)
        for lo, hi, _, _ in self.pieces(M):
            marks[lo + M : hi + M + 1] += 1
        for e in self.excluded:
            marks[e + M] += 1
            if e != 0:
                marks[-e + M] += 1
        return bool(np.all(marks == 1))


def build_interval_decomposition(n: int, kappa: float) -> IntervalDecomposition:
    """Construct the zero-anchored interval decomposition for degree ``n``.

    Raises :class:`DegenerateDecomposition` when ``kappa`` is too large for
    the inductive construction (an interval collapses or the first anchor
    has no room).
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    from .hermite import nonnegative_zeros  # deferred: hermite builds on this module

    zs = nonnegative_zeros(n)
    k = zs.size
    if k == 0:
        return IntervalDecomposition(
            degree=n,
            kappa=kappa,
            zeros=zs,
            a=np.zeros(0, dtype=np.int64),
            b=np.zeros(0),
            beta=np.zeros(0),
            excluded=(),
        )
    a = np.zeros(k, dtype=np.int64)
    b = np.zeros(k)
    beta = np.zeros(k)
    for j in range(1, k + 1):
        zj = zs[j - 1]
        if j == 1:
            if zj == 0.0:
                a[0], beta[0] = 1, 1.0
            else:
                a[0] = int(math.floor(zj / kappa)) + 1
                if a[0] - 1 == 0:
                    raise DegenerateDecomposition(
                        f"kappa={kappa} too large: floor(z_1/kappa) = 0"
                    )
                beta[0] = zj / (kappa * (a[0] - 1))
        else:
            a[j - 1] = int(math.floor(zj / (beta[j - 2] * kappa))) + 1
            beta[j - 1] = zj / (kappa * (a[j - 1] - 1))
        if j == k:
            b[j - 1] = math.inf
        else:
            b[j - 1] = math.floor(zs[j] / (beta[j - 1] * kappa)) - 1
        if b[j - 1] < a[j - 1]:
            raise DegenerateDecomposition(
                f"interval {j} collapsed for degree {n} at kappa={kappa}"
            )
    excluded = sorted({int(aj) - 1 for aj in a})
    return IntervalDecomposition(
        degree=n, kappa=kappa, zeros=zs, a=a, b=b, beta=beta, excluded=tuple(excluded)
    )


def beta_rate_bound(n: int, kappa0: float) -> float:
    """Worst-case rate ``C`` with ``beta_j - 1 <= C kappa`` for all ``kappa <= kappa0``.

    The floor in the construction satisfies ``beta_j <= beta_{j-1} z_j /
    (z_j - beta_{j-1} kappa)``; iterating this envelope at ``kappa0`` and
    taking the largest ``(beta_j - 1) / kappa0`` dominates every finer mesh
    because the envelope rate is increasing in ``kappa``.
    """
    from .hermite import nonnegative_zeros

    zs = nonnegative_zeros(n)
    env = 1.0
    worst = 0.0
    for z in zs:
        if z == 0.0:
            continue
        denom = z - env * kappa0
        if denom <= 0:
            raise DegenerateDecomposition(f"kappa0={kappa0} too large for degree {n}")
        env = env * z / denom
        worst = max(worst, (env - 1.0) / kappa0)
    return worst


# ----------------------------------------------------------------------
# quadratic partitions of unity and the localization remainder
# ----------------------------------------------------------------------

def ims_partition(
    centers: Sequence, inner_radius: float, box: LatticeBox
) -> list[np.ndarray]:
    """Bump functions ``eta_l`` around the centers plus the complement ``eta_0``.

    Each bump is ``clip(2 - 2 |x - c|_inf / r, 0, 1)``: identically 1
    within ``r/2`` of its center, zero beyond ``r``, with single-step
    variation at most ``2/r``.  ``eta_0 = sqrt(1 - sum eta_l^2)`` completes
    the quadratic partition.  Raises :class:`OverlappingSupports` when two
    bump supports share a lattice point.
    """
    if inner_radius <= 0:
        raise ValueError("inner_radius must be positive")
    pts = box.point_array()
    etas: list[np.ndarray] = []
    masks: list[np.ndarray] = []
    for c in centers:
        c = np.atleast_1d(np.asarray(c, dtype=float))
        if c.size != box.dimension:
            raise ValueError("partition center dimension mismatch")
        dist = np.abs(pts - c).max(axis=1)
        eta = np.clip(2.0 - 2.0 * dist / inner_radius, 0.0, 1.0)
        mask = eta > 0.0
        for other in masks:
            if np.any(mask & other):
                raise OverlappingSupports("two bump supports intersect")
        etas.append(eta)
        masks.append(mask)
    s2 = np.zeros(box.size)
    for eta in etas:
        s2 += eta * eta
    eta0 = np.sqrt(np.clip(1.0 - s2, 0.0, None))
    return [eta0] + etas


def _check_partition(box: LatticeBox, etas: Sequence[np.ndarray]) -> None:
    s2 = np.zeros(box.size)
    for eta in etas:
        s2 += np.asarray(eta, dtype=float) ** 2
    if np.max(np.abs(s2 - 1.0)) > 1e-12:
        raise PartitionNotUnity("squared bumps do not sum to 1 within 1e-12")


def ims_remainder(
    op: SymmetricLatticeOperator, etas: Sequence[np.ndarray]
) -> scipy.sparse.coo_matrix:
    """Localization remainder ``(1/2) sum_j (eta_j^2 L + L eta_j^2 - 2 eta_j L eta_j)``.

    For multiplication operators the double commutator has entries
    ``L(x, y) (eta(x) - eta(y))^2``, so the remainder lives on the neighbor
    pairs only; it is assembled exactly as a sparse matrix.
    """
    _check_partition(op.box, etas)
    i, j = op.box.neighbor_index_pairs()
    w = np.zeros(i.size)
    for eta in etas:
        eta = np.asarray(eta, dtype=float)
        w += (eta[i] - eta[j]) ** 2
    data = -op.coupling * 0.5 * w
    keep = data != 0.0
    i, j, data = i[keep], j[keep], data[keep]
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    return scipy.sparse.coo_matrix(
        (np.concatenate([data, data]), (rows, cols)), shape=(op.size, op.size)
    )


def ims_identity_residual(
    op: SymmetricLatticeOperator, etas: Sequence[np.ndarray]
) -> float:
    """Max-abs entry of ``H - sum eta_j H eta_j - remainder``, relative to ``|H|_max``.

    The identity is algebraic, so this measures pure rounding; values above
    ``1e-12`` indicate a broken partition.
    """
    _check_partition(op.box, etas)
    i, j = op.box.neighbor_index_pairs()
    sum_prod = np.zeros(i.size)
    sum_sq = np.zeros(op.size)
    sum_dd = np.zeros(i.size)
    for eta in etas:
        eta = np.asarray(eta, dtype=float)
        sum_prod += eta[i] * eta[j]
        sum_sq += eta * eta
        sum_dd += (eta[i] - eta[j]) ** 2
    off_resid = -op.coupling * (1.0 - sum_prod - 0.5 * sum_dd)
    diag_resid = op.diagonal * (1.0 - sum_sq)
    hmax = max(float(np.abs(op.diagonal).max()), op.coupling)
    worst = max(
        float(np.abs(off_resid).max(initial=0.0)), float(np.abs(diag_resid).max())
    )
    return worst / hmax


def double_commutator_norms(
    op: SymmetricLatticeOperator, etas: Sequence[np.ndarray]
) -> list[float]:
    """Spectral norm of each ``[eta_j, [eta_j, L]]``.

    The commutator vanishes off the transition region of ``eta_j``, so the
    nonzero block is extracted and diagonalized densely.
    """
    i, j = op.box.neighbor_index_pairs()
    norms: list[float] = []
    for eta in etas:
        eta = np.asarray(eta, dtype=float)
        vals = -op.coupling * (eta[i] - eta[j]) ** 2
        nz = np.nonzero(vals)[0]
        if nz.size == 0:
            norms.append(0.0)
            continue
        nodes = np.unique(np.concatenate([i[nz], j[nz]]))
        if nodes.size > 4000:
            raise MemoryError("commutator support too large for dense extraction")
        pos = {int(node): t for t, node in enumerate(nodes)}
        blk = np.zeros((nodes.size, nodes.size))
        for t in nz:
            bi, bj = pos[int(i[t])], pos[int(j[t])]
            blk[bi, bj] = vals[t]
            blk[bj, bi] = vals[t]
        norms.append(float(np.abs(np.linalg.eigvalsh(blk)).max()))
    return norms


def partition_variation(
    box: LatticeBox, etas: Sequence[np.ndarray]
) -> list[float]:
    """Measured single-step variation ``sup_{|x-y|=1} |eta(x) - eta(y)|`` per bump."""
    i, j = box.neighbor_index_pairs()
    return [
        float(np.abs(np.asarray(eta, dtype=float)[i] - np.asarray(eta, dtype=float)[j]).max())
        for eta in etas
    ]
