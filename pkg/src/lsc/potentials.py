"""Potentials on R^d with registered well data.

A :class:`Potential` bundles an evaluator ``V: R^d -> R`` with the list of
its zeros (the "wells"), the square roots ``omega_i`` of the Hessian
eigenvalues at each well, and positivity metadata ``(R0, c)`` recording
that ``V >= c`` outside the ball of radius ``R0``.  These are exactly the
data that determine the limit spectrum of the scaled lattice operators,
so they are treated as part of the potential, not re-derived on the fly.

Conventions
-----------
* ``V(a) = 0`` at every registered well and the Hessian there has
  eigenvalues ``omega_i**2 > 0`` (frequencies stored in ascending order).
* Evaluators are vectorized: they accept an ``(m, d)`` array of points
  and return an ``(m,)`` array of values.
* Potentials are immutable after construction; every operation here is
  pure and safe to call concurrently on shared instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NonPositiveHessian

__all__ = [
    "Well",
    "Potential",
    "ScalingParams",
    "ValidationReport",
    "eval_potential",
    "sample_on_lattice",
    "hessian_frequencies",
    "validate_assumptions",
    "jacobi_eigenvalues",
    "harmonic",
    "double_well",
    "double_well_nd",
    "two_well",
    "builtin_potential",
    "register_potential",
]

WELL_ZERO_TOL = 1e-12
UNREGISTERED_ZERO_TOL = 1e-8
WELL_EXCLUSION_RADIUS = 0.1


@dataclass(frozen=True, eq=False)
class Well:
    """A non-degenerate minimum of a potential.

    ``frequencies`` are the square roots of the Hessian eigenvalues at the
    minimum, sorted ascending.  ``axes`` holds the principal frame as an
    orthonormal matrix of column vectors; ``None`` means axis-aligned.
    """

    location: np.ndarray
    frequencies: np.ndarray
    axes: np.ndarray | None = None

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.location, dtype=float))
        freqs = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "frequencies", freqs)
        if np.any(freqs <= 0):
            raise ValueError("well frequencies must be strictly positive")
        if np.any(np.diff(freqs) < 0):
            raise ValueError("well frequencies must be sorted ascending")
        if freqs.shape != loc.shape:
            raise ValueError("one frequency per coordinate is required")
        if self.axes is not None:
            axes = np.asarray(self.axes, dtype=float)
            if not np.allclose(axes.T @ axes, np.eye(loc.size), atol=1e-12):
                raise ValueError("principal axes must be orthonormal")
            object.__setattr__(self, "axes", axes)

    @property
    def dimension(self) -> int:
        return self.location.size


@dataclass(frozen=True, eq=False)
class Potential:
    """Evaluable potential plus well and positivity metadata.

    ``evaluator`` maps an ``(m, d)`` float array of points to ``(m,)``
    values.  ``positivity_radius``/``positivity_floor`` are the ``(R0, c)``
    pair certifying positivity at infinity; they are supplied, never
    inferred.  ``axis_potentials`` carries the one-dimensional factors when
    the potential is a separable sum over coordinates.
    """

    dimension: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    wells: tuple[Well, ...]
    positivity_radius: float
    positivity_floor: float
    separable: bool = False
    axis_potentials: tuple["Potential", ...] | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        for well in self.wells:
            if well.dimension != self.dimension:
                raise ValueError("well dimension mismatch")
            value = float(eval_potential(self, well.location))
            if abs(value) > WELL_ZERO_TOL:
                raise ValueError(
                    f"registered well {well.location} is not a zero of V "
                    f"(V={value:.3e})"
                )
        if self.separable:
            if self.axis_potentials is None or len(self.axis_potentials) != self.dimension:
                raise ValueError("separable potentials need one 1-d factor per axis")

    def __call__(self, x) -> np.ndarray | float:
        return eval_potential(self, x)

    @property
    def frequencies_min(self) -> float:
        return min(float(w.frequencies[0]) for w in self.wells)


def _as_points(x, d: int) -> tuple[np.ndarray, bool]:
    """Normalize ``x`` to an (m, d) array; report whether input was a single point."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if d != 1:
            raise ValueError("scalar input only valid for d = 1")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] == d:
            return arr.reshape(1, d), True
        if d == 1:
            return arr.reshape(-1, 1), False
        raise ValueError(f"point of length {arr.shape[0]} passed to d={d} potential")
    if arr.shape[-1] != d:
        raise ValueError("last axis must have length d")
    return arr.reshape(-1, d), False


def eval_potential(V: Potential, x) -> float | np.ndarray:
    """Evaluate ``V`` at a point or an array of points."""
    pts, single = _as_points(x, V.dimension)
    if not np.all(np.isfinite(pts)):
        raise ValueError("potential evaluated at non-finite point")
    vals = np.asarray(V.evaluator(pts), dtype=float).reshape(pts.shape[0])
    return float(vals[0]) if single else vals


def sample_on_lattice(V: Potential, N: int, box) -> np.ndarray:
    """Sample ``x -> V(x / N)`` on every point of a lattice box (C order)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    pts = box.point_array().astype(float)
    return np.asarray(V.evaluator(pts / float(N)), dtype=float).reshape(box.size)


def jacobi_eigenvalues(A: np.ndarray, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(A, dtype=float, copy=True)
    d = A.shape[0]
    if d == 1:
        return A[0, :1].copy()
    scale = max(1.0, float(np.abs(A).max()))
    for _ in range(max_sweeps):
        off = max(abs(A[i, j]) for i in range(d - 1) for j in range(i + 1, d))
        if off <= 1e-15 * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                if abs(A[p, q]) <= 1e-18 * scale:
                    continue
                theta = 0.5 * (A[q, q] - A[p, p]) / A[p, q]
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(d)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
    return np.sort(np.diag(A))


def _hessian_step(a: np.ndarray) -> np.ndarray:
    # cube root of machine epsilon, the standard step for second differences
    return np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.abs(a))


def central_difference_hessian(V: Potential, a) -> np.ndarray:
    """Central-difference Hessian of ``V`` at ``a``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    d = V.dimension
    h = _hessian_step(a)
    H = np.empty((d, d))
    f0 = float(eval_potential(V, a))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        H[i, i] = (
            float(eval_potential(V, a + ei)) - 2.0 * f0 + float(eval_potential(V, a - ei))
        ) / h[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                float(eval_potential(V, a + ei + ej))
                - float(eval_potential(V, a + ei - ej))
                - float(eval_potential(V, a - ei + ej))
                + float(eval_potential(V, a - ei - ej))
            ) / (4.0 * h[i] * h[j])
    return H


def hessian_frequencies(V: Potential, a) -> np.ndarray:
    """Square roots of the Hessian eigenvalues of ``V`` at the minimum ``a``.

    The point is validated to be a zero of ``V``; the Hessian is formed by
    central differences and diagonalized with Jacobi rotations.  Raises
    :class:`NonPositiveHessian` for degenerate minima.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    value = float(eval_potential(V, a))
    if abs(value) > 1e-8:
        raise ValueError(f"V(a)={value:.3e} is not zero; not a registered-style well")
    H = central_difference_hessian(V, a)
    eigs = jacobi_eigenvalues(H)
    tol = 1e-6 * max(1.0, float(np.abs(H).max()))
    if np.any(eigs <= tol):
        raise NonPositiveHessian(
            f"Hessian eigenvalues {eigs} at {a} are not strictly positive"
        )
    return np.sqrt(eigs)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the assumption scan; failures are entries, not exceptions."""

    nonnegative: bool
    min_value: float
    argmin: tuple[float, ...]
    wells_valid: bool
    well_messages: tuple[str, ...]
    unregistered_zeros: tuple[tuple[float, ...], ...]
    positive_at_infinity: bool
    floor_margin: float
    zero_count: int
    smoothness: str = "assumed"

    @property
    def passed(self) -> bool:
        return (
            self.nonnegative
            and self.wells_valid
            and not self.unregistered_zeros
            and self.positive_at_infinity
        )


def _scan_grid(d: int, radius: float, step: float) -> np.ndarray:
    axis = np.arange(-radius, radius + 0.5 * step, step)
    if d == 1:
        return axis.reshape(-1, 1)
    # keep multi-dimensional scans below ~2e6 points by coarsening
    while axis.size**d > 2_000_000:
        step *= 2.0
        axis = np.arange(-radius, radius + 0.5 * step, step)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack(grids, axis=-1).reshape(-1, d)


def validate_assumptions(V: Potential, scan_radius: float, grid_step: float) -> ValidationReport:
    """Scan a grid for the three structural assumptions on ``V``.

    Checks nonnegativity on the grid, validity of every registered well,
    absence of unregistered near-zeros away from the wells, and the
    positivity floor between ``R0`` and the scan radius.  Smoothness is not
    numerically checkable and is reported as assumed.
    """
    max_well = max((float(np.abs(w.location).max()) for w in V.wells), default=0.0)
    if scan_radius <= max_well + 1.0:
        raise ValueError("scan_radius must exceed max well coordinate + 1")
    pts = _scan_grid(V.dimension, scan_radius, grid_step)
    vals = eval_potential(V, pts)

    i_min = int(np.argmin(vals))
    nonnegative = bool(vals[i_min] >= -WELL_ZERO_TOL)

    well_messages: list[str] = []
    wells_valid = True
    for well in V.wells:
        try:
            freqs = hessian_frequencies(V, well.location)
        except (NonPositiveHessian, ValueError) as exc:
            wells_valid = False
            well_messages.append(f"well {well.location}: {exc}")
            continue
        rel = np.abs(freqs - well.frequencies) / well.frequencies
        if np.any(rel > 1e-6):
            wells_valid = False
            well_messages.append(
                f"well {well.location}: registered frequencies {well.frequencies} "
                f"vs measured {freqs}"
            )

    locs = np.stack([w.location for w in V.wells]) if V.wells else np.zeros((0, V.dimension))
    near_zero = vals < UNREGISTERED_ZERO_TOL
    unregistered: list[tuple[float, ...]] = []
    if np.any(near_zero):
        cand = pts[near_zero]
        if locs.size:
            dists = np.sqrt(((cand[:, None, :] - locs[None, :, :]) ** 2).sum(axis=2))
            far = dists.min(axis=1) > WELL_EXCLUSION_RADIUS
        else:
            far = np.ones(cand.shape[0], dtype=bool)
        unregistered = [tuple(p) for p in cand[far][:16]]

    norms = np.sqrt((pts**2).sum(axis=1))
    ring = (norms > V.positivity_radius) & (norms <= scan_radius)
    if np.any(ring):
        floor_margin = float(vals[ring].min() - V.positivity_floor)
        positive = bool(floor_margin >= 0.0)
    else:
        floor_margin = math.nan
        positive = False

    return ValidationReport(
        nonnegative=nonnegative,
        min_value=float(vals[i_min]),
        argmin=tuple(pts[i_min]),
        wells_valid=wells_valid,
        well_messages=tuple(well_messages),
        unregistered_zeros=tuple(unregistered),
        positive_at_infinity=positive,
        floor_margin=floor_margin,
        zero_count=len(V.wells),
    )


@dataclass(frozen=True)
class ScalingParams:
    """Coupled scaling data: mesh 1/N, exponent gamma, well frequency omega.

    Derived quantities: ``lam = N**(1 - gamma)`` multiplies the potential
    quadratically in the lattice operator, ``kappa = sqrt(omega / N**(1 +
    gamma))`` is the single small parameter of the reduced harmonic
    operator, and ``mesh = 1/N``.
    """

    N: int
    gamma: float
    omega: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))
        if not self.omega > 0:
            raise ValueError("omega must be positive (kappa > 0 requires it)")

    @property
    def lam(self) -> float:
        return float(self.N) ** (1.0 - self.gamma)

    @property
    def kappa(self) -> float:
        return math.sqrt(self.omega * float(self.N) ** (-(1.0 + self.gamma)))

    @property
    def mesh(self) -> float:
        return 1.0 / float(self.N)


# ----------------------------------------------------------------------
# builtin catalogue
# ----------------------------------------------------------------------

def harmonic(omega: float | Sequence[float]) -> Potential:
    """Anisotropic harmonic potential ``V(x) = (omega_1^2 x_1^2 + ... ) / 2``."""
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(om <= 0):
        raise ValueError("harmonic frequencies must be positive")
    d = om.size

    def evaluator(pts: np.ndarray, _om=om) -> np.ndarray:
        return 0.5 * ((_om**2) * pts**2).sum(axis=-1)

    well = Well(location=np.zeros(d), frequencies=np.sort(om))
    axis = None
    if d > 1:
        axis = tuple(harmonic([w]) for w in om)
    floor = 0.5 * float(om.min()) ** 2
    return Potential(
        dimension=d,
        evaluator=evaluator,
        wells=(well,),
        positivity_radius=1.0,
        positivity_floor=floor,
        separable=d > 1,
        axis_potentials=axis,
        name="harmonic",
    )


def _dw_value(y: np.ndarray) -> np.ndarray:
    return 0.5 * (y * y - 1.0) ** 2


def double_well() -> Potential:
    """One-dimensional double well ``V(x) = (x^2 - 1)^2 / 2`` with wells at +-1."""

    def evaluator(pts: np.ndarray) -> np.ndarray:
        return _dw_value(pts[:, 0])

    wells = (
        Well(location=np.array([-1.0]), frequencies=np.array([2.0])),
        Well(location=np.array([1.0]), frequencies=np.array([2.0])),
    )
    return Potential(
        dimension=1,
        evaluator=evaluator,
        wells=wells,
        positivity_radius=2.0,
        positivity_floor=4.0,
        name="double_well",
    )


def double_well_nd(d: int) -> Potential:
    """Separable sum of 1-d double wells; ``2**d`` wells at the sign vectors."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if d == 1:
        return double_well()

    def evaluator(pts: np.ndarray) -> np.ndarray:
        return _dw_value(pts).sum(axis=-1)

    wells = []
    for signs in np.ndindex(*(2,) * d):
        loc = np.array([1.0 if s else -1.0 for s in signs])
        wells.append(Well(location=loc, frequencies=np.full(d, 2.0)))
    return Potential(
        dimension=d,
        evaluator=evaluator,
        wells=tuple(wells),
        positivity_radius=2.0 * math.sqrt(d),
        positivity_floor=4.0,
        separable=True,
        axis_potentials=tuple(double_well() for _ in range(d)),
        name=f"double_well_{d}d",
    )


def two_well(omega: float = 1.0, separation: float = 2.0, d: int = 1) -> Potential:
    """Two shifted harmonic wells spliced by a smooth soft minimum.

    Uses the harmonic mean of the two parabolas ``(omega^2/2)|x -+ a|^2``,
    which keeps exactly two zeros at ``+-a``, reproduces the Hessian
    ``omega^2 I`` at each well (the blending error is quartic in the
    distance to the well), and grows quadratically at infinity.
    """
    if omega <= 0 or separation <= 0:
        raise ValueError("omega and separation must be positive")
    a = np.zeros(d)
    a[0] = separation / 2.0

    def evaluator(pts: np.ndarray, _a=a, _om=omega) -> np.ndarray:
        vp = 0.5 * _om**2 * ((pts - _a) ** 2).sum(axis=-1)
        vm = 0.5 * _om**2 * ((pts + _a) ** 2).sum(axis=-1)
        return vp * vm / (vp + vm)

    wells = (
        Well(location=-a, frequencies=np.full(d, omega)),
        Well(location=a, frequencies=np.full(d, omega)),
    )
    radius = separation
    # on |x| = radius the softened value is at least a quarter of min parabola
    floor = 0.125 * omega**2 * (separation / 2.0) ** 2
    return Potential(
        dimension=d,
        evaluator=evaluator,
        wells=wells,
        positivity_radius=radius,
        positivity_floor=floor,
        name="two_well",
    )


_REGISTRY: dict[str, Callable[..., Potential]] = {}


def register_potential(name: str, factory: Callable[..., Potential]) -> None:
    """Register a custom potential factory for CLI lookup by id."""
    _REGISTRY[name] = factory


def builtin_potential(name: str, omega: Sequence[float] | None = None) -> Potential:
    """Resolve a potential by config key."""
    if name == "harmonic":
        return harmonic(omega if omega is not None else [1.0])
    if name == "double_well":
        return double_well()
    if name == "double_well_2d":
        return double_well_nd(2)
    if name == "two_well":
        om = omega[0] if omega else 1.0
        return two_well(omega=om)
    if name in _REGISTRY:
        return _REGISTRY[name]() if omega is None else _REGISTRY[name](omega)
    raise KeyError(f"unknown potential '{name}'")
