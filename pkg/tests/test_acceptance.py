"""Acceptance suite: every advertised guarantee, one test per criterion.

Each test prints a single line ``[criterion NN] PASS/FAIL - detail`` (run
with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
go).  Tolerances are pinned here, not configurable; timed criteria assert
their wall-clock budget.
"""

import math
import time

import numpy as np

from lsc import hermite
from lsc.eigensolve import (
    classify_symmetry,
    dense_eigvalsh,
    eigenpairs,
    eigs_separable,
    eigs_tridiag,
    nodal_domains,
    subspace_upper_bounds,
)
from lsc.lattice import (
    LatticeBox,
    SymmetricLatticeOperator,
    assemble_Hkappa,
    assemble_HN,
    beta_rate_bound,
    build_interval_decomposition,
    double_commutator_norms,
    ims_identity_residual,
    ims_partition,
    partition_variation,
)
from lsc.potentials import Potential, ScalingParams, Well, double_well, harmonic
from lsc.semiclassics import (
    converge_study,
    harmonic_kappa_study,
    interval_lowerbound_experiment,
    modified_vs_plain,
    regime_sweep,
    sigma_enumerate,
)

KAPPA_GRID = (0.2, 0.1, 0.05, 0.025)


def report(number: int, ok: bool, detail: str) -> None:
    print(f"[criterion {number:>2}] {'PASS' if ok else 'FAIL'} - {detail}")


def test_criterion_01_harmonic_kappa_limit():
    t0 = time.perf_counter()
    study = harmonic_kappa_study(1.0, list(KAPPA_GRID), 5)
    elapsed = time.perf_counter() - t0
    worst_final = 0.0
    monotone = True
    for n in range(6):
        devs = study.deviations(n)
        monotone &= all(d2 < d1 for d1, d2 in zip(devs, devs[1:]))
        worst_final = max(worst_final, devs[-1])
    ok = monotone and worst_final <= 0.02 and elapsed <= 10.0
    report(1, ok, f"final dev {worst_final:.2e} (<=0.02), "
                  f"strictly decreasing: {monotone}, {elapsed:.1f}s (<=10s)")
    assert monotone
    assert worst_final <= 0.02
    assert elapsed <= 10.0


def test_criterion_02_ritz_sandwich():
    worst_rel = 0.0
    for kappa in KAPPA_GRID:
        box = LatticeBox.centered(1, hermite.box_halfwidth(5, kappa))
        op = assemble_Hkappa(kappa, box)
        xs = box.coords().astype(float)
        quasimodes = [hermite.weighted_eval(n, kappa * xs) for n in range(6)]
        exact = eigs_tridiag(op, 6).values
        for n in range(6):
            thetas = subspace_upper_bounds(op, quasimodes[: n + 1])
            theta_n = float(thetas[n])
            lower = exact[n] - 1e-12 * (1.0 + exact[n])
            upper = kappa**2 * (2 * n + 1) * (1.0 + 10.0 * kappa)
            assert lower <= theta_n <= upper, (kappa, n, theta_n, exact[n], upper)
            worst_rel = max(worst_rel, theta_n / (kappa**2 * (2 * n + 1)) - 1.0)
    report(2, True, f"E_n <= theta_n <= kappa^2(2n+1)(1+10 kappa); "
                    f"worst relative excess {worst_rel:.2e}")


def test_criterion_03_ims_exactness_randomized():
    rng = np.random.default_rng(20240817)
    t0 = time.perf_counter()
    worst_resid = 0.0
    worst_excess = -math.inf
    for trial in range(100):
        size = int(rng.integers(201, 2001))
        M = size // 2
        box = LatticeBox.centered(1, M)
        coupling = float(rng.uniform(0.25, 2.5))
        diag = 2.0 * coupling + rng.uniform(0.0, 4.0, box.size)
        op = SymmetricLatticeOperator(box=box, diagonal=diag, coupling=coupling)
        m = int(rng.integers(1, 4))
        r = float(rng.uniform(6.0, min(48.0, M / (2.0 * m + 1.0))))
        centers, guard = [], 0
        while len(centers) < m and guard < 60:
            c = int(rng.integers(-M + int(r) + 1, M - int(r)))
            if all(abs(c - c2[0]) > 2 * r + 2 for c2 in centers):
                centers.append((c,))
            guard += 1
        etas = ims_partition(centers, r, box)
        worst_resid = max(worst_resid, ims_identity_residual(op, etas))
        norms = double_commutator_norms(op, etas)
        variations = partition_variation(box, etas)
        bound_scale = 2.0 * op.hopping_norm_bound()
        for nrm, c in zip(norms, variations):
            worst_excess = max(worst_excess, nrm - bound_scale * c * c)
    elapsed = time.perf_counter() - t0
    ok = worst_resid <= 1e-12 and worst_excess <= 1e-12 and elapsed <= 5.0
    report(3, ok, f"identity residual {worst_resid:.1e} (<=1e-12), "
                  f"norm excess over 2|L|C^2: {worst_excess:.1e}, "
                  f"{elapsed:.1f}s (<=5s)")
    assert worst_resid <= 1e-12
    assert worst_excess <= 1e-12
    assert elapsed <= 5.0


def test_criterion_04_gamma_minus_one_exact():
    sweep = regime_sweep(1.0, [-1.0], [2, 4, 8, 16], 5)
    dev = sweep.minus_one_exact_dev
    report(4, dev <= 1e-12, f"max relative spread of E_n/N^2 across N: {dev:.1e}")
    assert dev <= 1e-12


def test_criterion_05_gamma_below_minus_one_limits():
    sweep = regime_sweep(1.0, [-2.0], [8, 16, 32], 4)
    Ns, table = sweep.energies[-2.0]
    scaled = table / (Ns.astype(float) ** 4)[:, None]
    targets = np.array([0.0, 0.5, 0.5, 2.0, 2.0])
    errs = np.abs(scaled - targets)
    final_ok = errs[-1, 0] <= 1e-2 and np.all(errs[-1, 1:] <= 5e-3)
    decreasing = bool(np.all(np.diff(errs, axis=0) < 0.0))
    report(5, final_ok and decreasing,
           f"|E/N^4 - target| at N=32: "
           f"{np.array2string(errs[-1], formatter={'float': '{:.1e}'.format})}; "
           f"decreasing in N: {decreasing}")
    assert errs[-1, 0] <= 1e-2
    assert np.all(errs[-1, 1:] <= 5e-3)
    assert decreasing


def test_criterion_06_regime_slopes():
    t0 = time.perf_counter()
    above = regime_sweep(1.0, [-0.5, 0.0, 0.5], [512, 1024, 2048, 4096], 0)
    below = regime_sweep(1.0, [-1.5, -2.0], [8, 16, 32, 64], 2)
    elapsed = time.perf_counter() - t0
    details = []
    ok = True
    for gamma in (-0.5, 0.0, 0.5):
        row = above.row(gamma, 0)
        err = abs(row.slope_fit - (1.0 - gamma))
        ok &= err <= 0.05
        details.append(f"g={gamma}: {err:.3f}")
    for gamma in (-1.5, -2.0):
        for n in (1, 2):
            row = below.row(gamma, n)
            err = abs(row.slope_fit - 2.0 * abs(gamma))
            ok &= err <= 0.1
            details.append(f"g={gamma},n={n}: {err:.3f}")
    ok &= elapsed <= 60.0
    report(6, ok, f"slope errors {'; '.join(details)}; {elapsed:.0f}s (<=60s)")
    for gamma in (-0.5, 0.0, 0.5):
        assert abs(above.row(gamma, 0).slope_fit - (1.0 - gamma)) <= 0.05
    for gamma in (-1.5, -2.0):
        for n in (1, 2):
            assert abs(below.row(gamma, n).slope_fit - 2.0 * abs(gamma)) <= 0.1
    assert elapsed <= 60.0


def test_criterion_07_multiwell_convergence():
    table = converge_study(double_well(), 0.0, [128, 256, 512, 1024], 1)
    final = {n: table.errors(n)[-1] for n in (0, 1)}
    decreasing = all(table.errors_decreasing[n] for n in (0, 1))
    targets_ok = all(r.target == 1.0 for r in table.rows)
    ok = decreasing and targets_ok and all(e <= 0.05 for e in final.values())
    report(7, ok, f"|E_n/lam - 1| at N=1024: {final[0]:.2e}, {final[1]:.2e} "
                  f"(<=0.05); decreasing: {decreasing}")
    assert targets_ok
    assert all(e <= 0.05 for e in final.values())
    assert decreasing


def test_criterion_08_nodal_and_parity_structure():
    cluster_cap = 0
    for kappa in (0.2, 0.1):
        box = LatticeBox.centered(1, hermite.box_halfwidth(8, kappa))
        op = assemble_Hkappa(kappa, box)
        res = eigenpairs(op, 7)
        cluster_cap = max(
            cluster_cap, max(len(c) for c in res.multiplicity_clusters())
        )
        for n in range(7):
            v = res.vectors[:, n]
            assert nodal_domains(v, index=n).count == n + 1, (kappa, n)
            want = "symmetric" if n % 2 == 0 else "antisymmetric"
            assert classify_symmetry(v) == want, (kappa, n)
    report(8, cluster_cap <= 2,
           f"nodal counts n+1 and parity alternation for n<=6, "
           f"kappa in (0.2, 0.1); largest multiplicity cluster {cluster_cap}")
    assert cluster_cap <= 2


def test_criterion_09_interval_decomposition():
    worst_anchor = 0.0
    worst_beta_margin = math.inf
    for n in (1, 2, 3, 4):
        C = beta_rate_bound(n, 0.1)
        for kappa in (0.1, 0.05):
            dec = build_interval_decomposition(n, kappa)
            assert dec.cover_ok(dec.min_halfwidth() + 50), (n, kappa)
            for j in range(dec.k):
                z = float(dec.zeros[j])
                if z > 0.0:
                    anchor = abs(dec.beta[j] * kappa * (dec.a[j] - 1) - z)
                    assert anchor <= 1e-13 * max(1.0, z), (n, kappa, j)
                    worst_anchor = max(worst_anchor, anchor)
                assert dec.beta[j] - 1.0 <= C * kappa, (n, kappa, j)
                worst_beta_margin = min(
                    worst_beta_margin, C * kappa - (dec.beta[j] - 1.0)
                )
    report(9, True, f"exact covers; worst anchor error {worst_anchor:.1e} "
                    f"(<=1e-13); beta rate margin {worst_beta_margin:.2e}")


def test_criterion_10_lower_bound_certificates():
    # The bounded-interval certificates and every restricted ground energy
    # meet the bound.  The capped certificate on the unbounded piece needs
    # the quadratic potential to clear (1 - eps) kappa^2 (2n + 1) just past
    # the spike at x_delta = floor(kappa^(-1-delta)); at kappa = 0.05,
    # delta = 0.25 that holds for n <= 2 but fails for n = 3, where
    # v(x_delta + 1) = 0.0116 < 0.01575.  The failure is parametric, not
    # numerical: these pinned parameters sit outside the small-kappa regime
    # the certificate construction needs at n = 3.
    ratios_ok = True
    cert_failures = []
    for n in (1, 2, 3):
        rep = interval_lowerbound_experiment(n, 0.05, 0.25, epsilon=0.1)
        ratios_ok &= rep.ratio_ok
        for row in rep.rows:
            if not row.cert_ok:
                cert_failures.append(
                    f"n={n} piece {row.label} slack {row.cert_slack:.2e}"
                )
    ok = ratios_ok and not cert_failures
    report(10, ok, f"min ratios >= 0.9 (2n+1): {ratios_ok}; "
                   f"certificate failures: {cert_failures or 'none'}")
    assert ratios_ok
    assert not cert_failures, (
        "unbounded-piece certificates fail at these pinned parameters: "
        + "; ".join(cert_failures)
        + " (v(x_delta + 1) < (1 - eps) kappa^2 (2n + 1) for n = 3; "
        "a valid run needs kappa <= (0.9 (2n+1))^(-1/(2 delta)))"
    )


def test_criterion_11_modified_vs_plain():
    # The spike ordering is unconditional.  The advertised 1e-6 closeness
    # needs the spike deep in the classically forbidden region, but at
    # kappa = 0.05, delta = 0.25 the spike sits at kappa x_delta = 2.1,
    # inside the allowed region for n >= 2; the measured scaled gaps are
    # of order 0.05..3, not 1e-6.  Faithfully asserted and failing.
    cmp_ = modified_vs_plain(3, [0.05], 0.25)
    gaps = {n: cmp_.gaps(n)[0] for n in range(4)}
    worst = max(gaps.values())
    ok = cmp_.ordering_ok and worst <= 1e-6
    report(11, ok, f"ordering holds: {cmp_.ordering_ok}; "
                   f"max |E~ - E|/kappa^2 = {worst:.3g} (required <= 1e-6)")
    assert cmp_.ordering_ok
    assert worst <= 1e-6, (
        f"scaled gaps {gaps} exceed 1e-6: the spike at x_delta = 42 "
        "(kappa x_delta = 2.1) is far too shallow in the Gaussian tail at "
        "these pinned parameters; the gap only reaches 1e-6 near "
        "delta -> 1/2 or at much smaller kappa"
    )


def three_well():
    locs = [np.array([-2.0]), np.array([0.0]), np.array([2.0])]
    oms = [1.0, 2.0, 3.0]

    def evaluator(pts):
        inv = np.zeros(pts.shape[0])
        for a, om in zip(locs, oms):
            inv += 1.0 / (0.5 * om**2 * ((pts - a) ** 2).sum(axis=-1) + 1e-300)
        return 1.0 / inv

    wells = tuple(Well(location=a, frequencies=np.array([om]))
                  for a, om in zip(locs, oms))
    return Potential(dimension=1, evaluator=evaluator, wells=wells,
                     positivity_radius=4.0, positivity_floor=0.2,
                     name="three_well")


def test_criterion_12_sigma_oracle_equivalence():
    cases = [
        harmonic([1.0]),
        harmonic([0.7, 1.3]),
        harmonic([1.0, 1.0, 2.0]),
        double_well(),
        three_well(),
    ]
    for V in cases:
        n_cap = {1: 60, 2: 30, 3: 12}[V.dimension]
        states = []
        for l, well in enumerate(V.wells):
            for multi in np.ndindex(*(n_cap + 1,) * V.dimension):
                value = 0.5 * float(sum(
                    w * (2 * m + 1) for w, m in zip(well.frequencies, multi)
                ))
                states.append((value, l, tuple(int(m) for m in multi)))
        states.sort()
        omega_min = min(float(w.frequencies[0]) for w in V.wells)
        assert states[49][0] < 0.5 * omega_min * (2 * n_cap + 1)
        seq = sigma_enumerate(V, 50)
        for i in range(50):
            value, l, multi = states[i]
            assert seq.values[i] == value, (V.name, i)
            assert seq.provenance[i] == (l, multi), (V.name, i)
    report(12, True, "heap enumeration == brute force on 50 values, "
                     "values, multiplicities and tie order exact")


def test_criterion_13_separability_2d():
    V = harmonic([1.0, 2.0])
    params = ScalingParams(N=4, gamma=0.0, omega=1.0)
    box2 = LatticeBox.centered(2, 30)
    dense = np.linalg.eigvalsh(assemble_HN(V, params, box2).dense())[:6]
    box1 = LatticeBox.centered(1, 30)
    per_axis = [
        eigs_tridiag(assemble_HN(Vj, params, box1), 6).values
        for Vj in V.axis_potentials
    ]
    tensor = eigs_separable(per_axis, 6)
    err = float(np.abs(dense - tensor).max())
    report(13, err <= 1e-9, f"dense 2-d vs tensorized 1-d, lowest 6: "
                            f"max err {err:.1e} (<=1e-9)")
    assert err <= 1e-9


def test_criterion_14_sturm_vs_dense_oracle():
    rng = np.random.default_rng(5)
    worst = 0.0
    for trial in range(50):
        n = int(rng.integers(1200, 2001)) if trial < 5 else int(rng.integers(50, 600))
        x = np.linspace(-1.0, 1.0, n)
        diag = rng.uniform(0.5, 4.0) * x * x + rng.uniform(0.0, 1.0, n)
        off = -rng.uniform(0.05, 1.5, n - 1)
        k = int(rng.integers(1, 7))
        got = eigs_tridiag((diag, off), k).values
        want = dense_eigvalsh((diag, off))[:k]
        rel = float(np.abs(got - want).max() / (1.0 + np.abs(want).max()))
        worst = max(worst, rel)
        assert rel <= 1e-10, (trial, n, rel)
    report(14, True, f"50 random confining tridiagonals (up to 2000x2000): "
                     f"worst relative disagreement {worst:.1e} (<=1e-10)")
