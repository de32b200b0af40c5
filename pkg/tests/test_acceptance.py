"""Acceptance checks, one per criterion. Each prints a single PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines, or directly
with ``python3 tests/test_acceptance.py`` for a plain report.
"""
import itertools
import time

import numpy as np
import pytest
from scipy.stats import norm

from superres.ballres import (boundary_identity_residual, random_automorphism, random_perturbation,
                              sphere_mean_mc, sphere_weights, verify_ball_bound)
from superres.harness import ExperimentConfig, run
from superres.multipoly import CPoly, PowerSeries, TrigPoly
from superres.phase import (fourier_coeffs, near_half_fraction, phase_function, reconstruct_phi,
                            universal_L)
from superres.polydisk import CayleyInner, nonuniqueness_demo, pluriharmonic_check, rif_from_denominator
from superres.schur1d import (SchurChain, blaschke_from_chain, random_perturbations, schur_parameters,
                              superres_bound_1d, verify_superres_1d, wall_identity_residual,
                              wall_polynomials)
from superres.semialg import LambdaProfile, PushforwardPoly, lambda_decay_check, pushforward_Q, superres_sweep


def report(label: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    assert ok, detail


def _cayley_z(z):
    z = np.asarray(z)[..., 0]
    return (1 + z) / (1 - z)


@pytest.fixture(scope="module")
def half():
    return phase_function(_cayley_z, 2**12, 1)


@pytest.fixture(scope="module")
def bidisk():
    p = CPoly(2, {(0, 0): 2, (1, 0): -1, (0, 1): -1})
    R = CayleyInner(rif_from_denominator(p, (0, 0)))
    return R, phase_function(R, 2**9, 2)


def test_c01_schur_round_trip():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_rt = worst_wall = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 11))
        gam = list(0.95 * np.sqrt(rng.random(n - 1)) * np.exp(2j * np.pi * rng.random(n - 1)))
        gam.append(np.exp(2j * np.pi * rng.random()))
        c = blaschke_from_chain(SchurChain(gam, True)).taylor(n - 1)
        back = blaschke_from_chain(schur_parameters(c)).taylor(n - 1)
        worst_rt = max(worst_rt, float(np.max(np.abs(back - c))))
        worst_wall = max(worst_wall, wall_identity_residual(wall_polynomials(gam)))
    dt = time.perf_counter() - t0
    report("1 schur round trip", worst_rt <= 1e-8 and worst_wall <= 1e-11 and dt < 5,
           f"round trip {worst_rt:.2e} (<=1e-8), wall {worst_wall:.2e} (<=1e-11), {dt:.2f}s (<5s)")


def test_c02_superres_1d():
    t0 = time.perf_counter()
    c = [0.5, 0.75]
    L = superres_bound_1d(c, 1e-3).L
    perts = random_perturbations(c, 50, 1e-3, seed=0)
    rows = verify_superres_1d(c, perts, radii=(0.0, 0.3, 0.5, 0.7, 0.8, 0.9))
    max_eps = max(r.eps for r in rows)
    worst = max(r.violation for r in rows)
    dt = time.perf_counter() - t0
    report("2 superres 1d", abs(L - 0.5) <= 1e-9 and max_eps <= 1e-3 and worst <= 0 and dt < 30,
           f"L={L:.12f}, max eps {max_eps:.2e}, worst excess {worst:.2e} (<=0), {dt:.2f}s (<30s)")


def test_c03_phase_anchors(half):
    tab = fourier_coeffs(half, 4)
    g0, g1, g2 = tab[(0,)], tab[(1,)], tab[(2,)]
    univ = universal_L(PowerSeries(np.array([1.0, 2, 2, 2, 2])))
    diff = univ.max_diff(tab, [(k,) for k in range(5)])
    rec = reconstruct_phi(half, 0.0, 0.5)
    ok = (abs(g0 - 0.5) <= 1e-6 and abs(g1 - 1j / np.pi) <= 1e-3 and abs(g2) <= 1e-3 and diff <= 1e-3
          and abs(rec - 3) <= 1e-2)
    report("3 phase anchors", ok, f"g(0)-1/2={abs(g0 - 0.5):.1e}, |g(1)-i/pi|={abs(g1 - 1j / np.pi):.1e}, "
           f"|g(2)|={abs(g2):.1e}, universal vs fft {diff:.1e}, phi(1/2)={rec.real:.6f}")


def test_c04_indicator(bidisk):
    frac = near_half_fraction(bidisk[1], 0.02)
    report("4 indicator property", frac <= 0.02, f"fraction with min(g,1-g)>0.02 is {frac:.4%} (<=2%)")


def test_c05_pluriharmonic(half, bidisk):
    R, g2 = bidisk
    p = CPoly(2, {(0, 0): 3, (1, 0): -1, (0, 1): -1, (1, 1): 0.5})
    R3 = CayleyInner(rif_from_denominator(p, (1, 0)))
    g3 = phase_function(R3, 2**9, 2)
    checks = [pluriharmonic_check(fourier_coeffs(half, 8), tol=5e-3),
              pluriharmonic_check(fourier_coeffs(g2, R.degree), tol=5e-3),
              pluriharmonic_check(fourier_coeffs(g3, R3.degree), tol=5e-3)]
    worst = max(c.max_mixed for c in checks)
    report("5 pluriharmonic", all(c.passed for c in checks), f"largest mixed coefficient {worst:.2e} (<=5e-3)")


def test_c06_pushforward_lambda():
    Q = pushforward_Q(TrigPoly(np.zeros(2), np.array([0.0, 1.0])), 1, 1)
    exact = np.array_equal(Q.coeffs, np.array([0.0, -2.0, 0.0]))
    prof = LambdaProfile(PushforwardPoly(np.array([0.0, 1.0]), (1,), 0))
    rel = max(abs(prof(e) / (e**2 / 4) - 1) for e in (0.1, 0.2, 0.5))
    slope = lambda_decay_check(None, 1, profile=prof).slope
    report("6 pushforward and lambda", exact and rel <= 0.01 and abs(slope - 2) <= 0.05,
           f"Q exact={exact}, lambda rel err {rel:.2e} (<=1%), slope {slope:.4f} (2+-0.05)")


def test_c07_polydisk_sweep():
    t0 = time.perf_counter()
    R = CayleyInner(rif_from_denominator(CPoly(2, {(0, 0): 2, (1, 0): -1, (0, 1): -1}), (0, 0)))
    rep = superres_sweep(R, K_radius=0.5)
    dt = time.perf_counter() - t0
    deltas = [r.delta for r in rep.rows]
    valid = "nowhere" if rep.a_valid_delta is None else "on [%.3g, %.3g]" % tuple(rep.a_valid_delta)
    worst = max(r.bound_b_ratio for r in rep.rows)
    report("7 polydisk sweep", rep.monotone and rep.form_b_holds and rep.kappa_pred > 0 and dt < 300,
           f"monotone={rep.monotone}, max ratio {worst:.12f} (<=1), kappa_pred={rep.kappa_pred:.4g}, "
           f"A={rep.A_fit:.3g}, B={rep.B_fit:.3g}, headline C={rep.C_fit:.3g} holds {valid} "
           f"of delta in [{min(deltas):.2e}, {max(deltas):.2e}], {dt:.1f}s (<300s)")


def test_c08_ball():
    rng = np.random.default_rng(7)
    slack = np.inf
    ident = 0.0
    for i in range(100):
        F = random_automorphism(2 + i % 2, rng)
        row = verify_ball_bound(F, random_perturbation(F, rng), seed=i)
        slack = min(slack, row.slack)
        ident = max(ident, boundary_identity_residual(F, n=10**4, seed=i))
    # family-wise 3 sigma over all monomials of total degree <= 4 (Bonferroni)
    tests = [(d, a) for d in (2, 3) for a in itertools.product(range(5), repeat=d) if sum(a) <= 4]
    k = norm.isf(norm.sf(3) / len(tests))
    z_max = 0.0
    for idx, (d, alpha) in enumerate(tests):
        w = sphere_weights(d, 4)[alpha]
        mean, se = sphere_mean_mc(lambda z: np.abs(np.prod(z ** np.array(alpha), axis=-1)) ** 2, d, seed=idx)
        z_max = max(z_max, abs(mean - w) / se if se > 0 else (0.0 if abs(mean - w) <= 1e-12 else np.inf))
    report("8 ball bound", slack >= -1e-6 and ident <= 1e-9 and z_max <= k,
           f"min slack {slack:.3e} (>=-1e-6), boundary identity {ident:.1e} (<=1e-9), "
           f"weights max |z|={z_max:.2f} over {len(tests)} monomials (<= {k:.2f}, family-wise 3 sigma)")


def test_c09_nonuniqueness_demo():
    rows = nonuniqueness_demo(np.linspace(0, 0.25, 11))
    dev_f = max(abs(r.sup_f - 1) for r in rows)
    dev_g = max(abs(r.sup_g - 1) for r in rows)
    fixed = all(r.affine_f == rows[0].affine_f and r.affine_g == rows[0].affine_g for r in rows)
    report("9 nonuniqueness demo", dev_f <= 1e-4 and dev_g <= 1e-4 and fixed,
           f"max |sup f - 1| {dev_f:.1e}, max |sup g - 1| {dev_g:.4f} (<=1e-4), affine sections fixed={fixed}")


def test_c10_determinism(tmp_path):
    configs = [ExperimentConfig(kind="schur", params={"count": 5}),
               ExperimentConfig(kind="phase", grid=256),
               ExperimentConfig(kind="superres", grid=64, schedule=[0.25, 0.125, 0.0625]),
               ExperimentConfig(kind="lambda", params={"log2_samples": 14}),
               ExperimentConfig(kind="ball", params={"count": 10}),
               ExperimentConfig(kind="demo", schedule=[0.0, 0.125, 0.25])]
    same = []
    for cfg in configs:
        outs = []
        for rep, threads in enumerate((1, 2)):
            cfg.out, cfg.threads = str(tmp_path / f"{cfg.kind}{rep}"), threads
            run(cfg)
            outs.append((tmp_path / f"{cfg.kind}{rep}" / f"{cfg.kind}.csv").read_bytes())
        same.append(outs[0] == outs[1])
    report("10 determinism", all(same), f"{sum(same)}/{len(same)} experiments byte-identical")


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    h = phase_function(_cayley_z, 2**12, 1)
    p = CPoly(2, {(0, 0): 2, (1, 0): -1, (0, 1): -1})
    R = CayleyInner(rif_from_denominator(p, (0, 0)))
    b = (R, phase_function(R, 2**9, 2))
    calls = [test_c01_schur_round_trip, test_c02_superres_1d, lambda: test_c03_phase_anchors(h),
             lambda: test_c04_indicator(b), lambda: test_c05_pluriharmonic(h, b), test_c06_pushforward_lambda,
             test_c07_polydisk_sweep, test_c08_ball, test_c09_nonuniqueness_demo,
             lambda: test_c10_determinism(Path(tempfile.mkdtemp()))]
    failed = 0
    for call in calls:
        try:
            call()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
