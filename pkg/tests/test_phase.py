import json

import numpy as np
import pytest

from superres.multipoly import CPoly, PowerSeries, TrigPoly
from superres.phase import (FourierTable, NotHerglotzError, PhaseGrid, fit_indicator_poly, fourier_coeffs,
                            im_psi_at_origin, indicator_fit, near_half_fraction, phase_function,
                            reconstruct_phi, rif_indicator_poly, universal_L)
from superres.polydisk import CayleyInner, pluriharmonic_check, rif_from_denominator


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
    return p, R, phase_function(R, 2**9, 2)


def test_constant_phase():
    g = phase_function(lambda z: np.ones(z.shape[:-1]), 64, 1)
    assert np.allclose(g.samples, 0.5)
    T = fourier_coeffs(g, 3)
    assert T[(0,)] == pytest.approx(0.5)
    assert all(abs(c) < 1e-15 for a, c in T.items() if a != (0,))


def test_half_circle_indicator(half):
    th = 2 * np.pi * np.arange(half.N) / half.N
    inside = (th > np.pi) & (th < 2 * np.pi)
    upper = (th > 0) & (th < np.pi)
    assert np.allclose(half.samples[inside], 1, atol=1e-9)
    assert np.allclose(half.samples[upper], 0, atol=1e-9)


def test_cayley_of_product_is_indicator():
    R = CayleyInner(rif_from_denominator(CPoly.constant(2, 1), (1, 1)))
    g = phase_function(R, 64, 2)
    th = 2 * np.pi * np.arange(64) / 64
    s = np.sin(th[:, None] + th[None, :])
    assert np.allclose(g.samples[s < -1e-12], 1, atol=1e-9)
    assert np.allclose(g.samples[s > 1e-12], 0, atol=1e-9)


def test_not_herglotz():
    with pytest.raises(NotHerglotzError):
        phase_function(lambda z: -np.ones(z.shape[:-1]), 16, 1)


def test_half_circle_fourier(half):
    T = fourier_coeffs(half, 2)
    assert T[(1,)] == pytest.approx(1j / np.pi, abs=1e-3)
    assert abs(T[(2,)]) < 1e-3
    assert T.symmetry_residual() < 1e-10


def test_nyquist_guard(half):
    small = PhaseGrid(1, 8, half.samples[:: half.N // 8])
    with pytest.raises(ValueError):
        fourier_coeffs(small, 4)


def test_universal_map_examples():
    U = universal_L(PowerSeries(np.array([1.0, 0, 0])))
    assert U[(0,)] == pytest.approx(0.5) and abs(U[(1,)]) == 0
    U = universal_L(PowerSeries(np.array([1.0, 2, 2, 2, 2])))
    assert U[(1,)] == pytest.approx(1j / np.pi)
    assert abs(U[(2,)]) < 1e-15


def test_reconstruction_examples(half):
    g = PhaseGrid(1, 64, np.full(64, 0.5))
    assert reconstruct_phi(g, 0.0, 0.3) == pytest.approx(1)
    assert reconstruct_phi(half, 0.0, 0.0) == pytest.approx(1, abs=1e-6)
    assert reconstruct_phi(half, 0.0, 0.5) == pytest.approx(3, abs=1e-2)
    assert reconstruct_phi(half, 0.0, 0.5, method="series") == pytest.approx(3, abs=1e-2)


def test_indicator_fit_examples(half):
    P = TrigPoly(np.zeros(2), np.array([0.0, 1.0]))
    assert indicator_fit(half, P) <= 2 / half.N
    flat = PhaseGrid(1, 64, np.full(64, 0.5))
    assert indicator_fit(flat, P) >= 0.49
    exact = PhaseGrid(1, 64, (P.on_grid(64) > 0).astype(float))
    assert indicator_fit(exact, P) == 0


def test_exact_indicator_polynomial(bidisk):
    p, R, g = bidisk
    ip = rif_indicator_poly(p, (0, 0))
    assert ip.residual == 0
    assert indicator_fit(g, ip.P) < 0.01
    fit = fit_indicator_poly(g, (1, 1))
    assert fit.residual < 0.02


def test_cross_validation_one_variable(half):
    T = fourier_coeffs(half, 4)
    U = universal_L(PowerSeries(np.array([1.0, 2, 2, 2, 2])))
    assert U.max_diff(T, [(k,) for k in range(5)]) < 1e-3


def test_cross_validation_two_variables(bidisk):
    _, R, g = bidisk
    S = R.taylor_section(R.degree)
    assert universal_L(S).max_diff(fourier_coeffs(g, R.degree), list(S.box)) < 1e-3


def test_round_trip_two_variables(bidisk):
    _, R, g = bidisk
    rng = np.random.default_rng(2)
    z = 0.5 * np.sqrt(rng.random((40, 2))) * np.exp(2j * np.pi * rng.random((40, 2)))
    z[:8] = 0.5 * np.exp(2j * np.pi * rng.random((8, 2)))
    rec = reconstruct_phi(g, im_psi_at_origin(R(np.zeros(2))), z, method="series")
    assert np.max(np.abs(rec - R(z))) < 1e-3


def test_phase_is_zero_one_valued(bidisk):
    _, _, g = bidisk
    assert near_half_fraction(g) <= 4 * 2 / g.N
    assert g.samples.min() >= 0 and g.samples.max() <= 1
    assert g.mean == pytest.approx(fourier_coeffs(g, 0)[(0, 0)].real)


def test_pluriharmonic_from_herglotz(bidisk, half):
    assert pluriharmonic_check(fourier_coeffs(bidisk[2], 8)).passed
    assert pluriharmonic_check(fourier_coeffs(half, 8)).passed


def test_binary_round_trip(tmp_path, bidisk):
    g = bidisk[2]
    path = tmp_path / "g.phg"
    g.save(path)
    raw = path.read_bytes()
    assert raw[:4] == b"PHG1"
    back = PhaseGrid.load(path)
    assert back.d == 2 and back.N == g.N and back.radii == g.radii
    assert np.array_equal(back.samples, g.samples)


def test_table_json_round_trip():
    T = FourierTable(2, {(0, 0): 0.5 + 0j, (1, -1): 0.1 - 0.2j})
    assert FourierTable.from_json(json.dumps(T.to_json())).coeffs == T.coeffs


def test_threads_do_not_change_samples():
    p = CPoly(2, {(0, 0): 3, (1, 0): -1, (0, 1): -1j})
    R = CayleyInner(rif_from_denominator(p, (1, 0)))
    a = phase_function(R, 64, 2, threads=1)
    b = phase_function(R, 64, 2, threads=4)
    assert np.array_equal(a.samples, b.samples)
