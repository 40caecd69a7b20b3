import numpy as np
import pytest

from pdcwigner.crystal import (CrystalParams, PerturbativeWarning, apply_G, apply_J, build_transform_map,
                               g_matrix, j_matrix, transform)
from pdcwigner.modes import SECTORS, PhaseMatchKernel, Sector, build_mode_grid
from pdcwigner.vacuum import VacuumEnsemble, sample_vacuum


def _params(g, V=1.0, dt=1.0, wp=2.0, sigma=None):
    return CrystalParams(g, V, dt, wp, PhaseMatchKernel(sigma))


def _jackknife(fn, *samples):
    """Leave-one-out jackknife of a smooth function of sample means."""
    n = samples[0].shape[0]
    totals = [s.sum(axis=0) for s in samples]
    value = fn(*(t / n for t in totals))
    loo = fn(*((t - s) / (n - 1) for t, s in zip(totals, samples)))
    return value, np.sqrt((n - 1) / n * np.sum(np.abs(loo - np.mean(loo, axis=0)) ** 2, axis=0))


def test_zero_coupling_is_identity(small_grid):
    vac = sample_vacuum(small_grid, 200, 4)
    out = transform(vac, _params(0.0), small_grid)
    np.testing.assert_array_equal(out.amplitudes, vac.amplitudes)


def test_single_pair_closed_form():
    grid = build_mode_grid(1, 2.0, 0.0, 1.0, 1.0)
    g, V = 0.07, 0.8 * np.exp(0.4j)
    vac = sample_vacuum(grid, 300, 11)
    out = transform(vac, _params(g, V), grid).amplitudes
    a = vac.amplitudes
    e, o, ep, op = (grid.indices(s)[0] for s in SECTORS)
    c = 1 + g ** 2 * abs(V) ** 2
    np.testing.assert_allclose(out[:, e], a[:, e] * c + g * V * np.conj(a[:, o]), rtol=0, atol=1e-15)
    np.testing.assert_allclose(out[:, o], a[:, o] * c + g * V * np.conj(a[:, e]), rtol=0, atol=1e-15)
    np.testing.assert_allclose(out[:, ep], a[:, ep] * c + g * V * np.conj(a[:, op]), rtol=0, atol=1e-15)


def test_real_linearity(small_grid):
    p = _params(0.05, 0.9 - 0.3j, sigma=0.07)
    v1 = sample_vacuum(small_grid, 40, 1)
    v2 = sample_vacuum(small_grid, 40, 2)
    a, b = 1.7, -0.4
    mix = VacuumEnsemble(a * v1.amplitudes + b * v2.amplitudes, 0, small_grid)
    lhs = transform(mix, p).amplitudes
    rhs = a * transform(v1, p).amplitudes + b * transform(v2, p).amplitudes
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-14)


def test_G_and_J_examples():
    grid = build_mode_grid(1, 2.0, 0.0, 1.0, 1.0)
    p = _params(0.05)
    assert np.all(apply_G(np.zeros(1), grid, p) == 0)
    assert np.all(apply_J(np.zeros(1), grid, p) == 0)
    assert apply_G(np.ones(1), grid, p)[0] == 1
    assert apply_J(np.ones(1), grid, p)[0] == 1


def test_G_vanishes_at_sinc_zero():
    bw = 0.2
    grid = build_mode_grid(2, 2.0, bw, 1.0, 1.0)
    # e-mode 0 with o-mode 1 has mismatch bw; dt/2 * bw = pi
    p = _params(0.05, dt=2 * np.pi / bw, sigma=1.0)
    beta = apply_G(np.array([0.0, 1.0]), grid, p, Sector.E)
    assert abs(beta[0]) < 1e-14


def test_G_conjugates_its_input(small_grid):
    p = _params(0.05, sigma=0.05)
    alpha = np.array([1j, 2.0, -1 + 1j, 0.5j])
    np.testing.assert_allclose(apply_G(alpha, small_grid, p), g_matrix(small_grid, p, Sector.E) @ np.conj(alpha))


@pytest.mark.parametrize("sigma", [None, 0.05])
def test_finite_difference_extraction(small_grid, sigma):
    h, V = 1e-3, 0.6 + 0.5j
    vac = sample_vacuum(small_grid, 5, 21)
    outs = [transform(vac, _params(k * h, V, sigma=sigma)).amplitudes for k in (0, 1, 2)]
    second = (outs[2] - 2 * outs[1] + outs[0]) / (2 * h ** 2 * abs(V) ** 2)
    first = (4 * outs[1] - outs[2] - 3 * outs[0]) / (2 * h * V)
    p = _params(1.0, V, sigma=sigma)
    for target in SECTORS:
        idx_t = small_grid.indices(target)
        idx_s = small_grid.indices(target.conjugate)
        a = vac.amplitudes
        np.testing.assert_allclose(second[:, idx_t], apply_J(a[:, idx_t], small_grid, p, target), atol=5e-6)
        np.testing.assert_allclose(first[:, idx_t], apply_G(a[:, idx_s], small_grid, p, target), atol=5e-9)


def test_pairing_kernel_j_is_diagonal(small_grid):
    J = j_matrix(small_grid, _params(0.05), Sector.E)
    np.testing.assert_allclose(J, np.diag(np.diag(J)), atol=0)
    np.testing.assert_allclose(np.diag(J), 1.0, atol=1e-15)


@pytest.fixture(scope="module")
def stats_run(small_grid):
    p = _params(0.1, sigma=0.05)
    vac = sample_vacuum(small_grid, 100_000, 77)
    return vac, transform(vac, p), p


def test_output_is_complex_gaussian(stats_run):
    _, out, _ = stats_run
    a = out.amplitudes
    x4, x2 = np.abs(a) ** 4, np.abs(a) ** 2
    diff, err = _jackknife(lambda m4, m2: m4 - 2 * m2 ** 2, x4, x2)
    assert np.all(np.abs(diff) <= 5 * err)


def test_output_mean_zero(stats_run):
    _, out, _ = stats_run
    a = out.amplitudes
    err = np.std(a, axis=0) / np.sqrt(a.shape[0])
    assert np.all(np.abs(a.mean(axis=0)) <= 3 * err)


def test_sector_pairs_isolated(stats_run, small_grid):
    _, out, _ = stats_run
    a = out.amplitudes
    for i in np.concatenate([small_grid.indices(Sector.E), small_grid.indices(Sector.O)]):
        for j in np.concatenate([small_grid.indices(Sector.EP), small_grid.indices(Sector.OP)]):
            for prod in (a[:, i] * np.conj(a[:, j]), a[:, i] * a[:, j]):
                assert abs(prod.mean()) <= 3 * np.std(prod) / np.sqrt(prod.size)


def test_intensity_gain_matches_map_moments(stats_run, small_grid):
    vac, out, _ = stats_run
    gain = np.abs(out.amplitudes) ** 2 - np.abs(vac.amplitudes) ** 2
    err = np.std(gain, axis=0) / np.sqrt(gain.shape[0])
    exact = np.diag(out.tmap.covariance).real - 0.5
    assert np.all(np.abs(gain.mean(axis=0) - exact) <= 5 * err)


def test_ceiling_warning_and_validation(small_grid):
    with pytest.warns(PerturbativeWarning):
        build_transform_map(small_grid, _params(0.2))
    with pytest.raises(ValueError):
        CrystalParams(0.05, 1.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        CrystalParams(0.05, 1.0, 1.0, 2.0, max_coupling=0.5)


def test_rejects_grid_mismatch(small_grid, default_grid):
    vac = sample_vacuum(small_grid, 10, 1)
    with pytest.raises(ValueError):
        transform(vac, _params(0.05), default_grid)


def test_map_csv(small_grid):
    text = build_transform_map(small_grid, _params(0.05)).to_csv()
    lines = text.splitlines()
    assert lines[0] == "row,column,re,im,conjugate"
    # identity + J diagonal (M entries) and one G entry per mode
    assert len(lines) == 1 + 2 * small_grid.n_modes
