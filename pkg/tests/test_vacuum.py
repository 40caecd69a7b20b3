import numpy as np
import pytest
from scipy import stats

from pdcwigner.vacuum import (draw_realizations, load_ensemble, phase_shift_vacuum, sample_vacuum,
                              save_ensemble)

R = 100_000


@pytest.fixture(scope="module")
def big(small_grid):
    return sample_vacuum(small_grid, R, 99)


def test_same_seed_same_ensemble(small_grid):
    a = sample_vacuum(small_grid, 500, 7).amplitudes
    b = sample_vacuum(small_grid, 500, 7).amplitudes
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample_vacuum(small_grid, 500, 8).amplitudes)


def test_chunking_and_workers_do_not_change_samples(small_grid):
    a = sample_vacuum(small_grid, 1000, 3).amplitudes
    b = sample_vacuum(small_grid, 1000, 3, workers=3, chunk_size=77).amplitudes
    np.testing.assert_array_equal(a, b)


def test_subset_matches_batch_rows(small_grid):
    batch = sample_vacuum(small_grid, 12, 5).amplitudes
    picked = draw_realizations(5, [5, 3, 9], small_grid.n_modes)
    np.testing.assert_array_equal(picked, batch[[5, 3, 9]])


def test_mean_and_variance(big):
    a = big.amplitudes
    se_mean = np.sqrt(0.5) / np.sqrt(R)
    assert np.all(np.abs(a.mean(axis=0)) < 3 * se_mean)
    se_int = 0.5 / np.sqrt(R)
    assert np.all(np.abs((np.abs(a) ** 2).mean(axis=0) - 0.5) < 3 * se_int)
    # real and imaginary parts each have variance 1/4
    np.testing.assert_allclose(a.real.var(axis=0), 0.25, rtol=0.02)
    np.testing.assert_allclose(a.imag.var(axis=0), 0.25, rtol=0.02)


def test_phase_isotropy(big):
    phases = np.angle(big.amplitudes[:, 0])
    counts, _ = np.histogram(phases, bins=32, range=(-np.pi, np.pi))
    assert stats.chisquare(counts).pvalue > 1e-3


def test_modes_uncorrelated(big):
    a = big.amplitudes
    M = a.shape[1]
    for m in range(M):
        for n in range(m + 1, M):
            prod = a[:, m] * np.conj(a[:, n])
            err = np.std(prod) / np.sqrt(R)
            assert abs(prod.mean()) < 3 * err


def test_phase_shift_examples(small_grid):
    vac = sample_vacuum(small_grid, 50, 1)
    M = vac.n_modes
    np.testing.assert_array_equal(phase_shift_vacuum(vac, np.zeros(M)).amplitudes, vac.amplitudes)
    th = np.zeros(M)
    th[2] = np.pi
    shifted = phase_shift_vacuum(vac, th).amplitudes
    np.testing.assert_allclose(shifted[:, 2], -vac.amplitudes[:, 2], atol=1e-15)
    rnd = phase_shift_vacuum(vac, np.linspace(0, 5, M)).amplitudes
    np.testing.assert_allclose(np.abs(rnd), np.abs(vac.amplitudes), rtol=1e-15)
    with pytest.raises(ValueError):
        phase_shift_vacuum(vac, np.full(M, np.nan))


def test_binary_round_trip(tmp_path, small_grid):
    vac = sample_vacuum(small_grid, 37, 2 ** 63 + 11)
    path = tmp_path / "vac.bin"
    save_ensemble(vac, path)
    assert path.stat().st_size == 32 + 37 * small_grid.n_modes * 16
    back = load_ensemble(path, small_grid)
    np.testing.assert_array_equal(back.amplitudes, vac.amplitudes)
    assert back.seed == vac.seed


def test_rejects_bad_input(small_grid):
    with pytest.raises(ValueError):
        sample_vacuum(small_grid, 0, 1)
    with pytest.raises(ValueError):
        sample_vacuum(small_grid, 10, -1)
