"""Field correlation functions: exact Gaussian mode sums and Monte Carlo estimates.

The analytic side uses only the second moments of the transform map
(``covariance`` and ``pseudo_covariance``), so it is independent of any
sampled ensemble.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crystal import CrystalParams, TransformMap, build_transform_map, g_matrix
from .fields import C_LIGHT, field_vectors
from .modes import ModeGrid, Sector
from .vacuum import VACUUM_VARIANCE


@dataclass(frozen=True)
class CorrelationEstimate:
    value: complex
    stderr: float
    n_samples: int
    kind: str  # "MC" or "analytic"


def jackknife_mean(samples) -> tuple[complex, float]:
    """Mean and leave-one-out jackknife standard error (complex-aware).

    For complex samples the error combines the real and imaginary scatter.
    """
    x = np.asarray(samples)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two samples for a jackknife error")
    total = x.sum(axis=0)
    mean = total / n
    loo = (total - x) / (n - 1)
    var = (n - 1) / n * np.sum(np.abs(loo - mean) ** 2, axis=0)
    return mean, np.sqrt(var)


def mc_correlation(a, b, conjugate_b: bool = True) -> CorrelationEstimate:
    """Ensemble average of ``a*conj(b)`` (or ``a*b``) over realizations."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"realization counts differ: {a.shape[0]} vs {b.shape[0]}")
    prod = a * (np.conj(b) if conjugate_b else b)
    mean, err = jackknife_mean(prod)
    return CorrelationEstimate(complex(mean), float(err), a.shape[0], "MC")


def _mode_vector(grid: ModeGrid, sector: Sector, distance: float, t: float) -> np.ndarray:
    v = np.zeros(grid.n_modes, dtype=complex)
    v[grid.indices(sector)] = field_vectors(grid, sector, distance, t)[0]
    return v


def _tmap(grid, params, tmap):
    return tmap if tmap is not None else build_transform_map(grid, params)


def field_moment(grid: ModeGrid, params: CrystalParams, sector_a: Sector, t_a: float,
                 sector_b: Sector, t_b: float, *, conjugate_b: bool, distance_a: float = 0.0,
                 distance_b: float = 0.0, tmap: TransformMap | None = None) -> complex:
    """Exact ``<F_a(t_a) F_b(t_b)>`` or ``<F_a(t_a) conj(F_b(t_b))>`` of the output field."""
    tm = _tmap(grid, params, tmap)
    va = _mode_vector(grid, Sector(sector_a), distance_a, t_a)
    vb = _mode_vector(grid, Sector(sector_b), distance_b, t_b)
    if conjugate_b:
        return complex(va @ tm.covariance @ np.conj(vb))
    return complex(va @ tm.pseudo_covariance @ vb)


def analytic_cross(grid: ModeGrid, params: CrystalParams, tau: float, *, t: float = 0.0,
                   sectors=(Sector.E, Sector.O), tmap: TransformMap | None = None) -> complex:
    """``<F_e(0, t) F_o(0, t + tau)> = gV nu(tau)`` at the crystal center."""
    se, so = sectors
    return field_moment(grid, params, se, t, so, t + tau, conjugate_b=False, tmap=tmap)


def propagated_cross(grid: ModeGrid, params: CrystalParams, d_a: float, t_a: float,
                     d_b: float, t_b: float, *, sectors=(Sector.E, Sector.O),
                     tmap: TransformMap | None = None) -> complex:
    """Cross-correlation between points on the two beams, from the center value.

    Each field is traced back to the crystal center with the free-propagation
    rule, so only the ``r = 0`` correlation is summed.
    """
    se, so = (Sector(s) for s in sectors)
    ta0 = t_a - d_a / C_LIGHT
    tb0 = t_b - d_b / C_LIGHT
    phase = np.exp(1j * (grid.sector_frequency(se) * d_a + grid.sector_frequency(so) * d_b) / C_LIGHT)
    return phase * analytic_cross(grid, params, tb0 - ta0, t=ta0, sectors=(se, so), tmap=tmap)


def nu(grid: ModeGrid, params: CrystalParams, tau: float, *, t: float = 0.0,
       sectors=(Sector.E, Sector.O)) -> complex:
    """Leading-order cross envelope: ``<F_e(t) F_o(t + tau)> = gV nu(tau) + O(g^3)``.

    Built from the G coefficients alone, so it does not depend on g.
    """
    se, so = (Sector(s) for s in sectors)
    if so != se.conjugate:
        return 0j
    pair = VACUUM_VARIANCE * (g_matrix(grid, params, se) + g_matrix(grid, params, so).T)
    va = field_vectors(grid, se, 0.0, t)[0]
    vb = field_vectors(grid, so, 0.0, t + tau)[0]
    return complex(va @ pair @ vb)


def mu(grid: ModeGrid, params: CrystalParams, sector: Sector, tau: float, *, t: float = 0.0) -> complex:
    """Autocorrelation envelope ``mu(tau) = 2 <G F-(t) G* F+(t + tau)>``.

    This is the generated-light part alone; it does not depend on g.
    """
    sector = Sector(sector)
    G = g_matrix(grid, params, sector)
    beta_cov = VACUUM_VARIANCE * G @ G.conj().T
    va = field_vectors(grid, sector, 0.0, t)[0]
    vb = field_vectors(grid, sector, 0.0, t + tau)[0]
    return complex(2 * va @ beta_cov @ np.conj(vb))


def analytic_auto(grid: ModeGrid, params: CrystalParams, sector: Sector, tau: float, *,
                  t: float = 0.0) -> complex:
    """Excess autocorrelation ``g^2 |V|^2 mu(tau)`` over the vacuum term."""
    return params.coupling ** 2 * mu(grid, params, sector, tau, t=t)


def exact_auto_excess(grid: ModeGrid, params: CrystalParams, sector: Sector, tau: float, *,
                      t: float = 0.0, tmap: TransformMap | None = None) -> complex:
    """``<F(t) conj(F(t + tau))>`` minus its vacuum value, summed from the map's moments.

    Unlike :func:`analytic_auto` this keeps the order-g^2 self term and the
    g^4 remainders of the implemented map, so it is the oracle for MC
    intensity estimates.
    """
    tm = _tmap(grid, params, tmap)
    sector = Sector(sector)
    va = _mode_vector(grid, sector, 0.0, t)
    vb = _mode_vector(grid, sector, 0.0, t + tau)
    excess = tm.covariance - VACUUM_VARIANCE * np.eye(grid.n_modes)
    return complex(va @ excess @ np.conj(vb))


def vacuum_intensity(grid: ModeGrid, sector: Sector) -> float:
    """Mean vacuum intensity ``sum w_k^2 <|alpha|^2>`` of one sector."""
    return float(VACUUM_VARIANCE * np.sum(grid.weights[grid.indices(Sector(sector))] ** 2))


def coherence_time(grid: ModeGrid, params: CrystalParams, sector: Sector = Sector.E, *,
                   resolution: int = 4096) -> float:
    """First tau with ``|mu(tau)| / |mu(0)| < 1/e``, by scanning up to one grid period."""
    sector = Sector(sector)
    if grid.n_pairs < 2 or grid.bandwidth == 0:
        return float("inf")
    spacing = grid.bandwidth / (grid.n_pairs - 1)
    taus = np.linspace(0.0, 2 * np.pi / spacing, resolution)
    G = g_matrix(grid, params, sector)
    beta_cov = G @ G.conj().T
    v = field_vectors(grid, sector, 0.0, taus)
    vals = np.abs(v[0] @ beta_cov @ np.conj(v).T)
    below = np.nonzero(vals / vals[0] < np.exp(-1))[0]
    if below.size == 0:
        return float("inf")
    i = below[0]
    # linear interpolation between the bracketing scan points
    r0, r1 = vals[i - 1] / vals[0], vals[i] / vals[0]
    frac = (r0 - np.exp(-1)) / (r0 - r1)
    return float(taus[i - 1] + frac * (taus[i] - taus[i - 1]))
