"""Second-order perturbative input-output map of the nonlinear crystal.

For an e-sector mode k (and symmetrically for o, e', o')::

    out_e(k) = vac_e(k)
             + g V sum_k' f(k,k') u[dt/2 (w_p - w_ek - w_ok')] conj(vac_o(k'))
             + g^2 |V|^2 sum_k',k'' f(k,k') f*(k',k'')
                   u[dt/2 (w_ok' + w_ek'' - w_p)] u[dt/2 (w_ek'' - w_ek)] vac_e(k'')

The map is realization independent, so it is precomputed once as
``out = alpha @ A.T + conj(alpha) @ B.T`` with dense M x M matrices.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .modes import SECTORS, ModeGrid, PhaseMatchKernel, Sector, kernel_matrix, sinc_kernel
from .vacuum import VACUUM_VARIANCE, VacuumEnsemble

DEFAULT_MAX_COUPLING = 0.1
HARD_MAX_COUPLING = 0.3


class PerturbativeWarning(UserWarning):
    """Coupling g|V| is above the configured perturbative ceiling."""


@dataclass(frozen=True)
class CrystalParams:
    g: float
    pump_amplitude: complex
    transit_time: float
    pump_frequency: float
    kernel: PhaseMatchKernel = field(default_factory=PhaseMatchKernel)
    max_coupling: float = DEFAULT_MAX_COUPLING

    def __post_init__(self):
        if not self.transit_time > 0:
            raise ValueError(f"transit_time must be positive, got {self.transit_time}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if not 0 < self.max_coupling <= HARD_MAX_COUPLING:
            raise ValueError(f"max_coupling must lie in (0, {HARD_MAX_COUPLING}], got {self.max_coupling}")
        object.__setattr__(self, "pump_amplitude", complex(self.pump_amplitude))

    @property
    def coupling(self) -> float:
        """Dimensionless g|V|."""
        return self.g * abs(self.pump_amplitude)

    @property
    def gV(self) -> complex:
        return self.g * self.pump_amplitude

    def check_perturbative(self) -> bool:
        if self.coupling > self.max_coupling:
            warnings.warn(
                f"g|V| = {self.coupling:g} exceeds the perturbative ceiling {self.max_coupling:g}; "
                "neglected higher-order terms may matter", PerturbativeWarning, stacklevel=3)
            return False
        return True


def g_matrix(grid: ModeGrid, params: CrystalParams, target: Sector) -> np.ndarray:
    """Coefficients of the order-g term: rows over ``target``, columns over its conjugate."""
    target = Sector(target)
    f = kernel_matrix(grid, target, params.kernel)
    w_t = grid.frequencies[grid.indices(target)]
    w_s = grid.frequencies[grid.indices(target.conjugate)]
    x = 0.5 * params.transit_time * (params.pump_frequency - w_t[:, None] - w_s[None, :])
    return f * sinc_kernel(x)


def j_matrix(grid: ModeGrid, params: CrystalParams, target: Sector) -> np.ndarray:
    """Coefficients of the order-g^2 term: rows k and columns k'' both over ``target``."""
    target = Sector(target)
    f = kernel_matrix(grid, target, params.kernel)  # f(k, k')
    f_back = kernel_matrix(grid, target.conjugate, params.kernel)  # f(k', k'')
    w_t = grid.frequencies[grid.indices(target)]
    w_s = grid.frequencies[grid.indices(target.conjugate)]
    dt2 = 0.5 * params.transit_time
    # u1[k', k''] and u2[k, k'']
    u1 = sinc_kernel(dt2 * (w_s[:, None] + w_t[None, :] - params.pump_frequency))
    u2 = sinc_kernel(dt2 * (w_t[None, :] - w_t[:, None]))
    return (f @ (np.conj(f_back) * u1)) * u2


def _check_amplitudes(alpha, grid: ModeGrid) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=complex)
    if alpha.shape[-1] != grid.n_pairs:
        raise ValueError(f"expected {grid.n_pairs} amplitudes per sector, got {alpha.shape[-1]}")
    return alpha


def apply_G(alpha_source, grid: ModeGrid, params: CrystalParams, target: Sector = Sector.E) -> np.ndarray:
    """beta_k for each ``target`` mode from source-sector amplitudes (conjugated here)."""
    alpha_source = _check_amplitudes(alpha_source, grid)
    return np.conj(alpha_source) @ g_matrix(grid, params, target).T


def apply_J(alpha_target, grid: ModeGrid, params: CrystalParams, target: Sector = Sector.E) -> np.ndarray:
    """gamma_k for each ``target`` mode from same-sector amplitudes."""
    alpha_target = _check_amplitudes(alpha_target, grid)
    return alpha_target @ j_matrix(grid, params, target).T


@dataclass(frozen=True)
class TransformMap:
    """Dense real-linear map ``out = A alpha + B conj(alpha)`` over all modes."""

    A: np.ndarray
    B: np.ndarray
    grid: ModeGrid
    params: CrystalParams

    @cached_property
    def covariance(self) -> np.ndarray:
        """``<out_k conj(out_l)>`` for vacuum inputs."""
        v = VACUUM_VARIANCE
        return v * (self.A @ self.A.conj().T + self.B @ self.B.conj().T)

    @cached_property
    def pseudo_covariance(self) -> np.ndarray:
        """``<out_k out_l>`` for vacuum inputs."""
        v = VACUUM_VARIANCE
        return v * (self.A @ self.B.T + self.B @ self.A.T)

    def apply(self, alpha: np.ndarray) -> np.ndarray:
        return alpha @ self.A.T + np.conj(alpha) @ self.B.T

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row", "column", "re", "im", "conjugate"])
        for flag, mat in ((0, self.A), (1, self.B)):
            rows, cols = np.nonzero(mat)
            for r, c in zip(rows, cols):
                writer.writerow([r, c, repr(float(mat[r, c].real)), repr(float(mat[r, c].imag)), flag])
        return buf.getvalue()


def build_transform_map(grid: ModeGrid, params: CrystalParams) -> TransformMap:
    if not np.isclose(grid.pump_frequency, params.pump_frequency, rtol=1e-12, atol=0.0):
        raise ValueError("grid and crystal parameters disagree on the pump frequency")
    params.check_perturbative()
    M = grid.n_modes
    A = np.eye(M, dtype=complex)
    B = np.zeros((M, M), dtype=complex)
    if params.g != 0:
        gV = params.gV
        g2V2 = params.coupling ** 2
        for target in SECTORS:
            rows = grid.indices(target)
            cols = grid.indices(target.conjugate)
            B[np.ix_(rows, cols)] = gV * g_matrix(grid, params, target)
            A[np.ix_(rows, rows)] += g2V2 * j_matrix(grid, params, target)
    for m in (A, B):
        m.setflags(write=False)
    return TransformMap(A, B, grid, params)


@dataclass(frozen=True)
class OutputEnsemble:
    amplitudes: np.ndarray  # (R, M) complex128
    grid: ModeGrid
    params: CrystalParams
    seed: int
    tmap: TransformMap

    @property
    def n_realizations(self) -> int:
        return self.amplitudes.shape[0]


def transform(vac: VacuumEnsemble, params: CrystalParams, grid: ModeGrid | None = None,
              tmap: TransformMap | None = None) -> OutputEnsemble:
    grid = grid if grid is not None else vac.grid
    if vac.grid.key != grid.key or vac.n_modes != grid.n_modes:
        raise ValueError("vacuum ensemble was not generated on this grid")
    if tmap is None:
        tmap = build_transform_map(grid, params)
    if params.g == 0:
        out = vac.amplitudes.copy()
    else:
        out = tmap.apply(vac.amplitudes)
    out.setflags(write=False)
    return OutputEnsemble(out, grid, params, vac.seed, tmap)
