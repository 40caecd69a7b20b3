"""Zeropoint (vacuum) amplitude ensembles with Wigner vacuum statistics.

Each realization ``r`` is drawn from its own counter-based stream:
``numpy.random.Philox`` keyed with ``(seed, r)``, consumed by
``Generator.standard_normal`` (ziggurat). The first M normals are the real
parts, the next M the imaginary parts, both scaled by 1/2 so that
``<|alpha|^2> = 1/2``. Any subset of realizations can therefore be rebuilt
in any order, or in parallel, with bit-identical results.
"""
from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .modes import ModeGrid

VACUUM_VARIANCE = 0.5  # <|alpha|^2> per mode
_MAGIC = b"PDCWVAC1"
_HEADER = struct.Struct("<8sQQQ")  # magic, R, M, seed -> 32 bytes
DEFAULT_CHUNK = 8192


@dataclass(frozen=True)
class VacuumEnsemble:
    amplitudes: np.ndarray  # (R, M) complex128
    seed: int
    grid: ModeGrid

    @property
    def n_realizations(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_modes(self) -> int:
        return self.amplitudes.shape[1]


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def draw_realizations(seed: int, indices, n_modes: int) -> np.ndarray:
    """Amplitudes for the given realization indices, one row each."""
    seed = _check_seed(seed)
    indices = np.asarray(indices, dtype=np.uint64).ravel()
    out = np.empty((indices.size, n_modes), dtype=complex)
    scale = np.sqrt(VACUUM_VARIANCE / 2)
    for row, r in enumerate(indices):
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, r], dtype=np.uint64)))
        z = gen.standard_normal(2 * n_modes)
        out[row].real = z[:n_modes] * scale
        out[row].imag = z[n_modes:] * scale
    return out


def sample_vacuum(grid: ModeGrid, n_realizations: int, seed: int, *,
                  workers: int = 1, chunk_size: int = DEFAULT_CHUNK) -> VacuumEnsemble:
    if n_realizations < 1:
        raise ValueError(f"n_realizations must be >= 1, got {n_realizations}")
    seed = _check_seed(seed)
    amps = np.empty((n_realizations, grid.n_modes), dtype=complex)
    starts = range(0, n_realizations, chunk_size)

    def fill(start):
        stop = min(start + chunk_size, n_realizations)
        amps[start:stop] = draw_realizations(seed, np.arange(start, stop), grid.n_modes)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, starts))
    else:
        for s in starts:
            fill(s)
    amps.setflags(write=False)
    return VacuumEnsemble(amps, seed, grid)


def phase_shift_vacuum(ensemble: VacuumEnsemble, mode_phases) -> VacuumEnsemble:
    """Multiply column ``m`` by ``exp(-i theta_m)`` (free evolution of the inputs)."""
    phases = np.asarray(mode_phases, dtype=float)
    if phases.shape != (ensemble.n_modes,):
        raise ValueError(f"expected {ensemble.n_modes} phases, got shape {phases.shape}")
    if not np.all(np.isfinite(phases)):
        raise ValueError("phases must be finite")
    amps = ensemble.amplitudes * np.exp(-1j * phases)
    amps.setflags(write=False)
    return VacuumEnsemble(amps, ensemble.seed, ensemble.grid)


def save_ensemble(ensemble: VacuumEnsemble, path) -> None:
    """Write the 32-byte header followed by interleaved little-endian re/im float64."""
    R, M = ensemble.amplitudes.shape
    body = np.ascontiguousarray(ensemble.amplitudes).view("<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, R, M, ensemble.seed))
        fh.write(body.astype("<f8", copy=False).tobytes())


def load_ensemble(path, grid: ModeGrid) -> VacuumEnsemble:
    data = Path(path).read_bytes()
    magic, R, M, seed = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a vacuum ensemble file")
    if M != grid.n_modes:
        raise ValueError(f"{path}: file has {M} modes, grid has {grid.n_modes}")
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if flat.size != 2 * R * M:
        raise ValueError(f"{path}: truncated payload")
    amps = flat.astype(float).view(complex).reshape(R, M)
    amps.setflags(write=False)
    return VacuumEnsemble(amps, int(seed), grid)
