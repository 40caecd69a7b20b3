"""Slowly varying analytic signals, free propagation and polarizer projection."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .crystal import OutputEnsemble
from .modes import ModeGrid, Sector

C_LIGHT = 1.0

# (extraordinary-axis sector, ordinary-axis sector) carried by each beam
BEAM_SECTORS = {1: (Sector.E, Sector.OP), 2: (Sector.EP, Sector.O)}


@dataclass(frozen=True)
class TimeSeries:
    """Samples at ``t0 + n*dt`` along the last axis of ``values``."""

    t0: float
    dt: float
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.shape[-1])


@dataclass(frozen=True)
class BeamField:
    e_axis: TimeSeries
    o_axis: TimeSeries
    labels: tuple[str, str]


@dataclass(frozen=True)
class FieldProbe:
    """Detector placement on one beam.

    ``time_offsets`` must be strictly increasing and uniformly spaced; they
    double as the sample points of the detection window.
    """

    beam: int
    distance: float
    time_offsets: tuple[float, ...]
    polarizer_angle: float | None = None

    def __post_init__(self):
        if self.beam not in BEAM_SECTORS:
            raise ValueError(f"beam must be 1 or 2, got {self.beam}")
        if self.distance < 0:
            raise ValueError(f"distance must be non-negative, got {self.distance}")
        t = np.asarray(self.time_offsets, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("time_offsets must be a non-empty 1-D sequence")
        if t.size > 1:
            steps = np.diff(t)
            if np.any(steps <= 0):
                raise ValueError("time_offsets must be strictly increasing")
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise ValueError("time_offsets must be uniformly spaced")
        object.__setattr__(self, "time_offsets", tuple(float(x) for x in t))

    @classmethod
    def uniform(cls, beam: int, distance: float, dt: float, n_samples: int,
                polarizer_angle: float | None = None, t_start: float = 0.0) -> "FieldProbe":
        return cls(beam, distance, tuple(t_start + dt * np.arange(n_samples)), polarizer_angle)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.time_offsets)

    @property
    def dt(self) -> float:
        t = self.time_offsets
        return t[1] - t[0] if len(t) > 1 else 1.0

    @property
    def window(self) -> float:
        return len(self.time_offsets) * self.dt

    @property
    def sectors(self) -> tuple[Sector, Sector]:
        return BEAM_SECTORS[self.beam]


def field_vectors(grid: ModeGrid, sector: Sector, distance: float, times) -> np.ndarray:
    """Matrix ``V`` with ``F(t_n) = V[n] @ alpha_sector``.

    ``V[n, k] = i w_k exp(i w_k d / c) exp(i (w_sector - w_k) t_n)``.
    """
    idx = grid.indices(sector)
    w = grid.weights[idx]
    freq = grid.frequencies[idx]
    det = freq - grid.sector_frequency(sector)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    spatial = np.exp(1j * freq * distance / C_LIGHT)
    return 1j * w * spatial * np.exp(-1j * np.outer(t, det))


def assemble_field(out: OutputEnsemble, sector: Sector, r: float, t, amplitudes=None) -> np.ndarray:
    """F+ of one sector at distance ``r`` from the crystal center.

    Returns shape ``(R,)`` for scalar ``t`` and ``(R, T)`` for an array.
    """
    sector = Sector(sector)
    grid = out.grid
    amps = out.amplitudes if amplitudes is None else amplitudes
    V = field_vectors(grid, sector, r, t)
    F = amps[:, grid.indices(sector)] @ V.T
    return F[:, 0] if np.ndim(t) == 0 else F


def field_csv(out: OutputEnsemble, sector: Sector, r: float, times, realizations=None) -> str:
    """Debug dump of assembled fields: columns realization, t, re, im."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    rows = np.arange(out.n_realizations) if realizations is None else np.asarray(realizations)
    F = assemble_field(out, sector, r, times, out.amplitudes[rows])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["realization", "t", "re", "im"])
    for i, row in enumerate(rows):
        for t, value in zip(times, F[i]):
            writer.writerow([int(row), repr(float(t)), repr(float(value.real)), repr(float(value.imag))])
    return buf.getvalue()


def beam_field(out: OutputEnsemble, beam: int, r: float, times) -> BeamField:
    times = np.asarray(times, dtype=float)
    dt = float(times[1] - times[0]) if times.size > 1 else 1.0
    se, so = BEAM_SECTORS[beam]
    return BeamField(TimeSeries(float(times[0]), dt, assemble_field(out, se, r, times)),
                     TimeSeries(float(times[0]), dt, assemble_field(out, so, r, times)),
                     (se.polarization, so.polarization))


def propagate(field: TimeSeries, r_ab: float, omega_beam: float) -> TimeSeries:
    """``F(r_B, t) = F(r_A, t - r_AB/c) exp(i omega r_AB / c)``.

    The delay must be a whole number of samples; no interpolation is done.
    """
    if r_ab < 0:
        raise ValueError(f"r_ab must be non-negative, got {r_ab}")
    delay = r_ab / C_LIGHT
    steps = delay / field.dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, abs(steps)):
        raise ValueError(f"delay {delay} is not a multiple of the sample spacing {field.dt}")
    phase = np.exp(1j * omega_beam * delay)
    return TimeSeries(field.t0 + round(steps) * field.dt, field.dt, field.values * phase)


def polarize(beam: BeamField, phi: float) -> TimeSeries:
    """Scalar amplitude behind a polarizer at angle ``phi`` from the e axis."""
    if not np.isfinite(phi):
        raise ValueError("polarizer angle must be finite")
    e, o = beam.e_axis, beam.o_axis
    return TimeSeries(e.t0, e.dt, np.cos(phi) * e.values + np.sin(phi) * o.values)
