"""Discrete mode lattice for the four beam sectors of a type-II source.

Sectors ``e`` and ``o`` form one conjugate cone intersection, ``e'`` and
``o'`` the other. Beam 1 carries (e, o'), beam 2 carries (e', o).

Units are natural: hbar = 1, c = 1 and unit normalization volume, so the
per-mode field factor is ``sqrt(omega / 2)``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Sector(str, Enum):
    E = "e"
    O = "o"
    EP = "e'"
    OP = "o'"

    @property
    def conjugate(self) -> "Sector":
        return _CONJUGATE[self]

    @property
    def polarization(self) -> str:
        """Label of the fixed unit polarization vector carried by the sector."""
        return _POLARIZATION[self]

    @property
    def is_extraordinary(self) -> bool:
        return self in (Sector.E, Sector.EP)


_CONJUGATE = {Sector.E: Sector.O, Sector.O: Sector.E, Sector.EP: Sector.OP, Sector.OP: Sector.EP}
_POLARIZATION = {Sector.E: "i", Sector.OP: "j", Sector.EP: "i'", Sector.O: "j'"}
SECTORS = (Sector.E, Sector.O, Sector.EP, Sector.OP)


@dataclass(frozen=True)
class ModeDescriptor:
    sector: Sector
    index: int  # position within the sector; conjugate partners share it
    frequency: float
    detuning: float
    weight: float


@dataclass(frozen=True)
class PhaseMatchKernel:
    """Phase-matching function over conjugate mode pairs.

    With ``sigma=None`` the kernel is an exact pairing indicator. A finite
    ``sigma`` broadens it to ``exp(-mismatch**2 / (2 sigma**2))`` where the
    mismatch is ``omega_a + omega_b - omega_p``.
    """

    sigma: float | None = None

    def __post_init__(self):
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError(f"kernel sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class ModeGrid:
    modes: tuple[ModeDescriptor, ...]
    pump_frequency: float
    pairing: tuple[tuple[int, int], ...]
    bandwidth: float
    center_e: float
    center_o: float
    n_pairs: int
    frequencies: np.ndarray = field(init=False, repr=False, compare=False)
    detunings: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        freq = np.array([m.frequency for m in self.modes])
        det = np.array([m.detuning for m in self.modes])
        w = np.array([m.weight for m in self.modes])
        for arr in (freq, det, w):
            arr.setflags(write=False)
        object.__setattr__(self, "frequencies", freq)
        object.__setattr__(self, "detunings", det)
        object.__setattr__(self, "weights", w)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def indices(self, sector: Sector) -> np.ndarray:
        """Global mode indices of ``sector`` ordered by within-sector index."""
        start = SECTORS.index(Sector(sector)) * self.n_pairs
        return np.arange(start, start + self.n_pairs)

    def sector_frequency(self, sector: Sector) -> float:
        """Average (carrier) frequency of a sector."""
        return self.center_e if Sector(sector).is_extraordinary else self.center_o

    def sector_of(self, mode_index: int) -> Sector:
        return self.modes[mode_index].sector

    @property
    def key(self) -> tuple:
        """Hashable identity of the generating parameters."""
        return (self.n_pairs, self.pump_frequency, self.bandwidth, self.center_e, self.center_o)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sector", "index", "frequency", "detuning", "weight"])
        for m in self.modes:
            writer.writerow([m.sector.value, m.index, repr(m.frequency), repr(m.detuning), repr(m.weight)])
        return buf.getvalue()


def build_mode_grid(n_pairs_per_sector: int, pump_frequency: float, bandwidth: float,
                    center_e: float, center_o: float) -> ModeGrid:
    """Build paired e/o and e'/o' mode sets on a uniform detuning grid.

    Each e-mode at ``center_e + delta`` is paired with the o-mode at
    ``pump_frequency - (center_e + delta)``, so every pair sums to the pump
    frequency. Detunings are uniformly spaced over ``[-bandwidth/2, bandwidth/2]``
    (a single pair sits at zero detuning).
    """
    n = int(n_pairs_per_sector)
    if n < 1 or n != n_pairs_per_sector:
        raise ValueError(f"n_pairs_per_sector must be a positive integer, got {n_pairs_per_sector}")
    if pump_frequency <= 0 or center_e <= 0 or center_o <= 0:
        raise ValueError("frequencies must be positive")
    if bandwidth < 0:
        raise ValueError(f"bandwidth must be non-negative, got {bandwidth}")
    if not np.isclose(center_e + center_o, pump_frequency, rtol=1e-12, atol=0.0):
        raise ValueError(
            f"frequency matching violated: center_e + center_o = {center_e + center_o} "
            f"!= pump frequency {pump_frequency}")
    if bandwidth >= min(center_e, center_o):
        raise ValueError("bandwidth must be smaller than both sector center frequencies")

    deltas = np.zeros(1) if n == 1 else np.linspace(-bandwidth / 2, bandwidth / 2, n)
    freq_e = center_e + deltas
    freq_o = pump_frequency - freq_e
    if np.any(freq_e <= 0) or np.any(freq_o <= 0):
        raise ValueError("grid produced non-positive mode frequencies")

    modes = []
    for sector in SECTORS:
        if sector.is_extraordinary:
            freqs, center = freq_e, center_e
        else:
            freqs, center = freq_o, center_o
        for m, w in enumerate(freqs):
            w = float(w)
            modes.append(ModeDescriptor(sector, m, w, w - center, float(np.sqrt(w / 2.0))))

    pairing = tuple((m, n + m) for m in range(n)) + tuple((2 * n + m, 3 * n + m) for m in range(n))
    return ModeGrid(tuple(modes), float(pump_frequency), pairing, float(bandwidth),
                    float(center_e), float(center_o), n)


def sinc_kernel(x):
    """``(sin x / x) * exp(i x)`` with the exact value 1 at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    # np.sinc is sin(pi y)/(pi y); rescale the argument
    out = np.sinc(x / np.pi) * np.exp(1j * x)
    return out[()] if out.ndim == 0 else out


def phase_match_weight(a: ModeDescriptor, b: ModeDescriptor,
                       kernel: PhaseMatchKernel | None = None) -> float:
    if a.sector == b.sector:
        raise ValueError(f"phase matching needs modes from different sectors, both are {a.sector.value}")
    if b.sector != a.sector.conjugate:
        return 0.0
    kernel = kernel or PhaseMatchKernel()
    if kernel.sigma is None:
        return 1.0 if a.index == b.index else 0.0
    # sector centers sum to the pump frequency, so detunings carry the mismatch
    mismatch = a.detuning + b.detuning
    return float(np.exp(-mismatch ** 2 / (2 * kernel.sigma ** 2)))


def kernel_matrix(grid: ModeGrid, target: Sector, kernel: PhaseMatchKernel | None = None) -> np.ndarray:
    """``f(k, k')`` for k in ``target`` (rows) and k' in its conjugate sector (columns)."""
    rows = [grid.modes[i] for i in grid.indices(target)]
    cols = [grid.modes[i] for i in grid.indices(Sector(target).conjugate)]
    return np.array([[phase_match_weight(r, c, kernel) for c in cols] for r in rows])
