"""Detection rules: Wigner singles/joint rates, their Gaussian factorization,
and the clipped window model.

A detector integrates ``I(t) - I0`` over its window as a Riemann sum on the
probe's sample grid. For a polarizer at ``phi`` the window integral is a
quadratic form in the two beam components, so each realization is reduced
to three numbers (``|F_x|^2``, ``|F_y|^2`` and ``F_x conj(F_y)`` integrals)
from which the response at any angle follows exactly.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .correlations import jackknife_mean, vacuum_intensity
from .crystal import CrystalParams, OutputEnsemble, TransformMap, build_transform_map
from .fields import FieldProbe, field_vectors
from .modes import ModeGrid
from .vacuum import DEFAULT_CHUNK, VACUUM_VARIANCE


@dataclass(frozen=True)
class DetectorConfig:
    probe: FieldProbe
    clip: bool = False
    efficiency: float = 1.0

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")

    @property
    def window(self) -> float:
        return self.probe.window

    def at_angle(self, phi: float | None) -> "DetectorConfig":
        return replace(self, probe=replace(self.probe, polarizer_angle=phi))


@dataclass(frozen=True)
class RateReport:
    rate: float
    stderr: float
    negative_window_fraction: float
    dark_excess: float
    standard: float
    clipped: float


def intensity(field) -> np.ndarray:
    """Pointwise ``|F|^2``."""
    return np.abs(np.asarray(field)) ** 2


def _projection(phi: float | None):
    """(weight on |F_x|^2, weight on |F_y|^2, weight on 2 Re F_x conj(F_y))."""
    if phi is None:
        return 1.0, 1.0, 0.0
    c, s = np.cos(phi), np.sin(phi)
    return c * c, s * s, c * s


def vacuum_reference(grid: ModeGrid, probe: FieldProbe, phi: float | None = None) -> float:
    """I0 behind the polarizer: projected sum of ``w_k^2 / 2`` over the beam's modes."""
    sx, sy = probe.sectors
    px, py, _ = _projection(phi)
    return px * vacuum_intensity(grid, sx) + py * vacuum_intensity(grid, sy)


@dataclass(frozen=True)
class WindowComponents:
    """Per-realization window integrals of one probe (angle independent)."""

    xx: np.ndarray
    yy: np.ndarray
    xy: np.ndarray
    vacuum_x: float
    vacuum_y: float
    window: float

    def excess(self, phi: float | None) -> np.ndarray:
        """Window integral of ``I - I0`` for every realization."""
        px, py, pxy = _projection(phi)
        w = px * self.xx + py * self.yy
        if pxy:
            w = w + 2 * pxy * self.xy.real
        return w - self.window * (px * self.vacuum_x + py * self.vacuum_y)


def window_components(out: OutputEnsemble, probe: FieldProbe, delay: float = 0.0, *,
                      amplitudes: np.ndarray | None = None, workers: int = 1,
                      chunk_size: int = DEFAULT_CHUNK) -> WindowComponents:
    grid = out.grid
    amps = out.amplitudes if amplitudes is None else amplitudes
    sx, sy = probe.sectors
    times = probe.times + delay
    Vx = field_vectors(grid, sx, probe.distance, times).T
    Vy = field_vectors(grid, sy, probe.distance, times).T
    ix, iy = grid.indices(sx), grid.indices(sy)
    R = amps.shape[0]
    xx = np.empty(R)
    yy = np.empty(R)
    xy = np.empty(R, dtype=complex)
    dt = probe.dt

    def fill(start):
        stop = min(start + chunk_size, R)
        Fx = amps[start:stop, ix] @ Vx
        Fy = amps[start:stop, iy] @ Vy
        xx[start:stop] = dt * np.sum(intensity(Fx), axis=1)
        yy[start:stop] = dt * np.sum(intensity(Fy), axis=1)
        xy[start:stop] = dt * np.sum(Fx * np.conj(Fy), axis=1)

    starts = range(0, R, chunk_size)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, starts))
    else:
        for s in starts:
            fill(s)
    return WindowComponents(xx, yy, xy, vacuum_intensity(grid, sx), vacuum_intensity(grid, sy),
                            probe.window)


def local_response(out: OutputEnsemble, det: DetectorConfig, delay: float = 0.0, *,
                   components: WindowComponents | None = None, clip: bool | None = None,
                   workers: int = 1) -> np.ndarray:
    """Per-realization window-averaged response of one detector.

    Standard rule: ``eta/T_w * integral (I - I0) dt``. Clipped rule: the
    integral is replaced by zero when negative.
    """
    comp = components or window_components(out, det.probe, delay, workers=workers)
    w = comp.excess(det.probe.polarizer_angle)
    if det.clip if clip is None else clip:
        w = np.maximum(w, 0.0)
    return det.efficiency * w / det.window


def singles_rate(out: OutputEnsemble, det: DetectorConfig, *,
                 components: WindowComponents | None = None, workers: int = 1) -> RateReport:
    comp = components or window_components(out, det.probe, workers=workers)
    w = comp.excess(det.probe.polarizer_angle)
    scale = det.efficiency / det.window
    std, std_err = jackknife_mean(scale * w)
    clp, clp_err = jackknife_mean(scale * np.maximum(w, 0.0))
    rate, err = (clp, clp_err) if det.clip else (std, std_err)
    return RateReport(float(rate), float(err), float(np.mean(w < 0)), float(clp - std),
                      float(std), float(clp))


def joint_rate_direct(out: OutputEnsemble, det1: DetectorConfig, det2: DetectorConfig,
                      tau: float = 0.0, *, components=None, workers: int = 1) -> RateReport:
    """Coincidence rate from the product of the two window responses.

    Detector 2's window starts ``tau`` after detector 1's. The clipped rate
    is the mean product of two local nonnegative responses.
    ``negative_window_fraction`` counts realizations where either window
    integral is negative.
    """
    if det1.clip != det2.clip:
        raise ValueError("both detectors must use the same detection rule")
    c1, c2 = components or (window_components(out, det1.probe, workers=workers),
                            window_components(out, det2.probe, tau, workers=workers))
    w1 = c1.excess(det1.probe.polarizer_angle)
    w2 = c2.excess(det2.probe.polarizer_angle)
    scale = det1.efficiency * det2.efficiency / (det1.window * det2.window)
    std, std_err = jackknife_mean(scale * w1 * w2)
    clp, clp_err = jackknife_mean(scale * np.maximum(w1, 0.0) * np.maximum(w2, 0.0))
    rate, err = (clp, clp_err) if det1.clip else (std, std_err)
    neg = float(np.mean((w1 < 0) | (w2 < 0)))
    return RateReport(float(rate), float(err), neg, float(clp - std), float(std), float(clp))


def _channels(grid: ModeGrid, probe: FieldProbe, times: np.ndarray) -> list[np.ndarray]:
    """Mode-space field vectors ``(T, M)`` of each polarization channel seen by the probe."""
    sx, sy = probe.sectors
    M = grid.n_modes
    vx = np.zeros((times.size, M), dtype=complex)
    vy = np.zeros((times.size, M), dtype=complex)
    vx[:, grid.indices(sx)] = field_vectors(grid, sx, probe.distance, times)
    vy[:, grid.indices(sy)] = field_vectors(grid, sy, probe.distance, times)
    phi = probe.polarizer_angle
    if phi is None:
        return [vx, vy]
    return [np.cos(phi) * vx + np.sin(phi) * vy]


def joint_rate_gaussian(grid: ModeGrid, params: CrystalParams, det1: DetectorConfig,
                        det2: DetectorConfig, tau: float = 0.0, *,
                        tmap: TransformMap | None = None) -> float:
    """Leading-order coincidence rate ``sum |<F1+ F2+>|^2`` averaged over both windows."""
    tm = tmap if tmap is not None else build_transform_map(grid, params)
    P = tm.pseudo_covariance
    p1, p2 = det1.probe, det2.probe
    total = 0.0
    for v1 in _channels(grid, p1, p1.times):
        for v2 in _channels(grid, p2, p2.times + tau):
            corr = v1 @ P @ v2.T
            total += np.sum(np.abs(corr) ** 2)
    scale = det1.efficiency * det2.efficiency * p1.dt * p2.dt / (p1.window * p2.window)
    return float(scale * total)


def singles_rate_analytic(grid: ModeGrid, params: CrystalParams, det: DetectorConfig, *,
                          tmap: TransformMap | None = None) -> float:
    """Exact standard singles rate ``<I - I0>`` from the map's covariance."""
    tm = tmap if tmap is not None else build_transform_map(grid, params)
    excess = tm.covariance - VACUUM_VARIANCE * np.eye(grid.n_modes)
    p = det.probe
    total = 0.0
    for v in _channels(grid, p, p.times):
        total += np.sum(np.einsum("tm,mn,tn->t", v, excess, np.conj(v)).real)
    return float(det.efficiency * p.dt * total / p.window)


def time_average_excess(out: OutputEnsemble, det: DetectorConfig, realization: int = 0, *,
                        workers: int = 1) -> tuple[float, float, float]:
    """Time-averaged ``I - I0`` of one realization against the ensemble.

    Returns (single-realization time average, ensemble mean of the time
    averages, ensemble standard deviation of the time averages). The spread
    is the natural yardstick: on a finite mode set a single realization's
    time average does not converge to the ensemble mean.
    """
    comp = window_components(out, det.probe, workers=workers)
    avg = comp.excess(det.probe.polarizer_angle) / det.window
    return float(avg[realization]), float(np.mean(avg)), float(np.std(avg, ddof=1))
