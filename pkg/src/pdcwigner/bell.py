"""Polarizer-angle scans, CHSH and Clauser-Horne inequalities.

Three coincidence engines are available:

``gaussian``
    leading-order analytic rate ``sum |<F1+ F2+>|^2`` (no sampling);
``direct``
    Monte Carlo mean of the product of standard window responses;
``clipped``
    Monte Carlo mean of the product of clipped (nonnegative) responses, an
    explicit local hidden-variable model with the sampled amplitudes as the
    hidden variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correlations import jackknife_mean
from .crystal import CrystalParams, OutputEnsemble, TransformMap, build_transform_map
from .detection import (DetectorConfig, WindowComponents, joint_rate_direct, joint_rate_gaussian,
                        local_response, singles_rate_analytic, vacuum_reference, window_components)
from .modes import ModeGrid

ENGINES = ("gaussian", "direct", "clipped")
# angles maximizing |S| for a coincidence law depending on phi1 + phi2
CHSH_ANGLES = (0.0, -np.pi / 4, np.pi / 8, 3 * np.pi / 8)
CH_ANGLES = (0.0, np.pi / 4, 3 * np.pi / 8, np.pi / 8)


@dataclass
class BellSetup:
    """Shared state for scans: grid, crystal, the two detectors and an optional ensemble.

    Detector polarizer angles are overridden per evaluation. Window
    components of the ensemble are computed once and reused.
    """

    grid: ModeGrid
    params: CrystalParams
    det1: DetectorConfig
    det2: DetectorConfig
    tau: float = 0.0
    out: OutputEnsemble | None = None
    workers: int = 1
    _tmap: TransformMap | None = field(default=None, repr=False)
    _components: tuple[WindowComponents, WindowComponents] | None = field(default=None, repr=False)

    @property
    def tmap(self) -> TransformMap:
        if self._tmap is None:
            self._tmap = self.out.tmap if self.out is not None else build_transform_map(self.grid, self.params)
        return self._tmap

    @property
    def components(self) -> tuple[WindowComponents, WindowComponents]:
        if self.out is None:
            raise ValueError("Monte Carlo engines need an output ensemble")
        if self._components is None:
            self._components = (window_components(self.out, self.det1.probe, workers=self.workers),
                                window_components(self.out, self.det2.probe, self.tau, workers=self.workers))
        return self._components

    def responses(self, phi1, phi2, clip: bool) -> tuple[np.ndarray, np.ndarray]:
        """Per-realization window-averaged responses of both detectors."""
        c1, c2 = self.components
        r1 = local_response(self.out, self.det1.at_angle(phi1), components=c1, clip=clip)
        r2 = local_response(self.out, self.det2.at_angle(phi2), components=c2, clip=clip)
        return r1, r2

    def coincidence_samples(self, phi1, phi2, engine: str) -> np.ndarray:
        if engine not in ("direct", "clipped"):
            raise ValueError(f"engine {engine!r} has no per-realization samples")
        r1, r2 = self.responses(phi1, phi2, clip=engine == "clipped")
        return r1 * r2

    def coincidence(self, phi1, phi2, engine: str) -> tuple[float, float]:
        """Coincidence rate and its standard error at one angle pair."""
        if engine == "gaussian":
            rate = joint_rate_gaussian(self.grid, self.params, self.det1.at_angle(phi1),
                                       self.det2.at_angle(phi2), self.tau, tmap=self.tmap)
            return rate, 0.0
        if engine in ("direct", "clipped"):
            mean, err = jackknife_mean(self.coincidence_samples(phi1, phi2, engine))
            return float(mean), float(err)
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")


@dataclass(frozen=True)
class AngleScan:
    pairs: np.ndarray  # (N, 2)
    rates: np.ndarray
    stderr: np.ndarray
    amplitude: float  # K
    offset: float
    visibility: float
    fitted: np.ndarray
    engine: str

    @property
    def residuals(self) -> np.ndarray:
        return self.rates - self.fitted

    @property
    def relative_residual(self) -> float:
        return float(np.linalg.norm(self.residuals) / np.linalg.norm(self.rates))


def fit_sin2_law(pairs, rates) -> tuple[float, float, np.ndarray]:
    """Least-squares fit ``rate = offset + K sin^2(phi1 + phi2)``; returns (K, offset, fitted)."""
    pairs = np.asarray(pairs, dtype=float)
    s2 = np.sin(pairs[:, 0] + pairs[:, 1]) ** 2
    if np.ptp(s2) < 1e-12:
        raise ValueError("degenerate angle set: every pair has the same sin^2(phi1 + phi2)")
    design = np.column_stack([np.ones_like(s2), s2])
    (offset, K), *_ = np.linalg.lstsq(design, np.asarray(rates, dtype=float), rcond=None)
    return float(K), float(offset), design @ np.array([offset, K])


def default_angle_pairs(steps: int = 6) -> np.ndarray:
    phis = np.arange(steps) * np.pi / steps
    return np.array([(a, b) for a in phis for b in phis])


def coincidence_scan(setup: BellSetup, angles, engine: str = "gaussian") -> AngleScan:
    pairs = np.asarray(angles, dtype=float).reshape(-1, 2)
    if pairs.shape[0] == 0:
        raise ValueError("angle list is empty")
    results = [setup.coincidence(a, b, engine) for a, b in pairs]
    rates = np.array([r for r, _ in results])
    errs = np.array([e for _, e in results])
    K, offset, fitted = fit_sin2_law(pairs, rates)
    hi, lo = offset + max(K, 0.0), offset + min(K, 0.0)
    visibility = (hi - lo) / (hi + lo) if hi + lo != 0 else float("nan")
    return AngleScan(pairs, rates, errs, K, offset, float(visibility), fitted, engine)


@dataclass(frozen=True)
class BellReport:
    engine: str
    angles: tuple[float, float, float, float]
    S_chsh: float = float("nan")
    S_stderr: float = float("nan")
    homogeneous_CH: float = float("nan")
    genuine_CH: float = float("nan")
    efficiency: float = 1.0
    response_scale: float = float("nan")
    singles: tuple[float, float] = (float("nan"), float("nan"))
    dark_excess: tuple[float, float] = (float("nan"), float("nan"))

    @property
    def violated_chsh(self) -> bool:
        return bool(self.S_chsh > 2)

    @property
    def violated_homogeneous(self) -> bool:
        return bool(self.homogeneous_CH > 0)

    @property
    def violated_genuine(self) -> bool:
        return bool(self.genuine_CH > 0)

    def items(self) -> list[tuple[str, object]]:
        """Report fields; quantities that were not computed (NaN) are left out."""
        a, a2, b, b2 = self.angles
        rows = [("engine", self.engine), ("a", a), ("a_prime", a2), ("b", b), ("b_prime", b2)]
        if not np.isnan(self.S_chsh):
            rows += [("S", self.S_chsh), ("S_stderr", self.S_stderr), ("violated_chsh", self.violated_chsh)]
        if not np.isnan(self.homogeneous_CH):
            rows += [("CH_homogeneous", self.homogeneous_CH), ("violated_homogeneous", self.violated_homogeneous),
                     ("CH_genuine", self.genuine_CH), ("violated_genuine", self.violated_genuine),
                     ("efficiency", self.efficiency), ("response_scale", self.response_scale),
                     ("singles_1", self.singles[0]), ("singles_2", self.singles[1])]
            if not np.isnan(self.dark_excess[0]):
                rows += [("dark_excess_1", self.dark_excess[0]), ("dark_excess_2", self.dark_excess[1])]
        return rows

    def to_text(self) -> str:
        return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in self.items())


def _correlator(p_xy, p_pp, p_xp, p_py):
    return (p_xy + p_pp - p_xp - p_py) / (p_xy + p_pp + p_xp + p_py)


def chsh(setup: BellSetup, a: float, a2: float, b: float, b2: float, engine: str = "gaussian") -> BellReport:
    """``S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|`` with ratio-normalized correlators."""
    h = np.pi / 2
    settings = [(x, y) for x in (a, a2) for y in (b, b2)]
    quads = [[(x, y), (x + h, y + h), (x, y + h), (x + h, y)] for x, y in settings]
    signs = np.array([1.0, -1.0, 1.0, 1.0])

    if engine == "gaussian":
        E = np.array([_correlator(*(setup.coincidence(p, q, engine)[0] for p, q in quad)) for quad in quads])
        return BellReport(engine, (a, a2, b, b2), S_chsh=float(abs(signs @ E)), S_stderr=0.0)

    samples = np.stack([setup.coincidence_samples(p, q, engine) for quad in quads for p, q in quad], axis=1)
    R = samples.shape[0]

    def s_of(means):
        m = means.reshape(means.shape[:-1] + (4, 4))
        E = _correlator(m[..., 0], m[..., 1], m[..., 2], m[..., 3])
        return np.abs(E @ signs)

    total = samples.sum(axis=0)
    S = float(s_of(total / R))
    loo = s_of((total - samples) / (R - 1))
    err = float(np.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))
    return BellReport(engine, (a, a2, b, b2), S_chsh=S, S_stderr=err)


def clauser_horne(setup: BellSetup, a: float, a2: float, b: float, b2: float, engine: str = "clipped",
                  efficiency: float = 1.0, singles: tuple[float, float] | None = None,
                  response_scale: float | None = None) -> BellReport:
    """Genuine and homogeneous Clauser-Horne expressions (violated when > 0).

    Genuine: ``P12(a,b) - P12(a,b') + P12(a',b) + P12(a',b') - P1(a') - P2(b)``
    with per-window detection probabilities ``eta * kappa * response``. For the
    Monte Carlo engines ``kappa`` defaults to the inverse of the largest
    single-window response in the ensemble, so every probability lies in
    [0, 1]; for the gaussian engine it defaults to ``1 / I0`` of the
    unpolarized beam.

    Homogeneous: the same combination with polarizer-removed coincidences
    ``P12(a',-)``, ``P12(-,b)`` in place of the singles, divided by
    ``P12(-,-)``.
    """
    if not 0 < efficiency <= 1:
        raise ValueError(f"efficiency must lie in (0, 1], got {efficiency}")
    combo = [(a, b, 1.0), (a, b2, -1.0), (a2, b, 1.0), (a2, b2, 1.0)]
    dark = (float("nan"), float("nan"))

    def coinc(p, q):
        return setup.coincidence(p, q, engine)[0]

    hom = (sum(s * coinc(p, q) for p, q, s in combo) - coinc(a2, None) - coinc(None, b)) / coinc(None, None)

    if engine == "gaussian":
        if response_scale is None:
            response_scale = 1.0 / vacuum_reference(setup.grid, setup.det1.probe, None)
        if singles is None:
            singles = (singles_rate_analytic(setup.grid, setup.params, setup.det1.at_angle(a2), tmap=setup.tmap),
                       singles_rate_analytic(setup.grid, setup.params, setup.det2.at_angle(b), tmap=setup.tmap))
        k = efficiency * response_scale
        p12 = sum(s * k * k * coinc(p, q) for p, q, s in combo)
        p1, p2 = k * singles[0], k * singles[1]
    else:
        clip = engine == "clipped"
        resp1 = {x: setup.responses(x, None, clip)[0] for x in (a, a2)}
        resp2 = {y: setup.responses(None, y, clip)[1] for y in (b, b2)}
        if response_scale is None:
            peak = max(np.max(np.abs(r)) for r in (*resp1.values(), *resp2.values()))
            response_scale = 1.0 / peak if peak > 0 else 1.0
        k = efficiency * response_scale
        p12 = sum(s * np.mean((k * resp1[p]) * (k * resp2[q])) for p, q, s in combo)
        if singles is None:
            singles = (float(np.mean(resp1[a2])), float(np.mean(resp2[b])))
        p1, p2 = k * singles[0], k * singles[1]
        if clip:
            std1 = np.mean(setup.responses(a2, None, False)[0])
            std2 = np.mean(setup.responses(None, b, False)[1])
            dark = (float(singles[0] - std1), float(singles[1] - std2))
    genuine = p12 - p1 - p2
    return BellReport(engine, (a, a2, b, b2), homogeneous_CH=float(hom), genuine_CH=float(genuine),
                      efficiency=efficiency, response_scale=float(response_scale),
                      singles=(float(singles[0]), float(singles[1])), dark_excess=dark)


def lhv_decomposition_check(out: OutputEnsemble, det1: DetectorConfig, det2: DetectorConfig,
                            tau: float = 0.0) -> float:
    """``|P12 - <P1(lambda) P2(lambda)>|`` for the clipped rule.

    The joint rate computed by the detection module must equal the ensemble
    mean of the product of the two detectors' own local responses.
    """
    clipped1 = DetectorConfig(det1.probe, True, det1.efficiency)
    clipped2 = DetectorConfig(det2.probe, True, det2.efficiency)
    joint = joint_rate_direct(out, clipped1, clipped2, tau).rate
    p1 = local_response(out, clipped1)
    p2 = local_response(out, clipped2, tau)
    return float(abs(joint - np.mean(p1 * p2)))
