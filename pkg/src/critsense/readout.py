"""Photon-number tomography from ancilla Rabi signals and drive calibration.

The ancilla swaps excitation with the resonator at the sqrt(n)-scaled rates
2 sqrt(n) Omega_A, so the Fock distribution P_n enters the measured signal

    P_e(tau) = 1/2 [1 - P_g(0) sum_n P_n exp(-kappa_n tau) cos(2 sqrt(n) Omega_A tau)]

linearly, and the fit is non-negative linear least squares. The per-component
damping is kappa_n = n^l * kappa_fit (l = 0.7 by default); the alternative
reading kappa_n = n^l / kappa_fit is available behind `literal_inverse_rate`.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import ConditioningError

DEFAULT_DECAY_EXPONENT = 0.7
# resonator energy decay rate of the reference device, 1/us
DEFAULT_KAPPA_FIT = 0.08

CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class RabiSignal:
    """Ancilla excitation versus swap time, with the calibrated swap rate."""

    tau: np.ndarray      # us, strictly increasing
    pe: np.ndarray       # excited-state population per tau
    omega_a: float       # on-resonance swap rate, rad/us
    pg0: float = 1.0     # initial ground-state probability of the ancilla

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        pe = np.asarray(self.pe, dtype=float)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "pe", pe)
        if tau.ndim != 1 or tau.size < 2 or np.any(np.diff(tau) <= 0):
            raise ValueError("tau grid must be one-dimensional and strictly increasing")
        if pe.shape != tau.shape:
            raise ValueError(f"pe shape {pe.shape} does not match tau shape {tau.shape}")
        if np.any(pe < -1e-9) or np.any(pe > 1 + 1e-9):
            raise ValueError("pe values must lie in [0, 1]")
        if self.omega_a <= 0:
            raise ValueError(f"swap rate must be positive, got {self.omega_a}")
        if not 0.0 <= self.pg0 <= 1.0:
            raise ValueError(f"pg0 must lie in [0, 1], got {self.pg0}")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("tau_us,pe\n")
            for t, p in zip(self.tau, self.pe):
                fh.write(f"{t:.12e},{p:.12e}\n")


@dataclass(frozen=True)
class PhotonDistribution:
    """Fock probabilities P_0 .. P_n_max (non-negative, total at most 1)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty vector")
        if np.any(probs < -1e-12):
            raise ValueError(f"negative probability {probs.min()}")
        if probs.sum() > 1.0 + 1e-9:
            raise ValueError(f"probabilities sum to {probs.sum()} > 1")

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def mean_photon(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def tv_distance(self, other: "PhotonDistribution") -> float:
        """Total-variation distance, padding the shorter vector with zeros."""
        size = max(self.probs.size, other.probs.size)
        a = np.pad(self.probs, (0, size - self.probs.size))
        b = np.pad(other.probs, (0, size - other.probs.size))
        return float(0.5 * np.sum(np.abs(a - b)))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("n,p\n")
            for n, p in enumerate(self.probs):
                fh.write(f"{n},{p:.12e}\n")


def coherent_distribution(alpha: complex, n_max: int) -> PhotonDistribution:
    """Truncated, renormalized Poisson distribution of a coherent state."""
    n = np.arange(n_max + 1)
    log_w = n * 2.0 * np.log(np.abs(alpha) + 1e-300) - abs(alpha) ** 2
    log_w -= np.cumsum(np.log(np.maximum(n, 1)))
    w = np.exp(log_w)
    return PhotonDistribution(w / w.sum())


def decay_rates(
    n_max: int,
    l: float = DEFAULT_DECAY_EXPONENT,
    kappa_fit: float = DEFAULT_KAPPA_FIT,
    literal_inverse_rate: bool = False,
) -> np.ndarray:
    """Empirical damping kappa_n of the n-photon Rabi component.

    Default kappa_n = n^l * kappa_fit; `literal_inverse_rate` selects the
    n^l / kappa_fit reading instead.
    """
    if kappa_fit < 0:
        raise ValueError(f"kappa_fit must be non-negative, got {kappa_fit}")
    n_pow = np.arange(n_max + 1, dtype=float) ** l
    if literal_inverse_rate:
        if kappa_fit == 0:
            raise ValueError("literal_inverse_rate requires a nonzero kappa_fit")
        return n_pow / kappa_fit
    return n_pow * kappa_fit


def _design_matrix(tau, n_max, omega_a, kappa_fit, l, pg0, literal_inverse_rate):
    tau = np.asarray(tau, dtype=float)[:, None]
    n = np.arange(n_max + 1, dtype=float)[None, :]
    kappa_n = decay_rates(n_max, l, kappa_fit, literal_inverse_rate)[None, :]
    return pg0 * np.exp(-kappa_n * tau) * np.cos(2.0 * np.sqrt(n) * omega_a * tau)


def rabi_forward(
    dist: PhotonDistribution,
    omega_a: float,
    kappa_fit: float = DEFAULT_KAPPA_FIT,
    l: float = DEFAULT_DECAY_EXPONENT,
    pg0: float = 1.0,
    tau=None,
    literal_inverse_rate: bool = False,
) -> RabiSignal:
    """Synthesize the ancilla Rabi signal of a photon distribution."""
    if tau is None:
        raise ValueError("a tau grid is required")
    design = _design_matrix(tau, dist.n_max, omega_a, kappa_fit, l, pg0, literal_inverse_rate)
    pe = 0.5 * (1.0 - design @ dist.probs)
    return RabiSignal(tau=np.asarray(tau, dtype=float), pe=pe, omega_a=omega_a, pg0=pg0)


@dataclass(frozen=True)
class PhotonFit:
    """Non-negative least-squares tomography result."""

    distribution: PhotonDistribution
    residual_norm: float
    condition_number: float
    raw_total: float  # probability mass before renormalization


def fit_photon_distribution(
    signal: RabiSignal,
    n_max: int = 10,
    l: float = DEFAULT_DECAY_EXPONENT,
    kappa_fit: float = DEFAULT_KAPPA_FIT,
    literal_inverse_rate: bool = False,
    condition_limit: float = CONDITION_LIMIT,
) -> PhotonFit:
    """Recover P_0 .. P_n_max from a Rabi signal.

    The model is linear in P_n for known Omega_A and kappa_n, so the fit is
    active-set non-negative least squares followed by renormalization to
    total probability 1. Raises ConditioningError when the design matrix is
    too ill-conditioned (tau grid too short or undersampled).
    """
    if signal.tau.size < 3 * (n_max + 1):
        raise ValueError(
            f"need at least {3 * (n_max + 1)} samples to fit {n_max + 1} "
            f"photon weights, got {signal.tau.size}"
        )
    design = _design_matrix(
        signal.tau, n_max, signal.omega_a, kappa_fit, l, signal.pg0, literal_inverse_rate
    )
    condition = float(np.linalg.cond(design))
    if not np.isfinite(condition) or condition > condition_limit:
        raise ConditioningError(
            "tomography design matrix is ill-conditioned; extend the tau span "
            "or reduce n_max",
            condition_number=condition,
        )
    target = 1.0 - 2.0 * signal.pe
    weights, residual = nnls(design, target)
    total = float(weights.sum())
    if total <= 0.0:
        raise ValueError("fit recovered no probability mass (signal has no contrast)")
    return PhotonFit(
        distribution=PhotonDistribution(weights / total),
        residual_norm=float(residual),
        condition_number=condition,
        raw_total=total,
    )


@dataclass(frozen=True)
class DriveCalibration:
    """Least-squares line through the origin: drive strength per pulse amplitude."""

    slope: float                  # (1/us) per amplitude unit
    amplitudes: np.ndarray
    strengths: np.ndarray         # G_i = |alpha_i| / tau
    residuals: np.ndarray = field(repr=False, default=None)


def calibrate_drive_strength(points, tau: float) -> DriveCalibration:
    """Fit the linear pulse-amplitude -> drive-strength relation.

    points: iterable of (pulse amplitude xi, measured |alpha|); after a drive
    of duration tau the resonator holds |alpha| = G tau, so G_i = |alpha_i|/tau
    and the through-origin slope is sum(xi G)/sum(xi^2).
    """
    if tau <= 0:
        raise ValueError(f"drive duration must be positive, got {tau}")
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (amplitude, |alpha|) pairs")
    if pts.shape[0] < 2:
        raise ValueError("need at least two calibration points")
    xi, alpha_abs = pts[:, 0], np.abs(pts[:, 1])
    if np.allclose(xi, xi[0]):
        raise ValueError("degenerate calibration: all pulse amplitudes identical")
    strengths = alpha_abs / tau
    slope = float(np.dot(xi, strengths) / np.dot(xi, xi))
    return DriveCalibration(
        slope=slope,
        amplitudes=xi,
        strengths=strengths,
        residuals=strengths - slope * xi,
    )
