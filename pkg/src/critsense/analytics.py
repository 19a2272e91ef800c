"""Closed-form results for the driven Jaynes-Cummings sensor.

Unit convention: times in microseconds, frequencies and rates in rad/us for
Hamiltonian terms. Decay rates are plain 1/us (no 2*pi). The drive amplitude
epsilon is dimensionless and rescaled so the critical point sits at
epsilon = 1; below it the model has a zero-quasi-energy dark state
|psi_0> = S(r)|0>|phi_0> with r = ln(1 - eps^2)/4.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import core
from .errors import (
    AccuracyError,
    BeyondCriticalError,
    DegeneratePointError,
    SpectrumUndefinedError,
    UnreachableTargetError,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SystemParams:
    """Physical rates and detunings of the sensor model.

    omega: qubit-resonator swap coupling (rad/us).
    k: ramp velocity coefficient (1/us).
    kappa_q, kappa_r: qubit / resonator energy decay rates (1/us).
    gamma_q: qubit dephasing rate (1/us).
    chi: qutrit anharmonicity (rad/us); used only by three-level models.
    delta_r, delta_e: resonator / qubit detunings from the signal field (rad/us).
    """

    omega: float
    k: float = 10.0
    kappa_q: float = 0.0
    kappa_r: float = 0.0
    gamma_q: float = 0.0
    chi: float = 0.0
    delta_r: float = 0.0
    delta_e: float = 0.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        for name in ("k", "kappa_q", "kappa_r", "gamma_q", "chi"):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")


# Published parameters of the superconducting-circuit device this model
# targets: swap coupling 2pi x 20.9 rad/us, ramp coefficient 10 /us, decay
# rates 0.05 and 0.08 /us, dephasing 0.08 /us, anharmonicity 2pi x 245 rad/us.
REFERENCE_PARAMS = SystemParams(
    omega=TWO_PI * 20.9,
    k=10.0,
    kappa_q=0.05,
    kappa_r=0.08,
    gamma_q=0.08,
    chi=TWO_PI * 245.0,
)

# Optimal signal-field detunings for suppressing second-excited-state leakage.
OPTIMAL_DETUNINGS = (-TWO_PI * 1.6, TWO_PI * 1.0)


def ramp_epsilon(t: float, k: float) -> float:
    """Drive amplitude eps(t) = sqrt(1 - 1/(k^2 t^2 + 1)) of the ramp schedule.

    k = 0 is allowed and yields a static eps = 0 drive.
    """
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    if k < 0:
        raise ValueError(f"ramp coefficient must be non-negative, got {k}")
    kt = k * t
    return kt / math.hypot(kt, 1.0)


def ramp_time(epsilon: float, k: float) -> float:
    """Exact inverse of ramp_epsilon: the time at which the ramp reaches eps."""
    if not 0.0 <= epsilon < 1.0:
        if epsilon >= 1.0:
            raise UnreachableTargetError(
                f"eps = {epsilon} is at or beyond the critical point and is never reached"
            )
        raise ValueError(f"eps must lie in [0, 1), got {epsilon}")
    if k <= 0:
        raise ValueError(f"ramp coefficient must be positive to invert, got {k}")
    return epsilon / (k * math.sqrt(1.0 - epsilon * epsilon))


@dataclass(frozen=True)
class RampSchedule:
    """eps(t) trajectory toward a working point epsilon_max < 1."""

    k: float
    epsilon_max: float = 0.99

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be non-negative, got {self.k}")
        if not 0.0 <= self.epsilon_max < 1.0:
            raise ValueError(f"epsilon_max must lie in [0, 1), got {self.epsilon_max}")

    def epsilon(self, t: float) -> float:
        return ramp_epsilon(t, self.k)

    def time_of(self, epsilon: float) -> float:
        return ramp_time(epsilon, self.k)

    @property
    def duration(self) -> float:
        """Time to reach epsilon_max."""
        return ramp_time(self.epsilon_max, self.k)


def _check_epsilon(epsilon: float, upper_open: bool = True):
    if epsilon < 0:
        raise ValueError(f"eps must be non-negative, got {epsilon}")
    if upper_open and epsilon >= 1.0:
        raise SpectrumUndefinedError(
            f"eps = {epsilon}: no discrete quasi-energy spectrum at or beyond the critical point"
        )
    if not upper_open and epsilon > 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {epsilon}")


def dark_state_pe(epsilon: float) -> float:
    """Excited-state population of the dark state: (1 - sqrt(1 - eps^2)) / 2."""
    _check_epsilon(epsilon, upper_open=False)
    return 0.5 * (1.0 - math.sqrt(1.0 - epsilon * epsilon))


def dark_state_pe_derivative(epsilon: float) -> float:
    """d P_e / d eps = eps / (2 sqrt(1 - eps^2)); diverges at the critical point."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {epsilon}")
    return epsilon / (2.0 * math.sqrt(1.0 - epsilon * epsilon))


def delta_pe(epsilon: float) -> float:
    """Projection-noise standard deviation of P_e in the dark state: eps/2."""
    _check_epsilon(epsilon, upper_open=False)
    return 0.5 * epsilon


def snr(epsilon: float) -> float:
    """Signal-to-noise ratio (dP_e/deps) / (Delta P_e), evaluated from its parts."""
    if epsilon <= 0.0 or epsilon >= 1.0:
        raise DegeneratePointError(f"signal-to-noise ratio is degenerate at eps = {epsilon}")
    return dark_state_pe_derivative(epsilon) / delta_pe(epsilon)


def fisher_classical(epsilon: float) -> float:
    """Two-outcome Fisher information of the P_e measurement on the dark state.

    Evaluated as (dP_e/deps)^2 (1/P_e + 1/P_g) from the population and its
    analytic derivative. At eps = 0 the quotient is 0/0; the continuous limit
    is 1.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {epsilon}")
    if epsilon == 0.0:
        return 1.0
    pe = dark_state_pe(epsilon)
    dpe = dark_state_pe_derivative(epsilon)
    return dpe * dpe * (1.0 / pe + 1.0 / (1.0 - pe))


def qubit_dark_part(epsilon: float) -> np.ndarray:
    """Qubit factor |phi_0> = c_+|g> - c_-|e> with c_pm = sqrt((1 pm sqrt(A))/2)."""
    _check_epsilon(epsilon, upper_open=False)
    root_a = math.sqrt(1.0 - epsilon * epsilon)
    c_plus = math.sqrt((1.0 + root_a) / 2.0)
    c_minus = math.sqrt((1.0 - root_a) / 2.0)
    return np.array([c_plus, -c_minus], dtype=complex)


def qubit_bright_part(epsilon: float) -> np.ndarray:
    """Qubit factor |phi_1> = c_+|e> - c_-|g| of the bright eigenstates."""
    phi0 = qubit_dark_part(epsilon)
    return np.array([phi0[1], phi0[0]], dtype=complex)


def fisher_quantum_fd(epsilon: float, h: float = 1e-6) -> float:
    """Quantum Fisher information of |phi_0(eps)> by central finite differences.

    I = 4 [<d phi|d phi> - |<phi|d phi>|^2]; must agree with fisher_classical.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {epsilon}")
    if not 0.0 < h < 1.0 - epsilon:
        raise ValueError(f"step h = {h} must satisfy 0 < h << 1 - eps = {1.0 - epsilon}")
    lo = max(epsilon - h, 0.0)
    dphi = (qubit_dark_part(epsilon + h) - qubit_dark_part(lo)) / (epsilon + h - lo)
    phi = qubit_dark_part(epsilon)
    return float(4.0 * (np.real(np.vdot(dphi, dphi)) - abs(np.vdot(phi, dphi)) ** 2))


def fisher_of_time(t: float, k: float) -> float:
    """Fisher information along the ramp, expressed in the time parameterization."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return fisher_classical(ramp_epsilon(t, k))


def quasi_energies(n: int, epsilon: float, omega: float) -> tuple[float, float]:
    """Quasi-energy pair (E_+, E_-) = (+-sqrt(n) Omega (1 - eps^2)^(3/4)) of manifold n."""
    if n < 1:
        raise ValueError(f"manifold index must be >= 1, got {n}")
    _check_epsilon(epsilon)
    e_plus = math.sqrt(n) * omega * (1.0 - epsilon * epsilon) ** 0.75
    return e_plus, -e_plus


def gap_min(epsilon: float, omega: float) -> float:
    """Smallest gap separating the dark state from the bright manifold."""
    return quasi_energies(1, epsilon, omega)[0]


def squeezing_parameter(epsilon: float) -> float:
    """Dark-state squeezing r = ln(1 - eps^2) / 4 (negative below the critical point)."""
    _check_epsilon(epsilon)
    return 0.25 * math.log(1.0 - epsilon * epsilon)


def mean_photon_dark(epsilon: float) -> float:
    """Mean photon number sinh^2(r) of the dark state."""
    return math.sinh(squeezing_parameter(epsilon)) ** 2


def mean_photon_bright(n: int, epsilon: float) -> float:
    """Mean photon number 2 n eps^2 e^(-2r) + n cosh(2r) - 1/2 of a bright state."""
    if n < 1:
        raise ValueError(f"manifold index must be >= 1, got {n}")
    r = squeezing_parameter(epsilon)
    return 2.0 * n * epsilon * epsilon * math.exp(-2.0 * r) + n * math.cosh(2.0 * r) - 0.5


def dark_state_vector(
    space: core.HilbertSpace, epsilon: float, norm_tol: float = 1e-6
) -> np.ndarray:
    """Dark state S(r)|0> x |phi_0> on the composite space.

    Works on two- and three-level spaces (the second excited state carries no
    amplitude). Raises AccuracyError when the truncated squeezed vacuum loses
    more than norm_tol of its norm.
    """
    _check_epsilon(epsilon)
    squeezed = core.squeezed_vacuum_ket(space.fock_dim, squeezing_parameter(epsilon), norm_tol)
    phi0 = qubit_dark_part(epsilon)
    ket = np.zeros(space.dim, dtype=complex)
    ket[: space.fock_dim] = phi0[0] * squeezed
    ket[space.fock_dim : 2 * space.fock_dim] = phi0[1] * squeezed
    return ket


def bright_state_vector(
    space: core.HilbertSpace, n: int, sign: int, epsilon: float, norm_tol: float = 1e-6
) -> np.ndarray:
    """Bright eigenstate S(r) D(-+ sqrt(n) eps) (|n-1>|phi_1> +- |n>|phi_0>)/sqrt(2)."""
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if not 1 <= n <= space.fock_cutoff:
        raise ValueError(f"manifold index {n} outside 1..{space.fock_cutoff}")
    _check_epsilon(epsilon)
    r = squeezing_parameter(epsilon)
    alpha = -sign * math.sqrt(n) * epsilon
    fock_op = core.squeeze(space, r) @ core.displace(space, alpha)

    phi0 = qubit_dark_part(epsilon)
    phi1 = qubit_bright_part(epsilon)
    fock_part = np.zeros((space.qubit_levels, space.fock_dim), dtype=complex)
    for level in range(2):
        bare = np.zeros(space.fock_dim, dtype=complex)
        bare[n - 1] = phi1[level]
        bare[n] += sign * phi0[level]
        fock_part[level] = fock_op @ bare / math.sqrt(2.0)

    ket = fock_part.reshape(-1)
    if space.qubit_levels == 3:
        ket = np.concatenate([ket, np.zeros(space.fock_dim, dtype=complex)])
    norm = np.linalg.norm(ket)
    deficit = 1.0 - norm * norm
    if deficit > norm_tol:
        raise AccuracyError(
            f"bright state (n={n}, eps={epsilon:.4f}) loses {deficit:.3e} of its norm "
            f"at cutoff {space.fock_cutoff}; increase the Fock cutoff"
        )
    return ket / norm


@dataclass(frozen=True)
class PeFitResult:
    """Scalar fit of P_e(eps) = C (1 - sqrt(1 - eps^2)) / 2."""

    scale: float
    residuals: np.ndarray

    @property
    def rms_residual(self) -> float:
        return float(np.sqrt(np.mean(self.residuals**2))) if self.residuals.size else 0.0


def fit_pe_curve(points) -> PeFitResult:
    """Ordinary least squares for the single scale factor C of the P_e(eps) model.

    points: iterable of (eps, P_e) pairs with eps in (0, 1).
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.size == 0:
        raise ValueError("fit_pe_curve needs at least one (eps, P_e) point")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be (eps, P_e) pairs, got shape {pts.shape}")
    eps, pe = pts[:, 0], pts[:, 1]
    if np.any(eps < 0) or np.any(eps >= 1):
        raise ValueError("all eps values must lie in [0, 1)")
    model = 0.5 * (1.0 - np.sqrt(1.0 - eps**2))
    denom = float(np.dot(model, model))
    if denom == 0.0:
        raise ValueError("degenerate fit: all eps values are 0")
    scale = float(np.dot(model, pe)) / denom
    return PeFitResult(scale=scale, residuals=pe - scale * model)


def iontrap_pe(lam: float, eta0: float, chi0: float) -> float:
    """Dark-state P_e of the trapped-ion realization.

    The phonon drive strength lam and the Raman coupling chi0 (with Lamb-Dicke
    factor eta0) enter only through the ratio 2*lam/(eta0*chi0), which plays
    the role of eps.
    """
    if lam < 0:
        raise ValueError(f"drive strength must be non-negative, got {lam}")
    if eta0 <= 0 or chi0 <= 0:
        raise ValueError("eta0 and chi0 must be positive")
    ratio = 2.0 * lam / (eta0 * chi0)
    if ratio > 1.0:
        raise BeyondCriticalError(
            f"2*lam/(eta0*chi0) = {ratio:.6f} exceeds 1; no dark state beyond the critical point"
        )
    return dark_state_pe(ratio)
