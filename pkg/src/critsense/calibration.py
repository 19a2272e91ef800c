"""XY-crosstalk correction, crosstalk extraction from synthetic Rabi sweeps,
and single-qubit gate infidelity under amplitude miscalibration.

The crosstalk model is a 2x2 complex mixing matrix with unit diagonal acting
on the two drive-line amplitudes. Extraction mirrors the hardware procedure
on synthetic data: the slowest Rabi oscillation across frequency offsets
gives the crosstalk amplitude, and the cancellation-pulse phase that leaves
the qubit unexcited gives the phase (the source pulse is driven at phase pi,
so the minimum reads off the crosstalk phase directly).
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class CrosstalkMatrix:
    """Drive-line mixing matrix [[1, m12], [m21, 1]] in the weak-crosstalk regime."""

    m12: complex
    m21: complex

    def __post_init__(self):
        if abs(self.m12) >= 1.0 or abs(self.m21) >= 1.0:
            raise ValueError("crosstalk amplitudes must be below 1 (weak-crosstalk regime)")

    @classmethod
    def from_amplitude_phase(cls, a12: float, phi12: float, a21: float, phi21: float):
        return cls(m12=a12 * cmath.exp(1j * phi12), m21=a21 * cmath.exp(1j * phi21))

    @property
    def determinant(self) -> complex:
        return 1.0 - self.m12 * self.m21

    def as_array(self) -> np.ndarray:
        return np.array([[1.0, self.m12], [self.m21, 1.0]], dtype=complex)


def crosstalk_apply(matrix: CrosstalkMatrix, drives) -> np.ndarray:
    """Effective drives reaching the qubits for nominal line amplitudes."""
    v = np.asarray(drives, dtype=complex)
    if v.shape != (2,):
        raise ValueError(f"drive pair must have two entries, got shape {v.shape}")
    return matrix.as_array() @ v


def crosstalk_correct(matrix: CrosstalkMatrix, desired) -> np.ndarray:
    """Line amplitudes to apply so the qubits see the desired drives."""
    v = np.asarray(desired, dtype=complex)
    if v.shape != (2,):
        raise ValueError(f"drive pair must have two entries, got shape {v.shape}")
    det = matrix.determinant
    if abs(det) <= 1e-9:
        raise ValueError(f"crosstalk matrix is singular (determinant {det})")
    inverse = np.array([[1.0, -matrix.m12], [-matrix.m21, 1.0]], dtype=complex) / det
    return inverse @ v


# ---------------------------------------------------------------------------
# Synthetic crosstalk sweeps and extraction
# ---------------------------------------------------------------------------


def rabi_trace(rabi_rate: float, detuning: float, tau) -> np.ndarray:
    """Driven two-level excitation P_e(tau) = (R/W)^2 sin^2(W tau / 2),
    W = sqrt(R^2 + detuning^2)."""
    tau = np.asarray(tau, dtype=float)
    if rabi_rate == 0.0:
        return np.zeros_like(tau)
    w = math.hypot(rabi_rate, detuning)
    return (rabi_rate / w) ** 2 * np.sin(0.5 * w * tau) ** 2


@dataclass(frozen=True)
class CrosstalkSweep:
    """Two-stage synthetic calibration data set.

    Stage one: traces versus drive-frequency offset (amplitude measurement).
    Stage two: traces versus cancellation-pulse phase, with the source pulse
    at phase pi and the cancellation amplitude matched to stage one.
    """

    offsets: np.ndarray
    cancel_phases: np.ndarray
    tau: np.ndarray
    freq_traces: np.ndarray    # shape (n_offsets, n_tau)
    cancel_traces: np.ndarray  # shape (n_phases, n_tau)
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        """Long-format stage-one sweep: offset_rad_per_us, tau_us, pe."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("offset_rad_per_us,tau_us,pe\n")
            for i, off in enumerate(self.offsets):
                for t, p in zip(self.tau, self.freq_traces[i]):
                    fh.write(f"{off:.12e},{t:.12e},{p:.12e}\n")


def synthesize_crosstalk_sweep(
    amplitude: float,
    phase: float,
    offsets=None,
    cancel_phases=None,
    tau=None,
    cancel_amplitude: float | None = None,
) -> CrosstalkSweep:
    """Generate the two-stage sweep for a known crosstalk (amplitude, phase).

    A small frequency detuning is assumed not to change the crosstalk itself.
    """
    if amplitude < 0:
        raise ValueError(f"crosstalk amplitude must be non-negative, got {amplitude}")
    if offsets is None:
        offsets = amplitude * np.linspace(-2.0, 2.0, 21) if amplitude > 0 else np.linspace(-1.0, 1.0, 11)
    if cancel_phases is None:
        cancel_phases = np.linspace(0.0, 2.0 * math.pi, 37)
    if tau is None:
        span = 4.0 * math.pi / amplitude if amplitude > 0 else 10.0
        tau = np.linspace(0.0, span, 401)
    offsets = np.asarray(offsets, dtype=float)
    cancel_phases = np.asarray(cancel_phases, dtype=float)
    tau = np.asarray(tau, dtype=float)

    freq_traces = np.array([rabi_trace(amplitude, off, tau) for off in offsets])

    if cancel_amplitude is None:
        cancel_amplitude = amplitude
    # source pulse at phase pi: net complex drive A e^{i(phase+pi)} + A_c e^{i phi_c}
    cancel_traces = []
    for phi_c in cancel_phases:
        net = abs(
            amplitude * cmath.exp(1j * (phase + math.pi))
            + cancel_amplitude * cmath.exp(1j * phi_c)
        )
        cancel_traces.append(rabi_trace(net, 0.0, tau))
    return CrosstalkSweep(
        offsets=offsets,
        cancel_phases=cancel_phases,
        tau=tau,
        freq_traces=freq_traces,
        cancel_traces=np.array(cancel_traces),
        metadata={"true_amplitude": amplitude, "true_phase": phase},
    )


def fit_rabi_frequency(tau, trace) -> float:
    """Oscillation rate (rad/us) of a P_e trace, FFT-seeded then refined."""
    tau = np.asarray(tau, dtype=float)
    trace = np.asarray(trace, dtype=float)
    dt = tau[1] - tau[0]
    centered = trace - trace.mean()
    spectrum = np.abs(np.fft.rfft(centered))
    freqs = np.fft.rfftfreq(tau.size, dt)
    seed = 2.0 * math.pi * freqs[int(np.argmax(spectrum[1:])) + 1]

    def model(t, contrast, w):
        return contrast * np.sin(0.5 * w * t) ** 2

    popt, _ = curve_fit(model, tau, trace, p0=[max(trace.max(), 1e-6), seed], maxfev=10000)
    return abs(float(popt[1]))


@dataclass(frozen=True)
class CrosstalkEstimate:
    amplitude: float
    phase: float
    detected: bool
    max_excitation: float
    residual_excitation: float  # at the chosen cancellation phase


def extract_crosstalk(sweep: CrosstalkSweep, detection_floor: float = 1e-3) -> CrosstalkEstimate:
    """Estimate (amplitude, phase) from a two-stage synthetic sweep.

    Amplitude: smallest fitted Rabi rate across frequency offsets (the
    on-resonance trace oscillates slowest). Phase: cancellation phase with the
    least excitation, refined parabolically between grid points. Reports
    detected=False when no trace rises above the detection floor.
    """
    peak = float(sweep.freq_traces.max())
    if peak < detection_floor:
        return CrosstalkEstimate(
            amplitude=0.0, phase=math.nan, detected=False,
            max_excitation=peak, residual_excitation=peak,
        )
    rates = [fit_rabi_frequency(sweep.tau, trace) for trace in sweep.freq_traces]
    amplitude = float(min(rates))

    worst = sweep.cancel_traces.max(axis=1)
    i = int(np.argmin(worst))
    phase = float(sweep.cancel_phases[i])
    if 0 < i < len(worst) - 1:
        # parabolic refinement of the minimum
        y0, y1, y2 = worst[i - 1], worst[i], worst[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom > 0:
            shift = 0.5 * (y0 - y2) / denom
            step = sweep.cancel_phases[i + 1] - sweep.cancel_phases[i]
            phase += float(np.clip(shift, -1.0, 1.0)) * step
    return CrosstalkEstimate(
        amplitude=amplitude,
        phase=phase % (2.0 * math.pi),
        detected=True,
        max_excitation=peak,
        residual_excitation=float(worst[i]),
    )


# ---------------------------------------------------------------------------
# Single-qubit gate infidelity
# ---------------------------------------------------------------------------


def rotation_unitary(phi: float, theta: float) -> np.ndarray:
    """R_n(phi) = exp(-i phi sigma_n / 2) about the equatorial axis at angle theta."""
    sigma_n = math.cos(theta) * PAULIS[1] + math.sin(theta) * PAULIS[2]
    return math.cos(0.5 * phi) * PAULIS[0] - 1j * math.sin(0.5 * phi) * sigma_n


def chi_matrix(unitary: np.ndarray) -> np.ndarray:
    """Process (chi) matrix of a single-qubit unitary channel in the Pauli basis.

    Built by full process tomography: the channel is applied to the
    orthonormal operator basis {I, X, Y, Z}/sqrt(2), the superoperator is
    assembled from the responses, and chi is its projection onto
    {P_m (x) P_n^T} / 4.
    """
    if unitary.shape != (2, 2):
        raise ValueError(f"expected a single-qubit unitary, got shape {unitary.shape}")
    super_op = np.zeros((4, 4), dtype=complex)
    for pauli in PAULIS:
        basis_op = pauli / math.sqrt(2.0)
        response = unitary @ basis_op @ unitary.conj().T
        super_op += np.outer(response.reshape(-1), basis_op.reshape(-1).conj())
    chi = np.zeros((4, 4), dtype=complex)
    for m in range(4):
        for n in range(4):
            probe = np.kron(PAULIS[m], PAULIS[n].T)
            chi[m, n] = np.trace(probe.conj().T @ super_op) / 4.0
    return chi


def process_fidelity(chi_ideal: np.ndarray, chi_actual: np.ndarray) -> float:
    """tr(chi_ideal chi_actual); both normalized to unit trace for unitaries."""
    return float(np.real(np.trace(chi_ideal @ chi_actual)))


def gate_infidelity(phi: float, delta_eps: float, theta: float = 0.0) -> float:
    """1 - F_p for a rotation R_n(phi) executed as R_n(phi (1 + delta_eps)).

    Computed by explicit chi-matrix process tomography of the ideal and
    miscalibrated channels; independent of the axis angle theta.
    """
    if not 0.0 <= phi <= 2.0 * math.pi:
        raise ValueError(f"rotation angle must lie in [0, 2 pi], got {phi}")
    if abs(delta_eps) >= 1.0:
        raise ValueError(f"relative amplitude error must satisfy |d| < 1, got {delta_eps}")
    ideal = chi_matrix(rotation_unitary(phi, theta))
    actual = chi_matrix(rotation_unitary(phi * (1.0 + delta_eps), theta))
    return 1.0 - process_fidelity(ideal, actual)
