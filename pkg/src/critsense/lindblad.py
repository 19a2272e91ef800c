"""Time-dependent Lindblad master-equation integration for the quench models.

The integrator is fixed-step RK4 with step-doubling control: each step is
taken once at dt and once as two dt/2 steps, and is accepted only when every
recorded observable agrees between the two results within `step_tol`. The
drive amplitude eps(t) is re-evaluated at every RK4 stage time. Density
matrices are propagated directly (d x d, never the d^2 x d^2 superoperator).

Dissipation channels, identical for two- and three-level models:
kappa_q L[q], gamma_q L[q^dag q], kappa_r L[a].
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import analytics, core
from .errors import IntegrationFailureError, StiffnessError

MODEL_KINDS = ("jc2", "jc2_detuned", "qutrit_resonant", "qutrit_detuned")

# Hard failure bounds checked at every recorded step.
TRACE_DRIFT_LIMIT = 1e-4
POSITIVITY_FLOOR = -1e-6
HERMITICITY_LIMIT = 1e-9


@dataclass(frozen=True)
class HamiltonianModel:
    """A quench scenario: model kind, physical parameters, ramp, and space."""

    kind: str
    params: analytics.SystemParams
    schedule: analytics.RampSchedule
    space: core.HilbertSpace

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        needed = 2 if self.kind.startswith("jc2") else 3
        if self.space.qubit_levels != needed:
            raise ValueError(
                f"model kind {self.kind!r} requires {needed} qubit levels, "
                f"space has {self.space.qubit_levels}"
            )
        if self.kind.startswith("qutrit") and self.params.chi <= 0:
            raise ValueError("qutrit models require a positive anharmonicity chi")


def _jc_coupling(params: analytics.SystemParams, ops: core.OperatorSet) -> np.ndarray:
    return params.omega * (ops.a_dag @ ops.q + ops.a @ ops.q_dag)


def _drive_part(params: analytics.SystemParams, ops: core.OperatorSet) -> np.ndarray:
    return 0.5 * params.omega * (ops.a_dag + ops.a)


def hamiltonian_parts(kind: str, params: analytics.SystemParams, ops: core.OperatorSet):
    """Split H(eps) = H0 + eps * H1 for a model kind on a given operator set."""
    space = ops.space
    if kind.startswith("jc2") and space.qubit_levels != 2:
        raise ValueError(f"{kind!r} needs a two-level space")
    if kind.startswith("qutrit") and space.qubit_levels != 3:
        raise ValueError(f"{kind!r} needs a three-level space")

    h0 = _jc_coupling(params, ops)
    if kind == "jc2_detuned":
        h0 = h0 + params.delta_r * ops.number + params.delta_e * ops.projector("e")
    elif kind == "qutrit_resonant":
        h0 = h0 - params.chi * ops.projector("f")
    elif kind == "qutrit_detuned":
        h0 = (
            h0
            + params.delta_e * ops.projector("e")
            + (2.0 * params.delta_e - params.chi) * ops.projector("f")
            + params.delta_r * ops.number
        )
    return h0, _drive_part(params, ops)


def build_hamiltonian_jc2(epsilon: float, params: analytics.SystemParams, ops: core.OperatorSet) -> np.ndarray:
    """Resonant two-level Hamiltonian Omega [(a^dag q + a q^dag) + eps (a^dag + a)/2]."""
    h0, h1 = hamiltonian_parts("jc2", params, ops)
    return h0 + epsilon * h1


def build_hamiltonian_jc2_detuned(epsilon: float, params: analytics.SystemParams, ops: core.OperatorSet) -> np.ndarray:
    """Two-level Hamiltonian with resonator/qubit detunings from the signal field."""
    h0, h1 = hamiltonian_parts("jc2_detuned", params, ops)
    return h0 + epsilon * h1


def build_hamiltonian_qutrit(epsilon: float, params: analytics.SystemParams, ops: core.OperatorSet) -> np.ndarray:
    """Resonant qutrit-resonator Hamiltonian (rotating frame of the signal field)."""
    if params.chi <= 0:
        raise ValueError("qutrit Hamiltonian requires a positive anharmonicity chi")
    h0, h1 = hamiltonian_parts("qutrit_resonant", params, ops)
    return h0 + epsilon * h1


def build_hamiltonian_qutrit_detuned(epsilon: float, params: analytics.SystemParams, ops: core.OperatorSet) -> np.ndarray:
    """Qutrit-resonator Hamiltonian with explicit signal-field detunings."""
    if params.chi <= 0:
        raise ValueError("qutrit Hamiltonian requires a positive anharmonicity chi")
    h0, h1 = hamiltonian_parts("qutrit_detuned", params, ops)
    return h0 + epsilon * h1


def collapse_channels(params: analytics.SystemParams, ops: core.OperatorSet):
    """(rate, operator) pairs of the dissipation model; zero rates are dropped."""
    channels = []
    if params.kappa_q > 0:
        channels.append((params.kappa_q, ops.q))
    if params.gamma_q > 0:
        channels.append((params.gamma_q, ops.q_dag @ ops.q))
    if params.kappa_r > 0:
        channels.append((params.kappa_r, ops.a))
    return channels


def lindblad_rhs(rho: np.ndarray, hamiltonian: np.ndarray, collapse) -> np.ndarray:
    """Reference Lindblad right-hand side.

    drho/dt = -i[H, rho] + sum_j rate_j (O rho O^dag - (O^dag O rho + rho O^dag O)/2).
    Trace-free and Hermiticity-preserving by construction.
    """
    rho = np.asarray(rho, dtype=complex)
    hamiltonian = np.asarray(hamiltonian, dtype=complex)
    if rho.shape != hamiltonian.shape:
        raise ValueError(f"shape mismatch: rho {rho.shape} vs H {hamiltonian.shape}")
    out = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for rate, op in collapse:
        if rate < 0:
            raise ValueError(f"collapse rate must be non-negative, got {rate}")
        if op.shape != rho.shape:
            raise ValueError(f"collapse operator shape {op.shape} does not match rho {rho.shape}")
        op_dag_op = op.conj().T @ op
        out += rate * (op @ rho @ op.conj().T - 0.5 * (op_dag_op @ rho + rho @ op_dag_op))
    return out


class _ModelRhs:
    """Structured right-hand side of a quench model.

    The commutator and the anticommutator halves of the dissipators are folded
    into one non-Hermitian effective Hamiltonian (a single matmul per
    evaluation); the jump terms use the ladder structure of q, q^dag q, and a,
    which costs O(d^2) via block slicing instead of O(d^3).
    """

    def __init__(self, model: HamiltonianModel, ops: core.OperatorSet):
        self.schedule = model.schedule
        space = model.space
        self.q_levels = space.qubit_levels
        self.f_dim = space.fock_dim

        h0, h1 = hamiltonian_parts(model.kind, model.params, ops)
        damping = np.zeros_like(h0)
        for rate, op in collapse_channels(model.params, ops):
            damping += rate * (op.conj().T @ op)
        self.h0_eff = h0 - 0.5j * damping
        self.h1 = h1
        self._h_buf = np.empty_like(h0)

        p = model.params
        self.kappa_q = p.kappa_q
        self.gamma_q = p.gamma_q
        self.kappa_r = p.kappa_r
        # q rho q^dag couples block (i, j) <- (i+1, j+1) with ladder weights.
        self.ladder = np.sqrt(np.arange(1, self.q_levels, dtype=float))
        if p.kappa_r > 0:
            w = np.sqrt(np.arange(1, self.f_dim, dtype=float))
            self.photon_weights = p.kappa_r * np.outer(w, w)
        if p.gamma_q > 0:
            d = np.arange(self.q_levels, dtype=float)
            self.dephase_weights = p.gamma_q * np.outer(d, d)

    def __call__(self, t: float, rho: np.ndarray) -> np.ndarray:
        heff = np.multiply(self.h1, self.schedule.epsilon(t), out=self._h_buf)
        heff += self.h0_eff
        x = heff @ rho
        out = x - x.conj().T
        out *= -1j

        q, f = self.q_levels, self.f_dim
        rho4 = rho.reshape(q, f, q, f)
        out4 = out.reshape(q, f, q, f)
        if self.kappa_r > 0:
            out4[:, : f - 1, :, : f - 1] += self.photon_weights[None, :, None, :] * rho4[:, 1:, :, 1:]
        if self.kappa_q > 0:
            c = self.ladder
            for i in range(q - 1):
                for j in range(q - 1):
                    out4[i, :, j, :] += (self.kappa_q * c[i] * c[j]) * rho4[i + 1, :, j + 1, :]
        if self.gamma_q > 0:
            out4 += self.dephase_weights[:, None, :, None] * rho4
        return out


def _rk4_step(rhs, t, y, h, k1=None):
    if k1 is None:
        k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class Trajectory:
    """Recorded observables of one integration run, indexed by time and eps."""

    kind: str
    fock_cutoff: int
    times: np.ndarray
    epsilon: np.ndarray
    populations: np.ndarray  # shape (n_records, qubit_levels)
    n_avg: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    fidelity: np.ndarray | None = None
    min_eigenvalue: np.ndarray | None = None
    herm_deviation: np.ndarray | None = None

    @property
    def p_g(self) -> np.ndarray:
        return self.populations[:, 0]

    @property
    def p_e(self) -> np.ndarray:
        return self.populations[:, 1]

    @property
    def p_f(self) -> np.ndarray:
        if self.populations.shape[1] < 3:
            return np.zeros(len(self.times))
        return self.populations[:, 2]

    def final(self) -> dict:
        """Observables of the last recorded sample."""
        out = {
            "t": float(self.times[-1]),
            "epsilon": float(self.epsilon[-1]),
            "P_g": float(self.p_g[-1]),
            "P_e": float(self.p_e[-1]),
            "n_avg": float(self.n_avg[-1]),
            "trace": float(self.trace[-1]),
        }
        if self.populations.shape[1] == 3:
            out["P_f"] = float(self.p_f[-1])
        if self.fidelity is not None:
            out["fidelity"] = float(self.fidelity[-1])
        return out

    def check_invariants(self, pop_tol: float = 1e-6, trace_tol: float = 1e-6) -> None:
        """Raise if populations leave [0,1] or trace drifts beyond tolerance."""
        pops = self.populations
        if pops.min() < -pop_tol or pops.max() > 1.0 + pop_tol:
            raise IntegrationFailureError(
                f"population outside [-{pop_tol}, 1+{pop_tol}]: "
                f"range [{pops.min():.3e}, {pops.max():.3e}]"
            )
        sums = pops.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > pop_tol:
            raise IntegrationFailureError(
                f"populations do not sum to 1 within {pop_tol}: "
                f"max deviation {np.max(np.abs(sums - 1.0)):.3e}"
            )
        drift = np.max(np.abs(self.trace - 1.0))
        if drift > trace_tol:
            raise IntegrationFailureError(f"trace drift {drift:.3e} exceeds {trace_tol}")

    def to_csv(self, path) -> None:
        """Write the fixed schema t_us, epsilon, P_g, P_e, P_f, n_avg, fidelity, trace."""
        fid = self.fidelity if self.fidelity is not None else np.full(len(self.times), np.nan)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t_us,epsilon,P_g,P_e,P_f,n_avg,fidelity,trace\n")
            for i in range(len(self.times)):
                row = (
                    self.times[i], self.epsilon[i], self.p_g[i], self.p_e[i],
                    self.p_f[i], self.n_avg[i], fid[i], self.trace[i],
                )
                fh.write(",".join(f"{v:.12e}" for v in row) + "\n")


def ground_density(space: core.HilbertSpace) -> np.ndarray:
    """|g, 0><g, 0| on the composite space."""
    ket = core.basis_ket(space, 0, 0)
    return np.outer(ket, ket.conj())


def integrate(
    model: HamiltonianModel,
    rho0: np.ndarray | None,
    t_end: float,
    dt_max: float = 1e-3,
    *,
    step_tol: float = 1e-6,
    dt_min: float = 1e-6,
    record_interval: float | None = None,
    record_times=None,
    with_fidelity: bool = True,
    validate: bool = True,
) -> Trajectory:
    """Integrate the master equation from 0 to t_end and record observables.

    rho0 defaults to |g,0><g,0|. A step is accepted when the full-step and
    half-step results agree in every recorded observable within step_tol;
    otherwise dt is halved (StiffnessError below dt_min). With validate=True,
    Hermiticity, positivity, and trace are checked at every recorded sample
    and the eigenvalue/Hermiticity evidence is stored on the Trajectory.
    record_interval=None records every accepted step; record_times instead
    forces steps to land on the given times and records exactly there
    (plus t=0 and t_end).
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if dt_max <= 0:
        raise ValueError(f"dt_max must be positive, got {dt_max}")
    if record_times is not None:
        record_times = np.sort(np.asarray(record_times, dtype=float))
        if record_times.size and (record_times[0] < 0 or record_times[-1] > t_end + 1e-12):
            raise ValueError("record_times must lie within [0, t_end]")

    space = model.space
    ops = core.build_operators(space)
    rhs = _ModelRhs(model, ops)

    if rho0 is None:
        rho = ground_density(space)
    else:
        rho = core.check_density(rho0, herm_tol=1e-8, trace_tol=1e-6, eig_floor=-1e-6)
    rho = np.array(rho, dtype=complex)

    q_levels, f_dim = space.qubit_levels, space.fock_dim
    n_weights = np.tile(np.arange(f_dim, dtype=float), q_levels)

    def observables(state: np.ndarray, dark_ket: np.ndarray | None) -> np.ndarray:
        diag = np.real(np.diagonal(state))
        pops = diag.reshape(q_levels, f_dim).sum(axis=1)
        values = [*pops, float(diag @ n_weights), float(diag.sum())]
        if dark_ket is not None:
            values.append(float(np.real(np.vdot(dark_ket, state @ dark_ket))))
        return np.array(values)

    def dark_ket_at(eps: float) -> np.ndarray | None:
        if not with_fidelity:
            return None
        # Accuracy at low cutoffs is policed by convergence_check, not here.
        return analytics.dark_state_vector(space, eps, norm_tol=math.inf)

    records = {
        "t": [], "eps": [], "pops": [], "n_avg": [], "trace": [],
        "purity": [], "fid": [], "min_eig": [], "herm": [],
    }

    def record(t: float, state: np.ndarray, obs: np.ndarray) -> None:
        records["t"].append(t)
        records["eps"].append(model.schedule.epsilon(t))
        records["pops"].append(obs[:q_levels])
        records["n_avg"].append(obs[q_levels])
        records["trace"].append(obs[q_levels + 1])
        records["purity"].append(float(np.real(np.vdot(state, state))))
        records["fid"].append(obs[q_levels + 2] if with_fidelity else np.nan)
        if validate:
            herm = float(np.max(np.abs(state - state.conj().T)))
            min_eig = float(np.min(np.linalg.eigvalsh(state)))
            records["herm"].append(herm)
            records["min_eig"].append(min_eig)
            drift = abs(obs[q_levels + 1] - 1.0)
            if drift > TRACE_DRIFT_LIMIT:
                raise IntegrationFailureError(
                    f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_LIMIT} at t={t:.6f} us"
                )
            if herm > HERMITICITY_LIMIT:
                raise IntegrationFailureError(
                    f"Hermiticity deviation {herm:.3e} exceeds {HERMITICITY_LIMIT} at t={t:.6f} us"
                )
            if min_eig < POSITIVITY_FLOOR:
                raise IntegrationFailureError(
                    f"eigenvalue {min_eig:.3e} below {POSITIVITY_FLOOR} at t={t:.6f} us"
                )

    t = 0.0
    record(t, rho, observables(rho, dark_ket_at(0.0)))
    last_recorded = 0.0
    pending = [x for x in record_times if x > 1e-12] if record_times is not None else None
    dt = dt_max

    while t_end - t > 1e-12:
        h = min(dt, t_end - t)
        if pending and pending[0] - t > 1e-12:
            h = min(h, pending[0] - t)
        k1 = rhs(t, rho)
        while True:
            y_big = _rk4_step(rhs, t, rho, h, k1=k1)
            y_mid = _rk4_step(rhs, t, rho, 0.5 * h, k1=k1)
            y_small = _rk4_step(rhs, t + 0.5 * h, y_mid, 0.5 * h)
            dark = dark_ket_at(model.schedule.epsilon(t + h))
            obs_small = observables(y_small, dark)
            err = float(np.max(np.abs(obs_small - observables(y_big, dark))))
            if math.isfinite(err) and err <= step_tol:
                break
            h *= 0.5
            if h < dt_min:
                raise StiffnessError(
                    f"step size underflow (dt = {h:.3e} us < {dt_min} us) at t={t:.6f} us"
                )
        t += h
        rho = y_small
        dt = min(2.0 * h, dt_max) if err < step_tol / 32.0 else h

        if pending is not None:
            due = False
            while pending and t >= pending[0] - 1e-12:
                pending.pop(0)
                due = True
        else:
            due = record_interval is None or (t - last_recorded) >= record_interval
        if due or t_end - t <= 1e-12:
            record(t, rho, obs_small)
            last_recorded = t

    return Trajectory(
        kind=model.kind,
        fock_cutoff=space.fock_cutoff,
        times=np.array(records["t"]),
        epsilon=np.array(records["eps"]),
        populations=np.array(records["pops"]),
        n_avg=np.array(records["n_avg"]),
        trace=np.array(records["trace"]),
        purity=np.array(records["purity"]),
        fidelity=np.array(records["fid"]) if with_fidelity else None,
        min_eigenvalue=np.array(records["min_eig"]) if validate else None,
        herm_deviation=np.array(records["herm"]) if validate else None,
    )


@dataclass
class ConvergenceReport:
    """Final-observable differences between successive Fock cutoffs."""

    cutoffs: tuple
    observable_names: tuple
    finals: np.ndarray       # shape (n_cutoffs, n_observables)
    differences: np.ndarray  # shape (n_cutoffs - 1, n_observables)
    threshold: float

    @property
    def max_differences(self) -> np.ndarray:
        return self.differences.max(axis=1)

    @property
    def passed(self) -> bool:
        return bool(self.differences[-1].max() < self.threshold)

    @property
    def worst_observable(self) -> str:
        return self.observable_names[int(self.differences[-1].argmax())]

    @property
    def worst_difference(self) -> float:
        return float(self.differences[-1].max())

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"convergence {status}: cutoffs {self.cutoffs}, threshold {self.threshold:g}, "
            f"worst observable {self.worst_observable!r} at {self.worst_difference:.3e}"
        )


def convergence_check(
    model: HamiltonianModel,
    rho0,
    t_end: float,
    cutoffs,
    threshold: float = 1e-4,
    **integrate_kwargs,
) -> ConvergenceReport:
    """Re-run the integration at increasing Fock cutoffs and compare finals.

    rho0 may be None (ground state at every cutoff) or a callable
    space -> density matrix. Passes when every final observable changes by
    less than `threshold` between the last two cutoffs.
    """
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) < 2 or any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise ValueError(f"need at least two strictly increasing cutoffs, got {cutoffs}")

    integrate_kwargs.setdefault("record_interval", t_end / 50.0)
    names = None
    finals = []
    for cutoff in cutoffs:
        space = core.HilbertSpace(model.space.qubit_levels, cutoff)
        scaled = replace(model, space=space)
        state0 = rho0(space) if callable(rho0) else rho0
        traj = integrate(scaled, state0, t_end, **integrate_kwargs)
        final = traj.final()
        final.pop("t")
        final.pop("epsilon")
        if names is None:
            names = tuple(sorted(final))
        finals.append([final[name] for name in names])

    finals = np.array(finals)
    differences = np.abs(np.diff(finals, axis=0))
    return ConvergenceReport(
        cutoffs=cutoffs,
        observable_names=names,
        finals=finals,
        differences=differences,
        threshold=threshold,
    )
