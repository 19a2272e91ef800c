"""Hamiltonian builders, Lindblad right-hand side, and the RK4 integrator."""

import math

import numpy as np
import pytest

from critsense import analytics, core, lindblad
from critsense.analytics import RampSchedule, SystemParams, quasi_energies
from critsense.core import HilbertSpace, build_operators
from critsense.errors import StiffnessError
from critsense.lindblad import (
    HamiltonianModel,
    build_hamiltonian_jc2,
    build_hamiltonian_qutrit,
    build_hamiltonian_qutrit_detuned,
    collapse_channels,
    convergence_check,
    ground_density,
    integrate,
    lindblad_rhs,
)

TWO_PI = 2.0 * math.pi
OMEGA = TWO_PI * 20.9


def _params(**kw):
    defaults = dict(omega=OMEGA, k=10.0)
    defaults.update(kw)
    return SystemParams(**defaults)


class TestHamiltonianBuilders:
    def test_jc2_vacuum_rabi_splitting(self):
        space = HilbertSpace(2, 6)
        ops = build_operators(space)
        h = build_hamiltonian_jc2(0.0, _params(), ops)
        assert np.max(np.abs(h - h.conj().T)) < 1e-12
        evals = np.linalg.eigvalsh(h)
        # n = 1 manifold splits to +-Omega
        assert np.min(np.abs(evals - OMEGA)) < 1e-10
        assert np.min(np.abs(evals + OMEGA)) < 1e-10

    def test_jc2_dark_state_and_gap_at_08(self):
        space = HilbertSpace(2, 60)
        ops = build_operators(space)
        h = build_hamiltonian_jc2(0.8, _params(), ops)
        evals = np.linalg.eigvalsh(h)
        assert np.min(np.abs(evals)) < 1e-6 * OMEGA
        target = quasi_energies(1, 0.8, OMEGA)[0]
        nearest = evals[np.argmin(np.abs(evals - target))]
        assert abs(nearest - target) / target < 1e-3

    def test_jc2_rejects_qutrit_space(self):
        ops = build_operators(HilbertSpace(3, 4))
        with pytest.raises(ValueError):
            build_hamiltonian_jc2(0.0, _params(chi=TWO_PI * 245), ops)

    def test_qutrit_reduces_to_jc2(self):
        params = _params(chi=TWO_PI * 245.0)
        space3 = HilbertSpace(3, 8)
        space2 = HilbertSpace(2, 8)
        h3 = build_hamiltonian_qutrit(0.4, params, build_operators(space3))
        h2 = build_hamiltonian_jc2(0.4, params, build_operators(space2))
        # {|g>, |e>} x Fock block of the qutrit Hamiltonian
        block = h3[: space2.dim, : space2.dim]
        assert np.max(np.abs(block - h2)) < 1e-12

    def test_qutrit_ladder_element(self):
        params = _params(chi=TWO_PI * 245.0)
        space = HilbertSpace(3, 6)
        ops = build_operators(space)
        h = build_hamiltonian_qutrit(0.0, params, ops)
        for n in (1, 3, 5):
            f_ket = core.basis_ket(space, 2, n - 1)
            e_ket = core.basis_ket(space, 1, n)
            elem = np.vdot(f_ket, h @ e_ket)
            assert elem == pytest.approx(math.sqrt(2.0 * n) * OMEGA, abs=1e-10)

    def test_qutrit_detuned_f_diagonal(self):
        chi = TWO_PI * 245.0
        params = _params(chi=chi, delta_r=-TWO_PI * 1.6, delta_e=TWO_PI * 1.0)
        space = HilbertSpace(3, 4)
        ops = build_operators(space)
        h = build_hamiltonian_qutrit_detuned(0.3, params, ops)
        f0 = space.index(2, 0)
        assert h[f0, f0].real == pytest.approx(2.0 * TWO_PI * 1.0 - chi, abs=1e-10)
        assert h[f0, f0].real == pytest.approx(TWO_PI * (2.0 - 245.0), abs=1e-10)

    def test_detuned_forms_reduce_at_zero_detuning(self):
        params = _params(chi=TWO_PI * 245.0)
        space = HilbertSpace(3, 6)
        ops = build_operators(space)
        a = build_hamiltonian_qutrit(0.7, params, ops)
        b = build_hamiltonian_qutrit_detuned(0.7, params, ops)
        assert np.max(np.abs(a - b)) == 0.0

    def test_qutrit_requires_positive_chi(self):
        ops = build_operators(HilbertSpace(3, 4))
        with pytest.raises(ValueError):
            build_hamiltonian_qutrit(0.0, _params(chi=0.0), ops)


class TestLindbladRhs:
    def test_zero_everything(self):
        rho = np.diag([0.3, 0.7]).astype(complex)
        out = lindblad_rhs(rho, np.zeros((2, 2), dtype=complex), [])
        assert np.max(np.abs(out)) == 0.0

    def test_qubit_decay_rate(self):
        space = HilbertSpace(2, 3)
        ops = build_operators(space)
        rho = np.outer(core.basis_ket(space, 1, 0), core.basis_ket(space, 1, 0).conj())
        kappa_q = 0.05
        out = lindblad_rhs(rho, np.zeros_like(rho), [(kappa_q, ops.q)])
        dpe = np.trace(ops.projector("e") @ out).real
        assert dpe == pytest.approx(-kappa_q, abs=1e-12)

    def test_photon_decay_rate(self):
        space = HilbertSpace(2, 3)
        ops = build_operators(space)
        rho = np.outer(core.basis_ket(space, 0, 1), core.basis_ket(space, 0, 1).conj())
        kappa_r = 0.08
        out = lindblad_rhs(rho, np.zeros_like(rho), [(kappa_r, ops.a)])
        dn = np.trace(ops.number @ out).real
        assert dn == pytest.approx(-kappa_r, abs=1e-12)

    def test_trace_free_and_hermitian(self):
        rng = np.random.default_rng(5)
        space = HilbertSpace(3, 5)
        ops = build_operators(space)
        m = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        h = build_hamiltonian_qutrit(0.5, _params(chi=TWO_PI * 245.0), ops)
        channels = [(0.05, ops.q), (0.08, ops.q_dag @ ops.q), (0.08, ops.a)]
        out = lindblad_rhs(rho, h, channels)
        assert abs(np.trace(out)) < 1e-10
        assert np.max(np.abs(out - out.conj().T)) < 1e-10

    def test_negative_rate_rejected(self):
        rho = np.diag([1.0, 0.0]).astype(complex)
        with pytest.raises(ValueError):
            lindblad_rhs(rho, np.zeros((2, 2), dtype=complex), [(-0.1, np.eye(2, dtype=complex))])

    def test_exponential_photon_decay(self):
        # H = 0 and only kappa_r L[a]: <n>(t) = <n>(0) exp(-kappa_r t)
        space = HilbertSpace(2, 6)
        ops = build_operators(space)
        kappa_r = 0.08
        ket = core.basis_ket(space, 0, 4)
        rho = np.outer(ket, ket.conj())
        h0 = np.zeros((space.dim, space.dim), dtype=complex)
        rhs = lambda t, r: lindblad_rhs(r, h0, [(kappa_r, ops.a)])
        t, dt = 0.0, 0.01
        for _ in range(500):
            rho = lindblad._rk4_step(rhs, t, rho, dt)
            t += dt
        n_t = np.trace(ops.number @ rho).real
        assert n_t == pytest.approx(4.0 * math.exp(-kappa_r * t), abs=1e-8)


class TestFastRhsEquivalence:
    @pytest.mark.parametrize(
        "kind,levels,detunings",
        [
            ("jc2", 2, (0.0, 0.0)),
            ("jc2_detuned", 2, (-TWO_PI * 0.2, TWO_PI * 0.2)),
            ("qutrit_resonant", 3, (0.0, 0.0)),
            ("qutrit_detuned", 3, (-TWO_PI * 1.6, TWO_PI * 1.0)),
        ],
    )
    def test_structured_rhs_matches_reference(self, kind, levels, detunings):
        rng = np.random.default_rng(17)
        params = _params(
            kappa_q=0.05, kappa_r=0.08, gamma_q=0.08,
            chi=TWO_PI * 245.0, delta_r=detunings[0], delta_e=detunings[1],
        )
        space = HilbertSpace(levels, 7)
        ops = build_operators(space)
        schedule = RampSchedule(k=10.0, epsilon_max=0.95)
        model = HamiltonianModel(kind, params, schedule, space)
        fast = lindblad._ModelRhs(model, ops)

        m = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        t = 0.037
        h0, h1 = lindblad.hamiltonian_parts(kind, params, ops)
        h = h0 + schedule.epsilon(t) * h1
        reference = lindblad_rhs(rho, h, collapse_channels(params, ops))
        assert np.max(np.abs(fast(t, rho) - reference)) < 1e-12


class TestIntegrate:
    def test_stationary_state_constant(self):
        # eps = 0 keeps |g,0> an exact eigenstate: all observables constant.
        space = HilbertSpace(2, 5)
        model = HamiltonianModel("jc2", _params(k=0.0), RampSchedule(k=0.0, epsilon_max=0.0), space)
        traj = integrate(model, None, 0.2, dt_max=5e-3)
        assert np.max(np.abs(traj.p_g - 1.0)) < 1e-12
        assert np.max(np.abs(traj.n_avg)) < 1e-12
        assert np.max(np.abs(traj.trace - 1.0)) < 1e-12

    def test_vacuum_rabi_oscillation(self):
        space = HilbertSpace(2, 5)
        model = HamiltonianModel("jc2", _params(k=0.0), RampSchedule(k=0.0, epsilon_max=0.0), space)
        ket = core.basis_ket(space, 1, 0)
        rho0 = np.outer(ket, ket.conj())
        t_end = 3.0 * math.pi / OMEGA
        traj = integrate(model, rho0, t_end, dt_max=2e-4, with_fidelity=False)
        assert np.max(np.abs(traj.p_e - np.cos(OMEGA * traj.times) ** 2)) < 1e-6

    def test_purity_preserved_without_dissipation(self):
        params = _params()
        sched = RampSchedule(k=10.0, epsilon_max=0.8)
        space = HilbertSpace(2, 25)
        model = HamiltonianModel("jc2", params, sched, space)
        traj = integrate(model, None, sched.duration, record_interval=sched.duration / 40)
        assert np.max(np.abs(traj.purity - 1.0)) < 1e-6
        traj.check_invariants()

    def test_dissipative_quench_invariants(self):
        params = _params(kappa_q=0.05, kappa_r=0.08, gamma_q=0.08)
        sched = RampSchedule(k=10.0, epsilon_max=0.85)
        space = HilbertSpace(2, 25)
        model = HamiltonianModel("jc2", params, sched, space)
        traj = integrate(model, None, sched.duration, record_interval=sched.duration / 50)
        traj.check_invariants()
        assert traj.min_eigenvalue is not None
        assert traj.min_eigenvalue.min() >= -1e-6
        assert traj.herm_deviation.max() < 1e-9
        # fidelity stays high this far from the critical point
        assert traj.fidelity[-1] > 0.98
        # epsilon column tracks the schedule
        assert traj.epsilon[-1] == pytest.approx(0.85, abs=1e-9)

    def test_frame_reduction_detuned_equals_resonant(self):
        params = _params(chi=TWO_PI * 245.0)
        sched = RampSchedule(k=10.0, epsilon_max=0.5)
        space = HilbertSpace(3, 12)
        t_end = sched.duration
        kw = dict(record_interval=t_end / 20, with_fidelity=False)
        a = integrate(HamiltonianModel("qutrit_resonant", params, sched, space), None, t_end, **kw)
        b = integrate(HamiltonianModel("qutrit_detuned", params, sched, space), None, t_end, **kw)
        assert np.max(np.abs(a.p_e - b.p_e)) < 1e-10
        assert np.max(np.abs(a.n_avg - b.n_avg)) < 1e-10

    def test_step_underflow_raises(self):
        space = HilbertSpace(2, 5)
        model = HamiltonianModel("jc2", _params(), RampSchedule(k=10.0, epsilon_max=0.5), space)
        with pytest.raises(StiffnessError):
            integrate(model, None, 0.05, dt_max=1e-3, step_tol=1e-16, dt_min=1e-4)

    def test_input_validation(self):
        space = HilbertSpace(2, 5)
        model = HamiltonianModel("jc2", _params(), RampSchedule(k=10.0, epsilon_max=0.5), space)
        with pytest.raises(ValueError):
            integrate(model, None, 0.0)
        with pytest.raises(ValueError):
            integrate(model, np.eye(space.dim, dtype=complex), 0.1)  # trace != 1

    def test_model_kind_validation(self):
        with pytest.raises(ValueError):
            HamiltonianModel("jc3", _params(), RampSchedule(k=1.0), HilbertSpace(2, 5))
        with pytest.raises(ValueError):
            HamiltonianModel("jc2", _params(), RampSchedule(k=1.0), HilbertSpace(3, 5))
        with pytest.raises(ValueError):
            HamiltonianModel("qutrit_resonant", _params(chi=0.0), RampSchedule(k=1.0), HilbertSpace(3, 5))


class TestTrajectorySerialization:
    def test_csv_schema(self, tmp_path):
        space = HilbertSpace(2, 5)
        model = HamiltonianModel("jc2", _params(), RampSchedule(k=10.0, epsilon_max=0.3), space)
        sched_t = model.schedule.duration
        traj = integrate(model, None, sched_t, record_interval=sched_t / 5)
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t_us,epsilon,P_g,P_e,P_f,n_avg,fidelity,trace"
        assert len(lines) == len(traj.times) + 1
        first = [float(x) for x in lines[1].split(",")]
        assert first[0] == 0.0 and first[2] == pytest.approx(1.0)


class TestConvergenceCheck:
    def test_static_drive_all_zero(self):
        space = HilbertSpace(2, 10)
        model = HamiltonianModel("jc2", _params(k=0.0), RampSchedule(k=0.0, epsilon_max=0.0), space)
        report = convergence_check(model, None, 0.1, (5, 8, 10))
        assert report.passed
        assert np.max(report.differences) < 1e-12

    def test_quench_09_converges(self):
        params = _params(kappa_q=0.05, kappa_r=0.08, gamma_q=0.08)
        sched = RampSchedule(k=10.0, epsilon_max=0.9)
        space = HilbertSpace(2, 30)
        model = HamiltonianModel("jc2", params, sched, space)
        report = convergence_check(model, None, sched.duration, (30, 45, 60))
        # successive maxima shrink and the last pair is below threshold
        assert report.max_differences[0] > report.max_differences[1]
        assert report.passed, report.summary()

    def test_under_truncated_quench_fails(self):
        params = _params(kappa_q=0.05, kappa_r=0.08, gamma_q=0.08)
        sched = RampSchedule(k=10.0, epsilon_max=0.99)
        space = HilbertSpace(2, 15)
        model = HamiltonianModel("jc2", params, sched, space)
        report = convergence_check(model, None, sched.duration, (10, 15))
        assert not report.passed
        assert report.worst_observable in report.observable_names
        assert report.worst_difference > report.threshold
        assert "FAIL" in report.summary()

    def test_requires_increasing_cutoffs(self):
        space = HilbertSpace(2, 10)
        model = HamiltonianModel("jc2", _params(), RampSchedule(k=10.0, epsilon_max=0.5), space)
        with pytest.raises(ValueError):
            convergence_check(model, None, 0.1, (10,))
        with pytest.raises(ValueError):
            convergence_check(model, None, 0.1, (10, 10))
