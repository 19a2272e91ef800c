"""Scenario drivers: quench runs, parameter scans, error budgets, and the
Rabi-method comparison.

Every driver is deterministic (no RNG); scan cells are independent work
items assembled by grid index, optionally across processes via `jobs`.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytics, core, lindblad
from .analytics import SystemParams, dark_state_pe, fisher_classical, ramp_time

QUENCH_KINDS = lindblad.MODEL_KINDS


def default_fock_cutoff(eps_target: float) -> int:
    """30 photons suffice up to eps = 0.9; runs closer to the critical point use 60."""
    return 30 if eps_target <= 0.9 else 60


def _model_for(kind: str, params: SystemParams, eps_target: float, n_max: int | None):
    if not 0.0 <= eps_target < 1.0:
        raise ValueError(f"eps_target must lie in [0, 1), got {eps_target}")
    cutoff = n_max if n_max is not None else default_fock_cutoff(eps_target)
    levels = 2 if kind.startswith("jc2") else 3
    space = core.HilbertSpace(levels, cutoff)
    schedule = analytics.RampSchedule(k=params.k, epsilon_max=eps_target)
    return lindblad.HamiltonianModel(kind, params, schedule, space)


def run_quench(
    kind: str,
    params: SystemParams,
    eps_target: float,
    *,
    n_max: int | None = None,
    dissipative: bool = True,
    record_points: int = 400,
    with_fidelity: bool = True,
    **integrate_kwargs,
) -> lindblad.Trajectory:
    """Quench from |g,0> along the ramp until eps reaches eps_target.

    dissipative=False zeroes all decay and dephasing rates (pure Hamiltonian
    dynamics). The trajectory is indexed by both time and eps.
    """
    if not dissipative:
        params = replace(params, kappa_q=0.0, kappa_r=0.0, gamma_q=0.0)
    model = _model_for(kind, params, eps_target, n_max)
    t_end = model.schedule.duration
    integrate_kwargs.setdefault("record_interval", t_end / record_points)
    return lindblad.integrate(model, None, t_end, with_fidelity=with_fidelity, **integrate_kwargs)


def binned_pe(trajectory: lindblad.Trajectory, bin_width: float = 0.005):
    """Ripple-smoothed P_e: mean per eps bin. Returns (bin centers, means)."""
    eps = trajectory.epsilon
    edges = np.arange(0.0, eps.max() + bin_width, bin_width)
    idx = np.digitize(eps, edges) - 1
    centers, means = [], []
    for b in range(len(edges) - 1):
        sel = idx == b
        if np.any(sel):
            centers.append(0.5 * (edges[b] + edges[b + 1]))
            means.append(float(trajectory.p_e[sel].mean()))
    return np.array(centers), np.array(means)


@dataclass
class ScanResult:
    """Grid scan output: named axes, a value array matching the grid product,
    and run metadata."""

    axes: list
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(len(grid) for _, grid in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"value shape {self.values.shape} does not match grids {shape}")

    def flags(self, threshold: float | None = None) -> np.ndarray:
        """Boolean mask of cells at or below the flag threshold."""
        if threshold is None:
            threshold = self.metadata.get("flag_threshold")
        if threshold is None:
            raise ValueError("no flag threshold configured for this scan")
        return self.values <= threshold

    def to_csv(self, path) -> None:
        """Long-format CSV: one row per cell, axis coordinates then value."""
        names = [name for name, _ in self.axes]
        grids = [np.asarray(grid) for _, grid in self.axes]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for key in sorted(self.metadata):
                fh.write(f"# {key} = {self.metadata[key]}\n")
            fh.write(",".join(names + ["value"]) + "\n")
            for flat_index in range(self.values.size):
                coords = np.unravel_index(flat_index, self.values.shape)
                row = [grids[d][c] for d, c in enumerate(coords)]
                row.append(self.values[coords])
                fh.write(",".join(f"{v:.12e}" for v in row) + "\n")

    def to_matrix(self, path) -> None:
        """Gnuplot nonuniform-matrix format; requires a two-axis scan."""
        if len(self.axes) != 2:
            raise ValueError("matrix output requires exactly two axes")
        (_, rows), (_, cols) = self.axes
        with open(path, "w", encoding="utf-8", newline="") as fh:
            header = [f"{len(cols) + 0:d}"] + [f"{c:.12e}" for c in cols]
            fh.write(" ".join(header) + "\n")
            for i, r in enumerate(rows):
                line = [f"{r:.12e}"] + [f"{v:.12e}" for v in self.values[i]]
                fh.write(" ".join(line) + "\n")


def _map_cells(func, items, jobs: int):
    if jobs <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _pe_at_working_points(task):
    """P_e sampled at each working point of one quench (single integration)."""
    params, kind, eps_grid, n_max, opts = task
    eps_max = float(np.max(eps_grid))
    model = _model_for(kind, params, eps_max, n_max)
    times = [ramp_time(e, params.k) for e in eps_grid]
    traj = lindblad.integrate(
        model, None, model.schedule.duration,
        record_times=times, with_fidelity=False, **opts,
    )
    pe = []
    for t in times:
        idx = int(np.argmin(np.abs(traj.times - t)))
        pe.append(float(traj.p_e[idx]))
    return pe


def relative_error_scan(
    eps_w_grid,
    k_grid,
    rate_sets,
    params: SystemParams = analytics.REFERENCE_PARAMS,
    *,
    n_max: int | None = None,
    flag_threshold: float = 1e-3,
    jobs: int = 1,
    **integrate_kwargs,
) -> ScanResult:
    """Relative deviation D = |P_e - P_e_ideal| / P_e_ideal over working points
    and ramp speeds, for each dissipation-rate set.

    rate_sets: iterable of dicts with any of kappa_q, kappa_r, gamma_q.
    Cells with D <= flag_threshold (default 0.1%) are flagged via `flags()`.
    One integration per (rate set, k) covers the whole eps_w axis.
    """
    eps_w = np.asarray(sorted(eps_w_grid), dtype=float)
    ks = np.asarray(list(k_grid), dtype=float)
    rate_sets = list(rate_sets)
    if eps_w.size == 0 or ks.size == 0 or not rate_sets:
        raise ValueError("eps_w grid, k grid, and rate sets must be non-empty")
    if eps_w.max() >= 1.0:
        raise ValueError("working points must lie below the critical point")

    tasks = []
    for rates in rate_sets:
        for k in ks:
            run_params = replace(params, k=float(k), **rates)
            tasks.append((run_params, "jc2", eps_w, n_max, dict(integrate_kwargs)))
    results = _map_cells(_pe_at_working_points, tasks, jobs)

    ideal = np.array([dark_state_pe(e) for e in eps_w])
    values = np.empty((len(rate_sets), eps_w.size, ks.size))
    for r in range(len(rate_sets)):
        for j in range(ks.size):
            pe = np.array(results[r * ks.size + j])
            values[r, :, j] = np.abs(pe - ideal) / ideal
    return ScanResult(
        axes=[("rate_set", np.arange(len(rate_sets))),
              ("eps_w", eps_w),
              ("k_per_us", ks)],
        values=values,
        metadata={
            "model": "jc2",
            "flag_threshold": flag_threshold,
            "rate_sets": rate_sets,
            "omega_rad_per_us": params.omega,
        },
    )


def _max_pf_cell(task):
    params, eps_target, n_max, opts = task
    traj = run_quench(
        "qutrit_detuned", params, eps_target,
        n_max=n_max, with_fidelity=False, **opts,
    )
    return float(traj.p_f.max())


def detuning_scan(
    delta_r_grid,
    delta_e_grid,
    params: SystemParams,
    eps_target: float = 0.98,
    *,
    n_max: int | None = None,
    jobs: int = 1,
    **integrate_kwargs,
) -> ScanResult:
    """Peak |f>-state leakage over the quench versus signal-field detunings.

    The argmin cell (least leakage) is reported in the metadata.
    """
    drs = np.asarray(list(delta_r_grid), dtype=float)
    des = np.asarray(list(delta_e_grid), dtype=float)
    if drs.size == 0 or des.size == 0:
        raise ValueError("detuning grids must be non-empty")
    tasks = [
        (replace(params, delta_r=float(dr), delta_e=float(de)), eps_target, n_max, dict(integrate_kwargs))
        for dr in drs
        for de in des
    ]
    flat = np.array(_map_cells(_max_pf_cell, tasks, jobs))
    values = flat.reshape(drs.size, des.size)
    imin = np.unravel_index(int(values.argmin()), values.shape)
    return ScanResult(
        axes=[("delta_r_rad_per_us", drs), ("delta_e_rad_per_us", des)],
        values=values,
        metadata={
            "model": "qutrit_detuned",
            "eps_target": eps_target,
            "argmin_delta_r": float(drs[imin[0]]),
            "argmin_delta_e": float(des[imin[1]]),
            "argmin_max_pf": float(values[imin]),
        },
    )


def _freq_cell(task):
    params, eps_target, n_max, opts = task
    traj = run_quench("jc2_detuned", params, eps_target, n_max=n_max, with_fidelity=False, **opts)
    return float(traj.p_e[-1]), float(traj.n_avg[-1])


def frequency_robustness_scan(
    delta_grid,
    params: SystemParams,
    eps_target: float = 0.98,
    *,
    n_max: int | None = None,
    jobs: int = 1,
    **integrate_kwargs,
) -> ScanResult:
    """Final P_e and photon number versus a common signal-field detuning.

    The qubit stays resonant with the resonator while the signal field is
    detuned from both, so the shift enters as delta * (a^dag a + |e><e|).
    """
    deltas = np.asarray(list(delta_grid), dtype=float)
    if deltas.size == 0:
        raise ValueError("detuning grid must be non-empty")
    tasks = [
        (replace(params, delta_r=float(d), delta_e=float(d)), eps_target, n_max, dict(integrate_kwargs))
        for d in deltas
    ]
    cells = _map_cells(_freq_cell, tasks, jobs)
    values = np.array(cells)  # columns: P_e, n_avg
    return ScanResult(
        axes=[("delta_omega_rad_per_us", deltas), ("observable", np.arange(2))],
        values=values,
        metadata={
            "model": "jc2_detuned",
            "eps_target": eps_target,
            "observables": ["P_e", "n_avg"],
        },
    )


def _fisher_from_pe(pe: np.ndarray, dpe: np.ndarray) -> np.ndarray:
    return dpe * dpe * (1.0 / pe + 1.0 / (1.0 - pe))


@dataclass
class ErrorBudget:
    """Fisher-information error decomposition on the interior of an eps grid.

    dev_nonadiabatic = |F_hamiltonian - F_ideal| / F_ideal,
    dev_decoherence  = |F_master - F_hamiltonian| / F_ideal.
    """

    epsilons: np.ndarray
    f_ideal: np.ndarray
    f_hamiltonian: np.ndarray
    f_master: np.ndarray
    dev_nonadiabatic: np.ndarray
    dev_decoherence: np.ndarray
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for key in sorted(self.metadata):
                fh.write(f"# {key} = {self.metadata[key]}\n")
            fh.write("eps,F_ideal,F_hamiltonian,F_master,dev_nonadiabatic,dev_decoherence\n")
            for i in range(len(self.epsilons)):
                row = (
                    self.epsilons[i], self.f_ideal[i], self.f_hamiltonian[i],
                    self.f_master[i], self.dev_nonadiabatic[i], self.dev_decoherence[i],
                )
                fh.write(",".join(f"{v:.12e}" for v in row) + "\n")


def error_budget(
    eps_grid,
    params: SystemParams,
    *,
    n_max: int | None = None,
    derivative: str = "fd",
    **integrate_kwargs,
) -> ErrorBudget:
    """Fisher information from simulated P_e, attributed to non-adiabaticity
    (Hamiltonian-only run vs ideal) and decoherence (master equation vs
    Hamiltonian-only).

    derivative: "fd" uses central differences across neighboring grid points
    (budget reported on interior points); "fit" differentiates the fitted
    single-parameter P_e(eps) model instead.
    """
    eps = np.asarray(sorted(eps_grid), dtype=float)
    if eps.size < 3:
        raise ValueError("eps grid too coarse for finite differences (need >= 3 points)")
    if derivative not in ("fd", "fit"):
        raise ValueError(f"derivative must be 'fd' or 'fit', got {derivative!r}")
    if eps.max() >= 1.0:
        raise ValueError("eps grid must lie below the critical point")

    pe_by_mode = {}
    for mode, dissipative in (("hamiltonian", False), ("master", True)):
        run_params = params if dissipative else replace(
            params, kappa_q=0.0, kappa_r=0.0, gamma_q=0.0
        )
        task = (run_params, "jc2", eps, n_max, dict(integrate_kwargs))
        pe_by_mode[mode] = np.array(_pe_at_working_points(task))

    interior = slice(1, -1)
    fishers = {}
    for mode, pe in pe_by_mode.items():
        if derivative == "fd":
            dpe = (pe[2:] - pe[:-2]) / (eps[2:] - eps[:-2])
        else:
            fit = analytics.fit_pe_curve(list(zip(eps, pe)))
            dpe = np.array([fit.scale * analytics.dark_state_pe_derivative(e) for e in eps[interior]])
        fishers[mode] = _fisher_from_pe(pe[interior], dpe)

    eps_mid = eps[interior]
    f_ideal = np.array([fisher_classical(e) for e in eps_mid])
    f_h = fishers["hamiltonian"]
    f_me = fishers["master"]
    return ErrorBudget(
        epsilons=eps_mid,
        f_ideal=f_ideal,
        f_hamiltonian=f_h,
        f_master=f_me,
        dev_nonadiabatic=np.abs(f_h - f_ideal) / f_ideal,
        dev_decoherence=np.abs(f_me - f_h) / f_ideal,
        metadata={"derivative": derivative, "k_per_us": params.k},
    )


@dataclass(frozen=True)
class RabiMethodResult:
    """Bias-point deviations of the conventional Rabi measurement."""

    delta_pe: float         # exact cosine evaluation at the amplitude offset
    delta_pe_linear: float  # first-order form, (-1)^((n-1)/2) delta_eps t_n / 2
    timing_delta_pe: float  # population error from a timing offset delta_t


def rabi_method_sim(eps0: float, n: int, delta_eps: float = 0.0, delta_t: float = 0.0) -> RabiMethodResult:
    """Rabi interferometry at the bias point eps0 * t_n = n pi / 2 (odd n).

    Returns the exact and linearized population deviations for an amplitude
    offset delta_eps, and the linear timing-error response for delta_t.
    """
    if n < 1 or n % 2 == 0:
        raise ValueError(f"bias index n must be a positive odd integer, got {n}")
    if eps0 <= 0:
        raise ValueError(f"drive amplitude must be positive, got {eps0}")
    t_n = n * math.pi / (2.0 * eps0)
    parity = -1.0 if (n - 1) // 2 % 2 else 1.0
    return RabiMethodResult(
        delta_pe=-0.5 * math.cos((eps0 + delta_eps) * t_n),
        delta_pe_linear=0.5 * parity * delta_eps * t_n,
        timing_delta_pe=0.5 * parity * eps0 * delta_t,
    )


def _timing_cell(task):
    params, eps_target, n_max, opts = task
    traj = run_quench("jc2", params, eps_target, n_max=n_max, with_fidelity=False, **opts)
    return float(traj.p_e[-1])


def ramping_time_robustness(
    eps_target: float,
    t_grid,
    params: SystemParams,
    *,
    n_max: int | None = None,
    jobs: int = 1,
    **integrate_kwargs,
) -> ScanResult:
    """Final P_e versus total ramp time T, with k rescaled so eps(T) = eps_target.

    Values hold P_e and its ratio to the baseline run at the params' own k
    (whose duration T_I and population are reported in the metadata).
    """
    ts = np.asarray(list(t_grid), dtype=float)
    if ts.size == 0 or np.any(ts <= 0):
        raise ValueError("ramp-time grid must be non-empty and positive")
    root_a = math.sqrt(1.0 - eps_target * eps_target)

    t_baseline = ramp_time(eps_target, params.k)
    baseline_pe = _timing_cell((params, eps_target, n_max, dict(integrate_kwargs)))

    tasks = [
        (replace(params, k=eps_target / (float(t) * root_a)), eps_target, n_max, dict(integrate_kwargs))
        for t in ts
    ]
    pe = np.array(_map_cells(_timing_cell, tasks, jobs))
    values = np.column_stack([pe, pe / baseline_pe])
    return ScanResult(
        axes=[("T_us", ts), ("observable", np.arange(2))],
        values=values,
        metadata={
            "model": "jc2",
            "eps_target": eps_target,
            "baseline_T_us": t_baseline,
            "baseline_P_e": baseline_pe,
            "observables": ["P_e", "ratio_to_baseline"],
        },
    )
