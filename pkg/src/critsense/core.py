"""Dense complex linear algebra on truncated qubit(-qutrit) x Fock spaces.

Basis ordering is qubit-major and fixed everywhere in the package:

    index = qubit_index * (fock_cutoff + 1) + fock_index

so a composite operator is ``np.kron(qubit_op, fock_op)``. The bosonic
ladder uses a hard cutoff: a|n> = sqrt(n)|n-1> and a^dag|N_max> = 0, which
makes [a, a^dag] deviate from identity only in the (N_max, N_max) entry
(value -N_max) of each qubit sector.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import AccuracyError

QUBIT_LABELS = ("g", "e", "f")


@dataclass(frozen=True)
class HilbertSpace:
    """Composite qubit(-qutrit) tensor Fock space with a hard photon cutoff.

    qubit_levels: 2 (|g>, |e>) or 3 (|g>, |e>, |f>).
    fock_cutoff: highest retained Fock state N_max >= 1.
    """

    qubit_levels: int
    fock_cutoff: int

    def __post_init__(self):
        if self.qubit_levels not in (2, 3):
            raise ValueError(f"qubit_levels must be 2 or 3, got {self.qubit_levels}")
        if self.fock_cutoff < 1:
            raise ValueError(f"fock_cutoff must be >= 1, got {self.fock_cutoff}")

    @property
    def fock_dim(self) -> int:
        return self.fock_cutoff + 1

    @property
    def dim(self) -> int:
        return self.qubit_levels * self.fock_dim

    @property
    def labels(self):
        return QUBIT_LABELS[: self.qubit_levels]

    def index(self, qubit_level: int, fock_index: int) -> int:
        """Flat index of |qubit_level, fock_index> in the fixed ordering."""
        if not 0 <= qubit_level < self.qubit_levels:
            raise ValueError(f"qubit level {qubit_level} outside 0..{self.qubit_levels - 1}")
        if not 0 <= fock_index <= self.fock_cutoff:
            raise ValueError(f"fock index {fock_index} outside 0..{self.fock_cutoff}")
        return qubit_level * self.fock_dim + fock_index


@dataclass(frozen=True)
class OperatorSet:
    """Composite-space operators of a HilbertSpace, built once and shared.

    All arrays are dense complex and must be treated as read-only.
    """

    space: HilbertSpace
    a: np.ndarray
    a_dag: np.ndarray
    number: np.ndarray
    q: np.ndarray
    q_dag: np.ndarray
    identity: np.ndarray
    projectors: dict = field(repr=False, default_factory=dict)

    def projector(self, bra_label: str, ket_label: str | None = None) -> np.ndarray:
        """|x><y| on the qubit factor, lifted to the composite space."""
        if ket_label is None:
            ket_label = bra_label
        return self.projectors[(bra_label, ket_label)]


def fock_annihilation(fock_dim: int) -> np.ndarray:
    """Truncated annihilation operator on the bare Fock factor."""
    return np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), k=1).astype(complex)


def qubit_lowering(qubit_levels: int) -> np.ndarray:
    """Ladder lowering on the bare qubit factor: q|e>=|g>, q|f>=sqrt(2)|e>."""
    weights = np.sqrt(np.arange(1, qubit_levels, dtype=float))
    return np.diag(weights, k=1).astype(complex)


def lift_fock(space: HilbertSpace, op: np.ndarray) -> np.ndarray:
    """Embed a Fock-factor operator into the composite space."""
    if op.shape != (space.fock_dim, space.fock_dim):
        raise ValueError(f"expected {space.fock_dim}x{space.fock_dim} Fock operator, got {op.shape}")
    return np.kron(np.eye(space.qubit_levels, dtype=complex), op)


def lift_qubit(space: HilbertSpace, op: np.ndarray) -> np.ndarray:
    """Embed a qubit-factor operator into the composite space."""
    if op.shape != (space.qubit_levels, space.qubit_levels):
        raise ValueError(f"expected {space.qubit_levels}x{space.qubit_levels} qubit operator, got {op.shape}")
    return np.kron(op, np.eye(space.fock_dim, dtype=complex))


def build_operators(space: HilbertSpace) -> OperatorSet:
    """Construct the full operator set (a, a^dag, q, projectors, identity)."""
    a_f = fock_annihilation(space.fock_dim)
    q_q = qubit_lowering(space.qubit_levels)

    a = lift_fock(space, a_f)
    q = lift_qubit(space, q_q)
    labels = space.labels

    projectors = {}
    for i, li in enumerate(labels):
        for j, lj in enumerate(labels):
            op = np.zeros((space.qubit_levels, space.qubit_levels), dtype=complex)
            op[i, j] = 1.0
            projectors[(li, lj)] = lift_qubit(space, op)

    return OperatorSet(
        space=space,
        a=a,
        a_dag=a.conj().T,
        number=lift_fock(space, a_f.conj().T @ a_f),
        q=q,
        q_dag=q.conj().T,
        identity=np.eye(space.dim, dtype=complex),
        projectors=projectors,
    )


def basis_ket(space: HilbertSpace, qubit_level: int, fock_index: int) -> np.ndarray:
    """Computational basis vector |qubit_level, fock_index>."""
    ket = np.zeros(space.dim, dtype=complex)
    ket[space.index(qubit_level, fock_index)] = 1.0
    return ket


def matrix_exp(matrix: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring); requires a square matrix."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix_exp requires a square matrix, got shape {matrix.shape}")
    return expm(matrix)


def squeeze(space: HilbertSpace, r: float) -> np.ndarray:
    """Squeezing operator S(r) = exp[r (a^2 - a^dag^2) / 2] on the Fock factor.

    Exactly unitary on the truncated factor (the generator is anti-Hermitian);
    closeness to the untruncated operator is the caller's concern via
    convergence checks.
    """
    a_f = fock_annihilation(space.fock_dim)
    gen = 0.5 * r * (a_f @ a_f - a_f.conj().T @ a_f.conj().T)
    return matrix_exp(gen)


def displace(space: HilbertSpace, alpha: complex) -> np.ndarray:
    """Displacement operator D(alpha) = exp[alpha a^dag - conj(alpha) a] on the Fock factor.

    For real alpha this is exp[alpha (a^dag - a)]; the conjugate form keeps
    the operator unitary for complex arguments.
    """
    a_f = fock_annihilation(space.fock_dim)
    gen = alpha * a_f.conj().T - np.conj(alpha) * a_f
    return matrix_exp(gen)


def squeezed_vacuum_ket(fock_dim: int, r: float, norm_tol: float = 1e-6) -> np.ndarray:
    """S(r)|0> on the Fock factor via the even-photon recursion.

    c_0 = 1/sqrt(cosh r), c_{2m+2} = -tanh(r) sqrt((2m+1)(2m+2)) / (2(m+1)) c_{2m}.
    Cheaper than exponentiating the generator; raises AccuracyError when the
    truncated tail holds more than norm_tol of the norm. The returned vector
    is renormalized.
    """
    ket = np.zeros(fock_dim, dtype=complex)
    c = 1.0 / np.sqrt(np.cosh(r))
    t = np.tanh(r)
    ket[0] = c
    m = 0
    while 2 * m + 2 < fock_dim:
        c = -t * np.sqrt((2 * m + 1) * (2 * m + 2)) / (2 * (m + 1)) * c
        ket[2 * m + 2] = c
        m += 1
    norm_sq = float(np.real(np.vdot(ket, ket)))
    deficit = 1.0 - norm_sq
    if deficit > norm_tol:
        raise AccuracyError(
            f"squeezed vacuum (r={r:.4f}) loses {deficit:.3e} of its norm at "
            f"cutoff {fock_dim - 1}; increase the Fock cutoff"
        )
    return ket / np.sqrt(norm_sq)


def is_hermitian(matrix: np.ndarray, tol: float = 1e-12) -> bool:
    """Max-entry Hermiticity check |M - M^dag|_max < tol."""
    return float(np.max(np.abs(matrix - matrix.conj().T))) < tol


def check_ket(ket: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Validate a normalized ket; returns it as a complex array."""
    ket = np.asarray(ket, dtype=complex)
    if ket.ndim != 1:
        raise ValueError(f"ket must be one-dimensional, got shape {ket.shape}")
    norm = np.linalg.norm(ket)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"ket norm {norm} deviates from 1 by more than {tol}")
    return ket


def check_density(
    rho: np.ndarray,
    herm_tol: float = 1e-8,
    trace_tol: float = 1e-8,
    eig_floor: float = -1e-8,
) -> np.ndarray:
    """Validate a density matrix (Hermitian, unit trace, eigenvalues >= eig_floor)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if not is_hermitian(rho, herm_tol):
        raise ValueError("density matrix is not Hermitian within tolerance")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr} deviates from 1 by more than {trace_tol}")
    min_eig = float(np.min(np.linalg.eigvalsh(rho)))
    if min_eig < eig_floor:
        raise ValueError(f"density matrix has eigenvalue {min_eig} below {eig_floor}")
    return rho


def expectation(op: np.ndarray, state: np.ndarray) -> complex:
    """<O> for a ket (1-D) or density matrix (2-D) state."""
    op = np.asarray(op, dtype=complex)
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        if op.shape != (state.size, state.size):
            raise ValueError(f"operator shape {op.shape} does not match ket length {state.size}")
        return complex(np.vdot(state, op @ state))
    if state.ndim == 2:
        if op.shape != state.shape:
            raise ValueError(f"operator shape {op.shape} does not match density shape {state.shape}")
        return complex(np.trace(op @ state))
    raise ValueError(f"state must be a ket or a density matrix, got ndim {state.ndim}")


def fidelity_pure(ket: np.ndarray, state: np.ndarray) -> float:
    """Fidelity of `state` (ket or density matrix) to the pure state `ket`.

    F = |<psi|phi>|^2 against a ket, <psi|rho|psi> against a density matrix;
    invariant under a global phase of `ket`.
    """
    ket = np.asarray(ket, dtype=complex)
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        if state.size != ket.size:
            raise ValueError(f"ket lengths differ: {ket.size} vs {state.size}")
        return float(abs(np.vdot(ket, state)) ** 2)
    if state.ndim == 2:
        if state.shape != (ket.size, ket.size):
            raise ValueError(f"density shape {state.shape} does not match ket length {ket.size}")
        return float(np.real(np.vdot(ket, state @ ket)))
    raise ValueError(f"state must be a ket or a density matrix, got ndim {state.ndim}")
