"""Dense complex linear algebra and composite-Hilbert-space primitives.

States and operators are plain complex numpy arrays; the helpers here
construct and validate them, combine subsystem operators into operators on
the composite space, and provide the scalar functionals (purity, means,
dispersions) the rest of the package is built on.  hbar = 1 throughout.
Everything is a pure function over immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence, Union

import numpy as np

# Default tolerances, chosen for double precision at dimensions up to ~2^10.
# Every check accepts an override.
KET_NORM_ATOL = 1e-12
DENSITY_ATOL = 1e-12
EIGENVALUE_FLOOR = -1e-10  # eigenvalues in [floor, 0) count as numerical zeros
HERMITIAN_ATOL = 1e-10

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def is_hermitian(op: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    """True when ``op`` is square and equals its conjugate transpose within ``atol``."""
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        return False
    return float(np.max(np.abs(op - op.conj().T))) <= atol


def ket(amplitudes, atol: float = KET_NORM_ATOL) -> np.ndarray:
    """Validate and return a unit-norm complex state vector."""
    psi = np.asarray(amplitudes, dtype=complex).ravel()
    if psi.size == 0:
        raise ValueError("ket must have at least one amplitude")
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > atol:
        raise ValueError(f"ket norm is {norm}, expected 1 within {atol}")
    return psi


def normalized(amplitudes) -> np.ndarray:
    """Scale an amplitude vector to unit norm."""
    psi = np.asarray(amplitudes, dtype=complex).ravel()
    norm = float(np.linalg.norm(psi))
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return psi / norm


def pure_density(psi) -> np.ndarray:
    """Projector |psi><psi| onto a normalized state vector."""
    psi = ket(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed(dim: int) -> np.ndarray:
    """Identity / dim, the state of complete ignorance."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    return np.eye(dim, dtype=complex) / dim


def density_matrix(
    matrix,
    atol: float = DENSITY_ATOL,
    eigenvalue_floor: float = EIGENVALUE_FLOOR,
) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, positive semidefinite.

    Eigenvalues in [``eigenvalue_floor``, 0) are tolerated as numerical zeros;
    anything more negative is an error.
    """
    rho = np.asarray(matrix, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if float(np.max(np.abs(rho - rho.conj().T))) > atol:
        raise ValueError("density matrix is not Hermitian")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > atol:
        raise ValueError(f"density matrix trace is {tr}, expected 1")
    lowest = float(np.linalg.eigvalsh(rho)[0])
    if lowest < eigenvalue_floor:
        raise ValueError(
            f"density matrix has eigenvalue {lowest}, below {eigenvalue_floor}"
        )
    return rho


@dataclass(frozen=True)
class SpaceLayout:
    """Factorization of a composite Hilbert space into subsystem slots.

    ``dims`` lists the factor dimensions in tensor order; ``system_slots``
    marks the factors that make up the open system, the remainder being the
    environment.
    """

    dims: tuple[int, ...]
    system_slots: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        slots = tuple(sorted(int(s) for s in self.system_slots))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "system_slots", slots)
        if not dims or any(d < 1 for d in dims):
            raise ValueError("factor dimensions must be positive")
        if len(set(slots)) != len(slots) or any(s < 0 or s >= len(dims) for s in slots):
            raise ValueError("system_slots must be distinct valid factor indices")
        if not slots or len(slots) == len(dims):
            raise ValueError("system_slots must be a non-empty strict subset of the factors")

    @classmethod
    def bipartite(cls, system_dim: int, environment_dim: int) -> "SpaceLayout":
        """System-first two-factor layout."""
        return cls((system_dim, environment_dim), (0,))

    @property
    def environment_slots(self) -> tuple[int, ...]:
        return tuple(k for k in range(len(self.dims)) if k not in self.system_slots)

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    @property
    def system_dim(self) -> int:
        return prod(self.dims[k] for k in self.system_slots)

    @property
    def environment_dim(self) -> int:
        return prod(self.dims[k] for k in self.environment_slots)


def kron(a, b) -> np.ndarray:
    """Kronecker product, first factor major."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def _layout_dims(layout: Union[SpaceLayout, Sequence[int]]) -> tuple[int, ...]:
    if isinstance(layout, SpaceLayout):
        return layout.dims
    return tuple(int(d) for d in layout)


def embed(op, slot: int, layout: Union[SpaceLayout, Sequence[int]]) -> np.ndarray:
    """Extend a single-factor operator by identities on every other factor."""
    dims = _layout_dims(layout)
    if not 0 <= slot < len(dims):
        raise ValueError(f"slot {slot} out of range for {len(dims)} factors")
    op = np.asarray(op, dtype=complex)
    if op.shape != (dims[slot], dims[slot]):
        raise ValueError(
            f"operator shape {op.shape} does not match factor dimension {dims[slot]}"
        )
    out = np.array([[1.0 + 0.0j]])
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == slot else np.eye(d, dtype=complex))
    return out


def partial_trace(rho, layout: SpaceLayout, keep: str = "system") -> np.ndarray:
    """Trace out every factor not on the kept side of the layout.

    ``keep`` is ``"system"`` or ``"environment"``.  The reduced matrix is
    ordered by ascending slot index of the kept factors.  The trace is
    preserved exactly up to roundoff.
    """
    rho = np.asarray(rho, dtype=complex)
    dims = layout.dims
    total = layout.total_dim
    if rho.shape != (total, total):
        raise ValueError(f"state shape {rho.shape} does not match layout dimension {total}")
    if keep == "system":
        drop = layout.environment_slots
    elif keep == "environment":
        drop = layout.system_slots
    else:
        raise ValueError("keep must be 'system' or 'environment'")
    reduced = rho.reshape(dims + dims)
    remaining = len(dims)
    # Dropping the highest slot first keeps the remaining axis numbering stable.
    for slot in sorted(drop, reverse=True):
        reduced = np.trace(reduced, axis1=slot, axis2=slot + remaining)
        remaining -= 1
    kept_dim = prod(dims[k] for k in range(len(dims)) if k not in drop)
    return reduced.reshape(kept_dim, kept_dim)


def propagator(h, t: float, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """exp(-i h t) through the eigendecomposition of a Hermitian generator.

    The eigendecomposition keeps the result unitary to roundoff at any t,
    which a truncated series or Pade approximation would not.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, atol):
        raise ValueError("propagator generator must be Hermitian")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def purity(rho) -> float:
    """tr(rho^2): 1 for pure states, 1/d for the maximally mixed state."""
    rho = np.asarray(rho)
    return float(np.einsum("ij,ji->", rho, rho).real)


def mean_dispersion(op, state) -> tuple[float, float]:
    """Mean and dispersion squared of a Hermitian observable.

    ``state`` may be a ket or a density matrix.  The dispersion is clamped at
    zero against roundoff; it vanishes exactly when the state is an
    eigenvector of ``op``.
    """
    op = np.asarray(op, dtype=complex)
    state = np.asarray(state, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError("observable must be a square matrix")
    if state.ndim == 1:
        if op.shape[0] != state.size:
            raise ValueError(
                f"dimension mismatch: observable {op.shape} vs ket of size {state.size}"
            )
        applied = op @ state
        mean = float(np.vdot(state, applied).real)
        second = float(np.vdot(applied, applied).real)  # <op^2> for Hermitian op
    elif state.ndim == 2:
        if op.shape != state.shape:
            raise ValueError(
                f"dimension mismatch: observable {op.shape} vs state {state.shape}"
            )
        mean = float(np.einsum("ij,ji->", op, state).real)
        second = float(np.einsum("ij,jk,ki->", op, op, state).real)
    else:
        raise ValueError("state must be a vector or a square matrix")
    return mean, max(second - mean * mean, 0.0)
