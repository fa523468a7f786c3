"""Dense complex linear algebra on small composite Hilbert spaces.

Everything is a plain ``numpy`` array of complex doubles; subsystem
structure is carried separately by :class:`Space`.  All operators are
dimensionless and hbar = 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionError

# Default tolerance for algebraic identities (Hermiticity, unit trace, ...).
DEFAULT_ATOL = 1e-9


def dagger(a):
    """Conjugate transpose, acting on the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def identity(n):
    return np.eye(n, dtype=complex)


def destroy(n):
    """Bosonic annihilation operator truncated to the lowest ``n`` levels.

    Entries (m, m+1) = sqrt(m+1); everything else zero.
    """
    if n < 2:
        raise DimensionError(f"annihilation operator needs dimension >= 2, got {n}")
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)


def create(n):
    return dagger(destroy(n))


def number(n):
    if n < 2:
        raise DimensionError(f"number operator needs dimension >= 2, got {n}")
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def sigma_x():
    return np.array([[0, 1], [1, 0]], dtype=complex)


def sigma_y():
    return np.array([[0, -1j], [1j, 0]], dtype=complex)


def sigma_z():
    return np.array([[1, 0], [0, -1]], dtype=complex)


def sigma_minus():
    """Lowering operator |g><e| in the {|e>, |g>} = {(1,0), (0,1)} basis."""
    return np.array([[0, 0], [1, 0]], dtype=complex)


def sigma_plus():
    return np.array([[0, 1], [0, 0]], dtype=complex)


def basis(n, k):
    """Fock/basis ket |k> as a length-n complex vector."""
    if not 0 <= k < n:
        raise DimensionError(f"basis index {k} outside dimension {n}")
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return v


def coherent(n, alpha):
    """Truncated coherent state, renormalized to unit norm on the n levels."""
    if n < 2:
        raise DimensionError(f"coherent state needs dimension >= 2, got {n}")
    alpha = complex(alpha)
    if alpha == 0:
        return basis(n, 0)
    k = np.arange(n)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, n, dtype=float)))))
    amps = np.exp(k * np.log(alpha) - 0.5 * log_fact)
    return amps / np.linalg.norm(amps)


def position_momentum(n, mass, omega):
    """Position and momentum operators of a harmonic oscillator.

    x = sqrt(1/(2 m w)) (a + a'), p = i sqrt(m w / 2) (a' - a), hbar = 1.
    """
    if mass <= 0 or omega <= 0:
        raise ValueError("mass and frequency must be positive")
    a = destroy(n)
    ad = dagger(a)
    x = math.sqrt(1.0 / (2.0 * mass * omega)) * (a + ad)
    p = 1j * math.sqrt(mass * omega / 2.0) * (ad - a)
    return x, p


def normalized_position(n):
    """Position normalized by the zero-point uncertainty: (a + a')/sqrt(2)."""
    a = destroy(n)
    return (a + dagger(a)) / math.sqrt(2.0)


def kron(*ops):
    """Kronecker product; the left factor is the earlier subsystem."""
    for op in ops:
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise DimensionError(f"kron expects square matrices, got shape {op.shape}")
    return reduce(np.kron, ops)


def expectation(op, state):
    """<psi|op|psi> for a ket, or Tr(op rho) for a density matrix."""
    state = np.asarray(state)
    if state.ndim == 1:
        if op.shape[1] != state.shape[0]:
            raise DimensionError(
                f"operator dimension {op.shape[1]} incompatible with state length {state.shape[0]}"
            )
        return complex(np.vdot(state, op @ state))
    if op.shape[1] != state.shape[-2]:
        raise DimensionError(
            f"operator dimension {op.shape[1]} incompatible with matrix dimension {state.shape[-2]}"
        )
    return complex(np.einsum("ij,ji->", op, state))


def partial_trace(rho_joint, dims, keep):
    """Reduced operator of subsystem ``keep`` of a joint-space operator."""
    dims = tuple(int(d) for d in dims)
    total = math.prod(dims)
    if rho_joint.shape != (total, total):
        raise DimensionError(
            f"joint operator shape {rho_joint.shape} does not match dims {dims}"
        )
    n = len(dims)
    if not 0 <= keep < n:
        raise DimensionError(f"subsystem index {keep} outside 0..{n - 1}")
    ket = [chr(ord("a") + i) for i in range(n)]
    bra = list(ket)
    bra[keep] = chr(ord("a") + n)
    spec = "".join(ket) + "".join(bra) + "->" + ket[keep] + bra[keep]
    return np.einsum(spec, rho_joint.reshape(dims + dims))


def is_hermitian(a, atol=DEFAULT_ATOL):
    return bool(np.max(np.abs(a - dagger(a))) <= atol)


def hermiticity_defect(a):
    return float(np.max(np.abs(a - dagger(a))))


def check_density_matrix(rho, atol=DEFAULT_ATOL):
    """Raise if ``rho`` is not Hermitian / unit-trace / finite within ``atol``."""
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix contains non-finite entries")
    if hermiticity_defect(rho) > atol:
        raise ValueError(f"density matrix not Hermitian within {atol}")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > atol:
        raise ValueError(f"density matrix trace {tr} deviates from 1 beyond {atol}")


@dataclass(frozen=True)
class Space:
    """Ordered subsystem dimensions of a composite space (plant first)."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DimensionError("a composite space needs at least one subsystem")
        if any(d < 1 for d in dims):
            raise DimensionError(f"subsystem dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self):
        return math.prod(self.dims)

    def identity(self):
        return identity(self.total)

    def embed(self, op, which):
        """Lift a single-subsystem operator to the full space."""
        if not 0 <= which < len(self.dims):
            raise DimensionError(f"subsystem index {which} outside 0..{len(self.dims) - 1}")
        d = self.dims[which]
        if op.shape != (d, d):
            raise DimensionError(
                f"operator shape {op.shape} does not fit subsystem dimension {d}"
            )
        factors = [identity(d_k) if k != which else op for k, d_k in enumerate(self.dims)]
        return kron(*factors)


def top_level_population(state, dims, subsystem):
    """Population of the highest level of one subsystem (truncation leakage)."""
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    if not 0 <= subsystem < n:
        raise DimensionError(f"subsystem index {subsystem} outside 0..{n - 1}")
    state = np.asarray(state)
    if state.ndim == 1:
        probs = np.abs(state.reshape(dims)) ** 2
        return float(probs.take(dims[subsystem] - 1, axis=subsystem).sum())
    diag = np.real(np.diagonal(state)).reshape(dims)
    return float(diag.take(dims[subsystem] - 1, axis=subsystem).sum())
