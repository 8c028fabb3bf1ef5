"""Dense pure-state algebra for one or two finite-dimensional subsystems.

Amplitudes are stored flat in row-major order over the subsystem list, so
for dims ``[a, b]`` the amplitude of ``|i>|j>`` sits at index ``i * b + j``.
By convention subsystem 0 is the quanton and subsystem 1 the which-way
detector.  Every object here is immutable; operations return new values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Tolerances shared by every module.
ATOL = 1e-12
EIG_ATOL = 1e-10
ZERO_PROB = 1e-14


class ZeroProbabilityOutcome(ValueError):
    """Raised when collapsing onto an outcome that cannot occur."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HilbertSpace:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not 1 <= len(dims) <= 2:
            raise ValueError(f"expected one or two subsystems, got {len(dims)}")
        if any(d < 2 for d in dims):
            raise ValueError(f"subsystem dimensions must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def check_target(self, target: int) -> None:
        if not 0 <= target < len(self.dims):
            raise ValueError(f"subsystem {target} out of range for dims {self.dims}")


@dataclass(frozen=True, eq=False)
class StateVector:
    space: HilbertSpace
    amps: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amps))
        if amps.shape != (self.space.size,):
            raise ValueError(
                f"amplitude length {amps.size} does not match dims {self.space.dims}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_amplitudes(cls, amps, dims: Sequence[int] | None = None,
                        normalize: bool = False) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).ravel()
        if dims is None:
            dims = (amps.size,)
        if normalize:
            amps = amps / np.linalg.norm(amps)
        state = cls(HilbertSpace(tuple(dims)), amps)
        state.check_normalized()
        return state

    @classmethod
    def basis(cls, index: int, dims: Sequence[int]) -> "StateVector":
        space = HilbertSpace(tuple(dims))
        amps = np.zeros(space.size, dtype=complex)
        amps[index] = 1.0
        return cls(space, amps)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def check_normalized(self) -> None:
        if abs(self.norm() - 1.0) > ATOL:
            raise ValueError(f"state is not normalized (norm={self.norm()!r})")

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem."""
        return self.amps.reshape(self.dims)

    def allclose(self, other: "StateVector", atol: float = ATOL) -> bool:
        return self.dims == other.dims and np.allclose(self.amps, other.amps, rtol=0, atol=atol)

    def __repr__(self):
        return f"StateVector(dims={self.dims}, amps={np.round(self.amps, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class SubsystemUnitary:
    target: int
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"unitary must be square, got shape {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0, atol=ATOL):
            raise ValueError("matrix is not unitary")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """Labelled orthonormal basis on one subsystem.

    ``vectors[i]`` is the i-th basis ket written in the computational basis
    of the target subsystem.  ``vectors=None`` stands for the computational
    basis itself and avoids storing a d x d identity for large screens.
    """

    target: int
    vectors: np.ndarray | None
    labels: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        labels = tuple(str(lab) for lab in self.labels)
        if self.vectors is None:
            if len(set(labels)) != len(labels) or len(labels) < 2:
                raise ValueError("basis labels must be unique, at least two")
            object.__setattr__(self, "labels", labels)
            return
        vecs = _frozen(self.vectors)
        if vecs.ndim != 2 or vecs.shape[0] != vecs.shape[1]:
            raise ValueError(f"basis needs d vectors of length d, got shape {vecs.shape}")
        if len(labels) != vecs.shape[0] or len(set(labels)) != len(labels):
            raise ValueError("basis labels must be unique, one per vector")
        gram = vecs.conj() @ vecs.T
        if not np.allclose(gram, np.eye(len(labels)), rtol=0, atol=ATOL):
            raise ValueError("basis vectors are not orthonormal")
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def computational(cls, target: int, labels, name: str = "") -> "MeasurementBasis":
        return cls(target, None, labels, name)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def is_computational(self) -> bool:
        return self.vectors is None

    def ket(self, i: int) -> np.ndarray:
        if self.vectors is None:
            v = np.zeros(self.dim, dtype=complex)
            v[i] = 1
            return v
        return self.vectors[i]

    def matrix(self) -> np.ndarray:
        """Rows are the basis kets."""
        return np.eye(self.dim, dtype=complex) if self.vectors is None else self.vectors

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"{label!r} is not a label of basis {self.name or self.labels}") from None

    def on(self, target: int) -> "MeasurementBasis":
        """Same basis, retargeted at another subsystem."""
        return MeasurementBasis(target, self.vectors, self.labels, self.name)


@dataclass(frozen=True)
class Outcome:
    basis: str
    index: int
    label: str


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if abs(np.trace(m) - 1.0) > ATOL:
            raise ValueError(f"trace is {np.trace(m)!r}, expected 1")
        if not np.allclose(m, m.conj().T, rtol=0, atol=ATOL):
            raise ValueError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(m).min() < -EIG_ATOL:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def in_basis(self, basis: MeasurementBasis) -> np.ndarray:
        """Matrix elements <b_i|rho|b_j>."""
        v = basis.matrix()
        return v.conj() @ self.matrix @ v.T


def z_basis(target: int = 1) -> MeasurementBasis:
    return MeasurementBasis(target, np.eye(2), ("up", "down"), "z")


def x_basis(target: int = 1) -> MeasurementBasis:
    s = 1 / np.sqrt(2)
    return MeasurementBasis(target, [[s, s], [s, -s]], ("plus", "minus"), "x")


def tensor(a: StateVector, b: StateVector) -> StateVector:
    a.check_normalized()
    b.check_normalized()
    return StateVector(HilbertSpace(a.dims + b.dims), np.kron(a.amps, b.amps))


def _check_subsystem_dim(state: StateVector, target: int, dim: int) -> None:
    state.space.check_target(target)
    if state.dims[target] != dim:
        raise ValueError(
            f"operator of dimension {dim} cannot act on subsystem {target} "
            f"of dimension {state.dims[target]}"
        )


def apply_unitary(state: StateVector, u: SubsystemUnitary) -> StateVector:
    _check_subsystem_dim(state, u.target, u.matrix.shape[0])
    psi = np.moveaxis(state.tensor(), u.target, 0)
    out = np.tensordot(u.matrix, psi, axes=(1, 0))
    out = np.moveaxis(out, 0, u.target)
    return StateVector(state.space, out.ravel())


def _components(state: StateVector, basis: MeasurementBasis) -> np.ndarray:
    """Unnormalized post-measurement remainders, one row per outcome.

    Row i holds ``<b_i| psi>`` with the measured axis contracted away,
    flattened over the remaining subsystems.
    """
    _check_subsystem_dim(state, basis.target, basis.dim)
    psi = np.moveaxis(state.tensor(), basis.target, 0)
    if basis.is_computational:
        return psi.reshape(basis.dim, -1)
    proj = np.tensordot(basis.vectors.conj(), psi, axes=(1, 0))
    return proj.reshape(basis.dim, -1)


def probabilities(state: StateVector, basis: MeasurementBasis) -> np.ndarray:
    comps = _components(state, basis)
    return np.einsum("ij,ij->i", comps.conj(), comps).real


def outcome_distribution(state: StateVector, basis: MeasurementBasis) -> list[tuple[str, float]]:
    return list(zip(basis.labels, probabilities(state, basis).tolist()))


def collapse(state: StateVector, basis: MeasurementBasis, outcome_index: int) -> StateVector:
    """Project onto one outcome and renormalize.

    The measured subsystem is left in the chosen basis ket, so the returned
    state lives in the same space as the input.
    """
    if not 0 <= outcome_index < basis.dim:
        raise IndexError(f"outcome {outcome_index} out of range for basis of dim {basis.dim}")
    comps = _components(state, basis)
    rest = comps[outcome_index]
    p = float(np.vdot(rest, rest).real)
    if p <= ZERO_PROB:
        raise ZeroProbabilityOutcome(
            f"outcome {basis.labels[outcome_index]!r} has probability {p:.3g}"
        )
    rest = rest / np.sqrt(p)
    rest = rest.reshape([d for i, d in enumerate(state.dims) if i != basis.target])
    out = np.multiply.outer(basis.ket(outcome_index), rest)
    out = np.moveaxis(out, 0, basis.target)
    return StateVector(state.space, out.ravel())


def sampling_cdf(probs: np.ndarray) -> np.ndarray:
    """Cumulative distribution used for inverse-CDF draws.

    Outcomes below the zero-probability threshold are removed so they can
    never be drawn, and the last reachable entry is pinned to exactly 1.
    """
    p = np.where(probs > ZERO_PROB, probs, 0.0)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    last = int(np.flatnonzero(p)[-1])
    cdf[last:] = 1.0
    return cdf


def draw_index(cdf: np.ndarray, u):
    """Map uniform draw(s) in [0, 1) to outcome indices."""
    return np.searchsorted(cdf, u, side="right")


def sample_outcome(state: StateVector, basis: MeasurementBasis,
                   rng: np.random.Generator) -> tuple[Outcome, StateVector]:
    cdf = sampling_cdf(probabilities(state, basis))
    idx = int(draw_index(cdf, rng.random()))
    outcome = Outcome(basis.name, idx, basis.labels[idx])
    return outcome, collapse(state, basis, idx)


def reduced_density(state: StateVector, subsystem: int) -> DensityMatrix:
    state.space.check_target(subsystem)
    psi = np.moveaxis(state.tensor(), subsystem, 0).reshape(state.dims[subsystem], -1)
    return DensityMatrix(psi @ psi.conj().T)


def joint_distribution(state: StateVector, first: MeasurementBasis,
                       second: MeasurementBasis) -> np.ndarray:
    """Exact P(a, b) for measuring ``first`` then ``second`` with collapse.

    Entry ``[i, j]`` is indexed by the outcome of ``first`` then ``second``
    regardless of order, so two orderings can be compared directly after a
    transpose.
    """
    p_first = probabilities(state, first)
    out = np.zeros((first.dim, second.dim))
    for i, p in enumerate(p_first):
        if p <= ZERO_PROB:
            continue
        out[i] = p * probabilities(collapse(state, first, i), second)
    return out
