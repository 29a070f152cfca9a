"""Finite-dimensional Hilbert-space engine: spaces, states, operators.

Composite spaces are ordered tuples of factors with every internal
(atomic) factor before the motional mode, and row-major indexing

    index = ((i_1 * d_2 + i_2) * ...) * d_mode + n .

Conventions used throughout the package: hbar = 1, all energies and
frequencies are angular (rad/s), times are in seconds.  Every value is
immutable after construction and every operation is pure, so everything
here is safe to use from concurrent callers without locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import gammainc

from .errors import DimensionMismatch, TruncationError, ZeroProbability

__all__ = [
    "ModeSpace",
    "InternalSpace",
    "SpaceDescriptor",
    "PureState",
    "MixedState",
    "Operator",
    "space",
    "mode_ladder",
    "atomic_transition",
    "level_projector",
    "tensor",
    "embed",
    "identity",
    "displacement",
    "thermal_state",
    "coherent_state",
    "fock_state",
    "basis_state",
    "measure_internal",
    "fock_populations",
    "mode_marginal",
    "fidelity",
]

# Norm / hermiticity tolerances used by the state constructors.
_NORM_TOL = 1e-12
_HERM_TOL = 1e-12
_EIG_FLOOR = -1e-10
_DISPLACEMENT_TAIL_TOL = 1e-6


@dataclass(frozen=True)
class ModeSpace:
    """Harmonic mode truncated at Fock index `cutoff` (dimension cutoff+1)."""

    cutoff: int

    def __post_init__(self):
        if not isinstance(self.cutoff, (int, np.integer)) or self.cutoff < 1:
            raise ValueError(f"cutoff must be an integer >= 1, got {self.cutoff!r}")

    @property
    def dim(self) -> int:
        return self.cutoff + 1


@dataclass(frozen=True)
class InternalSpace:
    """Atomic level structure; level 0 is the ground state 'g' by convention."""

    levels: tuple

    def __post_init__(self):
        if len(set(self.levels)) != len(self.levels) or not self.levels:
            raise ValueError(f"level labels must be unique and non-empty: {self.levels!r}")
        if self.levels[0] != "g":
            raise ValueError("ground level 'g' must be at index 0")

    @classmethod
    def two_level(cls) -> "InternalSpace":
        return cls(("g", "e"))

    @classmethod
    def three_level(cls) -> "InternalSpace":
        return cls(("g", "e", "c"))

    @property
    def dim(self) -> int:
        return len(self.levels)

    def index(self, label: str) -> int:
        try:
            return self.levels.index(label)
        except ValueError:
            raise ValueError(f"unknown level label {label!r}; levels are {self.levels}") from None


Factor = Union[InternalSpace, ModeSpace]


@dataclass(frozen=True)
class SpaceDescriptor:
    """Ordered tensor factors: internal factors first, mode factors last."""

    factors: tuple

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a space needs at least one factor")
        seen_mode = False
        for f in self.factors:
            if isinstance(f, ModeSpace):
                seen_mode = True
            elif isinstance(f, InternalSpace):
                if seen_mode:
                    raise ValueError("internal factors must precede the mode factor")
            else:
                raise TypeError(f"unsupported factor {f!r}")

    @property
    def dims(self) -> tuple:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def mode_positions(self) -> tuple:
        return tuple(i for i, f in enumerate(self.factors) if isinstance(f, ModeSpace))

    @property
    def internal_positions(self) -> tuple:
        return tuple(i for i, f in enumerate(self.factors) if isinstance(f, InternalSpace))

    def mode(self) -> ModeSpace:
        """The unique mode factor; raises if absent or not unique."""
        pos = self.mode_positions
        if len(pos) != 1:
            raise DimensionMismatch(f"expected exactly one mode factor, found {len(pos)}")
        return self.factors[pos[0]]

    def index(self, *labels) -> int:
        """Composite row index of the product basis state given one label per factor.

        Internal factors take their level label ('g', 'e', 'c'), the mode
        factor takes a Fock integer.
        """
        if len(labels) != len(self.factors):
            raise ValueError(f"need {len(self.factors)} labels, got {len(labels)}")
        idx = 0
        for f, lab in zip(self.factors, labels):
            if isinstance(f, InternalSpace):
                k = f.index(lab)
            else:
                k = int(lab)
                if not 0 <= k <= f.cutoff:
                    raise ValueError(f"Fock label {k} outside 0..{f.cutoff}")
            idx = idx * f.dim + k
        return idx


def space(*factors: Factor) -> SpaceDescriptor:
    """Convenience constructor for a SpaceDescriptor."""
    return SpaceDescriptor(tuple(factors))


def _as_matrix(m) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(m, dtype=complex))


@dataclass(frozen=True)
class PureState:
    """Normalized complex amplitude vector over a composite space.

    The constructor renormalizes, so the Euclidean norm is 1 to within
    1e-12 afterwards; a near-zero input vector is rejected.
    """

    amplitudes: np.ndarray
    space: SpaceDescriptor

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size != self.space.dim:
            raise DimensionMismatch(
                f"amplitude length {amp.size} != space dimension {self.space.dim}"
            )
        norm = float(np.linalg.norm(amp))
        if norm < 1e-8:
            raise ValueError("cannot normalize a (near-)zero amplitude vector")
        amp = amp / norm
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.space.dim

    def to_mixed(self) -> "MixedState":
        return MixedState(np.outer(self.amplitudes, self.amplitudes.conj()), self.space)

    def overlap(self, other: "PureState") -> complex:
        _require_same_space(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class MixedState:
    """Density matrix: Hermitian, unit trace, eigenvalues >= -1e-10.

    The constructor rescales the trace to 1 and symmetrizes floating-point
    dust, but genuine violations of hermiticity or positivity raise.
    `validate=False` skips the positivity eigencheck for matrices produced
    internally by exact algebra (it never skips shape checks).
    """

    matrix: np.ndarray
    space: SpaceDescriptor
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = _as_matrix(self.matrix)
        d = self.space.dim
        if m.shape != (d, d):
            raise DimensionMismatch(f"matrix shape {m.shape} != ({d}, {d})")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > _HERM_TOL * scale:
            raise ValueError("density matrix is not Hermitian within 1e-12")
        m = 0.5 * (m + m.conj().T)
        tr = m.trace()
        if abs(tr.imag) > _HERM_TOL * scale or tr.real <= 1e-8:
            raise ValueError(f"invalid trace {tr} for a density matrix")
        m = m / tr.real
        if self.validate:
            w = np.linalg.eigvalsh(m)
            if w.min() < _EIG_FLOOR:
                raise ValueError(f"density matrix has eigenvalue {w.min():.3e} < -1e-10")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.space.dim


State = Union[PureState, MixedState]


@dataclass(frozen=True)
class Operator:
    """Complex matrix tagged with the space it acts on."""

    matrix: np.ndarray
    space: SpaceDescriptor

    def __post_init__(self):
        m = _as_matrix(self.matrix)
        d = self.space.dim
        if m.shape != (d, d):
            raise DimensionMismatch(f"matrix shape {m.shape} != ({d}, {d})")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.space.dim

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.space)

    def is_hermitian(self, tol: float = _HERM_TOL) -> bool:
        scale = max(1.0, float(np.abs(self.matrix).max()))
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() <= tol * scale)

    def expect(self, state: State) -> complex:
        _require_same_space(self.space, state.space)
        if isinstance(state, PureState):
            return complex(np.vdot(state.amplitudes, self.matrix @ state.amplitudes))
        return complex(np.trace(self.matrix @ state.matrix))

    # Small operator algebra; enough to write Hamiltonians naturally.
    def __add__(self, other: "Operator") -> "Operator":
        _require_same_space(self.space, other.space)
        return Operator(self.matrix + other.matrix, self.space)

    def __sub__(self, other: "Operator") -> "Operator":
        _require_same_space(self.space, other.space)
        return Operator(self.matrix - other.matrix, self.space)

    def __neg__(self) -> "Operator":
        return Operator(-self.matrix, self.space)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.matrix * complex(scalar), self.space)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _require_same_space(self.space, other.space)
            return Operator(self.matrix @ other.matrix, self.space)
        if isinstance(other, PureState):
            _require_same_space(self.space, other.space)
            return PureState(self.matrix @ other.amplitudes, self.space)
        return NotImplemented


def _require_same_space(a: SpaceDescriptor, b: SpaceDescriptor) -> None:
    if a != b:
        raise DimensionMismatch(f"space mismatch: {a} vs {b}")


def identity(sp: SpaceDescriptor) -> Operator:
    return Operator(np.eye(sp.dim, dtype=complex), sp)


# ---------------------------------------------------------------------------
# constructors for elementary operators and states
# ---------------------------------------------------------------------------


def mode_ladder(mode: ModeSpace):
    """Truncated annihilation/creation pair (a, a_dag) with <n-1|a|n> = sqrt(n)."""
    d = mode.dim
    a = np.zeros((d, d), dtype=complex)
    ns = np.arange(1, d)
    a[ns - 1, ns] = np.sqrt(ns)
    sp = space(mode)
    return Operator(a, sp), Operator(a.conj().T, sp)


def number_operator(mode: ModeSpace) -> Operator:
    return Operator(np.diag(np.arange(mode.dim, dtype=float)).astype(complex), space(mode))


def atomic_transition(internal: InternalSpace, lower: str, upper: str) -> Operator:
    """|lower><upper| on the given internal space."""
    il, iu = internal.index(lower), internal.index(upper)
    if il == iu:
        raise ValueError("lower and upper must be different levels")
    m = np.zeros((internal.dim, internal.dim), dtype=complex)
    m[il, iu] = 1.0
    return Operator(m, space(internal))


def level_projector(internal: InternalSpace, level: str) -> Operator:
    k = internal.index(level)
    m = np.zeros((internal.dim, internal.dim), dtype=complex)
    m[k, k] = 1.0
    return Operator(m, space(internal))


def tensor(items: Sequence):
    """Kronecker composition in the given order; descriptors concatenate.

    Accepts all-Operator, or a mix of PureState/MixedState factors (any
    mixed factor promotes the product to a MixedState).
    """
    items = list(items)
    if not items:
        raise ValueError("tensor of nothing")
    factors = tuple(f for it in items for f in it.space.factors)
    sp = SpaceDescriptor(factors)
    if all(isinstance(it, Operator) for it in items):
        m = items[0].matrix
        for it in items[1:]:
            m = np.kron(m, it.matrix)
        return Operator(m, sp)
    if all(isinstance(it, PureState) for it in items):
        v = items[0].amplitudes
        for it in items[1:]:
            v = np.kron(v, it.amplitudes)
        return PureState(v, sp)
    if all(isinstance(it, (PureState, MixedState)) for it in items):
        mats = [it.matrix if isinstance(it, MixedState) else it.to_mixed().matrix for it in items]
        m = mats[0]
        for x in mats[1:]:
            m = np.kron(m, x)
        return MixedState(m, sp, validate=False)
    raise TypeError("cannot tensor operators together with states")


def embed(sp: SpaceDescriptor, position: int, op: Operator) -> Operator:
    """Lift a single-factor operator to the full space (identity elsewhere)."""
    if op.space.factors != (sp.factors[position],):
        raise DimensionMismatch("operator does not act on the requested factor")
    parts = []
    for i, f in enumerate(sp.factors):
        if i == position:
            parts.append(op)
        else:
            parts.append(identity(space(f)))
    return tensor(parts)


def displacement(mode: ModeSpace, alpha: complex, tail_tol: float = _DISPLACEMENT_TAIL_TOL) -> Operator:
    """Displacement exp(alpha a_dag - alpha* a) on the truncated mode.

    The exact displaced vacuum has Poisson weight on Fock levels; the
    probability it would place beyond the cutoff is the norm the
    truncation forfeits.  If that tail exceeds `tail_tol` the grid point
    is not certified and a TruncationError is raised.  Within the margin
    the returned matrix is exactly unitary (eigenphase exponential of the
    truncated anti-Hermitian generator).
    """
    lam = abs(alpha) ** 2
    # Poisson tail mass P[X > cutoff] for X ~ Poisson(|alpha|^2).
    tail = float(gammainc(mode.cutoff + 1, lam)) if lam > 0 else 0.0
    if tail > tail_tol:
        raise TruncationError(
            f"displacement |alpha|^2 = {lam:.4g} loses {tail:.3e} of the vacuum "
            f"beyond cutoff {mode.cutoff} (tolerance {tail_tol:.1e})"
        )
    a, adag = mode_ladder(mode)
    gen = alpha * adag.matrix - np.conj(alpha) * a.matrix
    herm = 1j * gen  # Hermitian, so exp(gen) = exp(-i herm) by eigendecomposition
    w, v = np.linalg.eigh(herm)
    u = (v * np.exp(-1j * w)) @ v.conj().T
    return Operator(u, space(mode))


def thermal_state(mode: ModeSpace, nbar: float) -> MixedState:
    """Thermal mode state with mean occupation nbar, renormalized after truncation."""
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    r = nbar / (1.0 + nbar) if nbar > 0 else 0.0
    p = r ** np.arange(mode.dim)
    p = p / p.sum()
    return MixedState(np.diag(p).astype(complex), space(mode), validate=False)


def coherent_state(mode: ModeSpace, beta: complex) -> PureState:
    """Coherent state with Poisson number statistics, renormalized after truncation."""
    n = np.arange(mode.dim)
    log_fact = np.cumsum(np.log(np.maximum(n, 1)))
    amp = np.exp(n * np.log(complex(beta)) - 0.5 * log_fact) if beta != 0 else np.eye(1, mode.dim)[0]
    return PureState(np.asarray(amp, dtype=complex), space(mode))


def fock_state(mode: ModeSpace, n: int) -> PureState:
    v = np.zeros(mode.dim, dtype=complex)
    v[n] = 1.0
    return PureState(v, space(mode))


def basis_state(sp: SpaceDescriptor, *labels) -> PureState:
    """Product basis state from one label per factor, e.g. basis_state(sp, 'g', 3)."""
    v = np.zeros(sp.dim, dtype=complex)
    v[sp.index(*labels)] = 1.0
    return PureState(v, sp)


# ---------------------------------------------------------------------------
# measurement and metrics
# ---------------------------------------------------------------------------


def _internal_mask(sp: SpaceDescriptor, level: str, factor: int | None) -> np.ndarray:
    """Boolean mask over composite indices where the chosen internal factor is `level`."""
    candidates = [
        i for i in sp.internal_positions if level in sp.factors[i].levels
    ]
    if factor is not None:
        if factor not in candidates:
            raise ValueError(f"factor {factor} does not carry level {level!r}")
        pos = factor
    else:
        if not candidates:
            raise ValueError(f"no internal factor carries level {level!r}")
        if len(candidates) > 1:
            raise ValueError(
                f"level {level!r} is ambiguous between factors {candidates}; pass factor="
            )
        pos = candidates[0]
    dims = sp.dims
    k = sp.factors[pos].index(level)
    idx = np.arange(sp.dim)
    stride = int(np.prod(dims[pos + 1:])) if pos + 1 < len(dims) else 1
    return (idx // stride) % dims[pos] == k


def measure_internal(state: State, level: str, factor: int | None = None):
    """Born-rule measurement of one internal level; returns (probability, post-state).

    The projector is |level><level| on the (unique, or explicitly chosen)
    internal factor, tensored with identity elsewhere.  Raises
    ZeroProbability below 1e-14, where the post-state is undefined.
    """
    mask = _internal_mask(state.space, level, factor)
    if isinstance(state, PureState):
        amp = state.amplitudes
        prob = float(np.sum(np.abs(amp[mask]) ** 2))
        if prob < 1e-14:
            raise ZeroProbability(f"outcome {level!r} has probability {prob:.3e}")
        post = np.where(mask, amp, 0.0)
        return prob, PureState(post, state.space)
    rho = state.matrix
    prob = float(np.real(np.sum(np.diag(rho)[mask])))
    if prob < 1e-14:
        raise ZeroProbability(f"outcome {level!r} has probability {prob:.3e}")
    post = np.zeros_like(rho)
    ix = np.ix_(mask, mask)
    post[ix] = rho[ix] / prob
    return prob, MixedState(post, state.space, validate=False)


def _mode_axis_reshape(state_space: SpaceDescriptor):
    """(d_internal_total, d_mode) split; requires exactly one mode factor, last."""
    mode = state_space.mode()
    if not isinstance(state_space.factors[-1], ModeSpace):
        raise DimensionMismatch("mode factor must be the last tensor factor")
    d_mode = mode.dim
    d_int = state_space.dim // d_mode
    return d_int, d_mode


def fock_populations(state: State) -> np.ndarray:
    """Motional number populations P_n, traced over all internal factors."""
    d_int, d_mode = _mode_axis_reshape(state.space)
    if isinstance(state, PureState):
        psi = state.amplitudes.reshape(d_int, d_mode)
        return np.sum(np.abs(psi) ** 2, axis=0)
    rho = state.matrix.reshape(d_int, d_mode, d_int, d_mode)
    return np.real(np.einsum("inin->n", rho))


def mode_marginal(state: State) -> MixedState:
    """Reduced density matrix of the motional mode (internal factors traced out)."""
    d_int, d_mode = _mode_axis_reshape(state.space)
    mode_sp = space(state.space.mode())
    if isinstance(state, PureState):
        psi = state.amplitudes.reshape(d_int, d_mode)
        red = psi.conj().T @ psi
        red = red.conj()  # rho_mode[n, m] = sum_i psi[i, n] psi*[i, m]
        return MixedState(red, mode_sp, validate=False)
    rho = state.matrix.reshape(d_int, d_mode, d_int, d_mode)
    return MixedState(np.einsum("injm->nm", rho), mode_sp, validate=False)


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a: State, b: State) -> float:
    """State fidelity in [0, 1]: |<a|b>|^2, <a|rho|a>, or the Uhlmann fidelity."""
    _require_same_space(a.space, b.space)
    if isinstance(a, PureState) and isinstance(b, PureState):
        f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    elif isinstance(a, PureState):
        f = float(np.real(np.vdot(a.amplitudes, b.matrix @ a.amplitudes)))
    elif isinstance(b, PureState):
        f = float(np.real(np.vdot(b.amplitudes, a.matrix @ b.amplitudes)))
    else:
        # sqrt amplifies eigenvalue noise, so the mixed-mixed branch is
        # accurate to ~1e-8 * dim; the pure branches are exact arithmetic.
        s = _sqrtm_psd(a.matrix)
        w = np.clip(np.linalg.eigvalsh(s @ b.matrix @ s), 0.0, None)
        f = float(np.sum(np.sqrt(w)) ** 2)
    return float(min(max(f, 0.0), 1.0))
