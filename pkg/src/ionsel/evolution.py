"""Propagators, pulse-duration solvers and Rabi-scan utilities.

Constant Hamiltonians are exponentiated by eigendecomposition (exactly
unitary up to floating point); time-dependent models go through an
adaptive Runge-Kutta integration of the Schroedinger equation whose
accuracy contract is: halving the tolerance must not move final
populations by more than the tolerance, and the raw norm drift stays
below max(1e-7, 10 * tol).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from .core import MixedState, Operator, PureState, State, basis_state
from .errors import DimensionMismatch, StepFailure
from .hamiltonians import (
    RamanParams,
    Selector,
    omega_eff,
    selective_hamiltonian,
    two_level_mode_space,
)

__all__ = [
    "PulseSpec",
    "Trace",
    "PiTimes",
    "propagator",
    "propagate_const",
    "propagate_timedep",
    "pi_time",
    "rabi_scan",
]

_HERM_TOL = 1e-12


@dataclass(frozen=True)
class PulseSpec:
    """A Hamiltonian (constant or builder) applied for a fixed duration."""

    hamiltonian: Union[Operator, Callable[[float], np.ndarray]]
    duration: float

    def __post_init__(self):
        if not math.isfinite(self.duration) or self.duration < 0:
            raise ValueError("duration must be finite and >= 0")


@dataclass(frozen=True)
class Trace:
    """Sampled populations of watched basis states along an evolution."""

    times: np.ndarray
    populations: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.populations, dtype=float)
        if t.ndim != 1 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if p.shape[0] != t.size:
            raise ValueError("populations must have one row per time")
        if p.size and np.any(p.sum(axis=1) > 1.0 + 1e-9):
            raise ValueError("population rows must sum to <= 1")
        t.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "populations", p)


def _check_hermitian(m: np.ndarray) -> None:
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.conj().T).max() > _HERM_TOL * scale:
        raise ValueError("Hamiltonian is not Hermitian")


def _eigh_factors(h: Operator):
    _check_hermitian(h.matrix)
    w, v = np.linalg.eigh(h.matrix)
    return w, v


def propagator(h: Operator, t: float) -> Operator:
    """Unitary exp(-i H t) via eigendecomposition."""
    w, v = _eigh_factors(h)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    return Operator(u, h.space)


def _apply_unitary(u: np.ndarray, state: State) -> State:
    if isinstance(state, PureState):
        return PureState(u @ state.amplitudes, state.space)
    return MixedState(u @ state.matrix @ u.conj().T, state.space, validate=False)


def propagate_const(h: Operator, t: float, state: State) -> State:
    """Evolve a state under a constant Hermitian Hamiltonian for time t."""
    if h.space != state.space:
        raise DimensionMismatch("Hamiltonian and state live on different spaces")
    w, v = _eigh_factors(h)
    phases = np.exp(-1j * w * t)
    if isinstance(state, PureState):
        return PureState(v @ (phases * (v.conj().T @ state.amplitudes)), state.space)
    u = (v * phases) @ v.conj().T
    return MixedState(u @ state.matrix @ u.conj().T, state.space, validate=False)


def _builder_matrix(builder, t: float) -> np.ndarray:
    h = builder(t)
    return h.matrix if isinstance(h, Operator) else np.asarray(h)


def propagate_timedep(
    builder: Callable[[float], Union[Operator, np.ndarray]],
    t0: float,
    t1: float,
    state: State,
    tol: float = 1e-9,
    return_info: bool = False,
):
    """Adaptive integration of the Schroedinger equation under builder(t).

    The builder must return a Hermitian matrix (or Operator) at every t;
    this is spot-checked at the endpoints.  Mixed states are propagated by
    integrating the unitary itself.  Raises StepFailure when the
    integrator gives up or the norm-drift contract is violated.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    h0 = _builder_matrix(builder, t0)
    _check_hermitian(h0)
    _check_hermitian(_builder_matrix(builder, t1))
    dim = state.space.dim
    if h0.shape != (dim, dim):
        raise DimensionMismatch("builder dimension does not match the state")

    pure = isinstance(state, PureState)
    if pure:
        y0 = state.amplitudes.astype(complex)

        def rhs(t, y):
            return -1j * (_builder_matrix(builder, t) @ y)

    else:
        y0 = np.eye(dim, dtype=complex).reshape(-1)

        def rhs(t, y):
            u = y.reshape(dim, dim)
            return (-1j * (_builder_matrix(builder, t) @ u)).reshape(-1)

    sol = solve_ivp(
        rhs,
        (t0, t1),
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-3,
        dense_output=False,
    )
    if not sol.success:
        raise StepFailure(f"integrator failed: {sol.message}")
    y = sol.y[:, -1]
    drift_limit = max(1e-7, 10.0 * tol)
    if pure:
        drift = abs(float(np.linalg.norm(y)) - 1.0)
        out: State = PureState(y, state.space)
    else:
        u = y.reshape(dim, dim)
        drift = float(np.abs(u.conj().T @ u - np.eye(dim)).max())
        out = MixedState(u @ state.matrix @ u.conj().T, state.space, validate=False)
    if drift > drift_limit:
        raise StepFailure(f"norm drift {drift:.3e} exceeds contract {drift_limit:.3e}")
    if return_info:
        return out, {"norm_drift": drift, "nfev": int(sol.nfev)}
    return out


@dataclass(frozen=True)
class PiTimes:
    """Pulse durations for complete transfer in the selected doublet.

    `derived` is the first full-transfer time pi / (2 kappa) of the
    doublet coupling kappa = |omega_eff| * coupling_scale; `paper_convention`
    is the value quoted as "omega_eff t sqrt(N0+1) = pi", exactly twice
    `derived`.  `refined`, when requested, locates the first transfer
    maximum of the full compensated Hamiltonian numerically.
    """

    derived: float
    paper_convention: float
    refined: Optional[float] = None


def _golden_max(f: Callable[[float], float], lo: float, hi: float, xtol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > xtol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def pi_time(
    p: RamanParams,
    sel: Selector,
    refine: bool = False,
    cutoff: Optional[int] = None,
) -> PiTimes:
    """Transfer times of the selected doublet; see PiTimes for the two conventions."""
    kappa = abs(omega_eff(p)) * sel.coupling_scale()
    if kappa <= 0:
        raise ValueError("selector has zero coupling (JC with n0 = 0?)")
    derived = math.pi / (2.0 * kappa)
    refined = None
    if refine:
        cut = cutoff if cutoff is not None else sel.n0 + 3
        sp = two_level_mode_space(cut)
        h = selective_hamiltonian(p, sel, sp)
        w, v = _eigh_factors(h)
        psi0 = basis_state(sp, "g", sel.n0).amplitudes
        n_target = sel.n0 + 1 if sel.kind == "AJC" else sel.n0 - 1
        target = sp.index("e", n_target)
        coeff = v.conj().T @ psi0
        row = v[target, :] * coeff

        def transfer(t: float) -> float:
            return abs(np.sum(row * np.exp(-1j * w * t))) ** 2

        def transfer_slope(t: float) -> float:
            phases = np.exp(-1j * w * t)
            z = np.sum(row * phases)
            zdot = np.sum(row * (-1j * w) * phases)
            return 2.0 * float(np.real(np.conj(z) * zdot))

        # Bracket the first maximum with a scan, narrow by golden section,
        # then polish the stationary point by bisecting the slope (the
        # quadratically flat top otherwise limits accuracy to sqrt(eps)).
        ts = np.linspace(0.0, 1.25 * derived, 1001)
        vals = np.array([transfer(t) for t in ts])
        k = int(np.argmax(vals))
        lo = ts[max(k - 1, 0)]
        hi = ts[min(k + 1, len(ts) - 1)]
        mid = _golden_max(transfer, lo, hi, xtol=max(1e-9 * derived, 1e-12))
        half = 0.25 * (hi - lo)
        a, b = mid - half, mid + half
        if transfer_slope(a) > 0 > transfer_slope(b):
            for _ in range(200):
                m = 0.5 * (a + b)
                if b - a < 1e-12:
                    break
                if transfer_slope(m) > 0:
                    a = m
                else:
                    b = m
            refined = 0.5 * (a + b)
        else:
            refined = mid
    return PiTimes(derived=derived, paper_convention=2.0 * derived, refined=refined)


def _population(state_vec_or_rho, watch_vec: np.ndarray, pure: bool) -> float:
    if pure:
        return float(np.abs(np.vdot(watch_vec, state_vec_or_rho)) ** 2)
    return float(np.real(np.vdot(watch_vec, state_vec_or_rho @ watch_vec)))


def rabi_scan(
    h_or_builder,
    state0: State,
    times: Sequence[float],
    watch: Sequence[PureState],
    labels: Optional[Sequence[str]] = None,
    tol: float = 1e-9,
) -> Trace:
    """Populations of the watched basis states at the requested times.

    `h_or_builder` is a constant Operator or a builder t -> Operator/matrix.
    Times must be strictly increasing; an empty watch list yields an empty
    population matrix over the same times.
    """
    times = np.asarray(list(times), dtype=float)
    for wst in watch:
        if wst.space != state0.space:
            raise DimensionMismatch("watch states must live on the state's space")
    watch_vecs = [wst.amplitudes for wst in watch]
    pure = isinstance(state0, PureState)
    pops = np.zeros((times.size, len(watch)))

    if isinstance(h_or_builder, Operator):
        w, v = _eigh_factors(h_or_builder)
        if pure:
            coeff = v.conj().T @ state0.amplitudes
            for i, t in enumerate(times):
                psi = v @ (np.exp(-1j * w * t) * coeff)
                for j, wv in enumerate(watch_vecs):
                    pops[i, j] = _population(psi, wv, True)
        else:
            rho0 = v.conj().T @ state0.matrix @ v
            for i, t in enumerate(times):
                ph = np.exp(-1j * w * t)
                rho = (v * ph) @ rho0 @ (v * ph).conj().T
                for j, wv in enumerate(watch_vecs):
                    pops[i, j] = _population(rho, wv, False)
    else:
        if not pure:
            raise NotImplementedError("time-dependent scans support pure states")
        h0 = _builder_matrix(h_or_builder, float(times[0]))
        _check_hermitian(h0)

        def rhs(t, y):
            return -1j * (_builder_matrix(h_or_builder, t) @ y)

        sol = solve_ivp(
            rhs,
            (float(times[0]), float(times[-1])),
            state0.amplitudes.astype(complex),
            t_eval=times,
            method="DOP853",
            rtol=tol,
            atol=tol * 1e-3,
        )
        if not sol.success:
            raise StepFailure(f"integrator failed: {sol.message}")
        for i in range(times.size):
            psi = sol.y[:, i]
            for j, wv in enumerate(watch_vecs):
                pops[i, j] = _population(psi, wv, True)

    return Trace(times=times, populations=pops, labels=tuple(labels or ()))
