"""Heralded protocols built on the selective doublet drive.

Every protocol runs in one of two execution modes:

* ``ideal``      -- the addressed doublet rotation is applied exactly and
                    nothing else moves; isolates the protocol logic.
* ``effective``  -- the full compensated Hamiltonian is integrated on the
                    whole truncated space, so off-resonant doublets leak
                    according to their residual detunings; quantifies the
                    infidelity a finite selectivity buys.

Protocols are pure functions of (state, params, seed): identical inputs
give identical results, and grid points of the Wigner scan are
independent, so concurrent evaluation over shared immutable inputs is
safe.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    InternalSpace,
    MixedState,
    ModeSpace,
    Operator,
    PureState,
    SpaceDescriptor,
    State,
    basis_state,
    displacement,
    fock_populations,
    mode_marginal,
    space,
    tensor,
)
from .errors import DimensionMismatch, ZeroProbability
from .evolution import pi_time, propagate_const
from .hamiltonians import (
    AJC,
    JC,
    RamanParams,
    Selector,
    omega_eff,
    residual_detuning,
    selective_hamiltonian,
    two_ion_mode_space,
    two_level_mode_space,
)
from .core import measure_internal

__all__ = [
    "ProtocolResult",
    "WignerGrid",
    "MeasurementRecord",
    "PopulationEstimate",
    "generate_fock",
    "selective_cool",
    "measure_population",
    "refine_population",
    "wigner",
    "cpg",
    "cpg_process_fidelity",
]


@dataclass(frozen=True)
class ProtocolResult:
    """Heralded outcome: success probability, conditional motional state, pulse time."""

    herald_probability: float
    post_state: State
    duration: float
    herald_level: str

    def __post_init__(self):
        if not 0.0 <= self.herald_probability <= 1.0 + 1e-12:
            raise ValueError(f"herald probability {self.herald_probability} outside [0, 1]")


@dataclass(frozen=True)
class MeasurementRecord:
    """Finite-shot record; reproducible from (shots, seed)."""

    shots: int
    excited_counts: int
    seed: int

    def __post_init__(self):
        if self.shots < 1 or not 0 <= self.excited_counts <= self.shots:
            raise ValueError("need 1 <= shots and 0 <= excited_counts <= shots")


@dataclass(frozen=True)
class PopulationEstimate:
    """Estimate of one Fock population, exact or from sampled shots."""

    n0: int
    estimate: float
    exact: float
    record: Optional[MeasurementRecord] = None


@dataclass(frozen=True)
class WignerGrid:
    """Phase-space quasi-probability samples.

    ``paper`` convention peaks at 2 (alternating sum of displaced number
    populations, times two); ``standard`` divides by pi.
    """

    alphas: np.ndarray
    values: np.ndarray
    convention: str

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=complex)
        v = np.asarray(self.values, dtype=float)
        if a.shape != v.shape:
            raise ValueError("alphas and values must have the same shape")
        bound = 2.0 if self.convention == "paper" else 2.0 / math.pi
        if v.size and np.abs(v).max() > bound * (1.0 + 1e-9) + 1e-12:
            raise ValueError("Wigner values exceed the convention bound")
        a.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "values", v)


def _mode_of(state: State) -> ModeSpace:
    if len(state.space.factors) != 1 or not isinstance(state.space.factors[0], ModeSpace):
        raise DimensionMismatch("expected a motional (mode-only) state")
    return state.space.factors[0]


def _with_ion(motional: State, level: str) -> State:
    ion = basis_state(space(InternalSpace.two_level()), level)
    return tensor([ion, motional])


def _block_rotation(sp: SpaceDescriptor, pairs, theta: float) -> Operator:
    """Unitary rotating each index pair (a, b) by theta: a -> cos a + sin b."""
    u = np.eye(sp.dim, dtype=complex)
    c, s = math.cos(theta), math.sin(theta)
    for ia, ib in pairs:
        u[ia, ia] = c
        u[ib, ib] = c
        u[ib, ia] = s
        u[ia, ib] = -s
    return Operator(u, sp)


def _apply(u: Operator, state: State) -> State:
    if isinstance(state, PureState):
        return PureState(u.matrix @ state.amplitudes, state.space)
    return MixedState(u.matrix @ state.matrix @ u.matrix.conj().T, state.space, validate=False)


def _extract_motional(post: State, level: str) -> State:
    """Motional factor of a state whose internal factor is exactly |level>."""
    sp = post.space
    if isinstance(post, PureState):
        d_mode = sp.factors[-1].dim
        psi = post.amplitudes.reshape(-1, d_mode)
        row = sp.factors[0].index(level)
        return PureState(psi[row], space(sp.factors[-1]))
    return mode_marginal(post)


def _selective_pulse(motional_space: ModeSpace, p: RamanParams, sel: Selector, mode: str):
    """(apply_fn, duration) realizing the selected doublet pi-pulse."""
    sp = two_level_mode_space(motional_space.cutoff)
    sel.check_cutoff(motional_space)
    duration = pi_time(p, sel).derived
    if mode == "ideal":
        n_hi = sel.n0 + 1 if sel.kind == AJC else sel.n0 - 1
        pairs = [(sp.index("g", sel.n0), sp.index("e", n_hi))]
        u = _block_rotation(sp, pairs, math.pi / 2.0)
        return (lambda st: _apply(u, st)), duration
    if mode == "effective":
        h = selective_hamiltonian(p, sel, sp)
        return (lambda st: propagate_const(h, duration, st)), duration
    raise ValueError(f"mode must be 'ideal' or 'effective', got {mode!r}")


def generate_fock(
    motional: State,
    n0: int,
    p: RamanParams,
    mode: str = "ideal",
) -> ProtocolResult:
    """Herald the Fock state |n0+1> out of any motional state with weight on |n0>.

    The ion starts in |g>; a pi-pulse on the doublet {|g,n0>, |e,n0+1>}
    moves exactly that component up, and finding the ion excited projects
    the motion onto |n0+1>.  The herald probability is the initial
    population P_n0 (exactly so in ideal mode).
    """
    mode_sp = _mode_of(motional)
    if n0 + 1 > mode_sp.cutoff:
        raise ValueError(f"n0 = {n0} needs cutoff >= {n0 + 1}")
    pulse, duration = _selective_pulse(mode_sp, p, Selector(AJC, n0), mode)
    full = pulse(_with_ion(motional, "g"))
    prob, post = measure_internal(full, "e")
    return ProtocolResult(
        herald_probability=prob,
        post_state=_extract_motional(post, "e"),
        duration=duration,
        herald_level="e",
    )


def selective_cool(motional: State, p: RamanParams, mode: str = "ideal") -> ProtocolResult:
    """Single-shot heralded cooling to the motional ground state.

    The ion starts excited; the pi-pulse on {|g,0>, |e,1>} maps the
    |e,1> component down to |g,0>, so finding the ion in |g> heralds the
    vacuum with probability equal to the initial P_1.
    """
    mode_sp = _mode_of(motional)
    pulse, duration = _selective_pulse(mode_sp, p, Selector(AJC, 0), mode)
    full = pulse(_with_ion(motional, "e"))
    prob, post = measure_internal(full, "g")
    return ProtocolResult(
        herald_probability=prob,
        post_state=_extract_motional(post, "g"),
        duration=duration,
        herald_level="g",
    )


def measure_population(
    motional: State,
    n0: int,
    p: RamanParams,
    shots: Optional[int] = None,
    seed: int = 0,
    mode: str = "ideal",
) -> PopulationEstimate:
    """Estimate P_n0 from the herald rate of the Fock-generation pulse.

    With shots=None the exact herald probability is returned; otherwise a
    Bernoulli frequency over `shots` samples drawn with the stored seed
    (an unbiased estimator).
    """
    try:
        exact = generate_fock(motional, n0, p, mode=mode).herald_probability
    except ZeroProbability:
        exact = 0.0
    if shots is None:
        return PopulationEstimate(n0=n0, estimate=exact, exact=exact)
    rng = np.random.default_rng(seed)
    counts = int(rng.binomial(shots, exact))
    return PopulationEstimate(
        n0=n0,
        estimate=counts / shots,
        exact=exact,
        record=MeasurementRecord(shots=shots, excited_counts=counts, seed=seed),
    )


def _doublet_transfer(p: RamanParams, n: int, tuned_n0: int, t: float) -> float:
    """Transfer probability of doublet {|g,n>, |e,n+1>} under tuning n0 at time t."""
    kappa = abs(omega_eff(p)) * math.sqrt(n + 1)
    delta = residual_detuning(p, n, tuned_n0)
    gen = math.sqrt(4.0 * kappa ** 2 + delta ** 2)
    if gen == 0.0:
        return 0.0
    return (4.0 * kappa ** 2 / gen ** 2) * math.sin(0.5 * gen * t) ** 2


def refine_population(
    motional: State,
    n0: int,
    p: RamanParams,
    rounds: int,
    mode: str = "effective",
) -> list:
    """Iteratively sharpened estimates of P_n0; element k uses k extra pulses.

    The base pulse overestimates P_n0 because detuned doublets leak a
    little population into the herald.  Each refinement round re-tunes the
    resonance one doublet up, pulses the so-far unheralded branch, and
    measures how much population actually sits there; that measurement,
    rescaled by the computed partial-flop transfer factors, is subtracted
    from the running estimate.  Under ideal dynamics every round leaves
    the (already exact) estimate unchanged.
    """
    mode_sp = _mode_of(motional)
    if n0 + rounds + 1 > mode_sp.cutoff:
        raise ValueError(f"n0 + rounds + 1 = {n0 + rounds + 1} exceeds cutoff {mode_sp.cutoff}")
    ideal = mode == "ideal"

    def leak(n: int, tuned: int, t: float) -> float:
        if ideal:
            return 1.0 if n == tuned else 0.0
        return _doublet_transfer(p, n, tuned, t)

    pulse, t0 = _selective_pulse(mode_sp, p, Selector(AJC, n0), mode)
    state = pulse(_with_ion(motional, "g"))
    pulse_times = [t0]
    try:
        prob_e, _ = measure_internal(state, "e")
    except ZeroProbability:
        prob_e = 0.0
    base = prob_e
    estimates = [base]
    branch_weight = 1.0 - prob_e
    branch: Optional[State]
    try:
        _, branch = measure_internal(state, "g")
    except ZeroProbability:
        branch = None

    running = base
    for k in range(1, rounds + 1):
        nk = n0 + k
        sel = Selector(AJC, nk)
        tk = pi_time(p, sel).derived
        joint = 0.0
        if branch is not None:
            pulse_k, _ = _selective_pulse(mode_sp, p, sel, mode)
            evolved = pulse_k(branch)
            try:
                pe_k, _ = measure_internal(evolved, "e")
            except ZeroProbability:
                pe_k = 0.0
            joint = branch_weight * pe_k
            try:
                _, branch = measure_internal(evolved, "g")
                branch_weight *= 1.0 - pe_k
            except ZeroProbability:
                branch = None
        # Undo the depletion the earlier pulses inflicted on doublet nk,
        # then subtract its modelled contribution to the base herald.
        depletion = 1.0
        for j, tj in enumerate(pulse_times):
            depletion *= 1.0 - leak(nk, n0 + j, tj)
        p_hat = joint / depletion if depletion > 1e-12 else 0.0
        running -= p_hat * leak(nk, n0, t0)
        estimates.append(running)
        pulse_times.append(tk)
    return estimates


def _resolve_threads(threads: Optional[int]) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("IONSEL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def wigner(
    motional: State,
    alphas,
    p: RamanParams,
    convention: str = "paper",
    mode: str = "oracle",
    threads: Optional[int] = None,
) -> WignerGrid:
    """Phase-space scan via displaced number populations.

    Each grid point displaces the state by D(-alpha) and evaluates the
    alternating population sum 2 sum_n (-1)^n P_n.  ``oracle`` mode reads
    the populations straight off the displaced density matrix;
    ``protocol`` mode obtains each P_n through the population-measurement
    protocol (exact shots), exercising the same machinery an experiment
    would.  ``paper`` normalization peaks at 2; ``standard`` divides by pi.
    Displacements outside the certified truncation margin raise
    TruncationError.
    """
    if convention not in ("paper", "standard"):
        raise ValueError("convention must be 'paper' or 'standard'")
    if mode not in ("oracle", "protocol"):
        raise ValueError("mode must be 'oracle' or 'protocol'")
    mode_sp = _mode_of(motional)
    alphas_arr = np.asarray(alphas, dtype=complex)
    flat = alphas_arr.reshape(-1)
    signs = (-1.0) ** np.arange(mode_sp.dim)

    def one_point(alpha: complex) -> float:
        d = displacement(mode_sp, -alpha)
        displaced = _apply(d, motional)
        if mode == "oracle":
            pops = fock_populations(displaced)
            val = 2.0 * float(np.dot(signs, pops))
        else:
            total = 0.0
            for n in range(mode_sp.cutoff):
                est = measure_population(displaced, n, p, shots=None, mode="ideal")
                total += (signs[n]) * est.estimate
            val = 2.0 * total
        return val / math.pi if convention == "standard" else val

    n_threads = _resolve_threads(threads)
    if n_threads > 1 and flat.size > 8:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            values = list(pool.map(one_point, flat))
    else:
        values = [one_point(a) for a in flat]
    return WignerGrid(
        alphas=alphas_arr,
        values=np.asarray(values, dtype=float).reshape(alphas_arr.shape),
        convention=convention,
    )


# ---------------------------------------------------------------------------
# controlled-phase gate
# ---------------------------------------------------------------------------


def _cpg_space_and_state(state: PureState, cutoff: Optional[int], motional: Optional[PureState]):
    factors = state.space.factors
    if len(factors) == 3:
        if motional is not None:
            raise ValueError("state already carries a mode factor")
        sp = state.space
        full = state
    elif len(factors) == 2 and all(isinstance(f, InternalSpace) for f in factors):
        cut = 5 if cutoff is None else cutoff
        sp = two_ion_mode_space(cut)
        if motional is None:
            motional = basis_state(space(ModeSpace(cut)), 0)
        full = tensor([state, motional])
    else:
        raise DimensionMismatch("expected a two-qubit state, optionally with a shared mode")
    mode_sp = sp.factors[2]
    if mode_sp.cutoff < 3:
        raise ValueError("controlled-phase gate needs mode cutoff >= 3 (uses Fock level |2>)")
    return sp, full


def _level_frame_pulse(h: Operator, t: float, state: PureState) -> PureState:
    """Propagate under h for time t in the interaction picture of diag(h).

    The static level shifts (light shifts plus compensation) are known
    exactly, so their deterministic phases are treated as tracked frame
    rotations; what remains is the drive-induced dynamics, including any
    off-resonant leakage.
    """
    out = propagate_const(h, t, state)
    unwind = np.exp(1j * np.real(np.diag(h.matrix)) * t)
    return PureState(unwind * out.amplitudes, out.space)


def cpg(
    state: PureState,
    p: RamanParams,
    mode: str = "ideal",
    cutoff: Optional[int] = None,
    motional: Optional[PureState] = None,
) -> PureState:
    """Controlled-phase gate between two ion qubits through the shared mode.

    Three pulses: (1) a selective pi-pulse on ion 0's doublet
    {|g,1>, |e,0>} writes that qubit onto the mode, (2) a 2 pi-pulse on
    ion 1's doublet {|e,1>, |g,2>} imprints -1 on the |e, mode=1>
    component, (3) the inverse of pulse 1 restores the mode.  Net effect
    on {|gg>, |ge>, |eg>, |ee>}: amplitudes (a, b, c, d) -> (a, b, c, -d)
    with the mode returned to its initial state; this also holds when the
    mode starts in any superposition of |0> and |1>.

    Accepts a bare two-qubit state (the mode is then prepared in |0> at
    the given cutoff) or a full two-qubit (x) mode state.  Effective-mode
    pulses are computed in the interaction picture of the static level
    shifts, so only drive-induced errors remain.  Returns the full final
    state on ion (x) ion (x) mode.
    """
    sp, full = _cpg_space_and_state(state, cutoff, motional)
    if mode == "ideal":
        map_pairs = [
            (sp.index("g", s, 1), sp.index("e", s, 0)) for s in ("g", "e")
        ]
        phase_pairs = [
            (sp.index(s, "g", 2), sp.index(s, "e", 1)) for s in ("g", "e")
        ]
        u_map = _block_rotation(sp, map_pairs, math.pi / 2.0)
        u_phase = _block_rotation(sp, phase_pairs, math.pi)
        u_back = _block_rotation(sp, map_pairs, -math.pi / 2.0)
        out = _apply(u_back, _apply(u_phase, _apply(u_map, full)))
        return out
    if mode != "effective":
        raise ValueError(f"mode must be 'ideal' or 'effective', got {mode!r}")
    from .hamiltonians import two_ion_selective  # local import keeps module load light

    sel1 = Selector(JC, 1)
    sel2 = Selector(JC, 2)
    h1 = two_ion_selective(p, 0, sel1, sp)
    h2 = two_ion_selective(p, 1, sel2, sp)
    t1 = pi_time(p, sel1).derived
    t2 = 2.0 * pi_time(p, sel2).derived
    out = _level_frame_pulse(h1, t1, full)
    out = _level_frame_pulse(h2, t2, out)
    out = _level_frame_pulse(h1, -t1, out)
    return out


def cpg_process_fidelity(p: RamanParams, mode: str = "effective", cutoff: int = 5):
    """Entanglement-style process fidelity of cpg() against the ideal gate.

    Runs the four computational basis states (mode in |0>), projects each
    output on the mode-returned sector, and evaluates
    |Tr(U_ideal^dag M)|^2 / 16 for the resulting 4x4 transfer matrix M.
    Mode leakage shows up as loss.  Returns (process_fidelity,
    mode_return_fidelity) where the second number is the worst-case
    probability of finding the mode back in |0>.
    """
    qsp = space(InternalSpace.two_level(), InternalSpace.two_level())
    labels = [("g", "g"), ("g", "e"), ("e", "g"), ("e", "e")]
    u_ideal = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
    m = np.zeros((4, 4), dtype=complex)
    mode_return = 1.0
    for j, lab_in in enumerate(labels):
        out = cpg(basis_state(qsp, *lab_in), p, mode=mode, cutoff=cutoff)
        amps = out.amplitudes.reshape(4, -1)
        mode_return = min(mode_return, float(np.linalg.norm(amps[:, 0]) ** 2))
        m[:, j] = amps[:, 0]
    fid = float(abs(np.trace(u_ideal.conj().T @ m)) ** 2 / 16.0)
    return fid, mode_return
