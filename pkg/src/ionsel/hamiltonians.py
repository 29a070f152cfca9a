"""Builders for the atom-motion Hamiltonians and closed-form detuning algebra.

Two pictures are provided:

* a two-level effective picture (blue-sideband exchange with
  number-dependent light shifts), including the compensated "selective"
  variant that makes exactly one doublet {|g,N0>, |e,N0+-1>} resonant, and
* the underlying three-level Raman picture with a far-detuned relay
  level, as an explicitly time-dependent interaction-frame model.

All builders return Hermitian operators; the detuning/selectivity
functions are the single source of truth for the closed-form quantities
used elsewhere (feasibility reports reuse them bitwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.constants import c as _SPEED_OF_LIGHT
from scipy.constants import hbar as _HBAR_SI

from .core import (
    InternalSpace,
    ModeSpace,
    Operator,
    SpaceDescriptor,
    atomic_transition,
    level_projector,
    mode_ladder,
    space,
    tensor,
)
from .errors import DimensionMismatch

__all__ = [
    "RamanParams",
    "Selector",
    "AJC",
    "JC",
    "two_level_mode_space",
    "three_level_mode_space",
    "two_ion_mode_space",
    "jc_hamiltonian",
    "ajc_hamiltonian",
    "effective_hamiltonian",
    "omega_eff",
    "bare_detuning",
    "residual_detuning",
    "selectivity",
    "selective_hamiltonian",
    "two_ion_selective",
    "ThreeLevelModel",
    "three_level_hamiltonian",
]

AJC = "AJC"
JC = "JC"


@dataclass(frozen=True)
class RamanParams:
    """Hardware parameters of the bichromatic Raman drive, angular units.

    g1 is the standing-wave coupling on the g<->c leg, g2 the
    travelling-wave coupling on e<->c, delta the common single-photon
    detuning from the relay level, eta1/eta2 the Lamb-Dicke parameters of
    the two fields, and nu the trap frequency.  The internal/laser
    frequencies are only needed by the three-level model.  If a Lamb-Dicke
    parameter is omitted it is derived from the corresponding laser
    frequency, the ion mass and the trap frequency (eta = k * ground-state
    wavepacket size, k = omega / c).
    """

    g1: float
    g2: float
    delta: float
    eta1: Optional[float] = None
    eta2: Optional[float] = None
    nu: float = 2 * math.pi * 10e6
    omega_e: Optional[float] = None
    omega_c: Optional[float] = None
    omega1: Optional[float] = None
    omega2: Optional[float] = None
    mass: Optional[float] = None

    def __post_init__(self):
        if self.g1 <= 0 or self.g2 <= 0:
            raise ValueError("couplings g1 and g2 must be positive")
        if self.nu <= 0:
            raise ValueError("trap frequency nu must be positive")
        if self.delta == 0:
            raise ValueError("detuning delta must be nonzero")
        for name in ("eta1", "eta2"):
            eta = getattr(self, name)
            if eta is None:
                eta = self._derived_eta(name)
                object.__setattr__(self, name, eta)
            if not 0 < eta < 1:
                raise ValueError(f"{name} = {eta} outside the Lamb-Dicke range (0, 1)")

    def _derived_eta(self, name: str) -> float:
        omega = self.omega1 if name == "eta1" else self.omega2
        if omega is None or self.mass is None:
            raise ValueError(f"{name} not given and cannot be derived (need laser frequency and mass)")
        k = omega / _SPEED_OF_LIGHT
        return k * math.sqrt(_HBAR_SI / (2.0 * self.mass * self.nu))

    def with_resonant_lasers(self, omega_e: float, omega_c: float) -> "RamanParams":
        """Fill in laser frequencies for the blue-sideband two-photon resonance.

        omega1 sits `delta` below the g->c transition; omega2 completes
        omega1 - omega2 = omega_e + nu.
        """
        omega1 = omega_c - self.delta
        omega2 = omega1 - omega_e - self.nu
        return replace(self, omega_e=omega_e, omega_c=omega_c, omega1=omega1, omega2=omega2)


@dataclass(frozen=True)
class Selector:
    """Names the resonant doublet: AJC pairs {|g,n0>, |e,n0+1>}, JC pairs {|g,n0>, |e,n0-1>}."""

    kind: str
    n0: int

    def __post_init__(self):
        if self.kind not in (AJC, JC):
            raise ValueError(f"kind must be 'AJC' or 'JC', got {self.kind!r}")
        if self.n0 < 0:
            raise ValueError("n0 must be >= 0")
        if self.kind == JC and self.n0 < 1:
            raise ValueError("JC selection needs n0 >= 1 (the doublet contains |e, n0-1>)")

    def check_cutoff(self, mode: ModeSpace) -> None:
        if self.n0 + 1 > mode.cutoff:
            raise ValueError(f"selector n0 = {self.n0} needs cutoff >= {self.n0 + 1}, got {mode.cutoff}")

    def coupling_scale(self) -> float:
        """sqrt factor of the resonant doublet's coupling: sqrt(n0+1) (AJC) or sqrt(n0) (JC)."""
        return math.sqrt(self.n0 + 1) if self.kind == AJC else math.sqrt(self.n0)


def two_level_mode_space(cutoff: int) -> SpaceDescriptor:
    return space(InternalSpace.two_level(), ModeSpace(cutoff))


def three_level_mode_space(cutoff: int) -> SpaceDescriptor:
    return space(InternalSpace.three_level(), ModeSpace(cutoff))


def two_ion_mode_space(cutoff: int) -> SpaceDescriptor:
    return space(InternalSpace.two_level(), InternalSpace.two_level(), ModeSpace(cutoff))


def _check_two_level_mode(sp: SpaceDescriptor) -> tuple:
    if (
        len(sp.factors) != 2
        or not isinstance(sp.factors[0], InternalSpace)
        or sp.factors[0].levels != ("g", "e")
        or not isinstance(sp.factors[1], ModeSpace)
    ):
        raise DimensionMismatch("expected a TwoLevel (x) Mode space")
    return sp.factors[0], sp.factors[1]


def jc_hamiltonian(g: float, sp: SpaceDescriptor) -> Operator:
    """Exchange coupling g (sigma^+ a + sigma^- a^dag); couples {|g,n>, |e,n-1>}."""
    internal, mode = _check_two_level_mode(sp)
    sm = atomic_transition(internal, "g", "e")
    sp_op = sm.dag()
    a, adag = mode_ladder(mode)
    return g * (tensor([sp_op, a]) + tensor([sm, adag]))


def ajc_hamiltonian(g: float, sp: SpaceDescriptor) -> Operator:
    """Counter-exchange coupling g (sigma^+ a^dag + sigma^- a); couples {|g,n>, |e,n+1>}."""
    internal, mode = _check_two_level_mode(sp)
    sm = atomic_transition(internal, "g", "e")
    sp_op = sm.dag()
    a, adag = mode_ladder(mode)
    return g * (tensor([sp_op, adag]) + tensor([sm, a]))


def omega_eff(p: RamanParams) -> float:
    """Two-photon sideband coupling 2 eta2 g1 g2 / delta (signed like delta)."""
    return 2.0 * p.eta2 * p.g1 * p.g2 / p.delta


def bare_detuning(p: RamanParams, n0: int) -> float:
    """Light-shift detuning of the doublet {|g,n0>, |e,n0+1>} before compensation."""
    if n0 < 0:
        raise ValueError("n0 must be >= 0")
    s = p.g1 ** 2 / p.delta
    return -4.0 * p.eta1 ** 2 * s * (2 * n0 + 1) + (4.0 * s - p.g2 ** 2 / p.delta)


def residual_detuning(p: RamanParams, n: int, n0: int) -> float:
    """Detuning left on doublet n after compensating doublet n0 exactly."""
    if n < 0 or n0 < 0:
        raise ValueError("n and n0 must be >= 0")
    return -8.0 * p.eta1 ** 2 * (p.g1 ** 2 / p.delta) * (n - n0)


def selectivity(p: RamanParams) -> float:
    """Ratio of nearest-neighbour residual detuning to the sideband coupling.

    Equals 4 (eta1^2 / eta2) (g1 / g2); values >> 1 mean the compensated
    doublet flops while its neighbours stay dispersive.
    """
    return 4.0 * (p.eta1 ** 2 / p.eta2) * (p.g1 / p.g2)


def _stark_terms(p: RamanParams, mode: ModeSpace, compensation: float):
    """Diagonal (projector, mode-matrix) pieces of the effective picture."""
    d = mode.dim
    n = np.arange(d)
    s = p.g1 ** 2 / p.delta
    m_g = np.diag(-4.0 * s + 4.0 * p.eta1 ** 2 * s * (2 * n + 1)).astype(complex)
    m_e = (-(p.g2 ** 2) / p.delta - compensation) * np.eye(d, dtype=complex)
    return m_g, m_e


def _coupling_matrices(p: RamanParams, mode: ModeSpace, kind: str):
    """Off-diagonal pieces: (sigma^+ mode-op) and its conjugate partner."""
    a, adag = mode_ladder(mode)
    w = omega_eff(p)
    if kind == AJC:
        up = 1j * w * adag.matrix
        down = -1j * w * a.matrix
    else:
        up = 1j * w * a.matrix
        down = -1j * w * adag.matrix
    return up, down


def _assemble_two_level(internal: InternalSpace, mode: ModeSpace, m_g, m_e, up, down) -> Operator:
    pg = level_projector(internal, "g").matrix
    pe = level_projector(internal, "e").matrix
    sm = atomic_transition(internal, "g", "e").matrix
    sp_m = sm.conj().T
    h = (
        np.kron(pg, m_g)
        + np.kron(pe, m_e)
        + np.kron(sp_m, up)
        + np.kron(sm, down)
    )
    return Operator(h, space(internal, mode))


def effective_hamiltonian(p: RamanParams, sp: SpaceDescriptor) -> Operator:
    """Adiabatically-eliminated two-level picture of the Raman drive.

    Number-dependent light shift on |g>, flat shift on |e>, and the
    blue-sideband exchange i omega_eff (sigma^+ a^dag - sigma^- a).
    Validity (|delta| much larger than couplings) is the caller's
    responsibility; the design module reports the margins.
    """
    internal, mode = _check_two_level_mode(sp)
    m_g, m_e = _stark_terms(p, mode, compensation=0.0)
    up, down = _coupling_matrices(p, mode, AJC)
    return _assemble_two_level(internal, mode, m_g, m_e, up, down)


def selective_hamiltonian(p: RamanParams, sel: Selector, sp: SpaceDescriptor) -> Operator:
    """Effective picture with the |e> level shifted so doublet n0 is exactly resonant.

    For the AJC kind this is the effective Hamiltonian minus the bare
    doublet detuning on |e><e|; the JC kind mirrors the coupling through
    the lowering sideband while reusing the same light-shift diagonal and
    compensation, which leaves every stated residual-detuning property
    intact.
    """
    internal, mode = _check_two_level_mode(sp)
    sel.check_cutoff(mode)
    m_g, m_e = _stark_terms(p, mode, compensation=bare_detuning(p, sel.n0))
    up, down = _coupling_matrices(p, mode, sel.kind)
    return _assemble_two_level(internal, mode, m_g, m_e, up, down)


def two_ion_selective(p: RamanParams, target_ion: int, sel: Selector, sp: SpaceDescriptor) -> Operator:
    """Selective drive addressing one of two ions sharing the mode; spectator untouched."""
    if (
        len(sp.factors) != 3
        or not all(isinstance(f, InternalSpace) for f in sp.factors[:2])
        or not isinstance(sp.factors[2], ModeSpace)
    ):
        raise DimensionMismatch("expected a TwoLevel (x) TwoLevel (x) Mode space")
    if target_ion not in (0, 1):
        raise ValueError("target_ion must be 0 or 1")
    internal = sp.factors[target_ion]
    mode = sp.factors[2]
    sel.check_cutoff(mode)
    m_g, m_e = _stark_terms(p, mode, compensation=bare_detuning(p, sel.n0))
    up, down = _coupling_matrices(p, mode, sel.kind)
    pg = level_projector(internal, "g").matrix
    pe = level_projector(internal, "e").matrix
    sm = atomic_transition(internal, "g", "e").matrix
    eye2 = np.eye(2, dtype=complex)
    terms = [(pg, m_g), (pe, m_e), (sm.conj().T, up), (sm, down)]
    h = np.zeros((sp.dim, sp.dim), dtype=complex)
    for int_m, mode_m in terms:
        if target_ion == 0:
            h += np.kron(np.kron(int_m, eye2), mode_m)
        else:
            h += np.kron(np.kron(eye2, int_m), mode_m)
    return Operator(h, sp)


class ThreeLevelModel:
    """Time-dependent three-level Raman Hamiltonian in the interaction frame.

    Frame: interaction picture with respect to nu a^dag a + omega_e |e><e|
    + omega_c |c><c|, after discarding optically counter-rotating terms.
    The standing wave sits at an antinode and is expanded to second order
    in eta1 (cos(eta1 x) ~ 1 - eta1^2 x^2 / 2 with x = a e^{-i nu t} +
    a^dag e^{i nu t}), the travelling wave to first order in eta2
    (e^{-i eta2 x} ~ 1 - i eta2 x).  The slow phases e^{-i delta t},
    e^{+-i nu t} are retained explicitly, grouped as

        phase delta           : g<->c carrier and the e<->c upper sideband,
        phase delta + nu      : e<->c carrier,
        phase delta +- 2 nu   : standing-wave second sidebands and the
                                e<->c lower sideband.

    `compensate_n0` adds the static level shift that tunes the doublet
    {|g,n0>, |e,n0+1>} to exact two-photon resonance.  `ramp_time`
    optionally switches the optical amplitudes on and off smoothly
    (sin^2 edges) over the given duration so the dynamics follows the
    dressed levels; induced shifts and the compensation scale with the
    envelope squared, keeping the selected doublet resonant throughout.
    """

    def __init__(
        self,
        p: RamanParams,
        sp: SpaceDescriptor,
        compensate_n0: Optional[int] = None,
        ramp_time: float = 0.0,
        duration: Optional[float] = None,
    ):
        if (
            len(sp.factors) != 2
            or not isinstance(sp.factors[0], InternalSpace)
            or sp.factors[0].levels != ("g", "e", "c")
            or not isinstance(sp.factors[1], ModeSpace)
        ):
            raise DimensionMismatch("expected a ThreeLevel (x) Mode space")
        for name in ("omega_e", "omega_c", "omega1", "omega2"):
            if getattr(p, name) is None:
                raise ValueError(f"three-level model needs {name} set on RamanParams")
        scale = max(abs(p.omega_c), abs(p.delta), p.nu)
        if abs(p.omega1 - (p.omega_c - p.delta)) > 1e-9 * scale:
            raise ValueError("omega1 must sit delta below the g->c transition")
        if abs((p.omega1 - p.omega2) - (p.omega_e + p.nu)) > 1e-9 * scale:
            raise ValueError("omega1 - omega2 must equal omega_e + nu (blue-sideband resonance)")
        if ramp_time > 0 and duration is None:
            raise ValueError("ramp_time needs a total pulse duration")
        self.params = p
        self.space = sp
        self.ramp_time = float(ramp_time)
        self.duration = duration
        internal, mode = sp.factors
        a, adag = mode_ladder(mode)
        n_op = adag.matrix @ a.matrix
        eye_m = np.eye(mode.dim, dtype=complex)
        gc = atomic_transition(internal, "g", "c").matrix
        ec = atomic_transition(internal, "e", "c").matrix
        e1, e2 = p.eta1, p.eta2
        # |x><c| (x) mode pieces, grouped by their residual phase.
        carrier_gc = 2.0 * p.g1 * (eye_m - 0.5 * e1 ** 2 * (2.0 * n_op + eye_m))
        side_ec_up = -1j * p.g2 * e2 * adag.matrix
        piece_delta = np.kron(gc, carrier_gc) + np.kron(ec, side_ec_up)
        piece_delta_nu = np.kron(ec, p.g2 * eye_m)
        piece_delta_p2nu = np.kron(gc, -p.g1 * e1 ** 2 * (a.matrix @ a.matrix)) + np.kron(
            ec, -1j * p.g2 * e2 * a.matrix
        )
        piece_delta_m2nu = np.kron(gc, -p.g1 * e1 ** 2 * (adag.matrix @ adag.matrix))
        comp = bare_detuning(p, compensate_n0) if compensate_n0 is not None else 0.0
        pe = level_projector(internal, "e").matrix
        self._comp_matrix = -comp * np.kron(pe, eye_m)
        # Split e^{-iwt} P + e^{+iwt} P^dag = cos(wt)(P+P^dag) - sin(wt) i(P-P^dag)
        # so assembly is one real-coefficient contraction over Hermitian pieces.
        pieces = [piece_delta, piece_delta_nu, piece_delta_p2nu, piece_delta_m2nu]
        self._herm_pieces = np.stack(
            [q for piece in pieces for q in (piece + piece.conj().T, 1j * (piece - piece.conj().T))]
        )
        self._freqs = np.array([p.delta, p.delta + p.nu, p.delta + 2 * p.nu, p.delta - 2 * p.nu])

    def envelope(self, t: float) -> float:
        """Optical amplitude envelope in [0, 1]; sin^2 edges when ramped."""
        tr = self.ramp_time
        if tr <= 0:
            return 1.0
        T = self.duration
        if t <= 0 or t >= T:
            return 0.0
        if t < tr:
            return math.sin(0.5 * math.pi * t / tr) ** 2
        if t > T - tr:
            return math.sin(0.5 * math.pi * (T - t) / tr) ** 2
        return 1.0

    @staticmethod
    def area_deficit(ramp_time: float) -> float:
        """Lost integral of envelope^2 per pulse (both edges), in seconds.

        The two-photon coupling scales with the envelope squared; each
        sin^2 edge integrates envelope^4 to 3/8 of a square edge.
        """
        return 2.0 * (1.0 - 3.0 / 8.0) * ramp_time

    def __call__(self, t: float) -> np.ndarray:
        f = self.envelope(t)
        if f == 0.0:
            return np.zeros_like(self._comp_matrix)
        args = self._freqs * t
        coeffs = np.empty(8)
        coeffs[0::2] = np.cos(args)
        coeffs[1::2] = -np.sin(args)
        h = np.tensordot(coeffs, self._herm_pieces, axes=1)
        if f != 1.0:
            h *= f
        h += (f * f) * self._comp_matrix
        return h

    def operator(self, t: float) -> Operator:
        return Operator(self(t), self.space)


def three_level_hamiltonian(
    p: RamanParams,
    t: float,
    sp: SpaceDescriptor,
    compensate_n0: Optional[int] = None,
) -> Operator:
    """Interaction-frame three-level Hamiltonian at time t (see ThreeLevelModel).

    For time scans build a ThreeLevelModel once and call it; this wrapper
    rebuilds the static pieces on every call.
    """
    return ThreeLevelModel(p, sp, compensate_n0=compensate_n0).operator(t)
