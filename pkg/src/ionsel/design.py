"""Feasibility analysis and constrained parameter search.

The report quantities reuse the closed-form functions of the Hamiltonian
module directly (same code path, no re-derivation), so report and builder
always agree bitwise.  The search is a deterministic grid sweep followed
by coordinate refinement: the objective is cheap, the feasible pockets are
small, and reproducibility matters more than speed at this scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import Infeasible
from .evolution import pi_time
from .hamiltonians import (
    AJC,
    RamanParams,
    Selector,
    omega_eff,
    residual_detuning,
    selectivity,
)

__all__ = [
    "FeasibilityReport",
    "DesignConstraints",
    "feasibility",
    "leakage_bound",
    "search",
]

# Conventional dispersive-regime margins; configurable via feasibility().
LD_LIMIT = 0.3
ADIABATIC_MIN_RATIO = 10.0
DEFAULT_DECOHERENCE_TIME = 10e-3  # seconds


@dataclass(frozen=True)
class FeasibilityReport:
    """Closed-form figures of merit for one parameter set and selector."""

    selectivity: float
    omega_eff: float
    pi_time: float
    pi_time_paper: float
    dispersive_margin: float
    adiabatic_ratio: float
    ld_valid: bool
    adiabatic_valid: bool
    decoherence_ratio: float

    def __post_init__(self):
        for name in ("selectivity", "omega_eff", "pi_time", "pi_time_paper",
                     "dispersive_margin", "adiabatic_ratio", "decoherence_ratio"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def all_valid(self) -> bool:
        return self.ld_valid and self.adiabatic_valid


@dataclass(frozen=True)
class DesignConstraints:
    """Bounds and requirements for the parameter search.

    `bounds` maps each searched parameter name (g1, g2, delta, eta1, eta2)
    to an ordered (low, high) interval.  `nu` and the target selector are
    held fixed during the search.
    """

    min_selectivity: float
    max_pi_time: float
    bounds: Dict[str, Tuple[float, float]]
    grid_points: int = 5
    nu: float = 2 * math.pi * 10e6
    n0: int = 0

    _NAMES = ("g1", "g2", "delta", "eta1", "eta2")

    def __post_init__(self):
        if set(self.bounds) != set(self._NAMES):
            raise ValueError(f"bounds must cover exactly {self._NAMES}")
        for name, (lo, hi) in self.bounds.items():
            if not lo < hi:
                raise ValueError(f"bounds for {name} must be ordered: ({lo}, {hi})")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")


def feasibility(
    p: RamanParams,
    sel: Selector,
    tau_dec: float = DEFAULT_DECOHERENCE_TIME,
    ld_limit: float = LD_LIMIT,
    adiabatic_min: float = ADIABATIC_MIN_RATIO,
) -> FeasibilityReport:
    """Report selectivity, coupling, pulse times and validity margins.

    The decoherence ratio compares the quoted-convention pi time against
    tau_dec (default 10 ms); values well below 1 mean the pulse fits
    comfortably inside the motional coherence window.
    """
    s = selectivity(p)
    w = abs(omega_eff(p))
    times = pi_time(p, sel)
    dispersive = abs(p.delta) / max(p.g1, p.g2)
    adiabatic = abs(p.delta) / w
    return FeasibilityReport(
        selectivity=s,
        omega_eff=w,
        pi_time=times.derived,
        pi_time_paper=times.paper_convention,
        dispersive_margin=dispersive,
        adiabatic_ratio=adiabatic,
        ld_valid=bool(p.eta1 < ld_limit and p.eta2 < ld_limit),
        adiabatic_valid=bool(adiabatic >= adiabatic_min and dispersive >= adiabatic_min),
        decoherence_ratio=times.paper_convention / tau_dec,
    )


def leakage_bound(p: RamanParams, n: int, n0: int) -> float:
    """Worst-case transfer of the off-resonant doublet n when n0 is selected.

    Generalized-Rabi ceiling R^2 / (R^2 + d^2) with Rabi frequency
    R = 2 |omega_eff| sqrt(n+1) and d the residual detuning; this bounds
    the numerically observed leakage over any pulse length.
    """
    if n == n0:
        raise ValueError("n must differ from the selected n0 (resonant doublet transfers fully)")
    r = 2.0 * abs(omega_eff(p)) * math.sqrt(n + 1)
    d = residual_detuning(p, n, n0)
    return r ** 2 / (r ** 2 + d ** 2)


def _objective(values: Dict[str, float], constraints: DesignConstraints):
    """(pi_time, report) when feasible, else None."""
    try:
        p = RamanParams(
            g1=values["g1"],
            g2=values["g2"],
            delta=values["delta"],
            eta1=values["eta1"],
            eta2=values["eta2"],
            nu=constraints.nu,
        )
    except ValueError:
        return None
    rep = feasibility(p, Selector(AJC, constraints.n0))
    if not rep.all_valid:
        return None
    if rep.selectivity < constraints.min_selectivity:
        return None
    if rep.pi_time > constraints.max_pi_time:
        return None
    return rep.pi_time, p, rep


def search(constraints: DesignConstraints):
    """Minimize the pi time over the bounded grid subject to all constraints.

    Deterministic: grid points are scanned in lexicographic order and ties
    keep the first (lowest-index) winner, so parallel and serial sweeps
    would return the same point.  Two coordinate-refinement passes shrink
    the grid around the incumbent.  Raises Infeasible when nothing
    qualifies.
    """
    names = DesignConstraints._NAMES
    axes = {
        name: np.linspace(*constraints.bounds[name], constraints.grid_points)
        for name in names
    }
    best = None
    best_values = None
    for idx in np.ndindex(*(constraints.grid_points,) * len(names)):
        values = {name: float(axes[name][i]) for name, i in zip(names, idx)}
        res = _objective(values, constraints)
        if res is not None and (best is None or res[0] < best[0]):
            best = res
            best_values = values
    if best is None:
        raise Infeasible("no grid point satisfies the design constraints")

    # Coordinate refinement around the incumbent, clamped to the bounds.
    spacing = {
        name: (constraints.bounds[name][1] - constraints.bounds[name][0])
        / (constraints.grid_points - 1)
        for name in names
    }
    for _ in range(2):
        for name in names:
            lo, hi = constraints.bounds[name]
            center = best_values[name]
            h = spacing[name]
            local = np.linspace(max(lo, center - h), min(hi, center + h), constraints.grid_points)
            for x in local:
                trial = dict(best_values)
                trial[name] = float(x)
                res = _objective(trial, constraints)
                if res is not None and res[0] < best[0]:
                    best = res
                    best_values = trial
            spacing[name] = h / 2.0

    # Self-consistency: the returned point must satisfy what it reports.
    _, p, rep = best
    assert rep.all_valid and rep.selectivity >= constraints.min_selectivity
    assert rep.pi_time <= constraints.max_pi_time
    return p, rep
