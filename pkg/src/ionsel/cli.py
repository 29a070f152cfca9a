"""Command-line surface: run protocols and analyses from JSON configs.

One JSON document per run, validated against a per-command schema before
anything executes; unknown keys are rejected.  Scalar results land in a
JSON file (with enough provenance to re-execute the run exactly), bulk
traces and grids in CSV with a header row.  Reruns with the same config
and seed are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 physics precondition
violated (zero-probability herald, infeasible constraints), 4 numerical
failure (truncation margin, integrator step failure).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .core import (
    InternalSpace,
    ModeSpace,
    PureState,
    basis_state,
    coherent_state,
    fidelity,
    fock_populations,
    fock_state,
    space,
    thermal_state,
)
from .design import DesignConstraints, search
from .errors import ConfigError, Infeasible, StepFailure, TruncationError, ZeroProbability
from .evolution import pi_time, rabi_scan
from .hamiltonians import RamanParams, Selector, selective_hamiltonian, two_level_mode_space
from .protocols import cpg, generate_fock, measure_population, refine_population, selective_cool, wigner

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4

_FLOAT_FMT = "%.17g"

_PARAMS_SCHEMA = {
    "type": "object",
    "properties": {
        "g1": {"type": "number", "exclusiveMinimum": 0},
        "g2": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number"},
        "eta1": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "eta2": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "nu": {"type": "number", "exclusiveMinimum": 0},
        "omega_e": {"type": "number"},
        "omega_c": {"type": "number"},
        "omega1": {"type": "number"},
        "omega2": {"type": "number"},
        "mass": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["g1", "g2", "delta", "eta1", "eta2", "nu"],
    "additionalProperties": False,
}

_STATE_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "properties": {"kind": {"const": "fock"}, "n": {"type": "integer", "minimum": 0}},
            "required": ["kind", "n"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "kind": {"const": "coherent"},
                "beta": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
            },
            "required": ["kind", "beta"],
            "additionalProperties": False,
        },
        {
            "properties": {"kind": {"const": "thermal"}, "nbar": {"type": "number", "minimum": 0}},
            "required": ["kind", "nbar"],
            "additionalProperties": False,
        },
    ],
}

_SELECTOR_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["AJC", "JC"]},
        "n0": {"type": "integer", "minimum": 0},
    },
    "required": ["kind", "n0"],
    "additionalProperties": False,
}

_COMMON = {
    "cutoff": {"type": "integer", "minimum": 1},
    "seed": {"type": "integer", "minimum": 0},
    "mode": {"enum": ["ideal", "effective"]},
}

SCHEMAS = {
    "rabi": {
        "type": "object",
        "properties": {
            "params": _PARAMS_SCHEMA,
            "cutoff": _COMMON["cutoff"],
            "seed": _COMMON["seed"],
            "selector": _SELECTOR_SCHEMA,
            "times": {
                "type": "object",
                "properties": {
                    "t_max": {"type": "number", "exclusiveMinimum": 0},
                    "points": {"type": "integer", "minimum": 2},
                },
                "required": ["t_max", "points"],
                "additionalProperties": False,
            },
            "initial": {
                "type": "object",
                "properties": {"internal": {"enum": ["g", "e"]}, "n": {"type": "integer", "minimum": 0}},
                "required": ["internal", "n"],
                "additionalProperties": False,
            },
            "watch": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {"internal": {"enum": ["g", "e"]}, "n": {"type": "integer", "minimum": 0}},
                    "required": ["internal", "n"],
                    "additionalProperties": False,
                },
            },
            "csv": {"type": "string"},
        },
        "required": ["params", "cutoff", "selector", "times"],
        "additionalProperties": False,
    },
    "fock": {
        "type": "object",
        "properties": {
            "params": _PARAMS_SCHEMA,
            "cutoff": _COMMON["cutoff"],
            "seed": _COMMON["seed"],
            "mode": _COMMON["mode"],
            "state": _STATE_SCHEMA,
            "n0": {"type": "integer", "minimum": 0},
        },
        "required": ["params", "cutoff", "state", "n0"],
        "additionalProperties": False,
    },
    "cool": {
        "type": "object",
        "properties": {
            "params": _PARAMS_SCHEMA,
            "cutoff": _COMMON["cutoff"],
            "seed": _COMMON["seed"],
            "mode": _COMMON["mode"],
            "state": _STATE_SCHEMA,
        },
        "required": ["params", "cutoff", "state"],
        "additionalProperties": False,
    },
    "measure": {
        "type": "object",
        "properties": {
            "params": _PARAMS_SCHEMA,
            "cutoff": _COMMON["cutoff"],
            "seed": _COMMON["seed"],
            "mode": _COMMON["mode"],
            "state": _STATE_SCHEMA,
            "n0": {"type": "integer", "minimum": 0},
            "shots": {"type": ["integer", "null"], "minimum": 1},
            "rounds": {"type": "integer", "minimum": 0},
        },
        "required": ["params", "cutoff", "state", "n0"],
        "additionalProperties": False,
    },
    "wigner": {
        "type": "object",
        "properties": {
            "params": _PARAMS_SCHEMA,
            "cutoff": _COMMON["cutoff"],
            "seed": _COMMON["seed"],
            "mode": {"enum": ["oracle", "protocol"]},
            "convention": {"enum": ["paper", "standard"]},
            "state": _STATE_SCHEMA,
            "grid": {
                "type": "object",
                "properties": {
                    "re": {
                        "type": "array",
                        "prefixItems": [
                            {"type": "number"},
                            {"type": "number"},
                            {"type": "integer", "minimum": 1},
                        ],
                        "minItems": 3,
                        "maxItems": 3,
                    },
                    "im": {
                        "type": "array",
                        "prefixItems": [
                            {"type": "number"},
                            {"type": "number"},
                            {"type": "integer", "minimum": 1},
                        ],
                        "minItems": 3,
                        "maxItems": 3,
                    },
                },
                "required": ["re", "im"],
                "additionalProperties": False,
            },
            "csv": {"type": "string"},
        },
        "required": ["params", "cutoff", "state", "grid"],
        "additionalProperties": False,
    },
    "cpg": {
        "type": "object",
        "properties": {
            "params": _PARAMS_SCHEMA,
            "cutoff": _COMMON["cutoff"],
            "seed": _COMMON["seed"],
            "mode": _COMMON["mode"],
            "amplitudes": {
                "type": "array",
                "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "minItems": 4,
                "maxItems": 4,
            },
            "motional": {
                "type": "array",
                "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "required": ["params", "cutoff", "amplitudes"],
        "additionalProperties": False,
    },
    "design": {
        "type": "object",
        "properties": {
            "seed": _COMMON["seed"],
            "constraints": {
                "type": "object",
                "properties": {
                    "min_selectivity": {"type": "number", "exclusiveMinimum": 0},
                    "max_pi_time": {"type": "number", "exclusiveMinimum": 0},
                    "bounds": {
                        "type": "object",
                        "properties": {
                            name: {
                                "type": "array",
                                "items": {"type": "number"},
                                "minItems": 2,
                                "maxItems": 2,
                            }
                            for name in ("g1", "g2", "delta", "eta1", "eta2")
                        },
                        "required": ["g1", "g2", "delta", "eta1", "eta2"],
                        "additionalProperties": False,
                    },
                    "grid_points": {"type": "integer", "minimum": 2},
                    "nu": {"type": "number", "exclusiveMinimum": 0},
                    "n0": {"type": "integer", "minimum": 0},
                },
                "required": ["min_selectivity", "max_pi_time", "bounds"],
                "additionalProperties": False,
            },
        },
        "required": ["constraints"],
        "additionalProperties": False,
    },
}


def _validate(command: str, config: dict) -> None:
    try:
        jsonschema.validate(config, SCHEMAS[command])
    except jsonschema.ValidationError as e:
        where = "/".join(str(x) for x in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}") from None


def _params(block: dict) -> RamanParams:
    return RamanParams(**block)


def _motional(block: dict, cutoff: int):
    mode = ModeSpace(cutoff)
    if block["kind"] == "fock":
        return fock_state(mode, block["n"])
    if block["kind"] == "coherent":
        return coherent_state(mode, complex(block["beta"][0], block["beta"][1]))
    return thermal_state(mode, block["nbar"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=",")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_FLOAT_FMT % x if isinstance(x, float) else x for x in row])


def _cmd_rabi(config: dict, out: Path) -> dict:
    p = _params(config["params"])
    cutoff = config["cutoff"]
    sel = Selector(config["selector"]["kind"], config["selector"]["n0"])
    sp = two_level_mode_space(cutoff)
    h = selective_hamiltonian(p, sel, sp)
    init = config.get("initial", {"internal": "g", "n": sel.n0})
    state0 = basis_state(sp, init["internal"], init["n"])
    partner = sel.n0 + 1 if sel.kind == "AJC" else sel.n0 - 1
    watch_spec = config.get(
        "watch",
        [{"internal": "g", "n": sel.n0}, {"internal": "e", "n": partner}],
    )
    watch = [basis_state(sp, w["internal"], w["n"]) for w in watch_spec]
    labels = [f"P({w['internal']},{w['n']})" for w in watch_spec]
    times = np.linspace(0.0, config["times"]["t_max"], config["times"]["points"])
    trace = rabi_scan(h, state0, times, watch, labels=labels)
    csv_path = Path(config.get("csv", out.with_suffix(".csv")))
    rows = [
        [float(t)] + [float(x) for x in row]
        for t, row in zip(trace.times, trace.populations)
    ]
    _write_csv(csv_path, ["t"] + list(labels), rows)
    times_pi = pi_time(p, sel)
    return {
        "csv": str(csv_path),
        "columns": ["t"] + list(labels),
        "pi_time_derived": times_pi.derived,
        "pi_time_paper": times_pi.paper_convention,
    }


def _cmd_fock(config: dict, out: Path) -> dict:
    p = _params(config["params"])
    motional = _motional(config["state"], config["cutoff"])
    res = generate_fock(motional, config["n0"], p, mode=config.get("mode", "ideal"))
    target = fock_state(ModeSpace(config["cutoff"]), config["n0"] + 1)
    return {
        "herald_probability": res.herald_probability,
        "herald_level": res.herald_level,
        "duration": res.duration,
        "post_fidelity_target": fidelity(res.post_state, target),
        "post_fock_populations": fock_populations(res.post_state),
    }


def _cmd_cool(config: dict, out: Path) -> dict:
    p = _params(config["params"])
    motional = _motional(config["state"], config["cutoff"])
    res = selective_cool(motional, p, mode=config.get("mode", "ideal"))
    target = fock_state(ModeSpace(config["cutoff"]), 0)
    return {
        "herald_probability": res.herald_probability,
        "herald_level": res.herald_level,
        "duration": res.duration,
        "post_fidelity_ground": fidelity(res.post_state, target),
        "post_fock_populations": fock_populations(res.post_state),
    }


def _cmd_measure(config: dict, out: Path) -> dict:
    p = _params(config["params"])
    motional = _motional(config["state"], config["cutoff"])
    n0 = config["n0"]
    mode = config.get("mode", "ideal")
    rounds = config.get("rounds", 0)
    result: dict = {"n0": n0}
    if rounds > 0:
        result["estimates"] = refine_population(motional, n0, p, rounds, mode=mode)
        result["estimate"] = result["estimates"][-1]
    else:
        est = measure_population(
            motional, n0, p, shots=config.get("shots"), seed=config.get("seed", 0), mode=mode
        )
        result["estimate"] = est.estimate
        result["exact"] = est.exact
        if est.record is not None:
            result["record"] = {
                "shots": est.record.shots,
                "excited_counts": est.record.excited_counts,
                "seed": est.record.seed,
            }
    return result


def _cmd_wigner(config: dict, out: Path) -> dict:
    p = _params(config["params"])
    motional = _motional(config["state"], config["cutoff"])
    re_lo, re_hi, re_n = config["grid"]["re"]
    im_lo, im_hi, im_n = config["grid"]["im"]
    res = np.linspace(re_lo, re_hi, int(re_n))
    ims = np.linspace(im_lo, im_hi, int(im_n))
    alphas = res[:, None] + 1j * ims[None, :]
    grid = wigner(
        motional,
        alphas,
        p,
        convention=config.get("convention", "paper"),
        mode=config.get("mode", "oracle"),
    )
    csv_path = Path(config.get("csv", out.with_suffix(".csv")))
    rows = []
    for i in range(int(re_n)):
        for j in range(int(im_n)):
            rows.append([float(res[i]), float(ims[j]), float(grid.values[i, j])])
    _write_csv(csv_path, ["re", "im", "value"], rows)
    return {
        "csv": str(csv_path),
        "convention": grid.convention,
        "n_points": int(grid.values.size),
        "min_value": float(grid.values.min()),
        "max_value": float(grid.values.max()),
    }


def _cmd_cpg(config: dict, out: Path) -> dict:
    p = _params(config["params"])
    amps = np.array([complex(re, im) for re, im in config["amplitudes"]])
    qsp = space(InternalSpace.two_level(), InternalSpace.two_level())
    state = PureState(amps, qsp)
    motional = None
    if "motional" in config:
        mot = np.array([complex(re, im) for re, im in config["motional"]])
        vec = np.zeros(config["cutoff"] + 1, dtype=complex)
        vec[:2] = mot
        motional = PureState(vec, space(ModeSpace(config["cutoff"])))
    final = cpg(state, p, mode=config.get("mode", "ideal"), cutoff=config["cutoff"], motional=motional)
    d_mode = config["cutoff"] + 1
    full = final.amplitudes.reshape(4, d_mode)
    mot_vec = motional.amplitudes if motional is not None else np.eye(1, d_mode)[0]
    qubit_amp = full @ mot_vec.conj()
    in_amp = state.amplitudes
    signs = [
        int(np.sign(np.real(q / a))) if abs(a) > 1e-12 and abs(q) > 1e-12 else 0
        for q, a in zip(qubit_amp, in_amp)
    ]
    ideal = in_amp * np.array([1.0, 1.0, 1.0, -1.0])
    return {
        "output_amplitudes": [[float(q.real), float(q.imag)] for q in qubit_amp],
        "truth_table_signs": signs,
        "ideal_overlap": float(abs(np.vdot(ideal, qubit_amp)) ** 2),
        "mode_return_probability": float(np.linalg.norm(qubit_amp) ** 2),
    }


def _cmd_design(config: dict, out: Path) -> dict:
    block = config["constraints"]
    kwargs = {}
    for key in ("grid_points", "nu", "n0"):
        if key in block:
            kwargs[key] = block[key]
    constraints = DesignConstraints(
        min_selectivity=block["min_selectivity"],
        max_pi_time=block["max_pi_time"],
        bounds={k: tuple(v) for k, v in block["bounds"].items()},
        **kwargs,
    )
    p, rep = search(constraints)
    return {
        "params": {
            "g1": p.g1,
            "g2": p.g2,
            "delta": p.delta,
            "eta1": p.eta1,
            "eta2": p.eta2,
            "nu": p.nu,
        },
        "report": {
            "selectivity": rep.selectivity,
            "omega_eff": rep.omega_eff,
            "pi_time": rep.pi_time,
            "pi_time_paper": rep.pi_time_paper,
            "dispersive_margin": rep.dispersive_margin,
            "adiabatic_ratio": rep.adiabatic_ratio,
            "ld_valid": rep.ld_valid,
            "adiabatic_valid": rep.adiabatic_valid,
            "decoherence_ratio": rep.decoherence_ratio,
        },
    }


_HANDLERS = {
    "rabi": _cmd_rabi,
    "fock": _cmd_fock,
    "cool": _cmd_cool,
    "measure": _cmd_measure,
    "wigner": _cmd_wigner,
    "cpg": _cmd_cpg,
    "design": _cmd_design,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ionsel",
        description="Selective atom-motion interactions: protocols and parameter design.",
    )
    parser.add_argument("command", choices=sorted(_HANDLERS))
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--out", help="result JSON path (default: alongside the config)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    args = parser.parse_args(argv)

    try:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from None
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        _validate(args.command, config)
        if args.seed is not None:
            config["seed"] = args.seed
        out = Path(args.out) if args.out else Path(args.config).with_suffix(".out.json")
        result = _HANDLERS[args.command](config, out)
        payload = {
            "artifact": "ionsel",
            "version": __version__,
            "command": args.command,
            "seed": config.get("seed", 0),
            "mode": config.get("mode"),
            "config": config,
            "result": result,
        }
        out.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(str(out))
        return EXIT_OK
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ZeroProbability, Infeasible) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (TruncationError, StepFailure) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
