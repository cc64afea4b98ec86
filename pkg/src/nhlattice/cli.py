"""Command-line driver: validate, run, and sweep experiment configs.

Configs are strict-schema JSON: unknown fields are rejected with the JSON
path in the message. Every run writes its result files plus a manifest
recording the config hash, package and library versions, and all derived
parameters, so outputs are reproducible byte for byte. Exit codes: 0 on
success, 2 for configuration problems, 3 for numerical failures (with a
diagnostics file).

Config layout::

    {
      "run": "spectrum" | "propagate" | "momentum" | "winding" | "symmetry"
             | "ep-sweep" | "interface-compare" | "fit" | "calibrate",
      "output_dir": "out/...",
      "seed": 0,                      # recorded; runs are deterministic
      "lattice": { ... },             # for runs that build a lattice
      "excitation": {"kind": "edge" | "bulk_cell_start" | "interface"
                             | "site_index", "site": 7, "amplitude": [1, 0]},
      "params": { ... },              # run-specific options
      "grid": [{"path": "lattice.pattern.g2", "values": [...]}, ...]
    }

Lattice description (units: J and re_beta in 1/um, spacing d in um)::

    {"n_sites": 40, "hopping_J": 0.045 | "auto", "spacing_d": 1.4,
     "re_beta": 6.6, "pattern": PATTERN}
    {"hopping_J": ..., "spacing_d": ...,
     "interface": {"n_left_cells": 6, "n_right_cells": 6,
                   "left": PATTERN, "right": PATTERN}}

where ``"auto"`` derives the hopping from the spacing calibration, and the
interface block accepts the shorthand ``{"g": ...}``, ``{"im_beta": ...}``
or ``{"w": ...}`` for a trivial|topological junction with symmetric loss.
PATTERN is one of::

    {"phase": "I"}
    {"phase": "II" | "III", "g": 1.1}          # or "im_beta": ..., "w": ...
    {"g0": 1.1, "g1": 1.1, "g2": -1.1}
    {"phase": "custom", "g0": 0.0, "cell": [[re, im], ...4 entries...]}

Loss given as ``im_beta`` (1/um) or stripe width ``w`` (um) is converted
through the calibration module and the derived values land in the manifest.

A config with a ``grid`` section describes a sweep over one or two dotted
config paths; ``run`` executes it the same way ``sweep`` does. Sweep points
may execute on a thread pool sized by the ``NHLATTICE_WORKERS`` environment
variable; outputs are ordered by grid index regardless.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from copy import deepcopy
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy

from . import __version__, analysis, calibration, propagation, serialization, spectral
from . import symmetry as symmetry_mod
from . import topology
from .errors import ConfigurationError, NumericalError
from .lattice import (
    LatticeSpec,
    LossPattern,
    interface_lattice,
    real_space_hamiltonian,
)
from .propagation import Excitation

RUNS = (
    "spectrum",
    "propagate",
    "momentum",
    "winding",
    "symmetry",
    "ep-sweep",
    "interface-compare",
    "fit",
    "calibrate",
)

_NEEDS_LATTICE = {
    "spectrum", "propagate", "momentum", "winding", "ep-sweep",
    "interface-compare", "fit",
}
_NEEDS_EXCITATION = {"propagate", "momentum", "fit"}

_PARAM_SCHEMA: Dict[str, Dict[str, Any]] = {
    "spectrum": {"zero_mode_tol": float, "include_vectors": bool},
    "propagate": {
        "z_max": float, "dz": float, "method": str,
        "save_amplitudes": bool, "save_every": int,
    },
    "momentum": {
        "z_max": float, "dz": float, "method": str,
        "window": str, "pad_factor": int, "kz_window": list,
    },
    "winding": {"k_grid_size": int, "g2_values": list, "exclusion": float},
    "symmetry": {"cases": list, "k_samples": int, "g": float},
    "ep-sweep": {"j_min": float, "j_max": float, "j_step": float},
    "interface-compare": {
        "g2_min": float, "g2_max": float, "g2_step": float,
        "n_cells_per_side": int, "n_sites_defect": int,
    },
    "fit": {
        "fit": str, "site": (int, str), "z_max": float, "dz": float,
        "method": str, "fit_ranges": list, "fit_range": list,
    },
    "calibrate": {
        "kind": str, "model": str, "points": (list, str),
        "points_file": str, "fixed_x0": float, "predict_at": list,
    },
}


class ConfigError(ConfigurationError):
    """Config validation failure carrying the offending JSON path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.json_path = path


def _typename(t) -> str:
    if isinstance(t, tuple):
        return " or ".join(x.__name__ for x in t)
    return t.__name__


def _check_type(value, expected, path: str):
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected number, got {type(value).__name__}")
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected integer, got {type(value).__name__}")
        return value
    if not isinstance(value, expected):
        raise ConfigError(path, f"expected {_typename(expected)}, got {type(value).__name__}")
    return value


def _check_keys(obj: dict, path: str, required: Dict[str, Any], optional: Dict[str, Any]):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected object, got {type(obj).__name__}")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"{path}.{key}", "unknown field")
    out = {}
    for key, typ in required.items():
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "missing required field")
        out[key] = _check_type(obj[key], typ, f"{path}.{key}")
    for key, typ in optional.items():
        if key in obj:
            out[key] = _check_type(obj[key], typ, f"{path}.{key}")
    return out


def _validate_pattern(obj, path: str):
    _check_keys(
        obj, path,
        required={},
        optional={
            "phase": str, "g": float, "g0": float, "g1": float, "g2": float,
            "im_beta": float, "w": float, "cell": list,
        },
    )
    phase = obj.get("phase")
    if phase is None:
        for key in ("g0", "g1", "g2"):
            if key not in obj:
                raise ConfigError(f"{path}.{key}", "required without a phase preset")
        return
    if phase == "I":
        extra = set(obj) - {"phase"}
        if extra:
            raise ConfigError(f"{path}.{sorted(extra)[0]}", "phase I takes no amplitudes")
    elif phase in ("II", "III"):
        sources = [k for k in ("g", "im_beta", "w") if k in obj]
        if len(sources) != 1:
            raise ConfigError(path, "phase II/III needs exactly one of g, im_beta, w")
    elif phase == "custom":
        if "cell" not in obj:
            raise ConfigError(f"{path}.cell", "custom pattern requires a 4-entry cell")
        if len(obj["cell"]) != 4:
            raise ConfigError(f"{path}.cell", "cell must have exactly 4 entries")
        for i, entry in enumerate(obj["cell"]):
            if not (isinstance(entry, list) and len(entry) == 2):
                raise ConfigError(f"{path}.cell[{i}]", "expected [re, im]")
    else:
        raise ConfigError(f"{path}.phase", f"unknown phase {phase!r}")


def _validate_lattice(obj, path: str, run: str):
    _check_keys(
        obj, path,
        required={"spacing_d": float},
        optional={
            "n_sites": int, "hopping_J": (int, float, str), "re_beta": float,
            "pattern": dict, "interface": dict,
        },
    )
    hop = obj.get("hopping_J")
    if hop is None:
        raise ConfigError(f"{path}.hopping_J", "missing required field")
    if isinstance(hop, str) and hop != "auto":
        raise ConfigError(f"{path}.hopping_J", "must be a number or 'auto'")
    if "pattern" in obj and "interface" in obj:
        raise ConfigError(path, "give either pattern or interface, not both")
    if "interface" in obj:
        iface = _check_keys(
            obj["interface"], f"{path}.interface",
            required={"n_left_cells": int, "n_right_cells": int},
            optional={
                "left": dict, "right": dict,
                "g": float, "im_beta": float, "w": float,
            },
        )
        shorthand = [k for k in ("g", "im_beta", "w") if k in iface]
        if ("left" in iface) != ("right" in iface):
            raise ConfigError(f"{path}.interface", "left and right go together")
        if "left" in iface and shorthand:
            raise ConfigError(f"{path}.interface", "domains and shorthand are exclusive")
        if "left" not in iface and len(shorthand) != 1:
            raise ConfigError(
                f"{path}.interface", "needs left/right domains or one of g, im_beta, w"
            )
        if "left" in iface:
            _validate_pattern(obj["interface"]["left"], f"{path}.interface.left")
            _validate_pattern(obj["interface"]["right"], f"{path}.interface.right")
        if "n_sites" in obj:
            raise ConfigError(f"{path}.n_sites", "derived from interface cells; remove it")
    elif "pattern" in obj:
        _validate_pattern(obj["pattern"], f"{path}.pattern")

    needs_sites = run in ("spectrum", "propagate", "momentum", "fit")
    if needs_sites and "interface" not in obj and "n_sites" not in obj:
        raise ConfigError(f"{path}.n_sites", f"required for run '{run}'")
    if run in ("spectrum", "propagate", "momentum", "fit"):
        if "pattern" not in obj and "interface" not in obj:
            raise ConfigError(f"{path}.pattern", f"required for run '{run}'")
    if run == "ep-sweep" and "interface" not in obj:
        raise ConfigError(f"{path}.interface", "ep-sweep requires an interface lattice")


def _validate_excitation(obj, path: str):
    fields = _check_keys(
        obj, path,
        required={"kind": str},
        optional={"site": int, "amplitude": list},
    )
    if fields["kind"] not in ("edge", "bulk_cell_start", "interface", "site_index"):
        raise ConfigError(f"{path}.kind", f"unknown kind {fields['kind']!r}")
    if fields["kind"] == "site_index" and "site" not in obj:
        raise ConfigError(f"{path}.site", "required for site_index excitation")
    if "amplitude" in obj and len(obj["amplitude"]) != 2:
        raise ConfigError(f"{path}.amplitude", "expected [re, im]")


def validate_config(cfg: dict, path: str = "config") -> dict:
    """Strict structural validation; returns the config unchanged."""
    top = _check_keys(
        cfg, path,
        required={"run": str, "output_dir": str},
        optional={
            "lattice": dict, "excitation": dict, "params": dict,
            "grid": list, "seed": int,
        },
    )
    run = top["run"]
    if run not in RUNS:
        raise ConfigError(f"{path}.run", f"unknown run {run!r}; choose from {RUNS}")
    if run in _NEEDS_LATTICE:
        if "lattice" not in cfg:
            raise ConfigError(f"{path}.lattice", f"required for run '{run}'")
        _validate_lattice(cfg["lattice"], f"{path}.lattice", run)
    elif "lattice" in cfg:
        raise ConfigError(f"{path}.lattice", f"not used by run '{run}'")
    if run in _NEEDS_EXCITATION:
        if "excitation" not in cfg:
            raise ConfigError(f"{path}.excitation", f"required for run '{run}'")
        _validate_excitation(cfg["excitation"], f"{path}.excitation")
    elif "excitation" in cfg:
        raise ConfigError(f"{path}.excitation", f"not used by run '{run}'")

    schema = _PARAM_SCHEMA[run]
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{path}.params", "expected object")
    for key, value in params.items():
        if key not in schema:
            raise ConfigError(f"{path}.params.{key}", f"unknown parameter for run '{run}'")
        _check_type(value, schema[key], f"{path}.params.{key}")

    if "grid" in cfg:
        grid = cfg["grid"]
        if not 1 <= len(grid) <= 2:
            raise ConfigError(f"{path}.grid", "grid takes one or two parameters")
        for i, entry in enumerate(grid):
            g = _check_keys(
                entry, f"{path}.grid[{i}]",
                required={"path": str, "values": list},
                optional={},
            )
            if not g["values"]:
                raise ConfigError(f"{path}.grid[{i}].values", "empty grid")
            _resolve_path(cfg, g["path"], f"{path}.grid[{i}].path")
    return cfg


def _resolve_path(cfg: dict, dotted: str, err_path: str) -> Tuple[dict, str]:
    """Walk a dotted path to (parent, leaf); every segment must exist."""
    parts = dotted.split(".")
    node = cfg
    for seg in parts[:-1]:
        if not isinstance(node, dict) or seg not in node:
            raise ConfigError(err_path, f"path segment {seg!r} not found in config")
        node = node[seg]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(err_path, f"path leaf {parts[-1]!r} not found in config")
    return node, parts[-1]


# ---------------------------------------------------------------------------
# construction of model objects (with derived-parameter recording)


def _pattern_from_config(obj: dict, J: float, derived: dict, tag: str) -> LossPattern:
    phase = obj.get("phase")
    if phase is None:
        return LossPattern.from_g(obj["g0"], obj["g1"], obj["g2"])
    if phase == "I":
        return LossPattern.lossless()
    if phase == "custom":
        cell = [complex(re, im) for re, im in obj["cell"]]
        return LossPattern.custom(cell, g0=obj.get("g0", 0.0))
    if "w" in obj:
        im_beta = float(calibration.default_imbeta_curve().predict(obj["w"]))
        derived[f"{tag}.im_beta_from_w"] = im_beta
        g = calibration.g2_of(im_beta, J)
        derived[f"{tag}.g_from_im_beta"] = g
    elif "im_beta" in obj:
        g = calibration.g2_of(obj["im_beta"], J)
        derived[f"{tag}.g_from_im_beta"] = g
    else:
        g = obj["g"]
    if g == 0.0:
        return LossPattern.lossless()
    if phase == "II":
        return LossPattern.trivial(g)
    return LossPattern.topological(g)


def build_lattice(obj: dict, derived: dict) -> LatticeSpec:
    hop = obj["hopping_J"]
    d = obj["spacing_d"]
    if hop == "auto":
        hop = float(calibration.default_hopping_curve().predict(d))
        derived["lattice.hopping_J_from_spacing"] = hop
    re_beta = obj.get("re_beta", 6.6)
    # manifest completeness: every physical parameter used downstream
    derived["lattice.hopping_J"] = hop
    derived["lattice.spacing_d"] = d
    derived["lattice.re_beta"] = re_beta
    if "interface" in obj:
        iface = obj["interface"]
        if "left" in iface:
            left = _pattern_from_config(iface["left"], hop, derived, "lattice.interface.left")
            right = _pattern_from_config(iface["right"], hop, derived, "lattice.interface.right")
        else:
            src = {k: iface[k] for k in ("g", "im_beta", "w") if k in iface}
            left = _pattern_from_config({"phase": "II", **src}, hop, derived, "lattice.interface.left")
            right = _pattern_from_config({"phase": "III", **src}, hop, derived, "lattice.interface.right")
        base = LatticeSpec(
            n_sites=4, hopping_J=hop, spacing_d=d,
            pattern=LossPattern.lossless(), re_beta=re_beta,
        )
        spec = interface_lattice(
            left, right, iface["n_left_cells"], iface["n_right_cells"], base
        )
    else:
        pattern = _pattern_from_config(obj["pattern"], hop, derived, "lattice.pattern")
        spec = LatticeSpec(
            n_sites=obj["n_sites"], hopping_J=hop, spacing_d=d,
            pattern=pattern, re_beta=re_beta,
        )
    derived["lattice.n_sites"] = spec.n_sites
    return spec


def build_excitation(obj: dict, spec: LatticeSpec) -> Excitation:
    amp = complex(*obj["amplitude"]) if "amplitude" in obj else 1.0 + 0.0j
    return Excitation.resolve(obj["kind"], spec, site=obj.get("site"), amplitude=amp)


# ---------------------------------------------------------------------------
# runners


def _run_spectrum(cfg, out_dir: Path, derived: dict):
    spec = build_lattice(cfg["lattice"], derived)
    params = cfg.get("params", {})
    result = spectral.eig_full(real_space_hamiltonian(spec))
    order = np.argsort(result.eigenvalues.real, kind="stable")
    rows = [
        (int(rank), result.eigenvalues[i].real, result.eigenvalues[i].imag,
         result.condition_numbers[i])
        for rank, i in enumerate(order)
    ]
    outputs = [serialization.write_csv(
        out_dir / "spectrum.csv", ["index", "ReE", "ImE", "condition_number"], rows
    )]
    if params.get("include_vectors", False):
        outputs.append(serialization.matrix_to_csv(
            out_dir / "vectors.csv", result.right_vectors[:, order]
        ))
    report = spectral.find_zero_modes(
        result, spec, tol=params.get("zero_mode_tol", spectral.ZERO_MODE_TOL)
    )
    re_rel = (result.eigenvalues.real - spec.re_beta) / spec.hopping_J
    summary = {
        "n_zero_modes": len(report),
        "min_abs_re_rel": float(np.abs(re_rel).min()),
        "min_im": float(result.eigenvalues.imag.min()),
        "max_im": float(result.eigenvalues.imag.max()),
    }
    return summary, outputs


def _propagate_from_config(cfg, derived):
    spec = build_lattice(cfg["lattice"], derived)
    exc = build_excitation(cfg["excitation"], spec)
    params = cfg.get("params", {})
    field = propagation.propagate(
        spec, exc,
        z_max=params.get("z_max", propagation.DEFAULT_Z_MAX),
        dz=params.get("dz", propagation.DEFAULT_DZ),
        method=params.get("method", "expm"),
    )
    return spec, exc, field


def _write_field(field, out_dir: Path, save_amplitudes: bool, save_every: int = 1):
    intens = field.intensities()
    keep = range(0, field.z_grid.size, max(1, save_every))
    header = ["z"] + [f"site{j + 1}" for j in range(field.spec.n_sites)]
    rows = [[field.z_grid[i]] + list(intens[i]) for i in keep]
    outputs = [serialization.write_csv(out_dir / "intensity.csv", header, rows)]
    outputs.append(serialization.write_json(out_dir / "z_grid.json", {
        "z_min": float(field.z_grid[0]),
        "z_max": float(field.z_grid[-1]),
        "dz": float(field.z_grid[1] - field.z_grid[0]),
        "save_every": int(save_every),
        "n_samples": int(field.z_grid.size),
        "n_sites": int(field.spec.n_sites),
        "spacing_d": float(field.spec.spacing_d),
        "re_beta": float(field.spec.re_beta),
    }))
    if save_amplitudes:
        amp_rows = []
        for i in keep:
            row = [field.z_grid[i]]
            for a in field.amplitudes[i]:
                row += [a.real, a.imag]
            amp_rows.append(row)
        amp_header = ["z"]
        for j in range(field.spec.n_sites):
            amp_header += [f"re{j + 1}", f"im{j + 1}"]
        outputs.append(
            serialization.write_csv(out_dir / "amplitudes.csv", amp_header, amp_rows)
        )
    return outputs


def _run_propagate(cfg, out_dir: Path, derived: dict):
    _, exc, field = _propagate_from_config(cfg, derived)
    params = cfg.get("params", {})
    outputs = _write_field(
        field, out_dir,
        params.get("save_amplitudes", False),
        params.get("save_every", 1),
    )
    intens = field.intensities()
    summary = {
        "excited_site": exc.site,
        "final_total_intensity": float(intens[-1].sum()),
        "excited_final_fraction": float(intens[-1, exc.site - 1] / max(intens[-1].sum(), 1e-300)),
    }
    return summary, outputs


def _run_momentum(cfg, out_dir: Path, derived: dict):
    spec, _, field = _propagate_from_config(cfg, derived)
    params = cfg.get("params", {})
    ms = analysis.momentum_spectrum(
        field,
        window=params.get("window", analysis.WINDOW_HANN),
        pad_factor=params.get("pad_factor", 4),
    )
    # export only the band region around re_beta; the padded grid is huge
    kz_window = params.get("kz_window", [spec.re_beta - 0.6, spec.re_beta + 0.6])
    rows_mask = (ms.kz_grid >= kz_window[0]) & (ms.kz_grid <= kz_window[1])
    kz = ms.kz_grid[rows_mask]
    power = ms.power[rows_mask]
    header = ["kz\\kx"] + [serialization.fmt(v) for v in ms.kx_grid]
    rows = [[kz[i]] + list(power[i]) for i in range(kz.size)]
    outputs = [
        serialization.write_csv(out_dir / "power.csv", header, rows),
        serialization.write_json(out_dir / "axes.json", {
            "kx": ms.kx_grid, "kz": kz, "kz_window": list(kz_window),
            "window": ms.window, "pad_factor": ms.pad_factor,
        }),
    ]
    peak = np.unravel_index(np.argmax(power), power.shape)
    summary = {
        "peak_kz": float(kz[peak[0]]),
        "peak_kx": float(ms.kx_grid[peak[1]]),
        "total_power_one_zone": float(ms.power.sum() / 2.0),
    }
    return summary, outputs


def _run_winding(cfg, out_dir: Path, derived: dict):
    params = cfg.get("params", {})
    lat = cfg["lattice"]
    hop = lat["hopping_J"]
    if hop == "auto":
        hop = float(calibration.default_hopping_curve().predict(lat["spacing_d"]))
        derived["lattice.hopping_J_from_spacing"] = hop
    k_grid = params.get("k_grid_size", 128)
    if "g2_values" in params:
        rows = topology.winding_phase_diagram(
            params["g2_values"], hop, lat["spacing_d"],
            k_grid_size=k_grid, exclusion=params.get("exclusion", 0.05),
        )
        summary = {"n_points": len(rows)}
    else:
        if "pattern" not in lat:
            raise ConfigError(
                "config.lattice.pattern", "required unless params.g2_values is given"
            )
        pattern = _pattern_from_config(lat["pattern"], hop, derived, "lattice.pattern")
        res = topology.winding_number(pattern, hop, lat["spacing_d"], k_grid_size=k_grid)
        rows = [(pattern.g2, res.W, res.quantization_residual)]
        summary = {"W": res.W, "residual": res.quantization_residual}
    outputs = [serialization.write_csv(
        out_dir / "winding.csv", ["g2", "W", "residual"], rows
    )]
    return summary, outputs


def _run_symmetry(cfg, out_dir: Path, derived: dict):
    params = cfg.get("params", {})
    cases = params.get("cases", ["nontrivial", "trivial"])
    n_k = params.get("k_samples", 32)
    ks = np.linspace(0.0, np.pi / 2.0, n_k)
    report_obj = {}
    summary = {}
    for case in cases:
        rep = symmetry_mod.check_symmetries(ks, case=case, g=params.get("g", 1.0))
        report_obj[case] = {
            "residual_T": rep.residual_T,
            "residual_C": rep.residual_C,
            "residual_S": rep.residual_S,
            "holds_T": rep.holds_T,
            "holds_C": rep.holds_C,
            "holds_S": rep.holds_S,
            "class_label": rep.class_label,
            "k_samples": list(rep.k_samples),
        }
        summary[f"class_{case}"] = rep.class_label
        summary[f"max_residual_{case}"] = max(
            rep.residual_T, rep.residual_C, rep.residual_S
        )
    outputs = [serialization.write_json(out_dir / "symmetry.json", report_obj)]
    return summary, outputs


def _run_ep_sweep(cfg, out_dir: Path, derived: dict):
    spec = build_lattice(cfg["lattice"], derived)
    params = cfg.get("params", {})
    j_min = params.get("j_min", 0.04)
    j_max = params.get("j_max", 0.12)
    j_step = params.get("j_step", 0.001)
    n = int(round((j_max - j_min) / j_step)) + 1
    j_values = [j_min + i * j_step for i in range(n)]
    res = spectral.ep_sweep(spec, j_values)
    rows = [
        (res.J_values[i],
         res.pair_eigenvalues[i, 0].real, res.pair_eigenvalues[i, 0].imag,
         res.pair_eigenvalues[i, 1].real, res.pair_eigenvalues[i, 1].imag,
         res.edge_pair_separation[i])
        for i in range(res.J_values.size)
    ]
    outputs = [serialization.write_csv(
        out_dir / "ep_sweep.csv",
        ["J", "ReE_a", "ImE_a", "ReE_b", "ImE_b", "separation"],
        rows,
    )]
    derived["J_ep_estimate"] = res.J_ep_estimate
    summary = {
        "J_ep": res.J_ep_estimate,
        "min_separation": float(res.edge_pair_separation.min()),
        "coalescence_condition": res.coalescence_condition,
    }
    return summary, outputs


def _run_interface_compare(cfg, out_dir: Path, derived: dict):
    lat = cfg["lattice"]
    params = cfg.get("params", {})
    if "pattern" in lat or "interface" in lat:
        raise ConfigError(
            "config.lattice", "interface-compare builds its own lattices; give only J and d"
        )
    hop = lat["hopping_J"]
    if hop == "auto":
        hop = float(calibration.default_hopping_curve().predict(lat["spacing_d"]))
        derived["lattice.hopping_J_from_spacing"] = hop
    g_lo = params.get("g2_min", 0.2)
    g_hi = params.get("g2_max", 3.0)
    g_step = params.get("g2_step", 0.1)
    n = int(round((g_hi - g_lo) / g_step)) + 1
    g_values = [g_lo + i * g_step for i in range(n)]
    rows = analysis.interface_vs_defect(
        g_values, hop, spacing_d=lat["spacing_d"],
        n_cells_per_side=params.get("n_cells_per_side", 5),
        n_sites_defect=params.get("n_sites_defect", 40),
    )
    outputs = [serialization.write_csv(
        out_dir / "interface_compare.csv",
        ["g2", "ImE_interface", "ImE_defect", "ambiguous"],
        [(r.g2, r.im_e_interface, r.im_e_defect, r.ambiguous) for r in rows],
    )]
    return {"n_points": len(rows)}, outputs


def _run_fit(cfg, out_dir: Path, derived: dict):
    _, exc, field = _propagate_from_config(cfg, derived)
    params = cfg.get("params", {})
    site = params.get("site", "excited")
    site = exc.site if site == "excited" else int(site)
    z, trace = field.site_trace(site)
    outputs = [serialization.write_csv(
        out_dir / "trace.csv", ["z", "intensity"], zip(z, trace)
    )]
    kind = params.get("fit", "decay")
    if kind == "decay":
        ranges = params.get("fit_ranges")
        if ranges is not None:
            ranges = [tuple(r) for r in ranges]
        fit = analysis.fit_decay(z, trace, fit_ranges=ranges)
        record = {
            "fit": "decay", "site": site, "ell": fit.ell, "ell_error": fit.ell_error,
            "a0": fit.a0, "fit_ranges": [list(r) for r in fit.fit_ranges],
            "r_squared": list(fit.r_squared),
        }
        summary = {"ell": fit.ell, "ell_error": fit.ell_error}
    elif kind == "oscillation":
        rng = params.get("fit_range")
        fit = analysis.fit_oscillation(z, trace, fit_range=tuple(rng) if rng else None)
        record = {
            "fit": "oscillation", "site": site, "kz_osc": fit.kz_osc, "phi": fit.phi,
            "ell": fit.ell, "a0": fit.a0, "a1": fit.a1,
            "covariance": fit.covariance,
        }
        summary = {"kz_osc": fit.kz_osc, "ell": fit.ell, "a0": fit.a0, "a1": fit.a1}
    else:
        raise ConfigError("config.params.fit", f"unknown fit kind {kind!r}")
    outputs.append(serialization.write_json(out_dir / "fit.json", record))
    return summary, outputs


def _run_calibrate(cfg, out_dir: Path, derived: dict):
    params = cfg.get("params", {})
    kind = params.get("kind", "generic")
    points = params.get("points", "builtin")
    if "points_file" in params:
        pts, provenance = calibration.load_points(params["points_file"])
        curve = calibration.fit_curve(
            pts,
            params.get("model", calibration.MODEL_TABLE),
            kind=kind,
            fixed_x0=params.get("fixed_x0"),
            provenance=provenance,
        )
    elif points == "builtin":
        if kind == calibration.KIND_IMBETA_VS_W:
            curve = calibration.default_imbeta_curve()
        elif kind == calibration.KIND_J_VS_D:
            curve = calibration.default_hopping_curve()
        else:
            raise ConfigError(
                "config.params.kind",
                "builtin points exist for 'imbeta_vs_w' and 'J_vs_d' only",
            )
    else:
        curve = calibration.fit_curve(
            [tuple(p) for p in points],
            params.get("model", calibration.MODEL_TABLE),
            kind=kind,
            fixed_x0=params.get("fixed_x0"),
        )
    record = {
        "kind": curve.kind,
        "model": curve.model,
        "params": curve.params,
        "anchor_points": [list(a) for a in curve.anchor_points],
        "validity": list(curve.validity),
        "max_anchor_error": curve.max_anchor_error(),
    }
    if "predict_at" in params:
        record["predictions"] = [
            [float(x), float(curve.predict(float(x)))] for x in params["predict_at"]
        ]
    outputs = [serialization.write_json(out_dir / "calibration.json", record)]
    summary = {"model": curve.model, "max_anchor_error": record["max_anchor_error"]}
    return summary, outputs


_RUNNERS = {
    "spectrum": _run_spectrum,
    "propagate": _run_propagate,
    "momentum": _run_momentum,
    "winding": _run_winding,
    "symmetry": _run_symmetry,
    "ep-sweep": _run_ep_sweep,
    "interface-compare": _run_interface_compare,
    "fit": _run_fit,
    "calibrate": _run_calibrate,
}


def execute_single(cfg: dict, out_dir: Path) -> dict:
    """Run one validated, grid-free config into ``out_dir``; returns summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    derived: Dict[str, float] = {}
    summary, outputs = _RUNNERS[cfg["run"]](cfg, out_dir, derived)
    manifest = {
        "config_sha256": serialization.config_hash(cfg),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "run": cfg["run"],
        "seed": cfg.get("seed", 0),
        "derived_parameters": derived,
        "summary": summary,
        "outputs": sorted(p.name for p in outputs),
    }
    serialization.write_json(out_dir / "manifest.json", manifest)
    return summary


def _grid_points(cfg: dict) -> List[Tuple[Tuple[Any, ...], dict]]:
    grid = cfg["grid"]
    paths = [entry["path"] for entry in grid]
    combos = itertools.product(*(entry["values"] for entry in grid))
    points = []
    for combo in combos:
        point_cfg = deepcopy(cfg)
        del point_cfg["grid"]
        for dotted, value in zip(paths, combo):
            parent, leaf = _resolve_path(point_cfg, dotted, "config.grid.path")
            parent[leaf] = deepcopy(value)
        points.append((combo, point_cfg))
    return points


def _scalar_for_csv(value):
    if isinstance(value, dict):
        return json.dumps(serialization.jsonable(value), sort_keys=True).replace(",", ";")
    return value


def execute_sweep(cfg: dict, out_dir: Path) -> None:
    """Run every grid point into point_NNN/ and collect results.csv."""
    points = _grid_points(cfg)
    for _, point_cfg in points:
        validate_config(point_cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = max(1, int(os.environ.get("NHLATTICE_WORKERS", "1")))

    def run_point(idx_cfg):
        idx, point_cfg = idx_cfg
        point_dir = out_dir / f"point_{idx:03d}"
        try:
            summary = execute_single(point_cfg, point_dir)
            return idx, summary, ""
        except NumericalError as exc:
            serialization.write_json(point_dir / "diagnostics.json", {
                "error_class": type(exc).__name__,
                "message": str(exc),
                "diagnostics": exc.diagnostics,
            })
            return idx, {}, type(exc).__name__

    tasks = [(i, point_cfg) for i, (_, point_cfg) in enumerate(points)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_point, tasks))
    else:
        results = [run_point(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    paths = [entry["path"] for entry in cfg["grid"]]
    summary_keys = sorted({k for _, s, _ in results for k in s})
    header = ["point"] + paths + summary_keys + ["error"]
    rows = []
    for idx, summary, err in results:
        combo = points[idx][0]
        row = [idx] + [_scalar_for_csv(v) for v in combo]
        row += [summary.get(k, "") for k in summary_keys]
        row.append(err)
        rows.append(row)
    serialization.write_csv(out_dir / "results.csv", header, rows)
    serialization.write_json(out_dir / "sweep_manifest.json", {
        "config_sha256": serialization.config_hash(cfg),
        "package_version": __version__,
        "n_points": len(points),
        "grid_paths": paths,
        "failed_points": [idx for idx, _, err in results if err],
    })


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError("config", f"file not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(
            "config", f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nhlattice",
        description="Simulate loss-patterned waveguide lattices from JSON configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "execute a config (grids are swept)"),
        ("sweep", "execute a config that must contain a grid"),
        ("validate", "check a config without running it"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="path to the JSON config")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        validate_config(cfg)
        if args.command == "sweep" and "grid" not in cfg:
            raise ConfigError("config.grid", "sweep requires a grid section")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"ok: {args.config}")
        return 0

    out_dir = Path(cfg["output_dir"])
    try:
        if "grid" in cfg:
            execute_sweep(cfg, out_dir)
        else:
            execute_single(cfg, out_dir)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        out_dir.mkdir(parents=True, exist_ok=True)
        serialization.write_json(out_dir / "diagnostics.json", {
            "error_class": type(exc).__name__,
            "message": str(exc),
            "diagnostics": exc.diagnostics,
        })
        print(f"numerical error: {exc} (diagnostics written)", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
