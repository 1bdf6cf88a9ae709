"""Command-line front end.

``ssmkit <command> --config job.json [--order N] [--delta D] [--out DIR]
[--threads T]``.  Every file written carries the resolved configuration and
the package version.  CSV files start with ``#`` comment lines holding both,
followed by a header row; floats are written with 17 significant digits.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .beam import BeamParams, assemble_beam
from .estimator import fit_pipeline
from .exceptions import ConfigError, SSMError
from .model import MechanicalSystem, build_first_order, make_shaw_pierre, terms_from_records
from .reduced import backbone, to_polar
from .solver import memory_estimate
from .spectral import decompose, resonance_scan, spectral_quotients
from .validation import invariance_error

__all__ = ["main", "resolve_config", "build_system", "COMMANDS"]

COMMANDS = ("compute", "backbone", "invariance", "resonances", "memory", "plot-data")
BUILTINS = ("shaw_pierre_inner", "shaw_pierre_outer", "timoshenko_beam")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM}}

SCHEMA = {
    "type": "object",
    "required": ["model"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["builtin"],
                    "additionalProperties": False,
                    "properties": {
                        "builtin": {"enum": list(BUILTINS)},
                        "params": {"type": "object"},
                    },
                },
                {
                    "type": "object",
                    "required": ["matrices"],
                    "additionalProperties": False,
                    "properties": {
                        "matrices": {
                            "type": "object",
                            "required": ["M", "C", "K"],
                            "additionalProperties": False,
                            "properties": {"M": _MATRIX, "C": _MATRIX, "K": _MATRIX},
                        },
                        "nonlinear_terms": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "required": ["target_dof", "coefficient", "exponents"],
                                "properties": {
                                    "target_dof": {"type": "integer", "minimum": 1},
                                    "coefficient": _NUM,
                                    "exponents": {
                                        "type": "array",
                                        "items": {"type": "integer", "minimum": 0},
                                    },
                                },
                            },
                        },
                        "name": {"type": "string"},
                    },
                },
            ]
        },
        "master_mode": {
            "oneOf": [{"const": "slowest"}, {"type": "integer", "minimum": 1}]
        },
        "order": {"type": "integer", "minimum": 1, "maximum": 25},
        "orders": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "integer", "minimum": 1, "maximum": 25},
        },
        "delta": _POS,
        "rho0": _POS,
        "rho_eps": _POS,
        "rho_max": {"type": "number", "minimum": 0},
        "rho_step": _POS,
        "n_traj": {"type": "integer", "minimum": 1},
        "n_theta": {"type": "integer", "minimum": 1},
        "theta_seed": {"type": ["integer", "null"]},
        "coordinates": {"enum": ["physical", "modal"]},
        "master_scale": _POS,
        "anchor": {
            "type": ["object", "null"],
            "required": ["dof", "rho", "displacement"],
            "additionalProperties": False,
            "properties": {
                "dof": {"oneOf": [{"type": "integer", "minimum": 1}, {"const": "tip"}]},
                "rho": _POS,
                "displacement": _POS,
                "order": {"type": "integer", "minimum": 1, "maximum": 25},
            },
        },
        "memory": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "order": {"type": "integer", "minimum": 3},
                "cubic_only": {"type": "boolean"},
            },
        },
        "outputs": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
    },
}

_COMMON = {
    "master_mode": "slowest",
    "delta": 0.05,
    "n_traj": 50,
    "n_theta": 128,
    "theta_seed": None,
    "coordinates": "physical",
    "master_scale": 1.0,
    "anchor": None,
    "outputs": "ssmkit_out",
}

_DEFAULTS = {
    "shaw_pierre_inner": {
        "order": 15, "orders": [3, 5, 7, 9, 11, 13, 15],
        "rho0": 0.35, "rho_eps": 0.01, "rho_max": 0.35, "rho_step": 0.005,
    },
    "shaw_pierre_outer": {
        "order": 15, "orders": [3, 5, 7, 9, 11, 13, 15],
        "rho0": 0.28, "rho_eps": 0.01, "rho_max": 0.28, "rho_step": 0.005,
    },
    # rho is anchored to the peak tip deflection (1.5 <-> 160 mm at order 10)
    "timoshenko_beam": {
        "order": 10, "orders": [4, 6, 8, 10],
        "rho0": 1.5, "rho_eps": 0.2, "rho_max": 1.3, "rho_step": 0.01,
        "anchor": {"dof": "tip", "rho": 1.5, "displacement": 160.0, "order": 10},
    },
    None: {
        "order": 5, "orders": [3, 5],
        "rho0": 0.1, "rho_eps": 0.01, "rho_max": 0.1, "rho_step": 0.005,
    },
}


def _fail(msg):
    raise ConfigError(msg)


def resolve_config(raw: dict, *, order=None, delta=None, out=None, threads=None) -> dict:
    """Validate ``raw`` and fill in every default.

    Command-line values override the file.  Threads fall back to the
    ``SSMKIT_THREADS`` environment variable and then to 1.
    """
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        _fail(f"invalid config at {path}: {exc.message}")
    kind = raw["model"].get("builtin")
    cfg = copy.deepcopy(_COMMON)
    cfg.update(copy.deepcopy(_DEFAULTS[kind]))
    cfg.update(copy.deepcopy(raw))
    model = cfg["model"]
    if kind is not None:
        model.setdefault("params", {})
    else:
        model.setdefault("nonlinear_terms", [])
    if order is not None:
        cfg["order"] = int(order)
        cfg["orders"] = [int(order)]
    if delta is not None:
        cfg["delta"] = float(delta)
    if out is not None:
        cfg["outputs"] = str(out)
    if threads is None:
        threads = os.environ.get("SSMKIT_THREADS")
    if threads is not None:
        try:
            cfg["threads"] = int(threads)
        except ValueError:
            _fail(f"threads must be an integer, got {threads!r}")
    cfg.setdefault("threads", 1)
    if cfg["threads"] < 1:
        _fail("threads must be at least 1")
    if not 1 <= cfg["order"] <= 25:
        _fail("order must lie in 1..25")
    if not cfg["delta"] > 0:
        _fail("delta must be positive")
    if not cfg["rho_eps"] < cfg["rho0"]:
        _fail("rho_eps must be smaller than rho0")
    cfg["orders"] = sorted(set(int(o) for o in cfg["orders"]))
    return cfg


def build_system(cfg: dict):
    """Mechanical system and resolved anchor (0-based dof) of a config."""
    model = cfg["model"]
    kind = model.get("builtin")
    params = dict(model.get("params", {}))
    anchor = cfg.get("anchor")
    anchor = dict(anchor) if anchor else None
    try:
        if kind in ("shaw_pierre_inner", "shaw_pierre_outer"):
            sys_ = make_shaw_pierre(kind.rsplit("_", 1)[1], **params)
            tip = None
        elif kind == "timoshenko_beam":
            asm = assemble_beam(BeamParams(**params))
            sys_, tip = asm.sys, asm.tip_w
        else:
            mats = model["matrices"]
            M, C, K = (np.asarray(mats[k], dtype=float) for k in ("M", "C", "K"))
            n = M.shape[0] if M.ndim == 2 else _fail("M must be a matrix")
            force = terms_from_records(n, model.get("nonlinear_terms", []))
            sys_ = MechanicalSystem(M, C, K, force, name=model.get("name", "custom"))
            tip = None
    except TypeError as exc:
        _fail(f"bad model parameters: {exc}")
    sys_.validate()
    if anchor is not None:
        if anchor["dof"] == "tip":
            if tip is None:
                _fail('anchor dof "tip" is only defined for the beam model')
            anchor["dof"] = tip
        else:
            d = int(anchor["dof"]) - 1
            if d >= sys_.n:
                _fail(f"anchor dof {d + 1} outside 1..{sys_.n}")
            anchor["dof"] = d
    return sys_, anchor


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _provenance(cfg):
    return {"package": "ssmkit", "version": __version__, "config": cfg}


def write_csv(path: Path, cfg: dict, header, rows):
    """CSV with provenance comment lines, header row and LF line endings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# ssmkit {__version__}\n")
        fh.write("# config: " + json.dumps(cfg, sort_keys=True, separators=(",", ":")) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, cfg: dict, payload: dict):
    doc = {"provenance": _provenance(cfg)}
    doc.update(payload)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _out_dir(cfg) -> Path:
    p = Path(cfg["outputs"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _master(cfg):
    m = cfg["master_mode"]
    return m if m == "slowest" else int(m)


def _fit(cfg, order=None):
    sys_, anchor = build_system(cfg)
    fos = build_first_order(sys_)
    ssm, scale = fit_pipeline(
        fos, int(order or cfg["order"]), master=_master(cfg), delta=cfg["delta"],
        master_scale=cfg["master_scale"], anchor=anchor,
    )
    return fos, ssm, scale


def _rho_grid(cfg):
    top, step = cfg["rho_max"], cfg["rho_step"]
    n = int(np.floor(top / step + 1e-9))
    grid = step * np.arange(n + 1)
    if top - grid[-1] > 1e-12 * max(top, 1.0):
        grid = np.append(grid, top)
    return grid


def _cplx(z):
    return [float(np.real(z)), float(np.imag(z))]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_compute(cfg) -> list[Path]:
    fos, ssm, scale = _fit(cfg)
    ms = ssm.modal
    payload = {
        "spectrum": {
            "lambdas": [_cplx(v) for v in ms.lambdas],
            "master_positions": [int(j) + 1 for j in ms.master],
            "master_scale": scale,
        },
        "quotients": spectral_quotients(ms),
        "resonances": ssm.report.as_dicts() if ssm.report is not None else [],
        "ssm": ssm.to_dict(),
    }
    if ms.underdamped:
        pd = to_polar(ssm)
        payload["polar"] = {
            "rho_dot": {str(k): v for k, v in sorted(pd.rho_dot_coeffs.items())},
            "omega": {str(k): v for k, v in sorted(pd.omega_coeffs.items())},
        }
    path = _out_dir(cfg) / "ssm.json"
    write_json(path, cfg, payload)
    return [path]


def cmd_backbone(cfg) -> list[Path]:
    _, ssm, _ = _fit(cfg)
    bb = backbone(ssm, _rho_grid(cfg), cfg["n_theta"])
    path = _out_dir(cfg) / "backbone.csv"
    write_csv(path, cfg, ["rho", "omega", "amplitude"], zip(bb.rho, bb.omega, bb.amplitude))
    return [path]


def _sweep(cfg, fos, ssm):
    results = []
    for order in cfg["orders"]:
        sub = ssm.truncate(order)
        results.append(
            invariance_error(
                fos, sub, cfg["rho0"], cfg["rho_eps"], cfg["n_traj"], cfg["theta_seed"],
                coordinates=cfg["coordinates"], workers=cfg["threads"],
            )
        )
    return results


def _write_sweep(cfg, results, stem):
    out = _out_dir(cfg)
    main = out / f"{stem}.csv"
    side = out / f"{stem}_dist.csv"
    write_csv(main, cfg, ["order", "delta_inv"], ((r.order, r.delta_inv) for r in results))
    rows = []
    for r in results:
        for k, (th, d) in enumerate(zip(r.thetas, r.per_trajectory)):
            rows.append((r.order, k + 1, th, d))
    write_csv(side, cfg, ["order", "trajectory", "theta0", "dist"], rows)
    return [main, side]


def cmd_invariance(cfg) -> list[Path]:
    fos, ssm, _ = _fit(cfg, max(cfg["orders"]))
    return _write_sweep(cfg, _sweep(cfg, fos, ssm), "invariance")


def cmd_resonances(cfg) -> list[Path]:
    sys_, _ = build_system(cfg)
    ms = decompose(build_first_order(sys_), _master(cfg))
    rep = resonance_scan(ms, cfg["delta"], max(cfg["order"], 2))
    q = spectral_quotients(ms)
    print(f"sigma_out = {q['sigma_out']}  sigma_in = {q['sigma_in']}")
    print(f"{'a':>3} {'b':>3} {'l':>4} {'kind':>6} {'I':>12}")
    for e in rep.entries:
        print(f"{e.a:>3} {e.b:>3} {e.index + 1:>4} {e.kind:>6} {e.I:>12.6g}")
    path = _out_dir(cfg) / "resonances.json"
    write_json(path, cfg, {
        "lambdas": [_cplx(v) for v in ms.lambdas],
        "quotients": q,
        "entries": rep.as_dicts(),
    })
    return [path]


def cmd_memory(cfg) -> list[Path]:
    mem = cfg.get("memory", {})
    n = mem.get("n")
    if n is None:
        n = build_system(cfg)[0].n
    order = int(mem.get("order", cfg["order"]))
    if order < 3:
        _fail("memory estimate needs order >= 3")
    cubic = bool(mem.get("cubic_only", True))
    est = memory_estimate(n, order, [3] if cubic else None)
    print(f"# ssmkit {__version__}")
    print("# config: " + json.dumps(cfg, sort_keys=True, separators=(",", ":")))
    print("order,bytes,terabytes")
    for i, b in zip(est.orders, est.bytes_per_order):
        print(f"{i},{_fmt(b)},{_fmt(b / 1e12)}")
    return []


def cmd_plot_data(cfg) -> list[Path]:
    """Figure data: invariance sweep, backbones per order, SSM surface samples."""
    fos, ssm, _ = _fit(cfg, max(max(cfg["orders"]), cfg["order"]))
    paths = _write_sweep(cfg, _sweep(cfg, fos, ssm), "plot_invariance")
    out = _out_dir(cfg)
    grid = _rho_grid(cfg)
    rows = []
    if ssm.modal.underdamped:
        for order in cfg["orders"]:
            sub = ssm.truncate(order)
            bb = backbone(sub, grid, cfg["n_theta"])
            rows.extend((order, r, w, a) for r, w, a in zip(bb.rho, bb.omega, bb.amplitude))
    p = out / "plot_backbones.csv"
    write_csv(p, cfg, ["order", "rho", "omega", "amplitude"], rows)
    paths.append(p)
    # surface of the SSM at the working order over a polar grid
    sub = ssm.truncate(cfg["order"])
    theta = 2 * np.pi * np.arange(64) / 64
    rho = np.linspace(0.0, cfg["rho0"], 21)
    R, TH = np.meshgrid(rho, theta, indexing="ij")
    z1 = (R * np.exp(1j * TH)).ravel()
    x = sub.physical(np.column_stack([z1, np.conj(z1)]))
    n = sub.modal.n
    head = ["rho", "theta"] + [f"y{k + 1}" for k in range(n)] + [f"v{k + 1}" for k in range(n)]
    p = out / "plot_surface.csv"
    write_csv(p, cfg, head, (
        (r, t, *xs) for r, t, xs in zip(R.ravel(), TH.ravel(), x)
    ))
    paths.append(p)
    return paths


_DISPATCH = {
    "compute": cmd_compute,
    "backbone": cmd_backbone,
    "invariance": cmd_invariance,
    "resonances": cmd_resonances,
    "memory": cmd_memory,
    "plot-data": cmd_plot_data,
}


def _parser():
    p = argparse.ArgumentParser(prog="ssmkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ssmkit {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON job file")
    p.add_argument("--order", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker cap (default $SSMKIT_THREADS or 1)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    warnings.simplefilter("default")
    try:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            _fail(f"cannot read config {args.config}: {exc}")
        cfg = resolve_config(
            raw, order=args.order, delta=args.delta, out=args.out, threads=args.threads
        )
        for path in _DISPATCH[args.command](cfg):
            print(path)
    except SSMError as exc:
        print(f"ssmkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
