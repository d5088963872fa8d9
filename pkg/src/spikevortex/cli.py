"""Command-line harness: reproducible single runs and parameter sweeps.

Every subcommand writes its artifacts into one output directory and prints
a one-line JSON summary to stdout.  Identical configurations reproduce the
numeric artifacts byte-for-byte; wall times live only in run_record.json.
Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import charge as charge_mod
from . import io as io_mod
from .errors import ConfigError, SpikeVortexError
from .mesh import RadialMesh
from .planar import (
    build_ansatz,
    ansatz_residual_report,
    correction_norms,
    newton_planar,
    sector_mesh_for,
    winding_number,
)
from .profiles import fit_decay, shooting_height, solve_spike, solve_vortex, vortex_slope_origin
from .radial import (
    CoupledState,
    coupled_residuals,
    make_state,
    minimize_ball,
    newton_radial,
)
from .reduction import find_root, solve_lhat


def _out_root(ns):
    if ns.out:
        return Path(ns.out)
    return Path(os.environ.get("SPIKEVORTEX_OUT", "runs"))


def _merge_config(ns, spec):
    """defaults < --config file < explicit flags."""
    cfg = {name: default for name, (_, default) in spec.items()}
    if ns.config:
        try:
            loaded = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        unknown = set(loaded) - set(spec)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for name, (typ, _) in spec.items():
        val = getattr(ns, name.replace("-", "_"), None)
        if val is not None:
            cfg[name] = val
        if cfg[name] is not None:
            cfg[name] = typ(cfg[name])
    return cfg


def _finish(ns, command, cfg, summary, outdir, t0):
    io_mod.write_json(outdir / "summary.json", summary)
    record = {
        "command": command,
        "config": cfg,
        "config_hash": io_mod.config_hash({"command": command, **cfg}),
        "wall_time": time.time() - t0,
    }
    io_mod.write_json(outdir / "run_record.json", record)
    print(io_mod.canonical_json(summary))


def _mkdir(ns, name):
    d = _out_root(ns) / name
    d.mkdir(parents=True, exist_ok=True)
    return d


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

SPIKE_SPEC = {
    "r_max": (float, 30.0),
    "h_core": (float, 0.04),
    "fit_lo": (float, 10.0),
    "fit_hi": (float, 15.0),
}


def cmd_spike(ns):
    cfg = _merge_config(ns, SPIKE_SPEC)
    t0 = time.time()
    mesh = RadialMesh.build(cfg["r_max"], h_core=cfg["h_core"], ratio=1.05,
                            core_extent=min(20.0, cfg["r_max"]))
    prof = solve_spike(mesh=mesh)
    a0, rate = fit_decay(prof, (cfg["fit_lo"], cfg["fit_hi"]))
    outdir = _mkdir(ns, "spike")
    io_mod.write_profile_csv(outdir / "spike.csv", prof)
    summary = {
        "w0": float(prof.values[0]),
        "w0_shooting": float(shooting_height()),
        "A0": float(a0),
        "rate": float(rate),
    }
    _finish(ns, "spike", cfg, summary, outdir, t0)
    return 0


VORTEX_SPEC = {
    "d": (int, 1),
    "r_max": (float, 60.0),
    "h_core": (float, 0.05),
}


def cmd_vortex(ns):
    cfg = _merge_config(ns, VORTEX_SPEC)
    t0 = time.time()
    mesh = RadialMesh.build(cfg["r_max"], h_core=cfg["h_core"], ratio=1.05, core_extent=6.0)
    prof = solve_vortex(cfg["d"], mesh=mesh)
    ev = prof.interpolator()
    r_probe = min(30.0, 0.5 * cfg["r_max"])
    far = float(r_probe**2 * (1.0 - ev(r_probe)))
    outdir = _mkdir(ns, f"vortex_d{cfg['d']}")
    io_mod.write_profile_csv(outdir / "vortex.csv", prof)
    summary = {
        "d": cfg["d"],
        "slope0": float(vortex_slope_origin(prof)),
        "far_coeff": far,
        "far_probe_r": r_probe,
        "target": cfg["d"] ** 2 / 2.0,
    }
    _finish(ns, "vortex", cfg, summary, outdir, t0)
    return 0


RADIAL_SPEC = {
    "beta": (float, -0.5),
    "d": (int, 1),
    "R": (float, 40.0),
    "route": (str, "newton"),
    "h_core": (float, 0.05),
}


def cmd_radial(ns):
    cfg = _merge_config(ns, RADIAL_SPEC)
    if cfg["beta"] > 0:
        raise ConfigError("radial coupled states require beta <= 0")
    if cfg["route"] not in ("newton", "minimize", "both"):
        raise ConfigError("route must be newton, minimize, or both")
    t0 = time.time()
    mesh = RadialMesh.build(cfg["R"], h_core=cfg["h_core"], ratio=1.05,
                            core_extent=min(10.0, cfg["R"]))
    states = {}
    if cfg["route"] in ("newton", "both"):
        states["newton"] = newton_radial(cfg["beta"], cfg["d"], cfg["R"], mesh=mesh)
    if cfg["route"] in ("minimize", "both"):
        states["minimize"], _ = minimize_ball(cfg["beta"], cfg["d"], cfg["R"], mesh=mesh)
    primary = states.get("newton", states.get("minimize"))
    outdir = _mkdir(ns, f"radial_b{cfg['beta']}_d{cfg['d']}_R{int(cfg['R'])}")
    io_mod.write_profile_csv(outdir / "u.csv", primary.u)
    io_mod.write_profile_csv(outdir / "f.csv", primary.f)
    f_u, f_s = coupled_residuals(mesh, primary.u.values, primary.f.values,
                                 cfg["beta"], cfg["d"])
    summary = {
        "beta": cfg["beta"],
        "d": cfg["d"],
        "R": cfg["R"],
        "route": cfg["route"],
        "energy": float(primary.energy),
        "u0": float(primary.u.values[0]),
        "f_slope0": float(vortex_slope_origin(primary.f)),
        "residual": float(max(np.abs(f_u).max(), np.abs(f_s).max())),
    }
    if len(states) == 2:
        summary["route_gap"] = float(
            max(
                np.abs(states["newton"].u.values - states["minimize"].u.values).max(),
                np.abs(states["newton"].f.values - states["minimize"].f.values).max(),
            )
        )
    _finish(ns, "radial", cfg, summary, outdir, t0)
    return 0


ANSATZ_SPEC = {
    "l": (float, 8.0),
    "k": (int, 2),
    "d": (int, 1),
    "beta": (float, 0.0),
    "m_theta": (int, 160),
}


def cmd_ansatz(ns):
    cfg = _merge_config(ns, ANSATZ_SPEC)
    t0 = time.time()
    mesh = sector_mesh_for(cfg["l"], cfg["k"], m_theta=cfg["m_theta"])
    ans = build_ansatz(cfg["l"], cfg["k"], cfg["d"], mesh=mesh)
    report = ansatz_residual_report(ans, cfg["beta"])
    outdir = _mkdir(ns, f"ansatz_l{cfg['l']}_k{cfg['k']}_d{cfg['d']}")
    io_mod.write_field_csv(outdir / "field.csv", ans.field,
                           extra={"l": cfg["l"], "beta": cfg["beta"]})
    summary = report.to_dict()
    _finish(ns, "ansatz", cfg, summary, outdir, t0)
    return 0


REDUCE_SPEC = {
    "beta": (float, 1e-5),
    "k": (int, 2),
    "d": (int, 1),
    "gamma": (float, 2.0),
    "m_theta": (int, 160),
    "with_correction": (bool, False),
}


def cmd_reduce(ns):
    cfg = _merge_config(ns, REDUCE_SPEC)
    t0 = time.time()
    lhat = solve_lhat(cfg["beta"], cfg["k"]).lhat
    trace = []
    l_beta, rf = find_root(
        cfg["beta"], cfg["k"], cfg["d"],
        gamma=cfg["gamma"], m_theta=cfg["m_theta"],
        with_correction=cfg["with_correction"], trace=trace,
    )
    outdir = _mkdir(ns, f"reduce_b{cfg['beta']}_k{cfg['k']}_d{cfg['d']}")
    io_mod.write_reduce_csv(outdir / "reduce.csv", trace)
    summary = {
        "beta": cfg["beta"],
        "k": cfg["k"],
        "d": cfg["d"],
        "gamma": cfg["gamma"],
        "lhat": float(lhat),
        "l_beta": float(l_beta),
        "c_at_root": float(rf.c_of_l),
    }
    _finish(ns, "reduce", cfg, summary, outdir, t0)
    return 0


PLANAR_SPEC = {
    "beta": (float, 1e-4),
    "k": (int, 2),
    "d": (int, 1),
    "l": (float, None),
    "m_theta": (int, 160),
    "h_core": (float, 0.05),
    "nondegeneracy": (bool, False),
}


def cmd_planar(ns):
    cfg = _merge_config(ns, PLANAR_SPEC)
    t0 = time.time()
    if cfg["nondegeneracy"]:
        from .planar import check_nondegeneracy

        info = {}
        sigma, resonant = check_nondegeneracy(cfg["d"], cfg["k"], info=info)
        outdir = _mkdir(ns, f"nondegeneracy_d{cfg['d']}_k{cfg['k']}")
        summary = {
            "d": cfg["d"],
            "k": cfg["k"],
            "sigma_min": sigma,
            "resonant": resonant,
            "blocks": {str(m): s for m, s in info["blocks"].items()},
        }
        _finish(ns, "planar", cfg, summary, outdir, t0)
        return 0
    if cfg["l"] is None:
        l_beta, _ = find_root(cfg["beta"], cfg["k"], cfg["d"], m_theta=cfg["m_theta"])
        cfg["l"] = float(l_beta)
    mesh = sector_mesh_for(cfg["l"], cfg["k"], m_theta=cfg["m_theta"], h_core=cfg["h_core"])
    ans = build_ansatz(cfg["l"], cfg["k"], cfg["d"], mesh=mesh)
    info = {}
    field = newton_planar(ans, cfg["beta"], info=info)
    du, psi_star = correction_norms(field, ans)
    outdir = _mkdir(ns, f"planar_b{cfg['beta']}_k{cfg['k']}_d{cfg['d']}")
    io_mod.write_field_csv(outdir / "field.csv", field,
                           extra={"l": cfg["l"], "beta": cfg["beta"]})
    summary = {
        "beta": cfg["beta"],
        "k": cfg["k"],
        "d": cfg["d"],
        "l": cfg["l"],
        "steps": info["steps"],
        "residual": info["residual"],
        "multiplier": info["multiplier"],
        "winding": float(winding_number(field)),
        "max_u_correction": float(du),
        "psi_star": float(psi_star),
    }
    _finish(ns, "planar", cfg, summary, outdir, t0)
    return 0


CHARGE_SPEC = {
    "state": (str, None),
    "method": (str, "radial"),
}


def _load_state(path: Path):
    path = Path(path)
    if path.is_dir():
        u = io_mod.read_profile_csv(path / "u.csv")
        f = io_mod.read_profile_csv(path / "f.csv")
        record = json.loads((path / "run_record.json").read_text())
        beta = record["config"]["beta"]
        return make_state(u.mesh, u.values, f.values, beta, f.degree)
    return io_mod.read_field_csv(path)


def cmd_charge(ns):
    cfg = _merge_config(ns, CHARGE_SPEC)
    if not cfg["state"]:
        raise ConfigError("charge needs --state (field CSV or radial run directory)")
    t0 = time.time()
    state = _load_state(cfg["state"])
    if cfg["method"] == "radial":
        if not isinstance(state, CoupledState):
            raise ConfigError("radial method needs a radial run directory")
        report = charge_mod.charge_radial(state)
    elif cfg["method"] == "2d":
        report = charge_mod.charge_2d(state)
    else:
        raise ConfigError("method must be radial or 2d")
    outdir = _mkdir(ns, "charge")
    summary = report.to_dict()
    _finish(ns, "charge", cfg, summary, outdir, t0)
    return 0


SWEEP_SPEC = {
    "command": (str, None),
    "grid": (dict, None),
    "fixed": (dict, None),
    "max_workers": (int, 4),
}


def _sweep_row(args):
    command, row_cfg, outdir = args
    argv = [command, "--out", str(outdir)]
    for key, val in row_cfg.items():
        argv += [f"--{key}", str(val)]
    try:
        code = main(argv)
        summary = json.loads((Path(outdir) / _summary_subdir(command, row_cfg) / "summary.json").read_text())
        return {"status": "ok" if code == 0 else f"exit {code}", **row_cfg, **summary}
    except SpikeVortexError as exc:
        return {"status": f"error: {exc}", **row_cfg}


def _summary_subdir(command, cfg):
    # mirror the per-command output naming
    if command == "spike":
        return "spike"
    if command == "vortex":
        return f"vortex_d{cfg.get('d', 1)}"
    if command == "radial":
        return f"radial_b{cfg.get('beta', -0.5)}_d{cfg.get('d', 1)}_R{int(float(cfg.get('R', 40.0)))}"
    if command == "ansatz":
        return f"ansatz_l{cfg.get('l', 8.0)}_k{cfg.get('k', 2)}_d{cfg.get('d', 1)}"
    if command == "reduce":
        return f"reduce_b{cfg.get('beta', 1e-05)}_k{cfg.get('k', 2)}_d{cfg.get('d', 1)}"
    if command == "planar":
        return f"planar_b{cfg.get('beta', 0.0001)}_k{cfg.get('k', 2)}_d{cfg.get('d', 1)}"
    raise ConfigError(f"sweep cannot drive command {command!r}")


def cmd_sweep(ns):
    if not ns.config:
        raise ConfigError("sweep requires --config with command/grid blocks")
    cfg = json.loads(Path(ns.config).read_text())
    command = cfg.get("command")
    grid = cfg.get("grid", {})
    fixed = cfg.get("fixed", {})
    if command not in ("spike", "vortex", "radial", "ansatz", "reduce", "planar"):
        raise ConfigError(f"sweep cannot drive command {command!r}")
    keys = sorted(grid)
    combos = list(itertools.product(*[grid[k] for k in keys])) if keys else []
    if len(combos) > 10_000:
        raise ConfigError(f"grid holds {len(combos)} combinations; limit is 10000")
    outdir = _mkdir(ns, "sweep")
    t0 = time.time()
    rows = []
    jobs = []
    for idx, combo in enumerate(combos):
        row_cfg = dict(fixed)
        row_cfg.update(dict(zip(keys, combo)))
        jobs.append((command, row_cfg, outdir / f"row_{idx:05d}"))
    if jobs:
        with ProcessPoolExecutor(max_workers=min(ns.max_workers or 4, len(jobs))) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    columns = sorted({key for row in rows for key in row} | set(grid) | set(fixed) | {"status"})
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(io_mod.canonical_json(row.get(c)) if isinstance(row.get(c), (dict, list))
                              else ("" if row.get(c) is None else str(row.get(c))) for c in columns))
    (outdir / "sweep.csv").write_text("\n".join(lines) + "\n")
    n_fail = sum(1 for row in rows if row.get("status") != "ok")
    summary = {"rows": len(rows), "failures": n_fail, "columns": columns}
    io_mod.write_json(outdir / "summary.json", summary)
    print(io_mod.canonical_json(summary))
    return 3 if n_fail else 0


# ----------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="spikevortex",
                                     description="spike-vortex numerical laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, spec, func):
        p = sub.add_parser(name)
        p.add_argument("--out", default=None)
        p.add_argument("--config", default=None)
        for key, (typ, _) in spec.items():
            if typ is bool:
                p.add_argument(f"--{key}", default=None,
                               type=lambda s: s.lower() in ("1", "true", "yes"))
            elif typ in (dict,):
                continue
            else:
                p.add_argument(f"--{key}", default=None, type=typ)
        p.set_defaults(func=func)
        return p

    add("spike", SPIKE_SPEC, cmd_spike)
    add("vortex", VORTEX_SPEC, cmd_vortex)
    add("radial", RADIAL_SPEC, cmd_radial)
    add("ansatz", ANSATZ_SPEC, cmd_ansatz)
    add("reduce", REDUCE_SPEC, cmd_reduce)
    add("planar", PLANAR_SPEC, cmd_planar)
    add("charge", CHARGE_SPEC, cmd_charge)
    p = sub.add_parser("sweep")
    p.add_argument("--out", default=None)
    p.add_argument("--config", required=False, default=None)
    p.add_argument("--max-workers", dest="max_workers", type=int, default=4)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SpikeVortexError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
