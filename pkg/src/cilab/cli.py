"""
Command-line entry point: `cilab <subcommand> [--config FILE] [flags]`.

Configs are flat JSON objects; flags given on the command line override
file values.  Unknown keys or out-of-range values exit with status 2
before anything is written.  Gate failures exit with status 1.  Outputs
are written atomically and are byte-identical for identical configs;
wall-clock timings go to a separate `.timings.json` file next to the
manifest so that the manifest itself stays deterministic.
"""

import argparse
import json
import os
import platform
import sys

__all__ = ["main", "SCHEMAS", "ConfigError"]

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


class ConfigError(ValueError):
    pass


def _pow2(lo, hi):
    def check(v):
        return isinstance(v, int) and lo <= v <= hi and v & (v - 1) == 0
    check.desc = f"power of two in [{lo}, {hi}]"
    return check


def _rng(lo, hi, kind):
    def check(v):
        if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
            return False
        if kind is float and (isinstance(v, bool) or not isinstance(v, (int, float))):
            return False
        return lo <= v <= hi
    check.desc = f"{kind.__name__} in [{lo}, {hi}]"
    return check


def _choice(*opts):
    def check(v):
        return v in opts
    check.desc = "one of " + ", ".join(map(str, opts))
    return check


def _path(v):
    return isinstance(v, str) and len(v) > 0


_path.desc = "non-empty path"


def _opt_path(v):
    return v is None or _path(v)


_opt_path.desc = "path or null"


def _groups(v):
    from .experiments import DRIVERS
    return v is None or (isinstance(v, str) and all(g in DRIVERS for g in v.split(",") if g))


_groups.desc = "comma-separated subset of suite groups"

COMMON = {
    "seed": (0, _rng(0, 2 ** 31 - 1, int)),
    "manifest": (None, _opt_path),
}

SCHEMAS = {
    "toy": {"steps": (12, _rng(0, 20, int)), "out": ("toy.csv", _path)},
    "wavecone": {"resolution_lo": (128, _pow2(16, 1024)), "resolution_hi": (512, _pow2(32, 2048)),
                 "out": ("wavecone.json", _path)},
    "multiplier": {"resolution": (128, _pow2(16, 1024)), "radius": (16, _rng(1, 64, int)),
                   "symbol_file": (None, _opt_path), "out": ("multiplier.json", _path)},
    "subsol": {"kind": ("shear", _choice("shear", "muskat")), "c": (0.5, _rng(1e-3, 1.99, float)),
               "resolution": (256, _pow2(16, 1024)), "out": ("subsol.json", _path)},
    "euler-ci": {"steps": (4, _rng(1, 8, int)), "rho": (0.75, _rng(1e-3, 0.999, float)),
                 "resolution": (256, _pow2(32, 512)), "lambda0": (8.0, _rng(1.0, 1e4, float)),
                 "out": ("traj.csv", _path)},
    "embed": {"target": ("flat-square", _choice("flat-square", "flat-torus")),
              "stages": (3, _rng(2, 6, int)), "kconst": (4.0, _rng(2.0, 64.0, float)),
              "resolution": (1024, _pow2(64, 2048)), "mesh": ("embed.obj", _path),
              "report": ("embed.csv", _path)},
    "mollify-exp": {"resolution": (2 ** 16, _pow2(2 ** 10, 2 ** 20)), "out": ("mollify.json", _path)},
    "suite": {"filter": (None, _groups), "json": (False, lambda v: isinstance(v, bool))},
}
SCHEMAS["suite"]["json"][1].desc = "boolean"


def resolve_config(cmd, file_cfg, flags):
    """Merge defaults < file < flags and validate; raises ConfigError with the field name."""
    schema = {**COMMON, **SCHEMAS[cmd]}
    if not isinstance(file_cfg, dict):
        raise ConfigError("config: top level must be a JSON object")
    cfg = {k: v[0] for k, v in schema.items()}
    for src in (file_cfg, flags):
        for k, v in src.items():
            if k not in schema:
                raise ConfigError(f"{k}: unknown key for '{cmd}'")
            cfg[k] = v
    for k, (_, check) in schema.items():
        if not check(cfg[k]):
            raise ConfigError(f"{k}: expected {check.desc}, got {cfg[k]!r}")
    return cfg


def _versions():
    import numpy
    import scipy
    import sympy

    from . import __version__
    return {"cilab": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "sympy": sympy.__version__, "python": platform.python_version()}


def _gates(results):
    out = {}
    for r in results:
        for name, g in r.gates.items():
            d = g.to_dict()
            if name.endswith(".runtime"):
                # timings are volatile; the manifest keeps the verdict only
                d["measured"] = None
            out[name] = d
    return out


def _strip(info):
    return {k: v for k, v in info.items() if not k.startswith("_")}


def manifest(cmd, cfg, results):
    gates = _gates(results)
    echo = {k: v for k, v in cfg.items() if k != "manifest"}
    return {"command": cmd, "config": echo, "versions": _versions(), "gates": gates,
            "gate_count": len(gates), "passed": all(g["pass"] for g in gates.values()),
            "failures": sorted(k for k, g in gates.items() if not g["pass"]),
            "info": {r.group: _strip(r.info) for r in results}}


def _write_manifest(path, man, results):
    from .io import atomic_write, json_text
    atomic_write(path, json_text(man))
    base = path[:-5] if path.endswith(".json") else path
    atomic_write(base + ".timings.json", json_text({r.group: r.seconds for r in results}))


def _table(result, name):
    from .io import csv_text
    header, rows = result.tables[name]
    return csv_text(header, rows)


def run_command(cmd, cfg):
    from . import experiments as X
    from .io import atomic_write, json_text

    if cmd == "toy":
        r = X.run_toy(cfg["steps"])
        atomic_write(cfg["out"], _table(r, "toy"))
        return [r]
    if cmd == "wavecone":
        r = X.run_wavecone((cfg["resolution_lo"], cfg["resolution_hi"]))
        atomic_write(cfg["out"], json_text(_strip(r.info)))
        return [r]
    if cmd == "multiplier":
        r = X.run_multiplier(cfg["radius"], cfg["resolution"], cfg["symbol_file"])
        atomic_write(cfg["out"], json_text(_strip(r.info)))
        return [r]
    if cmd == "subsol":
        if cfg["kind"] == "shear":
            r = X.run_subsol(cfg["c"], cfg["resolution"])
            report = {"gates": _gates([r]), "info": _strip(r.info),
                      "energy_csv": _table(r, "energy"), "scan_csv": _table(r, "scan")}
        else:
            r = X.run_muskat(cfg["c"], cfg["resolution"])
            report = {"gates": _gates([r]), "width_csv": _table(r, "width")}
        atomic_write(cfg["out"], json_text(report))
        return [r]
    if cmd == "euler-ci":
        r = X.run_euler_ci(cfg["steps"], cfg["rho"], cfg["resolution"], cfg["lambda0"])
        atomic_write(cfg["out"], _table(r, "trajectory"))
        return [r]
    if cmd == "embed":
        from .nash_kuiper import export_obj
        r = X.run_embed(cfg["target"], cfg["stages"], cfg["kconst"], cfg["resolution"])
        export_obj(r.info["_final"], cfg["mesh"])
        atomic_write(cfg["report"], _table(r, "report"))
        return [r]
    if cmd == "mollify-exp":
        r = X.run_mollify_exp(seed=cfg["seed"], resolution=cfg["resolution"])
        atomic_write(cfg["out"], json_text({n: g.measured for n, g in r.gates.items()
                                            if not n.endswith(".runtime")}))
        return [r]
    if cmd == "suite":
        groups = [g for g in (cfg["filter"] or "").split(",") if g] or list(X.DRIVERS)
        return [X.DRIVERS[g](seed=cfg["seed"]) if g == "mollify-exp" else X.DRIVERS[g]()
                for g in groups]
    raise ConfigError(f"unknown subcommand {cmd!r}")


def build_parser():
    p = argparse.ArgumentParser(prog="cilab", description="Convex integration experiments.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def add(name, *flags):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--manifest", help="write the run manifest here")
        for f, kw in flags:
            sp.add_argument(f, **kw)
        return sp

    add("toy", ("--steps", {"type": int}), ("--out", {}))
    add("wavecone", ("--resolution-lo", {"type": int}), ("--resolution-hi", {"type": int}), ("--out", {}))
    add("multiplier", ("--resolution", {"type": int}), ("--radius", {"type": int}),
        ("--symbol-file", {}), ("--out", {}))
    add("subsol", ("--kind", {}), ("--c", {"type": float}), ("--resolution", {"type": int}), ("--out", {}))
    add("euler-ci", ("--steps", {"type": int}), ("--rho", {"type": float}),
        ("--resolution", {"type": int}), ("--lambda0", {"type": float}), ("--out", {}))
    add("embed", ("--target", {}), ("--stages", {"type": int}), ("--kconst", {"type": float}),
        ("--resolution", {"type": int}), ("--mesh", {}), ("--report", {}))
    add("mollify-exp", ("--resolution", {"type": int}), ("--out", {}))
    add("suite", ("--filter", {}), ("--json", {"action": "store_true", "default": None}))
    return p


def _apply_threads():
    n = os.environ.get("CIL_THREADS")
    if n:
        if not n.isdigit() or int(n) < 1:
            raise ConfigError(f"CIL_THREADS: expected a positive integer, got {n!r}")
        for var in THREAD_VARS:
            os.environ[var] = n


def main(argv=None):
    args = build_parser().parse_args(argv)
    cmd = args.cmd
    try:
        _apply_threads()
        file_cfg = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    file_cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        flags = {k: v for k, v in vars(args).items() if k not in ("cmd", "config") and v is not None}
        cfg = resolve_config(cmd, file_cfg, flags)
    except ConfigError as exc:
        print(f"cilab: config error: {exc}", file=sys.stderr)
        return 2
    results = run_command(cmd, cfg)
    man = manifest(cmd, cfg, results)
    if cfg["manifest"]:
        _write_manifest(cfg["manifest"], man, results)
    if cmd == "suite" and cfg["json"]:
        from .io import json_text
        sys.stdout.write(json_text(man))
    else:
        for name, g in man["gates"].items():
            print(f"{'PASS' if g['pass'] else 'FAIL'}  {name}")
        if man["failures"]:
            print(f"{len(man['failures'])} gate(s) failed", file=sys.stderr)
    return 0 if man["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
