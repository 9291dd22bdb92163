"""Command-line interface: ``latticesir <subcommand> --config cfg.json --out DIR``.

Configs are JSON objects.  Reports are written as JSON, numeric arrays as
CSV, and every run leaves a ``manifest.json`` in the output directory.
Exit codes: 0 success, 1 runtime error, 2 unreadable config, 3 invalid
config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigParseError, ConfigValidationError, LatticeSIRError
from .first_moments import Rates, classify_first_moment, m1_inhomogeneous, reproduction_numbers
from .intermittency import SPACES, classify_intermittency
from .kernel import (
    LatticeSpec,
    build_kernel,
    effective_diffusion,
    kernel_gaussian,
    kernel_nearest_neighbor,
    kernel_variance,
    symbol,
    symbol_grid,
)
from .second_moments import (
    INITIAL_DATA,
    classify_second_moment,
    m2_inhomogeneous,
    table4_feasibility,
)
from .simulator import MIN_REPLICAS, MODES, figure1_experiment, init_state, mc_moments, run
from .torus import green_function

SUBCOMMANDS = ("kernel-info", "moments", "green", "simulate", "intermittency",
               "classify", "figure1", "tables")

ALIASES = {"κ": "kappa", "β": "beta", "γ": "gamma", "ρ₀": "rho0", "ρ0": "rho0",
           "rho_0": "rho0", "λ": "lambda", "lam": "lambda"}

DEFAULTS = {
    "d": 1, "n": 64, "h": 1.0, "kernel": "nearest_neighbor",
    "kappa": 1.0, "beta": 0.0, "gamma": 0.0, "rho0": 1.0, "mode": "linear",
    "times": [1.0], "sites": None, "separations": None, "k": None, "lambda": 0.0,
    "replicas": 1000, "seed": 0, "snapshots": [], "events": 50_000, "order": 1,
    "space": "homogeneous", "initial": "delta",
}
KNOWN_KEYS = set(DEFAULTS) | {"t"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated run configuration with defaults applied."""

    lattice: LatticeSpec
    kernel_spec: object
    rates: Rates
    mode: str = "linear"
    times: tuple = (1.0,)
    sites: tuple | None = None
    separations: tuple | None = None
    k: tuple | None = None
    lam: float = 0.0
    replicas: int = 1000
    seed: int = 0
    snapshots: tuple = ()
    events: int = 50_000
    order: int = 1
    space: str = "homogeneous"
    initial: str = "delta"
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def kernel(self):
        return _make_kernel(self.kernel_spec, self.lattice.d)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the normalised config."""
        return hashlib.sha256(_canonical(self.raw).encode()).hexdigest()


@dataclass(frozen=True)
class RunRecord:
    """What a dispatched subcommand did and where it wrote."""

    subcommand: str
    config_hash: str
    version: str
    wall_time: float
    outputs: list

    def to_dict(self) -> dict:
        return asdict(self)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


# --- config -----------------------------------------------------------------------

def _make_kernel(entry, d):
    if isinstance(entry, str):
        entry = {"preset": entry}
    if not isinstance(entry, dict):
        raise ConfigValidationError("kernel", "must be a preset name or an object")
    unknown = set(entry) - {"preset", "variance", "radius", "entries", "allow_asymmetric"}
    if unknown:
        raise ConfigValidationError(f"kernel.{sorted(unknown)[0]}", "unknown key")
    try:
        if "entries" in entry:
            entries = [(tuple(np.atleast_1d(z).tolist()), float(w)) for z, w in entry["entries"]]
            return build_kernel(d, entries, allow_asymmetric=bool(entry.get("allow_asymmetric")))
        preset = entry.get("preset")
        if preset == "nearest_neighbor":
            return kernel_nearest_neighbor(d)
        if preset == "gaussian":
            return kernel_gaussian(d, float(entry.get("variance", 16.0)), int(entry.get("radius", 12)))
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError("kernel", str(exc)) from exc
    raise ConfigValidationError("kernel", f"unknown preset {entry.get('preset')!r}")


def _number(raw, key, kind=float, minimum=None, strict=False):
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigValidationError(key, f"must be a number, got {val!r}")
    if kind is int and val != int(val):
        raise ConfigValidationError(key, f"must be an integer, got {val!r}")
    val = kind(val)
    if not math.isfinite(val):
        raise ConfigValidationError(key, "must be finite")
    if minimum is not None and (val < minimum or (strict and val == minimum)):
        op = ">" if strict else ">="
        raise ConfigValidationError(key, f"must be {op} {minimum}, got {val}")
    return val


def _points(raw, key, d):
    val = raw[key]
    if val is None:
        return None
    try:
        pts = tuple(tuple(int(c) for c in np.atleast_1d(p)) for p in val)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(key, "must be a list of integer sites") from exc
    for p in pts:
        if len(p) != d:
            raise ConfigValidationError(key, f"{list(p)} is not {d}-dimensional")
    return pts


def _times(raw, key):
    val = raw[key]
    if val is None:
        return None
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        val = [val]
    try:
        out = tuple(float(t) for t in val)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(key, "must be a list of times") from exc
    if any(not math.isfinite(t) or t < 0 for t in out):
        raise ConfigValidationError(key, "times must be finite and nonnegative")
    return out


def build_config(data: dict, subcommand: str | None = None) -> ExperimentConfig:
    """Validate a config mapping and apply defaults."""
    if not isinstance(data, dict):
        raise ConfigValidationError("<root>", "config must be a JSON object")
    raw = {}
    for key, val in data.items():
        name = ALIASES.get(key, key)
        if name not in KNOWN_KEYS:
            raise ConfigValidationError(key, "unknown key")
        if name == "t":
            name = "times"
        raw[name] = val
    merged = {**DEFAULTS, **raw}

    d = _number(merged, "d", int)
    n = _number(merged, "n", int)
    h = _number(merged, "h", float, 0.0, strict=True)
    try:
        lattice = LatticeSpec(d, n, h)
    except ValueError as exc:
        raise ConfigValidationError("d" if "dimension" in str(exc) else "n", str(exc)) from exc
    kernel_spec = merged["kernel"]
    _make_kernel(kernel_spec, d)

    vals = {k: _number(merged, k, float, 0.0) for k in ("kappa", "beta", "gamma")}
    vals["rho0"] = _number(merged, "rho0", float, 0.0, strict=True)
    rates = Rates(**vals)

    mode = merged["mode"]
    if mode not in MODES:
        raise ConfigValidationError("mode", f"must be one of {MODES}")
    space = merged["space"]
    if space not in SPACES:
        raise ConfigValidationError("space", f"must be one of {SPACES}")
    initial = merged["initial"]
    if initial not in INITIAL_DATA:
        raise ConfigValidationError("initial", f"must be one of {INITIAL_DATA}")
    order = _number(merged, "order", int)
    if order not in (1, 2):
        raise ConfigValidationError("order", "must be 1 or 2")
    k = merged["k"]
    if k is not None:
        try:
            k = tuple(tuple(float(c) for c in np.atleast_1d(kk)) for kk in
                      (k if isinstance(k, list) and k and isinstance(k[0], list) else [k]))
        except (TypeError, ValueError) as exc:
            raise ConfigValidationError("k", "must be a frequency or list of frequencies") from exc
        if any(len(kk) != d for kk in k):
            raise ConfigValidationError("k", f"frequencies must be {d}-dimensional")

    cfg = ExperimentConfig(
        lattice=lattice, kernel_spec=kernel_spec, rates=rates, mode=mode,
        times=_times(merged, "times"), sites=_points(merged, "sites", d),
        separations=_points(merged, "separations", d), k=k,
        lam=_number(merged, "lambda", float, 0.0),
        replicas=_number(merged, "replicas", int),
        seed=_number(merged, "seed", int, 0),
        snapshots=_times(merged, "snapshots") or (),
        events=_number(merged, "events", int, 1),
        order=order, space=space, initial=initial,
        raw=merged,
    )
    if subcommand is not None:
        validate_for(cfg, subcommand)
    return cfg


def validate_for(cfg: ExperimentConfig, subcommand: str):
    """Subcommand-specific preconditions, raised as validation errors."""
    if subcommand == "classify" and cfg.rates.gamma == 0:
        raise ConfigValidationError("gamma", "classification needs gamma > 0")
    if subcommand == "simulate":
        if cfg.replicas < MIN_REPLICAS:
            raise ConfigValidationError("replicas", f"must be at least {MIN_REPLICAS}")
        if cfg.rates.rho0 != int(cfg.rates.rho0):
            raise ConfigValidationError("rho0", "simulation needs an integer rho0")
    if subcommand == "green" and cfg.lam == 0 and cfg.rates.kappa == 0:
        raise ConfigValidationError("kappa", "G_0 needs kappa > 0")
    if subcommand == "figure1" and cfg.lattice.d != 2:
        raise ConfigValidationError("d", "figure1 runs on a two-dimensional grid")


def parse_config(path, subcommand: str | None = None) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"config {path} is not valid JSON: {exc}") from exc
    return build_config(data, subcommand)


# --- report schemas -------------------------------------------------------------------

_NUM = {"type": "number"}
_NUM_OR_INF = {"oneOf": [{"type": "number"}, {"enum": ["infinite", "-infinite"]}]}
_NUM_OR_NULL = {"oneOf": [_NUM_OR_INF, {"type": "null"}]}
_VEC = {"type": "array", "items": _NUM}

REGIME_SCHEMA = {
    "type": "object",
    "required": ["k", "alpha", "theta", "mu", "R0", "R0m", "label", "conjectural"],
    "properties": {"k": _VEC, "alpha": _NUM, "theta": _NUM, "mu": _NUM, "R0": _NUM,
                   "R0m": _NUM, "conjectural": {"type": "boolean"},
                   "label": {"enum": ["vanish", "steady_delta", "grow_origin_only",
                                      "grow_everywhere"]}},
}
SECOND_REGIME_SCHEMA = {
    "type": "object",
    "required": ["k", "alpha", "theta", "mu", "homogeneous", "inhomogeneous", "row", "feasible"],
    "properties": {"k": _VEC, "row": {"type": ["integer", "null"]},
                   "feasible": {"type": "boolean"}},
}
INTERMITTENCY_SCHEMA = {
    "type": "object",
    "required": ["space", "limit_label", "limit_value", "pair_limit", "t_star"],
    "properties": {"space": {"enum": list(SPACES)},
                   "limit_label": {"enum": ["intermittent", "bounded"]},
                   "limit_value": _NUM_OR_NULL, "pair_limit": _NUM_OR_NULL,
                   "t_star": {"type": ["number", "null"]}},
}
REPORT_SCHEMAS = {
    "kernel-info": {
        "type": "object",
        "required": ["d", "support_size", "mass", "symmetric", "variance", "effective_diffusion"],
        "properties": {"d": {"type": "integer"}, "support_size": {"type": "integer"},
                       "mass": _NUM, "symmetric": {"type": "boolean"},
                       "variance": _NUM, "effective_diffusion": _NUM},
    },
    "moments-1": {
        "type": "object", "required": ["times", "regimes", "negative_S_sites"],
        "properties": {"regimes": {"type": "array", "items": REGIME_SCHEMA},
                       "R0": {"type": ["number", "null"]},
                       "R0m_max": {"type": ["number", "null"]}},
    },
    "moments-2": {
        "type": "object", "required": ["times", "regimes", "initial"],
        "properties": {"regimes": {"type": "array", "items": SECOND_REGIME_SCHEMA}},
    },
    "green": {
        "type": "object",
        "required": ["lambda", "value", "regime", "smallk_order", "resolutions_used"],
        "properties": {"lambda": _NUM,
                       "value": {"oneOf": [{"type": "number", "minimum": 0},
                                           {"const": "infinite"}]},
                       "regime": {"enum": ["transient", "recurrent"]},
                       "smallk_order": {"type": "integer"},
                       "resolutions_used": {"type": "array", "items": {"type": "integer"}}},
    },
    "simulate": {
        "type": "object", "required": ["mode", "replicas", "seed", "estimates"],
        "properties": {"estimates": {"type": "array", "items": {
            "type": "object", "required": ["quantity", "mean", "standard_error"]}}},
    },
    "intermittency": INTERMITTENCY_SCHEMA,
    "classify": {
        "type": "object", "required": ["first_moment", "second_moment", "intermittency"],
        "properties": {"first_moment": {"type": "array", "items": REGIME_SCHEMA},
                       "second_moment": {"type": "array", "items": SECOND_REGIME_SCHEMA},
                       "intermittency": INTERMITTENCY_SCHEMA},
    },
    "figure1": {
        "type": "object",
        "required": ["msd_ratio", "distinct_ratio", "events", "seed"],
        "properties": {"msd_ratio": _NUM_OR_INF, "distinct_ratio": _NUM},
    },
    "tables": {
        "type": "object", "required": ["tables"],
        "properties": {"tables": {"type": "object"}},
    },
}


# --- output helpers ---------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


class _Writer:
    def __init__(self, out: Path):
        self.out = out
        self.files = []
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name, header, rows):
        path = self.out / name
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.files.append(path)

    def json(self, name, obj, schema_key=None):
        if schema_key is not None:
            jsonschema.validate(obj, REPORT_SCHEMAS[schema_key])
        path = self.out / name
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.files.append(path)
        return obj


def _coord_names(d):
    return [f"x{i}" for i in range(d)]


def _default_ks(cfg):
    if cfg.k is not None:
        return cfg.k
    return ((0.0,) * cfg.lattice.d, (math.pi / 2,) * cfg.lattice.d)


def _default_separations(cfg, kernel):
    if cfg.separations is not None:
        return cfg.separations
    return (tuple(int(c) for c in kernel.offset_array[0]),)


# --- subcommands ------------------------------------------------------------------

def _kernel_info(cfg, w, args):
    kernel = cfg.kernel
    fs = symbol_grid(kernel, cfg.lattice)
    report = {
        "d": kernel.d, "support_size": len(kernel.offsets), "mass": kernel.mass,
        "symmetric": kernel.symmetric, "conjectural": kernel.conjectural,
        "variance": kernel_variance(kernel),
        "effective_diffusion": effective_diffusion(kernel, cfg.rates.kappa, cfg.lattice.h),
        "symbol_at_k": [{"k": list(k), "re": symbol(kernel, k).real, "im": symbol(kernel, k).imag}
                        for k in _default_ks(cfg)],
    }
    w.json("kernel_info.json", report, "kernel-info")
    freqs = np.meshgrid(*cfg.lattice.frequencies(), indexing="ij")
    rows = [[j] + [float(f.flat[j]) for f in freqs] + [float(fs.real.flat[j]), float(fs.imag.flat[j])]
            for j in range(cfg.lattice.size)]
    w.csv("symbol.csv", ["k_index"] + [f"k{i}" for i in range(cfg.lattice.d)] + ["re", "im"], rows)
    w.csv("kernel.csv", _coord_names(kernel.d) + ["weight"],
          [list(z) + [float(a)] for z, a in zip(kernel.offset_array.tolist(), kernel.weight_array)])
    return report


def _moments(cfg, w, args):
    order = args.order or cfg.order
    kernel = cfg.kernel
    lat = cfg.lattice
    coords = lat.coords()
    if order == 1:
        negative = {}
        for t in cfg.times:
            S, I, R = m1_inhomogeneous(kernel, cfg.rates, t, lat)
            rows = [[j] + coords[j].tolist() + [S.values.flat[j], I.values.flat[j], R.values.flat[j]]
                    for j in range(lat.size)]
            w.csv(f"moments1_t{t:g}.csv", ["site_index"] + _coord_names(lat.d) +
                  ["m1_S", "m1_I", "m1_R"], rows)
            negative[f"{t:g}"] = S.negative_sites.tolist()
        regimes, r0, r0m_max = [], None, None
        if cfg.rates.gamma > 0:
            regimes = [classify_first_moment(kernel, cfg.rates, k).to_dict() for k in _default_ks(cfg)]
            r0, _, r0m_max = reproduction_numbers(kernel, cfg.rates, lat)
        report = {"times": list(cfg.times), "regimes": regimes, "R0": r0, "R0m_max": r0m_max,
                  "negative_S_sites": negative}
        return w.json("moments1.json", report, "moments-1")
    seps = _default_separations(cfg, kernel)
    rows = []
    for t in cfg.times:
        m = m2_inhomogeneous(kernel, cfg.rates, t, lat, "same_site", initial=cfg.initial)
        rows.append(["same_site"] + [0] * lat.d + [t, m.value, "II"])
        for v in seps:
            m = m2_inhomogeneous(kernel, cfg.rates, t, lat, "pair", v=v, initial=cfg.initial)
            rows.append(["pair"] + list(v) + [t, m.value, "II"])
    w.csv("moments2.csv", ["kind"] + [f"v{i}" for i in range(lat.d)] +
          ["t", "value", "compartment_pair"], rows)
    report = {"times": list(cfg.times), "initial": cfg.initial,
              "regimes": [classify_second_moment(kernel, cfg.rates, k).to_dict()
                          for k in _default_ks(cfg)]}
    return w.json("moments2.json", report, "moments-2")


def _green(cfg, w, args):
    res = green_function(cfg.kernel, cfg.rates.kappa, cfg.lam, cfg.lattice)
    return w.json("green.json", res.to_dict(), "green")


def _simulate(cfg, w, args):
    kernel = cfg.kernel
    lat = cfg.lattice
    horizon = max(cfg.times + cfg.snapshots)
    state = init_state(lat, cfg.rates, cfg.seed)
    traj = run(state, cfg.rates, kernel, cfg.mode, horizon, cfg.snapshots)
    coords = lat.coords()
    rows = []
    for snap in traj:
        for j in range(lat.size):
            rows.append([snap.clock, j] + coords[j].tolist() + [snap.S[j], snap.I[j], snap.R[j]])
    w.csv("trajectory.csv", ["t", "site_index"] + _coord_names(lat.d) + ["S", "I", "R"], rows)
    estimates = []
    for t in cfg.times:
        pairs = [(s, s) for s in (cfg.sites or [(0,) * lat.d])]
        for v in (cfg.separations or ()):
            pairs.append(((0,) * lat.d, v))
        ests = mc_moments(lat, cfg.rates, kernel, cfg.mode, t, cfg.replicas, cfg.seed,
                          sites=cfg.sites, pairs=pairs)
        estimates += [{"t": t, **e.to_dict()} for e in ests]
    w.csv("mc_estimates.csv", ["t", "quantity", "sites", "mean", "standard_error", "replicas"],
          [[e["t"], e["quantity"], ";".join(",".join(map(str, s)) for s in e["sites"]),
            e["mean"], e["standard_error"], e["replicas"]] for e in estimates])
    report = {"mode": cfg.mode, "replicas": cfg.replicas, "seed": cfg.seed,
              "estimates": estimates}
    return w.json("simulate.json", report, "simulate")


def _intermittency(cfg, w, args):
    space = args.space or cfg.space
    kernel = cfg.kernel
    lattice = None
    if space == "inhomogeneous" and args.n_given:
        lattice = cfg.lattice
    v = _default_separations(cfg, kernel)[0]
    rep = classify_intermittency(cfg.rates, kernel, space, lattice=lattice, v=v)
    pair_col = "ratio_pair_v" + "_".join(str(c) for c in v)
    w.csv("intermittency.csv", ["t", "ratio_same_site", pair_col],
          [[t, a, b] for t, a, b in zip(rep.times, rep.ratio_same_site, rep.ratio_pair)])
    return w.json("intermittency.json", rep.to_dict(), "intermittency")


def _classify(cfg, w, args):
    kernel = cfg.kernel
    report = {
        "first_moment": [classify_first_moment(kernel, cfg.rates, k).to_dict()
                         for k in _default_ks(cfg)],
        "second_moment": [classify_second_moment(kernel, cfg.rates, k).to_dict()
                          for k in _default_ks(cfg)],
        "intermittency": classify_intermittency(cfg.rates, kernel, "homogeneous").to_dict(),
    }
    return w.json("classify.json", report, "classify")


def _figure1(cfg, w, args):
    kw = {}
    if isinstance(cfg.raw.get("kernel"), (dict, str)) and cfg.raw.get("kernel") != "nearest_neighbor":
        kw["nonlocal_kernel"] = cfg.kernel
    res = figure1_experiment(events=cfg.events, seed=cfg.seed, **kw)
    for name in ("nonlocal", "local"):
        grid = res[name].occupancy
        w.csv(f"occupancy_{name}.csv", [f"c{j}" for j in range(grid.shape[1])], grid.tolist())
    far, near = res["nonlocal"], res["local"]
    w.csv("msd.csv", ["events", "msd_nonlocal", "msd_local"],
          [[e, a, b] for e, a, b in zip(far.msd_events, far.msd, near.msd)])
    report = {"events": cfg.events, "seed": cfg.seed,
              "msd_ratio": res["msd_ratio"] if math.isfinite(res["msd_ratio"]) else "infinite",
              "distinct_ratio": res["distinct_ratio"],
              "distinct_sites": {"nonlocal": far.distinct_sites, "local": near.distinct_sites},
              "final_msd": {"nonlocal": far.final_msd, "local": near.final_msd}}
    return w.json("figure1.json", report, "figure1")


def _tables(cfg, w, args):
    from .tables import sweep_tables

    tables = sweep_tables()
    for name, rows in tables.items():
        header = list(rows[0].keys())
        w.csv(f"{name}.csv", header, [[r[h] for h in header] for r in rows])
    report = {"tables": {name: len(rows) for name, rows in tables.items()},
              "table4_feasibility": table4_feasibility()}
    return w.json("tables.json", report, "tables")


HANDLERS = {
    "kernel-info": _kernel_info, "moments": _moments, "green": _green,
    "simulate": _simulate, "intermittency": _intermittency, "classify": _classify,
    "figure1": _figure1, "tables": _tables,
}


def dispatch(cfg: ExperimentConfig, subcommand: str, out, args=None) -> RunRecord:
    """Run one subcommand and write its outputs plus ``manifest.json`` under ``out``."""
    if subcommand not in HANDLERS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    args = args or argparse.Namespace(order=None, space=None, n_given=False)
    validate_for(cfg, subcommand)
    w = _Writer(Path(out))
    start = time.perf_counter()
    HANDLERS[subcommand](cfg, w, args)
    wall = time.perf_counter() - start
    outputs = [{"path": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
               for p in w.files]
    record = RunRecord(subcommand, cfg.digest(), __version__, wall, outputs)
    (Path(out) / "manifest.json").write_text(
        json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return record


# --- entry point ------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latticesir",
                                description="Moments, Green functions and simulation "
                                            "of the lattice SIR model with mobility.")
    p.add_argument("--version", action="version", version=f"latticesir {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default="latticesir_out", help="output directory")
        if name == "moments":
            sp.add_argument("--order", type=int, choices=(1, 2), default=None)
        if name == "simulate":
            sp.add_argument("--mode", choices=MODES, default=None)
            sp.add_argument("--replicas", type=int, default=None)
            sp.add_argument("--seed", type=int, default=None)
            sp.add_argument("--snapshot", default=None,
                            help="comma-separated snapshot times")
        if name == "intermittency":
            sp.add_argument("--space", choices=SPACES, default=None)
        if name == "figure1":
            sp.add_argument("--seed", type=int, default=None)
            sp.add_argument("--events", type=int, default=None)
    return p


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    for flag in ("mode", "replicas", "seed", "events"):
        val = getattr(args, flag, None)
        if val is not None:
            updates[flag] = val
    snap = getattr(args, "snapshot", None)
    if snap:
        try:
            updates["snapshots"] = tuple(float(s) for s in snap.split(",") if s.strip())
        except ValueError as exc:
            raise ConfigValidationError("snapshot", f"cannot parse {snap!r}") from exc
    if not updates:
        return cfg
    raw = dict(cfg.raw)
    raw.update({k: list(v) if isinstance(v, tuple) else v for k, v in updates.items()})
    return build_config(raw)


def _fail(code: int, exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConfigValidationError):
        payload["field"] = exc.field
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        cfg = _apply_flags(cfg, args)
        args.n_given = _n_given(args.config)
        record = dispatch(cfg, args.subcommand, args.out, args)
    except ConfigParseError as exc:
        return _fail(2, exc)
    except ConfigValidationError as exc:
        return _fail(3, exc)
    except (LatticeSIRError, ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        return _fail(1, exc)
    print(json.dumps({"subcommand": record.subcommand, "out": str(args.out),
                      "outputs": [o["path"] for o in record.outputs]}))
    return 0


def _n_given(path) -> bool:
    try:
        return "n" in json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return False


if __name__ == "__main__":
    sys.exit(main())
