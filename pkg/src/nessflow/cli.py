"""Config-driven command line front end.

A run is described by a TOML file::

    command = "iv-sweep"

    [junction]            # d, g, xi, res_I, res_II, kernel1, kernel2
    d = 3
    [junction.res_I]
    beta = 1.0
    mu = 1.0
    [junction.res_II]
    beta = 1.0
    mu = 1.0
    [junction.kernel1]
    family = "gaussian"   # gaussian | lorentzian | poly_cutoff | table (with csv = "path")
    amp = 1.0
    width = 1.0

    [quadrature]          # any QuadratureConfig field
    rel_tol = 1e-10

    [options]             # command-specific, see OPTIONS
    mu = 1.0

    [[sweep]]             # zero or more axes; rows are their cartesian product
    path = "options.dmu"
    start = -0.1
    stop = 0.1
    count = 11
    spacing = "linear"    # or "log"

    [output]
    path = "iv.csv"
    format = "csv"        # or "json"

Every output row starts with the full resolved parameter set (dotted
column names) followed by the command's result columns.  Floats are written
with 17 significant digits so identical configs give identical bytes.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import math
import re
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import oracle, transport
from .dyson import certify, interaction_norm
from .errors import ConfigError, NessflowError, ParseError, ValidationError
from .model import JunctionSpec, PairFormFactor, RadialFormFactor, ReservoirState
from .quadrature import QuadratureConfig

COMMANDS = (
    "currents",
    "iv-sweep",
    "resistance-curve",
    "onsager",
    "entropy-grid",
    "thermal-power",
    "certify",
    "oracle",
)
FORMATS = ("csv", "json")
SCHEMA_VERSION = 1

JUNCTION_DEFAULTS = {
    "d": 3,
    "g": 1.0,
    "xi": 1.0,
    "res_I": {"beta": 1.0, "mu": 1.0},
    "res_II": {"beta": 1.0, "mu": 1.0},
}
KERNEL_KEYS = {
    "gaussian": ("amp", "width"),
    "lorentzian": ("amp", "width", "power"),
    "poly_cutoff": ("amp", "cutoff", "power"),
    "table": ("amp", "csv"),
}
PAIR_KERNEL_KEYS = {"gaussian": ("amp", "width"), "lorentzian": ("amp", "width", "power")}

OPTIONS = {
    "currents": {},
    "iv-sweep": {"mu": 1.0, "dmu": 0.0},
    "resistance-curve": {"mu": 1.0, "T": 1.0, "sommerfeld": True},
    "onsager": {"beta": 1.0, "nu": 1.0, "h": 1e-3},
    "entropy-grid": {},
    "thermal-power": {},
    "certify": {"truncation": 40, "blocks": 1, "m_max": 10, "m0": 3},
    "oracle": {
        "n_I": 200,
        "n_II": 200,
        "g": 0.04,
        "hopping": 1.0,
        "onsite": 2.0,
        "width": 1,
        "t_max": 150.0,
        "dt": 0.5,
        "window_start": 30.0,
        "window_stop": 150.0,
        "probes": 0,
    },
}


@dataclass
class SweepAxis:
    path: str
    start: float
    stop: float
    count: int
    spacing: str = "linear"

    def values(self) -> list:
        if self.count == 1:
            return [float(self.start)]
        if self.spacing == "log":
            return [float(x) for x in np.geomspace(self.start, self.stop, self.count)]
        return [float(x) for x in np.linspace(self.start, self.stop, self.count)]


@dataclass
class RunConfig:
    command: str
    junction: dict
    quadrature: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)
    output_path: str | None = None
    output_format: str = "csv"

    def resolved(self) -> dict:
        return {"junction": self.junction, "quadrature": self.quadrature, "options": self.options}


def _reject_unknown(table: dict, allowed, where: str):
    for key in table:
        if key not in allowed:
            name = f"{where}.{key}" if where else key
            raise ValidationError(f"unknown key {name!r}", field=name)


def _number(value, name: str, integer: bool = False, positive: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number, got {value!r}", field=name)
    if integer and int(value) != value:
        raise ValidationError(f"{name} must be an integer", field=name)
    if positive and not value > 0:
        raise ValidationError(f"{name} must be positive", field=name)
    return int(value) if integer else float(value)


def _check_reservoir(raw: dict, where: str) -> dict:
    _reject_unknown(raw, ("beta", "mu"), where)
    out = {**{"beta": 1.0, "mu": 1.0}, **raw}
    if out["beta"] == "inf":
        out["beta"] = math.inf
    out["beta"] = _number(out["beta"], f"{where}.beta", positive=True)
    out["mu"] = _number(out["mu"], f"{where}.mu")
    return out


def _check_kernel(raw: dict, where: str, families: dict) -> dict:
    family = raw.get("family", "gaussian")
    if family not in families:
        raise ValidationError(f"{where}.family must be one of {sorted(families)}", field=f"{where}.family")
    _reject_unknown(raw, ("family",) + families[family], where)
    out = {"family": family}
    for key in families[family]:
        if key == "csv":
            if "csv" not in raw:
                raise ValidationError(f"{where}.csv is required for table kernels", field=f"{where}.csv")
            out["csv"] = str(raw["csv"])
        elif key in raw:
            out[key] = _number(raw[key], f"{where}.{key}")
    return out


def _check_junction(raw: dict, command: str) -> dict:
    _reject_unknown(raw, ("d", "g", "xi", "res_I", "res_II", "kernel1", "kernel2"), "junction")
    j = copy.deepcopy(JUNCTION_DEFAULTS)
    j["d"] = _number(raw.get("d", j["d"]), "junction.d", integer=True, positive=True)
    j["g"] = _number(raw.get("g", j["g"]), "junction.g")
    j["xi"] = _number(raw.get("xi", j["xi"]), "junction.xi")
    for r in ("res_I", "res_II"):
        sub = raw.get(r, {})
        if not isinstance(sub, dict):
            raise ValidationError(f"junction.{r} must be a table", field=f"junction.{r}")
        j[r] = _check_reservoir(sub, f"junction.{r}")
    if "kernel1" in raw:
        j["kernel1"] = _check_kernel(raw["kernel1"], "junction.kernel1", KERNEL_KEYS)
    if "kernel2" in raw:
        j["kernel2"] = _check_kernel(raw["kernel2"], "junction.kernel2", PAIR_KERNEL_KEYS)
    # defaults: the Gaussian family for whichever kernel the command needs
    if command == "thermal-power":
        j.setdefault("kernel2", {"family": "gaussian"})
    elif "kernel1" not in j:
        j["kernel1"] = {"family": "gaussian"}
    if command == "certify" and j["kernel1"]["family"] != "gaussian":
        # only the Gaussian family has a closed-form position-space kernel
        raise ValidationError("certify needs a gaussian kernel1", field="junction.kernel1.family")
    for name, keys in (("kernel1", KERNEL_KEYS), ("kernel2", PAIR_KERNEL_KEYS)):
        if name in j and j[name]["family"] != "table":
            defaults = (RadialFormFactor if name == "kernel1" else PairFormFactor)(j[name]["family"]).params
            j[name] = {"family": j[name]["family"], **{k: j[name].get(k, defaults[k]) for k in keys[j[name]["family"]]}}
            cls = RadialFormFactor if name == "kernel1" else PairFormFactor
            params = {k: v for k, v in j[name].items() if k != "family"}
            try:
                cls(j[name]["family"], params)
            except ValueError as exc:
                raise ValidationError(f"junction.{name}: {exc}", field=f"junction.{name}") from None
    return j


def _check_options(raw: dict, command: str) -> dict:
    schema = OPTIONS[command]
    _reject_unknown(raw, schema, "options")
    out = dict(schema)
    for key, default in schema.items():
        if key not in raw:
            continue
        name = f"options.{key}"
        if isinstance(default, bool):
            if not isinstance(raw[key], bool):
                raise ValidationError(f"{name} must be true or false", field=name)
            out[key] = raw[key]
        else:
            out[key] = _number(raw[key], name, integer=isinstance(default, int))
    return out


def _check_quadrature(raw: dict) -> dict:
    names = [f.name for f in fields(QuadratureConfig)]
    _reject_unknown(raw, names, "quadrature")
    out = {f.name: f.default for f in fields(QuadratureConfig)}
    for key, val in raw.items():
        out[key] = _number(val, f"quadrature.{key}", integer=isinstance(out[key], int))
    try:
        QuadratureConfig(**out)
    except ValueError as exc:
        raise ValidationError(f"quadrature: {exc}", field="quadrature") from exc
    return out


def _lookup(tree: dict, path: str):
    node = tree
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise KeyError(path)
        node = node[part]
    return node


def _assign(tree: dict, path: str, value):
    parts = path.split(".")
    node = tree
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value


def _check_sweep(raw, resolved: dict) -> list:
    if isinstance(raw, dict):
        raw = [raw]
    if not isinstance(raw, list):
        raise ValidationError("sweep must be an array of tables", field="sweep")
    axes = []
    for i, ax in enumerate(raw):
        where = f"sweep[{i}]"
        _reject_unknown(ax, ("path", "start", "stop", "count", "spacing"), where)
        for key in ("path", "start", "stop", "count"):
            if key not in ax:
                raise ValidationError(f"{where}.{key} is required", field=f"{where}.{key}")
        path = str(ax["path"])
        try:
            current = _lookup(resolved, path)
        except KeyError:
            raise ValidationError(f"{where}.path {path!r} does not name a parameter", field=f"{where}.path") from None
        if isinstance(current, (dict, str, bool)):
            raise ValidationError(f"{where}.path {path!r} is not numeric", field=f"{where}.path")
        count = _number(ax["count"], f"{where}.count", integer=True)
        if count < 1:
            raise ValidationError(f"{where}.count must be >= 1", field=f"{where}.count")
        spacing = ax.get("spacing", "linear")
        if spacing not in ("linear", "log"):
            raise ValidationError(f"{where}.spacing must be linear or log", field=f"{where}.spacing")
        start = _number(ax["start"], f"{where}.start")
        stop = _number(ax["stop"], f"{where}.stop")
        if spacing == "log" and not (start > 0 and stop > 0):
            raise ValidationError(f"{where}: log spacing needs positive bounds", field=f"{where}.start")
        axes.append(SweepAxis(path, start, stop, count, spacing))
    return axes


_LINE_COL = re.compile(r"\(at line (\d+), column (\d+)\)")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run description, filling defaults."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LINE_COL.search(str(exc))
        msg = _LINE_COL.sub("", str(exc)).strip()
        if m:
            raise ParseError(msg, int(m.group(1)), int(m.group(2))) from None
        raise ParseError(msg) from None
    _reject_unknown(raw, ("command", "junction", "quadrature", "options", "sweep", "output"), "")
    if "command" not in raw:
        raise ValidationError("command is required", field="command")
    command = raw["command"]
    if command not in COMMANDS:
        raise ValidationError(f"command must be one of {COMMANDS}, got {command!r}", field="command")
    if "junction" not in raw or not isinstance(raw["junction"], dict):
        raise ValidationError("a [junction] table is required", field="junction")
    junction = _check_junction(raw["junction"], command)
    quadrature = _check_quadrature(raw.get("quadrature", {}))
    options = _check_options(raw.get("options", {}), command)
    resolved = {"junction": junction, "quadrature": quadrature, "options": options}
    sweep = _check_sweep(raw.get("sweep", []), resolved)
    out = raw.get("output", {})
    _reject_unknown(out, ("path", "format"), "output")
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ValidationError(f"output.format must be csv or json, got {fmt!r}", field="output.format")
    return RunConfig(command, junction, quadrature, options, sweep, out.get("path"), fmt)


# --- building domain objects -------------------------------------------------


def _kernel1(spec: dict, base: Path):
    params = {k: v for k, v in spec.items() if k not in ("family", "csv")}
    if spec["family"] == "table":
        path = Path(spec["csv"])
        try:
            return RadialFormFactor.from_csv(path if path.is_absolute() else base / path, **params)
        except (OSError, ValueError) as exc:
            raise ValidationError(f"junction.kernel1.csv: {exc}", field="junction.kernel1.csv") from None
    return RadialFormFactor(spec["family"], params)


def _junction(j: dict, base: Path) -> JunctionSpec:
    k1 = _kernel1(j["kernel1"], base) if "kernel1" in j else None
    k2 = PairFormFactor(j["kernel2"]["family"], {k: v for k, v in j["kernel2"].items() if k != "family"}) if "kernel2" in j else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return JunctionSpec(
            j["d"],
            ReservoirState(**j["res_I"]),
            ReservoirState(**j["res_II"]),
            k1,
            k2,
            j["g"],
            j["xi"],
        )


def _cmd_currents(p, base, rng):
    r = transport.currents(_junction(p["junction"], base), QuadratureConfig(**p["quadrature"]))
    return {"J22": r.J22, "P22": r.P22, "E22": r.E22}


def _cmd_iv(p, base, rng):
    o = p["options"]
    j = copy.deepcopy(p["junction"])
    j["res_I"]["mu"] = o["mu"] + 0.5 * o["dmu"]
    j["res_II"]["mu"] = o["mu"] - 0.5 * o["dmu"]
    spec = _junction(j, base)
    cfg = QuadratureConfig(**p["quadrature"])
    return {
        "mu_I": spec.res_I.mu,
        "mu_II": spec.res_II.mu,
        "J22": transport.particle_current_J22(spec, cfg),
        "P22": transport.energy_current_P22(spec, cfg),
    }


def _cmd_resistance(p, base, rng):
    o = p["options"]
    j = p["junction"]
    kernel = _kernel1(j["kernel1"], base)
    beta = math.inf if o["T"] == 0 else 1.0 / o["T"]
    cfg = QuadratureConfig(**p["quadrature"])
    R = transport.resistance(o["mu"], beta, kernel, cfg, d=j["d"], g=j["g"], xi=j["xi"])
    row = {"beta": beta, "R": R}
    if o["sommerfeld"]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                Rs = transport.resistance_sommerfeld(o["mu"], beta, kernel, d=j["d"]) / (j["g"] * j["xi"]) ** 2
            except NessflowError:
                Rs = math.nan
        row["R_sommerfeld"] = Rs
    return row


def _cmd_onsager(p, base, rng):
    o = p["options"]
    j = p["junction"]
    res = transport.onsager_check(
        o["beta"], o["nu"], _kernel1(j["kernel1"], base), o["h"], QuadratureConfig(**p["quadrature"]), d=j["d"]
    )
    return {
        "dP_dDnu": res.dP_dDnu,
        "minus_dJ_dDbeta": res.minus_dJ_dDbeta,
        "gap": res.gap,
        "relative_gap": res.relative_gap,
        "error_estimate": res.error_estimate,
    }


def _cmd_entropy(p, base, rng):
    spec = _junction(p["junction"], base)
    cfg = QuadratureConfig(**p["quadrature"])
    aff_beta, aff_mu = transport.entropy_affinities(spec)
    return {"E22": transport.entropy_rate_E22(spec, cfg), "affinity_beta": aff_beta, "affinity_betamu": aff_mu}


def _cmd_thermal(p, base, rng):
    spec = _junction(p["junction"], base)
    cfg = QuadratureConfig(**p["quadrature"])
    return {"P24": transport.thermal_power_P24(spec, cfg)}


def _cmd_certify(p, base, rng):
    o = p["options"]
    j = p["junction"]
    kernel = _kernel1(j["kernel1"], base)
    norm = interaction_norm(kernel, j["d"], truncation=o["truncation"], blocks=o["blocks"])
    norm = norm.scaled(abs(j["g"] * j["xi"]))
    cert = certify(norm)
    row = {"norm": cert.norm, "x": cert.x, "converges": cert.converges}
    for m, b in cert.term_bounds(o["m_max"]):
        row[f"bound_m{m}"] = b
    tail = cert.tail_bound(o["m0"])
    row["tail"] = math.nan if tail is None else tail
    return row


def _cmd_oracle(p, base, rng):
    o = p["options"]
    j = p["junction"]
    lat = oracle.build_junction(o["n_I"], o["n_II"], o["g"], o["hopping"], o["onsite"], o["width"])
    rI, rII = ReservoirState(**j["res_I"]), ReservoirState(**j["res_II"])
    rec = oracle.run(lat, rI, rII, o["t_max"], o["dt"])
    plat = oracle.plateau_current(rec, (o["window_start"], o["window_stop"]))
    ent = oracle.entropy_check(rec, rI, rII)
    row = {
        "J_plateau": plat.J,
        "J_std": plat.J_std,
        "P_plateau": plat.P,
        "P_std": plat.P_std,
        "entropy_average": ent.average,
        "entropy_nonnegative": ent.nonnegative,
        "max_current_sum": float(np.max(np.abs(rec.J_I + rec.J_II))),
        "particle_drift": float(np.ptp(rec.N_total) / abs(rec.N_total[0])),
        "energy_drift": float(np.ptp(rec.E_total) / max(abs(rec.E_total[0]), 1e-300)),
        "spectrum_min": float(np.nanmin(rec.spectrum_min)),
        "spectrum_max": float(np.nanmax(rec.spectrum_max)),
    }
    if o["probes"]:
        worst = 0.0
        for _ in range(o["probes"]):
            c = oracle.currents(lat, oracle.random_correlation(rng, lat.n))
            worst = max(worst, abs(c.J_I + c.J_II))
        row["probe_max_current_sum"] = worst
    return row


HANDLERS = {
    "currents": _cmd_currents,
    "iv-sweep": _cmd_iv,
    "resistance-curve": _cmd_resistance,
    "onsager": _cmd_onsager,
    "entropy-grid": _cmd_entropy,
    "thermal-power": _cmd_thermal,
    "certify": _cmd_certify,
    "oracle": _cmd_oracle,
}


def _flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for key, val in tree.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        else:
            out[name] = val
    return out


def sweep_points(config: RunConfig) -> list:
    """Resolved parameter trees, one per point of the sweep grid, in sweep order."""
    base = config.resolved()
    if not config.sweep:
        return [copy.deepcopy(base)]
    points = []
    for combo in itertools.product(*(ax.values() for ax in config.sweep)):
        p = copy.deepcopy(base)
        for ax, val in zip(config.sweep, combo):
            current = _lookup(p, ax.path)
            _assign(p, ax.path, int(round(val)) if isinstance(current, int) else val)
        points.append(p)
    return points


def execute(config: RunConfig, threads: int = 1, seed: int = 0, base_dir: Path | None = None) -> list:
    """Run every sweep point and return the rows in sweep order."""
    base_dir = base_dir or Path.cwd()
    handler = HANDLERS[config.command]
    points = sweep_points(config)
    seeds = np.random.SeedSequence(seed).spawn(len(points))

    def one(args):
        p, ss = args
        result = handler(p, base_dir, np.random.default_rng(ss))
        return {**_flatten(p), **result}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, zip(points, seeds)))
    return [one(a) for a in zip(points, seeds)]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _jsonable(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else _fmt(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def render(rows: list, fmt: str) -> str:
    """Serialize rows as CSV (header + one line per row) or a JSON array of records."""
    if fmt == "json":
        records = [{k: _jsonable(v) for k, v in row.items()} for row in rows]
        return json.dumps({"schema": SCHEMA_VERSION, "rows": records}, indent=1) + "\n"
    buf = io.StringIO()
    columns = list(rows[0]) if rows else []
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def _error_record(exc: BaseException, code: int) -> str:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("line", "column", "field"):
        if getattr(exc, attr, None) is not None:
            record[attr] = getattr(exc, attr)
    return json.dumps(record, sort_keys=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nessflow", description="Steady-state junction transport calculator")
    ap.add_argument("--config", required=True, type=Path, help="TOML run description")
    ap.add_argument("--out", type=Path, help="output file (overrides output.path; default stdout)")
    ap.add_argument("--format", choices=FORMATS, help="output format (overrides output.format)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized oracle probes")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        config = parse_config(text)
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1", field="threads")
        rows = execute(config, args.threads, args.seed, args.config.resolve().parent)
    except NessflowError as exc:
        print(_error_record(exc, exc.exit_code), file=sys.stderr)
        return exc.exit_code
    fmt = args.format or config.output_format
    out = args.out or (Path(config.output_path) if config.output_path else None)
    if out is not None and not out.is_absolute() and args.out is None:
        out = args.config.resolve().parent / out
    text = render(rows, fmt)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
    if config.command == "certify" and not all(r["converges"] for r in rows):
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
