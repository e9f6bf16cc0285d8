"""Command-line experiment runner.

Every subcommand reads one JSON config (``--config``), applies ``--set``
overrides, validates the result against :data:`CONFIG_SCHEMA`, then writes
CSV/JSON artifacts named ``<subcommand>-<config hash>-s<seed>`` plus a
manifest holding the fully resolved config.

Exit codes: 0 success, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import jsonschema
import numpy as np

from . import __version__
from .baselines import GoldenbaumConfig
from .numerals import CodecConfig, InvalidConfigError, decode, encode
from .phy import PhyConfig
from .schemes import SCHEMES
from .stats import error_histogram, matched_v_max, mc_bmse, theoretical_bmse, worker_count

SCHEMA_VERSION = 1
MAX_GRID_POINTS = 10_000
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_num = {"type": "number"}
_int = {"type": "integer"}
_pos_int = {"type": "integer", "minimum": 1}


def _obj(props, **extra):
    return {"type": "object", "additionalProperties": False, "properties": props, **extra}


CONFIG_SCHEMA = _obj({
    "codec": _obj({
        "beta": _int,
        "digits": _int,
        "v_max": {"anyOf": [_num, {"const": "matched"}]},
    }),
    "phy": _obj({
        "num_eds": _pos_int,
        "num_antennas": _pos_int,
        "noise_var": {"type": "number", "minimum": 0},
        "symbol_energy": {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "null"}]},
        "num_subcarriers": _pos_int,
        "num_symbols": _pos_int,
        "sync_error_samples": {"type": "integer", "minimum": 0},
        "fft_size": _pos_int,
        "sync_spread": {"type": "number", "minimum": 0},
        "subcarrier_spacing": {"type": "number", "exclusiveMinimum": 0},
        "clip_counts": {"type": "boolean"},
    }),
    "goldenbaum": _obj({"seq_len": _pos_int}),
    "scheme": {"enum": list(SCHEMES)},
    "distribution": {"enum": ["uniform", "gaussian"]},
    "trials": _pos_int,
    "bins": _pos_int,
    "hist_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
    "train": _obj({
        "rounds": _pos_int,
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "batch_size": _pos_int,
        "partition": {"enum": ["homogeneous", "heterogeneous"]},
        "areas": _pos_int,
        "aam_enabled": {"type": "boolean"},
        "aam_alpha": {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "null"}]},
        "aam_v0": {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "null"}]},
        "dataset": {"enum": ["digits", "blobs"]},
        "hidden": {"type": "integer", "minimum": 0},
        "train_per_class": _pos_int,
    }),
    "sweep": _obj({
        "command": {"enum": ["mse", "hist", "train"]},
        "grid": {"type": "object", "additionalProperties": {"type": "array"}},
    }),
})

DEFAULTS = {
    "codec": {"beta": 5, "digits": 2, "v_max": 1.0},
    "phy": {
        "num_eds": 25, "num_antennas": 1, "noise_var": 0.01, "symbol_energy": None,
        "num_subcarriers": 1200, "num_symbols": 1, "sync_error_samples": 0,
        "fft_size": 2048, "sync_spread": 0.0, "subcarrier_spacing": 15e3,
        "clip_counts": False,
    },
    "goldenbaum": {"seq_len": 12},
    "scheme": "balanced",
    "distribution": "uniform",
    "trials": 100_000,
    "bins": 100,
    "hist_range": [-1.0, 1.0],
    "train": {
        "rounds": 300, "learning_rate": 0.05, "momentum": 0.0, "batch_size": 32,
        "partition": "homogeneous", "areas": 5, "aam_enabled": False,
        "aam_alpha": None, "aam_v0": None, "dataset": "digits", "hidden": 32,
        "train_per_class": 125,
    },
    "sweep": {"command": "mse", "grid": {}},
}

MSE_COLUMNS = ["scheme", "beta", "D", "R", "K", "snr_db", "distribution",
               "bmse_sim", "ci", "bmse_theory", "seq_len"]
HIST_COLUMNS = ["scheme", "beta", "D", "R", "K", "seq_len", "bin_left", "bin_right",
                "count", "skewness"]
TRAIN_COLUMNS = ["round", "v_max_used", "loss", "test_accuracy", "gradient_norm",
                 "bmse_proxy"]


class ConfigError(Exception):
    """Bad config; ``path`` is the dotted location of the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# -- config handling --------------------------------------------------------

def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "grid":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply one ``dotted.key=value`` override; the value is parsed as JSON
    when possible and kept as a string otherwise."""
    if "=" not in assignment:
        raise ConfigError("--set", f"expected key=value, got {assignment!r}")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    out = copy.deepcopy(cfg)
    node = out
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot set a field inside a non-object")
    node[parts[-1]] = _parse_value(text)
    return out


def validate(cfg: dict) -> None:
    err = jsonschema.exceptions.best_match(
        jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg))
    if err is not None:
        path = ".".join(str(p) for p in err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path = ".".join([path, extra[0]] if path else [extra[0]])
            raise ConfigError(path, "unknown key")
        raise ConfigError(path, err.message)


def resolve(raw: dict, overrides: Sequence[str] = ()) -> dict:
    """Defaults, then the user config, then overrides; validated."""
    cfg = copy.deepcopy(raw)
    for item in overrides:
        cfg = apply_override(cfg, item)
    validate(cfg)
    return _merge(DEFAULTS, cfg)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def build_codec(cfg: dict) -> CodecConfig:
    c = cfg["codec"]
    try:
        v_max = c["v_max"]
        if v_max == "matched":
            CodecConfig(c["beta"], c["digits"])  # validate beta/digits first
            v_max = matched_v_max(c["beta"], c["digits"])
        return CodecConfig(c["beta"], c["digits"], v_max)
    except InvalidConfigError as e:
        raise ConfigError(f"codec.{e.field}", e.reason) from None


def build_phy(cfg: dict) -> PhyConfig:
    try:
        return PhyConfig(**cfg["phy"])
    except ValueError as e:
        raise ConfigError("phy", str(e)) from None


def build_goldenbaum(cfg: dict, v_max: float) -> GoldenbaumConfig:
    return GoldenbaumConfig(cfg["goldenbaum"]["seq_len"], v_max)


def build_feel(cfg: dict):
    from .feel import FeelConfig

    t = cfg["train"]
    codec, phy = build_codec(cfg), build_phy(cfg)
    try:
        return FeelConfig(num_eds=phy.num_eds, scheme=cfg["scheme"], codec=codec, phy=phy,
                          goldenbaum=build_goldenbaum(cfg, codec.v_max), **t)
    except ValueError as e:
        raise ConfigError("train", str(e)) from None


# -- formatting -------------------------------------------------------------

def fmt(x) -> str:
    """Cell text: reals with 17 significant digits, ``None`` as empty."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_text(columns: Sequence[str], rows: Sequence[dict], provenance: dict) -> str:
    buf = io.StringIO()
    for key in ("schema_version", "config_hash", "seed"):
        buf.write(f"# {key}={provenance[key]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- subcommand bodies ------------------------------------------------------

def mse_rows(cfg: dict, seed: int) -> List[dict]:
    codec, phy = build_codec(cfg), build_phy(cfg)
    scheme = cfg["scheme"]
    gold = build_goldenbaum(cfg, codec.v_max)
    est = mc_bmse(scheme, codec, phy, cfg["distribution"], cfg["trials"], seed, gold, workers=1)
    theory = theoretical_bmse(codec, phy).total if scheme == "balanced" else None
    if scheme == "ideal":
        theory = 0.0
    return [{
        "scheme": scheme, "beta": codec.beta, "D": codec.digits, "R": phy.num_antennas,
        "K": phy.num_eds, "snr_db": phy.snr_db, "distribution": cfg["distribution"],
        "bmse_sim": est.mean, "ci": est.ci_halfwidth, "bmse_theory": theory,
        "seq_len": gold.seq_len if scheme == "goldenbaum" else None,
    }]


def hist_rows(cfg: dict, seed: int) -> List[dict]:
    codec, phy = build_codec(cfg), build_phy(cfg)
    scheme = cfg["scheme"]
    gold = build_goldenbaum(cfg, codec.v_max)
    h = error_histogram(scheme, codec, phy, cfg["distribution"], cfg["trials"], cfg["bins"],
                        seed, gold, tuple(cfg["hist_range"]), workers=1)
    base = {"scheme": scheme, "beta": codec.beta, "D": codec.digits, "R": phy.num_antennas,
            "K": phy.num_eds, "seq_len": gold.seq_len if scheme == "goldenbaum" else None,
            "skewness": h.skewness}
    return [dict(base, bin_left=h.edges[i], bin_right=h.edges[i + 1], count=int(h.counts[i]))
            for i in range(len(h.counts))]


def train_rows(cfg: dict, seed: int):
    from .feel import train

    traces = train(build_feel(cfg), seed)
    rows = [asdict(t) for t in traces]
    tail = traces[-max(1, len(traces) // 10):]
    summary = {
        "final_accuracy": traces[-1].test_accuracy,
        "final_loss": traces[-1].loss,
        "tail_accuracy": float(np.mean([t.test_accuracy for t in tail])),
        "tail_loss": float(np.mean([t.loss for t in tail])),
        "rounds": len(traces),
    }
    return rows, summary


COLUMNS = {"mse": MSE_COLUMNS, "hist": HIST_COLUMNS, "train": TRAIN_COLUMNS}


def run_point(command: str, cfg: dict, seed: int):
    """Rows (and a summary for ``train``) for one resolved config."""
    if command == "mse":
        return mse_rows(cfg, seed), None
    if command == "hist":
        return hist_rows(cfg, seed), None
    return train_rows(cfg, seed)


def _point_job(args):
    command, cfg, seed = args
    return run_point(command, cfg, seed)


def grid_points(grid: Dict[str, list]) -> List[Dict[str, object]]:
    """Cartesian product in key order; an empty grid has no points."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        return []
    n = math.prod(len(v) for v in grid.values())
    if n > MAX_GRID_POINTS:
        raise ConfigError("sweep.grid", f"{n} points exceed the limit of {MAX_GRID_POINTS}")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def point_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=(index,)).generate_state(1)[0])


# -- driver -----------------------------------------------------------------

class Run:
    def __init__(self, command: str, cfg: dict, seed: int, out: Path):
        self.command, self.cfg, self.seed, self.out = command, cfg, seed, out
        self.hash = config_hash(cfg)
        self.stem = f"{command}-{self.hash}-s{seed}"
        self.files: List[str] = []

    @property
    def provenance(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "config_hash": self.hash, "seed": self.seed}

    def emit(self, name: str, text: str) -> None:
        _write(self.out / name, text)
        self.files.append(name)

    def finish(self) -> Path:
        manifest = dict(self.provenance, command=self.command, config=self.cfg,
                        artifacts=self.files, version=__version__)
        path = self.out / f"{self.stem}.manifest.json"
        _write(path, _json_text(manifest))
        return path


def _codec_from_flags(cfg: dict, args) -> dict:
    over = {k: v for k, v in (("beta", args.beta), ("digits", args.digits),
                              ("v_max", args.vmax)) if v is not None}
    return _merge(cfg, {"codec": over}) if over else cfg


def cmd_encode(cfg: dict, args) -> int:
    cfg = _codec_from_flags(cfg, args)
    codec = build_codec(cfg)
    if args.v is None:
        raise ConfigError("v", "encode needs --v")
    numerals = [int(x) for x in encode(args.v, codec)]
    print(json.dumps({"numerals": numerals}, separators=(",", ":")))
    if args.out is not None:
        run = Run("encode", cfg, args.seed, Path(args.out))
        row = {"v": args.v, **{f"x{i}": x for i, x in enumerate(numerals)}}
        cols = ["v"] + [f"x{i}" for i in range(len(numerals))]
        run.emit(f"{run.stem}.csv", csv_text(cols, [row], run.provenance))
        run.finish()
    return EXIT_OK


def cmd_decode(cfg: dict, args) -> int:
    cfg = _codec_from_flags(cfg, args)
    codec = build_codec(cfg)
    if args.numerals is None:
        raise ConfigError("numerals", "decode needs --numerals")
    try:
        x = [float(t) for t in args.numerals.split(",")]
    except ValueError:
        raise ConfigError("numerals", "expected comma-separated numbers") from None
    try:
        value = float(decode(np.asarray(x), codec))
    except ValueError as e:
        raise ConfigError("numerals", str(e)) from None
    print(json.dumps({"value": value}, separators=(",", ":")))
    if args.out is not None:
        run = Run("decode", cfg, args.seed, Path(args.out))
        run.emit(f"{run.stem}.csv", csv_text(["numerals", "value"],
                                             [{"numerals": args.numerals, "value": value}],
                                             run.provenance))
        run.finish()
    return EXIT_OK


def cmd_simple(command: str, cfg: dict, args) -> int:
    build_codec(cfg), build_phy(cfg)  # fail early with a config error
    if command == "train":
        build_feel(cfg)
    run = Run(command, cfg, args.seed, Path(args.out or "boac-out"))
    rows, summary = run_point(command, cfg, args.seed)
    run.emit(f"{run.stem}.csv", csv_text(COLUMNS[command], rows, run.provenance))
    if summary is not None:
        run.emit(f"{run.stem}.summary.json",
                 _json_text(dict(run.provenance, **summary, config=cfg)))
    print(run.finish())
    return EXIT_OK


def cmd_sweep(cfg: dict, args) -> int:
    command = cfg["sweep"]["command"]
    points = grid_points(cfg["sweep"]["grid"])
    if not points:
        print("empty grid: nothing to do")
        return EXIT_OK
    resolved = []
    for i, p in enumerate(points):
        pc = copy.deepcopy(cfg)
        pc.pop("sweep")
        for key, value in p.items():
            try:
                pc = apply_override(pc, f"{key}={json.dumps(value)}")
                validate(pc)
            except ConfigError as e:
                raise ConfigError(f"sweep.grid.{key}", str(e)) from None
        build_codec(pc), build_phy(pc)
        if command == "train":
            build_feel(pc)
        resolved.append((command, pc, point_seed(args.seed, i)))
    run = Run("sweep", cfg, args.seed, Path(args.out or "boac-out"))
    workers = worker_count()
    if workers > 1 and len(resolved) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_point_job, resolved))
    else:
        results = [_point_job(j) for j in resolved]
    keys = list(cfg["sweep"]["grid"])
    combined = []
    for i, ((_, pc, pseed), (rows, summary)) in enumerate(zip(resolved, results)):
        prov = {"schema_version": SCHEMA_VERSION, "config_hash": config_hash(pc), "seed": pseed}
        name = f"{run.stem}/point-{i:05d}-{prov['config_hash']}-s{pseed}.csv"
        run.emit(name, csv_text(COLUMNS[command], rows, prov))
        if summary is not None:
            run.emit(name[:-4] + ".summary.json", _json_text(dict(prov, **summary, config=pc)))
        for r in rows:
            combined.append(dict(r, point=i, point_seed=pseed,
                                 **{k: points[i][k] for k in keys}))
    cols = ["point", "point_seed"] + [k for k in keys if k not in COLUMNS[command]] \
        + COLUMNS[command]
    run.emit(f"{run.stem}.csv", csv_text(cols, combined, run.provenance))
    print(run.finish())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boac", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("encode", "print the balanced numerals of one value"),
        ("decode", "print the value of a numeral sequence"),
        ("mse", "Monte-Carlo and closed-form aggregation error"),
        ("hist", "histogram and skewness of the aggregation error"),
        ("train", "federated training over the simulated uplink"),
        ("sweep", "run mse/hist/train over a cartesian grid of overrides"),
    ]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", help="output directory")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. codec.beta=7")
        if name in ("encode", "decode"):
            s.add_argument("--beta", type=int)
            s.add_argument("--digits", type=int)
            s.add_argument("--vmax", type=float)
        if name == "encode":
            s.add_argument("--v", type=float)
        if name == "decode":
            s.add_argument("--numerals", help="comma-separated, most significant first")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            try:
                raw = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError("--config", str(e)) from None
            if not isinstance(raw, dict):
                raise ConfigError("--config", "top level must be an object")
        cfg = resolve(raw, args.set)
        if args.command == "encode":
            return cmd_encode(cfg, args)
        if args.command == "decode":
            return cmd_decode(cfg, args)
        if args.command == "sweep":
            return cmd_sweep(cfg, args)
        return cmd_simple(args.command, cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - any failure past validation is a runtime error
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
