"""Command-line scenario runner.

    tempologic run CONFIG [--seed N] [--out DIR] [--set NAME=VALUE ...]
    tempologic sweep CONFIG --param NAME --from A --to B --steps K
    tempologic schema

CONFIG is a JSON file, or the name of a bundled scenario (``tempologic list``).
Exit status: 0 success, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, kernels
from .engine import format_float, trace_to_csv
from .scenarios import (SWEEPABLE, ConfigError, ScenarioResult, build_scenario,
                        with_parameter)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
OUT_ENV = "TEMPOLOGIC_OUT"


def load_schema() -> dict:
    return json.loads(resources.files("tempologic").joinpath("schema.json").read_text())


def bundled_scenarios() -> list[str]:
    root = resources.files("tempologic").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _resolve_config_path(name: str):
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("tempologic").joinpath("scenarios", f"{name}.json")
    if not name.endswith(".json") and bundled.is_file():
        return bundled
    raise ConfigError(f"config {name!r} not found (bundled: {', '.join(bundled_scenarios())})")


def load_config(name: str) -> dict:
    path = _resolve_config_path(name)
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{name}: invalid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, raw = item.partition("=")
        if not sep or not name:
            raise ConfigError(f"--set expects NAME=VALUE, got {item!r}")
        try:
            out[name] = json.loads(raw)
        except json.JSONDecodeError:
            out[name] = raw
    return out


# ---------------------------------------------------------------------------
# output formatting
# ---------------------------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_cell(v) for v in value)
    return str(value)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(value.item())
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _header(cfg: dict, seed: int) -> list[str]:
    return [f"tempologic scenario={cfg['scenario']} units.length={cfg['units']['length']} "
            f"units.time=s seed={seed}"]


def table_csv(columns, rows, header) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def manifest(cfg: dict, seed: int, outputs) -> dict:
    return {
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "seed": seed,
        "units": {"length": cfg["units"]["length"], "time": "s"},
        "outputs": sorted(outputs),
        "versions": {
            "tempologic": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "kernel_backend": kernels.BACKEND,
        },
    }


def render_run(cfg: dict, seed: int, result: ScenarioResult) -> dict[str, str]:
    header = _header(cfg, seed)
    files = {
        "trace.csv": trace_to_csv(result.trace, header),
        "summary.csv": table_csv(result.columns, result.rows, header),
        "summary.json": _dumps({"scenario": cfg["scenario"], "seed": seed,
                                "units": {"length": cfg["units"]["length"], "time": "s"},
                                "summary": result.summary, "rows": result.rows}),
    }
    for name, text in result.extra_files.items():
        if name.endswith(".csv"):
            text = "".join(f"# {h}\n" for h in header) + text
        files[name] = text
    files["manifest.json"] = _dumps(manifest(cfg, seed, list(files) + ["manifest.json"]))
    return files


def _write_all(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text, encoding="utf-8")


def _out_dir(cli_out, cfg: dict) -> Path:
    if cli_out:
        return Path(cli_out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    return Path(cfg.get("output", {}).get("dir", "tempologic-out"))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def prepare(config: str, seed=None, overrides=None) -> tuple[dict, int]:
    cfg = load_config(config)
    for name, value in (overrides or {}).items():
        cfg = with_parameter(cfg, name, value)
    if seed is not None:
        cfg["seed"] = int(seed)
    seed = int(cfg.get("seed", 0))
    cfg["seed"] = seed
    validate_config(cfg)
    return cfg, seed


def run_config(cfg: dict, seed: int) -> dict[str, str]:
    """Run a validated config; returns rendered output files by name."""
    runner = build_scenario(cfg, seed)
    result = runner()
    if result.trace.error:
        raise RuntimeError(result.trace.error)
    return render_run(cfg, seed, result)


def cmd_run(args) -> int:
    cfg, seed = prepare(args.config, args.seed, _parse_set(args.set))
    runner = build_scenario(cfg, seed)
    try:
        result = runner()
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001
        print(f"error: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if result.trace.error:
        print(f"error: run aborted: {result.trace.error}", file=sys.stderr)
        return EXIT_RUNTIME
    files = render_run(cfg, seed, result)
    out = _out_dir(args.out, cfg)
    _write_all(out, files)
    print(f"{cfg['scenario']}: wrote {len(files)} files to {out}")
    return EXIT_OK


def sweep_values(lo: float, hi: float, steps: int, integer: bool) -> list:
    if steps < 1:
        raise ConfigError("--steps must be >= 1")
    values = [lo] if steps == 1 else list(np.linspace(lo, hi, steps))
    if integer:
        return sorted({int(round(v)) for v in values})
    return sorted(float(v) for v in values)


def run_sweep(cfg: dict, seed: int, param: str, values) -> tuple[list[str], list[dict], dict]:
    kind = cfg["scenario"]
    rows = []
    for value in values:
        point = with_parameter(cfg, param, value)
        result = build_scenario(point, seed)()
        if result.trace.error:
            raise RuntimeError(result.trace.error)
        rows.append({param: value, **result.scalars()})
    rows.sort(key=lambda r: r[param])
    columns = [param] + sorted({k for r in rows for k in r if k != param})
    extra = {}
    if kind == "efficiency-sweep" and param == "transfer_fraction":
        targets = cfg.get("parameters", {}).get("target_ratios", [10, 100, 250, 1000])
        extra["thresholds"] = {
            str(t): next((r[param] for r in rows if r.get("ratio", 0) >= t), None)
            for t in targets}
    if len(rows) >= 2:
        xs = np.array([r[param] for r in rows], dtype=float)
        for key in columns[1:]:
            ys = [r.get(key) for r in rows]
            if all(isinstance(y, (int, float)) and not isinstance(y, bool)
                   and math.isfinite(y) for y in ys):
                extra.setdefault("slopes", {})[key] = float(np.polyfit(xs, np.asarray(ys, float), 1)[0])
    return columns, rows, extra


def cmd_sweep(args) -> int:
    cfg, seed = prepare(args.config, args.seed, _parse_set(args.set))
    allowed = SWEEPABLE.get(cfg["scenario"], {})
    if args.param not in allowed:
        raise ConfigError(f"{args.param!r} is not sweepable for {cfg['scenario']}; "
                          f"choose from {', '.join(sorted(allowed))}")
    values = sweep_values(args.lo, args.hi, args.steps, allowed[args.param])
    build_scenario(with_parameter(cfg, args.param, values[0]), seed)
    try:
        columns, rows, extra = run_sweep(cfg, seed, args.param, values)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001
        print(f"error: sweep failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    header = _header(cfg, seed) + [f"sweep param={args.param} from={args.lo!r} "
                                   f"to={args.hi!r} steps={args.steps}"]
    files = {
        "sweep.csv": table_csv(columns, rows, header),
        "sweep.json": _dumps({"param": args.param, "values": values, "rows": rows, **extra}),
    }
    sweep_cfg = dict(cfg, sweep={"param": args.param, "from": args.lo, "to": args.hi,
                                 "steps": args.steps})
    files["manifest.json"] = _dumps(manifest(sweep_cfg, seed, list(files) + ["manifest.json"]))
    out = _out_dir(args.out, cfg)
    _write_all(out, files)
    for key, val in extra.get("thresholds", {}).items():
        print(f"ratio >= {key}: transfer_fraction = {val}")
    print(f"{cfg['scenario']}: {len(rows)} sweep rows written to {out}")
    return EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(load_schema(), indent=2))
    return EXIT_OK


def cmd_list(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tempologic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario config")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--set", action="append", metavar="NAME=VALUE",
                   help="override parameters.NAME (value parsed as JSON)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one scalar parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True)
    p.add_argument("--from", dest="lo", type=float, required=True)
    p.add_argument("--to", dest="hi", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--set", action="append", metavar="NAME=VALUE")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schema", help="print the config JSON schema")
    p.set_defaults(func=cmd_schema)

    p = sub.add_parser("list", help="list bundled scenario configs")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
