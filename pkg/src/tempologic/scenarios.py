"""Config-driven wiring of the bundled study scenarios.

A config is a plain dict (already schema-checked).  ``build_scenario`` turns
it into a runnable closure, raising :class:`ConfigError` for anything wrong
with the config itself; running the closure returns a :class:`ScenarioResult`
held entirely in memory, so nothing is written when a run fails.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from . import fabric, neuro, perfmodel
from .engine import Trace, TraceRecord, format_float
from .timespace import DomainError, SpatialPoint, apparent_processing_time

SCENARIO_KINDS = (
    "lightcone", "cache", "bus", "hidden-layer", "shallow-deep",
    "perf-fit", "efficiency-sweep", "assembly-sync", "feedback-staleness",
)

#: Sweepable scalar parameters per scenario kind; True marks integer ones.
SWEEPABLE: dict[str, dict[str, bool]] = {
    "lightcone": {"Tp": False, "speed": False},
    "cache": {"speed": False, "cache_speed": False},
    "bus": {"L": True, "T_B": False, "T_d": False, "X": False, "Tp": False},
    "hidden-layer": {"T_B": False, "T_d": False, "X": False},
    "shallow-deep": {"Tp": False, "T_B": False, "T_d": False},
    "perf-fit": {"fp0": False, "k": False},
    "efficiency-sweep": {"transfer_fraction": False, "fp0": False, "Tp": False},
    "assembly-sync": {"eta": False, "frequency": False},
    "feedback-staleness": {"N": True, "cycle": False},
}


class ConfigError(ValueError):
    """The scenario config is malformed or inconsistent."""


@dataclass
class ScenarioResult:
    trace: Trace
    columns: list[str]
    rows: list[dict]
    summary: dict
    extra_files: dict[str, str] = field(default_factory=dict)

    def scalars(self) -> dict:
        """Flat numeric summary used for sweep rows."""
        return {k: v for k, v in self.summary.items()
                if isinstance(v, (int, float, bool)) and not isinstance(v, str)}


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------

def _params(cfg: dict) -> dict:
    return cfg.get("parameters", {})


def _num(params: dict, name: str, default=None, minimum=None, positive=False) -> float:
    if name not in params:
        if default is None:
            raise ConfigError(f"missing parameter {name!r}")
        return float(default)
    val = params[name]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"parameter {name!r} must be a number, got {val!r}")
    val = float(val)
    if not math.isfinite(val):
        raise ConfigError(f"parameter {name!r} must be finite")
    if minimum is not None and val < minimum:
        raise ConfigError(f"parameter {name!r} must be >= {minimum}, got {val}")
    if positive and val <= 0:
        raise ConfigError(f"parameter {name!r} must be > 0, got {val}")
    return val


def _components(cfg: dict, type_: str | None = None) -> list[dict]:
    comps = cfg.get("components", [])
    return [c for c in comps if type_ is None or c["type"] == type_]


def _component(cfg: dict, id_: str) -> dict:
    for c in _components(cfg):
        if c["id"] == id_:
            return c
    raise ConfigError(f"component {id_!r} is referenced but not defined")


def _one(cfg: dict, type_: str, role: str | None = None) -> dict:
    found = [c for c in _components(cfg, type_) if role is None or c.get("role") == role]
    if len(found) != 1:
        what = f"{type_}" + (f" with role {role!r}" if role else "")
        raise ConfigError(f"expected exactly one {what}, found {len(found)}")
    return found[0]


def _point(comp: dict) -> SpatialPoint:
    return SpatialPoint.of(comp.get("position", [0.0, 0.0, 0.0]))


def _core(comp: dict) -> fabric.Core:
    return fabric.Core(comp["id"], _point(comp), float(comp.get("Tp", 0.0)))


def _foreign(params: dict) -> fabric.ForeignLoad:
    x = params.get("X", 0.0)
    if isinstance(x, dict):
        return fabric.ForeignLoad(x.get("kind", "constant"), float(x.get("value", 0.0)))
    return fabric.ForeignLoad("constant", _num(params, "X", 0.0, minimum=0))


def _bus(cfg: dict) -> fabric.BusChannel:
    p = _params(cfg)
    comps = _components(cfg, "bus")
    if len(comps) > 1:
        raise ConfigError("only one bus may be declared")
    pos = _point(comps[0]) if comps else SpatialPoint(0.0, 0.5)
    bus_id = comps[0]["id"] if comps else "bus"
    return fabric.BusChannel(bus_id, pos, _num(p, "T_B", minimum=0),
                             _num(p, "T_d", 0.0, minimum=0), _foreign(p))


def merge_trace(parts: list[tuple[str, Trace]]) -> Trace:
    """Concatenate traces of several engine runs, labelling each run."""
    out = Trace()
    for label, tr in parts:
        for rec in tr:
            detail = f"run={label}" + (";" + rec.detail if rec.detail else "")
            out.append(TraceRecord(len(out), rec.time, rec.component_id, rec.kind,
                                   rec.position, detail))
        if tr.error and out.error is None:
            out.error = tr.error
    return out


# ---------------------------------------------------------------------------
# scenario builders: each returns a zero-argument callable
# ---------------------------------------------------------------------------

def _lightcone(cfg, seed):
    p = _params(cfg)
    speed = _num(p, "speed", 1.0, positive=True)
    src = _core(_one(cfg, "core", "source"))
    obs = _core(_one(cfg, "core", "observer"))
    if "Tp" in p:
        tp = _num(p, "Tp", minimum=0)
        src = fabric.Core(src.id, src.position, tp)
        obs = fabric.Core(obs.id, obs.position, tp)

    def run():
        rep = fabric.two_source_experiment(src, obs, speed, seed=seed)
        formula = apparent_processing_time(src.tp, rep.tt) if src.tp == obs.tp else math.nan
        row = {"source": src.id, "observer": obs.id, "Tp_source": src.tp,
               "Tp_observer": obs.tp, "Tt": rep.tt, "notice_time": rep.notice_time,
               "cone_start": rep.observer_done, "apparent_time": rep.apparent_time,
               "formula": formula}
        return ScenarioResult(rep.trace, list(row), [row], dict(row))
    return run


def _cache(cfg, seed):
    p = _params(cfg)
    speed = _num(p, "speed", 1.0, positive=True)
    accesses = p.get("accesses")
    if not accesses:
        raise ConfigError("cache scenario needs parameters.accesses: [[core, cache], ...]")
    pairs = []
    for pair in accesses:
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(f"bad access entry {pair!r}")
        core_c, cache_c = _component(cfg, pair[0]), _component(cfg, pair[1])
        if core_c["type"] != "core" or cache_c["type"] != "cache":
            raise ConfigError(f"access {pair!r} must pair a core with a cache")
        pairs.append((core_c, cache_c))
    if "cache_speed" in p:
        global_speeds = [_num(p, "cache_speed", positive=True)]
    elif "cache_speeds" in p:
        global_speeds = p["cache_speeds"]
        if not global_speeds or any(isinstance(v, bool) or not isinstance(v, (int, float))
                                    or v <= 0 for v in global_speeds):
            raise ConfigError("cache_speeds must be positive numbers")
        global_speeds = [float(v) for v in global_speeds]
    else:
        global_speeds = None

    def speeds_for(cache_c):
        if global_speeds is not None:
            return global_speeds
        return [float(cache_c.get("speed", 1.0))]

    def run():
        rows, parts = [], []
        for core_c, cache_c in pairs:
            core = _core(core_c)
            baseline = None
            for s in speeds_for(cache_c):
                cache = fabric.CacheMemory.with_speed(cache_c["id"], _point(cache_c), s)
                rep = fabric.cache_access_scenario(core, cache, speed, seed=seed)
                parts.append((f"{core.id}->{cache.id}@{s:g}", rep.trace))
                baseline = baseline or rep.apparent_access_time
                rows.append({"core": core.id, "cache": cache.id, "cache_speed": s,
                             "one_way": rep.one_way,
                             "apparent_access_time": rep.apparent_access_time,
                             "apparent_speed": rep.apparent_speed,
                             "improvement": baseline / rep.apparent_access_time})
        summary = {"accesses": len(pairs),
                   "max_improvement": max(r["improvement"] for r in rows),
                   "apparent_access_time": rows[0]["apparent_access_time"]}
        return ScenarioResult(merge_trace(parts), list(rows[0]), rows, summary)
    return run


def _bus_scenario(cfg, seed):
    p = _params(cfg)
    bus = _bus(cfg)
    rx = _core(_one(cfg, "core", "receiver"))
    if "Tp" in p:
        rx = fabric.Core(rx.id, rx.position, _num(p, "Tp", minimum=0))
    if "L" in p:
        L = int(_num(p, "L", minimum=1))
        senders = fabric.layer_senders(L)
    else:
        senders = [_core(c) for c in _components(cfg, "core") if c.get("role") == "sender"]
    if not senders:
        raise ConfigError("bus scenario needs sender cores or parameters.L")

    def run():
        rep = fabric.shared_bus_transfer(senders, bus, rx, seed=seed)
        intervals = {s: (a, b) for s, a, b in rep.delivery_intervals}
        rows = [{"rank": k + 1, "sender": sid, "delivery_start": intervals[sid][0],
                 "completion": rep.completions[sid]}
                for k, sid in enumerate(rep.grant_order)]
        summary = {"L": len(senders), "receiver_tt": rep.receiver_tt,
                   "formula_tt": len(senders) * 2 * bus.t_b + bus.t_d + bus.foreign.value,
                   "processing_end": rep.processing_end,
                   "grant_order": rep.grant_order}
        return ScenarioResult(rep.trace, list(rows[0]), rows, summary)
    return run


def _hidden_layer(cfg, seed):
    p = _params(cfg)
    bus = _bus(cfg)
    l_values = p.get("L_values", [1, 2, 4, 8])
    if not l_values or any(not isinstance(v, int) or isinstance(v, bool) or v < 1 for v in l_values):
        raise ConfigError("L_values must be integers >= 1")
    link_delay = _num(p, "link_delay", bus.t_d, minimum=0)

    def run():
        shared = fabric.hidden_layer_scaling(l_values, bus, "shared", seed=seed)
        parallel = fabric.hidden_layer_scaling(l_values, bus, "parallel",
                                               link_delay=link_delay, seed=seed)
        rows = [{"L": L, "Tt_shared": a, "Tt_parallel": b}
                for (L, a), (_, b) in zip(shared.rows, parallel.rows)]
        summary = {"slope_shared": shared.slope, "intercept_shared": shared.intercept,
                   "slope_parallel": parallel.slope, "expected_slope": 2 * bus.t_b}
        # per-L traces would be huge for large layers; keep the largest one
        biggest = max(l_values)
        rep = fabric.shared_bus_transfer(fabric.layer_senders(biggest), bus,
                                         fabric.Core("out", SpatialPoint(0.0, 1.0)), seed=seed)
        return ScenarioResult(merge_trace([(f"shared-L{biggest}", rep.trace)]),
                              list(rows[0]), rows, summary)
    return run


def _shallow_deep(cfg, seed):
    p = _params(cfg)
    bus = _bus(cfg)
    total = int(_num(p, "total", minimum=1))
    arrangements = p.get("arrangements")
    if not arrangements:
        raise ConfigError("shallow-deep needs parameters.arrangements")
    tp = _num(p, "Tp", 0.0, minimum=0)
    for widths in arrangements:
        if sum(widths) != total:
            raise ConfigError(f"widths {widths} do not sum to total {total}")

    def run():
        rows = []
        for widths in arrangements:
            cmp = fabric.shallow_vs_deep(total, widths, bus, tp, seed=seed)
            for tag, arr in (("wide", cmp.wide), ("candidate", cmp.deep)):
                rows.append({"arrangement": "x".join(map(str, arr.widths)), "role": tag,
                             "max_layer_tt": arr.max_layer_tt,
                             "total_apparent": arr.total_apparent,
                             "deep_is_faster": cmp.deep_is_faster})
        summary = {"all_deeper_faster": all(r["deep_is_faster"] for r in rows
                                            if max(map(int, r["arrangement"].split("x"))) < total)}
        return ScenarioResult(Trace(), list(rows[0]), rows, summary)
    return run


def _perf_fit(cfg, seed):
    p = _params(cfg)
    raw = p.get("observations")
    observations = []
    if raw is None:
        observations = [perfmodel.SUMMIT, perfmodel.FUGAKU]
    else:
        for o in raw:
            try:
                observations.append(perfmodel.BenchmarkObservation(
                    str(o["machine"]), float(o["speedup"]), float(o.get("k", 4.0))))
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"bad observation {o!r}") from exc
    model = None
    if "fp0" in p:
        model = (_num(p, "fp0", minimum=0), _num(p, "k", 4.0, minimum=1))

    def run():
        rows = []
        for obs in observations:
            fp0 = perfmodel.fit_housekeeping(obs)
            rows.append({"machine": obs.machine, "k": obs.k, "speedup": obs.speedup,
                         "fp0": fp0})
        summary = {}
        if model is not None:
            s = perfmodel.operand_speedup(*model)
            rows.append({"machine": "model", "k": model[1], "speedup": s, "fp0": model[0]})
            summary["speedup"] = s
        for r in rows:
            summary[f"fp0_{r['machine']}"] = r["fp0"]
        return ScenarioResult(Trace(), ["machine", "k", "speedup", "fp0"], rows, summary)
    return run


def _efficiency(cfg, seed):
    p = _params(cfg)
    fp0 = _num(p, "fp0", 0.0, minimum=0)
    tp = _num(p, "Tp", 1.0, positive=True)
    if "transfer_fraction" in p:
        fractions = [_num(p, "transfer_fraction", minimum=0)]
    else:
        fractions = p.get("transfer_fractions", [0.0, 1.0, 10.0, 100.0, 1000.0])
    targets = p.get("target_ratios", [10, 100, 250, 1000])
    label = str(p.get("label", "workload"))

    def run():
        rows = perfmodel.efficiency_sweep(fractions, fp0=fp0, tp=tp, label=label)
        baseline = perfmodel.WorkloadProfile("baseline", fp0=fp0)
        out = [{"profile": r.profile, "transfer_fraction": r.transfer_fraction,
                "efficiency": r.efficiency, "ratio": r.ratio} for r in rows]
        summary = {"efficiency": out[-1]["efficiency"], "ratio": out[-1]["ratio"],
                   "thresholds": {str(t): perfmodel.transfer_fraction_for_ratio(float(t), baseline)
                                  for t in targets}}
        return ScenarioResult(Trace(), ["profile", "transfer_fraction", "efficiency", "ratio"],
                              out, summary)
    return run


def _assembly(cfg, seed):
    p = _params(cfg)
    base_c = _one(cfg, "base")
    freq = _num(p, "frequency", base_c.get("frequency"), positive=True)
    base = neuro.BaseOscillator(freq, base_c["id"], _point(base_c))
    target = _one(cfg, "target")
    members_c = _components(cfg, "neuron")
    if not members_c:
        raise ConfigError("assembly-sync needs neuron components")
    eta = _num(p, "eta", 1.0, positive=True)
    if eta > 1:
        raise ConfigError("eta must lie in (0, 1]")
    max_iter = int(_num(p, "max_iter", 100, minimum=0))
    tol = _num(p, "tol_deg", 1e-9, positive=True)

    def axon_for(c):
        if "delay" in c:
            return neuro.Axon.with_delay(c["id"], target["id"], float(c["delay"]))
        a = c.get("axon", {})
        return neuro.Axon(c["id"], target["id"], float(a["length"]),
                          float(a.get("base_velocity", 1.0)),
                          float(a.get("myelination_factor", 1.0)))

    try:
        axons = [axon_for(c) for c in members_c]
    except KeyError as exc:
        raise ConfigError(f"neuron needs 'delay' or 'axon.length': {exc}") from exc

    def run():
        members = [neuro.OscillatorNeuron(c["id"], _point(c), rc=float(c.get("rc", 0.01)))
                   for c in members_c]
        asm = neuro.Assembly(members, target["id"], base,
                             {c["id"]: float(c.get("lock_delay", 0.0)) for c in members_c})
        rep = neuro.learn_arrival_phase(asm, axons, eta=eta, max_iter=max_iter,
                                        tol_deg=tol, seed=seed)
        # replay the final episode for the trace
        _, _, trace = neuro._episode(asm, {a.from_id: a for a in axons}, rep.offsets,
                                     {m.id: 1.0 for m in members}, seed)
        rows = [{"iteration": i, "spread_deg": s, "proxy": q}
                for i, (s, q) in enumerate(zip(rep.spread_history, rep.proxy_history))]
        summary = {"converged": rep.converged, "iterations": rep.iterations,
                   "final_spread_deg": rep.final_spread}
        raster = ["neuron,emit_time,arrival_time,target,phase_deg,biological_timestamp"]
        for r in rep.raster:
            raster.append(",".join([r.neuron, format_float(r.emit_time),
                                    format_float(r.arrival_time), r.target,
                                    format_float(r.phase_deg),
                                    format_float(r.biological_timestamp)]))
        extra = {"raster.csv": "\n".join(raster) + "\n",
                 "convergence.json": json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n"}
        return ScenarioResult(trace, list(rows[0]), rows, summary, extra)
    return run


def _feedback(cfg, seed):
    p = _params(cfg)
    cycle = _num(p, "cycle", positive=True)
    n_drop = int(_num(p, "N", minimum=0))
    busy = p.get("busy_cycles", [])
    if any(not isinstance(b, int) for b in busy):
        raise ConfigError("busy_cycles must be integers")
    items = p.get("items")
    if not items:
        raise ConfigError("feedback-staleness needs parameters.items")
    receiver = str(p.get("receiver", "receiver"))
    for it in items:
        if not isinstance(it, dict) or "emit" not in it or "transport_delay" not in it:
            raise ConfigError(f"feedback item needs 'emit' and 'transport_delay': {it!r}")
        if float(it["transport_delay"]) < 0:
            raise ConfigError("transport_delay must be >= 0")

    def run():
        q = neuro.FeedbackQueue(receiver, n_drop)
        for it in items:
            emit = float(it["emit"])
            q.push(neuro.Spike(str(it.get("source", "src")), emit,
                               float(it.get("timestamp", emit))),
                   emit + float(it["transport_delay"]))
        rep = neuro.feedback_round(q, busy, cycle, seed=seed)
        rows = []
        for d in rep.delivered:
            rows.append({"item": d.item.seq, "source": d.item.spike.source_id,
                         "timestamp": d.item.spike.biological_timestamp,
                         "arrival": d.item.arrival_time, "status": "delivered",
                         "time": d.delivery_time, "staleness": d.staleness})
        for d in rep.dropped:
            rows.append({"item": d.item.seq, "source": d.item.spike.source_id,
                         "timestamp": d.item.spike.biological_timestamp,
                         "arrival": d.item.arrival_time, "status": "dropped",
                         "time": d.drop_time, "staleness": math.nan})
        rows.sort(key=lambda r: r["item"])
        stats = rep.stats()
        return ScenarioResult(rep.trace, list(rows[0]), rows, stats)
    return run


_BUILDERS: dict[str, Callable] = {
    "lightcone": _lightcone,
    "cache": _cache,
    "bus": _bus_scenario,
    "hidden-layer": _hidden_layer,
    "shallow-deep": _shallow_deep,
    "perf-fit": _perf_fit,
    "efficiency-sweep": _efficiency,
    "assembly-sync": _assembly,
    "feedback-staleness": _feedback,
}


def check_references(cfg: dict) -> None:
    ids = [c["id"] for c in _components(cfg)]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise ConfigError(f"duplicate component ids: {dup}")


def build_scenario(cfg: dict, seed: int) -> Callable[[], ScenarioResult]:
    kind = cfg.get("scenario")
    if kind not in _BUILDERS:
        raise ConfigError(f"unknown scenario kind {kind!r}; valid kinds: {', '.join(SCENARIO_KINDS)}")
    check_references(cfg)
    try:
        return _BUILDERS[kind](cfg, seed)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def with_parameter(cfg: dict, name: str, value: Any) -> dict:
    out = copy.deepcopy(cfg)
    out.setdefault("parameters", {})[name] = value
    return out
