"""Experiment presets and the seeded batch runner.

A batch is the cross product policy x parameter value x seed index. Every
run writes one small JSON file as soon as it finishes (atomic rename), so
an interrupted batch resumes by skipping the files already present. Curves
are built only after all runs exist, from results sorted by key, so the
CSVs do not depend on worker count or completion order.
"""
from __future__ import annotations

import copy
import json
import logging
import math
import os
import platform
import statistics
from dataclasses import dataclass, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .config import ScenarioConfig, desk_scale, from_dict
from .metrics import (
    CURVE_METRICS,
    RUN_COLUMNS,
    CurveRow,
    EnergyRow,
    RunMetrics,
    aggregate,
    coefficient_of_variation,
    write_csv,
    write_curve,
    write_energy,
)
from .simulator import RunResult, run
from .topology import dist

log = logging.getLogger(__name__)

PRESETS = ("deadline_sweep", "source_sweep", "energy_distribution")
SCALES = ("full", "desk")
ENERGY_METRICS = CURVE_METRICS + ("relay_energy_cv",)


@dataclass(frozen=True)
class Preset:
    name: str
    scale: str
    param: str
    values: tuple[float, ...]
    policies: tuple[str, ...]
    base: ScenarioConfig

    def scenario(self, policy: str, value: float) -> ScenarioConfig:
        cfg = copy.deepcopy(self.base)
        cfg.protocol.policy = policy
        return cfg.replace(**{self.param: int(value) if self.param == "traffic.sources" else value})

    @property
    def metrics(self) -> tuple[str, ...]:
        return ENERGY_METRICS if self.name == "energy_distribution" else CURVE_METRICS


def make_preset(name: str, scale: str = "full", base: ScenarioConfig | None = None) -> Preset:
    """Build a preset on top of ``base`` (defaults when omitted).

    The desk scale keeps node density but shrinks the network to 50 nodes
    on 100 m x 100 m so a full batch finishes in minutes on one core.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if scale not in SCALES:
        raise KeyError(f"unknown scale {scale!r}; choose from {', '.join(SCALES)}")
    cfg = copy.deepcopy(base) if base is not None else ScenarioConfig()
    if scale == "desk" and base is None:
        cfg = desk_scale(cfg)
    p = cfg.protocol
    if name == "deadline_sweep":
        p.weights, p.thvr_c, p.speed_k = (0.1, 0.8, 0.1), 0.9, 10.0
        cfg.traffic.sources = 10
        return Preset(name, scale, "deadline", tuple(cfg.deadlines), ("lrthr", "thvr", "speed"), cfg)
    if name == "source_sweep":
        p.weights, p.thvr_c, p.speed_k = (0.1, 0.8, 0.1), 0.9, 10.0
        cfg.deadline = 0.35
        return Preset(name, scale, "traffic.sources", tuple(float(n) for n in range(6, 14)),
                      ("lrthr", "thvr", "speed"), cfg)
    # energy_distribution
    p.weights, p.thvr_c = (0.1, 0.7, 0.2), 0.7
    cfg.traffic.sources = 4
    if base is None:
        cfg.seeds = 200 if scale == "full" else 50
    return Preset(name, scale, "deadline", (0.6,), ("lrthr", "thvr"), cfg)


def run_seed(master_seed: int, index: int) -> int:
    """Per-run seed: child ``index`` of the master SeedSequence, as 64 bits."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def relay_energy_cv(res: RunResult) -> float | None:
    """CV of consumed energy over relays that are neither sources nor in
    radio range of the sink."""
    topo = res.topology
    sink = topo.pos(topo.destination)
    skip = set(res.sources) | {topo.destination}
    vals = [row.consumed for row in res.metrics.energy_by_node
            if row.node_id not in skip and dist(topo.pos(row.node_id), sink) > topo.radio_range]
    if len(vals) < 2:
        return None
    return coefficient_of_variation(vals)


def _summary(res: RunResult, with_energy: bool) -> dict:
    m = res.metrics
    out = {
        "generated": m.generated,
        "delivered_on_time": m.delivered_on_time,
        "missed": m.missed,
        "dmr": m.dmr,
        "ecpp": m.ecpp,
        "delay_avg": m.delay_avg,
        "delay_worst": m.delay_worst,
        "energy_total": m.energy_total,
        "drops_by_reason": m.drops_by_reason,
    }
    if with_energy:
        out["relay_energy_cv"] = relay_energy_cv(res)
        out["energy_rows"] = [list(r.row()) for r in m.energy_by_node]
    return out


def _metrics_from(summary: dict) -> RunMetrics:
    m = RunMetrics(summary["generated"], summary["delivered_on_time"], summary["missed"],
                   summary["dmr"], summary["ecpp"], summary["delay_avg"], summary["delay_worst"],
                   dict(summary["drops_by_reason"]), [], summary["energy_total"])
    # extra per-run statistics ride along as plain attributes
    m.relay_energy_cv = summary.get("relay_energy_cv")
    return m


def _run_path(out: Path, policy: str, value: float, idx: int) -> Path:
    return out / "runs" / policy / f"{value!r}" / f"seed{idx:04d}.json"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def _job(args) -> tuple[str, float, int]:
    cfg_dict, policy, value, idx, seed, path, with_energy = args
    cfg = from_dict(cfg_dict)
    res = run(cfg, seed)
    blob = {"policy": policy, "param": value, "seed_index": idx, "seed": seed,
            "summary": _summary(res, with_energy)}
    _atomic_write(Path(path), json.dumps(blob, sort_keys=True))
    return policy, value, idx


def manifest_for(preset: Preset, seeds: list[int]) -> dict:
    return {
        "preset": preset.name,
        "scale": preset.scale,
        "param": preset.param,
        "values": list(preset.values),
        "policies": list(preset.policies),
        "config": preset.base.to_dict(),
        "config_hash": preset.base.digest(),
        "master_seed": preset.base.master_seed,
        "seeds": seeds,
        "versions": {"lrthr": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }


def run_batch(preset: Preset, out_dir: str | Path, jobs: int = 1, progress=None) -> dict:
    """Execute (or resume) every run of ``preset`` and write its CSVs.

    Returns the manifest. Existing per-run files are reused only when the
    manifest already in ``out_dir`` has the same config hash and seeds.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = preset.base
    seeds = [run_seed(cfg.master_seed, i) for i in range(cfg.seeds)]
    manifest = manifest_for(preset, seeds)
    mpath = out / "manifest.json"
    if mpath.exists():
        old = json.loads(mpath.read_text())
        if old.get("config_hash") != manifest["config_hash"] or old.get("seeds") != seeds \
                or old.get("preset") != preset.name:
            raise FileExistsError(f"{out} holds a different batch; pick another --out")
    _atomic_write(mpath, json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    with_energy = preset.name == "energy_distribution"
    todo = []
    for policy in preset.policies:
        for value in preset.values:
            scen = preset.scenario(policy, value).to_dict()
            for idx, seed in enumerate(seeds):
                path = _run_path(out, policy, value, idx)
                if path.exists():
                    continue
                todo.append((scen, policy, value, idx, seed, str(path), with_energy))
    total = len(preset.policies) * len(preset.values) * len(seeds)
    log.info("%s/%s: %d of %d runs to do", preset.name, preset.scale, len(todo), total)
    done = total - len(todo)
    if jobs > 1 and len(todo) > 1:
        with Pool(jobs) as pool:
            for _ in pool.imap_unordered(_job, todo, chunksize=1):
                done += 1
                if progress:
                    progress(done, total)
    else:
        for item in todo:
            _job(item)
            done += 1
            if progress:
                progress(done, total)
    write_outputs(preset, out, seeds)
    return manifest


def load_runs(preset: Preset, out: Path, seeds: list[int]) -> dict[str, list[tuple[float, int, dict]]]:
    runs: dict[str, list[tuple[float, int, dict]]] = {}
    for policy in preset.policies:
        rows = []
        for value in preset.values:
            for idx in range(len(seeds)):
                blob = json.loads(_run_path(out, policy, value, idx).read_text())
                rows.append((value, idx, blob["summary"]))
        runs[policy] = rows
    return runs


def _fmt(v) -> str:
    return "" if v is None else repr(v)


def write_outputs(preset: Preset, out: Path, seeds: list[int]) -> None:
    runs = load_runs(preset, out, seeds)
    run_rows = []
    for policy in preset.policies:
        pairs = []
        for value, idx, s in runs[policy]:
            run_rows.append((policy, repr(value), seeds[idx], s["generated"], s["delivered_on_time"],
                             s["missed"], _fmt(s["dmr"]), _fmt(s["ecpp"]), _fmt(s["delay_avg"]),
                             _fmt(s["delay_worst"]), repr(s["energy_total"])))
            pairs.append((value, _metrics_from(s)))
        write_curve(out / f"curve_{policy}.csv", _aggregate(pairs, preset.metrics))
        if preset.name == "energy_distribution":
            _write_energy_runs(out, policy, runs[policy])
    write_csv(out / "runs.csv", RUN_COLUMNS, run_rows)


def _aggregate(pairs, metrics: Iterable[str]) -> list[CurveRow]:
    metrics = tuple(metrics)
    rows = aggregate(pairs, [m for m in metrics if m in CURVE_METRICS])
    if "relay_energy_cv" in metrics:
        by_key: dict[float, list[float]] = {}
        for key, m in pairs:
            if m.relay_energy_cv is not None:
                by_key.setdefault(key, []).append(m.relay_energy_cv)
        for key in sorted(by_key):
            vals = sorted(by_key[key])
            sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
            rows.append(CurveRow(key, "relay_energy_cv", math.fsum(vals) / len(vals), sd, len(vals)))
    return rows


def _write_energy_runs(out: Path, policy: str, rows) -> None:
    folder = out / "energy" / policy
    folder.mkdir(parents=True, exist_ok=True)
    for _, idx, s in rows:
        energy = [EnergyRow(int(r[0]), *(float(v) for v in r[1:])) for r in s["energy_rows"]]
        write_energy(folder / f"seed{idx:04d}.csv", energy)


def preset_from_manifest(manifest: dict) -> Preset:
    cfg = from_dict(manifest["config"], source="manifest")
    template = make_preset(manifest["preset"], manifest["scale"])
    return replace(template, base=cfg, values=tuple(manifest["values"]),
                   policies=tuple(manifest["policies"]))


def replay(manifest_path: str | Path, out_dir: str | Path, jobs: int = 1) -> list[tuple[str, bool]]:
    """Re-run a batch from its manifest into ``out_dir`` and compare every
    curve CSV byte for byte with the originals next to the manifest."""
    mpath = Path(manifest_path)
    manifest = json.loads(mpath.read_text())
    preset = preset_from_manifest(manifest)
    if preset.base.digest() != manifest["config_hash"]:
        raise ValueError("manifest config does not hash to its recorded config_hash")
    out = Path(out_dir)
    if out.resolve() == mpath.parent.resolve():
        raise ValueError("replay needs a fresh --out directory")
    run_batch(preset, out, jobs)
    results = []
    for name in ["runs.csv"] + [f"curve_{p}.csv" for p in preset.policies]:
        orig = mpath.parent / name
        results.append((name, orig.exists() and orig.read_bytes() == (out / name).read_bytes()))
    return results
