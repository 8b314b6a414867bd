"""Command line: ``lrthr run | experiment | validate | replay``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ScenarioConfig, apply_overrides, load_config, save_config
from .experiments import PRESETS, SCALES, make_preset, replay, run_batch
from .metrics import RUN_COLUMNS, write_csv, write_energy, write_packets
from .simulator import TRACE_COLUMNS, run
from .topology import ConfigurationError

DECISION_COLUMNS = ("time", "packet", "node", "next_hop", "reason", "metric")
LINK_COLUMNS = ("time", "from", "to", "prr", "delay")

log = logging.getLogger("lrthr")


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ScenarioConfig()
    overrides = list(args.override or [])
    if getattr(args, "policy", None):
        overrides.append(f"protocol.policy={args.policy}")
    return apply_overrides(cfg, overrides)


def _fmt(v) -> str:
    return "" if v is None else repr(v)


def cmd_run(args) -> int:
    cfg = _scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = run(cfg, args.seed, trace=args.trace, log_decisions=args.trace, log_links=args.trace)
    m = res.metrics
    write_packets(out / "packets.csv", res.ledger.packets)
    write_energy(out / "energy.csv", m.energy_by_node)
    write_csv(out / "run.csv", RUN_COLUMNS,
              [(cfg.protocol.policy, repr(cfg.deadline), args.seed, m.generated, m.delivered_on_time,
                m.missed, _fmt(m.dmr), _fmt(m.ecpp), _fmt(m.delay_avg), _fmt(m.delay_worst),
                repr(m.energy_total))])
    if args.trace:
        write_csv(out / "trace.csv", TRACE_COLUMNS, res.trace)
        write_csv(out / "decisions.csv", DECISION_COLUMNS, res.decisions)
        write_csv(out / "links.csv", LINK_COLUMNS, res.link_log)
    save_config(cfg, out / "scenario.yaml")
    dmr = "undefined" if m.dmr is None else f"{m.dmr:.4f}"
    ecpp = "undefined" if m.ecpp is None else f"{m.ecpp:.4f} J"
    print(f"{cfg.protocol.policy} seed={args.seed}: generated={m.generated} on_time={m.delivered_on_time} "
          f"dmr={dmr} ecpp={ecpp}")
    print(f"drops: {json.dumps({k: v for k, v in m.drops_by_reason.items() if v})}")
    return 0


def cmd_experiment(args) -> int:
    # precedence: --override / --seed / --seeds > preset > --config > defaults
    base = load_config(args.config) if args.config else None
    preset = make_preset(args.preset, args.scale, base)
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    if args.seeds is not None:
        overrides.append(f"seeds={args.seeds}")
    preset = replace(preset, base=apply_overrides(preset.base, overrides))
    if preset.name == "deadline_sweep":
        # the swept values come from the (possibly overridden) deadline list
        preset = replace(preset, values=tuple(preset.base.deadlines))
    if args.policy:
        preset = replace(preset, policies=(args.policy,))

    def progress(done, total):
        if not args.quiet and (done == total or done % 50 == 0):
            print(f"  {done}/{total} runs", file=sys.stderr)

    run_batch(preset, args.out, jobs=args.jobs, progress=progress)
    print(f"{preset.name} ({preset.scale}): wrote {args.out}/runs.csv and curve_<policy>.csv")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"{args.config}: ok (config hash {cfg.digest()})")
    return 0


def cmd_replay(args) -> int:
    results = replay(args.manifest, args.out, jobs=args.jobs)
    ok = True
    for name, same in results:
        print(f"{name}: {'identical' if same else 'DIFFERS'}")
        ok &= same
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lrthr", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed_default):
        p.add_argument("--config", help="YAML scenario file")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--policy", choices=("lrthr", "thvr", "speed"))
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="dotted config key, e.g. channel.max_retries=5 (repeatable)")

    p = sub.add_parser("run", help="simulate one scenario with one seed")
    common(p, 0)
    p.add_argument("--trace", action="store_true", help="also write trace, decision and link logs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="run a preset batch")
    p.add_argument("preset", choices=PRESETS)
    common(p, None)
    p.add_argument("--scale", choices=SCALES, default="full")
    p.add_argument("--seeds", type=int, help="number of seeds per point")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay", help="re-run a batch from its manifest and compare outputs")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError, FileExistsError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
