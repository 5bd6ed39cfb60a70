"""Command line entry point: ``sclar train | sweep | eval``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .dqn import AgentConfig
from .harness import AGENTS, ExperimentConfig, run_evaluation, run_sweep, run_training
from .topology import NetworkConfig

# network fields exposed under short names
_ALIASES = {"frame_slots": "--frame-size", "pue_count": "--pues", "jammer_count": "--jammers",
            "master_seed": "--seed"}


def _flag(name: str) -> str:
    return _ALIASES.get(name, "--" + name.replace("_", "-"))


def _add_dataclass_flags(p: argparse.ArgumentParser, cls, group: str, skip=()) -> None:
    g = p.add_argument_group(group)
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        kw = {"dest": f"{group}.{f.name}", "default": None, "metavar": f.name.upper()}
        t = str(f.type)
        if "tuple" in t:
            kw.update(nargs=2, type=float, metavar=("LO", "HI"))
        elif "list" in t:
            kw.update(type=json.loads, metavar="JSON")
        elif t.startswith("bool"):
            kw.update(type=_parse_bool, metavar="BOOL")
        elif t.startswith("int"):
            kw["type"] = int
        elif t.startswith("float"):
            kw["type"] = float
        g.add_argument(_flag(f.name), **kw)


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override it")
    p.add_argument("--out", dest="exp.out_dir", default=None, metavar="DIR", help="output directory")
    p.add_argument("--agent", dest="exp.agent", choices=AGENTS, default=None)
    p.add_argument("--episodes", dest="exp.episodes", type=int, default=None, metavar="N")
    p.add_argument("--channel-realizations", dest="exp.channel_realizations", type=int, default=None,
                   metavar="N")
    p.add_argument("--tag", dest="exp.tag", default=None, metavar="TAG")
    p.add_argument("--output-width", dest="exp.output_width", type=int, default=None, metavar="N")
    p.add_argument("--write-slots", dest="exp.write_slots", type=_parse_bool, default=None, metavar="BOOL")
    _add_dataclass_flags(p, NetworkConfig, "network")
    _add_dataclass_flags(p, AgentConfig, "agent_config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sclar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    train = sub.add_parser("train", help="train one agent and write metrics")
    _common(train)
    sweep = sub.add_parser("sweep", help="independent runs over one axis")
    _common(sweep)
    sweep.add_argument("--axis", required=True, choices=("frame_size", "roster", "agent"))
    sweep.add_argument("--values", required=True,
                       help="comma list, e.g. 5,10,20 or resdqn,oracle; rosters as 10x3,20x3")
    ev = sub.add_parser("eval", help="run a saved agent greedily without training")
    _common(ev)
    ev.add_argument("--checkpoint", required=True)
    return parser


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    base = ExperimentConfig.from_file(ns.config) if ns.config else ExperimentConfig()
    net, agent, exp = {}, {}, {}
    for key, val in vars(ns).items():
        if val is None or "." not in key:
            continue
        group, name = key.split(".", 1)
        {"network": net, "agent_config": agent, "exp": exp}[group][name] = val
    for name in list(net):
        if isinstance(net[name], list) and name.endswith("range"):
            net[name] = tuple(net[name])
    return dataclasses.replace(
        base,
        network=dataclasses.replace(base.network, **net),
        agent_config=dataclasses.replace(base.agent_config, **agent),
        **exp,
    )


def _sweep_values(axis: str, raw: str) -> list:
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if axis == "frame_size":
        return [int(v) for v in items]
    if axis == "roster":
        return [tuple(int(x) for x in v.lower().split("x")) for v in items]
    return items


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        if ns.command == "train":
            result = run_training(cfg)
            print(json.dumps(result.summary(), indent=2))
        elif ns.command == "eval":
            result = run_evaluation(cfg, ns.checkpoint)
            print(json.dumps(result.summary(), indent=2))
        else:
            table = run_sweep(cfg, ns.axis, _sweep_values(ns.axis, ns.values))
            for row in table:
                print(json.dumps(row, default=str))
            if any(r["status"] != "ok" for r in table):
                return 1
    except (ValueError, OSError, FloatingPointError) as exc:
        print(f"sclar: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
