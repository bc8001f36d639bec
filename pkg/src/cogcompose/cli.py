"""Command line front end: run, sweep, replay, report and learn-params."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import yaml

from .attention import GlobalParams
from .errors import CompositionError, ConfigInvalid
from .procedural import REWARD_FAILURE, REWARD_SUCCESS, learn_parameters
from .sim.config import SimConfig, config_summary, expand_grid, load_experiment, resolve_params
from .sim.engine import Simulation, run_scenario
from .sim.metrics import aggregate, format_report, read_csv, to_csv

log = logging.getLogger("cogcompose")

DEFAULT_GRID = {"mobility": ["slow", "medium", "fast"], "density": [20, 40, 60], "cl": [5, 10]}


def _base_config(args) -> tuple[SimConfig, dict]:
    if args.config:
        exp = load_experiment(args.config)
        cfg, grid = exp.simulation, exp.grid
    else:
        cfg, grid = SimConfig(), {}
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.runs is not None:
        kw["runs"] = args.runs
    if args.mode is not None:
        kw["mode"] = args.mode
        if args.mode == "adaptability" and cfg.users < 2 and not cfg.goals:
            kw["users"] = 2
    if args.attention is not None:
        kw["params"], kw["config_id"] = resolve_params(args.attention)
    if args.trace:
        kw["trace"] = True
    return cfg.with_(**kw), grid


def _write(out: str | None, name: str, text: str) -> Path | None:
    """Every file the CLI produces goes through here, from the parent process."""
    if out is None:
        sys.stdout.write(text)
        return None
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    path = d / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def cmd_run(args) -> int:
    cfg, _ = _base_config(args)
    records = run_scenario(cfg, parallel=args.parallel)
    _write(args.out, "metrics.csv", to_csv(records))
    return 0


def cmd_sweep(args) -> int:
    cfg, grid = _base_config(args)
    cells = expand_grid(cfg, grid or DEFAULT_GRID)
    records = []
    for i, cell in enumerate(cells):
        log.info("cell %d/%d: %s %s d=%d cl=%d %s", i + 1, len(cells), cell.mode, cell.mobility,
                 cell.density, cell.cl, cell.config_id)
        records += run_scenario(cell, parallel=args.parallel)
    csv_text = to_csv(records)
    if args.out is None:
        sys.stdout.write(csv_text)
        return 0
    path = _write(args.out, "metrics.csv", csv_text)
    _write(args.out, "summary.txt", format_report(aggregate(read_csv(path))))
    return 0


def _replay_targets(args, cfg: SimConfig) -> list[tuple[SimConfig, int]]:
    if args.source is None:
        return [(cfg.with_(seed=cfg.seed), 0)]
    src = Path(args.source)
    if not src.is_file():
        raise ConfigInvalid(f"seed file {src} does not exist")
    try:
        rows = read_csv(src)
    except ValueError as e:
        raise ConfigInvalid(str(e)) from None
    if not rows:
        raise ConfigInvalid(f"{src} holds no runs")
    out = []
    for r in rows:
        named = r["config-id"] in ("C1", "C2")
        params, cid = resolve_params(r["config-id"]) if named else (cfg.params, cfg.config_id)
        cell = cfg.with_(seed=int(r["seed"]), mode=r["mode"], mobility=r["mobility"],
                         density=int(r["density"]), cl=int(r["CL"]), params=params, config_id=cid)
        out.append((cell, 0))
    return out


def cmd_replay(args) -> int:
    cfg, _ = _base_config(args)
    cfg = cfg.with_(trace=True)
    expected = None
    if args.source is not None and Path(args.source).is_file():
        expected = Path(args.source).read_text().splitlines()[1:]
    lines = []
    for k, (cell, idx) in enumerate(_replay_targets(args, cfg)):
        sim = Simulation(cell, idx)
        rec = sim.run()
        row = to_csv([rec], header=False).rstrip("\n")
        lines.append(row)
        if expected is not None and k < len(expected) and expected[k] != row:
            print(f"replay mismatch for seed {cell.seed}:\n  recorded {expected[k]}\n  replayed {row}",
                  file=sys.stderr)
            return 3
        if args.out:
            trace = "".join(json.dumps({"host": h, **e}, sort_keys=True) + "\n"
                            for h, events in sorted(sim.traces.items()) for e in events)
            _write(args.out, f"trace-{k:03d}-seed{cell.seed}.jsonl", trace)
    text = to_csv([], header=True) + "".join(x + "\n" for x in lines)
    _write(args.out, "replay.csv", text)
    return 0


def cmd_report(args) -> int:
    rows = []
    for p in args.csv:
        if not Path(p).is_file():
            raise ConfigInvalid(f"{p} does not exist")
        try:
            rows += read_csv(p)
        except ValueError as e:
            raise ConfigInvalid(str(e)) from None
    _write(args.out, "report.txt", format_report(aggregate(rows)))
    return 0


def episode_reward(cfg: SimConfig, params: GlobalParams, run: int) -> float:
    """Reward of one composition episode: success pays, failed executions and elapsed time cost."""
    rec = Simulation(cfg.with_(params=params, config_id="custom"), run).run()
    reward = REWARD_SUCCESS * rec.completed + REWARD_FAILURE * rec.exec_failures
    return reward / max(rec.requests, 1) - rec.ct_s


def cmd_learn(args) -> int:
    cfg, _ = _base_config(args)
    if args.mode is None:
        cfg = cfg.with_(mode="adaptability", users=max(cfg.users, 2))
    runs = args.runs if args.runs is not None else 100
    best, history = learn_parameters(lambda p, r: episode_reward(cfg, p, r), runs=runs,
                                     start=cfg.params, seed=cfg.seed)
    doc = {"id": "learned", "params": dict(zip(("theta", "pi", "phi", "gamma", "delta"),
                                               [float(v) for v in best.as_tuple()])),
           "runs": runs, "base": config_summary(cfg)}
    _write(args.out, "learned.yaml", yaml.safe_dump(doc, sort_keys=False))
    if args.out:
        _write(args.out, "learning-history.jsonl",
               "".join(json.dumps(h) + "\n" for h in history))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment YAML file")
    common.add_argument("--seed", type=int, help="base seed (run i uses seed + i)")
    common.add_argument("--runs", type=int, help="runs per configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (default: stdout)")
    common.add_argument("--parallel", type=int, default=1, help="worker processes")
    common.add_argument("--attention", metavar="C1|C2|PATH", help="behavior network parameters")
    common.add_argument("--mode", choices=["flexibility", "adaptability"])
    common.add_argument("--trace", action="store_true", help="record agent and network traces")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cogcompose", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one configuration").set_defaults(fn=cmd_run)
    sub.add_parser("sweep", parents=[common], help="run a grid and summarise it").set_defaults(fn=cmd_sweep)
    rp = sub.add_parser("replay", parents=[common], help="re-run recorded seeds and dump traces")
    rp.add_argument("source", nargs="?", help="metrics CSV whose rows are replayed")
    rp.set_defaults(fn=cmd_replay)
    rep = sub.add_parser("report", parents=[common], help="aggregate metrics CSVs")
    rep.add_argument("csv", nargs="+")
    rep.set_defaults(fn=cmd_report)
    sub.add_parser("learn-params", parents=[common],
                   help="search attention parameters by utility learning").set_defaults(fn=cmd_learn)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.parallel < 1:
            raise ConfigInvalid("--parallel must be at least 1")
        return args.fn(args)
    except (CompositionError, OSError, ValueError) as e:
        print(f"cogcompose {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
