"""Command line: gen-env, gen-traces, infer, verify, train, export-dot, run.

Every command reads its options from flags and, optionally, a JSON config
file.  Flags win over the file.  A config file holds shared keys at the top
level and per-command keys in sections named after the commands, so one file
can drive the whole gen-env -> gen-traces -> infer -> verify -> train chain.
"""

import argparse
import json
import logging
import os
import sys
import tempfile
import time

from .automata import EMPTY_LABEL, dumps_machine, loads_machine, make_label, to_dot
from .envs import (GeneratorParams, build_fig1_env, build_phase_grid, env_from_json,
                   generate_random_env, generate_traces, trace_stats)
from .errors import DataError, GenerationError, TmrmError, UndefinedStepError
from .oracle import check_resolvent
from .pipeline import PipelineConfig, PipelineError, infer_machines, replay_corpus
from .rl_agent import (QLearningConfig, dumps_q_table, evaluate_greedy, train, value_iteration,
                       write_curve_csv)
from .traces import read_traces, write_traces

log = logging.getLogger("tmrm")

EXIT_OK, EXIT_DATA, EXIT_VERIFY, EXIT_INTERNAL = 0, 2, 3, 4
COMMANDS = ("gen-env", "gen-traces", "infer", "verify", "train", "export-dot", "run")


class VerificationFailed(Exception):
    pass


# -- file helpers ------------------------------------------------------------------------


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=1, sort_keys=True) + "\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def out_path(args, name):
    return os.path.join(args.out, name)


def parse_label(text):
    """``"key,toilet"`` -> label set; ``""`` or ``"none"`` -> empty label."""
    text = text.strip()
    if text.lower() in ("", "none", "{}"):
        return EMPTY_LABEL
    return make_label(p.strip() for p in text.split(","))


def load_env(path):
    d = read_json(path)
    return env_from_json(d.get("env", d))


def load_machines(args):
    from .automata import RewardMachine, TransitionMachine
    try:
        with open(args.tm, encoding="utf-8") as fh:
            tm = loads_machine(fh.read())
        with open(args.rm, encoding="utf-8") as fh:
            rm = loads_machine(fh.read())
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {exc.filename}") from exc
    except (ValueError, KeyError) as exc:
        raise DataError(f"cannot read machine: {exc}") from exc
    if not isinstance(tm, TransitionMachine) or not isinstance(rm, RewardMachine):
        raise DataError("--tm must hold a transition machine and --rm a reward machine")
    return tm, rm


# -- commands ---------------------------------------------------------------------------------


def cmd_gen_env(args):
    if args.kind == "fig1":
        env, extra = build_fig1_env(), {}
    elif args.kind == "phase":
        env, extra = build_phase_grid(args.size, args.phases, seed=args.seed), {}
    else:
        params = GeneratorParams(grid=args.size, tm_states=args.tm_states, rm_states=args.rm_states,
                                 labels=args.labels, extra_edge_prob=args.extra_edge_prob,
                                 impassable_frac=args.impassable_frac, label_window=args.label_window,
                                 seed=args.seed)
        env, spec = generate_random_env(params)
        extra = {"ground_truth": spec.to_json()}
    doc = {"env": env.to_json(), **extra}
    path = out_path(args, "env.json")
    write_json(path, doc)
    log.info("wrote %s", path)
    return doc


def cmd_gen_traces(args):
    env = load_env(args.env or out_path(args, "env.json"))
    traces = generate_traces(env, args.n, args.max_len, seed=args.seed, jobs=args.jobs)
    path = out_path(args, "traces.jsonl")
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    os.close(fd)
    write_traces(tmp, traces)
    os.replace(tmp, path)
    stats = trace_stats(traces)
    write_json(out_path(args, "traces.stats.json"), stats)
    log.info("wrote %d traces (mean length %.1f) to %s", stats["traces"], stats["mean_length"], path)
    return stats


def cmd_infer(args):
    path = args.traces or out_path(args, "traces.jsonl")
    if not os.path.exists(path):
        raise DataError(f"file not found: {path}")
    traces = read_traces(path)
    trivial = frozenset(parse_label(t) for t in args.trivial_beta) if args.trivial_beta else None
    cfg = PipelineConfig(supplement=not args.no_supplement,
                         redundant_alpha=not args.no_reductions, trivial_beta=not args.no_reductions)
    try:
        tm, rm, manifest = infer_machines(traces, trivial, config=cfg)
    except PipelineError as exc:
        write_json(out_path(args, "manifest.json"), exc.manifest.to_json())
        raise exc.cause from exc
    problems = replay_corpus(tm, rm, traces)
    manifest.corpus["replay_mismatches"] = len(problems)
    atomic_write(out_path(args, "tm.json"), dumps_machine(tm) + "\n")
    atomic_write(out_path(args, "rm.json"), dumps_machine(rm) + "\n")
    doc = manifest.to_json()
    doc["corpus"]["path"] = os.path.abspath(path)
    write_json(out_path(args, "manifest.json"), doc)
    log.info("TM states: %d, RM states: %d", tm.n_states, rm.n_states)
    print(json.dumps({"tm_states": tm.n_states, "rm_states": rm.n_states,
                      "replay_mismatches": len(problems)}))
    if problems:
        raise VerificationFailed(f"{len(problems)} corpus predictions are wrong")
    return doc


def cmd_verify(args):
    args.tm = args.tm or out_path(args, "tm.json")
    args.rm = args.rm or out_path(args, "rm.json")
    env = load_env(args.env or out_path(args, "env.json"))
    tm, rm = load_machines(args)
    report = {
        "depth": args.depth,
        "tm": check_resolvent(tm, env, args.depth).to_json(),
        "rm": check_resolvent(rm, env, args.depth, tm=tm if rm.supplemented else None).to_json(),
    }
    if args.traces:
        problems = replay_corpus(tm, rm, read_traces(args.traces))
        report["replay_mismatches"] = len(problems)
        report["replay_examples"] = problems[:10]
    ok = report["tm"]["ok"] and report["rm"]["ok"] and not report.get("replay_mismatches")
    report["ok"] = ok
    write_json(out_path(args, "verify.json"), report)
    print(json.dumps(report, sort_keys=True))
    if not ok:
        raise VerificationFailed("machines are not resolvent")
    return report


def cmd_train(args):
    args.tm = args.tm or out_path(args, "tm.json")
    args.rm = args.rm or out_path(args, "rm.json")
    env = load_env(args.env or out_path(args, "env.json"))
    tm, rm = load_machines(args)
    cfg = QLearningConfig(args.learning_rate, args.discount, args.epsilon, args.epsilon_decay,
                          args.epsilon_min, args.episodes, args.max_steps, args.seed, args.tie_break)
    result = train(env, tm, rm, cfg)
    greedy_return = evaluate_greedy(env, tm, rm, result.q_table, max_steps=args.max_steps)
    summary = {
        "config": cfg.__dict__,
        "episodes": len(result.curve),
        "steps": result.steps,
        "markov_violations": result.markov_violations,
        "greedy_return": greedy_return,
    }
    if args.value_iteration:
        summary["optimal_return"] = value_iteration(env, discount=cfg.discount,
                                                     max_steps=args.max_steps).optimal_return
    atomic_write(out_path(args, "q_table.json"), dumps_q_table(result.q_table, env.actions) + "\n")
    d = os.path.abspath(args.out)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    os.close(fd)
    write_curve_csv(tmp, result.curve)
    os.replace(tmp, out_path(args, "curve.csv"))
    write_json(out_path(args, "train.json"), summary)
    print(json.dumps(summary, sort_keys=True))
    return summary


def cmd_export_dot(args):
    paths = args.machines or [out_path(args, "tm.json"), out_path(args, "rm.json")]
    written = []
    for p in paths:
        try:
            with open(p, encoding="utf-8") as fh:
                m = loads_machine(fh.read())
        except FileNotFoundError as exc:
            raise DataError(f"file not found: {p}") from exc
        name = os.path.splitext(os.path.basename(p))[0]
        target = out_path(args, name + ".dot")
        atomic_write(target, to_dot(m, title=name))
        written.append(target)
    log.info("wrote %s", ", ".join(written))
    return written


def cmd_run(args):
    timings = {}
    for name, fn in (("gen-env", cmd_gen_env), ("gen-traces", cmd_gen_traces), ("infer", cmd_infer),
                     ("verify", cmd_verify), ("train", cmd_train)):
        t0 = time.perf_counter()
        fn(args)
        timings[name] = time.perf_counter() - t0
    write_json(out_path(args, "run.json"), {"timings_seconds": timings,
                                           "note": "wall-clock, hardware dependent"})


# -- argument parsing ----------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trivial-beta", action="append", default=None, metavar="LABEL",
                   help="label treated as trivial (comma-separated propositions; 'none' = empty label)")
    p.add_argument("-v", "--verbose", action="store_true")


def _env_opts(p):
    p.add_argument("--kind", choices=("fig1", "phase", "random"), default="fig1")
    p.add_argument("--size", type=int, default=25)
    p.add_argument("--phases", type=int, default=3)
    p.add_argument("--tm-states", type=int, default=7)
    p.add_argument("--rm-states", type=int, default=3)
    p.add_argument("--labels", type=int, default=5)
    p.add_argument("--extra-edge-prob", type=float, default=0.3)
    p.add_argument("--impassable-frac", type=float, default=0.3)
    p.add_argument("--label-window", type=int, default=None)


def _trace_opts(p):
    p.add_argument("--env", help="environment file (default: OUT/env.json)")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--max-len", type=int, default=50)


def _infer_opts(p):
    p.add_argument("--traces", help="trace JSONL (default: OUT/traces.jsonl)")
    p.add_argument("--no-supplement", action="store_true")
    p.add_argument("--no-reductions", action="store_true")


def _machine_opts(p):
    p.add_argument("--tm", help="TM file (default: OUT/tm.json)")
    p.add_argument("--rm", help="RM file (default: OUT/rm.json)")


def _verify_opts(p):
    p.add_argument("--depth", type=int, default=12)


def _train_opts(p):
    d = QLearningConfig()
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--discount", type=float, default=d.discount)
    p.add_argument("--epsilon", type=float, default=d.epsilon)
    p.add_argument("--epsilon-decay", type=float, default=d.epsilon_decay)
    p.add_argument("--epsilon-min", type=float, default=d.epsilon_min)
    p.add_argument("--episodes", type=int, default=d.episodes)
    p.add_argument("--max-steps", type=int, default=d.max_steps)
    p.add_argument("--tie-break", choices=("lowest", "random"), default=d.tie_break)
    p.add_argument("--value-iteration", action="store_true",
                   help="also report the optimal return of the hidden MDP")


def build_parser():
    parser = argparse.ArgumentParser(prog="tmrm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "gen-env": (cmd_gen_env, [_env_opts]),
        "gen-traces": (cmd_gen_traces, [_trace_opts]),
        "infer": (cmd_infer, [_infer_opts]),
        "verify": (cmd_verify, [_machine_opts, _verify_opts, _infer_opts_traces_only]),
        "train": (cmd_train, [_machine_opts, _train_opts, _env_only]),
        "export-dot": (cmd_export_dot, [_dot_opts]),
        "run": (cmd_run, [_env_opts, _trace_opts, _infer_opts, _machine_opts, _verify_opts, _train_opts]),
    }
    for name, (fn, adders) in specs.items():
        p = sub.add_parser(name)
        _common(p)
        for add in adders:
            add(p)
        p.set_defaults(func=fn)
    return parser


def _infer_opts_traces_only(p):
    p.add_argument("--env", help="environment file (default: OUT/env.json)")
    p.add_argument("--traces", help="optionally replay this corpus too")


def _env_only(p):
    p.add_argument("--env", help="environment file (default: OUT/env.json)")


def _dot_opts(p):
    p.add_argument("machines", nargs="*", help="machine JSON files (default: OUT/tm.json OUT/rm.json)")


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = read_json(args.config)
    if not isinstance(cfg, dict):
        raise DataError("config file must hold a JSON object")
    sub = _subparser(parser, args.command)
    known = {a.dest for a in sub._actions} - {"help", "config", "func"}
    values = {k: v for k, v in cfg.items() if k not in COMMANDS}
    section = cfg.get(args.command, {})
    if not isinstance(section, dict):
        raise DataError(f"config section {args.command!r} must be an object")
    if args.command == "run":
        for name in COMMANDS:
            values.update(cfg.get(name, {}))
    else:
        values.update(section)
    keys = {k.replace("-", "_"): v for k, v in values.items()}
    # keys for other commands are allowed at the top level only if some command knows them
    all_known = set()
    for name in COMMANDS:
        all_known |= {a.dest for a in _subparser(parser, name)._actions}
    unknown = sorted(k for k in keys if k not in all_known)
    for name in COMMANDS:
        sec = cfg.get(name, {})
        unknown += sorted(f"{name}.{k}" for k in sec if k.replace("-", "_") not in
                          {a.dest for a in _subparser(parser, name)._actions})
    if unknown:
        raise DataError(f"unknown config keys: {', '.join(unknown)}")
    sub.set_defaults(**{k: v for k, v in keys.items() if k in known})
    return parser.parse_args(argv)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        args = parse_args(argv)
        if not args.verbose:
            log.setLevel(logging.WARNING)
        args.func(args)
    except VerificationFailed as exc:
        log.error("verification failed: %s", exc)
        return EXIT_VERIFY
    except (DataError, GenerationError, UndefinedStepError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except TmrmError as exc:
        log.error("%s", exc)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
