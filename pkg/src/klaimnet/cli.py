"""Command line entry point: ``klaimnet check|simulate|explore|services|examples``."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .core import KlaimError, StaleTransition
from .dsl import EXTENSIONS, ParseErrors, parse_net, parse_trace_json, render_trace_json, step_json
from .engine import EngineConfig, enabled
from .explorer import Bounds, explore
from .services import list_services
from .simulator import replay, run

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_IO = 2
EXIT_TRUNCATED = 3


class _IOFailure(Exception):
    pass


def _plural(n, word):
    return f"{n} {word}" if n == 1 else f"{n} {word}s"


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise _IOFailure(f"{path}: {e.strerror or e}") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise _IOFailure(f"{path}: {e.strerror or e}") from None


def _load(args):
    result = parse_net(_read(args.file), extensions=args.extensions, filename=args.file)
    for w in result.warnings:
        print(w, file=sys.stderr)
    return result


def _config(args) -> EngineConfig:
    return EngineConfig(strict=getattr(args, "strict", False), faults=getattr(args, "faults", False))


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _registries(state) -> dict:
    return {site: [r.as_json() for r in list_services(state, site)] for site in sorted(state.nodes)}


def cmd_check(args) -> int:
    result = _load(args)
    print(f"{args.file}: ok ({len(result.state.nodes)} nodes, {len(result.assertions)} assertions)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    result = _load(args)
    cfg = _config(args)
    trace, final = run(result.state, args.seed, args.max_steps, cfg)
    remaining = enabled(final, cfg)
    if remaining:
        stopped = "max_steps"
    elif final.terminated:
        stopped = "terminated"
    else:
        stopped = "stalled"
    summary = {
        "file": args.file,
        "seed": args.seed,
        "steps": len(trace.steps),
        "stopped": stopped,
        "cutoff": stopped == "max_steps",
        "registries": _registries(final),
    }
    if stopped == "stalled" and cfg.strict:
        relaxed = enabled(final, EngineConfig(strict=False, faults=cfg.faults))
        summary["blocked_by_strict"] = [step_json(t.label) for t in relaxed]
    if args.json:
        _write(args.json, render_trace_json(trace, final))
    sys.stdout.write(_dump(summary))
    if stopped == "stalled":
        print(f"stalled after {_plural(len(trace.steps), 'step')}", file=sys.stderr)
    return EXIT_OK


def cmd_explore(args) -> int:
    result = _load(args)
    bounds = Bounds(max_states=args.max_states, max_depth=args.max_depth)
    res = explore(result.state, _config(args), bounds, result.assertions, workers=args.workers)
    verdicts = []
    for v in res.verdicts:
        entry = {"assertion": str(v.assertion), "verdict": v.verdict}
        if v.witness is not None:
            entry["witness"] = [step_json(s) for s in v.witness.steps]
        verdicts.append(entry)
        extra = f" (witness: {_plural(len(v.witness.steps), 'step')})" if v.witness is not None else ""
        print(f"{v.verdict.upper()}  {v.assertion}{extra}")
    stats = {"states": res.states_visited, "transitions": res.transitions_fired, "truncated": res.truncated}
    print(f"states={stats['states']} transitions={stats['transitions']} truncated={str(res.truncated).lower()}")
    if args.json:
        _write(args.json, _dump({"file": args.file, "verdicts": verdicts, "stats": stats}))
    if not all(v.passed for v in res.verdicts):
        return EXIT_FAIL
    return EXIT_TRUNCATED if res.truncated else EXIT_OK


def cmd_services(args) -> int:
    result = _load(args)
    state = result.state
    if args.after:
        state = replay(state, parse_trace_json(_read(args.after)), _config(args))
    if args.site is None:
        doc = _registries(state)
    else:
        doc = [r.as_json() for r in list_services(state, args.site)]
    sys.stdout.write(_dump(doc))
    return EXIT_OK


def bundled() -> list:
    root = resources.files("klaimnet") / "scenarios"
    return sorted((p.name, p) for p in root.iterdir() if p.name.endswith(".klaim"))


def cmd_examples(args) -> int:
    files = bundled()
    if args.dest is None:
        for name, _ in files:
            print(name)
        return EXIT_OK
    dest = Path(args.dest)
    try:
        dest.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise _IOFailure(f"{dest}: {e.strerror or e}") from None
    for name, src in files:
        _write(str(dest / name), src.read_text(encoding="utf-8"))
        print(dest / name)
    return EXIT_OK


def _extensions(text: str) -> tuple:
    names = tuple(sorted({n.strip() for n in text.split(",") if n.strip()}))
    unknown = set(names) - EXTENSIONS
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown extension: {', '.join(sorted(unknown))}")
    return names


def _workers(text: str):
    if text == "auto":
        return text
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("workers must be >= 1 or 'auto'")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="klaimnet", description="Model and explore KLAIM sensor-actuator nets.")
    sub = parser.add_subparsers(dest="command", required=True)

    def net_command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file")
        p.add_argument("--extensions", type=_extensions, default=(), help="comma separated, e.g. open-accept")
        p.set_defaults(func=func)
        return p

    def engine_flags(p):
        p.add_argument("--strict", action="store_true", help="only linked nodes may be addressed")
        p.add_argument("--faults", action="store_true", help="allow spontaneous link failures")
        p.add_argument("--json", metavar="OUT", help="write the JSON result to OUT")

    net_command("check", cmd_check, "parse and statically check a net")

    p = net_command("simulate", cmd_simulate, "run one seeded random execution")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=10_000)
    engine_flags(p)

    p = net_command("explore", cmd_explore, "explore all interleavings and decide assertions")
    p.add_argument("--max-states", type=int, default=Bounds().max_states)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--workers", type=_workers, default="auto")
    engine_flags(p)

    p = net_command("services", cmd_services, "print service registries as JSON")
    p.add_argument("--site")
    p.add_argument("--after", metavar="TRACE", help="replay a JSON trace first")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--faults", action="store_true")

    p = sub.add_parser("examples", help="list or extract the bundled scenarios")
    p.add_argument("--dest", help="directory to copy the scenarios into")
    p.set_defaults(func=cmd_examples)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _IOFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ParseErrors as e:
        for d in e.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_FAIL
    except StaleTransition as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, KeyError, TypeError) as e:
        # malformed trace files
        print(f"error: bad trace: {e}", file=sys.stderr)
        return EXIT_FAIL
    except KlaimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
