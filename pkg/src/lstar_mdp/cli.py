"""Command line interface: ``lstar-mdp <subcommand> ...``.

Exit status is 0 on success, 2 for configuration errors and 1 for failures
at run time.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiment as ex
from .io import MdpParseError, export_dot, load_mdp, serialize_mdp
from .mdp import equivalence_check, minimize
from .teacher import SampleStore

# flag name -> config field
_FLAGS = [
    ("--model", "model", str, "builtin model name or model JSON file"),
    ("--map", "map", str, "gridworld map file"),
    ("--learner", "learner", str, "exact, sampling or alergia"),
    ("--seed", "seed", int, "random seed"),
    ("--alpha", "alpha", float, "significance of the compatibility tests"),
    ("--n-c", "n_c", int, "samples needed for a sequence to count as complete"),
    ("--n-resample", "n_resample", int, "traces per refine query"),
    ("--n-retest", "n_retest", int, "traces per retest of a counterexample"),
    ("--n-test", "n_test", int, "tests per hypothesis state"),
    ("--p-stop", "p_stop", float, "stop probability of test walks"),
    ("--p-rand", "p_rand", float, "probability of a random input during testing"),
    ("--p-l", "p_l", float, "stop probability of uniform baseline traces"),
    ("--t-unamb", "t_unamb", float, "unambiguity threshold for stopping"),
    ("--r-min", "r_min", int, "minimum number of rounds"),
    ("--r-max", "r_max", int, "maximum number of rounds"),
    ("--eps", "eps", float, "IoAlergia significance (default 10000/N)"),
    ("--traces", "traces", str, "JSONL trace file for the alergia learner"),
    ("--n-traces", "n_traces", int, "number of traces to sample"),
    ("--lambda", "lam", float, "discount of the bisimilarity distance"),
    ("--out", "out", str, "output directory or file"),
]


def _add_experiment_flags(p, skip=()):
    p.add_argument("--config", help="JSON file with configuration fields; flags override it")
    for flag, dest, kind, text in _FLAGS:
        if dest not in skip:
            p.add_argument(flag, dest=dest, type=kind, default=None, help=text)
    p.add_argument("--prop", dest="props", action="append", default=None, help="property such as 'F<=11 goal' (repeatable)")
    p.add_argument(
        "--error-prob",
        dest="error_prob",
        action="append",
        default=None,
        metavar="TERRAIN=P",
        help="terrain error probability for gridworld maps (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lstar-mdp", description="Learn and evaluate deterministic labelled MDPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="run a learner and write a result bundle")
    _add_experiment_flags(p)

    p = sub.add_parser("eval", help="compare a learned model with the true model")
    _add_experiment_flags(p)
    p.add_argument("--learned", required=True, help="learned model JSON file")

    p = sub.add_parser("compare", help="sampling learner vs IoAlergia on the same data budget")
    _add_experiment_flags(p)

    p = sub.add_parser("simulate", help="sample uniform random traces as JSONL")
    _add_experiment_flags(p)

    p = sub.add_parser("export-dot", help="convert a model file to Graphviz DOT")
    p.add_argument("model")
    p.add_argument("--out")

    p = sub.add_parser("minimize", help="minimise a model file")
    p.add_argument("model")
    p.add_argument("--out")

    p = sub.add_parser("check", help="exact equivalence check of two model files")
    p.add_argument("model1")
    p.add_argument("model2")
    return parser


def _parse_error_probs(items):
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise ex.ConfigError("--error-prob", f"expected TERRAIN=P, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ex.ConfigError(f"--error-prob {name}", f"not a number: {value!r}") from None
    return out


def load_config(args, need_model: bool = True) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ex.ConfigError("--config", str(exc)) from None
        except json.JSONDecodeError as exc:
            raise ex.ConfigError("--config", f"line {exc.lineno}: {exc.msg}") from None
        try:
            cfg = ex.ExperimentConfig.from_dict(doc)
        except TypeError as exc:
            raise ex.ConfigError("config", str(exc)) from None
    overrides = {dest: getattr(args, dest, None) for _, dest, _, _ in _FLAGS}
    overrides["props"] = getattr(args, "props", None)
    if getattr(args, "error_prob", None):
        overrides["error_prob"] = _parse_error_probs(args.error_prob)
    return cfg.updated(**overrides).validate(need_model=need_model)


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_learn(args) -> int:
    cfg = load_config(args, need_model=False)
    if cfg.learner != "alergia" or cfg.traces is None:
        if cfg.model is None and cfg.map is None:
            raise ex.ConfigError("config.model", "a model (builtin name or file) or a map is required")
    truth = cfg.load_model() if (cfg.model or cfg.map) else None
    res = ex.run_learner(cfg, truth)
    out = Path(cfg.out or "results")
    ex.write_learn_bundle(out, res, cfg)
    print(json.dumps(res.summary))
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args)
    truth = cfg.load_model()
    props = cfg.properties(truth)
    try:
        learned = load_mdp(args.learned)
    except OSError as exc:
        raise ex.ConfigError("--learned", str(exc)) from None
    except MdpParseError as exc:
        raise ex.ConfigError("--learned", str(exc)) from None
    result = ex.evaluate(truth, learned, props, cfg.lam)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.json").write_text(json.dumps(result, indent=2) + "\n")
        (out / "eval.csv").write_text(ex.eval_csv(result))
    sys.stdout.write(ex.eval_csv(result))
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args)
    truth = cfg.load_model()
    result = ex.run_compare(cfg, truth)
    out = Path(cfg.out or "results")
    ex.write_compare_bundle(out, result, cfg)
    sys.stdout.write(ex.summary_csv(result["rows"]))
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    truth = cfg.load_model()
    sul = ex.baseline_sul(truth, cfg.seed)
    store = SampleStore()
    for _ in range(cfg.n_traces):
        store.add_trace(ex.sample_trace(sul, cfg.p_l))
    _write(store.to_jsonl(), cfg.out)
    return 0


def _load(path, field):
    try:
        return load_mdp(path)
    except OSError as exc:
        raise ex.ConfigError(field, str(exc)) from None
    except MdpParseError as exc:
        raise ex.ConfigError(field, str(exc)) from None


def cmd_export_dot(args) -> int:
    _write(export_dot(_load(args.model, "model")), args.out)
    return 0


def cmd_minimize(args) -> int:
    _write(serialize_mdp(minimize(_load(args.model, "model"))), args.out)
    return 0


def cmd_check(args) -> int:
    m1, m2 = _load(args.model1, "model1"), _load(args.model2, "model2")
    if set(m1.inputs) != set(m2.inputs):
        raise ex.ConfigError("model2", f"input alphabets differ: {sorted(m1.inputs)} vs {sorted(m2.inputs)}")
    cex = equivalence_check(m1, m2)
    print(json.dumps({"equivalent": cex is None, "counterexample": None if cex is None else list(cex)}))
    return 0


COMMANDS = {
    "learn": cmd_learn,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
    "export-dot": cmd_export_dot,
    "minimize": cmd_minimize,
    "check": cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a run-time failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
