"""Experiment configuration and drivers behind the command line.

A run writes a *result bundle* into its output directory.  Bundle files
depend only on the configuration, so repeating a run with the same seed
reproduces them byte for byte.  Wall-clock times go to a separate
``timing.json`` that is not part of the bundle.
"""

from __future__ import annotations

import csv
import io as _io
import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .alergia import ioalergia_learn
from .exact import ExactTeacher, learn_exact
from .io import export_dot, load_mdp, serialize_mdp
from .mdp import Mdp, PropertySpec
from .metrics import DistanceConfig, bisim_distance, pmax_bounded
from .sampling import LearnerConfig, chaos_reachable, learn_sampling
from .sul import BUILTIN_MODELS, DEFAULT_ERROR_PROB, TERRAINS, Sul, builtin_map_text, builtin_model, load_gridworld, sample_trace
from .teacher import SampleStore, SamplingTeacher, TeacherConfig

LEARNERS = ("exact", "sampling", "alergia")
BUNDLE_FILES = ("model.json", "model.dot", "rounds.json", "summary.json", "summary.csv", "config.json")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass
class ExperimentConfig:
    model: Optional[str] = None
    map: Optional[str] = None
    error_prob: dict = field(default_factory=dict)
    learner: str = "sampling"
    seed: int = 0
    alpha: float = 0.05
    n_c: int = 20
    n_resample: int = 300
    n_retest: int = 300
    n_test: int = 50
    p_stop: float = 0.25
    p_rand: float = 0.25
    p_l: float = 0.125
    t_unamb: float = 0.99
    r_min: int = 500
    r_max: int = 4000
    alpha_schedule: Optional[float] = None
    trim: bool = True
    eps: Optional[float] = None
    traces: Optional[str] = None
    n_traces: int = 10_000
    lam: float = 0.9
    props: list = field(default_factory=list)
    out: Optional[str] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config", "must be an object")
        names = {f.name for f in fields(cls)}
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        unknown = sorted(set(doc) - names)
        if unknown:
            raise ConfigError(f"config.{unknown[0]}", "unknown field")
        return cls(**doc)

    def updated(self, **overrides) -> "ExperimentConfig":
        doc = asdict(self)
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(**doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def bundle_dict(self) -> dict:
        """Configuration as recorded in a bundle; the output location is left out."""
        doc = asdict(self)
        del doc["out"]
        return doc

    def teacher_config(self) -> TeacherConfig:
        return TeacherConfig(
            n_c=self.n_c,
            n_resample=self.n_resample,
            n_test=self.n_test,
            n_retest=self.n_retest,
            p_stop=self.p_stop,
            p_rand=self.p_rand,
        )

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(
            alpha=self.alpha,
            t_unamb=self.t_unamb,
            r_min=self.r_min,
            r_max=self.r_max,
            alpha_schedule=self.alpha_schedule,
            trim=self.trim,
        )

    def validate(self, need_model: bool = True) -> "ExperimentConfig":
        if self.learner not in LEARNERS:
            raise ConfigError("config.learner", f"must be one of {list(LEARNERS)}, got {self.learner!r}")
        for name in ("seed", "n_c", "n_resample", "n_retest", "n_test", "r_min", "r_max", "n_traces"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config.{name}", f"must be an integer, got {value!r}")
        for name in ("alpha", "p_stop", "p_rand", "p_l", "t_unamb", "lam"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config.{name}", f"must be a number, got {value!r}")
        for name, obj in (("teacher", self.teacher_config()), ("learner", self.learner_config())):
            try:
                obj.validate()
            except ValueError as exc:
                raise ConfigError(f"config.{name}", str(exc)) from None
        if self.n_traces < 1:
            raise ConfigError("config.n_traces", "must be positive")
        if not (0.0 < self.p_l <= 1.0):
            raise ConfigError("config.p_l", f"must lie in (0, 1], got {self.p_l}")
        if not (0.0 < self.lam < 1.0):
            raise ConfigError("config.lambda", f"must lie in (0, 1), got {self.lam}")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError("config.eps", "must be positive")
        if not isinstance(self.error_prob, dict):
            raise ConfigError("config.error_prob", "must map terrain codes to probabilities")
        for terrain, p in self.error_prob.items():
            if terrain not in TERRAINS:
                raise ConfigError(f"config.error_prob.{terrain}", f"unknown terrain; use one of {list(TERRAINS)}")
            if not isinstance(p, (int, float)) or not (0.0 <= p < 1.0):
                raise ConfigError(f"config.error_prob.{terrain}", f"must lie in [0, 1), got {p!r}")
        if self.model is not None and self.map is not None:
            raise ConfigError("config.map", "give either a model or a map, not both")
        if need_model and self.model is None and self.map is None:
            raise ConfigError("config.model", "a model (builtin name or file) or a map is required")
        if self.model is not None and self.model not in BUILTIN_MODELS and not Path(self.model).is_file():
            raise ConfigError("config.model", f"not a builtin model ({sorted(BUILTIN_MODELS)}) or an existing file: {self.model!r}")
        if self.map is not None and not Path(self.map).is_file():
            raise ConfigError("config.map", f"file not found: {self.map!r}")
        if self.traces is not None and not Path(self.traces).is_file():
            raise ConfigError("config.traces", f"file not found: {self.traces!r}")
        if not isinstance(self.props, list):
            raise ConfigError("config.props", "must be a list of property strings")
        for k, text in enumerate(self.props):
            try:
                PropertySpec.parse(text)
            except (ValueError, AttributeError) as exc:
                raise ConfigError(f"config.props[{k}]", str(exc)) from None
        return self

    def _error_probs(self):
        return {**DEFAULT_ERROR_PROB, **self.error_prob} if self.error_prob else None

    def load_model(self) -> Mdp:
        if self.map is not None:
            try:
                return load_gridworld(Path(self.map).read_text(), self._error_probs())
            except ValueError as exc:
                raise ConfigError("config.map", str(exc)) from None
        if self.model in BUILTIN_MODELS:
            if self.error_prob and self.model.startswith("gridworld"):
                return load_gridworld(builtin_map_text(self.model), self._error_probs())
            return builtin_model(self.model)
        try:
            return load_mdp(self.model)
        except ValueError as exc:
            raise ConfigError("config.model", str(exc)) from None

    def properties(self, model: Optional[Mdp] = None) -> list:
        props = [PropertySpec.parse(p) for p in self.props]
        if model is not None:
            known = set(model.outputs) | set(model.labels)
            for k, p in enumerate(props):
                bad = sorted(({p.goal} | set(p.avoid)) - known)
                if bad:
                    raise ConfigError(f"config.props[{k}]", f"unknown labels {bad}; model outputs are {list(model.outputs)}")
        return props


# -- evaluation ---------------------------------------------------------------------------


def evaluate(truth: Mdp, learned: Mdp, props, lam: float = 0.9) -> dict:
    """Distance and per-property maximal probabilities of ``learned`` against ``truth``."""
    known = set(truth.outputs) | set(truth.labels)
    rows = []
    for p in props:
        p = PropertySpec.parse(p) if isinstance(p, str) else p
        bad = sorted(({p.goal} | set(p.avoid)) - known)
        if bad:
            raise ValueError(f"property {p} uses unknown labels {bad}; model outputs are {list(truth.outputs)}")
        t = pmax_bounded(truth, p)
        h = pmax_bounded(learned, p, known_labels=known)
        rows.append({"property": str(p), "true": t, "learned": h, "abs_diff": abs(t - h)})
    return {
        "distance": bisim_distance(truth, learned, DistanceConfig(lam=lam)),
        "lambda": lam,
        "properties": rows,
    }


def eval_csv(result: dict) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["measure", "true", "learned", "abs_diff"])
    w.writerow([f"delta_{result['lambda']}", "", _fmt(result["distance"]), ""])
    for row in result["properties"]:
        w.writerow([row["property"], _fmt(row["true"]), _fmt(row["learned"]), _fmt(row["abs_diff"])])
    return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


# -- learning -----------------------------------------------------------------------------


@dataclass
class LearnResult:
    model: Mdp
    log: list
    summary: dict
    seconds: float
    store: Optional[SampleStore] = None


def sampling_sul(model: Mdp, seed: int) -> Sul:
    return Sul(model, np.random.SeedSequence([seed, 0]))


def baseline_sul(model: Mdp, seed: int) -> Sul:
    return Sul(model, np.random.SeedSequence([seed, 1]))


def run_learner(cfg: ExperimentConfig, truth: Optional[Mdp]) -> LearnResult:
    """Run the configured learner; ``truth`` may be None for passive learning from a trace file."""
    start = time.process_time()
    store = None
    if cfg.learner == "exact":
        teacher = ExactTeacher(truth)
        model, _, log = learn_exact(teacher)
        summary = {"outputs": 0, "traces": 0, "states": model.n_states, "rounds": len(log)}
        summary["output_queries"] = teacher.n_odq
        summary["equivalence_queries"] = teacher.n_eq
    elif cfg.learner == "sampling":
        sul = sampling_sul(truth, cfg.seed)
        teacher = SamplingTeacher(sul, cfg.teacher_config().validate(), alpha=cfg.alpha)
        model, _, log = learn_sampling(teacher, cfg.learner_config().validate())
        store = teacher.store
        summary = {
            "outputs": sul.n_outputs,
            "traces": sul.n_resets,
            "states": model.n_states - 1,
            "rounds": len(log),
            "chaos_reachable": chaos_reachable(model),
        }
    else:
        if cfg.traces is not None:
            store = SampleStore.from_jsonl(Path(cfg.traces).read_text())
            traces = store.traces()
            n_outputs, n_traces = store.n_outputs, store.n_traces
        else:
            sul = baseline_sul(truth, cfg.seed)
            traces = [sample_trace(sul, cfg.p_l) for _ in range(cfg.n_traces)]
            n_outputs, n_traces = sul.n_outputs, sul.n_resets
        model = ioalergia_learn(traces, cfg.eps, inputs=None if truth is None else truth.inputs)
        log = []
        summary = {"outputs": n_outputs, "traces": n_traces, "states": model.n_states, "rounds": 0}
    seconds = time.process_time() - start
    summary = {"learner": cfg.learner, "seed": cfg.seed, **summary}
    return LearnResult(model, log, summary, seconds, store)


def summary_csv(rows: list) -> str:
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def write_learn_bundle(out: Path, res: LearnResult, cfg: ExperimentConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(serialize_mdp(res.model))
    (out / "model.dot").write_text(export_dot(res.model))
    (out / "rounds.json").write_text(_dump(res.log))
    (out / "summary.json").write_text(_dump(res.summary))
    (out / "summary.csv").write_text(summary_csv([res.summary]))
    (out / "config.json").write_text(_dump(cfg.bundle_dict()))
    if res.store is not None and cfg.learner == "sampling":
        (out / "traces.jsonl").write_text(res.store.to_jsonl())
    (out / "timing.json").write_text(_dump({"seconds": res.seconds}))


def sample_budget(sul: Sul, n_outputs: int, p_l: float) -> list:
    """Uniform random traces whose combined number of outputs is exactly ``n_outputs``."""
    traces, total = [], 0
    while total < n_outputs:
        t = sample_trace(sul, p_l)
        k = (len(t) + 1) // 2
        if total + k > n_outputs:
            t = t[: 2 * (n_outputs - total) - 1]
            k = n_outputs - total
        traces.append(t)
        total += k
    return traces


def run_compare(cfg: ExperimentConfig, truth: Mdp) -> dict:
    """Sampling learner and IoAlergia on the same data budget, both evaluated against ``truth``."""
    props = cfg.properties(truth)
    lstar = run_learner(cfg.updated(learner="sampling"), truth)
    budget = lstar.summary["outputs"]
    start = time.process_time()
    sul = baseline_sul(truth, cfg.seed)
    traces = sample_budget(sul, budget, cfg.p_l)
    alergia = ioalergia_learn(traces, cfg.eps, inputs=truth.inputs)
    alergia_seconds = time.process_time() - start
    n_out = sum((len(t) + 1) // 2 for t in traces)
    rows = []
    for name, model, outputs, n_traces in (
        ("lstar_mdp", lstar.model, budget, lstar.summary["traces"]),
        ("ioalergia", alergia, n_out, len(traces)),
    ):
        ev = evaluate(truth, model, props, cfg.lam)
        row = {
            "learner": name,
            "outputs": outputs,
            "traces": n_traces,
            "states": model.n_states - (1 if name == "lstar_mdp" else 0),
            f"delta_{cfg.lam}": ev["distance"],
        }
        for p in ev["properties"]:
            row[f"Pmax({p['property']})"] = p["learned"]
        rows.append(row)
    true_row = {"learner": "true", "outputs": "", "traces": "", "states": truth.n_states, f"delta_{cfg.lam}": ""}
    for p in props:
        true_row[f"Pmax({p})"] = pmax_bounded(truth, p)
    return {
        "rows": [true_row] + rows,
        "models": {"lstar_mdp": lstar.model, "ioalergia": alergia},
        "rounds": lstar.log,
        "timing": {"lstar_mdp": lstar.seconds, "ioalergia": alergia_seconds},
        "budget": {"lstar_mdp": budget, "ioalergia": n_out},
    }


def write_compare_bundle(out: Path, result: dict, cfg: ExperimentConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rows = result["rows"]
    (out / "comparison.json").write_text(_dump(rows))
    (out / "comparison.csv").write_text(summary_csv(rows))
    for name, m in result["models"].items():
        (out / f"{name}.json").write_text(serialize_mdp(m))
    (out / "rounds.json").write_text(_dump(result["rounds"]))
    (out / "config.json").write_text(_dump(cfg.bundle_dict()))
    (out / "timing.json").write_text(_dump(result["timing"]))
