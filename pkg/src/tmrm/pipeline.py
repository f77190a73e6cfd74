"""End-to-end inference: TM first, then the RM over TM-supplemented traces."""

from dataclasses import asdict, dataclass, field
import time

from .automata import EMPTY_LABEL, RewardMachine, TransitionMachine, format_label, machine_to_dict
from .db_rpni import infer_with_stats
from .errors import DataError, TmrmError
from .preprocess import reduce_samples, restore
from .supplement import supplement_corpus
from .traces import corpus_digest, to_rm_samples, to_tm_samples


@dataclass
class PipelineConfig:
    trivial_betas: frozenset = frozenset([EMPTY_LABEL])
    supplement: bool = True
    redundant_alpha: bool = True
    trivial_beta: bool = True

    def to_json(self):
        return {
            "trivial_betas": [sorted(b) for b in sorted(self.trivial_betas, key=sorted)],
            "supplement": self.supplement,
            "redundant_alpha": self.redundant_alpha,
            "trivial_beta": self.trivial_beta,
        }


@dataclass
class PipelineManifest:
    config: dict
    corpus: dict
    stages: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    status: str = "running"
    error: str = None

    def to_json(self, timings=True):
        d = asdict(self)
        if not timings:
            d.pop("timings")
        else:
            d["timings_note"] = "wall-clock seconds, hardware dependent"
        return d


class PipelineError(TmrmError):
    """Wraps a stage failure; ``manifest`` holds everything finished before it."""

    def __init__(self, stage, cause, manifest):
        self.stage = stage
        self.cause = cause
        self.manifest = manifest
        super().__init__(f"{stage} failed: {cause}")


def _learn(samples, cfg, trivial):
    # reductions are applied, the machine is learned, then restored straight away
    use_trivial = frozenset(trivial & samples.beta) if cfg.trivial_beta else frozenset()
    reduced, record = reduce_samples(samples, use_trivial, redundant=cfg.redundant_alpha)
    machine, stats = infer_with_stats(reduced)
    machine = restore(machine, record)
    summary = {
        "samples": len(samples),
        "input_symbols": samples.total_length,
        "reduced_input_symbols": reduced.total_length,
        "alpha": len(samples.alpha),
        "reduced_alpha": len(reduced.alpha),
        "reduction": record.to_json(),
        "stats": stats.to_json(),
    }
    return machine, summary


def infer_machines(traces, trivial_betas=None, config=None, supplement=None):
    """Returns ``(TransitionMachine, RewardMachine, PipelineManifest)``.

    ``trivial_betas`` defaults to the empty label.  Traces of a single step
    carry no transition evidence and are left out of the TM corpus only.
    """
    cfg = config or PipelineConfig()
    if trivial_betas is not None:
        cfg = PipelineConfig(frozenset(trivial_betas), cfg.supplement, cfg.redundant_alpha, cfg.trivial_beta)
    if supplement is not None:
        cfg = PipelineConfig(cfg.trivial_betas, supplement, cfg.redundant_alpha, cfg.trivial_beta)
    traces = list(traces)
    if not traces:
        raise DataError("the trace corpus is empty")
    manifest = PipelineManifest(
        config=cfg.to_json(),
        corpus={"traces": len(traces), "steps": sum(len(t) for t in traces),
                "digest": corpus_digest(traces)},
    )
    stage = "tm"
    try:
        t0 = time.perf_counter()
        tm_traces = [t for t in traces if len(t) > 1]
        # keep the last label: the supplement reads it to tag each trace's final step
        tm_samples = to_tm_samples(tm_traces, trailing_label=True)
        tm_machine, tm_summary = _learn(tm_samples, cfg, cfg.trivial_betas)
        tm = TransitionMachine(tm_machine)
        tm_summary["machine"] = machine_to_dict(tm)
        manifest.stages["tm"] = tm_summary
        manifest.timings["tm"] = time.perf_counter() - t0

        stage = "supplement"
        t0 = time.perf_counter()
        rm_traces = supplement_corpus(tm, traces) if cfg.supplement else traces
        manifest.timings["supplement"] = time.perf_counter() - t0

        stage = "rm"
        t0 = time.perf_counter()
        rm_machine, rm_summary = _learn(to_rm_samples(rm_traces), cfg, cfg.trivial_betas)
        rm = RewardMachine(rm_machine, supplemented=cfg.supplement)
        rm_summary["machine"] = machine_to_dict(rm)
        manifest.stages["rm"] = rm_summary
        manifest.timings["rm"] = time.perf_counter() - t0
    except TmrmError as exc:
        manifest.status = "failed"
        manifest.error = f"{stage}: {exc}"
        raise PipelineError(stage, exc, manifest) from exc
    manifest.status = "ok"
    return tm, rm, manifest


def replay_corpus(tm, rm, traces):
    """``(trace index, step, what)`` for every prediction the machines get wrong."""
    problems = []
    tmm, rmm = tm.machine, rm.machine
    for idx, trace in enumerate(traces):
        q, u = tmm.initial, rmm.initial
        steps = trace.steps
        for i, s in enumerate(steps):
            key = (s.obs, s.action)
            if i + 1 < len(steps) and tmm._emit[q].get(key) != steps[i + 1].obs:
                problems.append((idx, i, "observation"))
            rkey = ((s.obs, tm.name(q)), s.action) if rm.supplemented else key
            if rmm._emit[u].get(rkey) != s.reward:
                problems.append((idx, i, "reward"))
            nq, nu = tmm._trans[q].get(s.label), rmm._trans[u].get(s.label)
            if i + 1 < len(steps) and (nq is None or nu is None):
                problems.append((idx, i, f"label {format_label(s.label)}"))
                break
            q, u = nq, nu
    return problems
