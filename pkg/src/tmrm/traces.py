"""Labeled traces, trace JSONL I/O, and conversion into TM/RM sample sets.

A sample interleaves ``(obs, action)`` alpha-inputs with label beta-inputs,
starting with an alpha-input.  Label ``l_i`` belongs to step ``i`` and is
consumed after step ``i``'s alpha-input.  Samples end on an alpha-input
unless ``trailing_label`` asks TM samples to keep the label that follows
their last alpha-input (the supplement consumes that label).
"""

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
import hashlib
import json
from typing import NamedTuple

from .automata import BETA_DEFAULT, decode_symbol, encode_symbol, make_label, symbol_key
from .errors import TraceFormatError, TraceTooShortError

STEP_KEYS = ("label", "obs", "action", "reward")


class Step(NamedTuple):
    label: frozenset
    obs: object
    action: str
    reward: Decimal


@dataclass(frozen=True)
class LabeledTrace:
    steps: tuple

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a trace needs at least one step")
        object.__setattr__(self, "steps", tuple(Step(*s) for s in self.steps))

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def observations(self):
        return [s.obs for s in self.steps]

    @property
    def rewards(self):
        return [s.reward for s in self.steps]


def make_step(label, obs, action, reward):
    return Step(make_label(label), obs, action, to_decimal(reward))


def to_decimal(value):
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        value = repr(value)
    try:
        return Decimal(str(value))
    except InvalidOperation:
        raise ValueError(f"reward {value!r} is not a number") from None


# -- JSONL I/O -----------------------------------------------------------------


def _step_from_json(obj, lineno):
    if not isinstance(obj, dict):
        raise TraceFormatError("each step must be an object", lineno)
    missing = [k for k in STEP_KEYS if k not in obj]
    if missing:
        raise TraceFormatError(f"step is missing {', '.join(missing)}", lineno)
    extra = sorted(set(obj) - set(STEP_KEYS))
    if extra:
        raise TraceFormatError(f"unexpected step keys {extra}", lineno)
    label = obj["label"]
    if label is not None and label != "None":
        if not isinstance(label, list) or not all(isinstance(p, str) for p in label):
            raise TraceFormatError("label must be a list of strings", lineno)
    reward = obj["reward"]
    if isinstance(reward, bool) or not isinstance(reward, (int, float, Decimal, str)):
        raise TraceFormatError(f"reward {reward!r} is not a number", lineno)
    try:
        reward = to_decimal(reward)
    except ValueError as exc:
        raise TraceFormatError(str(exc), lineno) from None
    if not reward.is_finite():
        raise TraceFormatError("reward must be finite", lineno)
    action = obj["action"]
    if not isinstance(action, str):
        raise TraceFormatError("action must be a string", lineno)
    return Step(make_label(label), decode_symbol(obj["obs"]), action, reward)


def parse_trace_line(line, lineno=None):
    try:
        obj = json.loads(line, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(obj, dict) or "steps" not in obj:
        raise TraceFormatError('expected an object with a "steps" array', lineno)
    steps = obj["steps"]
    if not isinstance(steps, list) or not steps:
        raise TraceFormatError('"steps" must be a non-empty array', lineno)
    return LabeledTrace(tuple(_step_from_json(s, lineno) for s in steps))


def read_traces(path):
    """One trace per non-blank line; order preserved."""
    traces = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                traces.append(parse_trace_line(line, lineno))
    return traces


def trace_to_json(trace):
    return {"steps": [
        {"label": sorted(s.label), "obs": encode_symbol(s.obs), "action": s.action,
         "reward": encode_symbol(s.reward)}
        for s in trace.steps
    ]}


def dumps_trace(trace):
    return json.dumps(trace_to_json(trace), separators=(",", ":"), ensure_ascii=False)


def write_traces(path, traces):
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(dumps_trace(t))
            fh.write("\n")


def corpus_digest(traces):
    h = hashlib.sha256()
    for t in traces:
        h.update(dumps_trace(t).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


# -- sample sets ---------------------------------------------------------------


@dataclass
class SampleSet:
    """Input/output sequence pairs for DB-RPNI.

    ``outputs[i]`` is ``BETA_DEFAULT`` exactly when ``inputs[i]`` is a beta-input.
    """

    samples: list = field(default_factory=list)
    alpha: frozenset = frozenset()
    beta: frozenset = frozenset()
    reduction_log: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def total_length(self):
        return sum(len(w) for w, _ in self.samples)

    def validate(self, alternating=False):
        if self.alpha & self.beta:
            raise ValueError("alpha and beta alphabets overlap")
        for idx, (w, o) in enumerate(self.samples):
            if len(w) != len(o):
                raise ValueError(f"sample {idx}: {len(w)} inputs but {len(o)} outputs")
            for pos, (x, y) in enumerate(zip(w, o)):
                if x in self.beta:
                    if y is not BETA_DEFAULT:
                        raise ValueError(f"sample {idx} position {pos}: beta-input with output {y!r}")
                elif x in self.alpha:
                    if y is BETA_DEFAULT:
                        raise ValueError(f"sample {idx} position {pos}: alpha-input without output")
                else:
                    raise ValueError(f"sample {idx} position {pos}: unknown input {x!r}")
                if alternating and (x in self.alpha) != (pos % 2 == 0):
                    raise ValueError(f"sample {idx} position {pos}: inputs do not alternate")

    def to_json(self):
        """Debug dump; not a stable interchange format."""
        def enc(x):
            return None if x is BETA_DEFAULT else encode_symbol(x)
        return {
            "alpha": [encode_symbol(a) for a in sorted(self.alpha, key=symbol_key)],
            "beta": [encode_symbol(b) for b in sorted(self.beta, key=symbol_key)],
            "samples": [[[enc(x) for x in w], [enc(y) for y in o]] for w, o in self.samples],
            "reduction_log": {k: repr(v) for k, v in self.reduction_log.items()},
        }


def _build(traces, n_alpha, output_of, trailing_label=False):
    samples, alpha, beta = [], set(), set()
    for trace, n in zip(traces, n_alpha):
        steps = trace.steps
        w, o = [], []
        for i in range(n):
            x = (steps[i].obs, steps[i].action)
            w.append(x)
            o.append(output_of(steps, i))
            alpha.add(x)
            if trailing_label or i < n - 1:
                w.append(steps[i].label)
                o.append(BETA_DEFAULT)
                beta.add(steps[i].label)
        samples.append((tuple(w), tuple(o)))
    return SampleSet(samples, frozenset(alpha), frozenset(beta))


def to_tm_samples(traces, trailing_label=False):
    """Outputs are next observations; the final step has no known successor and is dropped.

    With ``trailing_label`` the label of the last kept step stays in the sample,
    so the learned TM also knows where that label leads.
    """
    for idx, t in enumerate(traces):
        if len(t) < 2:
            raise TraceTooShortError(idx, len(t))
    return _build(traces, [len(t) - 1 for t in traces], lambda steps, i: steps[i + 1].obs,
                  trailing_label=trailing_label)


def to_rm_samples(traces):
    """Outputs are the per-step rewards."""
    return _build(traces, [len(t) for t in traces], lambda steps, i: steps[i].reward)
