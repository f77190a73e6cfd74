"""Observation supplement: pair each observation with the current TM state.

Step ``i`` sees the TM state reached after labels ``l_0 .. l_{i-1}``; the TM
then advances on ``l_i``.  The state is recorded by name so augmented traces
serialize as ``[obs, tm_state_name]``.
"""

from .errors import UndefinedStepError
from .traces import LabeledTrace, Step


class SupplementError(UndefinedStepError):
    def __init__(self, message, trace_index=None, step=None):
        self.trace_index = trace_index
        self.step = step
        super().__init__(message, step)


def tm_state_sequence(tm, trace):
    """TM state before each step of ``trace``."""
    m = tm.machine
    q = m.initial
    seq = []
    steps = trace.steps
    for i, step in enumerate(steps):
        seq.append(q)
        if i + 1 < len(steps):
            nxt = m._trans[q].get(step.label)
            if nxt is None:
                raise SupplementError(
                    f"TM has no transition from {m.names[q]} on label "
                    f"{sorted(step.label)} at step {i}", step=i)
            q = nxt
    return seq


def supplement_trace(tm, trace):
    # the update after the final step is never observed, so it is skipped
    names = tm.machine.names
    states = tm_state_sequence(tm, trace)
    return LabeledTrace(tuple(
        Step(s.label, (s.obs, names[q]), s.action, s.reward) for s, q in zip(trace.steps, states)
    ))


def supplement_corpus(tm, traces):
    out = []
    failures = []
    for idx, trace in enumerate(traces):
        try:
            out.append(supplement_trace(tm, trace))
        except SupplementError as exc:
            failures.append((idx, exc.step, str(exc)))
    if failures:
        idx, step, msg = failures[0]
        raise SupplementError(
            f"{len(failures)} trace(s) leave the TM's domain; first is trace {idx}: {msg}",
            trace_index=idx, step=step)
    return out


def strip_supplement(trace):
    return LabeledTrace(tuple(Step(s.label, s.obs[0], s.action, s.reward) for s in trace.steps))


def transition_conflicts(traces):
    """``((obs, action), [next observations])`` for every pair with more than one successor."""
    seen = {}
    for t in traces:
        steps = t.steps
        for i in range(len(steps) - 1):
            seen.setdefault((steps[i].obs, steps[i].action), set()).add(steps[i + 1].obs)
    return [(k, sorted(v, key=repr)) for k, v in seen.items() if len(v) > 1]
