"""Inference of transition and reward machines from labelled traces."""

from .automata import (BETA_DEFAULT, DBMM, EMPTY_LABEL, RewardMachine, TransitionMachine,
                       isomorphic, make_label, output_alpha, run, step_beta)
from .db_rpni import build_ptt, infer, state_merging, try_merge
from .traces import LabeledTrace, SampleSet, read_traces, to_rm_samples, to_tm_samples, write_traces

__version__ = "0.1.0"

__all__ = [
    "BETA_DEFAULT", "DBMM", "EMPTY_LABEL", "RewardMachine", "TransitionMachine", "isomorphic",
    "make_label", "output_alpha", "run", "step_beta", "build_ptt", "infer", "state_merging",
    "try_merge", "LabeledTrace", "SampleSet", "read_traces", "to_rm_samples", "to_tm_samples",
    "write_traces",
]
