"""Sample-set reduction rules and the matching recovery steps.

Redundant alpha-inputs (constant output everywhere in the corpus) are cut
before inference and re-attached to every state afterwards.  Trivial
beta-inputs (configured, never detected) are cut and come back as self-loops.
"""

from dataclasses import dataclass, field

from .automata import (BETA_DEFAULT, DBMM, decode_beta, decode_symbol, encode_symbol,
                       format_label, symbol_key)
from .errors import ReductionConflictError, UnknownSymbolError
from .traces import SampleSet


@dataclass
class ReductionRecord:
    redundant_alpha: dict = field(default_factory=dict)
    trivial_beta: frozenset = frozenset()

    def merged(self, other):
        return ReductionRecord({**self.redundant_alpha, **other.redundant_alpha},
                               self.trivial_beta | other.trivial_beta)

    def to_json(self):
        return {
            "redundant_alpha": [[encode_symbol(a), encode_symbol(o)] for a, o in
                                sorted(self.redundant_alpha.items(), key=lambda kv: symbol_key(kv[0]))],
            "trivial_beta": [encode_symbol(b) for b in sorted(self.trivial_beta, key=symbol_key)],
        }

    @classmethod
    def from_json(cls, d):
        return cls({decode_symbol(a): decode_symbol(o) for a, o in d.get("redundant_alpha", [])},
                   frozenset(decode_beta(b) for b in d.get("trivial_beta", [])))


def _with_log(samples, new_samples, alpha, beta, **log):
    merged = dict(samples.reduction_log)
    for k, v in log.items():
        if k == "redundant_alpha":
            merged[k] = {**merged.get(k, {}), **v}
        else:
            merged[k] = merged.get(k, frozenset()) | v
    return SampleSet(new_samples, frozenset(alpha), frozenset(beta), merged)


def redundant_alpha_census(samples):
    """alpha-input -> its output, for every alpha-input whose output never varies."""
    seen = {}
    varying = set()
    for w, o in samples.samples:
        for x, y in zip(w, o):
            if y is BETA_DEFAULT or x in varying:
                continue
            prev = seen.setdefault(x, y)
            if prev != y:
                varying.add(x)
                del seen[x]
    return seen


def remove_redundant_alpha(samples):
    constant = redundant_alpha_census(samples)
    if not constant:
        return _with_log(samples, list(samples.samples), samples.alpha, samples.beta,
                         redundant_alpha={}), ReductionRecord()
    reduced = []
    for w, o in samples.samples:
        keep = [i for i, x in enumerate(w) if x not in constant]
        reduced.append((tuple(w[i] for i in keep), tuple(o[i] for i in keep)))
    alpha = samples.alpha - constant.keys()
    record = ReductionRecord(dict(constant))
    return _with_log(samples, reduced, alpha, samples.beta, redundant_alpha=record.redundant_alpha), record


def remove_trivial_beta(samples, trivial):
    trivial = frozenset(trivial)
    unknown = trivial - samples.beta
    if unknown:
        shown = ", ".join(format_label(b) if isinstance(b, frozenset) else repr(b)
                          for b in sorted(unknown, key=symbol_key))
        raise UnknownSymbolError(f"trivial beta-inputs not in the alphabet: {shown}")
    if not trivial:
        return _with_log(samples, list(samples.samples), samples.alpha, samples.beta,
                         trivial_beta=frozenset())
    reduced = []
    for w, o in samples.samples:
        keep = [i for i, x in enumerate(w) if x not in trivial]
        reduced.append((tuple(w[i] for i in keep), tuple(o[i] for i in keep)))
    return _with_log(samples, reduced, samples.alpha, samples.beta - trivial, trivial_beta=trivial)


def reduce_samples(samples, trivial=frozenset(), redundant=True):
    """Both rules in pipeline order (alpha first); returns ``(reduced, record)``."""
    record = ReductionRecord()
    if redundant:
        samples, record = remove_redundant_alpha(samples)
    if trivial:
        samples = remove_trivial_beta(samples, trivial)
        record = record.merged(ReductionRecord(trivial_beta=frozenset(trivial)))
    return samples, record


def restore_redundant_alpha(machine, record):
    if not record.redundant_alpha:
        return machine
    trans, emit = machine.tables()
    for q, table in enumerate(emit):
        for a, o in record.redundant_alpha.items():
            have = table.get(a)
            if have is not None and have != o:
                raise ReductionConflictError(
                    f"state {machine.names[q]} already emits {have!r} on {a!r}, recorded {o!r}")
            table[a] = o
    return DBMM.from_tables(trans, emit, machine.initial, machine.alpha | record.redundant_alpha.keys(),
                            machine.beta, machine.outputs, machine.names)


def restore_trivial_beta(machine, record):
    if not record.trivial_beta:
        return machine
    trans, emit = machine.tables()
    for q, table in enumerate(trans):
        for b in record.trivial_beta:
            have = table.get(b)
            if have is not None and have != q:
                raise ReductionConflictError(
                    f"state {machine.names[q]} already moves on trivial input {b!r}")
            table[b] = q
    return DBMM.from_tables(trans, emit, machine.initial, machine.alpha,
                            machine.beta | record.trivial_beta, machine.outputs, machine.names)


def restore(machine, record):
    return restore_trivial_beta(restore_redundant_alpha(machine, record), record)
