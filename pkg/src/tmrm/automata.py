"""Dual-behavior Mealy machines and their TM/RM views.

A DBMM has two disjoint input alphabets.  Alpha-inputs emit one output and
leave the state alone; beta-inputs move the state and emit nothing.  States
are dense integers ``0..n-1``; ``names`` only matter for serialization.
"""

from collections import deque
from decimal import Decimal
from types import MappingProxyType
import json

from .errors import UndefinedStepError, UnknownStateError, UnknownSymbolError


class _BetaDefault:
    """Placeholder output aligned with beta-inputs in a sample."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BETA_DEFAULT"

    def __reduce__(self):
        return (_BetaDefault, ())


BETA_DEFAULT = _BetaDefault()

EMPTY_LABEL = frozenset()


def make_label(props=None):
    """Canonical label set: a frozenset of proposition names.

    ``None``, ``"None"`` and empty iterables all map to the empty set.
    """
    if props is None or props == "None":
        return EMPTY_LABEL
    if isinstance(props, str):
        return frozenset([props])
    return frozenset(str(p) for p in props if p != "None")


def format_label(label):
    if not label:
        return "∅"
    return "{" + ",".join(sorted(label)) + "}"


def symbol_key(sym):
    """Total order over the symbol types used in this package."""
    if isinstance(sym, frozenset):
        return ("0set", tuple(sorted(map(str, sym))))
    if isinstance(sym, tuple):
        return ("1tuple", tuple(symbol_key(s) for s in sym))
    if isinstance(sym, (int, float, Decimal)) and not isinstance(sym, bool):
        return ("2num", Decimal(sym))
    if isinstance(sym, str):
        return ("3str", sym)
    return ("4" + type(sym).__name__, repr(sym))


class DBMM:
    """Immutable dual-behavior Mealy machine with partial maps.

    ``transitions`` maps ``(state, beta) -> state`` and ``emissions`` maps
    ``(state, alpha) -> output``.  Alphabets default to the symbols used by the
    maps; passing them explicitly allows symbols that never occur.
    """

    __slots__ = ("n_states", "initial", "alpha", "beta", "outputs", "names", "_trans", "_emit")

    def __init__(self, n_states, initial=0, alpha=(), beta=(), transitions=None,
                 emissions=None, outputs=(), names=None):
        if n_states < 1:
            raise ValueError("a DBMM needs at least one state")
        trans = [dict() for _ in range(n_states)]
        emit = [dict() for _ in range(n_states)]
        alpha = set(alpha)
        beta = set(beta)
        for (q, b), t in (transitions or {}).items():
            for s in (q, t):
                if not 0 <= s < n_states:
                    raise UnknownStateError(f"state {s!r} out of range")
            trans[q][b] = t
            beta.add(b)
        out_alpha = set(outputs)
        for (q, a), o in (emissions or {}).items():
            if not 0 <= q < n_states:
                raise UnknownStateError(f"state {q!r} out of range")
            emit[q][a] = o
            alpha.add(a)
            out_alpha.add(o)
        self._init(n_states, initial, alpha, beta, out_alpha, trans, emit, names)

    def _init(self, n_states, initial, alpha, beta, outputs, trans, emit, names):
        if not 0 <= initial < n_states:
            raise UnknownStateError(f"initial state {initial!r} out of range")
        overlap = set(alpha) & set(beta)
        if overlap:
            raise ValueError(f"alpha and beta alphabets overlap: {sorted(map(repr, overlap))}")
        if names is None:
            names = tuple(f"q{i}" for i in range(n_states))
        else:
            names = tuple(str(n) for n in names)
            if len(names) != n_states or len(set(names)) != n_states:
                raise ValueError("state names must be unique, one per state")
        self.n_states = n_states
        self.initial = initial
        self.alpha = frozenset(alpha)
        self.beta = frozenset(beta)
        self.outputs = frozenset(outputs)
        self.names = names
        self._trans = trans
        self._emit = emit

    @classmethod
    def from_tables(cls, trans, emit, initial=0, alpha=(), beta=(), outputs=(), names=None):
        """Build from per-state dicts; the dicts are copied."""
        self = cls.__new__(cls)
        trans = [dict(d) for d in trans]
        emit = [dict(d) for d in emit]
        alpha = set(alpha).union(*(d.keys() for d in emit))
        beta = set(beta).union(*(d.keys() for d in trans))
        outs = set(outputs).union(*(d.values() for d in emit))
        self._init(len(trans), initial, alpha, beta, outs, trans, emit, names)
        return self

    # -- read access ---------------------------------------------------------

    @property
    def states(self):
        return range(self.n_states)

    def _check_state(self, q):
        if not (isinstance(q, int) and 0 <= q < self.n_states):
            raise UnknownStateError(f"unknown state {q!r}")

    def successors(self, q):
        self._check_state(q)
        return MappingProxyType(self._trans[q])

    def emissions_at(self, q):
        self._check_state(q)
        return MappingProxyType(self._emit[q])

    @property
    def transitions(self):
        return {(q, b): t for q, d in enumerate(self._trans) for b, t in d.items()}

    @property
    def emissions(self):
        return {(q, a): o for q, d in enumerate(self._emit) for a, o in d.items()}

    def tables(self):
        """Fresh mutable copies of the per-state transition and emission dicts."""
        return [dict(d) for d in self._trans], [dict(d) for d in self._emit]

    def kind_of(self, sym):
        in_a = sym in self.alpha
        in_b = sym in self.beta
        if in_a and not in_b:
            return "alpha"
        if in_b and not in_a:
            return "beta"
        raise UnknownSymbolError(f"symbol {sym!r} is in neither alphabet")

    def reachable(self):
        seen = [self.initial]
        marked = {self.initial}
        queue = deque(seen)
        while queue:
            q = queue.popleft()
            for b in sorted(self._trans[q], key=symbol_key):
                t = self._trans[q][b]
                if t not in marked:
                    marked.add(t)
                    seen.append(t)
                    queue.append(t)
        return seen

    def is_total(self, alpha=True, beta=True):
        for q in self.states:
            if beta and len(self._trans[q]) != len(self.beta):
                return False
            if alpha and len(self._emit[q]) != len(self.alpha):
                return False
        return True

    def __repr__(self):
        n_t = sum(len(d) for d in self._trans)
        n_e = sum(len(d) for d in self._emit)
        return f"<DBMM states={self.n_states} transitions={n_t} emissions={n_e}>"

    def __eq__(self, other):
        if not isinstance(other, DBMM):
            return NotImplemented
        return (self.n_states == other.n_states and self.initial == other.initial
                and self.alpha == other.alpha and self.beta == other.beta
                and self._trans == other._trans and self._emit == other._emit)

    __hash__ = None

    # -- execution -----------------------------------------------------------

    def step_beta(self, q, b):
        self._check_state(q)
        if b not in self.beta:
            raise UnknownSymbolError(f"{b!r} is not a beta-input")
        return self._trans[q].get(b)

    def output_alpha(self, q, a):
        self._check_state(q)
        if a not in self.alpha:
            raise UnknownSymbolError(f"{a!r} is not an alpha-input")
        return self._emit[q].get(a)

    def run(self, inputs, start=None):
        outputs, _ = self.run_from(self.initial if start is None else start, inputs)
        return outputs

    def run_from(self, q, inputs):
        """Run ``inputs`` from ``q``; returns ``(outputs, final_state)``."""
        self._check_state(q)
        out = []
        for pos, sym in enumerate(inputs):
            if self.kind_of(sym) == "alpha":
                o = self._emit[q].get(sym)
                if o is None:
                    raise UndefinedStepError(
                        f"no output for {sym!r} in state {self.names[q]} at position {pos}", pos)
                out.append(o)
            else:
                t = self._trans[q].get(sym)
                if t is None:
                    raise UndefinedStepError(
                        f"no transition on {sym!r} from state {self.names[q]} at position {pos}", pos)
                q = t
        return out, q

    def trace_outputs(self, inputs):
        """Like :meth:`run` but aligned with ``inputs``: beta positions get BETA_DEFAULT."""
        q = self.initial
        out = []
        for pos, sym in enumerate(inputs):
            if self.kind_of(sym) == "alpha":
                o = self._emit[q].get(sym)
                if o is None:
                    raise UndefinedStepError(f"no output for {sym!r} at position {pos}", pos)
                out.append(o)
            else:
                t = self._trans[q].get(sym)
                if t is None:
                    raise UndefinedStepError(f"no transition on {sym!r} at position {pos}", pos)
                q = t
                out.append(BETA_DEFAULT)
        return out

    # -- derived machines ------------------------------------------------------

    def restricted_to_reachable(self):
        order = self.reachable()
        index = {q: i for i, q in enumerate(order)}
        trans = [{b: index[t] for b, t in self._trans[q].items()} for q in order]
        emit = [dict(self._emit[q]) for q in order]
        return DBMM.from_tables(trans, emit, 0, self.alpha, self.beta, self.outputs,
                                names=[self.names[q] for q in order])

    def renamed(self, names):
        out = DBMM.__new__(DBMM)
        out._init(self.n_states, self.initial, self.alpha, self.beta, self.outputs,
                  self._trans, self._emit, names)
        return out


def step_beta(machine, state, symbol):
    return machine.step_beta(state, symbol)


def output_alpha(machine, state, symbol):
    return machine.output_alpha(state, symbol)


def run(machine, inputs):
    return machine.run(inputs)


def isomorphic(a, b):
    """True iff the reachable parts of ``a`` and ``b`` match up to state renaming."""
    a = getattr(a, "machine", a)
    b = getattr(b, "machine", b)
    mapping = {a.initial: b.initial}
    used = {b.initial}
    queue = deque([a.initial])
    while queue:
        p = queue.popleft()
        q = mapping[p]
        if a._emit[p] != b._emit[q]:
            return False
        ta, tb = a._trans[p], b._trans[q]
        if ta.keys() != tb.keys():
            return False
        for sym, pn in ta.items():
            qn = tb[sym]
            if pn in mapping:
                if mapping[pn] != qn:
                    return False
            else:
                if qn in used:
                    return False
                mapping[pn] = qn
                used.add(qn)
                queue.append(pn)
    return True


def distinguishing_sequence(a, b):
    """Shortest mixed input sequence on which ``a`` and ``b`` disagree, or None.

    Undefined steps count as a disagreement when only one side is undefined.
    """
    a = getattr(a, "machine", a)
    b = getattr(b, "machine", b)
    start = (a.initial, b.initial)
    parent = {start: None}
    queue = deque([start])
    while queue:
        p, q = pair = queue.popleft()
        alphas = sorted(set(a._emit[p]) | set(b._emit[q]), key=symbol_key)
        for sym in alphas:
            if a._emit[p].get(sym) != b._emit[q].get(sym):
                return _path(parent, pair) + [sym]
        betas = sorted(set(a._trans[p]) | set(b._trans[q]), key=symbol_key)
        for sym in betas:
            pn, qn = a._trans[p].get(sym), b._trans[q].get(sym)
            if (pn is None) != (qn is None):
                return _path(parent, pair) + [sym]
            if pn is None:
                continue
            nxt = (pn, qn)
            if nxt not in parent:
                parent[nxt] = (pair, sym)
                queue.append(nxt)
    return None


def _path(parent, node):
    seq = []
    while parent[node] is not None:
        node, sym = parent[node]
        seq.append(sym)
    return seq[::-1]


class _MachineView:
    """Shared behaviour of the TM and RM wrappers."""

    kind = "dbmm"

    def __init__(self, machine):
        self.machine = machine

    @property
    def initial(self):
        return self.machine.initial

    @property
    def n_states(self):
        return self.machine.n_states

    def name(self, q):
        return self.machine.names[q]

    def advance(self, q, label):
        t = self.machine._trans[q].get(label)
        if t is None:
            raise UndefinedStepError(
                f"{self.kind.upper()} has no transition on {format_label(label)} "
                f"from {self.machine.names[q]}")
        return t

    def __repr__(self):
        return f"<{type(self).__name__} states={self.n_states}>"


class TransitionMachine(_MachineView):
    """TM view: beta-inputs are label sets, alpha-inputs ``(obs, action)``, outputs observations."""

    kind = "tm"

    def delta_q(self, q, label):
        return self.machine.step_beta(q, label)

    def delta_p(self, q, obs, action):
        return self.machine.output_alpha(q, (obs, action))


class RewardMachine(_MachineView):
    """RM view: outputs are rewards.

    When ``supplemented`` is true the observation part of each alpha-input is an
    ``(obs, tm_state_name)`` pair produced by the observation supplement.
    """

    kind = "rm"

    def __init__(self, machine, supplemented=False):
        super().__init__(machine)
        self.supplemented = supplemented

    def delta_u(self, u, label):
        return self.machine.step_beta(u, label)

    def delta_r(self, u, obs, action):
        return self.machine.output_alpha(u, (obs, action))


# -- serialization -----------------------------------------------------------


def encode_symbol(sym):
    if isinstance(sym, frozenset):
        return sorted(map(str, sym))
    if isinstance(sym, tuple):
        return [encode_symbol(s) for s in sym]
    if isinstance(sym, Decimal):
        return int(sym) if sym == sym.to_integral_value() else float(sym)
    return sym


def decode_symbol(obj):
    if isinstance(obj, list):
        return tuple(decode_symbol(x) for x in obj)
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return Decimal(str(obj))
    return obj


def decode_beta(obj):
    if isinstance(obj, list):
        return frozenset(obj)
    return decode_symbol(obj)


def machine_to_dict(machine):
    view = machine
    m = getattr(machine, "machine", machine)
    names = m.names
    d = {
        "kind": getattr(view, "kind", "dbmm"),
        "states": list(names),
        "initial": names[m.initial],
        "alpha": [encode_symbol(a) for a in sorted(m.alpha, key=symbol_key)],
        "beta": [encode_symbol(b) for b in sorted(m.beta, key=symbol_key)],
        "outputs": [encode_symbol(o) for o in sorted(m.outputs, key=symbol_key)],
        "transitions": [
            [names[q], encode_symbol(b), names[m._trans[q][b]]]
            for q in m.states for b in sorted(m._trans[q], key=symbol_key)
        ],
        "emissions": [
            [names[q], encode_symbol(a), encode_symbol(m._emit[q][a])]
            for q in m.states for a in sorted(m._emit[q], key=symbol_key)
        ],
    }
    if isinstance(view, RewardMachine):
        d["supplemented"] = view.supplemented
    return d


def machine_from_dict(d):
    names = list(d["states"])
    index = {n: i for i, n in enumerate(names)}
    try:
        trans = {(index[q], decode_beta(b)): index[t] for q, b, t in d["transitions"]}
        emis = {(index[q], decode_symbol(a)): decode_symbol(o) for q, a, o in d["emissions"]}
        m = DBMM(
            len(names), index[d["initial"]],
            alpha=[decode_symbol(a) for a in d.get("alpha", [])],
            beta=[decode_beta(b) for b in d.get("beta", [])],
            transitions=trans, emissions=emis,
            outputs=[decode_symbol(o) for o in d.get("outputs", [])],
            names=names,
        )
    except KeyError as exc:
        raise UnknownStateError(f"automaton JSON references unknown state {exc}") from None
    kind = d.get("kind", "dbmm")
    if kind == "tm":
        return TransitionMachine(m)
    if kind == "rm":
        return RewardMachine(m, supplemented=bool(d.get("supplemented", False)))
    return m


def dumps_machine(machine):
    return json.dumps(machine_to_dict(machine), sort_keys=True, indent=1, ensure_ascii=False)


def loads_machine(text):
    return machine_from_dict(json.loads(text))


def _fmt(sym):
    if isinstance(sym, frozenset):
        return format_label(sym)
    if isinstance(sym, tuple):
        return "(" + ", ".join(_fmt(s) for s in sym) + ")"
    return str(sym)


def _dot_quote(s):
    return '"' + s.replace('"', '\\"') + '"'


def to_dot(machine, title="dbmm", max_emissions=12):
    """Graphviz source: beta-edges labelled with label sets, emissions listed per state."""
    m = getattr(machine, "machine", machine)
    lines = [f"digraph {_dot_quote(title)} {{", "  rankdir=LR;", "  node [shape=box];",
             '  __start [shape=point];']
    for q in m.states:
        rows = [m.names[q]]
        items = sorted(m._emit[q].items(), key=lambda kv: symbol_key(kv[0]))
        for a, o in items[:max_emissions]:
            rows.append(f"{_fmt(a)} / {_fmt(o)}")
        if len(items) > max_emissions:
            rows.append(f"... {len(items) - max_emissions} more")
        text = "\\n".join(rows)
        lines.append(f"  {_dot_quote(m.names[q])} [label={_dot_quote(text)}];")
    lines.append(f"  __start -> {_dot_quote(m.names[m.initial])};")
    for q in m.states:
        grouped = {}
        for b, t in m._trans[q].items():
            grouped.setdefault(t, []).append(b)
        for t in sorted(grouped):
            label = " | ".join(_fmt(b) for b in sorted(grouped[t], key=symbol_key))
            lines.append(f"  {_dot_quote(m.names[q])} -> {_dot_quote(m.names[t])} "
                         f"[label={_dot_quote(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
