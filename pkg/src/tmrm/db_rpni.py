"""DB-RPNI: prefix-tree transducer construction and red-blue state merging.

Blue states are picked in shortlex order of their access strings.  Because
``build_ptt`` numbers states breadth-first with children sorted by symbol,
shortlex order is plain integer order on PTT ids.
"""

from collections import deque
from dataclasses import asdict, dataclass, field
import heapq

from .automata import BETA_DEFAULT, DBMM, symbol_key
from .errors import InconsistentSamplesError


@dataclass
class PrefixTreeTransducer:
    machine: DBMM
    access: list  # state -> tuple of beta-inputs reaching it

    @property
    def n_states(self):
        return self.machine.n_states

    @property
    def max_alpha(self):
        return max(len(self.machine.emissions_at(q)) for q in self.machine.states)


@dataclass
class MergeFrontier:
    red: list
    blue: list = field(default_factory=list)


@dataclass
class InferenceStats:
    ptt_states: int = 0
    max_alpha: int = 0
    states: int = 0
    merge_attempts: int = 0
    merges: int = 0
    promotions: int = 0
    fold_steps: int = 0

    def to_json(self):
        return asdict(self)


def build_ptt(samples):
    """Exact tree representation of ``samples``; one state per distinct beta-prefix."""
    trans = [{}]
    emit = [{}]
    writer = [{}]
    access = [()]
    for idx, (w, o) in enumerate(samples.samples):
        q = 0
        for x, y in zip(w, o):
            if y is BETA_DEFAULT:
                t = trans[q].get(x)
                if t is None:
                    t = len(trans)
                    trans[q][x] = t
                    trans.append({})
                    emit.append({})
                    writer.append({})
                    access.append(access[q] + (x,))
                q = t
            else:
                have = emit[q].get(x)
                if have is None:
                    emit[q][x] = y
                    writer[q][x] = idx
                elif have != y:
                    raise InconsistentSamplesError((writer[q][x], idx), access[q], x, (have, y))

    # renumber breadth-first with sorted children: shortlex order of access strings
    order = [0]
    for q in order:
        for b in sorted(trans[q], key=symbol_key):
            order.append(trans[q][b])
    new = {old: i for i, old in enumerate(order)}
    trans = [{b: new[t] for b, t in trans[old].items()} for old in order]
    emit = [emit[old] for old in order]
    access = [access[old] for old in order]
    machine = DBMM.from_tables(trans, emit, 0, samples.alpha, samples.beta,
                               names=[f"p{i}" for i in range(len(order))])
    return PrefixTreeTransducer(machine, access)


def compatible(machine, u, v):
    eu = machine.emissions_at(u)
    ev = machine.emissions_at(v)
    if len(ev) < len(eu):
        eu, ev = ev, eu
    for a, o in eu.items():
        other = ev.get(a)
        if other is not None and other != o:
            return False
    return True


def try_merge(machine, red, blue):
    """Fold ``blue`` into ``red`` with all implied merges.

    Returns the quotient machine restricted to reachable states, or ``None``
    when some implied pair is incompatible.  Works for any pair of states, not
    only red-blue ones.
    """
    trans, emit = machine.tables()
    rep = list(range(machine.n_states))

    def find(x):
        while rep[x] != x:
            rep[x] = rep[rep[x]]
            x = rep[x]
        return x

    pending = deque([(red, blue)])
    while pending:
        x, y = pending.popleft()
        x, y = find(x), find(y)
        if x == y:
            continue
        keep, gone = min(x, y), max(x, y)
        rep[gone] = keep
        ek = emit[keep]
        for a, o in emit[gone].items():
            have = ek.get(a)
            if have is None:
                ek[a] = o
            elif have != o:
                return None
        tk = trans[keep]
        for b, t in trans[gone].items():
            if b in tk:
                pending.append((tk[b], t))
            else:
                tk[b] = t
    classes = sorted({find(q) for q in machine.states})
    index = {c: i for i, c in enumerate(classes)}
    q_trans = [{b: index[find(t)] for b, t in trans[c].items()} for c in classes]
    q_emit = [emit[c] for c in classes]
    quotient = DBMM.from_tables(q_trans, q_emit, index[find(machine.initial)], machine.alpha,
                                machine.beta, machine.outputs, [machine.names[c] for c in classes])
    return quotient.restricted_to_reachable()


def blue_states(machine, red):
    red_set = set(red)
    blue = set()
    for r in red:
        for t in machine.successors(r).values():
            if t not in red_set:
                blue.add(t)
    return sorted(blue)


class _Learner:
    """In-place red-blue merging over PTT tables with an undo journal."""

    def __init__(self, ptt, stats):
        self.trans, self.emit = ptt.machine.tables()
        n = len(self.trans)
        self.parent = [-1] * n
        self.plabel = [None] * n
        for q, d in enumerate(self.trans):
            for b, t in d.items():
                self.parent[t] = q
                self.plabel[t] = b
        self.dead = bytearray(n)
        self.is_red = bytearray(n)
        self.red = []
        self.heap = []
        self.stats = stats
        self.alpha = ptt.machine.alpha
        self.beta = ptt.machine.beta

    def promote(self, q):
        self.is_red[q] = 1
        self.red.append(q)
        for t in self.trans[q].values():
            if not self.is_red[t]:
                heapq.heappush(self.heap, t)

    def is_blue(self, q):
        if self.dead[q] or self.is_red[q]:
            return False
        p = self.parent[q]
        return p >= 0 and self.is_red[p] and self.trans[p].get(self.plabel[q]) == q

    def fold(self, red, blue):
        trans, emit, parent, plabel, dead = self.trans, self.emit, self.parent, self.plabel, self.dead
        journal = []
        p, l = parent[blue], plabel[blue]
        trans[p][l] = red
        stack = [(red, blue)]
        steps = 0
        ok = True
        while stack:
            t, s = stack.pop()
            steps += 1
            dead[s] = 1
            journal.append((3, s, None, None))
            et = emit[t]
            for a, o in emit[s].items():
                have = et.get(a)
                if have is None:
                    et[a] = o
                    journal.append((1, t, a, None))
                elif have != o:
                    ok = False
                    break
            if not ok:
                break
            tt = trans[t]
            for b, c in trans[s].items():
                tc = tt.get(b)
                if tc is None:
                    tt[b] = c
                    journal.append((2, t, b, None))
                    journal.append((4, c, parent[c], plabel[c]))
                    parent[c] = t
                    plabel[c] = b
                else:
                    stack.append((tc, c))
        self.stats.fold_steps += steps
        if not ok:
            for kind, x, y, z in reversed(journal):
                if kind == 1:
                    del emit[x][y]
                elif kind == 2:
                    del trans[x][y]
                elif kind == 3:
                    dead[x] = 0
                else:
                    parent[x] = y
                    plabel[x] = z
            trans[p][l] = blue
            return False
        for kind, x, y, _ in journal:
            if kind == 2 and self.is_red[x]:
                c = trans[x][y]
                if not self.is_red[c]:
                    heapq.heappush(self.heap, c)
        return True

    def run(self):
        self.promote(0)
        while self.heap:
            b = heapq.heappop(self.heap)
            if not self.is_blue(b):
                continue
            for r in self.red:
                self.stats.merge_attempts += 1
                if self.fold(r, b):
                    self.stats.merges += 1
                    break
            else:
                self.stats.promotions += 1
                self.promote(b)
        return self.result()

    def result(self):
        index = {q: i for i, q in enumerate(self.red)}
        trans = [{b: index[t] for b, t in self.trans[q].items()} for q in self.red]
        emit = [self.emit[q] for q in self.red]
        return DBMM.from_tables(trans, emit, 0, self.alpha, self.beta)


def state_merging(ptt, stats=None):
    if stats is None:
        stats = InferenceStats()
    stats.ptt_states = ptt.n_states
    stats.max_alpha = ptt.max_alpha
    machine = _Learner(ptt, stats).run()
    stats.states = machine.n_states
    return machine


def infer_with_stats(samples):
    stats = InferenceStats()
    machine = state_merging(build_ptt(samples), stats)
    return machine, stats


def infer(samples):
    return infer_with_stats(samples)[0]
