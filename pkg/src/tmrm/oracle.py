"""Independent verifiers used by the tests.

Nothing here calls into the DB-RPNI code: the exact search keeps its own
prefix tree, and the resolvence check explores the environment directly.
"""

from dataclasses import asdict, dataclass, field

from .automata import BETA_DEFAULT, DBMM, encode_symbol, symbol_key
from .errors import BudgetExceededError, UndefinedStepError


# -- shared prefix tree ----------------------------------------------------------------


class _Tree:
    """Prefix tree keyed by beta-prefixes; nodes listed breadth-first."""

    def __init__(self, samples):
        self.children = [{}]
        self.emit = [{}]
        self.prefix = [()]
        self.parent = [-1]
        self.via = [None]
        # positions of beta-inputs: (node, symbol) pairs actually read
        for w, o in samples.samples:
            n = 0
            for x, y in zip(w, o):
                if y is BETA_DEFAULT:
                    c = self.children[n].get(x)
                    if c is None:
                        c = len(self.children)
                        self.children[n][x] = c
                        self.children.append({})
                        self.emit.append({})
                        self.prefix.append(self.prefix[n] + (x,))
                        self.parent.append(n)
                        self.via.append(x)
                    n = c
                else:
                    have = self.emit[n].setdefault(x, y)
                    if have != y:
                        raise ValueError(f"samples disagree on {x!r} after {self.prefix[n]!r}")
        order = [0]
        for n in order:
            order.extend(self.children[n][b] for b in sorted(self.children[n], key=symbol_key))
        self.order = order
        self.empty = not samples.samples

    def __len__(self):
        return len(self.children)

    def fold_conflict(self, u, v):
        """True if identifying ``u`` and ``v`` forces two outputs for one alpha-input."""
        rep = {}

        def find(x):
            while rep.get(x, x) != x:
                x = rep[x]
            return x

        emit = {}
        kids = {}
        todo = [(u, v)]
        while todo:
            a, b = todo.pop()
            a, b = find(a), find(b)
            if a == b:
                continue
            rep[b] = a
            ea = emit.setdefault(a, dict(self.emit[a]))
            for x, y in emit.pop(b, self.emit[b]).items():
                if ea.setdefault(x, y) != y:
                    return True
            ka = kids.setdefault(a, dict(self.children[a]))
            for sym, c in kids.pop(b, self.children[b]).items():
                if sym in ka:
                    todo.append((ka[sym], c))
                else:
                    ka[sym] = c
        return False


# -- exact minimal machine -------------------------------------------------------------


def _search(tree, m, budget):
    """Backtracking assignment of tree nodes to at most ``m`` classes; returns the classes."""
    order = tree.order
    n = len(order)
    cls = [-1] * len(tree)
    ctrans = {}
    cemit = [dict() for _ in range(m)]
    frames = []   # [candidates, next position, undo list or None, used count before]
    used = 0
    spent = 0

    def candidates(i):
        node = order[i]
        if i == 0:
            return [0]
        forced = ctrans.get((cls[tree.parent[node]], tree.via[node]))
        if forced is not None:
            return [forced]
        return list(range(min(used + 1, m)))

    frames.append([candidates(0), 0, None, 0])
    while frames:
        frame = frames[-1]
        i = len(frames) - 1
        node = order[i]
        if frame[2] is not None:
            for kind, key in reversed(frame[2]):
                if kind == "e":
                    del cemit[key[0]][key[1]]
                else:
                    del ctrans[key]
            cls[node] = -1
            used = frame[3]
            frame[2] = None
        if frame[1] >= len(frame[0]):
            frames.pop()
            continue
        c = frame[0][frame[1]]
        frame[1] += 1
        spent += 1
        if spent > budget:
            raise BudgetExceededError(f"exact search gave up after {budget} assignments (m={m})")
        undo = []
        frame[2] = undo
        frame[3] = used
        ok = True
        table = cemit[c]
        for x, y in tree.emit[node].items():
            have = table.get(x)
            if have is None:
                table[x] = y
                undo.append(("e", (c, x)))
            elif have != y:
                ok = False
                break
        if not ok:
            continue
        if i > 0:
            key = (cls[tree.parent[node]], tree.via[node])
            if key not in ctrans:
                ctrans[key] = c
                undo.append(("t", key))
        cls[node] = c
        used = max(used, c + 1)
        if i + 1 == n:
            return cls, ctrans, cemit, used
        frames.append([candidates(i + 1), 0, None, used])
    return None


def brute_force_minimal(samples, max_states, budget=5_000_000):
    """Smallest DBMM (at most ``max_states`` states) consistent with ``samples``, or None.

    Tries m = 1, 2, ... and, for each m, enumerates canonical class assignments
    of prefix-tree nodes (a new class number is only ever the next unused one).
    Determinism forces a node's class once its parent class has a move on the
    same symbol; compatibility is checked as each node is placed.
    """
    tree = _Tree(samples)
    for m in range(1, max_states + 1):
        found = _search(tree, m, budget)
        if found is None:
            continue
        _, ctrans, cemit, used = found
        trans = [dict() for _ in range(used)]
        for (q, b), t in ctrans.items():
            trans[q][b] = t
        return DBMM.from_tables(trans, cemit[:used], 0, samples.alpha, samples.beta)
    return None


def replay_mismatches(machine, samples):
    """Indices of samples the machine fails to reproduce exactly."""
    machine = getattr(machine, "machine", machine)
    bad = []
    for idx, (w, o) in enumerate(samples.samples):
        try:
            if tuple(machine.trace_outputs(w)) != tuple(o):
                bad.append(idx)
        except (UndefinedStepError, KeyError):
            bad.append(idx)
    return bad


# -- resolvence --------------------------------------------------------------------------


@dataclass
class ResolventReport:
    ok: bool
    depth: int
    histories_checked: int
    counterexample: dict = None

    def to_json(self):
        return asdict(self)


def _jsonable(x):
    return encode_symbol(x) if not isinstance(x, (str, int, float)) else x


def check_resolvent(machine, env, depth, tm=None, max_nodes=2_000_000):
    """Checks the machine's predictions on every feasible history of at most ``depth`` steps.

    ``machine`` is a TransitionMachine or RewardMachine.  The machine state at
    step ``t`` has consumed the labels of observations ``o_0 .. o_{t-1}``.
    Episode-ending actions have no successor observation to predict.  A
    supplemented RM needs the TM that produced its observation tags.
    """
    kind = getattr(machine, "kind", None)
    if kind not in ("tm", "rm"):
        raise TypeError("check_resolvent expects a TransitionMachine or RewardMachine")
    supplemented = kind == "rm" and machine.supplemented
    if supplemented and tm is None:
        raise ValueError("a supplemented reward machine needs its transition machine")
    m = machine.machine
    tmm = tm.machine if supplemented else None
    start = (env.initial_state, m.initial, tmm.initial if supplemented else None)
    parent = {start: None}
    frontier = [start]
    checked = 0

    def history(node, action):
        steps = []
        while node is not None:
            prev = parent[node]
            steps.append(node)
            node = prev[0] if prev else None
        steps.reverse()
        acts = [parent[n][1] for n in steps[1:]] + [action]
        return {"observations": [_jsonable(env.observe(n[0])) for n in steps],
                "actions": acts}

    for t in range(depth):
        nxt_frontier = []
        for node in frontier:
            s, q, qt = node
            obs = env.observe(s)
            label = env.label(obs)
            sym_obs = (obs, tm.name(qt)) if supplemented else obs
            for a in env.actions:
                checked += 1
                res = env.step(s, a)
                if kind == "tm" and res.done:
                    # the episode stops, so no next observation is ever produced
                    continue
                expected = res.obs if kind == "tm" else res.reward
                predicted = m._emit[q].get((sym_obs, a))
                if predicted is None or predicted != expected:
                    ce = history(node, a)
                    ce.update(step=t, expected=_jsonable(expected),
                              predicted=None if predicted is None else _jsonable(predicted))
                    return ResolventReport(False, depth, checked, ce)
                if res.done or t + 1 == depth:
                    continue
                nq = m._trans[q].get(label)
                nqt = tmm._trans[qt].get(label) if supplemented else None
                if nq is None or (supplemented and nqt is None):
                    ce = history(node, a)
                    ce.update(step=t, expected=None, predicted=None,
                              reason=f"no machine move on label {sorted(label)}")
                    return ResolventReport(False, depth, checked, ce)
                child = (res.state, nq, nqt)
                if child not in parent:
                    parent[child] = (node, a)
                    nxt_frontier.append(child)
                    if len(parent) > max_nodes:
                        raise BudgetExceededError(f"more than {max_nodes} product states within depth {depth}")
        frontier = nxt_frontier
    return ResolventReport(True, depth, checked)


# -- structure completeness ----------------------------------------------------------------


@dataclass
class CompletenessReport:
    state_coverage: bool
    transition_coverage: bool
    conflict_convergence: bool
    uncovered_states: list = field(default_factory=list)
    uncovered_transitions: list = field(default_factory=list)
    unresolved_pairs: list = field(default_factory=list)

    @property
    def complete(self):
        return self.state_coverage and self.transition_coverage and self.conflict_convergence

    def to_json(self):
        d = asdict(self)
        d["uncovered_transitions"] = [[q, encode_symbol(b)] for q, b in self.uncovered_transitions]
        d["unresolved_pairs"] = [[[encode_symbol(x) for x in u], [encode_symbol(x) for x in v]]
                                 for u, v in self.unresolved_pairs]
        d["complete"] = self.complete
        return d


def check_structure_complete(samples, target, max_pairs=20):
    """Evaluates state coverage, transition coverage and conflict convergence.

    Two prefixes conflict when folding their prefix-tree nodes together (with
    every identification that forces) puts two different outputs on one
    alpha-input, i.e. the samples pin different outputs at the states they
    reach, directly or after the same continuation.
    """
    target = getattr(target, "machine", target)
    tree = _Tree(samples)
    if tree.empty:
        # no prefix at all: nothing is covered and no pair of states is separated
        multi = target.n_states > 1
        uncovered = list(target.states)
        missing = sorted(target.transitions, key=lambda k: (k[0], symbol_key(k[1])))
        return CompletenessReport(False, False, not multi, uncovered, missing, [])
    reached = [None] * len(tree)
    reached[0] = target.initial
    for n in tree.order[1:]:
        p = reached[tree.parent[n]]
        reached[n] = None if p is None else target._trans[p].get(tree.via[n])
    visited = {q for q in reached if q is not None}
    uncovered_states = [q for q in target.states if q not in visited]
    read = {(reached[tree.parent[n]], tree.via[n]) for n in tree.order[1:]}
    uncovered_transitions = sorted((k for k in target.transitions if k not in read),
                                   key=lambda k: (k[0], symbol_key(k[1])))
    unresolved = []
    nodes = [n for n in tree.order if reached[n] is not None]
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            if reached[u] != reached[v] and not tree.fold_conflict(u, v):
                unresolved.append((tree.prefix[u], tree.prefix[v]))
                if len(unresolved) >= max_pairs:
                    break
        if len(unresolved) >= max_pairs:
            break
    return CompletenessReport(not uncovered_states, not uncovered_transitions, not unresolved,
                              uncovered_states, uncovered_transitions, unresolved)
