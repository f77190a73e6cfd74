"""Random target machines and corpora for the tests."""

import random

from tmrm.automata import BETA_DEFAULT, DBMM
from tmrm.envs import DetPOMDP
from tmrm.traces import SampleSet

ALPHAS = ("x", "y", "z", "w")
BETAS = ("a", "b", "c")


def toggle_machine():
    """Two states swapped by ``a``; ``x`` emits 0 in q0 and 1 in q1."""
    return DBMM(2, 0, transitions={(0, "a"): 1, (1, "a"): 0},
                emissions={(0, "x"): 0, (1, "x"): 1})


def random_target(rng, max_states=5, max_beta=3, max_alpha=4, outputs=3, tries=1000):
    """Total DBMM whose states are all reachable and pairwise separated by one alpha-input."""
    for _ in range(tries):
        n = rng.randint(1, max_states)
        betas = BETAS[:rng.randint(1, max_beta)]
        alphas = ALPHAS[:rng.randint(1, max_alpha)]
        trans = {(q, b): rng.randrange(n) for q in range(n) for b in betas}
        emis = {(q, a): rng.randrange(outputs) for q in range(n) for a in alphas}
        m = DBMM(n, 0, alphas, betas, trans, emis)
        if len(m.reachable()) != n:
            continue
        rows = {tuple(emis[(q, a)] for a in alphas) for q in range(n)}
        if len(rows) != n:
            continue
        return m
    raise RuntimeError("no target found")


def sample_for(machine, betas, final_alpha, rng):
    """Walk ``betas`` with random alpha-inputs in between, then end on ``final_alpha``."""
    alphas = sorted(machine.alpha)
    w = []
    for b in betas:
        w.append(rng.choice(alphas))
        w.append(b)
    w.append(final_alpha)
    return tuple(w), tuple(machine.trace_outputs(w))


def access_strings(machine):
    """Shortest (then alphabetically first) beta-string to each state."""
    acc = {machine.initial: ()}
    frontier = [machine.initial]
    while frontier:
        nxt = []
        for q in frontier:
            for b in sorted(machine.beta):
                t = machine.step_beta(q, b)
                if t not in acc:
                    acc[t] = acc[q] + (b,)
                    nxt.append(t)
        frontier = nxt
    return acc


def complete_corpus(machine, rng, extra_walks=4, max_walk=4, partial=True):
    """Sample set covering every state and transition with every alpha-input at each node.

    Extra random walks add nodes; with ``partial`` their nodes get a random
    subset of alpha-inputs, so the result is not always structure complete.
    """
    alphas = sorted(machine.alpha)
    nodes = {}
    for path in access_strings(machine).values():
        for b in [None] + sorted(machine.beta):
            full = path if b is None else path + (b,)
            for i in range(len(full) + 1):
                nodes[full[:i]] = set(alphas)
    for _ in range(extra_walks):
        walk = tuple(rng.choice(sorted(machine.beta)) for _ in range(rng.randint(1, max_walk)))
        for i in range(len(walk) + 1):
            if walk[:i] not in nodes:
                chosen = rng.sample(alphas, rng.randint(1, len(alphas))) if partial else alphas
                nodes[walk[:i]] = set(chosen)
    samples = []
    for betas in sorted(nodes):
        for a in sorted(nodes[betas]):
            samples.append(sample_for(machine, betas, a, rng))
    rng.shuffle(samples)
    return SampleSet(samples, frozenset(machine.alpha), frozenset(machine.beta))


def random_corpus(machine, rng, n_samples=10, max_len=6):
    alphas = sorted(machine.alpha)
    betas = sorted(machine.beta)
    samples = []
    for _ in range(n_samples):
        path = tuple(rng.choice(betas) for _ in range(rng.randint(0, max_len)))
        samples.append(sample_for(machine, path, rng.choice(alphas), rng))
    return SampleSet(samples, frozenset(machine.alpha), frozenset(machine.beta))


def first_conflict(samples):
    """(first writer, offending sample) of the earliest output clash, scanning prefixes directly."""
    seen = {}
    for idx, (w, o) in enumerate(samples.samples):
        prefix = ()
        for x, y in zip(w, o):
            if y is BETA_DEFAULT:
                prefix += (x,)
                continue
            key = (prefix, x)
            if key in seen:
                if seen[key][0] != y:
                    return seen[key][1], idx
            else:
                seen[key] = (y, idx)
    return None


def make_rng(seed):
    return random.Random(seed)


class Line(DetPOMDP):
    """Three cells in a row; fully observed, never pays."""

    actions = ("left", "right")
    initial_state = 0

    def transition(self, s, a):
        return max(0, s - 1) if a == "left" else min(2, s + 1)

    def reward(self, s, a):
        return 0

    def observe(self, s):
        return f"c{s}"
