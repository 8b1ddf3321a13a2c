"""Finite automata over label or observation alphabets, plus lasso expressions.

Trace sets are languages of finite words.  Words over the model's label
alphabet use Label symbols; observation languages use plain strings.  Lasso
expressions are the printable fragment: a stem of steps with starred simple
cycles and an optional trailing block of termination steps.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .errors import DivergentCycle, InvalidWalk, ResourceLimit
from .model import BOT_NAME, Label, Model, ObservationMap, observe_string

DEFAULT_DFA_CAP = 10 ** 6


def _sym_key(sym):
    return sym.name if isinstance(sym, Label) else str(sym)


@dataclass
class Nfa:
    """Nondeterministic finite automaton; symbols are Labels or strings.

    Transitions are (state, symbol, state) triples; symbol None is epsilon.
    """

    n_states: int
    alphabet: frozenset
    transitions: frozenset
    initials: frozenset
    accepting: frozenset

    def __post_init__(self):
        self._delta = {}
        for (p, a, q) in self.transitions:
            self._delta.setdefault((p, a), set()).add(q)

    def moves(self, state, symbol) -> set:
        return self._delta.get((state, symbol), set())

    def eps_closure(self, states: Iterable) -> frozenset:
        seen = set(states)
        todo = list(seen)
        while todo:
            s = todo.pop()
            for q in self.moves(s, None):
                if q not in seen:
                    seen.add(q)
                    todo.append(q)
        return frozenset(seen)

    def accepts(self, word) -> bool:
        cur = self.eps_closure(self.initials)
        for sym in word:
            nxt = set()
            for s in cur:
                nxt |= self.moves(s, sym)
            cur = self.eps_closure(nxt)
            if not cur:
                return False
        return bool(cur & self.accepting)


def empty_nfa(alphabet) -> Nfa:
    return Nfa(0, frozenset(alphabet), frozenset(), frozenset(), frozenset())


def epsilon_nfa(alphabet) -> Nfa:
    return Nfa(1, frozenset(alphabet), frozenset(), frozenset({0}), frozenset({0}))


def remove_epsilons(a: Nfa) -> Nfa:
    """Equivalent epsilon-free automaton via closure of moves."""
    trans = set()
    accepting = set()
    for s in range(a.n_states):
        closure = a.eps_closure({s})
        if closure & a.accepting:
            accepting.add(s)
        for sym in a.alphabet:
            targets = set()
            for c in closure:
                targets |= a.moves(c, sym)
            for t in a.eps_closure(targets):
                trans.add((s, sym, t))
    initials = a.eps_closure(a.initials)
    return Nfa(a.n_states, a.alphabet, frozenset(trans), frozenset(initials), frozenset(accepting))


def trim(a: Nfa) -> Nfa:
    """Keep states both reachable from an initial and able to reach acceptance."""
    a = remove_epsilons(a) if any(sym is None for (_, sym, _) in a.transitions) else a
    fwd = {s: set() for s in range(a.n_states)}
    bwd = {s: set() for s in range(a.n_states)}
    for (p, sym, q) in a.transitions:
        fwd[p].add(q)
        bwd[q].add(p)

    def closure(seeds, edges):
        seen = set(seeds)
        todo = list(seeds)
        while todo:
            s = todo.pop()
            for t in edges[s]:
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        return seen

    reach = closure(a.initials, fwd)
    copre = closure(a.accepting, bwd)
    useful = sorted(reach & copre)
    index = {s: i for i, s in enumerate(useful)}
    trans = frozenset((index[p], sym, index[q]) for (p, sym, q) in a.transitions
                      if p in index and q in index)
    return Nfa(len(useful), a.alphabet, trans,
               frozenset(index[s] for s in a.initials if s in index),
               frozenset(index[s] for s in a.accepting if s in index))


@dataclass
class Dfa:
    """Complete deterministic automaton; state 0.. with an explicit sink allowed."""

    n_states: int
    alphabet: frozenset
    delta: dict  # (state, symbol) -> state, total
    initial: int
    accepting: frozenset

    def accepts(self, word) -> bool:
        s = self.initial
        for sym in word:
            s = self.delta[(s, sym)]
        return s in self.accepting

    def to_nfa(self) -> Nfa:
        trans = frozenset((p, sym, q) for (p, sym), q in self.delta.items())
        return Nfa(self.n_states, self.alphabet, trans,
                   frozenset({self.initial}), self.accepting)


def determinize(a: Nfa, cap: int = DEFAULT_DFA_CAP) -> Dfa:
    """Subset construction; raises ResourceLimit beyond `cap` states."""
    symbols = sorted(a.alphabet, key=_sym_key)
    start = a.eps_closure(a.initials)
    index = {start: 0}
    order = [start]
    delta = {}
    todo = deque([start])
    while todo:
        cur = todo.popleft()
        for sym in symbols:
            nxt = set()
            for s in cur:
                nxt |= a.moves(s, sym)
            nxt = a.eps_closure(nxt)
            if nxt not in index:
                if len(index) >= cap:
                    raise ResourceLimit(f"determinization exceeded {cap} states")
                index[nxt] = len(index)
                order.append(nxt)
                todo.append(nxt)
            delta[(index[cur], sym)] = index[nxt]
    accepting = frozenset(i for subset, i in index.items() if subset & a.accepting)
    return Dfa(len(index), a.alphabet, delta, 0, accepting)


def complement(d: Dfa) -> Dfa:
    return Dfa(d.n_states, d.alphabet, d.delta, d.initial,
               frozenset(range(d.n_states)) - d.accepting)


def minimize(d: Dfa) -> Dfa:
    """Moore partition refinement on a complete DFA."""
    symbols = sorted(d.alphabet, key=_sym_key)
    block = [1 if s in d.accepting else 0 for s in range(d.n_states)]
    while True:
        signatures = {}
        new_block = [0] * d.n_states
        for s in range(d.n_states):
            sig = (block[s], tuple(block[d.delta[(s, sym)]] for sym in symbols))
            if sig not in signatures:
                signatures[sig] = len(signatures)
            new_block[s] = signatures[sig]
        if new_block == block:
            break
        block = new_block
    n = max(block) + 1 if block else 0
    delta = {}
    for s in range(d.n_states):
        for sym in symbols:
            delta[(block[s], sym)] = block[d.delta[(s, sym)]]
    accepting = frozenset(block[s] for s in d.accepting)
    return Dfa(n, d.alphabet, delta, block[d.initial], accepting)


def product_dfa(x: Dfa, y: Dfa, mode: str) -> Dfa:
    """Product automaton; mode 'and' intersects, 'diff' keeps x-and-not-y."""
    assert x.alphabet == y.alphabet
    symbols = sorted(x.alphabet, key=_sym_key)
    index = {(x.initial, y.initial): 0}
    delta = {}
    todo = deque([(x.initial, y.initial)])
    while todo:
        p, q = todo.popleft()
        i = index[(p, q)]
        for sym in symbols:
            nxt = (x.delta[(p, sym)], y.delta[(q, sym)])
            if nxt not in index:
                index[nxt] = len(index)
                todo.append(nxt)
            delta[(i, sym)] = index[nxt]
    if mode == "and":
        keep = lambda p, q: p in x.accepting and q in y.accepting
    else:
        keep = lambda p, q: p in x.accepting and q not in y.accepting
    accepting = frozenset(i for (p, q), i in index.items() if keep(p, q))
    return Dfa(len(index), x.alphabet, delta, 0, accepting)


def difference(a: Nfa, b: Nfa, cap: int = DEFAULT_DFA_CAP) -> Nfa:
    """Language difference L(a) \\ L(b) over a shared alphabet."""
    alphabet = a.alphabet | b.alphabet
    a = Nfa(a.n_states, alphabet, a.transitions, a.initials, a.accepting)
    b = Nfa(b.n_states, alphabet, b.transitions, b.initials, b.accepting)
    da = determinize(a, cap)
    db = determinize(b, cap)
    return trim(product_dfa(da, db, "diff").to_nfa())


def intersect(a: Nfa, b: Nfa, cap: int = DEFAULT_DFA_CAP) -> Nfa:
    alphabet = a.alphabet | b.alphabet
    a = Nfa(a.n_states, alphabet, a.transitions, a.initials, a.accepting)
    b = Nfa(b.n_states, alphabet, b.transitions, b.initials, b.accepting)
    return trim(product_dfa(determinize(a, cap), determinize(b, cap), "and").to_nfa())


def union(automata: list, alphabet=None) -> Nfa:
    """Disjoint union of automata."""
    alphabet = frozenset(alphabet or frozenset().union(*(a.alphabet for a in automata)))
    offset = 0
    trans, initials, accepting = set(), set(), set()
    for a in automata:
        trans |= {(p + offset, sym, q + offset) for (p, sym, q) in a.transitions}
        initials |= {s + offset for s in a.initials}
        accepting |= {s + offset for s in a.accepting}
        offset += a.n_states
    return Nfa(offset, alphabet, frozenset(trans), frozenset(initials), frozenset(accepting))


def is_empty(a: Nfa) -> bool:
    return trim(a).n_states == 0 or not trim(a).accepting


def strict_extensions(a: Nfa) -> Nfa:
    """Words that strictly extend some word of L(a)."""
    f = a.n_states
    trans = set(a.transitions)
    for q in a.accepting:
        for sym in a.alphabet:
            trans.add((q, sym, f))
    for sym in a.alphabet:
        trans.add((f, sym, f))
    return Nfa(f + 1, a.alphabet, frozenset(trans), a.initials, frozenset({f}))


def language_inclusion(a: Nfa, b: Nfa, cap: int = DEFAULT_DFA_CAP):
    """Decide L(a) ⊆ L(b); on failure also return the shortest witness word.

    Ties among shortest witnesses break lexicographically on symbol names.
    """
    diff = difference(a, b, cap)
    word = shortest_word(diff)
    if word is None:
        return True, None
    return False, word


def shortest_word(a: Nfa) -> Optional[tuple]:
    """Shortest accepted word; lexicographic tie-break by symbol name."""
    a = trim(a)
    if not a.accepting:
        return None
    parent = {}
    seen = set(a.initials)
    frontier = deque(sorted(a.initials))
    for s in a.initials:
        if s in a.accepting:
            return ()
    by_sym = sorted({(p, sym, q) for (p, sym, q) in a.transitions},
                    key=lambda t: (t[0], _sym_key(t[1]), t[2]))
    adj = {}
    for (p, sym, q) in by_sym:
        adj.setdefault(p, []).append((sym, q))
    while frontier:
        s = frontier.popleft()
        for sym, q in adj.get(s, []):
            if q not in seen:
                seen.add(q)
                parent[q] = (s, sym)
                if q in a.accepting:
                    word = []
                    cur = q
                    while cur in parent:
                        cur, sym2 = parent[cur]
                        word.append(sym2)
                    return tuple(reversed(word))
                frontier.append(q)
    return None


def language_equal(a: Nfa, b: Nfa, cap: int = DEFAULT_DFA_CAP) -> bool:
    return language_inclusion(a, b, cap)[0] and language_inclusion(b, a, cap)[0]


def enumerate_words(a: Nfa, max_len: int) -> set:
    """All accepted words of length <= max_len (test helper; exponential)."""
    a2 = remove_epsilons(a)
    out = set()
    frontier = {(): a2.eps_closure(a2.initials)}
    for length in range(max_len + 1):
        nxt = {}
        for word, states in frontier.items():
            if states & a2.accepting:
                out.add(word)
            if length == max_len:
                continue
            for sym in a2.alphabet:
                targets = set()
                for s in states:
                    targets |= a2.moves(s, sym)
                if targets:
                    nxt.setdefault(word + (sym,), set()).update(targets)
        frontier = {w: frozenset(s) for w, s in nxt.items()}
        if not frontier:
            break
    return out


def count_words(a: Nfa, n: int, cap: int = DEFAULT_DFA_CAP) -> int:
    """Number of distinct words of length exactly n in L(a).

    Dynamic programming over the determinized, trimmed automaton with
    arbitrary-precision counts.
    """
    d = determinize(trim(a), cap)
    counts = {d.initial: 1}
    for _ in range(n):
        nxt = {}
        for s, c in counts.items():
            for sym in d.alphabet:
                t = d.delta[(s, sym)]
                nxt[t] = nxt.get(t, 0) + c
        counts = nxt
    return sum(c for s, c in counts.items() if s in d.accepting)


# -- observation images -------------------------------------------------------

def homomorphic_image(a: Nfa, obs: ObservationMap) -> Nfa:
    """Image of a label language under the observation map, epsilon-eliminated."""
    trans = set()
    for (p, sym, q) in a.transitions:
        if sym is None:
            trans.add((p, None, q))
        else:
            trans.add((p, obs.symbol(sym), q))  # erased labels become epsilons
    image = Nfa(a.n_states, obs.observables(), frozenset(trans), a.initials, a.accepting)
    return remove_epsilons(image)


def inverse_image(b: Nfa, obs: ObservationMap, alphabet: frozenset,
                  cap: int = DEFAULT_DFA_CAP) -> Nfa:
    """All label words whose observation lies in L(b).

    Construction: determinize b over the observation alphabet, then let every
    visible label follow its image's edge and every erased label loop on
    every state.
    """
    b = Nfa(b.n_states, b.alphabet | obs.observables(), b.transitions, b.initials, b.accepting)
    d = determinize(b, cap)
    trans = set()
    for s in range(d.n_states):
        for lab in alphabet:
            sym = obs.symbol(lab)
            if sym is None:
                trans.add((s, lab, s))
            else:
                trans.add((s, lab, d.delta[(s, sym)]))
    return Nfa(d.n_states, frozenset(alphabet), frozenset(trans),
               frozenset({d.initial}), d.accepting)


# -- lasso expressions --------------------------------------------------------

@dataclass(frozen=True)
class Step:
    label: Label


@dataclass(frozen=True)
class Cycle:
    labels: tuple  # nonempty tuple of Label, starred


@dataclass(frozen=True)
class LassoExpr:
    """Stem of steps with starred simple cycles, optional trailing ⊥-block.

    `suffix_bot` marks that any number of termination steps may follow.
    """

    items: tuple = ()
    suffix_bot: bool = False

    def render(self, verbose: bool = False) -> str:
        parts = []
        for item in self.items:
            if isinstance(item, Step):
                parts.append(item.label.name)
            else:
                parts.append("(" + "".join(l.name for l in item.labels) + ")*")
        if verbose and self.suffix_bot:
            parts.append(f"({BOT_NAME})*")
        text = "".join(parts)
        return text if text else "ε"

    def render_observation(self, obs: ObservationMap, verbose: bool = False) -> str:
        """Observation image of the expression, erased labels dropped."""
        parts = []
        for item in self.items:
            if isinstance(item, Step):
                sym = obs.symbol(item.label)
                if sym is not None:
                    parts.append(sym)
            else:
                syms = [obs.symbol(l) for l in item.labels]
                syms = [s for s in syms if s is not None]
                if syms:
                    parts.append("(" + "".join(syms) + ")*")
        if verbose and self.suffix_bot:
            parts.append(f"({BOT_NAME})*")
        text = "".join(parts)
        return text if text else "ε"


@dataclass(frozen=True)
class PLasso:
    """A lasso expression with its exact probability mass."""

    tr: LassoExpr
    pr: Fraction


def expr_to_nfa(e: LassoExpr, alphabet, bot: Label) -> Nfa:
    """Automaton for the expression's denotation (stars as finite unrollings)."""
    trans = set()
    cur = 0
    n = 1
    for item in e.items:
        if isinstance(item, Step):
            trans.add((cur, item.label, n))
            cur = n
            n += 1
        else:
            prev = cur
            here = cur
            for lab in item.labels[:-1]:
                trans.add((here, lab, n))
                here = n
                n += 1
            trans.add((here, item.labels[-1], prev))
            cur = prev
    accepting = {cur}
    if e.suffix_bot:
        # Fresh state: termination padding comes strictly after all pumping.
        trans.add((cur, bot, n))
        trans.add((n, bot, n))
        accepting.add(n)
        n += 1
    return Nfa(n, frozenset(alphabet), frozenset(trans), frozenset({0}), frozenset(accepting))


def expr_probability(e: LassoExpr, m: Model, start: int) -> Fraction:
    """Exact probability mass of the expression's trace family from `start`.

    Steps multiply their transition probabilities; a starred cycle of
    probability p contributes the geometric factor 1/(1-p); the trailing
    termination block contributes 1.
    """
    prob = Fraction(1)
    state = start
    for item in e.items:
        if isinstance(item, Step):
            t = m.step(state, item.label)
            if t is None:
                raise InvalidWalk(
                    f"no transition on '{item.label.name}' from state {state}")
            prob *= t.prob
            state = t.target
        else:
            cyc_prob = Fraction(1)
            s = state
            for lab in item.labels:
                t = m.step(s, lab)
                if t is None:
                    raise InvalidWalk(f"no transition on '{lab.name}' from state {s}")
                cyc_prob *= t.prob
                s = t.target
            if s != state:
                raise InvalidWalk("cycle does not return to its base state")
            if cyc_prob >= 1:
                raise DivergentCycle(f"cycle probability {cyc_prob} has no geometric sum")
            prob /= (1 - cyc_prob)
    return prob


# -- expression extraction ----------------------------------------------------

def extract_lassos(a: Nfa, bot: Label, max_expressions: int = 256):
    """Enumerate lasso expressions covering L(a); returns (exprs, exact).

    Stems are simple initial->accepting paths in the trimmed automaton; at
    each stem state the simple cycles through it are attached as starred
    segments.  Any unrolling of such an expression is a walk of the automaton
    ending in an accepting state, so the union is always a sublanguage;
    `exact` reports whether it covers all of L(a) (finite unions of linear
    star expressions cannot express interleaved cycles, so exactness can
    genuinely fail).

    Results are deterministic: sorted by rendering, subsumed expressions
    dropped.
    """
    a = trim(a)
    if not a.accepting:
        return [], True

    adj = {}
    for (p, sym, q) in sorted(a.transitions, key=lambda t: (t[0], _sym_key(t[1]), t[2])):
        adj.setdefault(p, []).append((sym, q))

    exprs = []
    overflow = False

    def bot_suffix_ok(state) -> bool:
        # Trailing ⊥-blocks are exact when every ⊥-step from here onward
        # stays accepting (then any padding length is in the language).
        seen = set()
        cur = state
        while cur not in seen:
            seen.add(cur)
            nxt = [q for (sym, q) in adj.get(cur, []) if isinstance(sym, Label) and sym.is_bot]
            if not nxt:
                return False
            if len(nxt) > 1 or nxt[0] not in a.accepting:
                return False
            cur = nxt[0]
        return True

    def simple_cycles_at(base) -> list:
        """Simple cycles through `base` (no interior state repeats)."""
        cycles = []

        def walk(state, labels, visited):
            for sym, q in adj.get(state, []):
                if not isinstance(sym, Label) or sym.is_bot:
                    continue
                if q == base:
                    cycles.append(tuple(labels + [sym]))
                elif q not in visited:
                    walk(q, labels + [sym], visited | {q})

        walk(base, [], {base})
        return cycles

    def stems():
        """DFS over simple paths from initials, yielding accepting-ended stems."""
        out = []

        def walk(state, labels, path):
            if state in a.accepting:
                out.append((tuple(labels), tuple(path)))
            for sym, q in adj.get(state, []):
                if not isinstance(sym, Label):
                    continue
                if q not in path:
                    walk(q, labels + [sym], path + [q])

        for init in sorted(a.initials):
            walk(init, [], [init])
        return out

    cycle_cache = {}
    for labels, path in stems():
        if len(exprs) >= max_expressions:
            overflow = True
            break
        items = []
        for i, state in enumerate(path):
            if state not in cycle_cache:
                cycle_cache[state] = sorted(simple_cycles_at(state),
                                            key=lambda c: tuple(_sym_key(l) for l in c))
            for cyc in cycle_cache[state]:
                items.append(Cycle(cyc))
            if i < len(labels):
                items.append(Step(labels[i]))
        exprs.append(LassoExpr(tuple(items), suffix_bot=bot_suffix_ok(path[-1])))

    # Deterministic order, then drop expressions subsumed by another.
    exprs = sorted(set(exprs), key=lambda e: (e.render(verbose=True), len(e.items)))
    nfas = [expr_to_nfa(e, a.alphabet, bot) for e in exprs]
    keep = []
    for i, e in enumerate(exprs):
        subsumed = False
        for j, other in enumerate(exprs):
            if i == j:
                continue
            if language_inclusion(nfas[i], nfas[j])[0]:
                if not language_inclusion(nfas[j], nfas[i])[0] or j < i:
                    subsumed = True
                    break
        if not subsumed:
            keep.append(e)

    if overflow:
        return keep, False
    if keep:
        covered = union([expr_to_nfa(e, a.alphabet, bot) for e in keep], a.alphabet)
    else:
        covered = empty_nfa(a.alphabet)
    exact = language_equal(covered, a)
    return keep, exact
