"""Core semantic objects: labels, observation maps, and labelled Markov chains.

A model is a finite state space with probability-labelled transitions, one
distinguished termination label that absorbs forever, a state labelling with
atomic propositions, and an observation map describing what an outside
observer sees of each transition label.  All probabilities are exact
rationals; floats never enter the semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .errors import UnknownLabel

BOT_NAME = "⊥"  # rendered ⊥


@dataclass(frozen=True, order=True)
class Label:
    """A transition label; exactly one label per alphabet is the termination label."""

    name: str
    is_bot: bool = False


BOT = Label(BOT_NAME, is_bot=True)

#: Observation symbol: a visible name (str) or None for an erased label.
#: The termination label always observes as BOT_NAME.
ObsSymbol = Optional[str]


@dataclass(frozen=True)
class ObservationMap:
    """Static label-level observation function.

    ``mapping`` assigns each non-termination label name either a visible
    observable name or None (erased).  The termination label is always
    observed as itself and needs no entry.
    """

    mapping: dict

    def symbol(self, label: Label) -> ObsSymbol:
        if label.is_bot:
            return BOT_NAME
        try:
            return self.mapping[label.name]
        except KeyError:
            raise UnknownLabel(f"label '{label.name}' has no observation entry") from None

    def observables(self) -> frozenset:
        """All visible observation symbols, including the termination symbol."""
        vis = {v for v in self.mapping.values() if v is not None}
        vis.add(BOT_NAME)
        return frozenset(vis)


def observe_string(obs: ObservationMap, word: Iterable[Label]) -> tuple:
    """Pointwise observation of a label sequence with erased symbols deleted."""
    out = []
    for lab in word:
        sym = obs.symbol(lab)
        if sym is not None:
            out.append(sym)
    return tuple(out)


@dataclass(frozen=True)
class StateMeta:
    """Per-state diagnostics: display name, source valuation, expansion parent."""

    name: str
    valuation: tuple = ()  # sorted (var, value) pairs
    parent: Optional[tuple] = None  # (parent state id, label name) from expansion


@dataclass(frozen=True)
class Violation:
    """One violated model invariant; validation reports these as data."""

    kind: str  # determinism | circularity | well-structure | stochasticity | observation
    message: str
    state: Optional[int] = None


@dataclass(frozen=True)
class Transition:
    source: int
    label: Label
    target: int
    prob: Fraction = Fraction(1)


@dataclass
class Model:
    """Explicit labelled Markov chain with observation map and state labelling.

    Immutable after construction; derived adjacency indexes are built once.
    """

    n_states: int
    alphabet: frozenset
    transitions: tuple
    initial: int
    finals: frozenset = frozenset()
    eta: dict = field(default_factory=dict)  # state -> frozenset of proposition names
    propositions: frozenset = frozenset()
    obs: ObservationMap = field(default_factory=lambda: ObservationMap({}))
    state_meta: tuple = ()
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        out = {s: [] for s in range(self.n_states)}
        for t in self.transitions:
            out[t.source].append(t)
        for s in out:
            out[s].sort(key=lambda t: (t.label.name, t.target))
        self._out = out
        self._by_label = {(t.source, t.label): t for t in self.transitions}
        if not self.state_meta:
            self.state_meta = tuple(StateMeta(f"s{i}") for i in range(self.n_states))

    # -- structure queries ------------------------------------------------

    @property
    def states(self) -> range:
        return range(self.n_states)

    def out(self, s: int) -> list:
        return self._out[s]

    def step(self, s: int, label: Label):
        """The unique transition from s with this label, or None."""
        return self._by_label.get((s, label))

    def props_of(self, s: int) -> frozenset:
        return self.eta.get(s, frozenset())

    def bot_label(self) -> Label:
        for lab in self.alphabet:
            if lab.is_bot:
                return lab
        return BOT

    def is_bot_committed(self, s: int) -> bool:
        """Every outgoing transition of s is the termination label."""
        outs = self._out[s]
        return bool(outs) and all(t.label.is_bot for t in outs)

    def valuation(self, s: int) -> dict:
        return dict(self.state_meta[s].valuation)


def post_states(m: Model, s: int) -> frozenset:
    """Immediate state successors of s."""
    return frozenset(t.target for t in m.out(s))


def pre_states(m: Model, s: int) -> frozenset:
    """Immediate state predecessors of s."""
    return frozenset(t.source for t in m.transitions if t.target == s)


def validate_model(m: Model) -> list:
    """Report every violated structural invariant; an empty report means valid.

    Checks determinism, circularity, well-structuredness and stochasticity,
    plus alphabet/observation-map coverage.  Pure: identical calls return
    identical reports.
    """
    report = []
    bots = [lab for lab in m.alphabet if lab.is_bot]
    if len(bots) != 1:
        report.append(Violation("observation", f"alphabet must contain exactly one termination label, found {len(bots)}"))
    names = [lab.name for lab in m.alphabet]
    if len(names) != len(set(names)):
        report.append(Violation("observation", "label names are not unique within the alphabet"))

    for s in m.states:
        outs = m.out(s)
        if not outs:
            report.append(Violation("circularity", f"state {s} has no outgoing transition", s))
            continue
        seen = {}
        for t in outs:
            if t.label in seen and seen[t.label] != t.target:
                report.append(Violation(
                    "determinism",
                    f"state {s} has transitions on '{t.label.name}' to both {seen[t.label]} and {t.target}",
                    s))
            seen[t.label] = t.target
        total = sum((t.prob for t in outs), Fraction(0))
        if total != 1:
            report.append(Violation("stochasticity", f"outgoing probabilities of state {s} sum to {total}", s))
        if any(t.prob <= 0 for t in outs):
            report.append(Violation("stochasticity", f"state {s} has a non-positive transition probability", s))

    # Once the termination label fires, nothing else may ever fire: every
    # target of a bot transition must emit only bot.
    for t in m.transitions:
        if t.label.is_bot:
            bad = [u for u in m.out(t.target) if not u.label.is_bot]
            if bad:
                report.append(Violation(
                    "well-structure",
                    f"state {t.target} is entered by '{BOT_NAME}' but emits '{bad[0].label.name}'",
                    t.target))

    try:
        for lab in m.alphabet:
            m.obs.symbol(lab)
    except UnknownLabel as exc:
        report.append(Violation("observation", str(exc)))
    return report


def reachable_states(m: Model, start: Optional[int] = None) -> frozenset:
    """States reachable from start (default: the initial state)."""
    if start is None:
        start = m.initial
    seen = {start}
    todo = [start]
    while todo:
        s = todo.pop()
        for t in m.out(s):
            if t.target not in seen:
                seen.add(t.target)
                todo.append(t.target)
    return frozenset(seen)


def closed_states_within(m: Model, allowed: frozenset) -> frozenset:
    """Union of all subsets of `allowed` that no transition can leave.

    Greatest fixpoint: repeatedly discard states with an outgoing transition
    whose target fell outside.  A run that reaches the result can stay in
    `allowed` forever with probability 1; anywhere else in `allowed` the stay
    has probability 0.
    """
    core = set(allowed)
    changed = True
    while changed:
        changed = False
        for s in list(core):
            if any(t.target not in core for t in m.out(s)):
                core.discard(s)
                changed = True
    return frozenset(core)


def absorbed_states(m: Model) -> frozenset:
    """States of closed strongly connected components (bottom SCCs).

    A run that reaches one of these can never leave its component; these are
    the positions where a finite word can honestly stand for the whole
    remaining behaviour (termination loops and inescapable pump cycles).
    """
    edges = {s: [t.target for t in m.out(s)] for s in m.states}
    absorbed = set()
    for scc in strongly_connected_components(edges):
        members = set(scc)
        if all(t in members for s in scc for t in edges[s]):
            if len(scc) > 1 or any(s in edges[s] for s in scc):
                absorbed.update(scc)
    return frozenset(absorbed)


def recurrent_states_within(m: Model, allowed: frozenset) -> frozenset:
    """States of the closed core of `allowed` that lie on a cycle of it.

    These are the positions where a run that never leaves `allowed` has
    arrived at its absorbing structure (a pump cycle or the termination
    loop); anything else in the core is a transient way-station.
    """
    core = closed_states_within(m, allowed)
    edges = {s: [t.target for t in m.out(s) if t.target in core] for s in core}
    on_cycle = set()
    for scc in strongly_connected_components(edges):
        if len(scc) > 1 or any(s in edges[s] for s in scc):
            on_cycle.update(scc)
    return frozenset(on_cycle)


def strongly_connected_components(edges: dict) -> list:
    """Iterative Tarjan over an adjacency dict (node -> iterable of nodes)."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    sccs = []
    counter = [0]

    for root in edges:
        if root in index:
            continue
        work = [(root, iter(edges[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(edges[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                scc = []
                while True:
                    top = stack.pop()
                    on_stack.discard(top)
                    scc.append(top)
                    if top == node:
                        break
                sccs.append(scc)
    return sccs


def model_to_json_dict(m: Model) -> dict:
    """JSON-exportable description of a model; probabilities as num/den strings."""
    return {
        "states": [
            {
                "id": s,
                "name": m.state_meta[s].name,
                "valuation": dict(m.state_meta[s].valuation),
                "propositions": sorted(m.props_of(s)),
                "final": s in m.finals,
            }
            for s in m.states
        ],
        "initial": m.initial,
        "alphabet": sorted(
            ({"name": lab.name, "bot": lab.is_bot} for lab in m.alphabet),
            key=lambda d: d["name"]),
        "transitions": [
            {
                "source": t.source,
                "label": t.label.name,
                "target": t.target,
                "prob": f"{t.prob.numerator}/{t.prob.denominator}",
            }
            for t in sorted(m.transitions, key=lambda t: (t.source, t.label.name, t.target))
        ],
        "observations": {
            lab.name: m.obs.symbol(lab)
            for lab in sorted(m.alphabet, key=lambda l: l.name)
        },
        "constants": dict(m.constants),
    }
