"""Seeded random models and properties for oracle-agreement tests."""

import random
from fractions import Fraction

from opacheck import Label, Model, ObservationMap, Transition, validate_model
from opacheck.formulas import And, Atom, Not, Or, Release, TrueF, Until
from opacheck.model import BOT

_SPLITS = {
    1: [(Fraction(1),)],
    2: [(Fraction(1, 2), Fraction(1, 2)),
        (Fraction(1, 3), Fraction(2, 3)),
        (Fraction(1, 4), Fraction(3, 4))],
    3: [(Fraction(1, 3), Fraction(1, 3), Fraction(1, 3)),
        (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4))],
}


def random_model(rng: random.Random, max_states=8, labels=("a", "b", "c"),
                 acyclic=False) -> Model:
    """A valid model: deterministic, circular, well-structured, stochastic.

    Reachable states only; observation maps keep at most two visible symbols
    so observation strings collapse heavily.
    """
    while True:
        n = rng.randint(2, max_states)
        transitions = []
        label_objs = {name: Label(name) for name in labels}
        for s in range(n):
            if acyclic:
                targets_pool = list(range(s + 1, n))
                terminal = not targets_pool or rng.random() < 0.15
            else:
                targets_pool = list(range(n))
                terminal = rng.random() < 0.25 and s != 0
            if terminal:
                transitions.append(Transition(s, BOT, s, Fraction(1)))
                continue
            degree = min(len(labels), len(targets_pool),
                         rng.choices([1, 2, 3], weights=[4, 5, 1])[0])
            degree = max(degree, 1)
            chosen = rng.sample(labels, degree)
            probs = rng.choice(_SPLITS[degree])
            for name, p in zip(chosen, probs):
                transitions.append(
                    Transition(s, label_objs[name], rng.choice(targets_pool), p))

        obs_map = {}
        for name in labels:
            roll = rng.random()
            if roll < 0.4:
                obs_map[name] = None
            elif roll < 0.8:
                obs_map[name] = "u"
            else:
                obs_map[name] = "v"

        eta = {}
        for s in range(n):
            props = set()
            if rng.random() < 0.35:
                props.add("p")
            if rng.random() < 0.35:
                props.add("q")
            eta[s] = frozenset(props)
        if not any("p" in eta[s] for s in range(n)):
            eta[rng.randrange(n)] = eta[rng.randrange(n)] | {"p"}

        model = Model(
            n_states=n,
            alphabet=frozenset(label_objs.values()) | {BOT},
            transitions=tuple(transitions),
            initial=0,
            eta=eta,
            propositions=frozenset({"p", "q"}),
            obs=ObservationMap(obs_map),
        )
        model = _restrict_to_reachable(model)
        if not validate_model(model):
            return model


def _restrict_to_reachable(m: Model) -> Model:
    seen = {m.initial}
    todo = [m.initial]
    while todo:
        s = todo.pop()
        for t in m.out(s):
            if t.target not in seen:
                seen.add(t.target)
                todo.append(t.target)
    order = sorted(seen)
    index = {s: i for i, s in enumerate(order)}
    return Model(
        n_states=len(order),
        alphabet=m.alphabet,
        transitions=tuple(
            Transition(index[t.source], t.label, index[t.target], t.prob)
            for t in m.transitions if t.source in index),
        initial=index[m.initial],
        eta={index[s]: m.props_of(s) for s in order},
        propositions=m.propositions,
        obs=m.obs,
    )


def random_state_formula(rng: random.Random):
    roll = rng.random()
    if roll < 0.35:
        return Atom("p")
    if roll < 0.55:
        return Atom("q")
    if roll < 0.7:
        return Not(Atom(rng.choice("pq")))
    if roll < 0.8:
        return TrueF()
    if roll < 0.9:
        return Or(Atom("p"), Atom("q"))
    return And(Atom("p"), Not(Atom("q")))


def random_path_formula(rng: random.Random):
    kind = rng.choice(["F", "U", "R"])
    if kind == "F":
        return Until(TrueF(), random_state_formula(rng))
    if kind == "U":
        return Until(random_state_formula(rng), random_state_formula(rng))
    return Release(random_state_formula(rng), random_state_formula(rng))
