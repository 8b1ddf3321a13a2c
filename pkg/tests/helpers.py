"""Hand-built reference models used across the test suite."""

from fractions import Fraction

from opacheck import Label, Model, ObservationMap, Transition
from opacheck.model import BOT


def build_model(n, edges, obs_map, eta=None, initial=0, props=(), finals=()):
    """Compact model constructor: edges are (src, label, dst, prob) tuples."""
    labels = {}
    for (_, name, _, _) in edges:
        labels[name] = BOT if name == "BOT" else labels.get(name, Label(name))
    transitions = tuple(
        Transition(src, labels[name], dst, Fraction(prob))
        for (src, name, dst, prob) in edges)
    return Model(
        n_states=n,
        alphabet=frozenset(labels.values()) | {BOT},
        transitions=transitions,
        initial=initial,
        finals=frozenset(finals),
        eta={k: frozenset(v) for k, v in (eta or {}).items()},
        propositions=frozenset(props),
        obs=ObservationMap(obs_map),
    )


def fig2a_model():
    """Two branches: pump b then hit the sensitive sink, or pump c and stop.

    Only a is visible; both behaviours observe as aa followed by
    termination.
    """
    return build_model(
        7,
        [
            (0, "a", 1, 1),
            (1, "c", 2, "1/2"), (1, "b", 4, "1/2"),
            (2, "b", 2, "1/2"), (2, "a", 3, "1/2"),
            (3, "BOT", 3, 1),
            (4, "a", 5, 1),
            (5, "c", 5, "1/2"), (5, "BOT", 6, "1/2"),
            (6, "BOT", 6, 1),
        ],
        {"a": "a", "b": None, "c": None},
        eta={3: {"sens"}},
        props=["sens"],
        finals=[3, 6],
    )


def fig2b_model():
    """Everything loops forever; only b is visible."""
    return build_model(
        7,
        [
            (0, "a", 1, 1),
            (1, "b", 2, "1/2"), (1, "c", 4, "1/2"),
            (2, "a", 3, 1), (3, "b", 2, 1),
            (4, "b", 5, 1), (5, "c", 6, 1), (6, "b", 5, 1),
        ],
        {"a": None, "b": "b", "c": None},
        eta={2: {"sens"}},
        props=["sens"],
        finals=[2, 6],
    )


def fig3_model():
    """Probabilistic variant of fig2a with b visible as well."""
    return build_model(
        7,
        [
            (0, "a", 1, 1),
            (1, "c", 2, "1/3"), (1, "b", 4, "2/3"),
            (2, "b", 2, "1/2"), (2, "a", 3, "1/2"),
            (3, "BOT", 3, 1),
            (4, "a", 5, 1),
            (5, "c", 5, "1/2"), (5, "BOT", 6, "1/2"),
            (6, "BOT", 6, 1),
        ],
        {"a": "a", "b": "b", "c": None},
        eta={3: {"sens"}},
        props=["sens"],
        finals=[3, 6],
    )


def fig6a_model():
    """Fibonacci-shaped pumping with visible b and c and a hidden a-loop."""
    return build_model(
        4,
        [
            (0, "a", 0, "1/3"), (0, "b", 1, "1/3"), (0, "c", 3, "1/3"),
            (1, "a", 0, "1/2"), (1, "b", 2, "1/2"),
            (2, "BOT", 2, 1),
            (3, "BOT", 3, 1),
        ],
        {"a": None, "b": "b", "c": "c"},
        eta={3: {"sens"}, 2: {"pub"}},
        props=["sens", "pub"],
        finals=[2, 3],
    )
