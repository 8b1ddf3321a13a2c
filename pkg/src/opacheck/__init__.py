"""Exact opacity model checking for labelled Markov chains.

Decide whether a temporal property is opaque to a partial observer, compute
the exact probability mass of the traces that give it away, and quantify the
growth rate of those traces in bits per symbol.  Models are written in the
`ldtmc` guarded-command language or built programmatically.
"""

from .automata import Cycle, LassoExpr, Nfa, PLasso, Step, expr_probability, expr_to_nfa
from .checking import (CheckSettings, OpacityReport, SatResult, TraceSetPair,
                       check_noninterference, check_opacity, comp_r, comp_u,
                       degree_of_opacity, eval_prob_query, non_opaque_language,
                       non_opaque_traces, prob_path_formula, sat_state,
                       trace_language, trace_pair)
from .entropy import (EntropyReport, entropy_by_counting, entropy_report,
                      entropy_spectral, transparent_language)
from .errors import OpacheckError
from .formulas import (And, Atom, Bot, Eventually, FalseF, Next, Not, Opacity,
                       Or, PathNot, ProbQuery, Release, TrueF, Until,
                       negate_path, parse_property, to_pnf)
from .ldtmc import (ModelSource, expand_state_space, load_model, parse_model,
                    render_model)
from .model import (BOT, Label, Model, ObservationMap, StateMeta, Transition,
                    Violation, observe_string, post_states, pre_states,
                    validate_model)

__version__ = "0.1.0"

__all__ = [
    "And", "Atom", "BOT", "Bot", "CheckSettings", "Cycle", "EntropyReport",
    "Eventually", "FalseF", "Label", "LassoExpr", "Model", "ModelSource",
    "Next", "Nfa", "Not", "ObservationMap", "Opacity", "OpacheckError", "OpacityReport", "Or",
    "PLasso", "PathNot", "ProbQuery", "Release", "SatResult", "StateMeta",
    "Step", "TraceSetPair", "Transition", "TrueF", "Until", "Violation",
    "check_noninterference", "check_opacity", "comp_r", "comp_u",
    "degree_of_opacity", "entropy_by_counting", "entropy_report",
    "entropy_spectral", "eval_prob_query", "expand_state_space",
    "expr_probability", "expr_to_nfa", "load_model", "negate_path",
    "non_opaque_language", "non_opaque_traces", "observe_string",
    "parse_model", "parse_property", "post_states", "pre_states",
    "prob_path_formula", "render_model", "sat_state", "to_pnf",
    "trace_language", "trace_pair", "transparent_language", "validate_model",
]
