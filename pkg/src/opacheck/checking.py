"""The verification engine.

Builds the finite-word trace languages of path formulas, decides opacity by
observation-image inclusion (or by the literal per-expression coverage loop),
extracts the non-opaque language with exact witness probabilities, evaluates
probability queries on the chain, and checks bounded non-interference.

Trace-language encoding (all languages are finite words over the label
alphabet, the termination label included as an ordinary trailing letter):

* ``X p``     — the one-step words into Sat(p).
* ``p U q``   — words of walks that pass through a Sat(q) state with every
                earlier state in Sat(p), then continue until the run is
                absorbed (reaches a closed strongly connected component:
                a termination loop or an inescapable pump cycle).
* ``p R q``   — words of walks that stay inside Sat(q) and end either at a
                Sat(p)∧Sat(q) state (release) or on a cycle of a closed
                subset of Sat(q): the run has arrived where it can stay
                forever with probability 1.

Staying forever inside a region that has an exit has probability zero and is
excluded; this is what makes branch-to-termination examples come out right.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import automata as au
from .automata import LassoExpr, Nfa, PLasso
from .errors import ResourceLimit, SingularSystem, UnknownAtom, UnsupportedPathForm
from .formulas import (And, Atom, Bot, FalseF, Next, Not, Opacity, Or,
                       PathFormula, PathNot, ProbQuery, Release, StateFormula,
                       TrueF, Until, desugar, negate_path, to_pnf)
from .model import Model, absorbed_states, recurrent_states_within


@dataclass(frozen=True)
class CheckSettings:
    mode: str = "semantic"  # or "per-expression"
    dfa_cap: int = au.DEFAULT_DFA_CAP
    product_cap: int = 10 ** 5


@dataclass(frozen=True)
class SatResult:
    formula: StateFormula
    states: frozenset


@dataclass
class TraceSetPair:
    """Trace sets for a path formula and its negation.

    Each side carries the exact automaton plus the enumerated lasso
    expressions and a flag telling whether their union equals the automaton's
    language.
    """

    sat_nfa: Nfa
    unsat_nfa: Nfa
    sat_exprs: tuple = ()
    unsat_exprs: tuple = ()
    sat_exact: bool = True
    unsat_exact: bool = True


@dataclass
class OpacityReport:
    verdict: Optional[bool] = None
    degree: Optional[Fraction] = None
    witnesses: tuple = ()  # PLasso, sorted by rendering
    witness_obs: tuple = ()  # rendered observation per witness
    mode: str = "semantic"
    counterexample: Optional[tuple] = None  # uncovered observation word
    first_uncovered: Optional[LassoExpr] = None
    degree_by_sum: Optional[Fraction] = None
    witnesses_exact: bool = True
    pair: Optional[TraceSetPair] = None


_CMP_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(<=|>=|!=|=|<|>)(-?[A-Za-z0-9_]+)$")

_CMP_FUN = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def atom_sat(m: Model, atom: Atom) -> frozenset:
    """States satisfying an atom; comparisons read the state valuations."""
    match = _CMP_RE.match(atom.text)
    if match:
        var, op, rhs_text = match.groups()
        if re.fullmatch(r"-?\d+", rhs_text):
            rhs = int(rhs_text)
        elif rhs_text in m.constants:
            rhs = m.constants[rhs_text]
        else:
            raise UnknownAtom(
                f"atom '{atom.text}': right-hand side '{rhs_text}' is neither an "
                f"integer nor a declared constant")
        states = set()
        var_known = False
        for s in m.states:
            val = m.valuation(s)
            if var in val:
                var_known = True
                if _CMP_FUN[op](val[var], rhs):
                    states.add(s)
        if not var_known:
            raise UnknownAtom(f"atom '{atom.text}': no state carries variable '{var}'")
        return frozenset(states)
    name = atom.text
    if name in m.propositions or any(name in m.props_of(s) for s in m.states):
        return frozenset(s for s in m.states if name in m.props_of(s))
    raise UnknownAtom(f"unknown atomic proposition '{name}'")


def sat_state(m: Model, f: StateFormula, settings: CheckSettings = CheckSettings(),
              _cache: Optional[dict] = None) -> SatResult:
    """Bottom-up satisfaction sets for a state formula."""
    cache = _cache if _cache is not None else {}

    def go(g: StateFormula) -> frozenset:
        if g in cache:
            return cache[g]
        if isinstance(g, TrueF):
            out = frozenset(m.states)
        elif isinstance(g, FalseF):
            out = frozenset()
        elif isinstance(g, Atom):
            out = atom_sat(m, g)
        elif isinstance(g, Not):
            out = frozenset(m.states) - go(g.sub)
        elif isinstance(g, And):
            out = go(g.left) & go(g.right)
        elif isinstance(g, Or):
            out = go(g.left) | go(g.right)
        elif isinstance(g, Opacity):
            out = frozenset(
                s for s in m.states
                if check_opacity(m, s, g.path, settings, _cache=cache).verdict)
        elif isinstance(g, ProbQuery):
            if g.comparator == "=?":
                raise UnknownAtom("P=? queries have no truth value at a state")
            out = frozenset(
                s for s in m.states
                if _compare(eval_prob_value(m, s, g, settings, _cache=cache),
                            g.comparator, g.threshold))
        else:
            raise TypeError(f"not a state formula: {g!r}")
        cache[g] = out
        return out

    return SatResult(f, go(f))


def _compare(value: Fraction, comparator: str, threshold: Fraction) -> bool:
    return {
        "<=": value <= threshold,
        "<": value < threshold,
        ">=": value >= threshold,
        ">": value > threshold,
    }[comparator]


# -- trace languages ----------------------------------------------------------

def trace_language(m: Model, s: int, psi: PathFormula,
                   settings: CheckSettings = CheckSettings(),
                   _cache: Optional[dict] = None) -> Nfa:
    """Automaton of the finite-word trace set of psi from s (see module doc)."""
    psi = desugar(psi)
    if isinstance(psi, (Bot, PathNot)):
        raise UnsupportedPathForm(
            f"path formula '{psi}' is not supported by the checker; "
            f"rewrite it in terms of X, U or R")
    cache = _cache if _cache is not None else {}
    alphabet = m.alphabet
    if isinstance(psi, Next):
        sat_p = sat_state(m, psi.sub, settings, _cache=cache).states
        trans = frozenset((0, t.label, 1) for t in m.out(s) if t.target in sat_p)
        return Nfa(2, alphabet, trans, frozenset({0}), frozenset({1}))
    if isinstance(psi, Until):
        sat_p = sat_state(m, psi.left, settings, _cache=cache).states
        sat_q = sat_state(m, psi.right, settings, _cache=cache).states
        # Two phases: waiting (all states so far satisfy the left operand)
        # and witnessed (the right operand held at some position); the word
        # ends once the run is absorbed.  q -> waiting copy, n+q -> witnessed.
        n = m.n_states
        trans = set()
        for t in m.transitions:
            if t.source in sat_p:
                trans.add((t.source, t.label, t.target))
            trans.add((n + t.source, t.label, n + t.target))
        for q in sat_q:
            trans.add((q, None, n + q))
        accepting = frozenset(n + q for q in absorbed_states(m))
        return au.trim(Nfa(2 * n, alphabet, frozenset(trans),
                           frozenset({s}), accepting))
    if isinstance(psi, Release):
        sat_p = sat_state(m, psi.left, settings, _cache=cache).states
        sat_q = sat_state(m, psi.right, settings, _cache=cache).states
        # A release-word either certifies the release point or has arrived at
        # the absorbing structure of a region the run can never leave.
        forever = recurrent_states_within(m, sat_q)
        trans = frozenset((t.source, t.label, t.target) for t in m.transitions
                          if t.source in sat_q and t.target in sat_q)
        accepting = frozenset((sat_p & sat_q) | forever)
        initials = frozenset({s}) if s in sat_q else frozenset()
        return au.trim(Nfa(m.n_states, alphabet, trans, initials, accepting))
    raise UnsupportedPathForm(f"unsupported path formula: {psi!r}")


def comp_u(m: Model, s: int, phi: StateFormula, phi2: StateFormula,
           settings: CheckSettings = CheckSettings()):
    """Lasso expressions for the until trace set; returns (exprs, exact)."""
    nfa = trace_language(m, s, Until(phi, phi2), settings)
    return au.extract_lassos(nfa, m.bot_label())


def comp_r(m: Model, s: int, phi: StateFormula, phi2: StateFormula,
           settings: CheckSettings = CheckSettings()):
    """Lasso expressions for the release trace set; returns (exprs, exact)."""
    nfa = trace_language(m, s, Release(phi, phi2), settings)
    return au.extract_lassos(nfa, m.bot_label())


def trace_pair(m: Model, s: int, psi: PathFormula,
               settings: CheckSettings = CheckSettings(),
               with_expressions: bool = True,
               _cache: Optional[dict] = None) -> TraceSetPair:
    """Trace sets of psi and of its negation from s."""
    psi = desugar(psi)
    sat_nfa = trace_language(m, s, psi, settings, _cache=_cache)
    unsat_nfa = trace_language(m, s, negate_path(psi), settings, _cache=_cache)
    pair = TraceSetPair(sat_nfa=sat_nfa, unsat_nfa=unsat_nfa)
    if with_expressions:
        bot = m.bot_label()
        pair.sat_exprs, pair.sat_exact = au.extract_lassos(sat_nfa, bot)
        pair.unsat_exprs, pair.unsat_exact = au.extract_lassos(unsat_nfa, bot)
    return pair


# -- opacity ------------------------------------------------------------------

def check_opacity(m: Model, s: int, psi: PathFormula,
                  settings: CheckSettings = CheckSettings(),
                  _cache: Optional[dict] = None) -> OpacityReport:
    """Decide whether every psi-trace from s is observation-covered.

    Semantic mode: inclusion of whole observation images (the sound check).
    Per-expression mode: the literal coverage loop, each expression of the
    satisfying side must be covered by a single expression of the violating
    side; sufficient but not necessary for semantic opacity.
    """
    per_expr = settings.mode == "per-expression"
    pair = trace_pair(m, s, psi, settings, with_expressions=per_expr, _cache=_cache)
    report = OpacityReport(mode=settings.mode, pair=pair)
    if per_expr:
        bot = m.bot_label()
        unsat_imgs = [au.homomorphic_image(au.expr_to_nfa(e, m.alphabet, bot), m.obs)
                      for e in pair.unsat_exprs]
        for expr in pair.sat_exprs:
            img = au.homomorphic_image(au.expr_to_nfa(expr, m.alphabet, bot), m.obs)
            covered = any(au.language_inclusion(img, other, settings.dfa_cap)[0]
                          for other in unsat_imgs)
            if not covered:
                report.verdict = False
                report.first_uncovered = expr
                return report
        report.verdict = True
        return report
    sat_img = au.homomorphic_image(pair.sat_nfa, m.obs)
    unsat_img = au.homomorphic_image(pair.unsat_nfa, m.obs)
    ok, witness = au.language_inclusion(sat_img, unsat_img, settings.dfa_cap)
    report.verdict = ok
    report.counterexample = witness
    if not ok:
        exprs, _ = au.extract_lassos(
            non_opaque_language(m, s, psi, settings, _cache=_cache), m.bot_label())
        if exprs:
            report.first_uncovered = exprs[0]
    return report


def non_opaque_language(m: Model, s: int, psi: PathFormula,
                        settings: CheckSettings = CheckSettings(),
                        _cache: Optional[dict] = None) -> Nfa:
    """The language of psi-traces not covered by any violating trace."""
    pair = trace_pair(m, s, psi, settings, with_expressions=False, _cache=_cache)
    unsat_img = au.homomorphic_image(pair.unsat_nfa, m.obs)
    covered = au.inverse_image(unsat_img, m.obs, m.alphabet, settings.dfa_cap)
    return au.difference(pair.sat_nfa, covered, settings.dfa_cap)


def non_opaque_traces(m: Model, s: int, psi: PathFormula,
                      settings: CheckSettings = CheckSettings()) -> list:
    """Non-opaque trace expressions with exact probabilities, sorted by rendering."""
    lang = non_opaque_language(m, s, psi, settings)
    exprs, exact = au.extract_lassos(lang, m.bot_label())
    out = [PLasso(e, au.expr_probability(e, m, s)) for e in exprs]
    out.sort(key=lambda pl: pl.tr.render())
    return out


def degree_of_opacity(m: Model, s: int, psi: PathFormula,
                      settings: CheckSettings = CheckSettings()) -> OpacityReport:
    """Exact probability mass of the non-opaque language, with witness list.

    The authoritative value is the reachability probability of acceptance in
    the product of the chain with the language's automaton; the witness
    expressions' probability sum is carried alongside as a cross-check
    (exact whenever expression extraction is exact).
    """
    cache = {}
    lang = non_opaque_language(m, s, psi, settings, _cache=cache)
    degree = language_mass(m, s, lang, settings)
    exprs, exact = au.extract_lassos(lang, m.bot_label())
    witnesses = tuple(sorted(
        (PLasso(e, _witness_probability(e, m, s, settings)) for e in exprs),
        key=lambda pl: pl.tr.render()))
    # The probability sum is a valid cross-check of the reachability value
    # only when the expressions cover the language and denote prefix-
    # incomparable trace families: prefix-incomparable words of a
    # deterministic chain span disjoint cylinder events.
    by_sum = None
    if exact and _prefix_incomparable(exprs, m):
        by_sum = sum((w.pr for w in witnesses), Fraction(0))
    verdict = degree == 0
    return OpacityReport(
        verdict=verdict,
        degree=degree,
        witnesses=witnesses,
        witness_obs=tuple(w.tr.render_observation(m.obs) for w in witnesses),
        mode=settings.mode,
        degree_by_sum=by_sum,
        witnesses_exact=exact,
        first_uncovered=witnesses[0].tr if witnesses else None,
    )


def _witness_probability(e: LassoExpr, m: Model, s: int,
                         settings: CheckSettings) -> Fraction:
    """Event mass of one witness family.

    The closed-form product diverges on a forced (probability-1) cycle; the
    family's event mass is still well defined and comes from the chain
    reachability computation instead.
    """
    try:
        return au.expr_probability(e, m, s)
    except au.DivergentCycle:
        return language_mass(m, s, au.expr_to_nfa(e, m.alphabet, m.bot_label()),
                             settings)


def _prefix_incomparable(exprs, m: Model) -> bool:
    """Do the expressions denote pairwise (and internally) disjoint events?

    Prefix-incomparable words of a deterministic chain span disjoint
    cylinders.  Within one family only forced termination padding may extend
    a word (it does not change the event); across families no word may
    extend another at all.
    """
    bot = m.bot_label()
    nfas = [au.expr_to_nfa(e, m.alphabet, bot) for e in exprs]
    exts = [au.strict_extensions(n) for n in nfas]
    for i, nfa in enumerate(nfas):
        inner = au.strict_extensions(nfa)
        # Drop extensions whose first extra step is the termination label.
        nonbot = au.Nfa(
            inner.n_states, inner.alphabet,
            frozenset((p, sym, q) for (p, sym, q) in inner.transitions
                      if not (p in nfa.accepting and q == nfa.n_states and sym.is_bot)),
            inner.initials, inner.accepting)
        if not au.is_empty(au.intersect(nonbot, nfa)):
            return False
    for i in range(len(nfas)):
        for j in range(i + 1, len(nfas)):
            if not au.is_empty(au.intersect(nfas[i], nfas[j])):
                return False
            if not au.is_empty(au.intersect(exts[i], nfas[j])):
                return False
            if not au.is_empty(au.intersect(exts[j], nfas[i])):
                return False
    return True


def language_mass(m: Model, s: int, lang: Nfa,
                  settings: CheckSettings = CheckSettings()) -> Fraction:
    """Probability that a run from s has some finite prefix in the language.

    Product of the chain with the language DFA, absorbing at acceptance;
    exact rational reachability via Gaussian elimination.
    """
    lang = au.trim(lang)
    if not lang.accepting:
        return Fraction(0)
    dfa = au.determinize(lang, settings.dfa_cap)

    # Breadth-first product construction, absorbing at accepting pairs.
    index = {}
    order = []

    def key(ms, qs):
        return (ms, qs)

    start = key(s, dfa.initial)
    index[start] = 0
    order.append(start)
    todo = [start]
    edges = {}  # product index -> list of (prob, product index) or "accept"
    accepting = set()
    while todo:
        cur = todo.pop()
        i = index[cur]
        ms, qs = cur
        if qs in dfa.accepting:
            accepting.add(i)
            continue
        outs = []
        for t in m.out(ms):
            nxt = key(t.target, dfa.delta[(qs, t.label)])
            if nxt not in index:
                if len(index) >= settings.product_cap:
                    raise ResourceLimit(
                        f"product construction exceeded {settings.product_cap} states")
                index[nxt] = len(index)
                order.append(nxt)
                todo.append(nxt)
            outs.append((t.prob, index[nxt]))
        edges[i] = outs

    # States that can reach acceptance; all others have probability 0.
    n = len(order)
    preds = {i: set() for i in range(n)}
    for i, outs in edges.items():
        for _, j in outs:
            preds[j].add(i)
    can = set(accepting)
    todo = list(accepting)
    while todo:
        j = todo.pop()
        for i in preds[j]:
            if i not in can:
                can.add(i)
                todo.append(i)

    start_i = index[start]
    if start_i in accepting:
        return Fraction(1)
    if start_i not in can:
        return Fraction(0)

    unknowns = sorted(can - accepting)
    pos = {i: k for k, i in enumerate(unknowns)}
    nn = len(unknowns)
    matrix = [[Fraction(0)] * nn for _ in range(nn)]
    rhs = [Fraction(0)] * nn
    for i in unknowns:
        k = pos[i]
        matrix[k][k] = Fraction(1)
        for p, j in edges[i]:
            if j in accepting:
                rhs[k] += p
            elif j in pos:
                matrix[k][pos[j]] -= p
            # j outside `can`: contributes 0
    solution = solve_linear(matrix, rhs)
    return solution[pos[start_i]]


def solve_linear(matrix: list, rhs: list) -> list:
    """Exact Gaussian elimination with partial pivoting on entry size."""
    n = len(matrix)
    a = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = None
        best = None
        for row in range(col, n):
            v = a[row][col]
            if v != 0:
                size = abs(v.numerator).bit_length() + v.denominator.bit_length()
                if best is None or size < best:
                    best = size
                    pivot = row
        if pivot is None:
            raise SingularSystem("reachability system is singular")
        a[col], a[pivot] = a[pivot], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for row in range(n):
            if row != col and a[row][col] != 0:
                factor = a[row][col]
                a[row] = [x - factor * y for x, y in zip(a[row], a[col])]
    return [a[i][n] for i in range(n)]


# -- probability queries ------------------------------------------------------

def prob_path_formula(m: Model, s: int, psi: PathFormula,
                      settings: CheckSettings = CheckSettings(),
                      _cache: Optional[dict] = None) -> Fraction:
    """Probability that a run from s satisfies the path formula."""
    psi = desugar(psi)
    cache = _cache if _cache is not None else {}
    if isinstance(psi, (Bot, PathNot)):
        raise UnsupportedPathForm(f"path formula '{psi}' is not supported")
    if isinstance(psi, Next):
        sat_p = sat_state(m, psi.sub, settings, _cache=cache).states
        return sum((t.prob for t in m.out(s) if t.target in sat_p), Fraction(0))
    if isinstance(psi, Until):
        sat_p = sat_state(m, psi.left, settings, _cache=cache).states
        sat_q = sat_state(m, psi.right, settings, _cache=cache).states
        return _until_probability(m, sat_p, sat_q)[s]
    if isinstance(psi, Release):
        dual = Until(to_pnf(Not(psi.left)), to_pnf(Not(psi.right)))
        return 1 - prob_path_formula(m, s, dual, settings, _cache=cache)
    raise UnsupportedPathForm(f"unsupported path formula: {psi!r}")


def _until_probability(m: Model, sat_p: frozenset, sat_q: frozenset) -> dict:
    """Least solution of the until linear system, for every state."""
    # Backward closure: states that can reach sat_q through sat_p states.
    can = set(sat_q)
    changed = True
    while changed:
        changed = False
        for t in m.transitions:
            if t.source in sat_p and t.source not in can and t.target in can:
                can.add(t.source)
                changed = True
    values = {s: Fraction(0) for s in m.states}
    for s in sat_q:
        values[s] = Fraction(1)
    unknowns = sorted(can - sat_q)
    if unknowns:
        pos = {s: k for k, s in enumerate(unknowns)}
        n = len(unknowns)
        matrix = [[Fraction(0)] * n for _ in range(n)]
        rhs = [Fraction(0)] * n
        for s in unknowns:
            k = pos[s]
            matrix[k][k] = Fraction(1)
            for t in m.out(s):
                if t.target in sat_q:
                    rhs[k] += t.prob
                elif t.target in pos:
                    matrix[k][pos[t.target]] -= t.prob
        solution = solve_linear(matrix, rhs)
        for s in unknowns:
            values[s] = solution[pos[s]]
    return values


def eval_prob_value(m: Model, s: int, q: ProbQuery,
                    settings: CheckSettings = CheckSettings(),
                    _cache: Optional[dict] = None) -> Fraction:
    if isinstance(q.body, Opacity):
        return degree_of_opacity(m, s, q.body.path, settings).degree
    return prob_path_formula(m, s, q.body, settings, _cache=_cache)


def eval_prob_query(m: Model, s: int, q: ProbQuery,
                    settings: CheckSettings = CheckSettings()):
    """Evaluate a probability query at a state: a rational for =?, else a bool."""
    value = eval_prob_value(m, s, q, settings)
    if q.comparator == "=?":
        return value
    return _compare(value, q.comparator, q.threshold)


# -- non-interference ---------------------------------------------------------

def check_noninterference(m: Model, high: frozenset, low: frozenset, depth: int):
    """Bounded non-interference check over label-name partition (high, low).

    Enumerates completed traces of length <= depth (runs that have reached
    termination, plus the depth-bound frontier of non-terminating runs);
    every low projection must be consistent (co-occur in some trace) with
    every high projection.  Returns (True, None) or
    (False, (low_projection, high_projection)) for the first inconsistent
    pair in sorted order.
    """
    non_bot = {lab.name for lab in m.alphabet if not lab.is_bot}
    if (set(high) | set(low)) != non_bot or set(high) & set(low):
        raise ValueError(
            f"high/low must partition the non-termination alphabet {sorted(non_bot)}")

    pairs = set()
    lows = set()
    highs = set()

    def record(word):
        lo = tuple(n for n in word if n in low)
        hi = tuple(n for n in word if n in high)
        lows.add(lo)
        highs.add(hi)
        pairs.add((lo, hi))

    def walk(state, word, remaining):
        if m.is_bot_committed(state) or remaining == 0:
            record(word)
            return
        for t in m.out(state):
            if t.label.is_bot:
                walk(t.target, word, remaining - 1)
            else:
                walk(t.target, word + (t.label.name,), remaining - 1)

    walk(m.initial, (), depth)
    for lo in sorted(lows):
        for hi in sorted(highs):
            if (lo, hi) not in pairs:
                return False, (lo, hi)
    return True, None
