"""Parser and state-space expansion for the `ldtmc` modelling language.

Guarded-command chains with labelled probabilistic updates and an
observation block::

    ldtmc
    observations
      a->a, b->null, c->c
    endobservations
    const int k = 3;
    module name
      x : [0..5] init 0;
      [] (x=0) -> 1/2:a:(x'=1) + 1/2:b:(x'=4);
    endmodule
    label "done" = x=5;

`null` marks a hidden label.  States where no command is enabled take the
implicit termination self-loop.  Single module, empty action slots only.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import (DuplicateDeclaration, ExpansionError, LabelDeterminismViolation,
                     LdtmcSyntaxError, OverlappingGuards, StateCapExceeded,
                     UndeclaredIdentifier)
from .model import BOT, Label, Model, ObservationMap, StateMeta, Transition

DEFAULT_STATE_CAP = 10 ** 6


# -- source AST ---------------------------------------------------------------

@dataclass(frozen=True)
class VarDecl:
    name: str
    lower: int
    upper: int
    init: int


@dataclass(frozen=True)
class Update:
    prob: Fraction
    label: str
    assignments: tuple  # (var, expression AST) pairs


@dataclass(frozen=True)
class GuardedCommand:
    guard: object  # boolean expression AST
    updates: tuple
    line: int


@dataclass
class ModelSource:
    constants: dict = field(default_factory=dict)
    observations: list = field(default_factory=list)  # (label, observable or None)
    module_name: str = ""
    variables: list = field(default_factory=list)
    commands: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)  # name -> boolean expression AST


# expression ASTs are tuples:
#   ("int", value) | ("var", name) | ("bool", value)
#   ("arith", op, left, right) | ("neg", sub)
#   ("cmp", op, left, right) | ("and", l, r) | ("or", l, r) | ("not", sub)

def eval_int(expr, env: dict) -> int:
    kind = expr[0]
    if kind == "int":
        return expr[1]
    if kind == "var":
        name = expr[1]
        if name not in env:
            raise UndeclaredIdentifier(f"undeclared identifier '{name}'")
        return env[name]
    if kind == "neg":
        return -eval_int(expr[1], env)
    if kind == "arith":
        _, op, left, right = expr
        a, b = eval_int(left, env), eval_int(right, env)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        return a * b
    raise ExpansionError(f"expected an arithmetic expression, found {kind}")


_CMPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_bool(expr, env: dict) -> bool:
    kind = expr[0]
    if kind == "bool":
        return expr[1]
    if kind == "cmp":
        _, op, left, right = expr
        return _CMPS[op](eval_int(left, env), eval_int(right, env))
    if kind == "and":
        return eval_bool(expr[1], env) and eval_bool(expr[2], env)
    if kind == "or":
        return eval_bool(expr[1], env) or eval_bool(expr[2], env)
    if kind == "not":
        return not eval_bool(expr[1], env)
    raise ExpansionError(f"expected a boolean expression, found {kind}")


def expr_names(expr) -> set:
    kind = expr[0]
    if kind == "var":
        return {expr[1]}
    if kind in ("int", "bool"):
        return set()
    if kind in ("neg", "not"):
        return expr_names(expr[1])
    return expr_names(expr[2]) | expr_names(expr[3]) if kind in ("arith", "cmp") \
        else expr_names(expr[1]) | expr_names(expr[2])


# -- tokenizer ----------------------------------------------------------------

_TOK_RE = re.compile(r"""
    (?P<comment>//[^\n]*)
  | (?P<ws>\s+)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<quoted>"[A-Za-z_][A-Za-z0-9_]*")
  | (?P<op><=|>=|!=|->|\.\.|'|[-+*/:;,=<>!&|()\[\]])
""", re.VERBOSE)


@dataclass
class _Tok:
    text: str
    kind: str
    line: int
    column: int


def _tokenize(text: str):
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        m = _TOK_RE.match(text, i)
        if not m:
            raise LdtmcSyntaxError(f"unexpected character {text[i]!r}", line, col)
        tok = m.group()
        if m.lastgroup not in ("ws", "comment"):
            toks.append(_Tok(tok, m.lastgroup, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        i = m.end()
    toks.append(_Tok("", "eof", line, col))
    return toks


class _P:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at(self, text):
        return self.peek().text == text

    def accept(self, text):
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text):
        t = self.peek()
        if t.text != text:
            want = "end of input" if text == "" else f"'{text}'"
            raise LdtmcSyntaxError(
                f"expected {want}, found '{t.text or 'end of input'}'", t.line, t.column)
        return self.next()

    def ident(self, what="identifier"):
        t = self.peek()
        if t.kind != "ident":
            raise LdtmcSyntaxError(f"expected {what}, found '{t.text}'", t.line, t.column)
        return self.next().text

    def integer(self):
        neg = self.accept("-")
        t = self.peek()
        if t.kind != "num":
            raise LdtmcSyntaxError(f"expected an integer, found '{t.text}'", t.line, t.column)
        self.next()
        return -int(t.text) if neg else int(t.text)

    # expressions -------------------------------------------------------------

    def parse_or(self):
        e = self.parse_and()
        while self.accept("|"):
            e = ("or", e, self.parse_and())
        return e

    def parse_and(self):
        e = self.parse_not()
        while self.accept("&"):
            e = ("and", e, self.parse_not())
        return e

    def parse_not(self):
        if self.accept("!"):
            return ("not", self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self):
        left = self.parse_arith()
        t = self.peek()
        if t.text in ("=", "!=", "<", "<=", ">", ">="):
            self.next()
            right = self.parse_arith()
            return ("cmp", t.text, left, right)
        return left

    def parse_arith(self):
        e = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            e = ("arith", op, e, self.parse_term())
        return e

    def parse_term(self):
        e = self.parse_factor()
        while self.at("*"):
            self.next()
            e = ("arith", "*", e, self.parse_factor())
        return e

    def parse_factor(self):
        t = self.peek()
        if t.text == "(":
            self.next()
            e = self.parse_or()
            self.expect(")")
            return e
        if t.text == "-":
            self.next()
            return ("neg", self.parse_factor())
        if t.kind == "num":
            self.next()
            return ("int", int(t.text))
        if t.text == "true":
            self.next()
            return ("bool", True)
        if t.text == "false":
            self.next()
            return ("bool", False)
        if t.kind == "ident":
            self.next()
            return ("var", t.text)
        raise LdtmcSyntaxError(f"unexpected token '{t.text}' in expression", t.line, t.column)

    def parse_fraction(self):
        """Probability: integer or integer/integer, evaluated exactly."""
        t = self.peek()
        num = self.parse_arith()
        if self.accept("/"):
            den = self.parse_arith()
            return ("frac", num, den, t.line)
        return ("frac", num, ("int", 1), t.line)


def parse_model(text: str) -> ModelSource:
    """Parse ldtmc source into a model description."""
    p = _P(text)
    p.expect("ldtmc")
    src = ModelSource()

    p.expect("observations")
    seen = set()
    while not p.at("endobservations"):
        lab = p.ident("a label name")
        p.expect("->")
        if p.accept("null"):
            obs = None
        else:
            obs = p.ident("an observable name")
        if lab in seen:
            raise DuplicateDeclaration(f"label '{lab}' observed twice")
        seen.add(lab)
        src.observations.append((lab, obs))
        if not (p.accept(",") or p.accept(";")):
            break
    p.expect("endobservations")

    while True:
        if p.accept("const"):
            p.expect("int")
            name = p.ident("a constant name")
            if name in src.constants:
                raise DuplicateDeclaration(f"constant '{name}' declared twice")
            p.expect("=")
            src.constants[name] = p.integer()
            p.expect(";")
        elif p.accept("label"):
            t = p.peek()
            if t.kind != "quoted":
                raise LdtmcSyntaxError("expected a quoted label name", t.line, t.column)
            p.next()
            name = t.text[1:-1]
            if name in src.labels:
                raise DuplicateDeclaration(f"label definition '{name}' declared twice")
            p.expect("=")
            src.labels[name] = p.parse_or()
            p.expect(";")
        elif p.accept("module"):
            if src.module_name:
                raise LdtmcSyntaxError("only a single module is supported",
                                       p.peek().line, p.peek().column)
            src.module_name = p.ident("a module name")
            _parse_module_body(p, src)
        elif p.at(""):
            break
        else:
            t = p.peek()
            raise LdtmcSyntaxError(
                f"expected 'const', 'label' or 'module', found '{t.text}'",
                t.line, t.column)
    _check_source(src)
    return src


def _parse_module_body(p: _P, src: ModelSource):
    while not p.accept("endmodule"):
        t = p.peek()
        if t.text == "[":
            p.next()
            if not p.at("]"):
                bad = p.peek()
                raise LdtmcSyntaxError(
                    f"action labels ('[{bad.text}]') are not supported: command "
                    f"synchronization is out of scope, leave the slot empty", bad.line, bad.column)
            p.expect("]")
            guard = p.parse_or()
            p.expect("->")
            updates = [_parse_update(p)]
            while p.accept("+"):
                updates.append(_parse_update(p))
            p.expect(";")
            src.commands.append(GuardedCommand(guard, tuple(updates), t.line))
        elif t.kind == "ident":
            name = p.ident()
            if any(v.name == name for v in src.variables):
                raise DuplicateDeclaration(f"variable '{name}' declared twice")
            p.expect(":")
            p.expect("[")
            lower = p.integer()
            p.expect("..")
            upper = p.integer()
            p.expect("]")
            init = lower
            if p.accept("init"):
                init = p.integer()
            p.expect(";")
            if not lower <= init <= upper:
                raise LdtmcSyntaxError(
                    f"init {init} outside [{lower}..{upper}] for '{name}'", t.line, t.column)
            src.variables.append(VarDecl(name, lower, upper, init))
        else:
            raise LdtmcSyntaxError(
                f"expected a variable declaration or command, found '{t.text}'",
                t.line, t.column)


def _parse_update(p: _P):
    frac = p.parse_fraction()
    p.expect(":")
    label = p.ident("a transition label")
    p.expect(":")
    assignments = [_parse_assignment(p)]
    while p.accept("&"):
        assignments.append(_parse_assignment(p))
    return (frac, label, tuple(assignments))


def _parse_assignment(p: _P):
    p.expect("(")
    var = p.ident("a variable name")
    p.expect("'")
    p.expect("=")
    expr = p.parse_arith()
    p.expect(")")
    return (var, expr)


def _check_source(src: ModelSource):
    declared = {v.name for v in src.variables} | set(src.constants)
    var_names = {v.name for v in src.variables}
    for name in set(src.constants) & var_names:
        raise DuplicateDeclaration(f"'{name}' is both a constant and a variable")
    obs_labels = {lab for lab, _ in src.observations}
    for cmd in src.commands:
        for name in expr_names(cmd.guard):
            if name not in declared:
                raise UndeclaredIdentifier(
                    f"guard at line {cmd.line} references undeclared '{name}'")
        for frac, label, assignments in cmd.updates:
            if label not in obs_labels:
                raise UndeclaredIdentifier(
                    f"transition label '{label}' (line {cmd.line}) has no observation entry")
            for var, expr in assignments:
                if var not in var_names:
                    raise UndeclaredIdentifier(
                        f"assignment to undeclared variable '{var}' at line {cmd.line}")
                for name in expr_names(expr):
                    if name not in declared:
                        raise UndeclaredIdentifier(
                            f"update at line {cmd.line} references undeclared '{name}'")
            for name in expr_names(frac[1]) | expr_names(frac[2]):
                if name not in set(src.constants):
                    raise UndeclaredIdentifier(
                        f"probability at line {cmd.line} must be a closed rational "
                        f"expression; '{name}' is not a constant")
    for name, expr in src.labels.items():
        for ident in expr_names(expr):
            if ident not in declared:
                raise UndeclaredIdentifier(
                    f"label \"{name}\" references undeclared '{ident}'")


# -- expansion ----------------------------------------------------------------

def _update_prob(frac, constants) -> Fraction:
    _, num, den, line = frac
    n = eval_int(num, constants)
    d = eval_int(den, constants)
    if d == 0:
        raise ExpansionError(f"zero denominator in probability at line {line}")
    return Fraction(n, d)


def expand_state_space(src: ModelSource, state_cap: int = DEFAULT_STATE_CAP) -> Model:
    """Reachable-valuation expansion of a parsed source into an explicit model.

    States with no enabled command take the implicit termination self-loop.
    Two enabled commands in one state, or one label leading to two targets,
    are rejected rather than treated as nondeterminism.
    """
    consts = dict(src.constants)
    bounds = {v.name: (v.lower, v.upper) for v in src.variables}
    init = tuple(sorted((v.name, v.init) for v in src.variables))

    # Per-command exact probability check before walking anything.
    for cmd in src.commands:
        total = sum((_update_prob(u[0], consts) for u in cmd.updates), Fraction(0))
        if total != 1:
            raise ExpansionError(
                f"update probabilities of command at line {cmd.line} sum to {total}")
        for u in cmd.updates:
            if not 0 < _update_prob(u[0], consts) <= 1:
                raise ExpansionError(
                    f"probability {_update_prob(u[0], consts)} at line {cmd.line} "
                    f"outside (0,1]")

    label_objs = {lab: Label(lab) for lab, _ in src.observations}

    index = {init: 0}
    order = [init]
    parents = {0: None}
    transitions = []
    todo = deque([0])
    while todo:
        sid = todo.popleft()
        valuation = dict(order[sid])
        env = {**consts, **valuation}
        enabled = [cmd for cmd in src.commands if eval_bool(cmd.guard, env)]
        if len(enabled) > 1:
            lines = ", ".join(str(c.line) for c in enabled)
            raise OverlappingGuards(
                f"commands at lines {lines} are all enabled in state "
                f"{_valuation_name(valuation)}; overlapping guards are not allowed")
        if not enabled:
            transitions.append(Transition(sid, BOT, sid, Fraction(1)))
            continue
        cmd = enabled[0]
        merged = {}
        for frac, label, assignments in cmd.updates:
            prob = _update_prob(frac, consts)
            nxt = dict(valuation)
            for var, expr in assignments:
                value = eval_int(expr, env)
                lo, hi = bounds[var]
                if not lo <= value <= hi:
                    raise ExpansionError(
                        f"assignment {var}'={value} outside [{lo}..{hi}] "
                        f"(command at line {cmd.line}, state {_valuation_name(valuation)})")
                nxt[var] = value
            key = tuple(sorted(nxt.items()))
            if key not in index:
                if len(index) >= state_cap:
                    raise StateCapExceeded(f"state space exceeded cap of {state_cap}")
                index[key] = len(index)
                order.append(key)
                parents[index[key]] = (sid, label)
                todo.append(index[key])
            target = index[key]
            if label in merged and merged[label][0] != target:
                raise LabelDeterminismViolation(
                    f"label '{label}' leads from state {_valuation_name(valuation)} "
                    f"to two different targets (command at line {cmd.line})")
            if label in merged:
                merged[label] = (target, merged[label][1] + prob)
            else:
                merged[label] = (target, prob)
        for label, (target, prob) in sorted(merged.items()):
            transitions.append(Transition(sid, label_objs[label], target, prob))

    n = len(order)
    obs_map = ObservationMap({lab: obs for lab, obs in src.observations})
    alphabet = frozenset(label_objs.values()) | {BOT}

    eta = {}
    for sid in range(n):
        env = {**consts, **dict(order[sid])}
        props = frozenset(name for name, expr in src.labels.items()
                          if eval_bool(expr, env))
        eta[sid] = props

    meta = tuple(
        StateMeta(_valuation_name(dict(v)), valuation=v, parent=parents[i])
        for i, v in enumerate(order))

    outs = {sid: [] for sid in range(n)}
    for t in transitions:
        outs[t.source].append(t)
    bot_committed = frozenset(
        sid for sid in range(n)
        if outs[sid] and all(t.label.is_bot for t in outs[sid]))
    if "final" in src.labels:
        finals = frozenset(sid for sid in range(n) if "final" in eta[sid])
    else:
        finals = bot_committed

    return Model(
        n_states=n,
        alphabet=alphabet,
        transitions=tuple(transitions),
        initial=0,
        finals=finals,
        eta=eta,
        propositions=frozenset(src.labels),
        obs=obs_map,
        state_meta=meta,
        constants=consts,
    )


def _valuation_name(valuation: dict) -> str:
    if not valuation:
        return "()"
    return "(" + ",".join(f"{k}={v}" for k, v in sorted(valuation.items())) + ")"


def render_model(src: ModelSource) -> str:
    """Pretty-print a source back to ldtmc text (round-trip aid)."""
    lines = ["ldtmc", "", "observations"]
    pairs = ", ".join(f"{lab}->{obs if obs is not None else 'null'}"
                      for lab, obs in src.observations)
    lines.append(f"  {pairs}")
    lines.append("endobservations")
    lines.append("")
    for name, value in src.constants.items():
        lines.append(f"const int {name} = {value};")
    lines.append(f"module {src.module_name or 'm'}")
    for v in src.variables:
        lines.append(f"  {v.name} : [{v.lower}..{v.upper}] init {v.init};")
    lines.append("")
    for cmd in src.commands:
        updates = " + ".join(
            f"{_render_frac(u[0])}:{u[1]}:" + "&".join(
                f"({var}'={render_expr(e)})" for var, e in u[2])
            for u in cmd.updates)
        lines.append(f"  [] {render_expr(cmd.guard)} -> {updates};")
    lines.append("endmodule")
    for name, expr in src.labels.items():
        lines.append(f'label "{name}" = {render_expr(expr)};')
    lines.append("")
    return "\n".join(lines)


def _render_frac(frac) -> str:
    _, num, den, _line = frac
    if den == ("int", 1):
        return render_expr(num)
    return f"{render_expr(num)}/{render_expr(den)}"


def render_expr(expr) -> str:
    kind = expr[0]
    if kind == "int":
        return str(expr[1])
    if kind == "bool":
        return "true" if expr[1] else "false"
    if kind == "var":
        return expr[1]
    if kind == "neg":
        return f"-{render_expr(expr[1])}"
    if kind == "not":
        return f"!({render_expr(expr[1])})"
    if kind == "arith":
        return f"({render_expr(expr[2])}{expr[1]}{render_expr(expr[3])})"
    if kind == "cmp":
        return f"({render_expr(expr[2])}{expr[1]}{render_expr(expr[3])})"
    if kind == "and":
        return f"({render_expr(expr[1])}&{render_expr(expr[2])})"
    if kind == "or":
        return f"({render_expr(expr[1])}|{render_expr(expr[2])})"
    raise ValueError(f"unknown expression node {kind}")


def load_model(path: str, state_cap: int = DEFAULT_STATE_CAP) -> Model:
    with open(path, "r", encoding="utf-8") as handle:
        return expand_state_space(parse_model(handle.read()), state_cap)
