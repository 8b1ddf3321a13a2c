"""Property language: state/path formula ASTs, parsing, and normal forms.

State formulas combine boolean structure with an opacity operator over path
formulas and probability queries.  Path formulas are next/until/release (with
eventually as sugar for ``true U .``).  ``to_pnf`` pushes negation down to
atoms using the until/release duality; ``negate_path`` is the dual the
checker uses to build the violating trace set.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .errors import PropertySyntaxError, UnsupportedPathForm


# -- state formulas ---------------------------------------------------------

class StateFormula:
    pass


class PathFormula:
    pass


@dataclass(frozen=True)
class TrueF(StateFormula):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FalseF(StateFormula):
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class Atom(StateFormula):
    """Atomic proposition.

    ``text`` is either a variable comparison in canonical form ("s=3",
    "loc!=2", "payer>=1", right-hand side an integer or a declared constant)
    or a bare name resolved against named label definitions / state
    propositions.
    """

    text: str

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class Not(StateFormula):
    sub: StateFormula

    def __str__(self):
        return f"!({self.sub})"


@dataclass(frozen=True)
class And(StateFormula):
    left: StateFormula
    right: StateFormula

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or(StateFormula):
    left: StateFormula
    right: StateFormula

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Opacity(StateFormula):
    path: PathFormula

    def __str__(self):
        return f"opacity [{self.path}]"


@dataclass(frozen=True)
class ProbQuery(StateFormula):
    """P comparator threshold [ body ]; threshold absent iff comparator is '=?'."""

    comparator: str  # one of <=, <, >=, >, =?
    threshold: Optional[Fraction]
    body: Union[PathFormula, Opacity]

    def __post_init__(self):
        if (self.threshold is None) != (self.comparator == "=?"):
            raise ValueError("threshold present iff comparator is not '=?'")

    def __str__(self):
        cmp = "=?" if self.comparator == "=?" else f"{self.comparator}{self.threshold}"
        return f"P{cmp} [ {self.body} ]"


# -- path formulas ----------------------------------------------------------

@dataclass(frozen=True)
class Next(PathFormula):
    sub: StateFormula

    def __str__(self):
        return f"X {self.sub}"


@dataclass(frozen=True)
class Until(PathFormula):
    left: StateFormula
    right: StateFormula

    def __str__(self):
        return f"{self.left} U {self.right}"


@dataclass(frozen=True)
class Release(PathFormula):
    left: StateFormula
    right: StateFormula

    def __str__(self):
        return f"{self.left} R {self.right}"


@dataclass(frozen=True)
class Eventually(PathFormula):
    """Sugar: Eventually(p) desugars to Until(true, p)."""

    sub: StateFormula

    def __str__(self):
        return f"F {self.sub}"


@dataclass(frozen=True)
class Bot(PathFormula):
    """Path formula 'the first label is the termination label'.

    Parsed for completeness; the checker rejects it (UnsupportedPathForm).
    """

    def __str__(self):
        return "bot"


@dataclass(frozen=True)
class PathNot(PathFormula):
    """Raw path negation; parsed but rejected by the checker."""

    sub: PathFormula

    def __str__(self):
        return f"!({self.sub})"


def desugar(psi: PathFormula) -> PathFormula:
    if isinstance(psi, Eventually):
        return Until(TrueF(), psi.sub)
    return psi


# -- positive normal form ---------------------------------------------------

def to_pnf(f: StateFormula) -> StateFormula:
    """Push negations inward until they sit directly above atoms.

    Rewrites: !true -> false, !false -> true, !!p -> p,
    !(p&q) -> !p|!q, !(p|q) -> !p&!q, !Xp -> X!p,
    !(p U q) -> !p R !q, !(p R q) -> !p U !q.
    Negation above Atom, Opacity and ProbQuery stays (no rewrite targets them).
    """
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, And):
        return And(to_pnf(f.left), to_pnf(f.right))
    if isinstance(f, Or):
        return Or(to_pnf(f.left), to_pnf(f.right))
    if isinstance(f, Opacity):
        return Opacity(_pnf_path(f.path))
    if isinstance(f, ProbQuery):
        body = f.body
        if isinstance(body, Opacity):
            body = Opacity(_pnf_path(body.path))
        else:
            body = _pnf_path(body)
        return ProbQuery(f.comparator, f.threshold, body)
    if isinstance(f, Not):
        g = f.sub
        if isinstance(g, TrueF):
            return FalseF()
        if isinstance(g, FalseF):
            return TrueF()
        if isinstance(g, Not):
            return to_pnf(g.sub)
        if isinstance(g, And):
            return Or(to_pnf(Not(g.left)), to_pnf(Not(g.right)))
        if isinstance(g, Or):
            return And(to_pnf(Not(g.left)), to_pnf(Not(g.right)))
        if isinstance(g, Atom):
            return f
        # Opacity / ProbQuery are atom-like for normalization.
        return Not(to_pnf(g))
    raise TypeError(f"not a state formula: {f!r}")


def _pnf_path(psi: PathFormula, negate: bool = False) -> PathFormula:
    psi = desugar(psi)
    if isinstance(psi, PathNot):
        return _pnf_path(psi.sub, not negate)
    if isinstance(psi, Bot):
        return PathNot(psi) if negate else psi
    if isinstance(psi, Next):
        sub = Not(psi.sub) if negate else psi.sub
        return Next(to_pnf(sub))
    if isinstance(psi, Until):
        if negate:
            return Release(to_pnf(Not(psi.left)), to_pnf(Not(psi.right)))
        return Until(to_pnf(psi.left), to_pnf(psi.right))
    if isinstance(psi, Release):
        if negate:
            return Until(to_pnf(Not(psi.left)), to_pnf(Not(psi.right)))
        return Release(to_pnf(psi.left), to_pnf(psi.right))
    raise TypeError(f"not a path formula: {psi!r}")


def negate_path(psi: PathFormula) -> PathFormula:
    """The dual path formula whose paths are exactly those violating psi.

    Next p -> Next !p;  p U q -> !p R !q;  p R q -> !p U !q.
    Inner negations are pushed down by to_pnf.
    """
    psi = desugar(psi)
    if isinstance(psi, Next):
        return Next(to_pnf(Not(psi.sub)))
    if isinstance(psi, Until):
        return Release(to_pnf(Not(psi.left)), to_pnf(Not(psi.right)))
    if isinstance(psi, Release):
        return Until(to_pnf(Not(psi.left)), to_pnf(Not(psi.right)))
    raise UnsupportedPathForm(
        f"cannot negate path formula '{psi}': only X/U/R (and F sugar) are supported")


# -- concrete syntax --------------------------------------------------------
#
# query := 'P' ('=?' | CMP PROB) '[' body ']'
#        | ('opacity' | '⊙') bracketed-or-bare path
#        | state
# body  := ('opacity' | '⊙')? path | state-as-plain-path?  (path required in P[..])
# path  := 'X' state | 'F' state | state ('U'|'R') state | 'bot' | '!' path
# state := 'true' | 'false' | atom | '!'state | state('&'|'|')state | '('state')'
# atom  := IDENT CMPOP (INT|IDENT) | '"' IDENT '"'
# CMP   := '<=' | '<' | '>=' | '>' ;  PROB := decimal or fraction

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<quoted>"[A-Za-z_][A-Za-z0-9_]*")
  | (?P<op><=|>=|=\?|!=|⊙|[<>=!&|()\[\]/])
""", re.VERBOSE)

_PATH_KEYWORDS = {"X", "U", "R", "F"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list:
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise PropertySyntaxError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        i = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, message):
        t = self.peek()
        raise PropertySyntaxError(message, t.line, t.column)

    def expect(self, text):
        t = self.peek()
        if t.text != text:
            want = "end of input" if text == "" else f"'{text}'"
            self.error(f"expected {want}, found '{t.text or 'end of input'}'")
        return self.next()

    def at(self, text) -> bool:
        return self.peek().text == text

    def accept(self, text) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    # query ----------------------------------------------------------------

    def parse_query(self) -> StateFormula:
        t = self.peek()
        if t.text == "P":
            f = self.parse_prob_query()
        elif t.text in ("opacity", "⊙"):
            self.next()
            f = Opacity(self.parse_path_maybe_bracketed())
        else:
            f = self.parse_state()
        self.expect("")
        return f

    def parse_prob_query(self) -> ProbQuery:
        self.expect("P")
        t = self.peek()
        if t.text == "=?":
            self.next()
            comparator, threshold = "=?", None
        elif t.text in ("<=", "<", ">=", ">"):
            self.next()
            comparator = t.text
            threshold = self.parse_prob()
        else:
            self.error("expected '=?' or a comparison after 'P'")
        self.expect("[")
        opac = self.peek().text in ("opacity", "⊙")
        if opac:
            self.next()
            path = self.parse_path_maybe_bracketed()
            body: Union[PathFormula, Opacity] = Opacity(path)
        else:
            body = self.parse_path()
        self.expect("]")
        return ProbQuery(comparator, threshold, body)

    def parse_prob(self) -> Fraction:
        t = self.peek()
        if t.kind != "num":
            self.error("expected a probability (decimal or fraction)")
        self.next()
        value = Fraction(t.text)  # exact, also for decimal strings
        if self.accept("/"):
            d = self.peek()
            if d.kind != "num" or "." in d.text:
                self.error("expected an integer denominator")
            self.next()
            value = value / Fraction(d.text)
        if not 0 <= value <= 1:
            self.error(f"probability {value} out of [0,1]")
        return value

    # path formulas ----------------------------------------------------------

    def parse_path_maybe_bracketed(self) -> PathFormula:
        if self.accept("["):
            p = self.parse_path()
            self.expect("]")
            return p
        return self.parse_path()

    def parse_path(self) -> PathFormula:
        t = self.peek()
        if t.text == "!":
            self.next()
            return PathNot(self.parse_path())
        if t.text == "bot":
            self.next()
            return Bot()
        if t.text == "X":
            self.next()
            return Next(self.parse_state())
        if t.text == "F":
            self.next()
            return Until(TrueF(), self.parse_state())
        left = self.parse_state()
        op = self.peek()
        if op.text == "U":
            self.next()
            return Until(left, self.parse_state())
        if op.text == "R":
            self.next()
            return Release(left, self.parse_state())
        self.error("expected 'U' or 'R' in path formula")

    # state formulas ---------------------------------------------------------

    def parse_state(self) -> StateFormula:
        return self.parse_or()

    def parse_or(self) -> StateFormula:
        f = self.parse_and()
        while self.at("|"):
            self.next()
            f = Or(f, self.parse_and())
        return f

    def parse_and(self) -> StateFormula:
        f = self.parse_unary()
        while self.at("&"):
            self.next()
            f = And(f, self.parse_unary())
        return f

    def parse_unary(self) -> StateFormula:
        t = self.peek()
        if t.text == "!":
            self.next()
            return Not(self.parse_unary())
        if t.text == "(":
            self.next()
            f = self.parse_state()
            self.expect(")")
            return f
        if t.text == "true":
            self.next()
            return TrueF()
        if t.text == "false":
            self.next()
            return FalseF()
        if t.text in ("opacity", "⊙"):
            self.error("nested opacity operators are not supported")
        if t.kind == "quoted":
            self.next()
            return Atom(t.text[1:-1])
        if t.kind == "ident":
            if t.text in _PATH_KEYWORDS:
                self.error(f"'{t.text}' is a path operator, not an atom")
            self.next()
            op = self.peek()
            if op.text in ("=", "!=", "<=", "<", ">=", ">"):
                self.next()
                rhs = self.peek()
                if rhs.kind == "num" and "." not in rhs.text:
                    self.next()
                    return Atom(f"{t.text}{op.text}{rhs.text}")
                if rhs.kind == "ident":
                    self.next()
                    return Atom(f"{t.text}{op.text}{rhs.text}")
                self.error("expected an integer or constant on the right of a comparison")
            return Atom(t.text)
        self.error(f"unexpected token '{t.text or 'end of input'}' in state formula")


def parse_property(text: str) -> StateFormula:
    """Parse a property string into a state formula AST.

    'F p' desugars to 'true U p' during parsing; 'opacity' and '⊙' are
    interchangeable.  Unknown atoms are deferred to checking time.
    """
    return _Parser(text).parse_query()


def parse_path_formula(text: str) -> PathFormula:
    """Parse a standalone path formula such as 'F (s=3)' or '(s=0) U (s=5)'."""
    p = _Parser(text)
    f = p.parse_path_maybe_bracketed()
    p.expect("")
    return f
