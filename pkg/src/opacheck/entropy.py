"""Transparency in bits per symbol.

Two routes to the growth rate of the non-opaque (transparent) language: a
counting estimate log2(1+count(n))/n over a window of lengths, and the exact
route log2 of the spectral radius of the trimmed acceptor's count matrix.
Finite traces are padded with the termination label, so a finite transparent
trace contributes one word to every larger length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import automata as au
from .automata import Nfa
from .checking import CheckSettings, non_opaque_language
from .errors import NonConvergence
from .formulas import PathFormula
from .model import Model

DEFAULT_NMAX = 64
DEFAULT_TAIL_WINDOW = 16
DEFAULT_AGREEMENT_TOL = 0.12


@dataclass
class EntropyReport:
    counts: tuple  # (n, count) pairs, n = 1..n_max
    estimates: tuple  # log2(1+count)/n per entry
    limsup_estimate: float  # max of estimates over the tail window
    spectral_value: Optional[float] = None
    agreement: Optional[bool] = None
    tolerance: float = DEFAULT_AGREEMENT_TOL


def transparent_language(m: Model, s: int, psi: PathFormula,
                         settings: CheckSettings = CheckSettings()) -> Nfa:
    """The language of uncovered satisfying traces (shared with the checker)."""
    return non_opaque_language(m, s, psi, settings)


def entropy_by_counting(m: Model, s: int, psi: PathFormula,
                        n_max: int = DEFAULT_NMAX,
                        tail_window: int = DEFAULT_TAIL_WINDOW,
                        settings: CheckSettings = CheckSettings()) -> EntropyReport:
    """Counting estimate of the transparency growth rate.

    The limsup is approximated by the maximum estimate over the last
    `tail_window` lengths.
    """
    if not 1 <= tail_window <= n_max:
        raise ValueError("need n_max >= tail_window >= 1")
    lang = transparent_language(m, s, psi, settings)
    counts, estimates = count_table(lang, n_max, settings.dfa_cap)
    limsup = max(est for (n, _), est in zip(counts, estimates) if n > n_max - tail_window)
    return EntropyReport(counts=counts, estimates=estimates, limsup_estimate=limsup)


def count_table(lang: Nfa, n_max: int, cap: int = au.DEFAULT_DFA_CAP):
    """Word counts for lengths 1..n_max with their log2(1+count)/n estimates."""
    dfa = au.determinize(au.trim(lang), cap)
    counts = []
    state_counts = {dfa.initial: 1}
    for n in range(1, n_max + 1):
        nxt = {}
        for st, c in state_counts.items():
            for sym in dfa.alphabet:
                t = dfa.delta[(st, sym)]
                nxt[t] = nxt.get(t, 0) + c
        state_counts = nxt
        counts.append((n, sum(c for st, c in state_counts.items() if st in dfa.accepting)))
    estimates = tuple(math.log2(1 + c) / n for n, c in counts)
    return tuple(counts), estimates


def count_matrix(lang: Nfa, cap: int = au.DEFAULT_DFA_CAP):
    """Label-count adjacency matrix of the determinized, trimmed acceptor.

    Entry (s, t) is the number of symbols taking s to t.  Returns (matrix
    rows as lists of ints, number of states); the matrix is empty for the
    empty language.
    """
    trimmed = au.trim(lang)
    if trimmed.n_states == 0 or not trimmed.accepting:
        return [], 0
    dfa = au.determinize(trimmed, cap)
    # Determinization completes the automaton; drop the dead parts again.
    useful = au.trim(dfa.to_nfa())
    n = useful.n_states
    matrix = [[0] * n for _ in range(n)]
    for (p, _sym, q) in useful.transitions:
        matrix[p][q] += 1
    return matrix, n


def entropy_spectral(lang: Nfa, tol: float = 1e-10, max_iter: int = 10 ** 5,
                     cap: int = au.DEFAULT_DFA_CAP) -> float:
    """log2 of the spectral radius of the count matrix; 0 for thin languages.

    Acyclic acceptors (finitely many words) and spectral radius <= 1 (at most
    linear growth, e.g. termination self-loops) both yield 0.
    """
    matrix, n = count_matrix(lang, cap)
    if n == 0:
        return 0.0
    if _is_acyclic(matrix, n):
        return 0.0
    rho = spectral_radius(matrix, tol, max_iter)
    return math.log2(rho) if rho > 1 else 0.0


def _is_acyclic(matrix, n) -> bool:
    indeg = [0] * n
    for i in range(n):
        for j in range(n):
            if matrix[i][j]:
                indeg[j] += 1
    queue = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while queue:
        i = queue.pop()
        seen += 1
        for j in range(n):
            if matrix[i][j]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    queue.append(j)
    return seen == n


def spectral_radius(matrix, tol: float = 1e-10, max_iter: int = 10 ** 5) -> float:
    """Dominant eigenvalue of a nonnegative integer matrix by power iteration.

    Iterates on A+I (strictly positive diagonal removes periodicity), uses the
    Rayleigh quotient as the estimate, restarts from a perturbed vector when
    the residual stagnates, and falls back to exact characteristic-polynomial
    roots for matrices up to 8x8 if iteration fails to converge.
    """
    n = len(matrix)
    if n == 0:
        return 0.0
    shifted = [[matrix[i][j] + (1 if i == j else 0) for j in range(n)] for i in range(n)]

    def matvec(v):
        return [sum(shifted[i][j] * v[j] for j in range(n)) for i in range(n)]

    def norm(v):
        return math.sqrt(sum(x * x for x in v))

    vec = [1.0] * n
    vec = [x / norm(vec) for x in vec]
    lam = 0.0
    last_res = float("inf")
    stagnant = 0
    for it in range(max_iter):
        w = matvec(vec)
        wn = norm(w)
        if wn == 0:
            return 0.0  # nilpotent shifted matrix cannot occur (positive diagonal)
        lam = sum(v * x for v, x in zip(vec, w))  # Rayleigh quotient, unit vec
        vec = [x / wn for x in w]
        res = norm([a - lam * b for a, b in zip(matvec(vec), vec)])
        if res < tol:
            return max(lam - 1.0, 0.0)
        if res >= last_res * 0.999999:
            stagnant += 1
            if stagnant > 200:
                vec = [x + 1e-6 * ((i * 2654435761) % 97 - 48) for i, x in enumerate(vec)]
                vec = [x / norm(vec) for x in vec]
                stagnant = 0
        else:
            stagnant = 0
        last_res = res
    if n <= 8:
        return _char_poly_radius(matrix)
    raise NonConvergence(
        f"power iteration did not converge within {max_iter} iterations",
        last_estimate=max(lam - 1.0, 0.0))


def _char_poly_radius(matrix) -> float:
    """Largest root modulus via exact Faddeev-LeVerrier coefficients."""
    import numpy as np

    n = len(matrix)
    a = [[Fraction(x) for x in row] for row in matrix]
    coeffs = [Fraction(1)]  # characteristic polynomial, leading first
    mprev = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        mk = _mat_mul(a, _mat_add_diag(mprev, coeffs[-1])) if k > 1 else [row[:] for row in a]
        ck = -_trace(mk) / k
        coeffs.append(ck)
        mprev = mk
    roots = np.roots([float(c) for c in coeffs])
    return float(max(abs(r) for r in roots)) if len(roots) else 0.0


def _mat_mul(a, b):
    n = len(a)
    return [[sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def _mat_add_diag(a, c):
    n = len(a)
    return [[a[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]


def _trace(a):
    return sum(a[i][i] for i in range(len(a)))


def entropy_report(m: Model, s: int, psi: PathFormula,
                   n_max: int = DEFAULT_NMAX,
                   tail_window: int = DEFAULT_TAIL_WINDOW,
                   tolerance: float = DEFAULT_AGREEMENT_TOL,
                   settings: CheckSettings = CheckSettings()) -> EntropyReport:
    """Full report: counting estimate, spectral value, and agreement flag."""
    report = entropy_by_counting(m, s, psi, n_max, tail_window, settings)
    lang = transparent_language(m, s, psi, settings)
    report.spectral_value = entropy_spectral(lang, cap=settings.dfa_cap)
    report.tolerance = tolerance
    report.agreement = abs(report.limsup_estimate - report.spectral_value) <= tolerance
    return report


def model_run_entropy(m: Model) -> float:
    """Growth rate of the model's own trace language (all runs accepted)."""
    trans = frozenset((t.source, t.label, t.target) for t in m.transitions)
    lang = Nfa(m.n_states, m.alphabet, trans, frozenset({m.initial}),
               frozenset(m.states))
    return entropy_spectral(lang)
