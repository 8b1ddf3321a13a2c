"""Depth-bounded brute-force reference for trace sets, opacity and degree.

Everything here works directly on walks of the model: the word sets of path
formulas come from their defining conditions checked along each walk, and
coverage is decided by a memoized walk closure matching observation strings
symbol by symbol.  No automata machinery is shared with the engine.
"""

from fractions import Fraction

from opacheck.formulas import And, Atom, FalseF, Next, Not, Or, Release, TrueF, Until, desugar
from opacheck.model import BOT_NAME


def eval_state(m, s, f):
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Atom):
        return s in _atom_states(m, f)
    if isinstance(f, Not):
        return not eval_state(m, s, f.sub)
    if isinstance(f, And):
        return eval_state(m, s, f.left) and eval_state(m, s, f.right)
    if isinstance(f, Or):
        return eval_state(m, s, f.left) or eval_state(m, s, f.right)
    raise TypeError(f"oracle formulas are boolean over atoms, got {f!r}")


def _atom_states(m, atom):
    return frozenset(s for s in m.states if atom.text in m.props_of(s))


def sat_set(m, f):
    return frozenset(s for s in m.states if eval_state(m, s, f))


def obs_of(m, word):
    out = []
    for lab in word:
        sym = m.obs.symbol(lab)
        if sym is not None:
            out.append(sym)
    return tuple(out)


def reachable_from(m, s):
    seen = {s}
    todo = [s]
    while todo:
        q = todo.pop()
        for t in m.out(q):
            if t.target not in seen:
                seen.add(t.target)
                todo.append(t.target)
    return seen


def absorbed_set(m):
    """States whose reachable set is mutually reachable (closed components)."""
    reach = {s: reachable_from(m, s) for s in m.states}
    out = set()
    for s in m.states:
        if all(s in reach[r] for r in reach[s]):
            if any(t.target == s for q in reach[s] for t in m.out(q)):
                out.add(s)
    return frozenset(out)


def core_cycle_set(m, allowed):
    """On-cycle states of the greatest leak-free subset of `allowed`."""
    core = set(allowed)
    changed = True
    while changed:
        changed = False
        for s in list(core):
            if any(t.target not in core for t in m.out(s)):
                core.discard(s)
                changed = True
    on_cycle = set()
    for s in core:
        frontier = {t.target for t in m.out(s) if t.target in core}
        seen = set(frontier)
        while frontier:
            q = frontier.pop()
            if q == s:
                on_cycle.add(s)
                seen.add(s)
                frontier = set()
                break
            for t in m.out(q):
                if t.target in core and t.target not in seen:
                    seen.add(t.target)
                    frontier.add(t.target)
    return frozenset(on_cycle)


def _walks(m, s, depth):
    """All (word, state-sequence) pairs of walks from s up to `depth` labels."""
    out = [((), (s,))]
    frontier = [((), (s,))]
    for _ in range(depth):
        nxt = []
        for word, states in frontier:
            for t in m.out(states[-1]):
                item = (word + (t.label,), states + (t.target,))
                nxt.append(item)
        out.extend(nxt)
        frontier = nxt
        if not frontier:
            break
    return out


def until_words(m, s, left, right, depth):
    """Words passing a right-operand witness (left before it), ending absorbed."""
    sat_p = sat_set(m, left)
    sat_q = sat_set(m, right)
    absorbed = absorbed_set(m)
    words = set()
    for word, states in _walks(m, s, depth):
        witnessed = False
        clean = True
        for q in states:
            if clean and q in sat_q:
                witnessed = True
                break
            if q not in sat_p:
                clean = False
                break
        if witnessed and states[-1] in absorbed:
            words.add(word)
    return words


def release_words(m, s, left, right, depth):
    """Words inside the right operand ending released or on a core cycle."""
    sat_p = sat_set(m, left)
    sat_q = sat_set(m, right)
    enders = (sat_p & sat_q) | core_cycle_set(m, sat_q)
    words = set()
    for word, states in _walks(m, s, depth):
        if all(q in sat_q for q in states) and states[-1] in enders:
            words.add(word)
    return words


def next_words(m, s, sub):
    sat_p = sat_set(m, sub)
    return {(t.label,) for t in m.out(s) if t.target in sat_p}


def path_words(m, s, psi, depth):
    psi = desugar(psi)
    if isinstance(psi, Next):
        return next_words(m, s, psi.sub)
    if isinstance(psi, Until):
        return until_words(m, s, psi.left, psi.right, depth)
    if isinstance(psi, Release):
        return release_words(m, s, psi.left, psi.right, depth)
    raise TypeError(f"unsupported path formula {psi!r}")


def negated(psi):
    psi = desugar(psi)
    if isinstance(psi, Next):
        return Next(Not(psi.sub))
    if isinstance(psi, Until):
        return Release(Not(psi.left), Not(psi.right))
    if isinstance(psi, Release):
        return Until(Not(psi.left), Not(psi.right))
    raise TypeError(f"unsupported path formula {psi!r}")


class CoverChecker:
    """Exact decision of 'some violating word observes exactly like this'.

    Walks the model breadth-first while matching the target observation
    string; (state, matched-prefix, flags) tuples are memoized, and hidden
    steps do not advance the match, so the closure is finite even though
    word length is unbounded.
    """

    def __init__(self, m, s, psi):
        self.m = m
        neg = negated(psi)
        neg = desugar(neg)
        if isinstance(neg, Next):
            self.kind = "next"
            self.sat_p = sat_set(m, neg.sub)
            self.one_step_obs = {obs_of(m, w) for w in next_words(m, s, neg.sub)}
        elif isinstance(neg, Until):
            self.kind = "until"
            self.sat_p = sat_set(m, neg.left)
            self.sat_q = sat_set(m, neg.right)
            self.enders = absorbed_set(m)
        else:
            self.kind = "release"
            self.sat_p = sat_set(m, neg.left)
            self.sat_q = sat_set(m, neg.right)
            self.enders = (self.sat_p & self.sat_q) | core_cycle_set(m, self.sat_q)
        self.start = s
        self._cache = {}

    def covered(self, target):
        if self.kind == "next":
            return target in self.one_step_obs
        if target in self._cache:
            return self._cache[target]
        result = self._search(target)
        self._cache[target] = result
        return result

    def _accepting(self, state, witnessed):
        if self.kind == "until":
            return witnessed and state in self.enders
        return state in self.enders

    def _search(self, target):
        # Configurations: (state, #matched symbols, witnessed, clean) where
        # clean means every state so far satisfied the left operand (only
        # meaningful for the until kind).
        if self.kind == "until":
            start_cfg = (self.start, 0, self.start in self.sat_q,
                         self.start in self.sat_p)
        else:
            if self.start not in self.sat_q:
                return False
            start_cfg = (self.start, 0, False, True)
        seen = {start_cfg}
        todo = [start_cfg]
        while todo:
            state, matched, witnessed, clean = todo.pop()
            if matched == len(target) and self._accepting(state, witnessed):
                return True
            for t in self.m.out(state):
                sym = self.m.obs.symbol(t.label)
                if sym is None:
                    matched2 = matched
                elif matched < len(target) and target[matched] == sym:
                    matched2 = matched + 1
                else:
                    continue
                if self.kind == "until":
                    clean2 = clean and t.target in self.sat_p
                    witnessed2 = witnessed or (clean and t.target in self.sat_q)
                    cfg = (t.target, matched2, witnessed2, clean2)
                else:
                    if t.target not in self.sat_q:
                        continue
                    cfg = (t.target, matched2, False, True)
                if cfg not in seen:
                    seen.add(cfg)
                    todo.append(cfg)
        return False


def opacity_probe(m, s, psi, depth):
    """(uncovered words, all words) of the satisfying side up to `depth`."""
    words = path_words(m, s, psi, depth)
    checker = CoverChecker(m, s, psi)
    uncovered = {w for w in words if not checker.covered(obs_of(m, w))}
    return uncovered, words


def walk_probability(m, s, word):
    prob = Fraction(1)
    state = s
    for lab in word:
        t = m.step(state, lab)
        assert t is not None, "oracle words must walk the model"
        prob *= t.prob
        state = t.target
    return prob


def degree_lower_bound(m, s, psi, depth):
    """Mass of uncovered satisfying words up to depth (prefix-minimal only)."""
    uncovered, _ = opacity_probe(m, s, psi, depth)
    minimal = {w for w in uncovered
               if not any(w[:k] in uncovered for k in range(len(w)))}
    return sum((walk_probability(m, s, w) for w in minimal), Fraction(0))


def unsettled_mass(m, s, psi, depth):
    """Mass of depth-`depth` walks that could still join the uncovered event.

    A walk is settled once a prefix is a counted uncovered word, the formula
    can no longer be satisfied, or it sits on a termination loop whose
    padded observations are all covered.
    """
    psi = desugar(psi)
    if isinstance(psi, Next):
        return Fraction(0)
    uncovered, words = opacity_probe(m, s, psi, depth)
    checker = CoverChecker(m, s, psi)
    if isinstance(psi, Until):
        sat_p = sat_set(m, psi.left)
        sat_q = sat_set(m, psi.right)
    else:
        sat_p = sat_set(m, psi.left)
        sat_q = sat_set(m, psi.right)
    total = Fraction(0)
    for word, states in _walks(m, s, depth):
        if len(word) != depth:
            continue
        if any(word[:k] in uncovered for k in range(len(word) + 1)):
            continue  # already counted
        if isinstance(psi, Until):
            witnessed = False
            clean = True
            for q in states:
                if clean and q in sat_q:
                    witnessed = True
                    break
                if q not in sat_p:
                    clean = False
                    break
            if not witnessed and not clean:
                continue  # can never satisfy
        else:
            if any(q not in sat_q for q in states):
                continue  # release already failed with no rescue
        if m.is_bot_committed(states[-1]):
            base = obs_of(m, word)
            if checker.covered(base) and checker.covered(base + (BOT_NAME,)):
                continue  # padding stays covered forever
        total += walk_probability(m, s, word)
    return total
