"""Mamdani inference over interval type-2 sets with EKM type reduction.

Two code paths compute the same thing:

* a scalar path (``fire_rules`` -> ``aggregate_output`` -> ``ekm_left`` /
  ``ekm_right`` -> ``defuzzify``) that follows the textbook algorithm step by
  step and is meant for inspection and testing, and
* ``FLSEngine``, which evaluates whole batches of difference triples with
  numpy. Every pixel-level computation goes through the engine, so a given
  triple always yields bit-identical similarity no matter how it was batched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .fuzzy import (
    MembershipInterval,
    Vocabulary,
    default_vocabularies,
    evaluate_it2,
    evaluate_t1,
)

DEFAULT_N = 101


class ConfigurationError(ValueError):
    pass


class NoRuleFiredError(RuntimeError):
    """No rule has a nonzero upper firing strength; the vocabularies leave a gap."""


class DegenerateSetError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    antecedent: tuple[str, str, str]
    consequent: str

    def __str__(self):
        return f"{' '.join(self.antecedent)} -> {self.consequent}"


_ABBREV = {"L": "Low", "M": "Medium", "H": "High"}


def parse_rule(line: str) -> Rule:
    """Parse ``"R G B -> S"``; color terms may be abbreviated to L/M/H."""
    try:
        lhs, rhs = line.split("->")
    except ValueError:
        raise ConfigurationError(f"rule must look like 'R G B -> S': {line!r}") from None
    terms = lhs.split()
    if len(terms) != 3 or len(rhs.split()) != 1:
        raise ConfigurationError(f"rule must have three antecedents and one consequent: {line!r}")
    return Rule(tuple(_ABBREV.get(t, t) for t in terms), rhs.strip())


# Table of the 27 rules (R, G, B differences -> similarity).
TABLE1 = """
L L L -> ES
L L M -> ES
L L H -> QS
L M L -> ES
L M M -> QS
L M H -> MS
L H L -> QS
L H M -> MS
L H H -> SS
M L L -> ES
M L M -> QS
M L H -> MS
M M L -> QS
M M M -> MS
M M H -> SS
M H L -> MS
M H M -> SS
M H H -> NS
H L L -> QS
H L M -> MS
H L H -> SS
H M L -> MS
H M M -> SS
H M H -> NS
H H L -> SS
H H M -> NS
H H H -> NS
"""


@dataclass(frozen=True)
class RuleBase:
    rules: tuple[Rule, ...]

    def __post_init__(self):
        seen = set()
        for r in self.rules:
            if r.antecedent in seen:
                raise ConfigurationError(f"duplicate antecedent {r.antecedent}")
            seen.add(r.antecedent)

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "RuleBase":
        return cls(tuple(parse_rule(ln) for ln in lines if ln.strip() and not ln.lstrip().startswith("#")))

    @classmethod
    def default(cls) -> "RuleBase":
        return cls.from_lines(TABLE1.splitlines())

    def validate(self, color: Vocabulary, similarity: Vocabulary, complete: bool = True) -> None:
        if not self.rules:
            raise ConfigurationError("empty rule base")
        for r in self.rules:
            for t in r.antecedent:
                if t not in color.names:
                    raise ConfigurationError(f"rule '{r}': unknown color term {t!r}")
            if r.consequent not in similarity.names:
                raise ConfigurationError(f"rule '{r}': unknown similarity term {r.consequent!r}")
        if complete and len(self.rules) != len(color) ** 3:
            raise ConfigurationError(
                f"rule base has {len(self.rules)} rules, expected {len(color) ** 3} (one per antecedent combination)"
            )

    def lines(self) -> list[str]:
        return [str(r) for r in self.rules]


@dataclass(frozen=True)
class FiringInterval:
    f_lower: float
    f_upper: float

    def __post_init__(self):
        if not (0.0 <= self.f_lower <= self.f_upper <= 1.0):
            raise ValueError(f"invalid firing interval [{self.f_lower}, {self.f_upper}]")


@dataclass(frozen=True, eq=False)
class DiscretizedIT2Set:
    xs: np.ndarray
    mu_lower: np.ndarray
    mu_upper: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        lo = np.asarray(self.mu_lower, dtype=np.float64)
        up = np.asarray(self.mu_upper, dtype=np.float64)
        if xs.ndim != 1 or xs.size < 2 or lo.shape != xs.shape or up.shape != xs.shape:
            raise ValueError("xs, mu_lower, mu_upper must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        if np.any(lo < 0) or np.any(up > 1) or np.any(lo > up):
            raise ValueError("memberships must satisfy 0 <= lower <= upper <= 1")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "mu_lower", lo)
        object.__setattr__(self, "mu_upper", up)

    def __len__(self):
        return self.xs.size


@dataclass(frozen=True)
class CentroidInterval:
    c_l: float
    c_r: float
    switch_left: int
    switch_right: int


def fire_rules(rulebase: RuleBase,
               inputs: Sequence[Mapping[str, MembershipInterval]]) -> list[tuple[int, FiringInterval]]:
    """Product t-norm firing interval of every rule whose upper strength is nonzero.

    ``inputs[ch][term]`` is the membership of channel ``ch`` (R, G, B) in ``term``.
    """
    if len(rulebase) == 0:
        raise ConfigurationError("empty rule base")
    fired = []
    for idx, rule in enumerate(rulebase):
        lo = 1.0
        up = 1.0
        for ch, term in enumerate(rule.antecedent):
            m = inputs[ch][term]
            lo *= m.lower
            up *= m.upper
        if up > 0.0:
            fired.append((idx, FiringInterval(lo, up)))
    return fired


def output_grid(n: int = DEFAULT_N) -> np.ndarray:
    if n < 2:
        raise ConfigurationError("output discretization needs N >= 2")
    return np.linspace(0.0, 1.0, n)


def sample_vocabulary(vocab: Vocabulary, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(lower, upper) membership of every term at every sample, shape (terms, N)."""
    lo = np.empty((len(vocab), xs.size))
    up = np.empty((len(vocab), xs.size))
    for t, term in enumerate(vocab):
        for i, x in enumerate(xs):
            m = evaluate_it2(term.mf, float(x))
            lo[t, i] = m.lower
            up[t, i] = m.upper
    return lo, up


def aggregate_output(fired: Sequence[tuple[int, FiringInterval]], rulebase: RuleBase,
                     similarity: Vocabulary, n: int = DEFAULT_N) -> DiscretizedIT2Set:
    """Product implication per rule, pointwise maximum across rules."""
    if not fired:
        raise NoRuleFiredError("no rule fired")
    xs = output_grid(n)
    cons_lo, cons_up = sample_vocabulary(similarity, xs)
    mu_lo = np.zeros(n)
    mu_up = np.zeros(n)
    for idx, f in fired:
        c = similarity.index(rulebase.rules[idx].consequent)
        np.maximum(mu_lo, f.f_lower * cons_lo[c], out=mu_lo)
        np.maximum(mu_up, f.f_upper * cons_up[c], out=mu_up)
    return DiscretizedIT2Set(xs, mu_lo, mu_up)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def ekm_initial_switch(n: int, left: bool) -> int:
    k = _round_half_up(n / 2.4 if left else n / 1.7)
    return min(max(k, 1), n - 1)


def _sums(xs, lead, tail, k) -> tuple[float, float]:
    w = lead[:k] + tail[k:]
    return sum(x * v for x, v in zip(xs, w)), sum(w)


def _ekm(s: DiscretizedIT2Set, left: bool) -> tuple[float, int, int]:
    """Enhanced Karnik-Mendel iteration; returns (centroid, switch point, iterations).

    Switch point k (1-based) means the first k samples take the "leading"
    weight (upper for c_l, lower for c_r) and the rest take the other one.
    The sums are recomputed at each new switch point instead of updated by
    differences, which cancel to a spurious positive b when the lower set is
    empty. A step that would move c backwards ends the search.
    """
    xs, lo, up = s.xs.tolist(), s.mu_lower.tolist(), s.mu_upper.tolist()
    n = len(xs)
    if not any(u > 0.0 for u in up):
        raise DegenerateSetError("upper membership is identically zero")
    lead, tail = (up, lo) if left else (lo, up)

    k = ekm_initial_switch(n, left)
    a, b = _sums(xs, lead, tail, k)
    if b <= 0.0:
        # Every weight of the initial configuration is zero; restart from the all-upper set.
        k = n if left else 0
        a, b = _sums(xs, lead, tail, k)
    c = a / b

    iterations = 0
    while iterations <= n:
        iterations += 1
        kp = sum(1 for x in xs if x <= c)
        kp = min(max(kp, 1), n - 1)
        if kp == k:
            break
        a2, b2 = _sums(xs, lead, tail, kp)
        if b2 <= 0.0:
            break
        c2 = a2 / b2
        # Exact KM steps move c monotonically; a reversal can only come from rounding.
        if (c2 > c) if left else (c2 < c):
            break
        k, c = kp, c2
    return c, k, iterations


def ekm_left(s: DiscretizedIT2Set) -> tuple[float, int]:
    c, k, _ = _ekm(s, left=True)
    return c, k


def ekm_right(s: DiscretizedIT2Set) -> tuple[float, int]:
    c, k, _ = _ekm(s, left=False)
    return c, k


def type_reduce(s: DiscretizedIT2Set) -> CentroidInterval:
    cl, L = ekm_left(s)
    cr, R = ekm_right(s)
    return CentroidInterval(cl, cr, L, R)


def defuzzify(c: CentroidInterval) -> float:
    y = 0.5 * (c.c_l + c.c_r)
    return min(max(y, 0.0), 1.0)


def fuzzify(color: Vocabulary, diffs: Sequence[float], type2: bool = True) -> list[dict[str, MembershipInterval]]:
    out = []
    for d in diffs:
        if type2:
            out.append({t.name: evaluate_it2(t.mf, float(d)) for t in color})
        else:
            out.append({t.name: MembershipInterval(v, v) for t in color
                        for v in (evaluate_t1(t.mf, float(d)),)})
    return out


def infer_it2(diffs: Sequence[float], rulebase: RuleBase | None = None,
              color: Vocabulary | None = None, similarity: Vocabulary | None = None,
              n: int = DEFAULT_N) -> float:
    """Scalar reference IT2 pipeline for one (dR, dG, dB) triple."""
    if color is None or similarity is None:
        dc, ds = default_vocabularies()
        color, similarity = color or dc, similarity or ds
    rulebase = rulebase or RuleBase.default()
    fired = fire_rules(rulebase, fuzzify(color, diffs))
    agg = aggregate_output(fired, rulebase, similarity, n)
    return defuzzify(type_reduce(agg))


def infer_t1(diffs: Sequence[float], rulebase: RuleBase | None = None,
             color: Vocabulary | None = None, similarity: Vocabulary | None = None,
             n: int = DEFAULT_N) -> float:
    """Scalar type-1 Mamdani: product firing, max aggregation, discrete centroid.

    Memberships come from ``evaluate_t1`` (the lower triangle), so callers pass
    zero-FOU vocabularies; the default is the FOU midline of the built-in sets.
    """
    if color is None or similarity is None:
        dc, ds = default_vocabularies()
        color, similarity = color or dc.midline(), similarity or ds.midline()
    rulebase = rulebase or RuleBase.default()
    fired = fire_rules(rulebase, fuzzify(color, diffs, type2=False))
    if not fired:
        raise NoRuleFiredError(f"no rule fired for differences {tuple(diffs)}")
    xs = output_grid(n)
    cons = np.array([[evaluate_t1(t.mf, float(x)) for x in xs] for t in similarity])
    mu = np.zeros(n)
    for idx, f in fired:
        c = similarity.index(rulebase.rules[idx].consequent)
        np.maximum(mu, f.f_upper * cons[c], out=mu)
    den = mu.sum()
    if den <= 0.0:
        raise NoRuleFiredError(f"aggregated output is empty for differences {tuple(diffs)}")
    return min(max(float((xs * mu).sum() / den), 0.0), 1.0)


class FLSEngine:
    """Batched fuzzy similarity of integer difference triples in [0, 255]^3.

    ``type2=True`` runs the interval type-2 pipeline (EKM + midpoint);
    ``type2=False`` the type-1 pipeline (lower MFs only, discrete centroid).
    Membership tables for all 256 gray levels and the sampled consequents are
    built once with the scalar MF code, then the compiled kernel does the rest.
    """

    def __init__(self, rulebase: RuleBase | None = None, color: Vocabulary | None = None,
                 similarity: Vocabulary | None = None, n: int = DEFAULT_N, type2: bool = True):
        dc, ds = default_vocabularies()
        if not type2:
            dc, ds = dc.midline(), ds.midline()
        self.color = color or dc
        self.similarity = similarity or ds
        self.rulebase = rulebase or RuleBase.default()
        self.rulebase.validate(self.color, self.similarity, complete=False)
        if self.color.domain != (0.0, 255.0):
            raise ConfigurationError("color vocabulary must span [0, 255]")
        self.n = n
        self.type2 = type2
        self.xs = output_grid(n)

        levels = range(256)
        if type2:
            ms = [[evaluate_it2(t.mf, float(v)) for v in levels] for t in self.color]
            self._in_lo = np.array([[m.lower for m in row] for row in ms])
            self._in_up = np.array([[m.upper for m in row] for row in ms])
            self._out_lo, self._out_up = sample_vocabulary(self.similarity, self.xs)
        else:
            self._in_lo = np.array([[evaluate_t1(t.mf, float(v)) for v in levels] for t in self.color])
            self._in_up = self._in_lo
            self._out_lo = np.array([[evaluate_t1(t.mf, float(x)) for x in self.xs] for t in self.similarity])
            self._out_up = self._out_lo
        self._ante = np.array([[self.color.index(t) for t in r.antecedent] for r in self.rulebase], dtype=np.int64)
        self._cons = np.array([self.similarity.index(r.consequent) for r in self.rulebase], dtype=np.int64)

    def evaluate(self, diffs) -> np.ndarray:
        """Similarity for an (B, 3) integer array of channel differences."""
        d = np.asarray(diffs)
        if d.ndim != 2 or d.shape[1] != 3:
            raise ValueError("expected an array of shape (B, 3)")
        if d.size and (d.min() < 0 or d.max() > 255):
            raise ValueError("channel differences must lie in [0, 255]")
        d = np.ascontiguousarray(d, dtype=np.int64)
        out = np.empty(d.shape[0])
        _kernels.fls_batch(d, self._in_lo, self._in_up, self._ante, self._cons,
                           self._out_lo, self._out_up, self.xs, self.type2, out)
        bad = np.isnan(out)
        if np.any(bad):
            tri = tuple(int(v) for v in d[np.argmax(bad)])
            raise NoRuleFiredError(f"no rule fired for differences {tri}; check the vocabulary coverage")
        return out

    def __call__(self, dr: int, dg: int, db: int) -> float:
        return float(self.evaluate(np.array([[dr, dg, db]]))[0])
