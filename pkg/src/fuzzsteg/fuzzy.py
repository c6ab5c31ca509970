"""Triangular interval type-2 membership functions and linguistic vocabularies.

An interval type-2 triangular MF is described by five abscissae
``alpha_u <= alpha_l <= beta <= gamma_l <= gamma_u``: the lower MF is the
triangle ``(alpha_l, beta, gamma_l)`` and the upper MF is the wider triangle
``(alpha_u, beta, gamma_u)`` sharing the same apex. The region between them is
the footprint of uncertainty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

COLOR_TERMS = ("Low", "Medium", "High")
SIMILARITY_TERMS = ("NS", "SS", "MS", "QS", "ES")


class FuzzyDomainError(ValueError):
    """Raised when an MF is evaluated outside its universe of discourse."""


@dataclass(frozen=True)
class MembershipInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper <= 1.0):
            raise ValueError(f"invalid membership interval [{self.lower}, {self.upper}]")


def _clamp01(v: float) -> float:
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


def _triangle(x: float, a: float, b: float, c: float,
              left_flat: bool = False, right_flat: bool = False) -> float:
    if x == b or (left_flat and x < b) or (right_flat and x > b):
        return 1.0
    if x <= a or x >= c:
        return 0.0
    if x < b:
        return _clamp01((x - a) / (b - a))
    return _clamp01((c - x) / (c - b))


@dataclass(frozen=True)
class IT2TriangularMF:
    """Interval type-2 triangular MF with an optional shoulder on either side."""

    alpha_u: float
    alpha_l: float
    beta: float
    gamma_l: float
    gamma_u: float
    domain_min: float = 0.0
    domain_max: float = 255.0

    def __post_init__(self):
        pts = (self.alpha_u, self.alpha_l, self.beta, self.gamma_l, self.gamma_u)
        if any(p2 < p1 for p1, p2 in zip(pts, pts[1:])):
            raise ValueError(
                "MF parameters must satisfy alpha_u <= alpha_l <= beta <= gamma_l <= gamma_u, "
                f"got {pts}"
            )
        if self.domain_max <= self.domain_min:
            raise ValueError("empty domain")

    @property
    def params(self) -> tuple[float, float, float, float, float]:
        return (self.alpha_u, self.alpha_l, self.beta, self.gamma_l, self.gamma_u)

    @property
    def is_degenerate(self) -> bool:
        return self.alpha_u == self.alpha_l and self.gamma_u == self.gamma_l

    @property
    def left_shoulder(self) -> bool:
        return self.alpha_u == self.beta

    @property
    def right_shoulder(self) -> bool:
        return self.gamma_u == self.beta

    def midline(self) -> "IT2TriangularMF":
        """Collapse the FOU to a zero-width MF half-way between the two triangles."""
        a = 0.5 * (self.alpha_u + self.alpha_l)
        c = 0.5 * (self.gamma_l + self.gamma_u)
        return IT2TriangularMF(a, a, self.beta, c, c, self.domain_min, self.domain_max)

    def __call__(self, x: float) -> MembershipInterval:
        return evaluate_it2(self, x)


@dataclass(frozen=True)
class LinguisticTerm:
    name: str
    mf: IT2TriangularMF


@dataclass(frozen=True)
class Vocabulary:
    """Ordered set of linguistic terms over one universe of discourse."""

    terms: tuple[LinguisticTerm, ...]

    def __post_init__(self):
        names = [t.name for t in self.terms]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate term names in vocabulary: {names}")
        if not self.terms:
            raise ValueError("empty vocabulary")
        dmin = {t.mf.domain_min for t in self.terms}
        dmax = {t.mf.domain_max for t in self.terms}
        if len(dmin) != 1 or len(dmax) != 1:
            raise ValueError("all terms of a vocabulary must share one domain")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.terms)

    @property
    def domain(self) -> tuple[float, float]:
        mf = self.terms[0].mf
        return (mf.domain_min, mf.domain_max)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown term {name!r}; expected one of {self.names}") from None

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __getitem__(self, name: str) -> LinguisticTerm:
        return self.terms[self.index(name)]

    def covers(self, samples: int = 1024) -> bool:
        """True when no sampled point of the domain has zero upper membership in every term."""
        lo, hi = self.domain
        for i in range(samples + 1):
            x = lo + (hi - lo) * i / samples
            if all(evaluate_it2(t.mf, x).upper == 0.0 for t in self.terms):
                return False
        return True

    def midline(self) -> "Vocabulary":
        return Vocabulary(tuple(LinguisticTerm(t.name, t.mf.midline()) for t in self.terms))


def _check_domain(mf: IT2TriangularMF, x: float) -> None:
    if not (mf.domain_min <= x <= mf.domain_max):
        raise FuzzyDomainError(f"x={x} outside domain [{mf.domain_min}, {mf.domain_max}]")


def evaluate_it2(mf: IT2TriangularMF, x: float) -> MembershipInterval:
    _check_domain(mf, x)
    ls, rs = mf.left_shoulder, mf.right_shoulder
    lower = _triangle(x, mf.alpha_l, mf.beta, mf.gamma_l, ls, rs)
    upper = _triangle(x, mf.alpha_u, mf.beta, mf.gamma_u, ls, rs)
    return MembershipInterval(lower, max(lower, upper))


def evaluate_t1(mf: IT2TriangularMF, x: float) -> float:
    """Type-1 membership: the lower triangle (equal to both bounds for a zero-width FOU)."""
    _check_domain(mf, x)
    return _triangle(x, mf.alpha_l, mf.beta, mf.gamma_l, mf.left_shoulder, mf.right_shoulder)


def make_vocabulary(names: Sequence[str], params: Sequence[Sequence[float]],
                    domain: tuple[float, float]) -> Vocabulary:
    if len(names) != len(params):
        raise ValueError("names and params differ in length")
    return Vocabulary(tuple(
        LinguisticTerm(n, IT2TriangularMF(*map(float, p), domain_min=domain[0], domain_max=domain[1]))
        for n, p in zip(names, params)
    ))


# (alpha_u, alpha_l, beta, gamma_l, gamma_u)
DEFAULT_COLOR_PARAMS = {
    "Low": (0.0, 0.0, 0.0, 70.0, 110.0),
    "Medium": (60.0, 90.0, 128.0, 166.0, 196.0),
    "High": (145.0, 185.0, 255.0, 255.0, 255.0),
}

DEFAULT_SIMILARITY_PARAMS = {
    "NS": (0.0, 0.0, 0.0, 0.20, 0.30),
    "SS": (-0.05, 0.05, 0.25, 0.45, 0.55),
    "MS": (0.20, 0.30, 0.50, 0.70, 0.80),
    "QS": (0.45, 0.55, 0.75, 0.95, 1.05),
    "ES": (0.70, 0.80, 1.0, 1.0, 1.0),
}


def default_vocabularies() -> tuple[Vocabulary, Vocabulary]:
    """Built-in (color-difference, similarity) vocabularies."""
    color = make_vocabulary(COLOR_TERMS, [DEFAULT_COLOR_PARAMS[n] for n in COLOR_TERMS], (0.0, 255.0))
    # SS and QS upper supports extend past [0, 1]; only the in-domain part is ever evaluated.
    sim = make_vocabulary(SIMILARITY_TERMS, [DEFAULT_SIMILARITY_PARAMS[n] for n in SIMILARITY_TERMS], (0.0, 1.0))
    return color, sim
