"""Toolkit configuration: vocabularies, rules, discretization and sweep defaults.

The config file is JSON::

    {
      "color_terms": [{"name": "Low", "params": [0, 0, 0, 70, 110]}, ...],
      "similarity_terms": [{"name": "NS", "params": [0, 0, 0, 0.2, 0.3]}, ...],
      "rules": ["L L L -> ES", ...],
      "n": 101,
      "cache": "lazy",
      "workers": 0,
      "k": [1, 2, 3, 4],
      "th": [0.75, 0.77, 0.80, 0.81],
      "seed": 1729
    }

Term params are ``[alpha_u, alpha_l, beta, gamma_l, gamma_u]``. Every key is
optional; missing keys take the built-in defaults. The type-1 baseline uses
the FOU midlines of the two vocabularies unless ``t1_color_terms`` /
``t1_similarity_terms`` are given.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .fuzzy import Vocabulary, default_vocabularies, make_vocabulary
from .inference import DEFAULT_N, ConfigurationError, RuleBase

ENV_VAR = "FUZZSTEG_CONFIG"
DEFAULT_PATH = Path("fuzzsteg.json")
DEFAULT_SEED = 1729
DEFAULT_K = (1, 2, 3, 4)
DEFAULT_TH = (0.75, 0.77, 0.80, 0.81)


@dataclass(frozen=True)
class ToolkitConfig:
    color: Vocabulary
    similarity: Vocabulary
    rulebase: RuleBase
    t1_color: Vocabulary
    t1_similarity: Vocabulary
    n: int = DEFAULT_N
    cache: str = "lazy"
    workers: int = 0
    k: tuple[int, ...] = DEFAULT_K
    th: tuple[float, ...] = DEFAULT_TH
    seed: int = DEFAULT_SEED
    source: str = field(default="<built-in>", compare=False)

    def validate(self) -> None:
        if self.n < 2:
            raise ConfigurationError("n must be >= 2")
        if self.cache not in ("lazy", "dense", "off"):
            raise ConfigurationError(f"cache must be lazy, dense or off, not {self.cache!r}")
        for label, v, lo, hi in (("color", self.color, 0.0, 255.0), ("similarity", self.similarity, 0.0, 1.0),
                                 ("t1_color", self.t1_color, 0.0, 255.0),
                                 ("t1_similarity", self.t1_similarity, 0.0, 1.0)):
            if v.domain != (lo, hi):
                raise ConfigurationError(f"{label} vocabulary must span [{lo:g}, {hi:g}]")
            if not v.covers():
                raise ConfigurationError(f"{label} vocabulary leaves part of its domain uncovered")
        for label, c in (("t1_color", self.t1_color), ("t1_similarity", self.t1_similarity)):
            if not all(t.mf.is_degenerate for t in c):
                raise ConfigurationError(f"{label} terms must have a zero-width FOU")
        self.rulebase.validate(self.color, self.similarity, complete=True)
        self.rulebase.validate(self.t1_color, self.t1_similarity, complete=True)
        if any(not 1 <= k <= 8 for k in self.k):
            raise ConfigurationError("k values must lie in [1, 8]")
        if any(not 0.0 <= t <= 1.0 for t in self.th):
            raise ConfigurationError("thresholds must lie in [0, 1]")


def default_config() -> ToolkitConfig:
    color, sim = default_vocabularies()
    cfg = ToolkitConfig(color, sim, RuleBase.default(), color.midline(), sim.midline())
    cfg.validate()
    return cfg


def _vocab(entries, domain) -> Vocabulary:
    try:
        return make_vocabulary([e["name"] for e in entries], [e["params"] for e in entries], domain)
    except (KeyError, TypeError) as e:
        raise ConfigurationError(f"malformed term list: {e}") from e
    except ValueError as e:
        raise ConfigurationError(str(e)) from e


def config_from_dict(d: dict, source: str = "<dict>") -> ToolkitConfig:
    known = {"color_terms", "similarity_terms", "t1_color_terms", "t1_similarity_terms", "rules",
             "n", "cache", "workers", "k", "th", "seed"}
    extra = set(d) - known
    if extra:
        raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
    base_c, base_s = default_vocabularies()
    color = _vocab(d["color_terms"], (0.0, 255.0)) if "color_terms" in d else base_c
    sim = _vocab(d["similarity_terms"], (0.0, 1.0)) if "similarity_terms" in d else base_s
    t1c = _vocab(d["t1_color_terms"], (0.0, 255.0)) if "t1_color_terms" in d else color.midline()
    t1s = _vocab(d["t1_similarity_terms"], (0.0, 1.0)) if "t1_similarity_terms" in d else sim.midline()
    rules = RuleBase.from_lines(d["rules"]) if "rules" in d else RuleBase.default()
    try:
        cfg = ToolkitConfig(
            color, sim, rules, t1c, t1s,
            n=int(d.get("n", DEFAULT_N)),
            cache=str(d.get("cache", "lazy")),
            workers=int(d.get("workers", 0)),
            k=tuple(int(v) for v in d.get("k", DEFAULT_K)),
            th=tuple(float(v) for v in d.get("th", DEFAULT_TH)),
            seed=int(d.get("seed", DEFAULT_SEED)),
            source=source,
        )
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"bad config value: {e}") from e
    cfg.validate()
    return cfg


def load_config(path: str | os.PathLike | None = None) -> ToolkitConfig:
    """Explicit path, else $FUZZSTEG_CONFIG, else ./fuzzsteg.json, else built-in defaults."""
    if path is None:
        env = os.environ.get(ENV_VAR)
        if env:
            path = env
        elif DEFAULT_PATH.exists():
            path = DEFAULT_PATH
        else:
            return default_config()
    p = Path(path)
    try:
        d = json.loads(p.read_text())
    except OSError as e:
        raise ConfigurationError(f"cannot read config {p}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config {p} is not valid JSON: {e}") from e
    if not isinstance(d, dict):
        raise ConfigurationError(f"config {p} must be a JSON object")
    return config_from_dict(d, source=str(p))


def config_to_dict(cfg: ToolkitConfig) -> dict:
    def terms(v: Vocabulary):
        return [{"name": t.name, "params": list(t.mf.params)} for t in v]
    return {
        "color_terms": terms(cfg.color),
        "similarity_terms": terms(cfg.similarity),
        "t1_color_terms": terms(cfg.t1_color),
        "t1_similarity_terms": terms(cfg.t1_similarity),
        "rules": cfg.rulebase.lines(),
        "n": cfg.n,
        "cache": cfg.cache,
        "workers": cfg.workers,
        "k": list(cfg.k),
        "th": list(cfg.th),
        "seed": cfg.seed,
    }

