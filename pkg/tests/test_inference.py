import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzzsteg.fuzzy import MembershipInterval, default_vocabularies, evaluate_it2
from fuzzsteg.inference import (TABLE1, CentroidInterval, ConfigurationError, DegenerateSetError,
                                DiscretizedIT2Set, FiringInterval, FLSEngine, NoRuleFiredError, RuleBase,
                                _ekm, aggregate_output, defuzzify, ekm_initial_switch, ekm_left, ekm_right,
                                fire_rules, fuzzify, infer_it2, infer_t1, output_grid, parse_rule,
                                sample_vocabulary, type_reduce)

from oracles import centroid_bounds, switch_bounds

COLOR, SIM = default_vocabularies()
RB = RuleBase.default()
XS = output_grid()


# Weights are 0 or >= 1e-9: a nonzero weight below machine epsilon relative to
# the others cannot move a float64 centroid, so no oracle comparison is meaningful there.
WEIGHT = st.one_of(st.just(0.0), st.floats(1e-9, 1))


@st.composite
def it2_sets(draw, max_n=12, sparse=False):
    n = draw(st.integers(2, max_n))
    up = np.array(draw(st.lists(WEIGHT if sparse else st.floats(0.01, 1), min_size=n, max_size=n)))
    frac = np.array(draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    lo = up * frac
    if sparse:
        lo[np.array(draw(st.lists(st.booleans(), min_size=n, max_size=n)))] = 0.0
    if up.sum() == 0:
        up[draw(st.integers(0, n - 1))] = 1.0
    xs = np.cumsum(np.array(draw(st.lists(st.floats(0.05, 1), min_size=n, max_size=n))))
    return DiscretizedIT2Set(xs, lo, up)


def _inputs(*ivals):
    # channel memberships where only the named term is non-zero
    return [{t: MembershipInterval(0, 0) for t in COLOR.names} | {name: MembershipInterval(lo, up)}
            for name, lo, up in ivals]


def test_table1_has_27_rules_in_order():
    assert len(RB) == 27
    assert str(RB.rules[0]) == "Low Low Low -> ES"
    assert str(RB.rules[-1]) == "High High High -> NS"
    RB.validate(COLOR, SIM, complete=True)


def test_rule_parsing():
    r = parse_rule("M H L -> QS")
    assert r.antecedent == ("Medium", "High", "Low") and r.consequent == "QS"
    for bad in ("L L -> ES", "L L L ES", "L L L -> ES NS"):
        with pytest.raises(ConfigurationError):
            parse_rule(bad)
    with pytest.raises(ConfigurationError, match="unknown color term"):
        RuleBase.from_lines(["X L L -> ES"]).validate(COLOR, SIM, complete=False)


def test_rulebase_rejects_duplicates_and_incomplete():
    with pytest.raises(ConfigurationError):
        RuleBase.from_lines(["L L L -> ES", "L L L -> NS"])
    with pytest.raises(ConfigurationError):
        RuleBase.from_lines(TABLE1.splitlines()[:10]).validate(COLOR, SIM, complete=True)
    with pytest.raises(ConfigurationError):
        fire_rules(RuleBase(()), fuzzify(COLOR, [0, 0, 0]))


def test_fire_identity_and_omission():
    fired = fire_rules(RB, _inputs(("Low", 1, 1), ("Low", 1, 1), ("Low", 1, 1)))
    assert fired == [(0, FiringInterval(1.0, 1.0))]


def test_fire_product_example():
    fired = dict(fire_rules(RB, _inputs(("Medium", 0.26316, 0.58824), ("Low", 1, 1), ("High", 0.5, 0.7))))
    idx = RB.rules.index(parse_rule("M L H -> MS"))
    assert list(fired) == [idx]
    assert fired[idx].f_lower == pytest.approx(0.13158, abs=1e-5)
    assert fired[idx].f_upper == pytest.approx(0.411768, abs=1e-5)


def test_aggregate_identity_scaling_and_max():
    lo, up = sample_vocabulary(SIM, XS)
    es, ms, qs = SIM.index("ES"), SIM.index("MS"), SIM.index("QS")
    r_es = RB.rules.index(parse_rule("L L L -> ES"))
    r_ms = RB.rules.index(parse_rule("L H M -> MS"))
    r_qs = RB.rules.index(parse_rule("L L H -> QS"))
    a = aggregate_output([(r_es, FiringInterval(1, 1))], RB, SIM)
    assert np.array_equal(a.mu_lower, lo[es]) and np.array_equal(a.mu_upper, up[es])
    a = aggregate_output([(r_ms, FiringInterval(0.5, 0.5))], RB, SIM)
    assert np.allclose(a.mu_upper, 0.5 * up[ms], atol=0) and np.allclose(a.mu_lower, 0.5 * lo[ms], atol=0)
    a = aggregate_output([(r_es, FiringInterval(0.3, 0.4)), (r_qs, FiringInterval(0.6, 0.8))], RB, SIM)
    for i, x in enumerate(XS):
        e, q = evaluate_it2(SIM["ES"].mf, x), evaluate_it2(SIM["QS"].mf, x)
        assert a.mu_lower[i] == pytest.approx(max(0.3 * e.lower, 0.6 * q.lower), abs=1e-15)
        assert a.mu_upper[i] == pytest.approx(max(0.4 * e.upper, 0.8 * q.upper), abs=1e-15)
    with pytest.raises(NoRuleFiredError):
        aggregate_output([], RB, SIM)


def test_initial_switch_points():
    assert ekm_initial_switch(101, True) == 42 and ekm_initial_switch(101, False) == 59
    assert ekm_initial_switch(12, True) == 5 and ekm_initial_switch(12, False) == 7
    assert ekm_initial_switch(2, True) == 1 and ekm_initial_switch(2, False) == 1


def test_ekm_examples():
    s = DiscretizedIT2Set([0, 0.5, 1], [0.2, 1, 0.2], [0.2, 1, 0.2])
    assert ekm_left(s)[0] == pytest.approx(0.5) and ekm_right(s)[0] == pytest.approx(0.5)
    s = DiscretizedIT2Set([0, 1], [0.5, 0.5], [1, 1])
    assert ekm_left(s)[0] == pytest.approx(1 / 3, abs=1e-12)
    assert ekm_right(s)[0] == pytest.approx(2 / 3, abs=1e-12)
    with pytest.raises(DegenerateSetError):
        ekm_left(DiscretizedIT2Set([0, 1], [0, 0], [0, 0]))


def test_ekm_empty_lower_set():
    # lower set empty, upper only at the top of the grid: the case that broke running-sum updates
    up = np.clip((XS - 0.7) / 0.3, 0, 1) * 0.32
    s = DiscretizedIT2Set(XS, np.zeros_like(XS), up)
    lo_b, hi_b = switch_bounds(XS, np.zeros_like(XS), up)
    assert ekm_left(s)[0] == pytest.approx(lo_b, abs=0.011)
    assert ekm_right(s)[0] == pytest.approx(hi_b, abs=1e-9)
    assert 0.69 < ekm_left(s)[0] <= ekm_right(s)[0]


def test_defuzzify():
    assert defuzzify(CentroidInterval(0.5, 0.5, 1, 1)) == 0.5
    assert defuzzify(CentroidInterval(1 / 3, 2 / 3, 1, 1)) == pytest.approx(0.5)
    assert defuzzify(CentroidInterval(0.7, 0.9, 1, 1)) == pytest.approx(0.8)


@given(it2_sets())
def test_ekm_matches_exhaustive_assignments(s):
    lo_b, hi_b = centroid_bounds(s.xs, s.mu_lower, s.mu_upper)
    assert ekm_left(s)[0] == pytest.approx(lo_b, abs=1e-9)
    assert ekm_right(s)[0] == pytest.approx(hi_b, abs=1e-9)
    assert switch_bounds(s.xs, s.mu_lower, s.mu_upper) == pytest.approx((lo_b, hi_b), abs=1e-9)


@given(it2_sets(sparse=True))
def test_ekm_with_zero_lower_weights(s):
    lo_b, hi_b = centroid_bounds(s.xs, s.mu_lower, s.mu_upper)
    c = type_reduce(s)
    assert c.c_l == pytest.approx(lo_b, abs=1e-9) and c.c_r == pytest.approx(hi_b, abs=1e-9)


@given(it2_sets(max_n=40))
def test_ekm_terminates_within_n(s):
    for left in (True, False):
        assert _ekm(s, left)[2] <= len(s)


@given(it2_sets(), st.data())
def test_widening_upper_moves_bounds_outward(s, data):
    i = data.draw(st.integers(0, len(s) - 1))
    up = s.mu_upper.copy()
    up[i] = data.draw(st.floats(up[i], 1))
    w = DiscretizedIT2Set(s.xs, s.mu_lower, up)
    a, b = type_reduce(s), type_reduce(w)
    assert a.c_l <= a.c_r
    assert b.c_l <= a.c_l + 1e-12 and b.c_r >= a.c_r - 1e-12


@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=12))
def test_zero_fou_is_plain_centroid(mu):
    xs = np.linspace(0, 1, len(mu))
    s = DiscretizedIT2Set(xs, mu, mu)
    c = float((xs * np.array(mu)).sum() / sum(mu))
    assert ekm_left(s)[0] == pytest.approx(c, abs=1e-9) and ekm_right(s)[0] == pytest.approx(c, abs=1e-9)


def test_t1_extremes_are_shoulder_centroids():
    es = np.clip((XS - 0.75) / 0.25, 0, 1)  # ES midline rises from 0.75 to the apex at 1
    ns = np.clip((0.25 - XS) / 0.25, 0, 1)
    assert infer_t1([0, 0, 0]) == pytest.approx((XS * es).sum() / es.sum(), abs=1e-12)
    assert infer_t1([255, 255, 255]) == pytest.approx((XS * ns).sum() / ns.sum(), abs=1e-12)
    assert infer_t1([0, 0, 0]) == pytest.approx(1 - infer_t1([255, 255, 255]), abs=1e-12)


def test_it2_full_es_value_matches_oracle():
    lo, up = sample_vocabulary(SIM, XS)
    es = SIM.index("ES")
    a, b = switch_bounds(XS, lo[es], up[es])
    assert infer_it2([0, 0, 0]) == pytest.approx((a + b) / 2, abs=1e-9)


def test_zero_fou_pipeline_equals_t1():
    c, s = COLOR.midline(), SIM.midline()
    rng = np.random.default_rng(5)
    for d in rng.integers(0, 256, size=(200, 3)):
        assert infer_it2(list(d), color=c, similarity=s) == pytest.approx(infer_t1(list(d), color=c, similarity=s),
                                                                          abs=1e-9)


def test_engine_matches_scalar_reference():
    rng = np.random.default_rng(11)
    d = rng.integers(0, 256, size=(400, 3))
    it2, t1 = FLSEngine(), FLSEngine(type2=False)
    assert np.allclose(it2.evaluate(d), [infer_it2(list(x)) for x in d], atol=1e-12, rtol=0)
    assert np.allclose(t1.evaluate(d), [infer_t1(list(x)) for x in d], atol=1e-12, rtol=0)


def test_engine_output_bounded_on_grid():
    g = np.arange(0, 256, 15)
    d = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    for eng in (FLSEngine(), FLSEngine(type2=False)):
        v = eng.evaluate(d)
        assert np.all((v >= 0) & (v <= 1))
        assert eng(0, 0, 0) > eng(255, 255, 255)


def test_engine_batch_split_invariant():
    rng = np.random.default_rng(2)
    d = rng.integers(0, 256, size=(1000, 3))
    e = FLSEngine()
    whole = e.evaluate(d)
    parts = np.concatenate([e.evaluate(d[i:i + 77]) for i in range(0, 1000, 77)])
    assert np.array_equal(whole, parts)


def test_engine_no_rule_fired_is_reported():
    from fuzzsteg.fuzzy import make_vocabulary
    gap = make_vocabulary(["Low", "Medium", "High"],
                          [(0, 0, 0, 20, 30), (60, 90, 128, 166, 196), (145, 185, 255, 255, 255)], (0, 255))
    e = FLSEngine(color=gap)
    with pytest.raises(NoRuleFiredError, match=r"\(40, 0, 0\)"):
        e.evaluate(np.array([[0, 0, 0], [40, 0, 0]]))
    with pytest.raises(ValueError):
        e.evaluate(np.array([[256, 0, 0]]))
