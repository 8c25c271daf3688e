"""Effort-sharing shares, budget allocation and two-stage additivity."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from pballoc.allocation import (
    AbilityToPay,
    AllocationShares,
    Approach,
    Blended,
    EntityStats,
    EqualPerCapita,
    Grandfathering,
    ValueAdded,
    allocate_budget,
    ap_shares,
    ba_shares,
    blended_shares,
    compute_shares,
    epc_shares,
    gf_shares,
    shares_by_parent,
    two_stage_allocate,
    va_shares,
)
from pballoc.budgets import BudgetSpec
from pballoc.exceptions import (
    ComputeError,
    ConfigurationError,
    DegenerateEntity,
    DegenerateInput,
    InvalidInput,
    InvalidPressure,
    StructuralError,
)
from pballoc.fixtures import FixtureSpec, generate_fixture

WATER = BudgetSpec("freshwater", 4000.0, "km3")


def _stats(pop=None, ep=None, va=None, emp=None, ids=None):
    n = len(next(v for v in (pop, ep, va, emp, ids) if v is not None))
    ids = ids or [f"E{i}" for i in range(n)]
    return [
        EntityStats(
            ids[i],
            population=pop[i] if pop else 0.0,
            pressure={"p": ep[i]} if ep else {},
            value_added=va[i] if va else math.nan,
            employment=emp[i] if emp else math.nan,
        )
        for i in range(n)
    ]


# --- examples ----------------------------------------------------------------


def test_epc_equal_populations():
    assert epc_shares(_stats(pop=[5.0] * 4)).shares.tolist() == [0.25] * 4


def test_epc_two_to_eight():
    np.testing.assert_allclose(epc_shares(_stats(pop=[2.0, 8.0])).shares, [0.2, 0.8], rtol=1e-15)


def test_epc_zero_population():
    with pytest.raises(DegenerateInput):
        epc_shares(_stats(pop=[0.0, 0.0]))


def test_gf_single_entity():
    assert gf_shares(_stats(ep=[7.0]), "p").shares.tolist() == [1.0]


def test_gf_one_three():
    assert gf_shares(_stats(ep=[1.0, 3.0]), "p").shares.tolist() == [0.25, 0.75]


def test_gf_negative_pressure():
    with pytest.raises(InvalidPressure):
        gf_shares(_stats(ep=[1.0, -3.0]), "p")


def test_gf_missing_field():
    with pytest.raises(StructuralError):
        gf_shares(_stats(ep=[1.0, 3.0]), "other")


def test_gf_zero_total():
    with pytest.raises(DegenerateInput):
        gf_shares(_stats(ep=[0.0, 0.0]), "p")


def test_ap_identical_entities():
    s = ap_shares(_stats(va=[3.0] * 3, emp=[2.0] * 3))
    np.testing.assert_allclose(s.shares, [1 / 3] * 3, rtol=1e-15)


def test_ap_alpha_zero_is_employment():
    s = ap_shares(_stats(va=[1.0, 100.0], emp=[1.0, 3.0]), alpha=0.0)
    np.testing.assert_allclose(s.shares, [0.25, 0.75], rtol=1e-15)


def test_ap_hand_example():
    # 10 * (40/10)^-0.5 = 5, 10 * (90/10)^-0.5 = 10/3
    s = ap_shares(_stats(va=[40.0, 90.0], emp=[10.0, 10.0]), alpha=0.5)
    np.testing.assert_allclose(s.shares, [0.6, 0.4], rtol=1e-15)
    assert s.alpha == 0.5


def test_ap_missing_data_is_error_by_default():
    with pytest.raises(DegenerateEntity, match="E1"):
        ap_shares(_stats(va=[40.0, 90.0], emp=[10.0, 0.0]))


def test_ap_missing_data_redistributed_on_request():
    s = ap_shares(_stats(va=[40.0, 90.0, math.nan], emp=[10.0, 10.0, 5.0]), redistribute_missing=True)
    np.testing.assert_allclose(s.shares, [0.6, 0.4, 0.0], rtol=1e-15)


def test_va_equal():
    np.testing.assert_allclose(va_shares(_stats(va=[2.0, 2.0])).shares, [0.5, 0.5])


def test_va_thirty_seventy():
    np.testing.assert_allclose(va_shares(_stats(va=[30.0, 70.0])).shares, [0.3, 0.7], rtol=1e-15)


def test_va_negative():
    with pytest.raises(InvalidInput):
        va_shares(_stats(va=[30.0, -70.0]))


def test_high_va_sector_gets_more_under_va_than_ap():
    stats = _stats(va=[900.0, 100.0], emp=[100.0, 100.0])
    assert va_shares(stats).share_of("E0") > ap_shares(stats).share_of("E0")


def test_blend_degenerate_weights():
    epc = epc_shares(_stats(pop=[2.0, 8.0]))
    gf = gf_shares(_stats(ep=[4.0, 6.0]), "p")
    mixed = blended_shares([(epc, 1.0), (gf, 0.0)])
    np.testing.assert_array_equal(mixed.shares, epc.shares)


def test_blend_two_component_half_half():
    epc = epc_shares(_stats(pop=[2.0, 8.0]))
    gf = gf_shares(_stats(ep=[4.0, 6.0]), "p")
    np.testing.assert_allclose(blended_shares([(epc, 0.5), (gf, 0.5)]).shares, [0.3, 0.7], rtol=1e-15)


def test_blend_different_entity_sets():
    a = epc_shares(_stats(pop=[1.0, 1.0], ids=["A", "B"]))
    b = epc_shares(_stats(pop=[1.0, 1.0], ids=["A", "C"]))
    with pytest.raises(StructuralError):
        blended_shares([(a, 0.5), (b, 0.5)])


def test_blend_aligns_order():
    a = epc_shares(_stats(pop=[1.0, 3.0], ids=["A", "B"]))
    b = epc_shares(_stats(pop=[1.0, 3.0], ids=["B", "A"]))
    mixed = blended_shares([(a, 0.5), (b, 0.5)])
    assert mixed.as_dict() == {"A": 0.5, "B": 0.5}


def test_blend_weights_must_sum_to_one():
    a = epc_shares(_stats(pop=[1.0, 3.0]))
    with pytest.raises(ConfigurationError):
        blended_shares([(a, 0.5), (a, 0.4)])
    with pytest.raises(ConfigurationError):
        blended_shares([(a, 1.5), (a, -0.5)])


def test_freshwater_equal_weight_mean():
    # per-capita budgets 150, 534, 804 for a unit-population entity out of 1e9
    assert (150 + 534 + 804) / 3 == 496
    ids = ["X", "REST"]
    parts = [AllocationShares(a, ids, [v / 4e12 * 1e9, 1 - v / 4e12 * 1e9]) for a, v in (("AP", 150), ("EPC", 534), ("GF", 804))]
    ba = blended_shares([(p, 1 / 3) for p in parts])
    per_capita = ba.share_of("X") * 4000e9 / 1e9
    assert per_capita == pytest.approx(496, rel=1e-12)


def test_allocate_budget_share_one():
    s = AllocationShares(Approach.EPC, ["A"], [1.0])
    assert allocate_budget(s, WATER)[0].budget == 4000.0


def test_allocate_budget_quarter():
    s = AllocationShares(Approach.GF, ["A", "B"], [0.25, 0.75])
    out = allocate_budget(s, WATER, population={"A": 10.0})
    assert [b.budget for b in out] == [1000.0, 3000.0]
    assert out[0].budget_per_capita == 100.0 and out[1].budget_per_capita is None
    assert out[0].unit == "km3" and out[0].boundary_name == "freshwater"


def test_allocate_budget_needs_resolved_boundary():
    s = AllocationShares(Approach.EPC, ["A"], [1.0])
    with pytest.raises(ConfigurationError):
        allocate_budget(s, 4000.0)


def test_shares_validation():
    with pytest.raises(InvalidInput):
        AllocationShares(Approach.EPC, ["A", "B"], [0.5, 0.6])
    with pytest.raises(InvalidInput):
        AllocationShares(Approach.EPC, ["A", "B"], [1.5, -0.5])
    with pytest.raises(StructuralError):
        AllocationShares(Approach.EPC, ["A", "A"], [0.5, 0.5])


def test_share_of_unknown_entity():
    with pytest.raises(StructuralError):
        AllocationShares(Approach.EPC, ["A"], [1.0]).share_of("B")


def test_approach_parse():
    assert Approach.parse("ba") is Approach.BA
    assert Approach.parse(Approach.GF) is Approach.GF
    with pytest.raises(ConfigurationError):
        Approach.parse("xx")


def test_compute_shares_needs_pressure_for_gf():
    with pytest.raises(ConfigurationError):
        compute_shares(_stats(pop=[1.0]), "GF")


# --- properties ----------------------------------------------------------------

positive = st.floats(min_value=1e-3, max_value=1e9, allow_nan=False)


@st.composite
def entity_sets(draw, min_size=1, max_size=40):
    n = draw(st.integers(min_size, max_size))
    values = st.lists(positive, min_size=n, max_size=n)
    return _stats(pop=draw(values), ep=draw(values), va=draw(values), emp=draw(values))


@given(entity_sets(), st.sampled_from(list(Approach)))
def test_shares_sum_to_one_and_nonnegative(stats, approach):
    s = compute_shares(stats, approach, pressure_field="p")
    assert abs(math.fsum(s.shares) - 1.0) <= 1e-12
    assert (s.shares >= 0).all()


@given(entity_sets(min_size=2, max_size=10), st.randoms(use_true_random=False))
def test_permutation_equivariance(stats, rnd):
    perm = list(stats)
    rnd.shuffle(perm)
    for approach in Approach:
        a = compute_shares(stats, approach, pressure_field="p").as_dict()
        b = compute_shares(perm, approach, pressure_field="p").as_dict()
        for k in a:
            assert a[k] == pytest.approx(b[k], rel=1e-12, abs=1e-300)


@given(entity_sets(max_size=10))
def test_epc_and_ap_ignore_pressure(stats):
    other = [EntityStats(s.entity_id, s.population, {"p": 1.0}, s.value_added, s.employment) for s in stats]
    for approach in (Approach.EPC, Approach.AP):
        a = compute_shares(stats, approach)
        b = compute_shares(other, approach)
        np.testing.assert_array_equal(a.shares, b.shares)


@given(entity_sets(max_size=10))
def test_equal_weight_ba_is_arithmetic_mean(stats):
    ba = ba_shares(stats, "p")
    parts = np.vstack([epc_shares(stats).shares, gf_shares(stats, "p").shares, ap_shares(stats).shares])
    np.testing.assert_array_equal(ba.shares, parts.mean(axis=0))


@given(entity_sets(max_size=10), st.floats(min_value=1e-3, max_value=1e6))
def test_allocation_is_homogeneous(stats, c):
    s = epc_shares(stats)
    base = [b.budget for b in allocate_budget(s, WATER)]
    scaled = [b.budget for b in allocate_budget(s, BudgetSpec("freshwater", 4000.0 * c, "km3"))]
    np.testing.assert_allclose(scaled, np.array(base) * c, rtol=1e-13)


@given(entity_sets(max_size=40), st.sampled_from(list(Approach)))
def test_budgets_sum_to_boundary(stats, approach):
    out = allocate_budget(compute_shares(stats, approach, pressure_field="p"), WATER)
    assert math.fsum(b.budget for b in out) == pytest.approx(4000.0, rel=1e-9)


# --- two-stage -------------------------------------------------------------------


def _sector_stats(seed):
    fx = generate_fixture(FixtureSpec(n_regions=2, n_sectors=3, seed=seed))
    return fx.stats, fx.sector_stats


def test_two_stage_one_country_one_sector():
    country = AllocationShares(Approach.EPC, ["C"], [1.0])
    within = {"C": AllocationShares(Approach.GF, ["C:s"], [1.0])}
    out = two_stage_allocate(country, within, WATER)
    assert out[0].budget == 4000.0 and out[0].parent == "C"


def _aggregate(sectors, field):
    """Country stats whose pressure is the sum of their sectors' pressure."""
    totals = {}
    for s in sectors:
        totals[s.parent] = totals.get(s.parent, 0.0) + s.pressure[field]
    return [EntityStats(c, 1.0, {field: v}) for c, v in totals.items()]


def test_two_stage_gf_equals_direct_gf():
    # the identity needs the country parameter to aggregate the sector one;
    # country PBA also carries household pressure, which sectors do not
    _, sectors = _sector_stats(5)
    field = "co2_pba"
    country = gf_shares(_aggregate(sectors, field), field)
    within = shares_by_parent(sectors, "GF", pressure_field=field)
    two_stage = {b.entity_id: b.budget for b in two_stage_allocate(country, within, WATER)}
    direct = {b.entity_id: b.budget for b in allocate_budget(gf_shares(sectors, field), WATER)}
    for k, v in direct.items():
        assert two_stage[k] == pytest.approx(v, rel=1e-12)


def test_two_stage_epc_then_va_is_product_of_ratios():
    stats, sectors = _sector_stats(9)
    country = epc_shares(stats)
    within = shares_by_parent(sectors, "VA")
    out = two_stage_allocate(country, within, WATER)
    pop = {s.entity_id: s.population for s in stats}
    va = {s.entity_id: s.value_added for s in sectors}
    for b in out:
        siblings = [s for s in sectors if s.parent == b.parent]
        expected = pop[b.parent] / sum(pop.values()) * va[b.entity_id] / sum(s.value_added for s in siblings) * 4000.0
        assert b.budget == pytest.approx(expected, rel=1e-12)


def test_two_stage_unknown_country():
    country = AllocationShares(Approach.EPC, ["C"], [1.0])
    with pytest.raises(StructuralError):
        two_stage_allocate(country, {"D": AllocationShares(Approach.GF, ["D:s"], [1.0])}, WATER)


def test_two_stage_duplicate_child():
    country = AllocationShares(Approach.EPC, ["C", "D"], [0.5, 0.5])
    within = {
        "C": AllocationShares(Approach.GF, ["x"], [1.0]),
        "D": AllocationShares(Approach.GF, ["x"], [1.0]),
    }
    with pytest.raises(StructuralError):
        two_stage_allocate(country, within, WATER)


def test_shares_by_parent_needs_parent():
    with pytest.raises(StructuralError):
        shares_by_parent(_stats(va=[1.0]), "VA")


@given(st.integers(0, 2**32 - 1), st.sampled_from(["GF", "AP", "VA"]))
def test_two_stage_sums_to_country_budget(seed, within_approach):
    stats, sectors = _sector_stats(seed)
    country = gf_shares(stats, "ghg_cba")
    within = shares_by_parent(sectors, within_approach, pressure_field="ghg_cba")
    out = two_stage_allocate(country, within, WATER)
    for b in allocate_budget(country, WATER):
        parts = [s.budget for s in out if s.parent == b.entity_id]
        assert abs(math.fsum(parts) - b.budget) <= 1e-12 * b.budget


def test_allocate_budget_sum_guard(monkeypatch):
    s = AllocationShares(Approach.EPC, ["A", "B"], [0.5, 0.5])
    object.__setattr__(s, "shares", np.array([0.5, 0.6]))
    with pytest.raises(ComputeError):
        allocate_budget(s, WATER)


# --- estimators ------------------------------------------------------------------


def test_estimators_params_and_clone():
    est = Blended(pressure_field="co2_cba", weights={"EPC": 0.5, "GF": 0.5}, alpha=0.3)
    params = est.get_params()
    assert params["pressure_field"] == "co2_cba" and params["alpha"] == 0.3
    assert clone(est).get_params()["weights"] == {"EPC": 0.5, "GF": 0.5}
    assert AbilityToPay(alpha=0.7).set_params(alpha=0.2).alpha == 0.2


@pytest.mark.parametrize(
    "est, approach",
    [
        (EqualPerCapita(), "EPC"),
        (Grandfathering(pressure_field="co2_cba"), "GF"),
        (AbilityToPay(), "AP"),
        (ValueAdded(), "VA"),
        (Blended(pressure_field="co2_cba"), "BA"),
    ],
)
def test_estimators_match_functions(small_fixture, est, approach):
    est.fit(small_fixture.stats)
    expected = compute_shares(small_fixture.stats, approach, pressure_field="co2_cba")
    np.testing.assert_array_equal(est.shares_.shares, expected.shares)
    budgets = est.predict(WATER)
    np.testing.assert_allclose(budgets, expected.shares * 4000.0, rtol=1e-15)
    assert [b.entity_id for b in est.allocate(WATER)] == list(est.entity_ids_)


def test_estimator_unfitted():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        EqualPerCapita().predict(WATER)
