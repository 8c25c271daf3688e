"""MRIO core: coefficients, Leontief inverse and footprint accounts."""

import numpy as np
import pytest
from conftest import power_series_inverse, random_productive, table_from_coefficients
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from pballoc.exceptions import (
    ConfigurationError,
    DegenerateEntity,
    DegenerateInput,
    InvalidInput,
    InvalidPressure,
    NonProductiveEconomy,
    StructuralError,
)
from pballoc.fixtures import FixtureSpec, generate_fixture
from pballoc.mrio import (
    ExtensionAccount,
    FootprintModel,
    LeontiefSolver,
    MrioTable,
    footprint_accounts,
    leontief_inverse,
    normalized_comparison,
    per_capita,
    technical_coefficients,
)


def _one_region(Z, x):
    Z, x = np.asarray(Z, float), np.asarray(x, float)
    Y = (x - Z.sum(axis=1))[:, None]
    sectors = tuple(f"s{i}" for i in range(len(x)))
    return MrioTable(("R",), sectors, Z, Y, x)


# --- technical coefficients -------------------------------------------------


def test_coefficients_zero_flows():
    A = technical_coefficients(_one_region(np.zeros((3, 3)), [5.0, 6.0, 7.0]))
    assert np.array_equal(A, np.zeros((3, 3)))


def test_coefficients_scalar():
    A = technical_coefficients(_one_region([[40.0]], [100.0]))
    assert A[0, 0] == pytest.approx(0.4, abs=1e-15)


def test_coefficients_two_sector_hand_values(two_sector_table):
    A = technical_coefficients(two_sector_table)
    np.testing.assert_allclose(A, [[0.1, 0.1], [0.3, 0.0]], rtol=0, atol=1e-15)


def test_zero_output_column_is_zero():
    Z = np.array([[0.0, 0.0], [0.0, 0.0]])
    table = MrioTable(("R",), ("a", "b"), Z, np.array([[10.0], [0.0]]), np.array([10.0, 0.0]))
    A = technical_coefficients(table)
    assert np.all(A[:, 1] == 0)


# --- Leontief inverse --------------------------------------------------------


def test_leontief_identity_for_zero_a():
    np.testing.assert_array_equal(leontief_inverse(np.zeros((4, 4))), np.eye(4))


def test_leontief_scalar_geometric_series():
    assert leontief_inverse(np.array([[0.4]]))[0, 0] == pytest.approx(1 / 0.6, rel=1e-15)


def test_leontief_two_sector_hand_values(two_sector_table):
    # det(I - A) = 0.9 * 1 - 0.1 * 0.3 = 0.87
    L = leontief_inverse(technical_coefficients(two_sector_table))
    expected = np.array([[1.0, 0.1], [0.3, 0.9]]) / 0.87
    np.testing.assert_allclose(L, expected, rtol=1e-14)


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_leontief_matches_power_series(seed):
    rng = np.random.default_rng(seed)
    A = random_productive(6, rng)
    L = leontief_inverse(A)
    np.testing.assert_allclose(L, power_series_inverse(A), rtol=1e-9, atol=1e-12)
    assert np.max(np.abs((np.eye(6) - A) @ L - np.eye(6))) <= 1e-9


def test_non_productive_names_columns():
    A = np.array([[0.5, 0.6], [0.6, 0.5]])  # spectral radius 1.1
    with pytest.raises(NonProductiveEconomy) as info:
        leontief_inverse(A)
    assert info.value.column_sums == {0: pytest.approx(1.1), 1: pytest.approx(1.1)}
    assert "column sums" in str(info.value)


def test_singular_matrix_rejected():
    with pytest.raises(NonProductiveEconomy):
        leontief_inverse(np.array([[1.0, 0.0], [0.0, 0.2]]))


def test_column_sum_above_one_but_productive_is_accepted():
    # column 0 sums to 1.05 but rho < 1
    A = np.array([[0.05, 0.0], [1.0, 0.1]])
    L = leontief_inverse(A)
    np.testing.assert_allclose(L, power_series_inverse(A), rtol=1e-10, atol=1e-14)


def test_sparse_and_dense_paths_agree():
    rng = np.random.default_rng(3)
    A = random_productive(40, rng)
    A[rng.uniform(size=A.shape) < 0.95] = 0.0
    sparse = LeontiefSolver(A, sparse="auto")
    dense = LeontiefSolver(A, sparse=False)
    assert sparse.sparse and not dense.sparse
    B = rng.uniform(size=(40, 3))
    np.testing.assert_allclose(sparse.solve(B), dense.solve(B), rtol=1e-12)
    np.testing.assert_allclose(sparse.solve_transposed(B[:, 0]), dense.solve_transposed(B[:, 0]), rtol=1e-12)


# --- footprint accounts ------------------------------------------------------


def _ext(table, f, f_hh=None, unit="kt CO2", name="co2"):
    f_hh = np.zeros(table.n_regions) if f_hh is None else f_hh
    return ExtensionAccount(name, unit, np.asarray(f, float), np.asarray(f_hh, float))


def _brute_force_flows(table, f):
    """E_rs by summing every supply-chain round explicitly."""
    A = technical_coefficients(table)
    L = power_series_inverse(A)
    q = np.divide(f, table.x, out=np.zeros_like(f), where=table.x != 0)
    n, m = table.n_regions, table.n_sectors
    E = np.zeros((n, n))
    for r in range(n):
        for s in range(n):
            for i in range(r * m, (r + 1) * m):
                for j in range(n * m):
                    E[r, s] += q[i] * L[i, j] * table.Y[j, s]
    return E


def test_autarkic_table_gives_diagonal_flows():
    fx = generate_fixture(FixtureSpec(n_regions=2, n_sectors=2, trade_intensity=0.0, seed=4))
    acc = footprint_accounts(fx.table, fx.extensions[0])
    assert acc.E[0, 1] == 0 and acc.E[1, 0] == 0
    np.testing.assert_allclose(acc.pba, acc.cba, rtol=1e-12)


def test_single_export_flow_matches_enumeration():
    # region A sector 1 ships intermediate inputs to region B sector 2
    Z = np.array(
        [
            [10.0, 5.0, 0.0, 8.0],
            [4.0, 6.0, 0.0, 0.0],
            [0.0, 0.0, 3.0, 2.0],
            [0.0, 0.0, 1.0, 5.0],
        ]
    )
    Y = np.array([[60.0, 0.0], [50.0, 0.0], [0.0, 40.0], [0.0, 70.0]])
    x = Z.sum(axis=1) + Y.sum(axis=1)
    table = MrioTable(("A", "B"), ("s1", "s2"), Z, Y, x)
    f = np.array([12.0, 3.0, 7.0, 2.0])
    acc = footprint_accounts(table, _ext(table, f))
    oracle = _brute_force_flows(table, f)
    assert acc.E[0, 1] > 0 and oracle[0, 1] > 0
    np.testing.assert_allclose(acc.E, oracle, rtol=1e-9)
    assert acc.E[1, 0] == 0


@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(1, 4), st.integers(1, 3))
def test_flows_match_power_series_and_conserve(seed, n, m):
    fx = generate_fixture(FixtureSpec(n_regions=n, n_sectors=m, seed=seed, trade_intensity=0.3))
    for ext in fx.extensions:
        acc = footprint_accounts(fx.table, ext)
        np.testing.assert_allclose(acc.E, _brute_force_flows(fx.table, ext.f), rtol=1e-9)
        total = ext.f.sum() + ext.f_hh.sum()
        assert acc.pba.sum() == pytest.approx(total, rel=1e-9)
        assert acc.cba.sum() == pytest.approx(total, rel=1e-9)
        np.testing.assert_allclose(acc.pba, acc.E.sum(axis=1) + ext.f_hh, rtol=1e-12)
        np.testing.assert_allclose(acc.cba, acc.E.sum(axis=0) + ext.f_hh, rtol=1e-12)
        assert acc.sectoral_cba.sum() == pytest.approx(ext.f.sum(), rel=1e-9)


def test_scaling_by_two_is_exact(small_fixture):
    ext = small_fixture.extensions[0]
    base = footprint_accounts(small_fixture.table, ext)
    doubled = footprint_accounts(small_fixture.table, ext.scaled(2.0))
    for name in ("E", "pba", "cba", "sectoral_cba"):
        np.testing.assert_array_equal(getattr(doubled, name), 2.0 * getattr(base, name))


def test_scaling_general_factor(small_fixture):
    ext = small_fixture.extensions[1]
    base = footprint_accounts(small_fixture.table, ext)
    scaled = footprint_accounts(small_fixture.table, ext.scaled(0.37))
    np.testing.assert_allclose(scaled.E, 0.37 * base.E, rtol=1e-13)


def test_sectoral_pba_is_direct_pressure(small_fixture):
    ext = small_fixture.extensions[0]
    acc = footprint_accounts(small_fixture.table, ext)
    np.testing.assert_array_equal(acc.sectoral_pba, ext.f)


def test_sectoral_cba_uses_multipliers(two_sector_table):
    f = np.array([5.0, 8.0])
    acc = footprint_accounts(two_sector_table, _ext(two_sector_table, f))
    q = f / two_sector_table.x
    L = np.array([[1.0, 0.1], [0.3, 0.9]]) / 0.87
    np.testing.assert_allclose(acc.sectoral_cba, (q @ L) * two_sector_table.Y.sum(axis=1), rtol=1e-14)


def test_household_pressure_enters_both_accounts(two_sector_table):
    acc = footprint_accounts(two_sector_table, _ext(two_sector_table, [1.0, 1.0], [4.0]))
    assert acc.pba[0] == pytest.approx(6.0)
    assert acc.cba[0] == pytest.approx(6.0)


def test_unit_mismatch_is_configuration_error(two_sector_table):
    with pytest.raises(ConfigurationError):
        footprint_accounts(two_sector_table, _ext(two_sector_table, [1.0, 1.0]), unit="Mm3")


def test_unit_alias_accepted(two_sector_table):
    acc = footprint_accounts(two_sector_table, _ext(two_sector_table, [1.0, 1.0], unit="Mm3", name="w"), unit="Mm³")
    assert acc.unit == "Mm3"


def test_extension_length_mismatch(two_sector_table):
    with pytest.raises(StructuralError):
        footprint_accounts(two_sector_table, _ext(two_sector_table, [1.0, 1.0, 1.0]))


def test_pressure_in_zero_output_sector_rejected():
    table = MrioTable(("R",), ("a", "b"), np.zeros((2, 2)), np.array([[10.0], [0.0]]), np.array([10.0, 0.0]))
    with pytest.raises(InvalidPressure):
        footprint_accounts(table, _ext(table, [1.0, 2.0]))


def test_zero_output_sector_has_zero_intensity():
    table = MrioTable(("R",), ("a", "b"), np.zeros((2, 2)), np.array([[10.0], [0.0]]), np.array([10.0, 0.0]))
    acc = footprint_accounts(table, _ext(table, [3.0, 0.0]))
    assert acc.intensity[1] == 0
    assert acc.cba[0] == pytest.approx(3.0)


# --- table validation --------------------------------------------------------


def test_row_balance_violation_names_rows(two_sector_table):
    x = np.array([100.0, 250.0])
    with pytest.raises(StructuralError, match=r"rows: 1 \('R', 's2'\)"):
        MrioTable(("R",), ("s1", "s2"), two_sector_table.Z, two_sector_table.Y, x)


def test_negative_flow_rejected():
    with pytest.raises(InvalidInput):
        MrioTable(("R",), ("a",), np.array([[-1.0]]), np.array([[11.0]]), np.array([10.0]))


def test_negative_final_demand_accepted():
    Z = np.array([[2.0, 1.0], [1.0, 1.0]])
    Y = np.array([[10.0], [-0.5]])
    table = MrioTable(("R",), ("a", "b"), Z, Y, Z.sum(axis=1) + Y.sum(axis=1))
    assert table.Y[1, 0] == -0.5


def test_nan_rejected():
    with pytest.raises(InvalidInput):
        MrioTable(("R",), ("a",), np.array([[np.nan]]), np.array([[1.0]]), np.array([1.0]))


def test_empty_sector_list_is_structural():
    with pytest.raises(StructuralError):
        MrioTable(("R",), (), np.zeros((0, 0)), np.zeros((0, 1)), np.zeros(0))


def test_table_arrays_are_read_only(two_sector_table):
    with pytest.raises(ValueError):
        two_sector_table.Z[0, 0] = 1.0


# --- per capita and normalization --------------------------------------------


def test_per_capita_world_example():
    assert round(per_capita([43e9], [7.7e9])[0], 2) == 5.58


def test_per_capita_zero_value_any_population():
    assert per_capita([0.0, 0.0], [0.0, 5.0]).tolist() == [0.0, 0.0]


def test_per_capita_zero_population_with_value():
    with pytest.raises(DegenerateEntity):
        per_capita([1.0], [0.0])


@given(st.lists(st.tuples(st.floats(0, 1e12), st.floats(1, 1e10)), min_size=1, max_size=20))
def test_per_capita_matches_loop(pairs):
    values, pop = zip(*pairs)
    loop = [v / p for v, p in pairs]
    assert per_capita(values, pop).tolist() == loop


def test_normalized_all_equal():
    np.testing.assert_array_equal(normalized_comparison([2.0, 2.0, 2.0], "country_mean"), [1.0, 1.0, 1.0])


def test_normalized_country_mean():
    np.testing.assert_allclose(normalized_comparison([2.0, 4.0], "country_mean"), [2 / 3, 4 / 3], rtol=1e-15)


def test_normalized_population_weighted():
    r = normalized_comparison([2.0, 4.0], "global_population_weighted", population=[1.0, 3.0])
    np.testing.assert_allclose(r, [2 / 3.5, 4 / 3.5], rtol=1e-15)


def test_normalized_subset():
    r = normalized_comparison([2.0, 4.0, 9.0], "subset_mean", subset=[0, 1])
    np.testing.assert_allclose(r, [2 / 3, 4 / 3, 3.0], rtol=1e-15)


def test_normalized_empty_subset():
    with pytest.raises(ConfigurationError):
        normalized_comparison([2.0, 4.0], "subset_mean", subset=[])


def test_normalized_zero_average():
    with pytest.raises(DegenerateInput):
        normalized_comparison([0.0, 0.0], "country_mean")


# --- estimator ---------------------------------------------------------------


def test_footprint_model_estimator_api(small_fixture):
    model = FootprintModel(sparse=False)
    assert model.get_params() == {"sparse": False}
    assert clone(model).get_params() == {"sparse": False}
    accounts = model.fit(small_fixture.table).transform(small_fixture.extensions)
    assert [a.name for a in accounts] == [e.name for e in small_fixture.extensions]
    one = model.transform(small_fixture.extensions[0])
    np.testing.assert_array_equal(one.E, accounts[0].E)
    np.testing.assert_allclose(model.leontief_, np.linalg.inv(np.eye(6) - model.A_), rtol=1e-10)


def test_footprint_model_unfitted():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        FootprintModel().transform([])


def test_footprint_model_rejects_non_table():
    with pytest.raises(InvalidInput):
        FootprintModel().fit(np.eye(2))


def test_table_from_coefficients_round_trip():
    rng = np.random.default_rng(11)
    A = random_productive(4, rng)
    table = table_from_coefficients(A, rng.uniform(1, 5, size=(4, 2)), ("A", "B"), ("s1", "s2"))
    np.testing.assert_allclose(technical_coefficients(table), A, rtol=1e-12)
