"""Orbit catalogs, trace combs, and dynamical zeta functions."""

from itertools import product

import numpy as np
import pytest

from flatdet.errors import AbscissaError, ShapeError
from flatdet.orbits import (
    ClosedOrbit,
    cat_map_catalog,
    divisors,
    guillemin_comb,
    mobius,
    orbit_dirichlet,
    orbit_log_sdet,
    orbit_log_zeta_sum,
    ruelle_zeta_truncated,
    sdet_zeta_identity_defect,
    subshift_catalog,
    subshift_log_zeta_truncated,
    zeta_closed_form_cat,
    zeta_transfer_determinant,
)

CAT = [[2, 1], [1, 1]]
GOLDEN = [[1, 1], [1, 0]]


def brute_mobius(n):
    # independent sieve
    factors = 0
    m = n
    for p in range(2, n + 1):
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            factors += 1
    return (-1) ** factors


# ---------------------------------------------------------------------------
# Cat-map catalog
# ---------------------------------------------------------------------------

def test_cat_map_counts():
    catalog = cat_map_catalog(CAT, 4)
    assert catalog.meta["fixed_counts"] == [1, 5, 16, 45]
    assert catalog.meta["primitive_counts"] == [1, 2, 5, 10]


def test_cat_map_counts_vs_matrix_power_oracle():
    # independent oracle: integer matrix powers and Moebius inversion
    catalog = cat_map_catalog(CAT, 12)
    A = np.array(CAT, dtype=object)
    power = np.eye(2, dtype=object)
    fixed = []
    for n in range(1, 13):
        power = power @ A
        fixed.append(int(power[0, 0] + power[1, 1]) - 2)
    assert catalog.meta["fixed_counts"] == fixed
    for n in range(1, 13):
        prim = sum(brute_mobius(n // d) * fixed[d - 1] for d in divisors(n)) // n
        assert catalog.meta["primitive_counts"][n - 1] == prim
        assert prim >= 0 and fixed[n - 1] >= 1


def test_cat_map_moebius_reconstruction():
    catalog = cat_map_catalog(CAT, 30)
    fixed = catalog.meta["fixed_counts"]
    prim = catalog.meta["primitive_counts"]
    for n in range(1, 31):
        assert sum(d * prim[d - 1] for d in divisors(n)) == fixed[n - 1]


def test_cat_map_rejects_non_hyperbolic():
    with pytest.raises(ShapeError):
        cat_map_catalog([[1, 1], [0, 1]], 4)  # parabolic
    with pytest.raises(ShapeError):
        cat_map_catalog([[2, 1], [1, 1]], 4) if False else cat_map_catalog(
            [[0, 1], [-1, 0]], 4)  # elliptic


def test_orbit_invariants():
    with pytest.raises(ShapeError):
        ClosedOrbit(period=2.5, primitive_period=1.0, count=1, holonomy=1.0)
    with pytest.raises(ShapeError):
        ClosedOrbit(period=1.0, primitive_period=1.0, count=1, holonomy=1.0,
                    poincare=(1.0, 1.0))


# ---------------------------------------------------------------------------
# Guillemin comb and the collapse identity
# ---------------------------------------------------------------------------

def test_comb_weight_period_one():
    catalog = cat_map_catalog(CAT, 1)
    atoms = guillemin_comb(catalog, 0)
    assert len(atoms) == 1
    T, weight = atoms[0]
    assert T == 1.0
    assert weight == pytest.approx(1.0)  # 1 / N_1 with N_1 = 1


def test_comb_wedge_symmetry():
    # det P = 1 makes the k = 2 comb equal the k = 0 comb
    catalog = cat_map_catalog(CAT, 6)
    a0 = guillemin_comb(catalog, 0)
    a2 = guillemin_comb(catalog, 2)
    for (t0, w0), (t2, w2) in zip(a0, a2):
        assert t0 == t2
        assert w0 == pytest.approx(w2, rel=1e-12)


@pytest.mark.parametrize("matrix", [CAT, [[3, 1], [2, 1]], [[2, 3], [1, 2]]])
def test_collapse_identity_exact_integers(matrix):
    # (1 - tr A^n + det A^n) = -|det(I - A^n)| exactly, in integer arithmetic
    A = np.array(matrix, dtype=object)
    power = np.eye(2, dtype=object)
    for n in range(1, 31):
        power = power @ A
        tr_n = int(power[0, 0] + power[1, 1])
        det_n = int(power[0, 0] * power[1, 1] - power[0, 1] * power[1, 0])
        assert det_n == 1
        alternating = 1 - tr_n + det_n
        det_one_minus = int((1 - power[0, 0]) * (1 - power[1, 1])
                            - power[0, 1] * power[1, 0])
        assert alternating == det_one_minus  # = 2 - tr_n, negative
        assert alternating == -(tr_n - 2)


def test_comb_missing_poincare_data():
    catalog = subshift_catalog(GOLDEN, [1.0, 1.0], 4)
    with pytest.raises(ShapeError, match="Poincare"):
        guillemin_comb(catalog, 0)


# ---------------------------------------------------------------------------
# Subshift catalog
# ---------------------------------------------------------------------------

def periodic_points_from_catalog(catalog, n):
    """N_n reconstructed from classes: each primitive class of word length
    n' = n/j contributes count * n' periodic words of length n."""
    acc = 0
    for o in catalog.orbits:
        if o.word_length == n:
            j = round(o.period / o.primitive_period)
            acc += o.count * (n // j)
    return acc


def test_golden_mean_lucas_counts():
    catalog = subshift_catalog(GOLDEN, [1.0, 1.0], 5)
    lucas = [1, 3, 4, 7, 11]
    for n in range(1, 6):
        assert periodic_points_from_catalog(catalog, n) == lucas[n - 1]


def test_golden_mean_counts_vs_enumeration():
    # brute-force word enumeration oracle against trace counts
    M = np.array(GOLDEN)
    catalog = subshift_catalog(GOLDEN, [1.0, 1.0], 8)
    for n in range(1, 9):
        count = 0
        for word in product(range(2), repeat=n):
            if all(M[word[i], word[(i + 1) % n]] for i in range(n)):
                count += 1
        assert count == int(round(np.trace(np.linalg.matrix_power(M, n))))
        assert periodic_points_from_catalog(catalog, n) == count


def test_subshift_roof_birkhoff_sums():
    catalog = subshift_catalog(GOLDEN, [1.0, 2.0], 4)
    periods = sorted(o.primitive_period for o in catalog.orbits
                     if o.period == o.primitive_period)
    # fixed point on state 0 has roof 1; the 2-cycle 01 has roof 3
    assert 1.0 in periods
    assert 3.0 in periods
    assert 2.0 not in periods  # state 1 has no self-loop


def test_subshift_enumeration_cap():
    with pytest.raises(ShapeError, match="capped"):
        subshift_catalog(GOLDEN, [1.0, 1.0], 40)


def test_subshift_nonprimitive_warns():
    with pytest.warns(UserWarning, match="not primitive"):
        subshift_catalog([[1, 0], [0, 1]], [1.0, 1.0], 3)


# ---------------------------------------------------------------------------
# Zeta functions: product, sum, closed form, transfer determinant
# ---------------------------------------------------------------------------

def test_single_orbit_product():
    catalog = cat_map_catalog(CAT, 1)
    lam = 2.0
    val = ruelle_zeta_truncated(catalog, lam)
    assert val == pytest.approx(1.0 - np.exp(-lam))


def test_product_vs_log_sum_consistency():
    catalog = cat_map_catalog(CAT, 60)
    mu = np.exp(catalog.expansion_rate)
    for alpha in (0.0, np.pi, 2 * np.pi / 3):
        catalog_a = cat_map_catalog(CAT, 60, alpha)
        lam = np.log(mu) + 0.5
        log_prod = np.log(ruelle_zeta_truncated(catalog_a, lam))
        log_sum = orbit_log_zeta_sum(catalog_a, lam)
        assert abs(log_prod - log_sum) <= 1e-10


def test_truncated_vs_closed_form():
    lam = np.log((3 + np.sqrt(5)) / 2) + 0.55
    for alpha in (np.pi, 2 * np.pi / 3, np.pi / 2):
        catalog = cat_map_catalog(CAT, 60, alpha)
        truncated = ruelle_zeta_truncated(catalog, lam)
        closed = zeta_closed_form_cat(CAT, alpha, lam)
        assert abs(truncated - closed) <= 1e-8


def test_closed_form_reference_values():
    assert zeta_closed_form_cat(CAT, np.pi, 0.0) == pytest.approx(1.25, abs=1e-12)
    assert zeta_closed_form_cat(CAT, 2 * np.pi / 3, 0.0) == pytest.approx(
        4.0 / 3.0, abs=1e-12)
    with pytest.raises(AbscissaError):
        zeta_closed_form_cat(CAT, 0.0, 0.0)  # double pole at z = 1


def test_orbit_log_sdet_matches_zeta():
    lam = 1.5
    catalog = cat_map_catalog(CAT, 60, np.pi)
    lhs = orbit_log_sdet(catalog, lam)
    rhs = -orbit_log_zeta_sum(catalog, lam)  # (-1)^m log zeta with m = 1
    assert abs(lhs - rhs) <= 1e-10
    closed = zeta_closed_form_cat(CAT, np.pi, lam)
    assert abs(lhs - (-np.log(closed))) <= 1e-8


def test_orbit_log_sdet_vanishes_at_large_lambda():
    catalog = cat_map_catalog(CAT, 40, np.pi)
    assert abs(orbit_log_sdet(catalog, 40.0)) <= 1e-15


def test_abscissa_enforcement():
    catalog = cat_map_catalog(CAT, 20, np.pi)
    with pytest.raises(AbscissaError) as err:
        orbit_log_sdet(catalog, 0.5)
    assert err.value.required_re_lambda == pytest.approx(
        catalog.expansion_rate + 0.3)


def test_truncation_tail_bound():
    lam = 1.5
    a40 = cat_map_catalog(CAT, 40, np.pi)
    a80 = cat_map_catalog(CAT, 80, np.pi)
    v40 = orbit_log_sdet(a40, lam)
    v80 = orbit_log_sdet(a80, lam)
    assert abs(v80 - v40) <= a40.tail_bound(lam)


def test_sdet_zeta_identity_grid():
    catalog = cat_map_catalog(CAT, 60, np.pi)
    for lam in np.linspace(1.3, 3.0, 7):
        assert sdet_zeta_identity_defect(catalog, lam) <= 1e-8


def test_subshift_zeta_vs_transfer_determinant():
    lam = 2.0
    catalog = subshift_catalog(GOLDEN, [1.0, 1.0], 14)
    val = ruelle_zeta_truncated(catalog, lam)
    want = zeta_transfer_determinant(GOLDEN, [1.0, 1.0], 0.0, lam)
    assert abs(val - want) <= 1e-6
    # the transfer-trace truncation reaches n_max = 40
    log40 = subshift_log_zeta_truncated(GOLDEN, [1.0, 1.0], 0.0, lam, 40)
    assert abs(np.exp(log40) - want) <= 1e-8


def test_subshift_catalog_vs_trace_truncation():
    # the two truncation routes agree on the enumerable range
    lam = 1.6
    alpha = 0.7
    catalog = subshift_catalog(GOLDEN, [1.0, 1.0], 12, alpha)
    by_catalog = orbit_log_zeta_sum(catalog, lam)
    by_traces = subshift_log_zeta_truncated(GOLDEN, [1.0, 1.0], alpha, lam, 12)
    assert abs(by_catalog - by_traces) <= 1e-10


def test_transfer_determinant_values_at_zero():
    assert zeta_transfer_determinant(GOLDEN, [1.0, 1.0], np.pi, 0.0) == pytest.approx(
        1.0, abs=1e-14)
    assert zeta_transfer_determinant(GOLDEN, [1.0, 1.0], np.pi / 2, 0.0) == pytest.approx(
        2.0 - 1.0j, abs=1e-14)


def test_transfer_determinant_roof_independent_at_zero():
    rng = np.random.default_rng(3)
    base = zeta_transfer_determinant(GOLDEN, [1.0, 1.0], np.pi, 0.0)
    for _ in range(10):
        roof = rng.uniform(0.5, 3.0, 2)
        val = zeta_transfer_determinant(GOLDEN, roof, np.pi, 0.0)
        assert abs(val - base) <= 1e-15


def test_roof_family_local_constancy():
    for tau in np.linspace(0.0, 0.5, 6):
        val = zeta_transfer_determinant(GOLDEN, [1.0, 1.0 + tau], np.pi, 0.0)
        assert abs(val - 1.0) <= 1e-15


# ---------------------------------------------------------------------------
# Dirichlet series
# ---------------------------------------------------------------------------

def test_dirichlet_plain_sum_at_s_one():
    catalog = cat_map_catalog(CAT, 30, np.pi)
    lam = 1.5
    val = orbit_dirichlet(catalog, 0, lam, 1.0)
    want = sum(w * np.exp(-lam * T) for T, w in guillemin_comb(catalog, 0))
    assert val == pytest.approx(want, rel=1e-12)


def test_dirichlet_s_derivative_reproduces_log_sdet():
    # complex-step d/ds at 0 of sum_k (-1)^k F^k equals -log sdet
    catalog = cat_map_catalog(CAT, 60, np.pi)
    lam = 1.5
    h = 1e-20
    total = 0.0 + 0.0j
    for k in range(3):
        total += (-1.0) ** k * orbit_dirichlet(catalog, k, lam, 1j * h)
    deriv = total.imag / h
    assert abs(deriv - (-orbit_log_sdet(catalog, lam))) <= 1e-9


def test_dirichlet_wedge_symmetry():
    catalog = cat_map_catalog(CAT, 30, np.pi)
    v0 = orbit_dirichlet(catalog, 0, 1.5, 2.0)
    v2 = orbit_dirichlet(catalog, 2, 1.5, 2.0)
    assert v0 == pytest.approx(v2, rel=1e-12)


def test_regularity_detection_per_alpha():
    # alpha = 0 is singular at lambda = 0; the listed characters are regular
    with pytest.raises(AbscissaError):
        zeta_closed_form_cat(CAT, 0.0, 0.0)
    for alpha, want in [(np.pi, 1.25), (2 * np.pi / 3, 4.0 / 3.0), (np.pi / 2, 1.5)]:
        val = zeta_closed_form_cat(CAT, alpha, 0.0)
        assert val == pytest.approx(want, abs=1e-12)
        assert abs(val) > 0
