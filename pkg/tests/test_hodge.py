"""Gram-adjoint codifferentials and the supervolume anomaly ledger."""

import numpy as np
import pytest

from flatdet.errors import MetricError
from flatdet.graded import (
    GradedMap,
    graded_commutator,
    random_acyclic_map,
    split_complement,
)
from flatdet.flows import inner_variation_path
from flatdet.hodge import (
    MetricFamily,
    adjoint_codifferential,
    hodge_sdet,
    metric_inner_variation,
    random_metric_family,
    supervolume_normalize,
    theta_of_family,
    torsion_anomaly_experiment,
)


def identity_grams(dims):
    return [np.eye(d, dtype=complex) for d in dims]


def test_adjoint_toy_identity_gram():
    d = GradedMap((1, 1), +1, [np.array([[2.0]]), None])
    delta = adjoint_codifferential(d, identity_grams((1, 1)))
    assert delta.block(1)[0, 0] == pytest.approx(2.0)
    D = graded_commutator(delta, d)
    assert D.block(0)[0, 0] == pytest.approx(4.0)
    assert D.block(1)[0, 0] == pytest.approx(4.0)


def test_adjoint_circle_block():
    theta = 2.1
    z = np.exp(1j * theta) - 1.0
    d = GradedMap((1, 1), +1, [np.array([[z]]), None])
    delta = adjoint_codifferential(d, identity_grams((1, 1)))
    D = graded_commutator(delta, d)
    assert D.block(0)[0, 0] == pytest.approx(abs(z) ** 2)
    assert abs(z) ** 2 == pytest.approx(4.0 * np.sin(theta / 2.0) ** 2)


@pytest.mark.parametrize("seed", range(8))
def test_adjoint_properties_random(seed):
    # adjointness defect and nilpotency under random HPD grams; eigenvalue
    # oracle for positivity of the Laplacian on an acyclic complex
    rng = np.random.default_rng(900 + seed)
    dims = (2, 5, 3)
    d = random_acyclic_map(dims, +1, rng=rng)
    fam = random_metric_family(dims, rng)
    grams = fam.gram(0.3)
    delta = adjoint_codifferential(d, grams)
    assert delta.compose(delta).norm() <= 1e-12 * max(1.0, delta.norm() ** 2)
    # <d a, b>_G = <a, delta b>_G checked entrywise
    for k in range(1, 3):
        lhs = d.block(k - 1).conj().T @ grams[k]
        rhs = grams[k - 1] @ delta.block(k)
        assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())
    D = graded_commutator(delta, d)
    for k in range(3):
        blk = D.block(k)
        if blk.size == 0:
            continue
        # D is self-adjoint for <.,.>_G, i.e. G D = D^dagger G
        sym = grams[k] @ blk - blk.conj().T @ grams[k]
        assert np.abs(sym).max() <= 1e-10 * max(1.0, np.abs(blk).max())
        eigs = np.linalg.eigvals(blk)
        assert eigs.real.min() > 1e-8  # positive definite on acyclic complexes


def test_adjoint_rejects_indefinite_gram():
    d = GradedMap((1, 1), +1, [np.array([[2.0]]), None])
    with pytest.raises(MetricError):
        adjoint_codifferential(d, [np.array([[-1.0]]), np.array([[1.0]])])


def test_metric_variation_diagonal_exp():
    # G_0(tau) = e^{2 tau} on degree 0 only: theta^(0) = -2, theta^(1) = 0
    dims = (1, 1)
    fam = MetricFamily(identity_grams(dims),
                       [("exp_linear", np.array([[1.0]])), ("constant",)])
    theta = theta_of_family(fam, 0.37)
    assert theta.block(0)[0, 0] == pytest.approx(-2.0)
    assert theta.block(1)[0, 0] == pytest.approx(0.0)


@pytest.mark.parametrize("seed", [13, 31, 77])
def test_metric_variation_conjugation_identity(seed):
    # direct-adjoint oracle: adjoint at tau equals conjugated adjoint at 0
    rng = np.random.default_rng(seed)
    dims = (2, 4, 2)
    d = random_acyclic_map(dims, +1, rng=rng)
    fam = random_metric_family(dims, rng)
    var = metric_inner_variation(d, fam)
    tau = 0.4
    direct = adjoint_codifferential(d, fam.gram(tau))
    conjugated = inner_variation_path(adjoint_codifferential(d, fam.gram(0.0)), var, tau)
    assert (direct - conjugated).norm() <= 1e-10 * max(1.0, direct.norm())


def test_circle_radius_like_scaling():
    theta = 1.3
    z = np.exp(1j * theta) - 1.0
    d = GradedMap((1, 1), +1, [np.array([[z]]), None])
    fam = MetricFamily(identity_grams((1, 1)),
                       [("constant",), ("exp_linear", np.array([[1.0]]))])
    tau = 0.25
    direct = adjoint_codifferential(d, fam.gram(tau))
    # G_1 = e^{2 tau}: delta = G_0^{-1} d^dagger G_1 = e^{2 tau} conj(z)
    assert direct.block(1)[0, 0] == pytest.approx(np.exp(2 * tau) * np.conj(z), rel=1e-12)
    var = metric_inner_variation(d, fam)
    conj = inner_variation_path(adjoint_codifferential(d, fam.gram(0.0)), var, tau)
    assert (direct - conj).norm() <= 1e-12


def test_anomaly_toy_hand_computed():
    # dims (1,1), G_0 = e^{2 tau}, G_1 = 1, d = [2]: sdet = 4 e^{-2 tau},
    # ledger log sdet + (log det G_0 - log det G_1) = log 4 exactly
    d = GradedMap((1, 1), +1, [np.array([[2.0]]), None])
    fam = MetricFamily(identity_grams((1, 1)),
                       [("exp_linear", np.array([[1.0]])), ("constant",)])
    report = torsion_anomaly_experiment(d, fam, np.linspace(0.0, 0.8, 9))
    for row in report["rows"]:
        assert row["sdet"] == pytest.approx(4.0 * np.exp(-2.0 * row["tau"]), rel=1e-12)
        assert row["ledger"] == pytest.approx(np.log(4.0))
    assert report["ledger_pass"]


def test_anomaly_supervolume_preserving_family():
    # equal dims, same scaling on both degrees: supervolume constant, sdet too
    d = GradedMap((1, 1), +1, [np.array([[2.0]]), None])
    h = np.array([[1.0]])
    fam = MetricFamily(identity_grams((1, 1)),
                       [("exp_linear", h), ("exp_linear", h)])
    report = torsion_anomaly_experiment(d, fam, np.linspace(0.0, 0.5, 6))
    assert report["supervolume_preserving"]
    assert report["constancy_pass"]
    assert report["constancy_dev"] <= 1e-10


def test_anomaly_identity_family_trivial():
    dims = (2, 4, 2)
    d = random_acyclic_map(dims, +1, seed=21)
    fam = MetricFamily(identity_grams(dims), [("constant",)] * 3)
    report = torsion_anomaly_experiment(d, fam, [0.0, 0.3, 0.6])
    assert report["ledger_pass"] and report["constancy_pass"]


@pytest.mark.parametrize("seed", range(12))
def test_anomaly_ledger_random(seed):
    rng = np.random.default_rng(700 + seed)
    dims = (2, 4, 2)
    d = random_acyclic_map(dims, +1, rng=rng)
    kind = "exp_linear" if seed % 2 == 0 else "polynomial"
    fam = random_metric_family(dims, rng, kind=kind, scale=0.3)
    report = torsion_anomaly_experiment(d, fam, np.linspace(0.0, 0.5, 6))
    assert report["ledger_pass"], report["max_ledger_dev"]


def test_supervolume_normalize_toy():
    fam = MetricFamily(identity_grams((1, 1)),
                       [("exp_linear", np.array([[1.0]])), ("constant",)])
    normalized = supervolume_normalize(fam)
    assert normalized.normalized_degree == 1
    for tau in (0.0, 0.2, 0.7):
        assert normalized.supervolume(tau) == pytest.approx(0.0, abs=1e-12)
        # the rescale factor on G_1 is exp(2 tau)
        g1 = normalized.gram(tau)[1]
        assert g1[0, 0] == pytest.approx(np.exp(2.0 * tau), rel=1e-12)


def test_supervolume_normalize_identity_on_normalized():
    dims = (2, 2)
    h = np.array([[0.3, 0.0], [0.0, -0.1]])
    fam = MetricFamily(identity_grams(dims), [("exp_linear", h), ("exp_linear", h)])
    normalized = supervolume_normalize(fam)
    for tau in (0.0, 0.4):
        got = normalized.gram(tau)
        want = fam.gram(tau)
        assert all(np.abs(a - b).max() <= 1e-12 for a, b in zip(got, want))


@pytest.mark.parametrize("seed", [3, 14, 15])
def test_supervolume_normalize_random(seed):
    rng = np.random.default_rng(seed)
    dims = (2, 4, 2)
    fam = random_metric_family(dims, rng)
    normalized = supervolume_normalize(fam)
    s0 = normalized.supervolume(0.0)
    for tau in np.linspace(0.0, 0.6, 7):
        assert abs(normalized.supervolume(tau) - s0) <= 1e-12
    # after normalization the superdeterminant itself is constant
    d = random_acyclic_map(dims, +1, rng=rng)
    report = torsion_anomaly_experiment(d, normalized, np.linspace(0.0, 0.6, 7))
    assert report["supervolume_preserving"]
    assert report["constancy_pass"]


def test_metric_family_json_roundtrip():
    rng = np.random.default_rng(8)
    fam = random_metric_family((2, 3), rng, kind="polynomial")
    data = fam.to_json()
    back = MetricFamily.from_json(data)
    for tau in (0.0, 0.3):
        for a, b in zip(fam.gram(tau), back.gram(tau)):
            assert np.abs(a - b).max() <= 1e-12


def test_hodge_sdet_matches_eigenvalue_product():
    dims = (1, 2, 1)
    d = random_acyclic_map(dims, +1, seed=9)
    grams = identity_grams(dims)
    val = hodge_sdet(d, grams)
    delta = adjoint_codifferential(d, grams)
    D = graded_commutator(delta, d)
    split = split_complement(delta)
    expected = 1.0
    for k in range(3):
        U = split.basis_L[k]
        if U.shape[1] == 0:
            continue
        eigs = np.linalg.eigvals(U.conj().T @ D.block(k) @ U)
        expected *= np.prod(eigs) ** ((-1.0) ** k)
    assert val == pytest.approx(expected, rel=1e-10)
