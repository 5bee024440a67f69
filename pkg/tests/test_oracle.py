import numpy as np
import pytest

from alphafair import (GeneratorConfig, build_instance, check_restriction_lemma,
                       generate_instance, restricted_problem, solve_reference, theorem_bound,
                       verify_kkt, waterfill_single_link)
from alphafair.oracle import ReferenceSolverError

from conftest import E1_OPT, single_link
from oracles import waterfill_bisect


@pytest.mark.parametrize("w, alpha, c, expected", [
    ((1, 3), 1.0, 1.0, (0.25, 0.75)),
    ((1, 1), 2.0, 2.0, (1.0, 1.0)),
    ((1, 4), 2.0, 1.0, (1 / 3, 2 / 3)),
])
def test_waterfill_examples(w, alpha, c, expected):
    assert np.allclose(waterfill_single_link(w, alpha, c), expected, rtol=1e-14)


def test_waterfill_matches_bisection_and_saturates():
    rng = np.random.default_rng(4)
    for _ in range(50):
        w = rng.uniform(0.05, 1.0, int(rng.integers(1, 10)))
        alpha, c = rng.uniform(0.3, 5.0), rng.uniform(0.1, 50.0)
        x = waterfill_single_link(w, alpha, c)
        assert abs(x.sum() - c) <= 1e-10 * c
        assert np.allclose(x, waterfill_bisect(w, alpha, c), rtol=1e-10)
        assert np.all(waterfill_single_link(w, alpha, 1.1 * c) > x)


def test_waterfill_rejects():
    with pytest.raises(ValueError):
        waterfill_single_link([1.0], 0.0, 1.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 4.0])
def test_reference_single_link(alpha):
    w = [0.3, 0.9, 0.5]
    x = solve_reference(single_link(w, 2.0), alpha)
    assert np.allclose(x, waterfill_single_link(w, alpha, 2.0), rtol=1e-6)


def test_reference_e1(e1):
    assert np.allclose(solve_reference(e1, 1.0), E1_OPT, atol=1e-10)


def test_reference_unbounded_rejected():
    inst = build_instance([("j1", float("inf"))], [("r1", ("j1",), 1.0)])
    with pytest.raises(ReferenceSolverError):
        solve_reference(inst, 1.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 4.0])
def test_reference_certified(alpha):
    for seed in range(5):
        inst = generate_instance(GeneratorConfig(20, 2, 40, 0.2, 0.05, 1.0, seed))
        x = solve_reference(inst, alpha)
        assert verify_kkt(inst, alpha, x, 1e-8).satisfied


def test_kkt_single_link():
    inst = single_link([1.0, 3.0])
    rep = verify_kkt(inst, 1.0, [0.25, 0.75])
    assert rep.satisfied and rep.link_duals[0] == pytest.approx(4.0)
    assert not verify_kkt(inst, 1.0, [0.125, 0.375]).satisfied


def test_kkt_e1(e1):
    rep = verify_kkt(e1, 1.0, np.array(E1_OPT))
    assert rep.satisfied
    assert np.allclose(rep.link_duals, [1 / E1_OPT[0], 1 / E1_OPT[2]], rtol=1e-8)


def test_kkt_suboptimal_rejected(e1):
    assert not verify_kkt(e1, 1.0, [0.5, 0.5, 9.5]).satisfied


def test_kkt_input_checks(e1):
    with pytest.raises(ValueError):
        verify_kkt(e1, 1.0, [0.6, 0.5, 9.0])  # overloads j1
    with pytest.raises(ValueError):
        verify_kkt(e1, 1.0, [0.0, 0.5, 9.0])


def test_restricted_e1(e1):
    sub = restricted_problem(e1, np.array(E1_OPT), 0)
    assert list(sub.request_ids) == ["r1", "r2"]
    assert list(sub.link_ids) == ["j1", "j2"]
    assert sub.capacities[0] == 1.0
    assert sub.capacities[1] == pytest.approx(10.0 - E1_OPT[2])


def test_restricted_identity_and_isolated():
    inst = single_link([1.0, 2.0])
    x = solve_reference(inst, 1.0)
    assert restricted_problem(inst, x, 0) == inst
    iso = build_instance([("a", 3.0), ("b", 1.0)],
                         [("r1", ("a",), 1.0), ("r2", ("b",), 1.0), ("r3", ("b",), 1.0)])
    sub = restricted_problem(iso, solve_reference(iso, 1.0), 0)
    assert list(sub.request_ids) == ["r1"] and list(sub.capacities) == [3.0]


def test_restricted_rejects_infeasible(e1):
    with pytest.raises(ValueError):
        restricted_problem(e1, np.array([0.5, 0.5, 12.0]), 0)


@pytest.mark.parametrize("alpha, r0", [(1.0, 0), (2.0, 2), (0.5, 1)])
def test_lemma_e1(e1, alpha, r0):
    assert check_restriction_lemma(e1, alpha, r0, 1e-5)


def test_lemma_single_link():
    assert check_restriction_lemma(single_link([1.0, 0.4, 0.8]), 2.0, 1)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_bound_domination_small(alpha):
    for seed in range(5):
        inst = generate_instance(GeneratorConfig(20, 2, 40, 0.1, 0.1, 1.0, 100 + seed))
        x = solve_reference(inst, alpha)
        assert np.all(theorem_bound(inst, alpha).values <= x + 1e-6)
