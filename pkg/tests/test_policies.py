import numpy as np
import pytest
from scipy import stats

from src.engine.types import PolicyKind, PolicySpec, RoutingPlan, TieRule, ToleranceMode
from src.planning.capacity import random_feasible_plan
from src.policies.dispatchers import (
    AwareDispatcher,
    JSQDispatcher,
    ProportionalDispatcher,
    ToleranceDispatcher,
    UnawareDispatcher,
    build_dispatcher,
    destination_tolerance_geo,
)
from src.policies.perturbation import (
    PerturbationError,
    aware_perturbations,
    default_perturbation,
    destination_aware,
    destination_unaware,
    kappa_unaware,
    max_chi,
    scheme_from_eps,
    scheme_violations,
)
from src.policies.ranking import QueueSnapshot, Ranking, rank


def snap(counts, mus=None):
    return QueueSnapshot.from_counts(counts, mus or [1.0] * len(counts))


def cycle(values):
    it = iter(values)
    return lambda: next(it)


def test_rank_breaks_ties_by_lowest_index():
    r = rank(snap([2, 2, 1]))
    assert r.zeta == (2, 0, 1)
    assert r.pi == (1, 2, 0)


def test_rank_uses_weighted_queues():
    assert rank(snap([1, 1], [1.0, 2.0])).zeta == (1, 0)


def test_random_tie_rule_uses_uniform_keys():
    r = rank(snap([1, 1, 3]), TieRule.RANDOM, cycle([0.9, 0.1, 0.5]))
    assert r.zeta == (1, 0, 2)


def test_ranking_from_order_inverts():
    r = Ranking.from_order([2, 0, 1])
    assert [r.zeta[r.pi[k]] for k in range(3)] == [0, 1, 2]


def test_max_chi():
    assert max_chi([1, 1]) == pytest.approx(0.5)
    assert max_chi([1, 1.5, 1.5]) == pytest.approx(0.5)
    assert max_chi([1] * 5) == pytest.approx(0.8)


def test_default_perturbation():
    scheme = default_perturbation(2, [1, 1], 0.05)
    assert scheme.eps == pytest.approx((0.05, -0.05))
    assert scheme.delta0 == 1.0
    five = default_perturbation(5, [1] * 5, 0.4)
    assert sum(five.eps) == pytest.approx(0.0)
    assert five.eps[1:] == pytest.approx((-0.1,) * 4)
    with pytest.raises(PerturbationError):
        default_perturbation(2, [1, 1], 0.6)
    with pytest.raises(PerturbationError):
        default_perturbation(1, [1], 0.0)


def test_scheme_violations():
    assert scheme_violations([1, 1], default_perturbation(2, [1, 1], 0.3)) == []
    bad = scheme_from_eps([0.2, 0.1, -0.3])
    problems = scheme_violations([1, 1, 1], bad)
    assert any("nonpositive" in p for p in problems)


def test_unaware_threshold():
    ranking = rank(snap([3, 1]))
    scheme = default_perturbation(2, [1, 1], 0.05)
    assert kappa_unaware(ranking, [1, 1], scheme) == pytest.approx([0.45, 1.0])
    assert destination_unaware(0.45, ranking, [1, 1], scheme) == 1
    assert destination_unaware(0.4499, ranking, [1, 1], scheme) == 0
    assert destination_unaware(0.999999, ranking, [1, 1], scheme) == 1


@pytest.mark.slow
def test_unaware_frequencies_match_routing_law():
    mus = [1.0, 2.0, 3.0]
    scheme = default_perturbation(3, mus, 0.2)
    ranking = rank(snap([4, 0, 9], mus))
    u = np.random.default_rng(5).random(200_000)
    picks = np.array([destination_unaware(x, ranking, mus, scheme) for x in u])
    law = np.array([mus[k] / 6.0 + scheme.eps[ranking.pi[k]] for k in range(3)])
    observed = np.bincount(picks, minlength=3)
    assert stats.chisquare(observed, law * len(u)).pvalue > 0.001


def random_instance(seed, b=4, s=3, chi_frac=0.8):
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.ones(b))
    mus = rng.uniform(0.5, 2.0, s)
    plan = random_feasible_plan(probs, mus, rng)
    scheme = default_perturbation(s, mus, chi_frac * max_chi(mus))
    order = list(rng.permutation(s))
    return probs, mus, plan, scheme, Ranking.from_order(order)


@pytest.mark.parametrize("seed", range(6))
def test_aware_perturbation_identities(seed):
    probs, mus, plan, scheme, ranking = random_instance(seed)
    eps = aware_perturbations(ranking, plan, probs, scheme)
    assert eps.sum(axis=1) == pytest.approx(np.zeros(len(probs)), abs=1e-9)
    assert probs @ eps == pytest.approx(np.array(scheme.eps), abs=1e-9)
    for rank_pos in range(1, len(mus)):
        assert np.all(eps[:, rank_pos] <= 1e-12)
        assert np.all(plan[:, ranking.zeta[rank_pos]] + eps[:, rank_pos] >= -1e-9)
    assert np.all(eps[:, 0] >= -1e-12)


def test_aware_routing_averages_to_unaware_law():
    probs, mus, plan, scheme, ranking = random_instance(9)
    eps = aware_perturbations(ranking, plan, probs, scheme)
    routed = sum(
        probs[m] * np.array([plan[m, k] + eps[m, ranking.pi[k]] for k in range(len(mus))]) for m in range(len(probs))
    )
    law = mus / mus.sum() + np.array([scheme.eps[ranking.pi[k]] for k in range(len(mus))])
    assert routed == pytest.approx(law, abs=1e-9)


def test_destination_aware_respects_plan_row():
    ranking = rank(snap([0, 5]))
    plan_row = [1.0, 0.0]
    eps_m = [0.0, 0.0]
    assert destination_aware(0.99, ranking, plan_row, eps_m) == 0
    # station 2 is shortest: station 1 keeps 0.5 - 0.1 of this origin's mass
    ranking = rank(snap([5, 0]))
    eps_m = [0.1, -0.1]
    assert destination_aware(0.39, ranking, [0.5, 0.5], eps_m) == 0
    assert destination_aware(0.41, ranking, [0.5, 0.5], eps_m) == 1
    assert destination_aware(0.50, ranking, [0.5, 0.5], eps_m) == 1


def test_tolerance_rule():
    s = snap([5, 1])
    assert destination_tolerance_geo([10.0, 12.0], s, 5.0) == 1
    assert destination_tolerance_geo([10.0, 12.0], s, 1.0) == 0
    assert destination_tolerance_geo([10.0, 12.0], s, float("inf")) == 1
    assert destination_tolerance_geo([10.0, 12.0], snap([0, 3]), 5.0) == 0


def test_probabilistic_tolerance():
    s = snap([5, 1])
    kw = dict(mode=ToleranceMode.PROBABILISTIC, chi=0.05, border_mass=[0.2, 0.1])
    assert destination_tolerance_geo([10.0, 12.0], s, 5.0, u=0.49, **kw) == 1
    assert destination_tolerance_geo([10.0, 12.0], s, 5.0, u=0.51, **kw) == 0
    with pytest.raises(ValueError):
        destination_tolerance_geo([10.0, 12.0], s, 5.0, mode=ToleranceMode.PROBABILISTIC, chi=0.05)


def test_build_dispatcher_kinds():
    mus, probs = [1.0, 1.0], [1.0]
    u = cycle([0.3] * 10)
    plan = RoutingPlan(np.array([[0.5, 0.5]]))
    cases = [
        (PolicySpec(kind=PolicyKind.JSQ), JSQDispatcher),
        (PolicySpec(kind=PolicyKind.RANDOM_PROPORTIONAL), ProportionalDispatcher),
        (PolicySpec(kind=PolicyKind.RJSQ_UNAWARE, chi=0.1), UnawareDispatcher),
        (PolicySpec(kind=PolicyKind.RJSQ_AWARE, chi=0.1, plan=plan), AwareDispatcher),
        (PolicySpec(kind=PolicyKind.TOLERANCE_GEO, tau_bar=5.0), ToleranceDispatcher),
    ]
    for policy, cls in cases:
        assert type(build_dispatcher(policy, mus, probs, u)) is cls


def test_jsq_and_proportional_dispatch():
    jsq = JSQDispatcher([1.0, 1.0], TieRule.LOWEST_INDEX, cycle([]))
    assert jsq([3, 2], 0, [0.0, 0.0]) == 1
    assert jsq([2, 2], 0, [0.0, 0.0]) == 0
    prop = ProportionalDispatcher([1.0, 3.0], TieRule.LOWEST_INDEX, cycle([0.2, 0.3]))
    assert prop([0, 9], 0, [0.0, 0.0]) == 0
    assert prop([0, 9], 0, [0.0, 0.0]) == 1


def test_aware_dispatcher_caches_per_ranking():
    policy = PolicySpec(kind=PolicyKind.RJSQ_AWARE, chi=0.1, plan=RoutingPlan(np.array([[1.0, 0.0], [0.0, 1.0]])))
    d = AwareDispatcher([1.0, 1.0], TieRule.LOWEST_INDEX, cycle([0.5] * 4), policy, [0.5, 0.5])
    d([1, 0], 0, [0, 0])
    d([2, 1], 1, [0, 0])
    d([0, 3], 0, [0, 0])
    assert len(d._cache) == 2
