import math

import numpy as np
import pytest

from bilevel_ggm.errors import EmptyFeasibleGrid, InvalidLambda, UnequalSampleSizes
from bilevel_ggm.linalg import SubjectData
from bilevel_ggm.rcm import (LambdaTriple, RcmOptions, bic1, bic2, degrees_of_freedom,
                             rcm_fit, rcm_objective)
from bilevel_ggm.simgen import SimScenario, generate_scenario
from bilevel_ggm.tuning import LambdaGrid, default_grid, tune

from conftest import random_subjects

OPTS = RcmOptions(bcd_tol=1e-6, max_bcd_iter=500)


def scenario_subjects(p=10, K=3, n=200, seed=5):
    return list(generate_scenario(SimScenario(p=p, K=K, n=n, seed=seed)).datasets)


def test_grid_validation():
    with pytest.raises(InvalidLambda):
        LambdaGrid((0.2, 0.1), (1.0,), (0.0,))
    with pytest.raises(InvalidLambda):
        LambdaGrid((), (1.0,), (0.0,))
    with pytest.raises(InvalidLambda):
        LambdaGrid((-0.1,), (1.0,), (0.0,))
    g = LambdaGrid([0.1, 0.2], [0.0, 1.0], [0.0, 0.5])
    assert g.slices() == [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5)]
    assert len(g.points()) == 6
    assert g.infeasible() == [(0.1, 0.0, 0.5), (0.2, 0.0, 0.5)]
    assert LambdaGrid.from_dict(g.to_dict()) == g


def test_single_point_grid_matches_fit(rng):
    subs = random_subjects(rng, 2, 5, 20)
    lam = LambdaTriple(0.2, 1.0, 0.1)
    res = tune(subs, LambdaGrid((0.2,), (1.0,), (0.1,)), opts=OPTS)
    direct = rcm_fit(subs, lam, OPTS)
    assert res.best.lambda_ == lam
    np.testing.assert_array_equal(res.best.omega0, direct.omega0)
    assert len(res.table) == 1
    assert res.table[0].bic == bic2(direct, subs)


def test_huge_lambda1_ranked_worse():
    subs = scenario_subjects()
    huge = 50.0
    res = tune(subs, LambdaGrid((0.01, huge), (1.0,), (0.0,)), opts=OPTS)
    by_l1 = {e.lambda_.lambda1: e for e in res.table}
    fit_huge = rcm_fit(subs, LambdaTriple(huge, 1.0, 0.0), OPTS)
    assert all(np.count_nonzero(om - np.diag(np.diag(om))) == 0 for om in fit_huge.omegas)
    # diagonal-model score: only the diagonal parameters are free
    assert degrees_of_freedom(fit_huge) == 0
    assert by_l1[huge].bic == pytest.approx(bic2(fit_huge, subs), rel=1e-9)
    assert by_l1[0.01].bic < by_l1[huge].bic
    assert res.best.lambda_.lambda1 == 0.01


def test_table_sorted_and_best_is_minimum():
    subs = scenario_subjects(p=8, K=2, n=60, seed=1)
    grid = LambdaGrid((0.05, 0.15, 0.4), (0.0, 0.5, 2.0), (0.0, 0.4))
    res = tune(subs, grid, opts=OPTS)
    assert len(res.table) == len(grid.points()) == 15
    assert len(res.infeasible) == 3
    bics = [e.bic for e in res.table]
    assert bics == sorted(bics)
    conv = [e for e in res.table if e.converged]
    assert res.best_entry.bic == min(e.bic for e in conv)
    assert res.best_entry is conv[0]


def test_bic1_criterion_and_weighting():
    subs = scenario_subjects(p=8, K=2, n=60, seed=2)
    grid = LambdaGrid((0.05, 0.3), (1.0,), (0.0,))
    res = tune(subs, grid, criterion="bic1", opts=OPTS, weighting="unit")
    for e in res.table:
        fit = rcm_fit(subs, e.lambda_, OPTS)
        assert e.bic == pytest.approx(bic1(fit, subs, weighting="unit"), rel=1e-6)
    with pytest.raises(ValueError):
        tune(subs, grid, criterion="aic")


def test_warm_and_cold_select_same_point():
    subs = scenario_subjects(p=10, K=3, n=80, seed=9)
    grid = LambdaGrid((0.05, 0.1, 0.2, 0.4), (0.5, 2.0), (0.0, 0.5))
    warm = tune(subs, grid, opts=OPTS)
    cold = []
    for lam in grid.points():
        fit = rcm_fit(subs, lam, OPTS)
        cold.append((bic2(fit, subs), -lam.lambda1, -lam.lambda3, -lam.lambda2, lam, fit))
    cold.sort(key=lambda t: t[:4])
    best_cold = cold[0][-1]
    assert warm.best.lambda_ == cold[0][-2]
    covs = [s.sample_cov for s in subs]
    obj_w = rcm_objective(warm.best.omega0, warm.best.omegas, covs, warm.best.lambda_)
    obj_c = rcm_objective(best_cold.omega0, best_cold.omegas, covs, best_cold.lambda_)
    assert abs(obj_w - obj_c) <= 10 * OPTS.bcd_tol * abs(obj_c)


def test_threads_do_not_change_result():
    subs = scenario_subjects(p=8, K=2, n=60, seed=4)
    grid = LambdaGrid((0.1, 0.3), (0.5, 2.0), (0.0, 0.3))
    a = tune(subs, grid, opts=RcmOptions(threads=1))
    b = tune(subs, grid, opts=RcmOptions(threads=4))
    assert [(e.lambda_, e.bic) for e in a.table] == [(e.lambda_, e.bic) for e in b.table]
    np.testing.assert_array_equal(a.best.omega0, b.best.omega0)


def test_empty_feasible_grid_and_unequal_n(rng):
    subs = random_subjects(rng, 2, 4, 15)
    with pytest.raises(EmptyFeasibleGrid):
        tune(subs, LambdaGrid((0.1,), (0.0,), (0.5,)))
    uneven = [SubjectData(rng.standard_normal((15, 4))), SubjectData(rng.standard_normal((16, 4)))]
    with pytest.raises(UnequalSampleSizes):
        tune(uneven, LambdaGrid((0.1,), (1.0,), (0.0,)))
    tune(uneven, LambdaGrid((0.1,), (1.0,), (0.0,)), criterion="bic1")


def test_default_grid_examples():
    g = default_grid(100, 50)
    l1 = np.array(g.lambda1_values)
    assert len(l1) == 10
    assert math.sqrt(l1[0] * l1[-1]) == pytest.approx(math.sqrt(math.log(100) / 50), rel=1e-12)
    assert math.sqrt(math.log(100) / 50) == pytest.approx(0.3035, abs=1e-4)
    assert g.infeasible() == []
    for vals in (g.lambda1_values, g.lambda2_values, g.lambda3_values):
        assert all(v >= 0 for v in vals)
        assert list(vals) == sorted(set(vals))
    with pytest.raises(ValueError):
        default_grid(1, 50)
