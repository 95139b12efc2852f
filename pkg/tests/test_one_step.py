import numpy as np
import pytest

from obslab.linalg import pseudoinverse
from obslab.one_step import (OneStepParams, cost_population, cost_sample,
                             expected_generalization, gd_limit, grad_sample,
                             k_min, projector, sample_instance, verify_theorem,
                             z_pinv)
from obslab.rng import SeededRng


def ones_block(n, m):
    return np.hstack([np.eye(n)] * m)


def instance(seed=0, n=2, p=6, m=3):
    return sample_instance(OneStepParams(n=n, p=p, m=m), SeededRng(seed))


def random_instances(count):
    specs = [(2, 6, 1), (2, 6, 3), (3, 9, 2), (1, 4, 4), (4, 8, 2), (2, 10, 5)]
    for i in range(count):
        n, p, m = specs[i % len(specs)]
        yield sample_instance(OneStepParams(n=n, p=p, m=m), SeededRng(10_000 + i))


def test_params_validation():
    with pytest.raises(ValueError):
        OneStepParams(n=3, p=10, m=1)  # n does not divide p
    with pytest.raises(ValueError):
        OneStepParams(n=2, p=4, m=3)  # m > p/n
    with pytest.raises(ValueError):
        OneStepParams(n=2, p=4, m=1, psi=-0.5)


def test_instance_shapes():
    inst = instance()
    assert inst.z.shape == (6, 8)
    assert inst.w_c.shape == (2, 2)
    assert len(inst.w_list) == 3


def test_instance_gram_structure():
    # Z Z^T has identity diagonal blocks plus one extra identity everywhere:
    # diagonal blocks 2I, off-diagonal blocks I.
    inst = instance(seed=3)
    gram = inst.z @ inst.z.T
    expected = np.eye(6) + ones_block(2, 3).T @ ones_block(2, 3)
    assert np.abs(gram - expected).max() < 1e-10


def test_instance_determinism():
    a, b = instance(seed=4), instance(seed=4)
    assert np.array_equal(a.z, b.z)


def test_cost_sample_zero_policy():
    inst = instance(seed=5, n=3, p=9, m=1)
    assert cost_sample(np.zeros((3, 12)), inst.w_c, inst.w_list[0]) == pytest.approx(1.5)


def test_cost_sample_population_minimizer_is_zero():
    inst = instance(seed=6, n=3, p=9, m=1)
    k_star = np.hstack([-inst.w_c.T, np.zeros((3, 9))])
    assert cost_sample(k_star, inst.w_c, inst.w_list[0]) < 1e-24


def test_cost_sample_matches_state_monte_carlo():
    inst = instance(seed=7, n=2, p=6, m=1)
    k = 0.5 * SeededRng(8).standard_normal(2, 8)
    w = inst.w_list[0]
    exact = cost_sample(k, inst.w_c, w)
    gen = SeededRng(9).generator
    s0 = gen.standard_normal((100_000, 2))
    stacked = np.vstack([inst.w_c, w])
    s1 = s0 + s0 @ (k @ stacked).T
    draws = 0.5 * (s1 ** 2).sum(axis=1)
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - exact) < 3 * se


def test_cost_population_closed_values():
    inst = instance(seed=10, n=3, p=9, m=2)
    k_star = np.hstack([-inst.w_c.T, np.zeros((3, 9))])
    assert cost_population(k_star, inst.w_c) == pytest.approx(0.0, abs=1e-12)
    assert cost_population(np.zeros((3, 12)), inst.w_c) == pytest.approx(1.5)


def test_cost_population_matches_level_monte_carlo():
    from obslab.linalg import sample_semi_orthogonal

    inst = instance(seed=11, n=2, p=6, m=1)
    k = 0.5 * SeededRng(12).standard_normal(2, 8)
    exact = cost_population(k, inst.w_c)
    rng = SeededRng(13)
    draws = np.array([
        cost_sample(k, inst.w_c, sample_semi_orthogonal(rng, 6, 2))
        for _ in range(2000)
    ])
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - exact) < 3 * se


def test_grad_sample_zero_at_interpolating_point():
    inst = instance(seed=14, n=2, p=6, m=1)
    g = grad_sample(k_min(inst), inst.w_c, inst.w_list[0])
    assert np.abs(g).max() < 1e-10


def test_grad_sample_at_zero_policy():
    inst = instance(seed=15, n=2, p=6, m=1)
    stacked = np.vstack([inst.w_c, inst.w_list[0]])
    g = grad_sample(np.zeros((2, 8)), inst.w_c, inst.w_list[0])
    assert np.abs(g - stacked.T).max() < 1e-12


def test_grad_sample_matches_finite_differences():
    inst = instance(seed=16, n=2, p=6, m=1)
    k = 0.3 * SeededRng(17).standard_normal(2, 8)
    g = grad_sample(k, inst.w_c, inst.w_list[0])
    step = 1e-6
    for idx in [(0, 0), (1, 3), (0, 7)]:
        bump = np.zeros_like(k)
        bump[idx] = step
        fd = (cost_sample(k + bump, inst.w_c, inst.w_list[0])
              - cost_sample(k - bump, inst.w_c, inst.w_list[0])) / (2 * step)
        assert fd == pytest.approx(g[idx], rel=1e-6, abs=1e-9)


def test_z_pinv_single_level_halves():
    inst = instance(seed=18, n=3, p=9, m=1)
    zp = z_pinv(inst)
    assert np.abs(zp[:3] - inst.w_c / 2).max() < 1e-12
    assert np.abs(zp[3:] - inst.w_list[0] / 2).max() < 1e-12


def test_z_pinv_is_right_inverse_and_matches_svd():
    for inst in random_instances(20):
        zp = z_pinv(inst)
        mn = inst.m * inst.n
        assert np.abs(inst.z @ zp - np.eye(mn)).max() < 1e-10
        assert np.abs(zp - pseudoinverse(inst.z)).max() < 1e-10


def test_projector_idempotent_symmetric_block_form():
    inst = instance(seed=19, n=2, p=8, m=3)
    proj = projector(inst)
    assert np.abs(proj @ proj - proj).max() < 1e-10
    assert np.abs(proj - proj.T).max() < 1e-10
    m, n = inst.m, inst.n
    assert np.abs(proj[:n, :n] - (m / (m + 1)) * inst.w_c @ inst.w_c.T).max() < 1e-10
    assert np.trace(proj) == pytest.approx(m * n, abs=1e-8)


def test_k_min_single_level_form():
    inst = instance(seed=20, n=2, p=6, m=1)
    expected = np.hstack([-inst.w_c.T / 2, -inst.w_list[0].T / 2])
    assert np.abs(k_min(inst) - expected).max() < 1e-12


def test_k_min_stationarity_and_min_norm():
    for inst in random_instances(10):
        km = k_min(inst)
        z = inst.z
        lhs = km @ z.T @ z
        rhs = -ones_block(inst.n, inst.m) @ z
        assert np.abs(lhs - rhs).max() < 1e-10
        # matches the pseudoinverse construction
        assert np.abs(km - (-ones_block(inst.n, inst.m) @ pseudoinverse(z).T)).max() < 1e-10
        # any row-space-orthogonal addition strictly increases the norm
        comp = np.eye(inst.n + inst.p) - projector(inst)
        d = SeededRng(21).standard_normal(inst.n, inst.n + inst.p) @ comp
        if np.linalg.norm(d, "fro") > 1e-8:
            assert (np.linalg.norm(km + d, "fro") ** 2
                    >= np.linalg.norm(km, "fro") ** 2 + 0.5 * np.linalg.norm(d, "fro") ** 2)


def test_k_min_interpolates_every_level():
    for inst in random_instances(10):
        km = k_min(inst)
        for w in inst.w_list:
            assert cost_sample(km, inst.w_c, w) <= 1e-16 * inst.n


def test_gd_limit_zero_init_is_k_min():
    inst = instance(seed=22)
    assert np.abs(gd_limit(inst, np.zeros((2, 8))) - k_min(inst)).max() < 1e-12


def test_gd_limit_row_space_init_annihilated():
    inst = instance(seed=23)
    c = SeededRng(24).standard_normal(2, 6)
    k0 = c @ inst.z  # rows inside the row space of Z
    assert np.abs(gd_limit(inst, k0) - k_min(inst)).max() < 1e-9


def test_gd_limit_matches_iterative_descent():
    inst = instance(seed=25, n=3, p=9, m=2)
    k0 = SeededRng(26).standard_normal(3, 12)
    closed = gd_limit(inst, k0)
    lam = np.linalg.eigvalsh(inst.z.T @ inst.z).max()
    eta = 0.5 * inst.m / lam
    k = k0.copy()
    ztz = inst.z.T @ inst.z
    lead = ones_block(3, 2) @ inst.z
    for _ in range(20_000):
        k = k - eta * (lead + k @ ztz) / inst.m
    assert np.linalg.norm(k - closed, "fro") < 1e-6


def test_gd_limit_idempotent():
    inst = instance(seed=27)
    k_inf = gd_limit(inst, SeededRng(28).standard_normal(2, 8))
    assert np.abs(gd_limit(inst, k_inf) - k_inf).max() < 1e-10


def test_gd_limit_is_stationary_for_the_average_cost():
    for inst in random_instances(6):
        k_inf = gd_limit(inst, SeededRng(29).standard_normal(inst.n, inst.n + inst.p))
        grad = sum(grad_sample(k_inf, inst.w_c, w) for w in inst.w_list) / inst.m
        bound = 1e-8 * (1 + np.linalg.norm(inst.z, 2) ** 2)
        assert np.linalg.norm(grad, "fro") <= bound


def test_expected_generalization_reference_values():
    terms = expected_generalization(OneStepParams(n=10, p=1000, m=10, psi=1.0))
    assert terms.minimum_norm == pytest.approx(0.045454545454545, rel=1e-9)
    assert terms.initialization == pytest.approx(50.0, rel=1e-12)
    assert terms.total == pytest.approx(50.045454545454545, rel=1e-9)


def test_expected_generalization_psi_zero_is_min_norm_term():
    terms = expected_generalization(OneStepParams(n=4, p=16, m=2, psi=0.0))
    assert terms.initialization == 0.0
    assert terms.total == terms.minimum_norm


def test_expected_generalization_tiny_case_hand_value():
    terms = expected_generalization(OneStepParams(n=1, p=1, m=1, psi=0.0))
    assert terms.total == pytest.approx(0.25, abs=1e-15)


def test_min_norm_term_decreases_with_level_count():
    values = [expected_generalization(OneStepParams(n=10, p=1000, m=m)).minimum_norm
              for m in range(1, 11)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_verify_theorem_needs_two_trials():
    with pytest.raises(ValueError):
        verify_theorem(OneStepParams(n=2, p=4, m=1), 1, SeededRng(0))


def test_verify_theorem_psi_zero_concentrates():
    params = OneStepParams(n=5, p=50, m=2, psi=0.0)
    check = verify_theorem(params, 100, SeededRng(30))
    closed = expected_generalization(params).total
    assert abs(check.empirical_mean - closed) < 1e-10
    assert abs(check.z_score) <= 3


def test_verify_theorem_single_cell():
    params = OneStepParams(n=5, p=50, m=2, psi=1.0)
    check = verify_theorem(params, 500, SeededRng(31))
    assert abs(check.z_score) <= 3
    assert check.std_error > 0
