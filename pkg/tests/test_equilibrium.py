import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpssm import (
    DegenerateVariance,
    DimensionMismatch,
    IntervalInvalid,
    Kernel,
    NoSolution,
    TrainingSet,
    assemble_M,
    build_grid,
    convergence_study,
    fit,
    singularity_check,
    solve_equilibrium,
    transition_density,
    transition_matrix,
)
from gpssm.equilibrium import Grid, factorizes, stacked_system
from oracles import gaussian_pdf, product_model


def prior_like_model(sigma_f=1.0):
    """Zero outputs and huge noise: mean 0 and variance sigma_f^2 up to ~1e-6."""
    X = np.array([[-1.0], [0.0], [1.0]])
    return fit(Kernel.squared_exponential(sigma_f, 1.0), TrainingSet(X, np.zeros_like(X), 1e3))


class TwoWells:
    """Transition model with two disjoint invariant regions."""

    n = 1

    def moments(self, points):
        P = np.atleast_2d(points)
        return np.where(P < 0, -5.0, 5.0), np.full(P.shape, 0.25)


def test_unit_interval_grid():
    g = build_grid((0.0, 1.0), 2)
    np.testing.assert_allclose(g.nodes[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(g.weights, [0.25, 0.5, 0.25])


def test_reference_grid_size_and_mass():
    g = build_grid((-12.0, 8.0), 150)
    assert g.size == 151
    assert g.weights.sum() == pytest.approx(20.0, rel=1e-12)


def test_square_grid_and_lexicographic_order():
    g = build_grid([(0.0, 1.0), (0.0, 1.0)], (2, 2))
    assert g.size == 9
    assert g.weights.sum() == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(g.nodes[:3], [[0, 0], [0, 0.5], [0, 1]])
    np.testing.assert_allclose(g.nodes[3], [0.5, 0.0])
    assert g.weights[4] == pytest.approx(0.25)


@pytest.mark.parametrize("intervals, q", [((1.0, 1.0), 4), ((2.0, 1.0), 4), ((0.0, 1.0), 1), ((0.0, np.inf), 4)])
def test_invalid_grids(intervals, q):
    with pytest.raises(IntervalInvalid):
        build_grid(intervals, q)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(-100, 100), st.floats(1e-3, 50), st.integers(2, 12)), min_size=1, max_size=3
    )
)
def test_grid_weights_sum_to_box_volume(boxes):
    intervals = [(a, a + width) for a, width, _ in boxes]
    g = build_grid(intervals, [q for *_, q in boxes])
    assert g.size == math.prod(q + 1 for *_, q in boxes)
    # widths as represented after a + width, not the drawn width
    assert g.weights.sum() == pytest.approx(math.prod(b - a for a, b in intervals), rel=1e-12)


def test_density_peak_value():
    model = prior_like_model()
    mean, var = model.moments(np.array([[0.4]]))
    assert transition_density(model, mean[0], [0.4]) == pytest.approx(1 / math.sqrt(2 * math.pi * var[0, 0]), rel=1e-14)


def test_prior_like_density_ignores_current_state():
    model = prior_like_model()
    a = transition_density(model, [0.3], [-2.0])
    b = transition_density(model, [0.3], [2.0])
    assert a == pytest.approx(b, rel=1e-5)
    assert a == pytest.approx(gaussian_pdf(0.3, 0.0, 1.0), rel=1e-5)


def test_density_integrates_to_one(cubic_model):
    mean, var = cubic_model.moments(np.array([[1.0]]))
    sd = math.sqrt(var[0, 0])
    g = build_grid((mean[0, 0] - 12 * sd, mean[0, 0] + 12 * sd), 400)
    total = sum(w * transition_density(cubic_model, x, [1.0]) for x, w in zip(g.nodes, g.weights))
    assert total == pytest.approx(1.0, abs=1e-6)


def test_density_degenerate_at_noise_free_training_input():
    X = np.array([[0.0], [1.0]])
    model = fit(Kernel.squared_exponential(1.0, 1.0), TrainingSet(X, X, 0.0))
    with pytest.raises(DegenerateVariance):
        transition_density(model, [0.0], [0.0])
    with pytest.raises(DegenerateVariance):
        transition_matrix(model, build_grid((0.0, 1.0), 2))


def test_transition_matrix_entries_match_density(cubic_model):
    g = build_grid((-6.0, 4.0), 8)
    H = transition_matrix(cubic_model, g)
    assert np.all(np.isfinite(H)) and np.all(H >= 0)
    for i in (0, 3, 8):
        for j in (1, 4, 7):
            assert H[i, j] == pytest.approx(transition_density(cubic_model, g.nodes[i], g.nodes[j]), rel=1e-12)


def test_transition_matrix_2d_is_product_of_marginals():
    a, b = prior_like_model(1.0), prior_like_model(2.0)
    g = build_grid([(-3, 3), (-4, 4)], (3, 4))
    H = transition_matrix(product_model(a, b), g)
    i, j = 7, 12
    (xa, xb), (ya, yb) = g.nodes[i], g.nodes[j]
    expected = transition_density(a, [xa], [ya]) * transition_density(b, [xb], [yb])
    assert H[i, j] == pytest.approx(expected, rel=1e-12)


def test_dimension_mismatch(cubic_model):
    with pytest.raises(DimensionMismatch):
        transition_matrix(cubic_model, build_grid([(0, 1), (0, 1)], 2))
    with pytest.raises(DimensionMismatch):
        transition_density(cubic_model, [0.0, 1.0], [0.0])


def test_assemble_zero_kernel():
    g = build_grid((0.0, 1.0), 4)
    np.testing.assert_array_equal(assemble_M(np.zeros((5, 5)), g, 2.0), np.eye(5) / 2.0)


def test_assemble_row_pattern():
    g = build_grid((0.0, 1.0), 2)
    H = np.arange(1.0, 10.0).reshape(3, 3)
    M = assemble_M(H, g, 1.0)
    np.testing.assert_allclose(M[0], [1 - 0.25 * H[0, 0], -0.5 * H[0, 1], -0.25 * H[0, 2]])


def test_assemble_depends_on_weighted_product_only():
    g = build_grid((0.0, 2.0), 4)
    doubled = Grid(g.intervals, g.q, g.nodes, 2 * g.weights)
    H = np.random.default_rng(0).uniform(size=(5, 5))
    np.testing.assert_allclose(assemble_M(H / 2, doubled), assemble_M(H, g), rtol=1e-15)


def test_assemble_rejects_bad_input():
    g = build_grid((0.0, 1.0), 2)
    with pytest.raises(ValueError):
        assemble_M(np.zeros((3, 3)), g, 0.0)
    with pytest.raises(DimensionMismatch):
        assemble_M(np.zeros((4, 4)), g)


def test_singularity_check():
    smin, flag = singularity_check(np.eye(4))
    assert smin == pytest.approx(1.0) and not flag
    M = np.random.default_rng(1).normal(size=(4, 4))
    M[2] = M[1]
    smin, flag = singularity_check(M)
    assert smin <= 1e-14 and flag


def test_cubic_equilibrium(cubic_model, cubic_solution):
    sol = cubic_solution
    assert sol.summary()["singular"]
    assert sol.residual <= 1e-4
    assert np.all(sol.u >= 0)
    assert sol.mass == pytest.approx(1.0, abs=1e-8)
    H = transition_matrix(cubic_model, sol.grid)
    assert np.max(np.abs(sol.u - H @ (sol.grid.weights * sol.u))) <= 10 * 1e-4
    Mp, bp = stacked_system(assemble_M(H, sol.grid), sol.grid)
    assert sol.residual == pytest.approx(np.linalg.norm(Mp @ sol.u - bp), rel=1e-12)
    assert any("truncates" in w for w in sol.warnings)


def test_assembly_is_bitwise_reproducible(cubic_model):
    g = build_grid((-12.0, 8.0), 150)
    a = assemble_M(transition_matrix(cubic_model, g), g, 1.0)
    b = assemble_M(transition_matrix(cubic_model, g), g, 1.0)
    assert a.tobytes() == b.tobytes()


def test_prior_like_equilibrium_is_prior_marginal():
    sigma_f = 1.5
    g = build_grid((-6 * sigma_f, 6 * sigma_f), 200)
    sol = solve_equilibrium(prior_like_model(sigma_f), g)
    exact = gaussian_pdf(g.nodes[:, 0], 0.0, sigma_f ** 2)
    assert np.max(np.abs(sol.u - exact)) <= 1e-3


def test_truncating_grid_has_no_solution(cubic_model):
    with pytest.raises(NoSolution, match="^No solution"):
        solve_equilibrium(cubic_model, build_grid((0.0, 1.0), 10))


def test_multiple_invariant_regions_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="gpssm.equilibrium"):
        sol = solve_equilibrium(TwoWells(), build_grid((-10.0, 10.0), 80))
    assert any("not be unique" in w for w in sol.warnings)
    assert sol.mass == pytest.approx(1.0, abs=1e-8)
    assert np.all(sol.u >= 0)


def test_product_model_equilibrium_factorizes():
    # two independent contractive 1-D models
    X = np.linspace(-3, 3, 7)[:, None]
    a = fit(Kernel.squared_exponential(1.0, 2.0), TrainingSet(X, 0.5 * X, 1.0))
    b = fit(Kernel.squared_exponential(1.5, 1.5), TrainingSet(X, -0.3 * X + 0.5, 0.8))
    ia, ib, q = (-7.0, 7.0), (-8.0, 9.0), 28
    ua = solve_equilibrium(a, build_grid(ia, q)).u
    ub = solve_equilibrium(b, build_grid(ib, q)).u
    u2 = solve_equilibrium(product_model(a, b), build_grid([ia, ib], q)).u
    assert factorizes(u2, ua, ub) <= 1e-3


def test_convergence_study_basic(cubic_model):
    out = dict(convergence_study(cubic_model, (-12.0, 8.0), [75, 150, 150, 300]))
    assert out[300] == 0.0
    assert out[75] >= out[150] > 0.0
    with pytest.raises(ValueError):
        convergence_study(cubic_model, (-12.0, 8.0), [40, 90])
