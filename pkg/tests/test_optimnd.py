import numpy as np
import pytest

from dualquant.distributions import DistributionSpec, make_normal, make_uniform_box
from dualquant.errors import NonDifferentiableError
from dualquant.geometry import EUCLIDEAN_QUADRATIC as S2
from dualquant.geometry import Grid, NormSpec
from dualquant.lp import local_dq_solve
from dualquant.metrics import dq_values_batch, mc_dq_error
from dualquant.optim1d import gradient_1d
from dualquant.optimnd import (
    TrainConfig,
    TrainReport,
    cvlq_step,
    mc_gradient,
    refine,
    train,
)
from dualquant.rng import RngStream

TRIANGLE = Grid([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
U2 = make_uniform_box([0.0, 0.0], [1.0, 1.0])
CORNERS = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0))


def _point_mass(xi):
    xi = np.asarray(xi, dtype=float)

    def sampler(rng, n):
        return np.tile(xi, (n, 1))

    return DistributionSpec("point", len(xi), sampler,
                            strongly_continuous=False)


def test_cvlq_step_example():
    out = cvlq_step(TRIANGLE, [1 / 3, 1 / 3], 0.3)
    np.testing.assert_allclose(out.points[0], [0.05, 0.05], atol=1e-12)
    np.testing.assert_allclose(out.points[1], [0.95, 0.05], atol=1e-12)
    np.testing.assert_allclose(out.points[2], [0.05, 0.95], atol=1e-12)


def test_cvlq_step_zero_alpha_is_identity():
    out = cvlq_step(TRIANGLE, [0.2, 0.3], 0.0)
    assert np.array_equal(out.points, TRIANGLE.points)


def test_cvlq_step_vertex_moves_only_that_point():
    out = cvlq_step(TRIANGLE, [0.0, 0.0], 0.3)
    np.testing.assert_allclose(out.points[0], [0.15, 0.15], atol=1e-12)
    assert np.array_equal(out.points[1:], TRIANGLE.points[1:])


def test_cvlq_step_respects_pins():
    g = Grid(TRIANGLE.points, pinned={0})
    out = cvlq_step(g, [1 / 3, 1 / 3], 0.3)
    assert np.array_equal(out.points[0], g.points[0])
    assert out.pinned == {0}


def test_cvlq_step_outside_pulls_nearest_neighbour():
    out = cvlq_step(TRIANGLE, [2.0, 2.0], 0.3)
    np.testing.assert_allclose(out.points[1], [1.3, 0.6], atol=1e-12)
    assert np.array_equal(out.points[0], TRIANGLE.points[0])
    assert np.array_equal(out.points[2], TRIANGLE.points[2])


def test_cvlq_step_matches_solution_movement():
    rng = np.random.default_rng(8)
    g = Grid(rng.uniform(size=(7, 2)))
    w = rng.dirichlet(np.ones(7))
    xi = w @ g.points
    sol = local_dq_solve(g, xi, S2)
    out = cvlq_step(g, xi, 0.2)
    moved = dict(zip(sol.basis, sol.weights))
    z = sol.z_star()
    for i in range(g.n):
        if i in moved:
            want = g.points[i] - 0.2 * moved[i] * (g.points[i] - z)
            np.testing.assert_allclose(out.points[i], want, atol=1e-13)
        else:
            assert np.array_equal(out.points[i], g.points[i])


def test_cvlq_step_triangulation_path_agrees():
    from dualquant.delaunay import triangulate

    rng = np.random.default_rng(12)
    g = Grid(rng.uniform(size=(9, 2)))
    tri = triangulate(g)
    w = rng.dirichlet(np.ones(9))
    xi = w @ g.points
    a = cvlq_step(g, xi, 0.15)
    b = cvlq_step(g, xi, 0.15, tri=tri)
    np.testing.assert_allclose(a.points, b.points, atol=1e-10)


def test_cvlq_step_rejects_other_norms():
    with pytest.raises(ValueError):
        cvlq_step(TRIANGLE, [0.2, 0.2], 0.1, spec=NormSpec("l1", 2))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(steps=-1)
    with pytest.raises(ValueError):
        TrainConfig(steps=1, a=0.0)
    with pytest.raises(ValueError):
        TrainConfig(steps=1, b=0.5)
    with pytest.raises(ValueError):
        TrainConfig(steps=1, retriangulate_every=0)
    cfg = TrainConfig(steps=1, anchors=[[0, 0], [1, 1]])
    assert cfg.anchors == ((0.0, 0.0), (1.0, 1.0))


def test_train_zero_steps_returns_initial_grid():
    cfg = TrainConfig(steps=0, anchors=CORNERS, seed=3)
    rep = train(U2, 10, cfg)
    assert isinstance(rep, TrainReport)
    assert rep.grid.n == 10 and rep.grid.pinned == {0, 1, 2, 3}
    np.testing.assert_array_equal(rep.grid.points[:4], np.asarray(CORNERS))
    assert rep.outside_fraction == 0.0
    rep2 = train(U2, 10, cfg)
    assert np.array_equal(rep.grid.points, rep2.grid.points)


def test_train_is_bit_reproducible():
    cfg = TrainConfig(steps=3000, anchors=CORNERS, seed=11)
    a = train(U2, 12, cfg)
    b = train(U2, 12, cfg)
    assert np.array_equal(a.grid.points, b.grid.points)
    assert a.outside_fraction == b.outside_fraction


def test_train_improves_over_initial_grid():
    init = train(U2, 16, TrainConfig(steps=0, anchors=CORNERS, seed=11)).grid
    rep = train(U2, 16, TrainConfig(steps=30_000, anchors=CORNERS, seed=11))
    before = mc_dq_error(init, U2, S2, 100_000, RngStream(1234))
    after = mc_dq_error(rep.grid, U2, S2, 100_000, RngStream(1234))
    assert after.value < before.value
    assert after.value < 1 / 3  # the four-corner product grid's level


def test_train_pins_never_move():
    rep = train(U2, 12, TrainConfig(steps=5000, anchors=CORNERS, seed=2))
    np.testing.assert_array_equal(rep.grid.points[:4], np.asarray(CORNERS))


def test_train_normal_2d_completes():
    rep = train(make_normal(dim=2), 30, TrainConfig(steps=3000, seed=4))
    assert np.all(np.isfinite(rep.grid.points))
    assert 0.0 < rep.outside_fraction < 1.0


def test_train_trace_monotone_on_easy_case():
    cfg = TrainConfig(steps=3000, anchors=CORNERS, seed=5,
                      trace_every=1000, trace_samples=4096)
    rep = train(U2, 12, cfg)
    steps = [s for s, _ in rep.error_trace]
    assert steps == [0, 1000, 2000, 3000]
    vals = [e.value for _, e in rep.error_trace]
    assert all(v >= 0.0 for v in vals)
    assert vals[-1] < vals[0]


def test_train_1d_lp_route():
    dist = make_uniform_box([0.0], [1.0])
    cfg = TrainConfig(steps=800, anchors=((0.0,), (1.0,)), seed=6)
    rep = train(dist, 3, cfg)
    before = train(dist, 3, TrainConfig(steps=0, anchors=((0.0,), (1.0,)),
                                        seed=6)).grid
    a = mc_dq_error(rep.grid, dist, S2, 50_000, RngStream(42))
    b = mc_dq_error(before, dist, S2, 50_000, RngStream(42))
    assert a.value < b.value


def test_train_input_validation():
    with pytest.raises(ValueError):
        train(U2, 2, TrainConfig(steps=1))
    with pytest.raises(ValueError):
        train(U2, 3, TrainConfig(steps=1, anchors=CORNERS))


def test_mc_gradient_single_sample_block():
    g = mc_gradient(TRIANGLE, _point_mass([1 / 3, 1 / 3]), S2, 1,
                    RngStream(0))
    np.testing.assert_allclose(g[0], [-1 / 3, -1 / 3], atol=1e-12)
    np.testing.assert_allclose(g[1], [1 / 3, -1 / 3], atol=1e-12)
    np.testing.assert_allclose(g[2], [-1 / 3, 1 / 3], atol=1e-12)


def test_mc_gradient_zero_at_1d_optimum():
    dist = make_uniform_box([0.0], [1.0])
    grad, std = mc_gradient(Grid([0.0, 0.5, 1.0]), dist, S2, 40_000,
                            RngStream(7), return_std=True)
    assert abs(grad[1, 0]) <= 4.0 * std[1, 0]


def test_mc_gradient_matches_exact_1d():
    dist = make_uniform_box([0.0], [1.0])
    g = Grid([0.0, 0.3, 1.0])
    exact = gradient_1d(g, dist, "extended")
    grad, std = mc_gradient(g, dist, S2, 60_000, RngStream(13),
                            return_std=True)
    for i in range(3):
        assert abs(grad[i, 0] - exact[i]) <= 4.0 * std[i, 0] + 1e-12


def test_mc_gradient_matches_crn_finite_differences():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0.1, 0.9, size=(6, 2))
    g = Grid(pts)
    n_mc = 40_000
    grad, gstd = mc_gradient(g, U2, S2, n_mc, RngStream(77),
                             return_std=True)
    X = np.asarray(U2.sampler(RngStream(901).substream(0), n_mc))
    h = 1e-3
    for (i, j) in [(0, 0), (3, 1)]:
        up, dn = pts.copy(), pts.copy()
        up[i, j] += h
        dn[i, j] -= h
        d = (dq_values_batch(Grid(up), X, S2, extended=True)
             - dq_values_batch(Grid(dn), X, S2, extended=True)) / (2.0 * h)
        fd = float(d.mean())
        fd_std = float(d.std(ddof=1) / np.sqrt(n_mc))
        tol = 4.0 * np.hypot(gstd[i, j], fd_std) + 1e-4 * h
        assert abs(grad[i, j] - fd) <= tol


def test_mc_gradient_shards_do_not_consume_stream():
    rng = RngStream(55)
    a = mc_gradient(TRIANGLE, U2, S2, 4000, rng)
    b = mc_gradient(TRIANGLE, U2, S2, 4000, rng)
    assert np.array_equal(a, b)


def test_mc_gradient_rejects_nonsmooth_norms():
    with pytest.raises(NonDifferentiableError):
        mc_gradient(TRIANGLE, U2, NormSpec("l1", 2), 100, RngStream(0))
    with pytest.raises(NonDifferentiableError):
        mc_gradient(TRIANGLE, U2, NormSpec("l2", 1), 100, RngStream(0))


def test_mc_gradient_warns_on_degenerate_grid():
    square = Grid([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    with pytest.warns(RuntimeWarning):
        mc_gradient(square, U2, S2, 256, RngStream(1))


def test_refine_zero_iterations_is_identity():
    g = Grid([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.4, 0.4]])
    out = refine(g, U2, iters=0, rng=RngStream(0))
    assert out is g


def test_refine_never_hurts_fixed_seed_objective():
    rng = np.random.default_rng(10)
    g = Grid(np.vstack([np.asarray(CORNERS), rng.uniform(size=(5, 2))]),
             pinned={0, 1, 2, 3})
    seed_rng = RngStream(21)
    before = mc_dq_error(g, U2, S2, 20_000, seed_rng.substream(0),
                         extended=True).value
    out = refine(g, U2, iters=4, mc_samples=20_000, rng=RngStream(21))
    after = mc_dq_error(out, U2, S2, 20_000, seed_rng.substream(0),
                        extended=True).value
    assert after <= before
    np.testing.assert_array_equal(out.points[:4], g.points[:4])
    assert out.pinned == g.pinned


def test_refine_1d_moves_interior_point_toward_optimum():
    dist = make_uniform_box([0.0], [1.0])
    g = Grid([0.0, 0.4, 1.0], pinned={0, 2})
    out = refine(g, dist, iters=30, mc_samples=50_000, rng=RngStream(9))
    assert abs(out.points[1, 0] - 0.5) < 1e-2


def test_train_with_refine_config():
    cfg = TrainConfig(steps=2000, anchors=CORNERS, seed=14,
                      refine_iters=2, refine_samples=10_000)
    rep = train(U2, 10, cfg)
    plain = train(U2, 10, TrainConfig(steps=2000, anchors=CORNERS, seed=14))
    fixed = RngStream(333)
    a = mc_dq_error(rep.grid, U2, S2, 50_000, fixed)
    b = mc_dq_error(plain.grid, U2, S2, 50_000, fixed)
    assert a.value <= b.value + 4.0 * (a.std_error + b.std_error)
