import numpy as np
import pytest

from dualquant.distributions import (
    make_exponential,
    make_normal,
    make_uniform_box,
)
from dualquant.errors import MaxIterationsError
from dualquant.geometry import Grid
from dualquant.metrics import exact_1d_dq_error, theoretical_1d_uniform
from dualquant.optim1d import (
    NewtonReport,
    gradient_1d,
    hessian_1d,
    newton_solve,
)

U01 = make_uniform_box([0.0], [1.0])


def _fd_gradient(xs, dist, mode, h=1e-6):
    out = np.zeros(len(xs))
    lo = 1 if mode == "compact" else 0
    hi = len(xs) - 1 if mode == "compact" else len(xs)
    for i in range(lo, hi):
        up, dn = xs.copy(), xs.copy()
        up[i] += h
        dn[i] -= h
        fu = exact_1d_dq_error(Grid(up), dist, extended=mode == "extended")
        fd = exact_1d_dq_error(Grid(dn), dist, extended=mode == "extended")
        out[i] = (fu - fd) / (2.0 * h)
    return out


def test_gradient_example_values():
    g = gradient_1d(Grid([0.0, 0.6, 1.0]), U01)
    np.testing.assert_allclose(g, [0.0, 0.1, 0.0], atol=1e-14)
    g_opt = gradient_1d(Grid([0.0, 0.5, 1.0]), U01)
    np.testing.assert_allclose(g_opt, 0.0, atol=1e-14)


def test_gradient_antisymmetric_for_symmetric_normal():
    g = gradient_1d(Grid([-1.2, -0.4, 0.4, 1.2]), make_normal(), "extended")
    np.testing.assert_allclose(g, -g[::-1], atol=1e-13)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("mode,dist,span", [
    ("compact", U01, (0.0, 1.0)),
    ("extended", make_normal(0.1, 0.9), (-1.5, 1.5)),
    ("extended", make_exponential(1.3), (0.05, 2.5)),
])
def test_gradient_matches_finite_differences(seed, mode, dist, span):
    rng = np.random.default_rng(seed)
    inner = np.sort(rng.uniform(span[0], span[1], size=4))
    if mode == "compact":
        xs = np.concatenate(([0.0], np.clip(inner, 0.01, 0.99), [1.0]))
        xs = np.unique(xs)
        if len(xs) < 4:
            xs = np.array([0.0, 0.3, 0.7, 1.0])
    else:
        xs = inner
    g = gradient_1d(Grid(xs), dist, mode)
    fd = _fd_gradient(xs, dist, mode)
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_hessian_example_values():
    h = hessian_1d(Grid([0.0, 0.6, 1.0]), U01)
    assert h[1, 1] == pytest.approx(1.0)
    assert h[1, 2] == pytest.approx(-0.4)
    assert h[2, 1] == pytest.approx(-0.4)
    np.testing.assert_allclose(h, h.T)


@pytest.mark.parametrize("mode,dist", [
    ("compact", U01),
    ("extended", make_normal()),
])
def test_hessian_matches_gradient_differences(mode, dist):
    xs = (np.array([0.0, 0.25, 0.55, 0.8, 1.0]) if mode == "compact"
          else np.array([-1.0, -0.3, 0.2, 0.9]))
    h = hessian_1d(Grid(xs), dist, mode)
    step = 1e-6
    cols = range(1, len(xs) - 1) if mode == "compact" else range(len(xs))
    for j in cols:
        up, dn = xs.copy(), xs.copy()
        up[j] += step
        dn[j] -= step
        fd = (gradient_1d(Grid(up), dist, mode)
              - gradient_1d(Grid(dn), dist, mode)) / (2.0 * step)
        rows = slice(1, len(xs) - 1) if mode == "compact" else slice(None)
        np.testing.assert_allclose(h[rows, j], fd[rows], rtol=2e-5,
                                   atol=1e-6)


def test_hessian_extended_adds_tail_mass():
    dist = make_normal()
    xs = np.array([-0.8, 0.0, 0.8])
    he = hessian_1d(Grid(xs), dist, "extended")
    pdf = dist.analytics.pdf
    tail = dist.analytics.cdf(xs[0])
    expected = (xs[1] - xs[0]) * pdf(xs[0]) + 2.0 * tail
    assert he[0, 0] == pytest.approx(expected, rel=1e-12)


def test_gradient_rejects_bad_input():
    with pytest.raises(ValueError):
        gradient_1d(Grid([0.5, 0.2, 1.0]), U01)
    with pytest.raises(ValueError):
        gradient_1d(Grid([0.2, 0.8]), U01)  # support exceeds hull
    with pytest.raises(ValueError):
        gradient_1d(Grid([0.0, 1.0]), make_normal(), "compact")
    with pytest.raises(ValueError):
        gradient_1d(Grid([0.0, 1.0]), U01, "fancy")


def test_newton_one_step_from_biased_init():
    rep = newton_solve(U01, 3, init=[0.0, 0.6, 1.0])
    assert rep.converged and rep.iterations == 1
    np.testing.assert_allclose(rep.grid.points[:, 0], [0.0, 0.5, 1.0],
                               atol=1e-12)


@pytest.mark.parametrize("n", [3, 11])
def test_newton_uniform_recovers_equidistant_optimum(n):
    rep = newton_solve(U01, n)
    ref, err = theoretical_1d_uniform(n)
    np.testing.assert_allclose(rep.grid.points, ref.points, atol=1e-10)
    assert exact_1d_dq_error(rep.grid, U01) == pytest.approx(err, abs=1e-12)
    assert rep.converged and rep.final_gradient_norm <= 1e-10


def test_newton_extended_normal_symmetric():
    rep = newton_solve(make_normal(), 5, "extended")
    xs = rep.grid.points[:, 0]
    assert rep.converged
    np.testing.assert_allclose(xs, -xs[::-1], atol=1e-8)


def test_newton_extended_exponential_converges():
    rep = newton_solve(make_exponential(2.0), 4, "extended")
    assert rep.converged
    xs = rep.grid.points[:, 0]
    assert np.all(np.diff(xs) > 0.0) and xs[0] > 0.0


@pytest.mark.parametrize("dist,mode", [
    (U01, "compact"),
    (make_normal(0.5, 2.0), "extended"),
    (make_exponential(0.7), "extended"),
])
def test_newton_fixed_point_is_local_minimum(dist, mode):
    rep = newton_solve(dist, 5, mode)
    xs = rep.grid.points[:, 0]
    base = exact_1d_dq_error(rep.grid, dist, extended=mode == "extended")
    for i in (1, 2, 3):
        for eps in (1e-3, -1e-3):
            bumped = xs.copy()
            bumped[i] += eps
            val = exact_1d_dq_error(Grid(bumped), dist,
                                    extended=mode == "extended")
            assert val > base


def test_newton_preserves_ordering_each_run():
    for seed in range(3):
        rng = np.random.default_rng(seed)
        init = np.sort(rng.uniform(0.05, 0.95, size=4))
        rep = newton_solve(U01, 6, init=np.concatenate(([0.0], init, [1.0])))
        assert np.all(np.diff(rep.grid.points[:, 0]) > 0.0)


def test_newton_max_iterations_raises_with_report():
    with pytest.raises(MaxIterationsError) as exc:
        newton_solve(make_normal(), 7, "extended", max_iter=1)
    rep = exc.value.report
    assert isinstance(rep, NewtonReport)
    assert not rep.converged and rep.iterations == 1


def test_newton_input_validation():
    with pytest.raises(ValueError):
        newton_solve(U01, 1)
    with pytest.raises(ValueError):
        newton_solve(make_normal(), 3, "compact")
    with pytest.raises(ValueError):
        newton_solve(U01, 3, init=[0.3, 0.2, 0.9])
