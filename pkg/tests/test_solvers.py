import io

import numpy as np
import pytest

from l12refit.blocks import SupportSet
from l12refit.errors import NotInSupport, StepSizeViolation
from l12refit.operators import AnisotropicTV, Convolution, Gradient, IdentityForward
from l12refit.penalties import Penalty
from l12refit.solvers import (PrimalDualParams, PrimalDualState, convergence_residual,
                              iterative_bregman, joint_solve, posterior_refit, psi_estimate,
                              solve_biased)

Y1D = np.array([[0.0, 0.0, 10.0, 10.0]])


def _one_d(lam=2.0, iters=3000):
    shape = (1, 4, 1)
    return IdentityForward(shape), AnisotropicTV(shape), PrimalDualParams(lam=lam, iterations=iters)


def _segment_oracle(lam):
    # two constant segments of length 2: minimize (a^2 + (b-10)^2) + lam |b - a|
    # by hand: a = lam/2, b = 10 - lam/2 while lam < 10
    a = lam / 2
    return np.array([a, a, 10 - a, 10 - a])


def test_biased_one_d():
    phi, gamma, p = _one_d()
    xhat = solve_biased(phi, gamma, Y1D, p).xhat.ravel()
    np.testing.assert_allclose(xhat, [1, 1, 9, 9], atol=1e-3)
    np.testing.assert_allclose(xhat, _segment_oracle(2.0), atol=1e-3)


def test_biased_one_d_matches_convex_solver():
    cp = pytest.importorskip("cvxpy")
    x = cp.Variable(4)
    cp.Problem(cp.Minimize(0.5 * cp.sum_squares(x - Y1D.ravel()) + 2.0 * cp.norm1(cp.diff(x)))).solve()
    phi, gamma, p = _one_d()
    np.testing.assert_allclose(solve_biased(phi, gamma, Y1D, p).xhat.ravel(), x.value, atol=1e-3)


@pytest.mark.parametrize("penalty", list(Penalty))
def test_joint_one_d_removes_bias(penalty):
    phi, gamma, p = _one_d()
    res = joint_solve(phi, gamma, Y1D, p, penalty)
    np.testing.assert_allclose(res.xhat.ravel(), [1, 1, 9, 9], atol=1e-3)
    np.testing.assert_allclose(res.xtilde.ravel(), [0, 0, 10, 10], atol=1e-3)
    assert res.support.indices.tolist() == [1]


@pytest.mark.parametrize("penalty", ["ls", "sd", "qo"])
def test_posterior_one_d(penalty):
    phi, gamma, p = _one_d()
    b = solve_biased(phi, gamma, Y1D, p)
    r = posterior_refit(phi, gamma, Y1D, p, penalty, b.xhat, b.zhat, b.vhat)
    np.testing.assert_allclose(r.xtilde.ravel(), [0, 0, 10, 10], atol=1e-3)
    g = posterior_refit(phi, gamma, Y1D, p, penalty, b.xhat, b.zhat, reference="gradient")
    np.testing.assert_allclose(g.xtilde.ravel(), [0, 0, 10, 10], atol=1e-3)


def test_small_lambda_returns_data(rng):
    y = rng.uniform(0, 255, (8, 8, 3))
    res = solve_biased(IdentityForward(y.shape), Gradient(y.shape), y, PrimalDualParams(lam=1e-8, iterations=200))
    np.testing.assert_allclose(res.xhat, y, atol=1e-4)


def test_constant_and_zero_images():
    y = np.full((6, 5, 3), 42.0)
    phi, gamma = IdentityForward(y.shape), Gradient(y.shape)
    p = PrimalDualParams(lam=10.0, iterations=100)
    np.testing.assert_allclose(solve_biased(phi, gamma, y, p).xhat, y, atol=1e-10)
    res = joint_solve(phi, gamma, np.zeros(y.shape), p, "sd")
    assert np.all(res.xhat == 0) and np.all(res.xtilde == 0)


def test_psi_examples(rng):
    gamma = Gradient((4, 4, 1))
    lam, sigma = 3.0, 0.5
    # converged pair: zhat = lam * g / |g|, vhat = xhat
    x = rng.standard_normal((4, 4, 1))
    g = gamma.apply(x)
    nrm = np.linalg.norm(g, axis=1)
    supp = nrm > 0
    zhat = np.where(supp[:, None], lam * g / np.where(supp, nrm, 1)[:, None], 0.0)
    psi = psi_estimate(zhat, x, gamma, sigma, lam, SupportSet.from_mask(supp))
    np.testing.assert_allclose(psi[supp], g[supp], atol=1e-12)
    assert np.all(psi[~supp] == 0)


def test_psi_half_scaling():
    gamma = AnisotropicTV((1, 2, 1))  # blocks: dx0, dx1, dy0, dy1
    lam, sigma = 1.0, 1.0
    zhat = np.array([[0.5], [0.0], [0.0], [0.0]])
    v = np.array([[0.0, 1.5]])  # Gamma v = (1.5, 0, 0, 0) -> nu_0 = 2 = 2 lam
    psi = psi_estimate(zhat, v, gamma, sigma, lam, SupportSet([0], 4))
    assert psi[0, 0] == pytest.approx(1.0)
    with pytest.raises(NotInSupport):
        psi_estimate(zhat, v, gamma, sigma, lam, SupportSet([1], 4))


def test_psi_direction_follows_nu(rng):
    gamma = Gradient((5, 5, 3))
    zhat = rng.standard_normal((25, 6))
    v = rng.standard_normal((5, 5, 3)) * 10
    nu = zhat + 0.2 * gamma.apply(v)
    supp = np.linalg.norm(nu, axis=1) > 1.0
    psi = psi_estimate(zhat, v, gamma, 0.2, 1.0, supp)
    cos = np.sum(psi[supp] * nu[supp], axis=1) / (np.linalg.norm(psi[supp], axis=1) * np.linalg.norm(nu[supp], axis=1))
    np.testing.assert_allclose(cos, 1.0, atol=1e-12)


def test_posterior_empty_support_gives_mean(rng):
    y = rng.uniform(0, 100, (6, 6, 3))
    phi, gamma = IdentityForward(y.shape), Gradient(y.shape)
    p = PrimalDualParams(lam=1e6, iterations=3000)
    b = solve_biased(phi, gamma, y, p)
    r = posterior_refit(phi, gamma, y, p, "sd", b.xhat, b.zhat, b.vhat)
    assert len(r.support) == 0
    np.testing.assert_allclose(r.xtilde, np.broadcast_to(y.mean(axis=(0, 1)), y.shape), atol=1e-3)


def test_iterative_bregman_first_step_is_biased(rng):
    y = rng.uniform(0, 100, (8, 8, 3))
    phi, gamma = IdentityForward(y.shape), Gradient(y.shape)
    p = PrimalDualParams(lam=20.0, iterations=300)
    steps = iterative_bregman(phi, gamma, y, p, 3)
    assert len(steps) == 3
    np.testing.assert_allclose(steps[0], solve_biased(phi, gamma, y, p).xhat, atol=1e-6)
    res = [np.linalg.norm(s - y) for s in steps]
    assert res[2] < res[0]
    with pytest.raises(ValueError):
        iterative_bregman(phi, gamma, y, p, 0)


def test_deterministic(rng):
    y = rng.uniform(0, 100, (8, 8, 3))
    phi, gamma = IdentityForward(y.shape), Gradient(y.shape)
    p = PrimalDualParams(lam=20.0, iterations=100)
    a = joint_solve(phi, gamma, y, p, "sd")
    b = joint_solve(phi, gamma, y, p, "sd")
    np.testing.assert_array_equal(a.xtilde, b.xtilde)


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
def test_theta_variants_converge(theta):
    phi, gamma, _ = _one_d()
    p = PrimalDualParams(lam=2.0, iterations=5000, theta=theta)
    np.testing.assert_allclose(solve_biased(phi, gamma, Y1D, p).xhat.ravel(), [1, 1, 9, 9], atol=1e-3)


def test_step_size_violation():
    y = np.zeros((8, 8, 1))
    with pytest.raises(StepSizeViolation):
        solve_biased(IdentityForward(y.shape), Gradient(y.shape), y, PrimalDualParams(lam=1.0, tau=1.0, sigma=1.0))
    with pytest.raises(ValueError):
        PrimalDualParams(lam=-1.0).validate()
    with pytest.raises(ValueError):
        PrimalDualParams(lam=1.0, theta=2.0).validate()


def test_diagnostics_and_callback(rng):
    y = rng.uniform(0, 100, (6, 6, 3))
    phi, gamma = IdentityForward(y.shape), Gradient(y.shape)
    buf = io.StringIO()
    seen = []
    joint_solve(phi, gamma, y, PrimalDualParams(lam=20.0, iterations=15), "qo",
                diagnostics=buf, callback=lambda info: seen.append(info.k))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iteration,residual,support_size"
    assert len(lines) == 16
    assert seen == list(range(1, 16))


def test_tolerance_stops_early():
    phi, gamma, _ = _one_d()
    res = solve_biased(phi, gamma, Y1D, PrimalDualParams(lam=2.0, iterations=10000, tol=1e-10))
    assert res.iterations < 10000


def test_convergence_residual_properties(rng):
    a = PrimalDualState(rng.standard_normal((4, 4, 1)) * 10, rng.standard_normal((16, 2)), np.zeros((4, 4, 1)))
    assert convergence_residual(a, a) == 0.0
    b = PrimalDualState(a.x + 1, a.z, a.v)
    c = 3.0
    ac = PrimalDualState(c * a.x, a.z, a.v)
    bc = PrimalDualState(c * b.x, b.z, b.v)
    assert convergence_residual(ac, bc) == pytest.approx(convergence_residual(a, b))


def _small_denoising():
    from l12refit.experiments import add_gaussian_noise, synthetic_color_squares
    clean = synthetic_color_squares(32, 32, seed=0)
    return add_gaussian_noise(clean, 20.0, 0)


@pytest.mark.xfail(strict=True, reason="dual change decays like 1/k: 1.8e-5 after 5000 iterations")
def test_convergence_residual_below_1e6_within_5000():
    y = _small_denoising()
    rows = solve_biased(IdentityForward(y.shape), Gradient(y.shape), y,
                        PrimalDualParams(lam=86.0, iterations=5000, tol=1e-6),
                        diagnostics=io.StringIO()).history
    assert rows[-1][1] < 1e-6


def test_convergence_residual_decays():
    y = _small_denoising()
    primal = {}
    prev = {}

    def cb(info):
        if "x" in prev:
            primal[info.k] = np.linalg.norm(info.biased.x - prev["x"]) / max(1.0, np.linalg.norm(prev["x"]))
        prev["x"] = info.biased.x.copy()

    rows = solve_biased(IdentityForward(y.shape), Gradient(y.shape), y,
                        PrimalDualParams(lam=86.0, iterations=5000), callback=cb).history
    assert primal[5000] < 1e-6
    res = [r[1] for r in rows]
    assert res[4999] < res[1999] < res[999] < 1e-3


def test_deblur_matches_convex_solver():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(4)
    shape = (6, 6, 1)
    kernel = np.array([[0.2, 0.5, 0.3]])
    phi = Convolution(kernel, shape)
    gamma = Gradient(shape)
    y = rng.uniform(0, 10, shape)
    lam = 1.0
    n = 36
    phi_mat = np.column_stack([phi.apply(e.reshape(shape)).ravel() for e in np.eye(n)])
    g_mat = np.column_stack([gamma.apply(e.reshape(shape)).ravel() for e in np.eye(n)])
    x = cp.Variable(n)
    gx = cp.reshape(g_mat @ x, (n, 2), order="C")
    cp.Problem(cp.Minimize(0.5 * cp.sum_squares(phi_mat @ x - y.ravel()) + lam * cp.sum(cp.norm(gx, 2, axis=1)))).solve()
    res = solve_biased(phi, gamma, y, PrimalDualParams(lam=lam, iterations=20000))
    np.testing.assert_allclose(res.xhat.ravel(), x.value, atol=2e-3)
