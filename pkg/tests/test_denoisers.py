import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from ddir.denoisers import (AveragedDenoiser, IdentityDenoiser, MedianDenoiser,
                            TVProximalDenoiser, c_q, estimate_q, total_variation, tv_objective,
                            tv_prox)
from ddir.grid import RandomSource, norm


def median_oracle(u, w):
    """Per-pixel sort with half-sample symmetric padding."""
    r = w // 2
    n, m = u.shape
    out = np.empty_like(u)
    def ix(i, size):
        while i < 0 or i >= size:
            i = -i - 1 if i < 0 else 2 * size - i - 1
        return i
    for i in range(n):
        for j in range(m):
            vals = sorted(u[ix(i + a, n), ix(j + b, m)]
                          for a in range(-r, r + 1) for b in range(-r, r + 1))
            out[i, j] = vals[len(vals) // 2]
    return out


def tv_oracle(u):
    """Isotropic TV written out with explicit loops."""
    n, m = u.shape
    total = 0.0
    for i in range(n):
        for j in range(m):
            dx = u[i, j + 1] - u[i, j] if j + 1 < m else 0.0
            dy = u[i + 1, j] - u[i, j] if i + 1 < n else 0.0
            total += np.hypot(dx, dy)
    return total


def subgradient_prox(u, omega, iters=20000):
    """Best objective value from subgradient descent with 1/sqrt(k) steps."""
    y = u.copy()
    best = np.inf
    for k in range(1, iters + 1):
        gx = np.zeros_like(y)
        gy = np.zeros_like(y)
        gx[:, :-1] = y[:, 1:] - y[:, :-1]
        gy[:-1, :] = y[1:, :] - y[:-1, :]
        mag = np.hypot(gx, gy)
        safe = np.where(mag > 0, mag, 1.0)
        px = np.where(mag > 0, gx / safe, 0.0)
        py = np.where(mag > 0, gy / safe, 0.0)
        # subgradient of TV is -div(p)
        sub = np.zeros_like(y)
        sub[:, :-1] -= px[:, :-1]
        sub[:, 1:] += px[:, :-1]
        sub[:-1, :] -= py[:-1, :]
        sub[1:, :] += py[:-1, :]
        grad = omega * sub + (y - u)
        obj = omega * tv_oracle(y) if k % 50 == 0 or k == iters else None
        if obj is not None:
            best = min(best, obj + 0.5 * np.sum((u - y) ** 2))
        y = y - 0.05 / np.sqrt(k) * grad
    return best


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 3, 5]))
def test_median_matches_sort_oracle(seed, window):
    u = RandomSource(seed).uniform((9, 11))
    out = MedianDenoiser(window).transform(u)
    assert np.array_equal(out, median_oracle(u, window))


def test_median_window_validation():
    for bad in (0, 2, -3):
        with pytest.raises(ValueError):
            MedianDenoiser(bad)


def test_median_fixes_constants():
    u = np.full((10, 10), 0.4)
    assert np.array_equal(MedianDenoiser().transform(u), u)


def test_total_variation_matches_loops():
    u = RandomSource(1).standard_normal((7, 9))
    assert total_variation(u) == pytest.approx(tv_oracle(u), rel=1e-13)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_tv_prox_matches_subgradient_oracle(seed):
    u = RandomSource(seed).uniform((8, 8))
    omega = 0.2
    y, _ = tv_prox(u, omega, max_iter=2000, tol=1e-10)
    ref = subgradient_prox(u, omega)
    got = tv_objective(y, u, omega)
    assert got <= ref + 1e-3
    assert abs(got - ref) < 1e-3


def test_tv_prox_budget_controls_accuracy():
    # the 50-step default is a speed/accuracy trade-off, not a converged prox
    u = np.zeros((8, 8))
    u[:, 3:] = 1.0
    y_ref, _ = tv_prox(u, 0.2, max_iter=20000, tol=1e-14)
    best = tv_objective(y_ref, u, 0.2)
    gaps = [tv_objective(TVProximalDenoiser(0.2, dual_iters=k).prox(u), u, 0.2) - best
            for k in (50, 200, 1000)]
    assert gaps[0] < 2e-2
    assert gaps[2] <= gaps[1] < gaps[0]
    assert gaps[2] < 1e-4


def test_prox_never_worse_than_input():
    rng = RandomSource(8)
    for _ in range(5):
        u = rng.uniform((16, 16))
        y = TVProximalDenoiser(0.3).prox(u)
        assert tv_objective(y, u, 0.3) <= tv_objective(u, u, 0.3)


def test_tv_prox_zero_weight_is_identity():
    u = RandomSource(4).uniform((5, 5))
    y, its = tv_prox(u, 0.0)
    assert its == 0 and np.array_equal(y, u)


def test_tv_prox_preserves_mean():
    u = RandomSource(5).uniform((16, 16))
    y = TVProximalDenoiser(0.5).prox(u)
    assert y.mean() == pytest.approx(u.mean(), abs=1e-12)


def test_scaled_tv_fixed_point_is_zero():
    D = TVProximalDenoiser(0.2)
    assert np.array_equal(D(np.zeros((6, 6))), np.zeros((6, 6)))
    assert D.q_hint == pytest.approx(1 / 1.2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_scaled_tv_is_contractive(seed):
    rng = RandomSource(seed)
    u, v = rng.uniform((12, 12), 0, 255), rng.uniform((12, 12), 0, 255)
    D = TVProximalDenoiser(0.2)
    assert norm(D(u) - D(v)) <= D.q_hint * norm(u - v) * (1 + 1e-6)


@pytest.mark.parametrize("h", [0.1, 0.5, 0.9])
def test_averaged_lipschitz_bound(h):
    base = TVProximalDenoiser(0.2)
    Dh = AveragedDenoiser(base, h)
    rng = RandomSource(6)
    bound = Dh.lipschitz_bound(base.q_hint)
    assert bound == pytest.approx(1 - h * (1 - 1 / 1.2))
    for _ in range(20):
        u, v = rng.uniform((10, 10), 0, 255), rng.uniform((10, 10), 0, 255)
        assert norm(Dh(u) - Dh(v)) <= bound * norm(u - v) * (1 + 1e-6)


def test_averaged_denoiser_shares_fixed_points():
    u = np.full((6, 6), 0.7)
    Dh = AveragedDenoiser(MedianDenoiser(), 0.3)
    assert np.allclose(Dh(u), u)
    with pytest.raises(ValueError):
        AveragedDenoiser(MedianDenoiser(), 1.0)


def test_identity_q_is_one():
    q = estimate_q(IdentityDenoiser(), 10, RandomSource(0), shape=(8, 8))
    assert q == pytest.approx(1.0)


def test_estimate_q_tv_and_median():
    q_tv = estimate_q(TVProximalDenoiser(0.2), 20, RandomSource(0), shape=(32, 32))
    assert q_tv <= 1 / 1.2 + 1e-6
    q_med = estimate_q(MedianDenoiser(3), 20, RandomSource(0), shape=(32, 32))
    assert 0.3 <= q_med <= 0.8


def test_estimate_q_is_seeded():
    a = estimate_q(MedianDenoiser(), 5, RandomSource(3), shape=(16, 16))
    b = estimate_q(MedianDenoiser(), 5, RandomSource(3), shape=(16, 16))
    assert a == b
    with pytest.raises(ValueError):
        estimate_q(MedianDenoiser(), 0)


def test_c_q_values():
    assert c_q(1 / 1.2) == pytest.approx(0.0496, abs=1e-4)
    assert c_q(0.0) == 1.0
    assert c_q(1.0) == 0.0


def test_sklearn_protocol():
    D = TVProximalDenoiser(omega=0.3)
    assert D.get_params()["omega"] == 0.3
    E = clone(D).set_params(omega=0.1)
    assert E.omega == 0.1 and D.omega == 0.3
    u = RandomSource(7).uniform((8, 8))
    assert np.array_equal(D.fit(u).transform(u), D.fit_transform(u))
