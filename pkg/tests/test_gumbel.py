import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialpolicy.autodiff import (
    EPS,
    Graph,
    Rng,
    Tensor,
    gumbel_from_uniform,
    gumbel_sample,
    gumbel_softmax,
    gumbel_softmax_st,
    one_hot_argmax,
    straight_through,
    tsum,
)

EULER_GAMMA = 0.5772156649015329


def gumbel_max_frequencies(log_p: np.ndarray, n: int, rng: Rng) -> np.ndarray:
    g = gumbel_sample(rng, (n, len(log_p))).data
    hard = one_hot_argmax(log_p + g, axis=-1)
    return hard.mean(axis=0)


def test_rng_is_reproducible_and_spawns_are_independent():
    a, b = Rng(3).spawn("x").uniform(5), Rng(3).spawn("x").uniform(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(Rng(3).spawn("x").uniform(5), Rng(3).spawn("y").uniform(5))
    assert not np.array_equal(Rng(3).uniform(5), Rng(4).uniform(5))


def test_gumbel_sample_mean_and_variance():
    g = gumbel_sample(Rng(0), 200_000).data
    se = np.pi / np.sqrt(6) / np.sqrt(len(g))
    assert abs(g.mean() - EULER_GAMMA) < 4 * se
    assert abs(g.var() - np.pi ** 2 / 6) < 0.05


def test_gumbel_clamp_keeps_noise_finite():
    g = gumbel_from_uniform(np.array([0.0, 1.0, EPS, 1 - EPS]))
    assert np.all(np.isfinite(g))
    assert g[0] == g[2] and g[1] == g[3]


def test_gumbel_sample_rejects_empty():
    with pytest.raises(ValueError):
        gumbel_sample(Rng(0), 0)


@pytest.mark.parametrize("k", [2, 5])
def test_gumbel_max_matches_softmax_law(k):
    rng = Rng(21).spawn(k)
    n = 100_000
    for trial in range(3):
        logits = rng.spawn(trial).normal(k, scale=1.5)
        p = np.exp(logits - logits.max())
        p /= p.sum()
        freq = gumbel_max_frequencies(np.log(p), n, rng.spawn(f"draws{trial}"))
        sigma = np.sqrt(p * (1 - p) / n)
        assert np.all(np.abs(freq - p) <= 3 * sigma + 1e-12), (freq, p)


def test_temperature_must_be_positive():
    for tau in (0.0, -1.0):
        with pytest.raises(ValueError):
            gumbel_softmax(np.zeros(3), tau, Rng(0))


def test_injected_noise_is_used_verbatim():
    log_p = np.log(np.array([0.2, 0.3, 0.5]))
    noise = np.array([1.0, 0.0, -1.0])
    y = gumbel_softmax(log_p, 0.7, noise=noise).data
    z = (log_p + noise) / 0.7
    expected = np.exp(z - z.max()) / np.exp(z - z.max()).sum()
    np.testing.assert_allclose(y, expected, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(0.1, 5.0), st.integers(0, 2**31))
def test_relaxed_sample_is_on_the_simplex(logits, tau, seed):
    y = gumbel_softmax(np.array(logits), tau, Rng(seed)).data
    assert np.all(y > 0)
    assert abs(y.sum() - 1.0) < 1e-12


def test_relaxed_sample_sums_to_one_at_low_temperature():
    y = gumbel_softmax(Rng(1).normal((50, 4)), 0.005, Rng(2)).data
    assert np.all(y >= 0)
    np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.integers(0, 2**31))
def test_straight_through_forward_is_one_hot_at_the_argmax(logits, seed):
    logits = np.array(logits)
    y_soft = gumbel_softmax(logits, 0.5, Rng(seed))
    y = gumbel_softmax_st(logits, 0.5, Rng(seed)).data
    assert y.sum() == 1.0 and set(np.unique(y)) <= {0.0, 1.0}
    assert y[np.argmax(y_soft.data)] == 1.0


def test_straight_through_ties_pick_the_lowest_index():
    np.testing.assert_array_equal(straight_through(Tensor(np.array([0.5, 0.5]))).data, [1.0, 0.0])


def test_straight_through_backward_is_the_soft_gradient():
    rng = Rng(5)
    logits0 = rng.normal((3, 4))
    noise = gumbel_sample(rng, (3, 4)).data
    w = rng.normal((3, 4))
    grads = []
    for st_path in (True, False):
        x = Tensor(logits0.copy(), requires_grad=True)
        with Graph() as g:
            y = (gumbel_softmax_st if st_path else gumbel_softmax)(x, 0.8, noise=noise)
            loss = tsum(y * w)
        g.backward(loss)
        grads.append(x.grad)
    np.testing.assert_array_equal(grads[0], grads[1])
