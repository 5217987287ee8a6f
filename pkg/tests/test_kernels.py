"""The numba and numpy versions of every kernel must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from planpace import kernels
from planpace._jit import NO_JIT_ENV

finite = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 8), elements=finite), st.floats(0.01, 10))
def test_projection_agrees(point, radius):
    np.testing.assert_allclose(kernels.project_l1_ball_nb(point, radius),
                               kernels.project_l1_ball_np(point, radius), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 10), elements=st.floats(-700, 700)))
def test_softmax_agrees_and_normalises(logw):
    a, b = kernels.softmax_nb(logw), kernels.softmax_np(logw)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)
    assert a.sum() == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.floats(0, 1, exclude_max=True), st.integers(0, 1000))
def test_sample_index_agrees(K, u, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(K))
    i = kernels.sample_index_nb(p, u)
    assert i == kernels.sample_index_np(p, u)
    assert 0 <= i < K
    # inverse-CDF: u falls inside the chosen arm's interval
    cdf = np.concatenate([[0.0], np.cumsum(p)])
    assert cdf[i] <= u + 1e-12


def test_sample_index_ignores_zero_mass_arms():
    p = np.array([0.0, 0.5, 0.0, 0.5])
    assert kernels.sample_index_np(p, 0.0) == 1 == kernels.sample_index_nb(p, 0.0)
    assert kernels.sample_index_np(p, 0.999999) == 3 == kernels.sample_index_nb(p, 0.999999)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_best_response_agrees(seed):
    rng = np.random.default_rng(seed)
    K, m = rng.integers(2, 6), rng.integers(1, 3)
    # coarse values produce ties often
    f = rng.integers(0, 3, size=K) / 2.0
    c = rng.integers(0, 3, size=(K, m)) / 2.0
    lam = rng.integers(0, 3, size=m) / 2.0
    assert kernels.best_response_nb(f, c, lam) == kernels.best_response_np(f, c, lam)


def test_uniform_block_agrees_and_is_counter_based():
    seed = np.uint64(123456789)
    a = kernels.uniform_block_nb(seed, 50, 3, 2, 0)
    b = kernels.uniform_block_np(seed, 50, 3, 2, 0)
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0 and a.max() < 1
    # an offset block is a slice of the full block
    np.testing.assert_array_equal(kernels.uniform_block_np(seed, 10, 3, 2, 20), b[20:30])
    # large python ints are accepted by the public wrapper
    big = kernels.uniform_block(2**64 - 1, 4, 1, 1)
    assert big.shape == (4, 1, 1)


def test_pivot_agrees():
    rng = np.random.default_rng(0)
    tab = rng.normal(size=(6, 9))
    a, b = tab.copy(), tab.copy()
    kernels.pivot_nb(a, 2, 4)
    kernels.pivot_np(b, 2, 4)
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert a[2, 4] == pytest.approx(1.0)
    np.testing.assert_allclose(np.delete(a[:, 4], 2), 0.0, atol=1e-12)


def test_grid_max_agrees():
    rng = np.random.default_rng(1)
    for n in (1, 2, 3):
        A = rng.uniform(0, 1, size=(2, n))
        b = rng.uniform(0.5, 1.5, size=2)
        E = np.zeros((0, n))
        e = np.zeros(0)
        c = rng.uniform(-1, 1, size=n)
        va, xa = kernels.grid_max_nb(A, b, E, e, c, 0.05, 2.0, 0.01)
        vb, xb = kernels.grid_max_np(A, b, E, e, c, 0.05, 2.0, 0.01)
        assert va == pytest.approx(vb)


def test_numpy_backend_selected_by_env_flag():
    code = "from planpace._jit import backend_name; print(backend_name())"
    env = dict(os.environ, **{NO_JIT_ENV: "1"})
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
