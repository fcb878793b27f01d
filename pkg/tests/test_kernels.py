import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from regretlab import _kernels

BACKENDS = ["python"]
try:
    _kernels.backend("cython")
    BACKENDS.append("cython")
except ImportError:
    pass

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
histories = st.tuples(st.integers(1, 30), st.integers(1, 5)).flatmap(
    lambda s: arrays(np.float64, s, elements=finite))


def close(a, b, rel=1e-12):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.allclose(a, b, rtol=rel, atol=rel * max(1.0, float(np.abs(b).max(initial=0.0))))


def test_active_backend_is_reported():
    assert _kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("name", BACKENDS)
@given(G=histories)
@settings(max_examples=60, deadline=None)
def test_history_kernels_match_loops(name, G):
    k = _kernels.backend(name)
    assert close(k.prefix_sq_norms(G), oracles.prefix_sq_norms(G))
    assert close(k.lemma4_terms(G), oracles.lemma4_terms(G))
    assert close(k.lemma103_terms(G), oracles.lemma103_terms(G))
    mh, vh = k.adam_moments(G, 0.9, 0.999, 0.99)
    omh, ovh = oracles.adam_moments(G, 0.9, 0.999, 0.99)
    assert close(mh, omh) and close(vh, ovh)
    assert close(k.lemma104_terms(G, 0.8, 0.99), oracles.lemma104_terms(G, 0.8, 0.99))


@pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")
@given(G=histories, b1=st.floats(0, 0.99), b2=st.floats(0, 0.999), lam=st.floats(0.5, 1))
@settings(max_examples=100, deadline=None)
def test_backends_agree(G, b1, b2, lam):
    c, p = _kernels.backend("cython"), _kernels.backend("python")
    for fn in ("prefix_sq_norms", "lemma4_terms", "lemma103_terms"):
        assert close(getattr(c, fn)(G), getattr(p, fn)(G))
    for a, b in zip(c.adam_moments(G, b1, b2, lam), p.adam_moments(G, b1, b2, lam)):
        assert close(a, b)
    assert close(c.lemma104_terms(G, b1, b2), p.lemma104_terms(G, b1, b2))


@pytest.mark.parametrize("name", BACKENDS)
def test_update_kernels(name):
    k = _kernels.backend(name)
    theta = np.array([1.0, -2.0, 0.5])
    accum = np.array([0.0, 4.0, 1.0])
    g = np.array([2.0, 0.0, -1.0])
    t2, a2 = k.adagrad_update(theta, accum, g, 0.1, 0.0)
    assert close(a2, [4.0, 4.0, 2.0])
    assert close(t2, [1.0 - 0.1 * 2 / 2, -2.0, 0.5 + 0.1 / math.sqrt(2)])
    # 0/0 coordinate: no step
    t3, _ = k.adagrad_update(np.zeros(1), np.zeros(1), np.zeros(1), 1.0, 0.0)
    assert t3[0] == 0.0

    m = np.zeros(3)
    v = np.zeros(3)
    t4, m4, v4 = k.adam_update(theta, m, v, g, 0.9, 0.999, 0.1, 0.001, 0.01, 0.0)
    assert close(m4, 0.1 * g) and close(v4, 0.001 * g * g)
    assert close(t4, theta - 0.01 * np.sign(g))


@pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")
@given(d=st.integers(1, 6), seed=st.integers(0, 2**16))
@settings(max_examples=50, deadline=None)
def test_update_backends_agree(d, seed):
    rng = np.random.default_rng(seed)
    theta, g = rng.normal(size=d), rng.normal(size=d)
    accum, m = rng.uniform(size=d), rng.normal(size=d)
    v = rng.uniform(size=d)
    c, p = _kernels.backend("cython"), _kernels.backend("python")
    for a, b in zip(c.adagrad_update(theta, accum, g, 0.3, 1e-8), p.adagrad_update(theta, accum, g, 0.3, 1e-8)):
        assert close(a, b)
    args = (theta, m, v, g, 0.9, 0.999, 0.5, 0.01, 0.1, 1e-8)
    for a, b in zip(c.adam_update(*args), p.adam_update(*args)):
        assert close(a, b)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.backend("fortran")
