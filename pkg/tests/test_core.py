import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from regretlab.core import (
    GradientHistory,
    Rng,
    Trace,
    dot,
    dumps,
    format_float,
    mahalanobis_norm,
    norm2,
    norm_inf,
    prefix_column_norms,
    read_trace,
    trace_from_jsonl,
    trace_to_jsonl,
    vector,
    write_trace,
)
from regretlab.errors import DimensionError, NonFiniteError

# a millesimal grid keeps squares clear of the subnormal range
reals = st.integers(-10**9, 10**9).map(lambda k: k / 1000)
any_finite = st.floats(allow_nan=False, allow_infinity=False)


def vecs(n=st.integers(1, 8), el=reals):
    return n.flatmap(lambda k: arrays(np.float64, k, elements=el))


class TestVectors:
    def test_rejects_non_finite(self):
        with pytest.raises(NonFiniteError):
            vector([1.0, math.nan])
        with pytest.raises(NonFiniteError):
            vector([math.inf])

    def test_rejects_wrong_shape(self):
        with pytest.raises(DimensionError):
            vector([[1.0, 2.0]])
        with pytest.raises(DimensionError):
            vector([])
        with pytest.raises(DimensionError):
            vector([1.0, 2.0], dim=3)

    def test_read_only_copy(self):
        src = np.array([1.0, 2.0])
        v = vector(src)
        src[0] = 5.0
        assert v[0] == 1.0
        with pytest.raises(ValueError):
            v[0] = 3.0


class TestNorms:
    def test_spot_values(self):
        assert dot(vector([1, 2]), vector([3, 4])) == 11
        assert dot(vector([1, 2]), vector([0, 0])) == 0
        assert norm2(vector([3, 4])) == 5
        assert norm_inf(vector([-3, 2])) == 3
        assert norm_inf(vector([0.0])) == 0
        assert mahalanobis_norm(vector([1, 1]), vector([1, 1])) == pytest.approx(math.sqrt(2), rel=1e-15)
        assert mahalanobis_norm(vector([2, 5]), vector([1, 0])) == 2

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            dot(vector([1.0]), vector([1.0, 2.0]))
        with pytest.raises(DimensionError):
            mahalanobis_norm(vector([1.0]), vector([1.0, 2.0]))

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            mahalanobis_norm(vector([1.0, 1.0]), vector([1.0, -1.0]))

    @given(ab=st.integers(1, 8).flatmap(lambda k: st.tuples(
        arrays(np.float64, k, elements=reals), arrays(np.float64, k, elements=reals),
        arrays(np.float64, k, elements=st.integers(0, 10**6).map(lambda k: k / 1000)))))
    def test_against_loops(self, ab):
        a, b, w = ab
        assert dot(a, b) == pytest.approx(math.fsum(x * y for x, y in zip(a, b)), rel=1e-9, abs=1e-6)
        assert norm2(a) == pytest.approx(math.sqrt(math.fsum(x * x for x in a)), rel=1e-12)
        assert norm_inf(a) == max(abs(x) for x in a)
        ref = math.sqrt(math.fsum(wi * x * x for wi, x in zip(w, a)))
        assert mahalanobis_norm(a, w) == pytest.approx(ref, rel=1e-12, abs=0)

    @given(a=vecs())
    def test_unit_metric_is_euclidean(self, a):
        assert mahalanobis_norm(a, np.ones_like(a)) == pytest.approx(norm2(a), rel=1e-12)


class TestPrefixNorms:
    def test_spot_values(self):
        assert prefix_column_norms(GradientHistory([[3.0, 0.0]])).tolist() == [[3.0, 0.0]]
        s = prefix_column_norms(GradientHistory([[1.0, 0.0], [0.0, 1.0]]))
        assert s[-1].tolist() == [1.0, 1.0]

    def test_empty_history(self):
        with pytest.raises(ValueError):
            prefix_column_norms(GradientHistory(np.empty((0, 2))))

    def test_four_random_columns(self):
        G = np.random.default_rng(3).normal(size=(4, 3))
        np.testing.assert_allclose(prefix_column_norms(GradientHistory(G)),
                                   oracles.prefix_sq_norms(G), rtol=1e-12)

    @given(G=st.tuples(st.integers(1, 40), st.integers(1, 5)).flatmap(
        lambda s: arrays(np.float64, s, elements=reals)))
    @settings(max_examples=1000)
    def test_non_decreasing(self, G):
        S = prefix_column_norms(GradientHistory(G))
        assert np.all(np.diff(S, axis=0) >= 0)

    def test_history_dimensions(self):
        h = GradientHistory([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert (h.T, h.dim, len(h)) == (3, 2, 3)
        with pytest.raises(NonFiniteError):
            GradientHistory([[math.nan]])


def _trace(T=3, d=2, seed=0, final=True):
    rng = np.random.default_rng(seed)
    thetas = rng.normal(size=(T, d))
    return Trace(thetas, rng.normal(size=(T, d)), rng.normal(size=T),
                 {"algo": "sgd", "eta": 0.1, "seed": seed, "batch": "full"},
                 rng.normal(size=d) if final else None)


class TestTrace:
    def test_shape_checks(self):
        with pytest.raises(DimensionError):
            Trace(np.zeros((3, 2)), np.zeros((3, 3)), np.zeros(3), {})
        with pytest.raises(DimensionError):
            Trace(np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(2), {})

    def test_steps_number_from_one(self):
        tr = _trace()
        assert [s.t for s in tr.steps] == [1, 2, 3]
        assert tr.steps[1].loss == tr.losses[1]

    def test_prefix_keeps_next_iterate(self):
        tr = _trace(T=4)
        p = tr.prefix(2)
        assert p.T == 2
        np.testing.assert_array_equal(p.final_theta, tr.thetas[2])
        np.testing.assert_array_equal(tr.prefix(4).final_theta, tr.final_theta)

    def test_jsonl_layout(self):
        lines = trace_to_jsonl(_trace()).splitlines()
        head = json.loads(lines[0])
        assert head["meta"]["algo"] == "sgd" and "final_theta" in head
        rec = json.loads(lines[1])
        assert set(rec) == {"t", "theta", "grad", "loss"} and rec["t"] == 1

    @given(T=st.integers(1, 6), d=st.integers(1, 4), data=st.data())
    @settings(max_examples=100)
    def test_round_trip_is_bit_exact(self, T, d, data):
        thetas = data.draw(arrays(np.float64, (T, d), elements=any_finite))
        grads = data.draw(arrays(np.float64, (T, d), elements=any_finite))
        losses = data.draw(arrays(np.float64, T, elements=any_finite))
        tr = Trace(thetas, grads, losses, {"eta": data.draw(any_finite), "label": "x"})
        back = trace_from_jsonl(trace_to_jsonl(tr))
        assert back.thetas.tobytes() == tr.thetas.tobytes()
        assert back.grads.tobytes() == tr.grads.tobytes()
        assert back.losses.tobytes() == tr.losses.tobytes()
        assert back.meta == tr.meta
        assert trace_to_jsonl(back) == trace_to_jsonl(tr)

    def test_file_round_trip(self, tmp_path):
        tr = _trace(T=5)
        write_trace(tr, tmp_path / "t.jsonl")
        back = read_trace(tmp_path / "t.jsonl")
        assert back.final_theta.tolist() == tr.final_theta.tolist()

    def test_gaps_are_rejected(self):
        lines = trace_to_jsonl(_trace()).splitlines()
        del lines[2]
        with pytest.raises(ValueError):
            trace_from_jsonl("\n".join(lines))

    def test_non_finite_cannot_be_written(self):
        with pytest.raises(ValueError):
            dumps({"x": math.inf})


def test_format_float_is_round_trippable():
    for x in (0.1, 1 / 3, 2.0 ** -1074, 1.7976931348623157e308, -0.0):
        assert float(format_float(x)) == x


class TestRng:
    def test_same_seed_same_stream(self):
        assert Rng(7).normal(5).tolist() == Rng(7).normal(5).tolist()
        assert Rng(7).normal(5).tolist() != Rng(8).normal(5).tolist()

    def test_children_are_independent_of_parent_use(self):
        a = Rng(1)
        c1 = a.child(2).normal(3)
        a.normal(100)
        assert a.child(2).normal(3).tolist() == c1.tolist()
        assert Rng(1).child(3).normal(3).tolist() != c1.tolist()

    def test_frozen_values(self):
        # PCG64 seeded through SeedSequence(2024); fixes the stream across platforms
        assert Rng(2024).integers(0, 1000, 5).tolist() == FROZEN_INTEGERS


FROZEN_INTEGERS = [241, 675, 92, 214, 317]
