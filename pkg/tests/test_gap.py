import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qip import qsim
from qip.encode import EncodingSpec
from qip.errors import ConfigurationError
from qip.gap import gap_pair, information_gap, kl_divergence, witness_matrix
from qip.observe import ObservableSpec

import oracles


def random_state(n, rng):
    z = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return qsim.StateVector(n, z / np.linalg.norm(z))


def dense_witness(psi1, psi2, axis, n):
    outer = np.outer(psi1, psi2.conj())
    return sum(oracles.observable(axis, i, n) @ outer @ oracles.observable(axis, i, n) for i in range(n))


class TestGapPair:
    def test_identical_zero_states(self):
        z = qsim.zero_state(2)
        r = gap_pair(z, z, ObservableSpec.parse("Z"))
        assert r.state_overlap == 1
        assert r.q_dot == 2
        assert r.abs_gap == 1
        assert abs(r.witness_trace - 2) < 1e-15

    def test_orthogonal_single_qubit(self):
        zero = qsim.zero_state(1)
        one = qsim.StateVector(1, np.array([0, 1], dtype=complex))
        r = gap_pair(zero, one, ObservableSpec.parse("Z"))
        assert r.state_overlap == 0
        assert r.q_dot == -1
        assert r.abs_gap == 1

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    @pytest.mark.parametrize("axis", "XYZ")
    def test_dense_witness(self, n, axis):
        rng = np.random.default_rng(n * 7 + ord(axis))
        for _ in range(5):
            a, b = random_state(n, rng), random_state(n, rng)
            A = witness_matrix(a, b, axis)
            dense = dense_witness(a.amplitudes, b.amplitudes, axis, n)
            assert np.max(np.abs(A - dense)) < 1e-12
            q1 = [oracles.expect(a.amplitudes, axis, i, n) for i in range(n)]
            q2 = [oracles.expect(b.amplitudes, axis, i, n) for i in range(n)]
            assert abs(np.vdot(a.amplitudes, A @ b.amplitudes).real - np.dot(q1, q2)) < 1e-12

    @pytest.mark.parametrize("n", [2, 3, 5, 7])
    def test_trace_identity(self, n):
        rng = np.random.default_rng(40 + n)
        for axis in "XYZ":
            a, b = random_state(n, rng), random_state(n, rng)
            r = gap_pair(a, b, ObservableSpec.parse(axis))
            assert r.witness_residual < 1e-10
            assert abs(r.predicted_trace - n * np.vdot(b.amplitudes, a.amplitudes)) < 1e-12

    @given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi))
    @settings(max_examples=30, deadline=None)
    def test_global_phase_invariance(self, seed, phi):
        rng = np.random.default_rng(seed)
        a, b = random_state(3, rng), random_state(3, rng)
        rotated = qsim.StateVector(3, a.amplitudes * np.exp(1j * phi))
        obs = ObservableSpec.parse("X")
        r1, r2 = gap_pair(a, b, obs), gap_pair(rotated, b, obs)
        assert abs(r1.abs_gap - r2.abs_gap) < 1e-12
        assert abs(r1.q_dot - r2.q_dot) < 1e-12

    def test_witness_is_not_overlap(self):
        rng = np.random.default_rng(3)
        for n in (2, 3, 4):
            a, b = random_state(n, rng), random_state(n, rng)
            A = witness_matrix(a, b, "Z")
            assert abs(np.trace(A)) < n + 1e-12

    def test_errors(self):
        with pytest.raises(ValueError):
            gap_pair(qsim.zero_state(1), qsim.zero_state(2), ObservableSpec.parse("Z"))
        with pytest.raises(ConfigurationError):
            gap_pair(qsim.zero_state(2), qsim.zero_state(2), ObservableSpec.parse("XZ"))


class TestKl:
    def test_identical(self):
        assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0

    def test_worked_value(self):
        assert abs(kl_divergence([1, 0], [0.5, 0.5]) - math.log(2)) < 1e-15

    def test_zero_q_floor(self):
        assert abs(kl_divergence([1, 0], [0, 1]) - math.log(1e12)) < 1e-9

    @given(st.lists(st.floats(0.01, 10), min_size=2, max_size=8), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_mpmath_oracle(self, raw, seed):
        p = np.array(raw) / sum(raw)
        q = np.random.default_rng(seed).dirichlet(np.ones(len(p)))
        mpmath.mp.dps = 40
        exact = sum(mpmath.mpf(a) * mpmath.log(mpmath.mpf(a) / mpmath.mpf(b)) for a, b in zip(p, q))
        assert abs(kl_divergence(p, q) - float(exact)) < 1e-12
        assert kl_divergence(p, q) >= -1e-15

    def test_errors(self):
        with pytest.raises(ValueError):
            kl_divergence([0.5, 0.5], [1.0])
        with pytest.raises(ValueError):
            kl_divergence([0.7, 0.7], [0.5, 0.5])
        with pytest.raises(ValueError):
            kl_divergence([1.5, -0.5], [0.5, 0.5])


def straight_information_gap(W, V, kind, n, axis, normalize, scale, pqc=None):
    total = 0.0
    centers = [W[:, j] for j in range(W.shape[1])]
    S = [oracles.feature_map(kind, c, n, axis, pqc) for c in centers]
    if normalize:
        S = [oracles.unit(s) for s in S]
    for v in V:
        q = oracles.feature_map(kind, v, n, axis, pqc)
        if normalize:
            q = oracles.unit(q)
        logw = oracles.log_softmax_row([scale * float(v @ c) for c in centers])
        logu = oracles.log_softmax_row([scale * float(q @ s) for s in S])
        total += sum(math.exp(a) * (a - max(b, math.log(1e-12))) for a, b in zip(logw, logu))
    return total / len(V)


class TestInformationGap:
    @pytest.mark.parametrize("kind,axis", [("amplitude", "Z"), ("amplitude", "XZ"), ("phase", "Y"), ("u3", "X")])
    @pytest.mark.parametrize("normalize", [True, False])
    def test_straight_line_oracle(self, kind, axis, normalize):
        rng = np.random.default_rng(hash((kind, axis, normalize)) % 2**32)
        d, C = 4, 3
        W = rng.standard_normal((d, C))
        W /= np.linalg.norm(W, axis=0)
        V = rng.standard_normal((6, d))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        if kind == "amplitude":
            enc = EncodingSpec.amplitude(d)
        elif kind == "phase":
            enc = EncodingSpec.phase(d, 2)
        else:
            enc = EncodingSpec.u3(d, 2, rng=rng)
        got = information_gap(W, V, enc, ObservableSpec.parse(axis), normalize, 16.0)
        expected = straight_information_gap(W, V, kind, enc.n_qubits, axis, normalize, 16.0, enc.pqc_params)
        assert abs(got - expected) < 1e-10

    def test_non_negative(self):
        rng = np.random.default_rng(1)
        W = rng.standard_normal((8, 4))
        W /= np.linalg.norm(W, axis=0)
        V = rng.standard_normal((20, 8))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        assert information_gap(W, V, EncodingSpec.amplitude(8), ObservableSpec.parse("Z")) >= 0

    def test_rejects_unnormalized(self):
        W = np.eye(4)[:, :2]
        with pytest.raises(ConfigurationError):
            information_gap(W, 2 * np.eye(4), EncodingSpec.amplitude(4), ObservableSpec.parse("Z"))
        with pytest.raises(ConfigurationError):
            information_gap(W, np.eye(3), EncodingSpec.amplitude(4), ObservableSpec.parse("Z"))
