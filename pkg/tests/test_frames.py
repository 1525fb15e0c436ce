"""Tests for reference frames, transforms and power calculation."""

import math
import random

import pytest

from app.frames import (
    DQ,
    AlphaBeta,
    ThreePhase,
    abc_to_dq,
    clarke,
    dq_to_abc,
    instantaneous_pq,
    inverse_clarke,
    park,
    per_unit_pq,
    wrap_angle,
)
from app.models import PerUnitBase


def balanced(amplitude: float, angle: float) -> ThreePhase:
    return ThreePhase(
        amplitude * math.cos(angle),
        amplitude * math.cos(angle - 2.0 * math.pi / 3.0),
        amplitude * math.cos(angle + 2.0 * math.pi / 3.0),
    )


class TestClarkePark:
    """Amplitude-invariant transforms."""

    def test_balanced_set_keeps_amplitude(self):
        """A balanced set of peak A maps to an alpha-beta vector of norm A."""
        ab = clarke(balanced(0.8, 0.3))
        assert ab.norm == pytest.approx(0.8, rel=1e-12)
        assert ab.alpha == pytest.approx(0.8 * math.cos(0.3), rel=1e-12)
        assert ab.beta == pytest.approx(0.8 * math.sin(0.3), rel=1e-12)

    def test_inverse_clarke_recovers_three_wire_set(self):
        """Test a zero-sum set survives the Clarke round trip."""
        x = ThreePhase(0.4, -0.1, -0.3)
        back = inverse_clarke(clarke(x))
        assert back.a == pytest.approx(x.a, abs=1e-12)
        assert back.b == pytest.approx(x.b, abs=1e-12)
        assert back.c == pytest.approx(x.c, abs=1e-12)

    def test_zero_sequence_discarded(self):
        """Test the zero sequence maps to the origin."""
        ab = clarke(ThreePhase(0.5, 0.5, 0.5))
        assert ab.alpha == pytest.approx(0.0, abs=1e-15)
        assert ab.beta == pytest.approx(0.0, abs=1e-15)

    def test_park_of_aligned_vector_is_pure_d(self):
        """A vector rotating with the frame angle is constant on the d axis."""
        for theta in (0.0, 1.0, 2.5, -2.0):
            dq = park(AlphaBeta(math.cos(theta), math.sin(theta)), theta)
            assert dq.d == pytest.approx(1.0, abs=1e-12)
            assert dq.q == pytest.approx(0.0, abs=1e-12)

    def test_abc_dq_abc(self):
        """Test the dq frame rotates by the given angle."""
        x = balanced(1.0, 0.7)
        dq = abc_to_dq(x, 0.2)
        assert dq.d == pytest.approx(math.cos(0.5), abs=1e-12)
        assert dq.q == pytest.approx(math.sin(0.5), abs=1e-12)
        back = dq_to_abc(DQ(dq.d, dq.q), 0.2)
        assert back.a == pytest.approx(x.a, abs=1e-12)


class TestWrapAngle:
    """Test cases for angle wrapping."""

    @pytest.mark.parametrize(
        "theta, expected",
        [
            (0.1, 0.1),
            (7.0, 7.0 - 2.0 * math.pi),
            (-math.pi, math.pi),
            (2.0 * math.pi + 0.5, 0.5),
            (-4.0, 2.0 * math.pi - 4.0),
        ],
    )
    def test_wraps_into_half_open_interval(self, theta, expected):
        """Test angles wrap into (-pi, pi]."""
        wrapped = wrap_angle(theta)
        assert -math.pi < wrapped <= math.pi
        assert wrapped == pytest.approx(expected, abs=1e-12)


class TestPower:
    """Test cases for instantaneous power."""

    def test_instantaneous_power_carries_three_halves(self):
        """Test amplitude-invariant power carries the 3/2 factor."""
        p, q = instantaneous_pq(AlphaBeta(1.0, 0.0), AlphaBeta(1.0, 0.0))
        assert p == pytest.approx(1.5)
        assert q == pytest.approx(0.0)

    def test_lagging_current_is_positive_reactive_power(self):
        """Test a lagging current is positive reactive power."""
        p, q = instantaneous_pq(AlphaBeta(1.0, 0.0), AlphaBeta(0.0, -1.0))
        assert p == pytest.approx(0.0)
        assert q == pytest.approx(1.5)

    def test_per_unit_power_of_rated_vectors_is_one(self):
        """Rated voltage and in-phase rated current deliver 1 pu in any orientation."""
        v = AlphaBeta(math.cos(1.1), math.sin(1.1))
        p, q = per_unit_pq(v, v)
        assert p == pytest.approx(1.0, rel=1e-12)
        assert q == pytest.approx(0.0, abs=1e-12)

    def test_per_unit_matches_si_scaling(self):
        """Test per-unit power matches SI power over s_base."""
        base = PerUnitBase()
        v_si = AlphaBeta(base.v_base * 0.9, 0.0)
        i_si = AlphaBeta(base.i_base * 0.5, base.i_base * 0.2)
        p_si, q_si = instantaneous_pq(v_si, i_si)
        p_pu, q_pu = per_unit_pq(v_si.scale(1.0 / base.v_base), i_si.scale(1.0 / base.i_base))
        assert p_pu == pytest.approx(base.power_to_pu(p_si), rel=1e-12)
        assert q_pu == pytest.approx(base.power_to_pu(q_si), rel=1e-12)

    def test_bilinear_in_voltage_and_current(self):
        """Test P and Q are linear in v for fixed i and linear in i for fixed v."""
        rng = random.Random(21)
        for _ in range(200):
            v1, v2, i1, i2 = (AlphaBeta(rng.uniform(-2, 2), rng.uniform(-2, 2)) for _ in range(4))
            a, b = rng.uniform(-3, 3), rng.uniform(-3, 3)
            v_mix = AlphaBeta(a * v1.alpha + b * v2.alpha, a * v1.beta + b * v2.beta)
            i_mix = AlphaBeta(a * i1.alpha + b * i2.alpha, a * i1.beta + b * i2.beta)
            for got, first, second in (
                (instantaneous_pq(v_mix, i1), instantaneous_pq(v1, i1), instantaneous_pq(v2, i1)),
                (instantaneous_pq(v1, i_mix), instantaneous_pq(v1, i1), instantaneous_pq(v1, i2)),
            ):
                assert got[0] == pytest.approx(a * first[0] + b * second[0], abs=1e-9)
                assert got[1] == pytest.approx(a * first[1] + b * second[1], abs=1e-9)

    def test_balanced_sinusoids_give_constant_power(self):
        """Test a balanced voltage and current at angle phi give flat P = 3/2 VI cos phi, Q = 3/2 VI sin phi."""
        w0, phi = 2.0 * math.pi * 50.0, 0.4
        samples = [
            instantaneous_pq(
                AlphaBeta(0.9 * math.cos(w0 * t), 0.9 * math.sin(w0 * t)),
                AlphaBeta(0.6 * math.cos(w0 * t - phi), 0.6 * math.sin(w0 * t - phi)),
            )
            for t in (k * 1e-4 for k in range(400))
        ]
        p = [s[0] for s in samples]
        q = [s[1] for s in samples]
        assert max(p) - min(p) < 1e-9
        assert max(q) - min(q) < 1e-9
        assert p[0] == pytest.approx(1.5 * 0.9 * 0.6 * math.cos(phi), rel=1e-12)
        assert q[0] == pytest.approx(1.5 * 0.9 * 0.6 * math.sin(phi), rel=1e-12)


class TestPerUnitBase:
    """Test cases for the per-unit base."""

    def test_base_quantities_are_consistent(self):
        """Test the base quantities convert to 1 pu."""
        base = PerUnitBase()
        assert base.current_to_pu(base.i_base) == pytest.approx(1.0)
        assert base.impedance_to_pu(base.z_base) == pytest.approx(1.0)
        assert base.inductance_to_pu(base.z_base / base.omega_0) == pytest.approx(1.0)
        assert base.f_0 == pytest.approx(50.0)
        assert 1.5 * base.v_base * base.i_base == pytest.approx(base.s_base)
