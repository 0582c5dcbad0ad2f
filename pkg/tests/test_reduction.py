import math

import numpy as np
import pytest

import cusp_spectra as cs
from cusp_spectra.errors import DomainError, TailClassificationError
from cusp_spectra.metrics import ConstantSlopeTail, PeriodicSlopeTail
from cusp_spectra.profiles import PeriodicBump, PeriodicFunction
from cusp_spectra.reduction import NORMAL, TANGENTIAL


def scaled_volume(v, c):
    return cs.VolumeProfile(
        s0=v.s0,
        value_fn=lambda s: c * np.asarray(v.value(s)),
        log_deriv_fn=v.log_deriv_fn,
        log_deriv2_fn=v.log_deriv2_fn,
        slope_tail=v.slope_tail,
    )


class TestPotentialFromVolume:
    def test_two_dim_hyperbolic_is_quarter(self):
        W = cs.potential_from_volume(cs.volume_profile(cs.hyperbolic_cusp(2)))
        for s in (0.0, 1.3, 10.0):
            assert abs(W(s) - 0.25) < 1e-15
        assert isinstance(W.tail, cs.ConstantTail)
        assert W.tail.value == 0.25
        assert W.tail.onset == 0.0
        assert isinstance(W.boundary, cs.Dirichlet)

    @pytest.mark.parametrize("n", [2, 3, 4, 6])
    def test_n_dim_hyperbolic_threshold(self, n):
        W = cs.potential_from_volume(cs.volume_profile(cs.hyperbolic_cusp(n)))
        assert abs(W(2.0) - (n - 1) ** 2 / 4.0) < 1e-12

    def test_scaling_invariance(self):
        v = cs.volume_profile(cs.hyperbolic_cusp(3))
        rng = np.random.default_rng(11)
        for c in (0.01, 3.7, 1234.5):
            Wc = cs.potential_from_volume(scaled_volume(v, c))
            W = cs.potential_from_volume(v)
            for s in rng.uniform(0.0, 20.0, 10):
                assert abs(Wc(s) - W(s)) < 1e-12


class TestPotentialFromLogSlope:
    def test_constant_slopes(self):
        one = PeriodicFunction(
            1.0,
            lambda s: np.full_like(np.asarray(s, dtype=float), -1.0),
            lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        )
        W = cs.potential_from_log_slope(one)
        assert abs(W(0.7) - 0.25) < 1e-15
        for c in (2.0, 5.0):
            Pc = PeriodicFunction(
                1.0,
                lambda s, _c=c: np.full_like(np.asarray(s, dtype=float), -_c),
                lambda s: np.zeros_like(np.asarray(s, dtype=float)),
            )
            Wc = cs.potential_from_log_slope(Pc)
            assert abs(Wc(1.1) - c * c / 4.0) < 1e-14

    def test_matches_family_tail(self, family_potential):
        """The ripple log-slope reproduces the family potential beyond the onset."""
        delta = 0.1
        bump = PeriodicBump()
        P = PeriodicFunction(
            bump.period,
            lambda s: -1.0 - delta * np.asarray(bump.value(s)),
            lambda s: -delta * np.asarray(bump.deriv(s)),
        )
        W_p = cs.potential_from_log_slope(P)
        onset = family_potential.tail.onset
        s0 = 1.0
        for s in np.linspace(onset, onset + 20.0, 64):
            assert abs(family_potential(s) - W_p(s - s0)) < 1e-10


class TestTailClassify:
    def test_hyperbolic_constant(self):
        W = cs.function_potential(cs.hyperbolic_cusp(2))
        assert isinstance(W.tail, cs.ConstantTail)
        assert W.tail.value == 0.25
        assert W.tail.onset == 0.0

    def test_family_onset(self):
        for delta, onset in ((0.1, 21.0), (0.05, 41.0)):
            W = cs.function_potential(cs.gapped_cusp_metric(delta, s0=1.0))
            assert isinstance(W.tail, cs.PeriodicTail)
            assert W.tail.onset == onset
            assert W.tail.q.period == 2.4

    def test_family_tail_anchoring(self, family_potential):
        tail = family_potential.tail
        for s in np.linspace(tail.onset, tail.onset + 30.0, 64):
            assert abs(family_potential(s) - tail.q(s - tail.onset)) < 1e-10

    def test_misdeclared_constant_rejected(self):
        with pytest.raises(TailClassificationError) as info:
            cs.tail_classify(lambda s: np.asarray(s, dtype=float), ConstantSlopeTail(0.0, 1.0))
        assert info.value.diagnostics["max_deviation"] > 0.0

    def test_misdeclared_period_rejected(self):
        with pytest.raises(TailClassificationError):
            cs.tail_classify(
                lambda s: np.sin(np.asarray(s, dtype=float)),
                PeriodicSlopeTail(onset=0.0, period=1.0),
            )


def _comb(n, k):
    return math.comb(n, k) if 0 <= k <= n else 0


class TestChannels:
    def test_counts(self):
        metric = cs.hyperbolic_cusp(4)  # m = 3
        m = metric.fiber_dim
        total = 0
        for p in range(0, m + 2):
            chans = cs.channels_for_degree(metric, p)
            assert len(chans) == _comb(m, p) + _comb(m, p - 1)
            total += len(chans)
        assert total == 2 * 2 ** m

    def test_degree_out_of_range(self):
        metric = cs.hyperbolic_cusp(3)
        with pytest.raises(DomainError):
            cs.channels_for_degree(metric, -1)
        with pytest.raises(DomainError):
            cs.channels_for_degree(metric, 4)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_hyperbolic_constant_potentials(self, n):
        metric = cs.hyperbolic_cusp(n)
        for p in range(0, n + 1):
            for ch in cs.channels_for_degree(metric, p):
                expected = (
                    (n - 1 - 2 * p) ** 2 / 4.0 if ch.kind == TANGENTIAL
                    else (n + 1 - 2 * p) ** 2 / 4.0
                )
                assert abs(ch.potential(3.1) - expected) < 1e-12
                assert isinstance(ch.potential.tail, cs.ConstantTail)
                assert abs(ch.potential.tail.value - expected) < 1e-12

    def test_degree_zero_matches_volume_reduction(self, family_metric):
        chans = cs.channels_for_degree(family_metric, 0)
        assert len(chans) == 1
        ch = chans[0]
        assert ch.kind == TANGENTIAL
        assert ch.indices == ()
        W = cs.potential_from_volume(cs.volume_profile(family_metric))
        v = cs.volume_profile(family_metric)
        for s in np.linspace(1.0, 40.0, 37):
            assert abs(ch.mu(s) - v.log_deriv(s)) < 1e-12
            assert abs(ch.potential(s) - W(s)) < 1e-12

    def test_surface_degree_one_channels(self, family_metric):
        chans = cs.channels_for_degree(family_metric, 1)
        kinds = {ch.kind for ch in chans}
        assert kinds == {TANGENTIAL, NORMAL}
        assert len(chans) == 2
        tang = next(ch for ch in chans if ch.kind == TANGENTIAL)
        norm = next(ch for ch in chans if ch.kind == NORMAL)
        assert tang.indices == (1,) and tang.degree == 1
        assert norm.indices == () and norm.degree == 1
        w = family_metric.warps[0]
        for s in (2.0, 15.0, 30.0):
            assert abs(tang.mu(s) - w.deriv(s)) < 1e-14
            assert abs(norm.mu(s) + w.deriv(s)) < 1e-14

    def test_channel_potential_formula(self, family_metric):
        for p in (0, 1, 2):
            for ch in cs.channels_for_degree(family_metric, p):
                sign = 1.0 if ch.kind == TANGENTIAL else -1.0
                for s in np.linspace(1.0, 35.0, 23):
                    mu = ch.mu(s)
                    mu_d = ch.mu_deriv(s)
                    assert abs(ch.potential(s) - (0.25 * mu * mu + sign * 0.5 * mu_d)) < 1e-12

    def test_partner_identity(self, family_metric):
        """Tangential J at degree |J| and normal J at degree |J|+1 differ by mu'."""
        for subset, p in (((), 0), ((1,), 1)):
            tang = next(
                ch for ch in cs.channels_for_degree(family_metric, p)
                if ch.kind == TANGENTIAL and ch.indices == subset
            )
            norm = next(
                ch for ch in cs.channels_for_degree(family_metric, p + 1)
                if ch.kind == NORMAL and ch.indices == subset
            )
            for s in np.linspace(1.0, 35.0, 29):
                diff = tang.potential(s) - norm.potential(s)
                assert abs(diff - tang.mu_deriv(s)) < 1e-12

    def test_boundary_conditions(self, family_metric):
        for p in (0, 1, 2):
            for ch in cs.channels_for_degree(family_metric, p):
                if ch.kind == TANGENTIAL:
                    assert isinstance(ch.potential.boundary, cs.Dirichlet)
                else:
                    assert isinstance(ch.potential.boundary, cs.Robin)
                    assert abs(ch.potential.boundary.beta - 0.5 * ch.mu(family_metric.s0)) < 1e-14


class TestSchrodingerPotentialValidation:
    def test_inconsistent_tail_rejected(self):
        with pytest.raises(TailClassificationError):
            cs.SchrodingerPotential(
                s0=0.0,
                func=lambda s: np.asarray(s, dtype=float),
                tail=cs.ConstantTail(value=0.25, onset=1.0),
                boundary=cs.Dirichlet(),
            )
