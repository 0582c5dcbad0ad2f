import numpy as np
import pytest

import cusp_spectra as cs
from cusp_spectra.errors import DomainError, NumericalError


def flat(value=0.0, period=1.0):
    return cs.PeriodicPotential(period, lambda s, _v=value: np.full_like(np.asarray(s, dtype=float), _v))


class TestMonodromy:
    def test_free_at_zero_energy(self):
        M = cs.monodromy(flat(0.0), 0.0, 1e-12)
        assert abs(M.m11 - 1.0) < 1e-10
        assert abs(M.m12 - 1.0) < 1e-10
        assert abs(M.m21) < 1e-10
        assert abs(M.m22 - 1.0) < 1e-10

    def test_free_at_pi_squared(self):
        M = cs.monodromy(flat(0.0), np.pi ** 2, 1e-12)
        for value, expected in ((M.m11, -1.0), (M.m12, 0.0), (M.m21, 0.0), (M.m22, -1.0)):
            assert abs(value - expected) < 1e-8

    def test_constant_below_potential_gives_cosh(self):
        for c, lam in ((2.0, 1.0), (1.0, 0.0), (5.0, -2.0)):
            M = cs.monodromy(flat(c), lam, 1e-12)
            assert abs(M.m11 - np.cosh(np.sqrt(c - lam))) < 1e-8

    def test_determinant_conserved(self):
        q = flat(1.3, period=2.0)
        for lam in (-1.0, 0.5, 7.7, 40.0):
            M = cs.monodromy(q, lam, 1e-11)
            assert abs(M.det - 1.0) < 1e-9

    def test_bad_tolerance(self):
        with pytest.raises(DomainError):
            cs.monodromy(flat(0.0), 1.0, 0.0)


class TestDiscriminant:
    def test_free_cosine_law(self):
        q = flat(0.0)
        for lam in (0.5, 2.0, 9.0, 30.0):
            assert abs(cs.discriminant(q, lam, 1e-12) - 2.0 * np.cos(np.sqrt(lam))) < 1e-9

    def test_band_edge_of_constant(self):
        assert abs(cs.discriminant(flat(0.25), 0.25, 1e-12) - 2.0) < 1e-10

    def test_scan_matches_scalar(self):
        q = flat(0.7, period=1.5)
        lams = np.array([0.0, 1.0, 5.0, 20.0])
        disc, det = cs.discriminant_scan(q, lams, 1e-11)
        assert np.max(np.abs(det - 1.0)) < 1e-9
        for lam, d in zip(lams, disc):
            assert abs(cs.discriminant(q, lam, 1e-11) - d) < 1e-9

    def test_refinement_stability(self):
        """Discriminants computed at tol and tol/10 agree within 10 tol."""
        q = flat(0.25)
        lams = np.linspace(-0.5, 20.0, 101)
        tol = 1e-10
        d1, _ = cs.discriminant_scan(q, lams, tol)
        d2, _ = cs.discriminant_scan(q, lams, tol / 10.0)
        assert np.max(np.abs(d1 - d2)) < 10.0 * tol


class TestBandStructureFree:
    def test_single_band_no_gaps(self):
        bs = cs.band_structure(flat(0.0), 10.0, 1e-3)
        assert len(bs.bands) == 1
        assert len(bs.gaps) == 0
        assert abs(bs.bands[0].lower) < 1e-8
        assert bs.bands[0].upper == 10.0
        assert bs.det_defect < 1e-9

    def test_constant_quarter(self):
        bs = cs.band_structure(flat(0.25), 10.0, 1e-3)
        assert len(bs.bands) == 1
        assert len(bs.gaps) == 0
        assert abs(bs.threshold - 0.25) < 1e-8

    def test_preconditions(self):
        with pytest.raises(DomainError):
            cs.band_structure(flat(5.0), 4.0, 1e-3)
        with pytest.raises(DomainError):
            cs.band_structure(flat(0.0), 10.0, 0.0)


class TestBandStructureFamily:
    @pytest.fixture(scope="class")
    def tail_bands(self, family_potential):
        return cs.band_structure(family_potential.tail.q, 20.0, 1e-3)

    def test_gap_positions(self, tail_bands):
        # three gaps below 20 for the reference ripple at delta = 0.1
        gaps = tail_bands.resolved_gaps()
        assert len(gaps) == 3
        assert abs(gaps[0].lower - 1.9528) < 1e-3
        assert abs(gaps[0].width - 3.407e-2) < 1e-4
        assert abs(gaps[1].lower - 7.0811) < 1e-3
        assert abs(gaps[1].width - 5.841e-2) < 1e-4
        assert abs(gaps[2].lower - 15.6416) < 1e-3

    def test_edges_are_discriminant_roots(self, tail_bands, family_potential):
        q = family_potential.tail.q
        for lo, lo_mark, hi, hi_mark in tail_bands.edge_marks:
            if lo_mark != 0.0:
                assert abs(cs.discriminant(q, lo, 1e-10) - lo_mark) < 1e-8
            if hi_mark != 0.0:
                assert abs(cs.discriminant(q, hi, 1e-10) - hi_mark) < 1e-8

    def test_edge_alternation(self, tail_bands):
        """Lower band edges alternate +2, -2, +2, ... from the spectrum bottom."""
        lower_marks = [marks[1] for marks in tail_bands.edge_marks]
        expected = [2.0 if k % 2 == 0 else -2.0 for k in range(len(lower_marks))]
        assert lower_marks == expected
        for k, (_, lo_mark, _, hi_mark) in enumerate(tail_bands.edge_marks[:-1]):
            assert hi_mark == -lo_mark

    def test_shift_invariance(self, family_potential, tail_bands):
        q = family_potential.tail.q
        rng = np.random.default_rng(5)
        for a in rng.uniform(0.0, q.period, 3):
            shifted = cs.band_structure(q.shifted(float(a)), 20.0, 1e-3)
            assert len(shifted.bands) == len(tail_bands.bands)
            for b1, b2 in zip(shifted.bands, tail_bands.bands):
                assert abs(b1.lower - b2.lower) < 1e-3
                assert abs(b1.upper - b2.upper) < 1e-3

    def test_monotone_cap(self, family_potential, tail_bands):
        """Raising the cap must not move bands already reported below the old cap."""
        wider = cs.band_structure(family_potential.tail.q, 30.0, 1e-3)
        for b_old, b_new in zip(tail_bands.bands[:-1], wider.bands):
            assert abs(b_old.lower - b_new.lower) < 1e-3
            assert abs(b_old.upper - b_new.upper) < 1e-3
        # the band clipped at 20 extends further but starts at the same edge
        assert abs(wider.bands[len(tail_bands.bands) - 1].lower
                   - tail_bands.bands[-1].lower) < 1e-3


class TestEssentialSpectrumHalfline:
    def test_hyperbolic_two_dim(self):
        W = cs.function_potential(cs.hyperbolic_cusp(2))
        spec = cs.essential_spectrum_halfline(W, 12.0, 1e-4)
        assert len(spec.bands) == 1
        assert spec.bands[0].lower == 0.25
        assert spec.bands[0].upper == 12.0
        assert spec.gaps == ()

    def test_higher_dim_constant(self):
        # threshold (n-1)^2/4: 1 for n = 3, 9/4 for n = 4
        spec3 = cs.essential_spectrum_halfline(
            cs.function_potential(cs.hyperbolic_cusp(3)), 10.0, 1e-4
        )
        assert spec3.threshold == 1.0
        spec4 = cs.essential_spectrum_halfline(
            cs.function_potential(cs.hyperbolic_cusp(4)), 10.0, 1e-4
        )
        assert spec4.threshold == 2.25

    def test_family_dispatches_to_tail(self, family_potential):
        spec = cs.essential_spectrum_halfline(family_potential, 20.0, 1e-3)
        direct = cs.band_structure(family_potential.tail.q, 20.0, 1e-3)
        assert len(spec.bands) == len(direct.bands)
        for b1, b2 in zip(spec.bands, direct.bands):
            assert b1.lower == b2.lower and b1.upper == b2.upper


class TestPFormSpectrum:
    def test_hyperbolic_n2_all_degrees(self):
        metric = cs.hyperbolic_cusp(2)
        for p in (0, 1, 2):
            spec = cs.p_form_essential_spectrum(metric, p, 10.0, 1e-4)
            assert len(spec.bands) == 1
            assert abs(spec.threshold - 0.25) < 1e-12

    def test_hyperbolic_n3_degree_one_reaches_zero(self):
        spec = cs.p_form_essential_spectrum(cs.hyperbolic_cusp(3), 1, 10.0, 1e-4)
        assert spec.threshold == 0.0
        assert len(spec.bands) == 1

    def test_merge_overlapping(self):
        merged = cs.merge_band_structures(
            [
                cs.BandStructure(10.0, (cs.Band(0.0, 3.0), cs.Band(5.0, 10.0)), (cs.Gap(3.0, 5.0, True),), 1e-3),
                cs.BandStructure(10.0, (cs.Band(2.0, 6.0),), (), 1e-3),
            ],
            10.0,
            1e-3,
        )
        assert len(merged.bands) == 1
        assert merged.bands[0].lower == 0.0 and merged.bands[0].upper == 10.0


class TestThreadsEnv:
    def test_invalid_env_rejected(self, monkeypatch, family_potential):
        monkeypatch.setenv("CUSP_SPECTRA_THREADS", "zero")
        with pytest.raises(DomainError):
            cs.discriminant_scan(family_potential.tail.q, np.array([1.0]), 1e-10)
        monkeypatch.setenv("CUSP_SPECTRA_THREADS", "0")
        with pytest.raises(DomainError):
            cs.discriminant_scan(family_potential.tail.q, np.array([1.0]), 1e-10)

    def test_chunking_independent_of_thread_count(self, monkeypatch):
        q = flat(0.3, period=1.1)
        lams = np.linspace(0.0, 15.0, 300)
        monkeypatch.setenv("CUSP_SPECTRA_THREADS", "1")
        d1, _ = cs.discriminant_scan(q, lams, 1e-10)
        monkeypatch.setenv("CUSP_SPECTRA_THREADS", "4")
        d2, _ = cs.discriminant_scan(q, lams, 1e-10)
        assert np.array_equal(d1, d2)


class TestMonodromyValidation:
    def test_det_defect_detected(self):
        with pytest.raises(NumericalError):
            cs.MonodromyMatrix(lam=0.0, m11=1.0, m12=0.0, m21=0.0, m22=1.1, integrator_tol=1e-10)
