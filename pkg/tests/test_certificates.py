import math

import numpy as np
import pytest
import scipy.linalg

from waveguard import (ContractError, FeedbackLaw, FieldState, Grid,
                       HypothesisViolatedError, SectorData,
                       attractivity_constant, build_antidamping_certificate,
                       build_monotone_certificate, distance_lemma_constant,
                       energy, lyapunov_gamma, search_monotone_rho,
                       sector_params)
from waveguard.certificates import DistanceLemmaConstant, WeightRho


class TestWeightRho:
    def test_affine_values(self):
        rho = WeightRho(1.0, 2.0, 2.0)
        assert rho.slope == 0.5
        assert rho.value(1.0) == 1.5
        assert rho.sup_abs == 2.0

    def test_must_be_increasing(self):
        with pytest.raises(ContractError):
            WeightRho(2.0, 1.0, 1.0)
        with pytest.raises(ContractError):
            WeightRho(0.0, 1.0, 1.0)


class TestMonotoneCertificate:
    def test_unit_gain_hand_computed_constants(self):
        # alpha1 = alpha2 = 1, S = 0, rho = (1, 2) on L = 1:
        # C1 = 1, C2 = 4, C3 = 2, tau = 9, step-2 aggregate 4 + 2(1+1) = 8,
        # r = 8/9, E_S = 0, mu = ln(9/8)/9, m = 9/8
        cert = build_monotone_certificate(
            sector_params(FeedbackLaw.linear_gain(1.0)),
            WeightRho(1.0, 2.0, 1.0))
        assert (cert.c1, cert.c2, cert.c3) == (1.0, 4.0, 2.0)
        assert cert.tau == 9.0
        assert cert.c1_step2 == 8.0
        assert cert.r == pytest.approx(8.0 / 9.0, rel=1e-15)
        assert cert.e_s == 0.0
        assert cert.mu == pytest.approx(math.log(9.0 / 8.0) / 9.0, rel=1e-15)
        assert cert.m == pytest.approx(9.0 / 8.0, rel=1e-15)

    def test_deadzone_hand_computed_constants(self):
        # alpha1 = 1/2, alpha2 = 1, S = 1, sup = 1/4, same weight:
        # C2_tau = 9*2*max{1, 1/4} = 18, aggregate 4 + 2(2+1) = 10,
        # r = 10/11, p = 18/1.1, E_S = 180
        cert = build_monotone_certificate(
            sector_params(FeedbackLaw.deadzone(0.5)), WeightRho(1.0, 2.0, 1.0))
        assert cert.c2_tau == pytest.approx(18.0, rel=1e-14)
        assert cert.c1_step2 == pytest.approx(10.0, rel=1e-14)
        assert cert.r == pytest.approx(10.0 / 11.0, rel=1e-14)
        assert cert.p == pytest.approx(18.0 / 1.1, rel=1e-14)
        assert cert.e_s == pytest.approx(180.0, rel=1e-12)

    def test_global_sector_gives_zero_residual_level(self):
        cert = build_monotone_certificate(
            SectorData(0.7, 1.3, 0.0, 0.0), WeightRho(0.5, 1.0, 1.0))
        assert cert.e_s == 0.0

    def test_residual_level_monotone_in_threshold(self):
        levels = []
        for d in (0.25, 0.5, 1.0, 2.0):
            cert = build_monotone_certificate(
                sector_params(FeedbackLaw.deadzone(d)), WeightRho(1.0, 2.0, 1.0))
            levels.append(cert.e_s)
        assert all(a <= b for a, b in zip(levels, levels[1:]))

    def test_residual_level_monotone_in_sup(self):
        base = SectorData(0.5, 1.0, 1.0, 0.25)
        bigger = SectorData(0.5, 1.0, 1.0, 2.0)
        cert_a = build_monotone_certificate(base, WeightRho(1.0, 2.0, 1.0))
        cert_b = build_monotone_certificate(bigger, WeightRho(1.0, 2.0, 1.0))
        assert cert_a.e_s <= cert_b.e_s

    def test_rate_decreases_with_observability_time(self):
        cert = build_monotone_certificate(
            sector_params(FeedbackLaw.linear_gain(1.0)), WeightRho(1.0, 2.0, 1.0))
        rates = [cert.alpha / (cert.tau * scale) for scale in (1.0, 1.5, 2.0, 4.0)]
        assert all(a > b for a, b in zip(rates, rates[1:]))

    def test_checklist_passes_and_serializes(self):
        cert = build_monotone_certificate(
            sector_params(FeedbackLaw.linear_gain(1.0)), WeightRho(1.0, 2.0, 1.0))
        doc = cert.to_dict()
        assert all(item["passed"] for item in doc["hypotheses"])
        assert doc["kind"] == "monotone"

    def test_grid_search_beats_default_weight(self):
        sector = sector_params(FeedbackLaw.linear_gain(1.0))
        default = build_monotone_certificate(sector, WeightRho(1.0, 2.0, 1.0))
        best = search_monotone_rho(sector, 1.0)
        assert best.mu >= default.mu

    def test_pure_function_of_inputs(self):
        sector = sector_params(FeedbackLaw.deadzone(0.5))
        rho = WeightRho(1.0, 2.0, 1.0)
        assert build_monotone_certificate(sector, rho) == \
            build_monotone_certificate(sector, rho)


class TestAntiDampingCertificate:
    def test_hand_computed_at_q_04(self):
        # eps* = min{0.2/3, 0.2/3} = 1/15, mu = min{1/15, 1/30} = 1/30,
        # rho = (0.8 + 1/15, 0.8 + 2/15), m1 = 1/15
        cert = build_antidamping_certificate(0.4, SectorData(1.0, 1.0, 0.0, 0.0),
                                             1.0)
        assert cert.epsilon == pytest.approx(1.0 / 15.0, rel=1e-14)
        assert cert.mu == pytest.approx(1.0 / 30.0, rel=1e-14)
        assert cert.rho.rho0 == pytest.approx(0.8 + 1.0 / 15.0, rel=1e-14)
        assert cert.rho.rho_l == pytest.approx(0.8 + 2.0 / 15.0, rel=1e-14)
        assert cert.m1 == pytest.approx(1.0 / 15.0, rel=1e-12)
        assert cert.m_prefactor == pytest.approx(29.0, rel=1e-12)

    def test_zero_forcing_case(self):
        cert = build_antidamping_certificate(0.0, SectorData(1.0, 1.0, 0.0, 0.0),
                                             1.0)
        assert cert.epsilon == pytest.approx(1.0 / 3.0, rel=1e-14)
        assert cert.mu == pytest.approx(1.0 / 6.0, rel=1e-14)
        assert cert.rho.rho0 == pytest.approx(1.0 / 3.0, rel=1e-14)
        assert cert.rho.rho_l == pytest.approx(2.0 / 3.0, rel=1e-14)
        assert cert.m1 == pytest.approx(1.0 / 3.0, rel=1e-12)

    def test_feasibility_flips_at_one_half(self):
        sector = SectorData(1.0, 1.0, 0.0, 0.0)
        assert build_antidamping_certificate(0.499, sector, 1.0).mu > 0
        with pytest.raises(HypothesisViolatedError):
            build_antidamping_certificate(0.5, sector, 1.0)

    def test_sector_margin_condition(self):
        # alpha1/(1 + alpha2^2) = 0.25 <= q = 0.3
        with pytest.raises(HypothesisViolatedError) as err:
            build_antidamping_certificate(0.3, SectorData(0.5, 1.0, 0.0, 0.0),
                                          1.0)
        assert "sector margin" in err.value.condition

    def test_global_sector_required(self):
        with pytest.raises(HypothesisViolatedError):
            build_antidamping_certificate(
                0.1, sector_params(FeedbackLaw.deadzone(0.5)), 1.0)

    def test_rate_uses_crossing_time(self):
        # mu = min{eps, eps/(2L)}: long domains slow the certified rate
        sector = SectorData(1.0, 1.0, 0.0, 0.0)
        short = build_antidamping_certificate(0.4, sector, 0.25)
        long = build_antidamping_certificate(0.4, sector, 4.0)
        assert short.mu == pytest.approx(short.epsilon, rel=1e-14)
        assert long.mu == pytest.approx(long.epsilon / 8.0, rel=1e-14)

    def test_checklist_serializes(self):
        cert = build_antidamping_certificate(0.4, SectorData(1.0, 1.0, 0.0, 0.0),
                                             1.0)
        doc = cert.to_dict()
        assert all(item["passed"] for item in doc["hypotheses"])
        assert doc["kind"] == "antidamping"


class TestGammaEquivalence:
    def test_sandwich_on_random_states(self, rng):
        grid = Grid(1.0, 64)
        cert = build_antidamping_certificate(0.4, SectorData(1.0, 1.0, 0.0, 0.0),
                                             1.0)
        for _ in range(100):
            st = FieldState(rng.standard_normal(65), rng.standard_normal(65))
            e_tot = energy(st, grid).total
            gamma = lyapunov_gamma(st, cert.rho, grid)
            assert cert.m1 * e_tot - 1e-12 <= gamma <= cert.m2 * e_tot + 1e-12


class TestDistanceLemmaConstant:
    def test_positive_and_stable_under_refinement(self):
        m64 = distance_lemma_constant(Grid(1.0, 64)).m1_numeric
        m128 = distance_lemma_constant(Grid(1.0, 128)).m1_numeric
        assert m64 > 0 and m128 > 0
        assert abs(m128 - m64) <= 0.05 * m64

    def test_large_grid_rejected(self):
        with pytest.raises(ContractError):
            distance_lemma_constant(Grid(1.0, 512))

    def test_poincare_wirtinger_on_neumann_eigenvectors(self):
        # analytic constant (L/pi)^2 with 10% slack, checked on the
        # eigenvectors of the free second-difference operator
        grid = Grid(1.0, 64)
        n = grid.n_nodes
        dx = grid.dx
        main = np.full(n, 2.0 / dx)
        main[0] = main[-1] = 1.0 / dx
        stiff = (np.diag(main) + np.diag(np.full(n - 1, -1.0 / dx), 1)
                 + np.diag(np.full(n - 1, -1.0 / dx), -1))
        mass = np.diag(grid.trapezoid_weights())
        vals, vecs = scipy.linalg.eigh(stiff, mass)
        wt = grid.trapezoid_weights()
        c_pw = (grid.length_l / math.pi) ** 2 * 1.1
        from waveguard import bilinear_a
        for idx in range(1, n):
            w = vecs[:, idx]
            w = w - float(wt @ w) / grid.length_l
            assert float(wt @ (w * w)) <= c_pw * bilinear_a(w, w, grid)


class TestAttractivityConstant:
    def test_product_definition(self):
        cert = build_monotone_certificate(
            sector_params(FeedbackLaw.linear_gain(1.0)), WeightRho(1.0, 2.0, 1.0))
        lemma = DistanceLemmaConstant(m1_numeric=0.1, k=10.0, n_cells=32)
        assert attractivity_constant(cert, lemma) == pytest.approx(11.25)

    def test_antidamping_uses_prefactor(self):
        cert = build_antidamping_certificate(0.4, SectorData(1.0, 1.0, 0.0, 0.0),
                                             1.0)
        lemma = DistanceLemmaConstant(m1_numeric=0.5, k=2.0, n_cells=32)
        assert attractivity_constant(cert, lemma) == \
            pytest.approx(2.0 * cert.m_prefactor)
