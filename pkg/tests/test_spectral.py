import math

import numpy as np
import pytest

from conftest import BETAS, all_instances, instance
from mvmeixner.errors import ConstraintViolation, DegenerateParameters
from mvmeixner.model import ModelParams
from mvmeixner.spectral import (
    SpectralData,
    build_u,
    characteristic_matrix,
    degenerate_spectrum,
    solve,
    solve_spectrum,
)


class TestCharacteristicMatrix:
    def test_n1(self):
        F = characteristic_matrix(ModelParams(1.0, (0.5,)))
        assert F.tolist() == [[1.0]]

    def test_n2(self):
        F = characteristic_matrix(ModelParams(1.0, (0.2, 0.3)))
        assert F[0, 0] == pytest.approx(4.0)
        assert F[1, 1] == pytest.approx(7.0 / 3.0)
        assert F[0, 1] == F[1, 0] == -1.0

    def test_half_half_would_be_singular_gap(self):
        F = characteristic_matrix(ModelParams(0.9, (0.5, 0.4999999)))
        assert F[0, 0] == pytest.approx(1.0)


class TestSolveSpectrum:
    def test_n1_closed_form(self):
        for c in (0.3, 0.5, 0.7):
            lam = solve_spectrum(ModelParams(1.0, (c,)))
            assert abs(lam[0] - (1 - c) / c) <= 1e-14

    def test_n2_quadratic_oracle(self):
        # independent oracle: the quadratic formula for the n = 2 secular roots
        for beta in BETAS:
            p, _ = instance(2, beta)
            inv1, inv2 = 1 / p.c[0], 1 / p.c[1]
            delta = math.sqrt(4 + (inv1 - inv2) ** 2)
            lo = 0.5 * (-2 + inv1 + inv2 - delta)
            hi = 0.5 * (-2 + inv1 + inv2 + delta)
            lam = solve_spectrum(p)
            assert lam[0] == pytest.approx(lo, abs=1e-12)
            assert lam[1] == pytest.approx(hi, abs=1e-12)

    def test_interlacing(self):
        for p, sd in all_instances():
            poles = sorted(1 / c for c in p.c)
            lam = sd.lam
            assert 0 < lam[0] < poles[0]
            for k in range(1, p.n):
                assert poles[k - 1] < lam[k] < poles[k]

    def test_cross_check_flag(self):
        for p, _ in all_instances():
            solve_spectrum(p, cross_check=True)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateParameters):
            solve_spectrum(ModelParams(1.0, (0.4, 0.4)))

    def test_permutation_leaves_lambda_fixed(self):
        p = ModelParams(1.1, (0.1, 0.3, 0.2))
        q = ModelParams(1.1, (0.3, 0.2, 0.1))
        lam_p = solve_spectrum(p)
        lam_q = solve_spectrum(q)
        assert np.allclose(lam_p, lam_q, atol=1e-12, rtol=0)


class TestDegenerateSpectrum:
    def test_n2_closed_form(self):
        lam, mult = degenerate_spectrum(ModelParams(1.0, (0.4, 0.4)))
        assert mult == (1, 1)
        assert lam[0] == pytest.approx(-2 + 1 / 0.4, abs=1e-12)
        assert lam[1] == pytest.approx(1 / 0.4, abs=1e-12)

    def test_triple_group(self):
        lam, mult = degenerate_spectrum(ModelParams(1.0, (0.2, 0.2, 0.2)))
        # pole 1/c with multiplicity k-1, one simple root below it
        assert mult == (1, 2)
        assert lam[1] == pytest.approx(5.0, abs=1e-12)
        assert lam[0] < 5.0
        # reduced secular equation: 1 + 3c/(c lam - 1) = 0
        assert lam[0] == pytest.approx((1 - 3 * 0.2) / 0.2, abs=1e-12)

    def test_non_degenerate_bypass(self):
        p, sd = instance(2, 1.5)
        lam, mult = degenerate_spectrum(p)
        assert mult == (1, 1)
        assert np.allclose(lam, sd.lam, atol=1e-12, rtol=0)


class TestBuildU:
    def test_n1_closed_values(self):
        p = ModelParams(1.0, (0.5,))
        sd = solve(p)
        assert sd.u[0][0] == pytest.approx(-1.0, abs=1e-12)
        assert sd.b[0][0] == pytest.approx(2.0, abs=1e-12)
        assert sd.cbar[0] == pytest.approx(0.5, abs=1e-12)

    def test_constraints_all_instances(self):
        for p, sd in all_instances():
            n, mass = p.n, p.c_mass
            for j in range(n):
                lin = sum(p.c[i] * sd.u[i][j] for i in range(n))
                assert abs(lin - (mass - 1)) <= 1e-10
                blin = sum(p.c[i] * sd.b[i][j] for i in range(n))
                assert abs(blin - 1.0) <= 1e-10
                for k in range(j + 1, n):
                    quad = sum(p.c[i] * sd.u[i][j] * sd.u[i][k] for i in range(n))
                    assert abs(quad - (mass - 1)) <= 1e-10
            assert all(cb > 0 for cb in sd.cbar)
            assert sum(sd.cbar) < 1.0

    def test_cbar_definition(self):
        for p, sd in all_instances():
            mass = p.c_mass
            for j in range(p.n):
                lhs = 1 - mass + sum(p.c[i] * sd.u[i][j] ** 2 for i in range(p.n))
                assert lhs == pytest.approx((1 - mass) / sd.cbar[j], rel=1e-12)

    def test_degenerate_refused(self):
        p = ModelParams(1.0, (0.4, 0.4))
        with pytest.raises(DegenerateParameters, match="distinct"):
            build_u(p, (0.5, 2.5))

    def test_bad_lambda_gated(self):
        p, sd = instance(2, 1.5)
        with pytest.raises(ConstraintViolation):
            build_u(p, (sd.lam[0] + 1e-3, sd.lam[1]))

    def test_permutation_covariance_of_u(self):
        p = ModelParams(1.1, (0.1, 0.3, 0.2))
        perm = (1, 2, 0)  # q.c[i] = p.c[perm[i]]
        q = ModelParams(1.1, tuple(p.c[i] for i in perm))
        sd_p, sd_q = solve(p), solve(q)
        for i in range(3):
            for j in range(3):
                assert sd_q.u[i][j] == pytest.approx(sd_p.u[perm[i]][j], rel=1e-11)

    def test_serialization_shape(self):
        _, sd = instance(2, 1.5)
        d = sd.to_dict()
        assert set(d) == {"lambda", "u", "cbar", "residuals"}
        assert len(d["u"]) == 2 and len(d["u"][0]) == 2

    def test_hashable_for_caching(self):
        _, sd = instance(2, 1.5)
        assert isinstance(hash(sd), int)
        assert isinstance(sd, SpectralData)
