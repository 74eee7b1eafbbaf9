import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from qsep import algebra, designs
from qsep.algebra import HermitianMatrix
from qsep.separation import (
    InsufficientDataError, SettingRecord, Verdict, predict, separate, separate_eprb, separate_sg,
)
from qsep.simulator import ConditionRecord, Quadratic, QuantumEPRB, QuantumSG, simulate
from qsep.stats import summarize

AXES6 = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
AXES3 = [(1.0, 0, 0), (0, 1.0, 0), (0, 0, 1.0)]


def sg_records(values, axes=AXES6, N=None):
    return [SettingRecord("SG", float(v), a=a, N=N) for v, a in zip(values, axes)]


def eprb_design():
    pairs = [(a, b) for a in AXES3 for b in AXES3]
    pairs += [(tuple(-c for c in e), e) for e in AXES3] + [(e, tuple(-c for c in e)) for e in AXES3]
    return pairs


def exact_eprb_records(rho, pairs=None):
    out = []
    for a1, a2 in pairs or eprb_design():
        x, y = algebra.side_operator(a1, 1), algebra.side_operator(a2, 2)
        out.append(SettingRecord(
            "EPRB", algebra.expectation(rho, x), a1=a1, a2=a2,
            mean_y=algebra.expectation(rho, y), corr_xy=algebra.expectation(rho, x @ y)))
    return out


def random_density(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return HermitianMatrix(rho / np.trace(rho).real)


def normal_equation_oracle(design, target):
    """Plain normal-equation solve, independent of the SVD path under test."""
    sol = np.linalg.solve(design.T @ design, design.T @ target)
    res = design @ sol - target
    return sol, math.sqrt(np.mean(res ** 2))


class TestSGExamples:
    def test_pure_z(self):
        axes = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, -1)]
        r = separate_sg(sg_records([0, 0, 1, -1], axes))
        assert r.u0 == pytest.approx(0, abs=1e-12)
        assert np.allclose(r.bloch, (0, 0, 1), atol=1e-12)
        assert r.residual_rms < 1e-12
        assert r.purity == pytest.approx(1)
        assert r.verdict is Verdict.SEPARABLE_PURE

    def test_all_zero(self):
        r = separate_sg(sg_records([0] * 6))
        assert r.u0 == 0 and np.allclose(r.bloch, 0)
        assert r.rho.allclose(HermitianMatrix(np.eye(2) / 2))
        assert r.purity == pytest.approx(0.5)
        assert r.verdict is Verdict.SEPARABLE_MIXED

    def test_quadratic_counterexample(self):
        values = [0, 0, 0, 0, 1, 1]
        design = np.array([[1.0, *a] for a in AXES6])
        sol, rms = normal_equation_oracle(design, np.array(values, dtype=float))
        assert sol == pytest.approx([1 / 3, 0, 0, 0], abs=1e-12)
        assert rms == pytest.approx(math.sqrt(2) / 3)
        r = separate_sg(sg_records(values))
        assert r.u0 == pytest.approx(1 / 3, abs=1e-12)
        assert np.allclose(r.bloch, 0, atol=1e-12)
        assert r.residual_rms == pytest.approx(0.4714045207910317, abs=1e-12)
        assert r.verdict is Verdict.NOT_SEPARABLE

    def test_rank_deficient(self):
        axes = [(0, 0, 1), (0, 0, -1), (0, 0, 1)]
        r = separate_sg(sg_records([1, -1, 1], axes))
        assert r.verdict is Verdict.INDETERMINATE_RANK
        assert r.rank < 4

    def test_too_few_settings(self):
        with pytest.raises(InsufficientDataError):
            separate_sg(sg_records([1], [(0, 0, 1)]))

    def test_inconsistent_kinds(self):
        mixed = sg_records([0, 0]) + [SettingRecord("EPRB", 0.0, a1=(0, 0, 1), a2=(0, 0, 1))]
        with pytest.raises(ValueError):
            separate_sg(mixed)

    def test_moment_bound(self):
        with pytest.raises(ValueError):
            SettingRecord("SG", 1.5, a=(0, 0, 1))

    def test_unphysical_vector_not_separable(self):
        r = separate_sg(sg_records([1.0, -1.0, 1.0, -1.0, 1.0, -1.0]))
        assert np.linalg.norm(r.bloch) == pytest.approx(math.sqrt(3))
        assert r.verdict is Verdict.NOT_SEPARABLE


class TestEPRBExamples:
    def test_singlet(self):
        r = separate_eprb(exact_eprb_records(algebra.singlet_density()))
        c = r.coefficients
        assert np.allclose(c.c1, 0, atol=1e-12) and np.allclose(c.c2, 0, atol=1e-12)
        assert np.allclose(c.c12, -np.eye(3) / 4, atol=1e-12)
        assert r.rho.frobenius_distance(algebra.singlet_density()) < 1e-12
        assert r.purity == pytest.approx(1)
        assert np.allclose(r.eigenvalues, [1, 0, 0, 0], atol=1e-12)
        assert r.verdict is Verdict.SEPARABLE_PURE

    def test_zz_correlations(self):
        records = [
            SettingRecord("EPRB", 0.0, a1=a1, a2=a2, mean_y=0.0, corr_xy=a1[2] * a2[2])
            for a1, a2 in eprb_design()
        ]
        r = separate_eprb(records)
        expected = np.zeros((3, 3))
        expected[2, 2] = 0.25
        assert np.allclose(r.coefficients.c12, expected, atol=1e-12)
        # oracle: the target matrix is diagonal, so its spectrum is its diagonal
        oracle = np.eye(4) / 4 + np.kron(algebra.SIGMA_Z, algebra.SIGMA_Z) / 4
        assert np.allclose(sorted(np.diag(oracle))[::-1], [0.5, 0.5, 0, 0])
        assert np.allclose(r.eigenvalues, [0.5, 0.5, 0, 0], atol=1e-12)
        assert r.purity == pytest.approx(0.5)
        assert r.verdict is Verdict.SEPARABLE_MIXED

    def test_all_zero(self):
        records = [SettingRecord("EPRB", 0.0, a1=a1, a2=a2, mean_y=0.0, corr_xy=0.0)
                   for a1, a2 in eprb_design()]
        r = separate_eprb(records)
        assert r.rho.allclose(HermitianMatrix(np.eye(4) / 4))
        assert r.purity == pytest.approx(0.25)
        assert r.verdict is Verdict.SEPARABLE_MIXED

    def test_missing_marginals_rank_deficient(self):
        records = [SettingRecord("EPRB", None, a1=a1, a2=a2, corr_xy=-float(np.dot(a1, a2)))
                   for a1, a2 in eprb_design()]
        r = separate_eprb(records)
        assert r.verdict is Verdict.INDETERMINATE_RANK

    def test_dispatch(self):
        r = separate(exact_eprb_records(algebra.singlet_density()))
        assert r.kind == "EPRB"


class TestPredict:
    def test_singlet_sixty_degrees(self):
        r = separate_eprb(exact_eprb_records(algebra.singlet_density()))
        cond = ConditionRecord.eprb((0, 0, 1), designs.direction_at(math.pi / 3))
        assert predict(r, cond)["corr_xy"] == pytest.approx(-0.5, abs=1e-12)

    def test_pure_z(self):
        r = separate_sg(sg_records([0, 0, 0, 0, 1, -1]))
        assert predict(r, ConditionRecord.sg((0, 0, 1)))["mean_x"] == pytest.approx(1)

    def test_maximally_mixed(self):
        records = [SettingRecord("EPRB", 0.0, a1=a1, a2=a2, mean_y=0.0, corr_xy=0.0)
                   for a1, a2 in eprb_design()]
        pred = predict(separate_eprb(records), ConditionRecord.eprb((0, 0, 1), (0.6, 0.8, 0)))
        assert all(v == pytest.approx(0, abs=1e-15) for v in pred.values())

    def test_kind_mismatch(self):
        r = separate_sg(sg_records([0] * 6))
        with pytest.raises(ValueError):
            predict(r, ConditionRecord.eprb((0, 0, 1), (0, 0, 1)))


class TestProperties:
    def test_faithfulness_sg(self):
        rng = np.random.default_rng(100)
        for _ in range(100):
            rho = random_density(rng, 2)
            records = [SettingRecord("SG", algebra.expectation(rho, algebra.dot_sigma(a)), a=a)
                       for a in AXES6]
            r = separate_sg(records)
            assert r.rho.frobenius_distance(rho) < 1e-9
            assert r.residual_rms <= 1e-9

    def test_faithfulness_eprb(self):
        rng = np.random.default_rng(101)
        for _ in range(100):
            rho = random_density(rng, 4)
            r = separate_eprb(exact_eprb_records(rho))
            assert r.rho.frobenius_distance(rho) < 1e-9
            assert r.residual_rms <= 1e-9
            assert r.verdict is Verdict.SEPARABLE_MIXED or r.purity >= 0.98

    def test_rotational_covariance(self):
        rng = np.random.default_rng(102)
        axes = [tuple(v / np.linalg.norm(v)) for v in rng.normal(size=(8, 3))]
        for k in range(50):
            M = rng.normal(size=3)
            M /= np.linalg.norm(M)
            R = Rotation.random(random_state=k).as_matrix()
            base = separate_sg(sg_records([float(np.dot(a, M)) for a in axes], axes))
            rot_axes = [tuple(R @ a) for a in axes]
            rot = separate_sg(sg_records([float(np.dot(a, R @ M)) for a in rot_axes], rot_axes))
            assert np.allclose(rot.bloch, R @ base.bloch, atol=1e-9)

    def test_trace_one(self):
        r = separate_sg(sg_records([0.3, -0.1, 0.2, 0.0, 0.5, -0.4]))
        assert r.rho.trace() == pytest.approx(1, abs=1e-15)


class TestSimulated:
    def test_quantum_sg_is_pure(self):
        n = 1_000_000
        stats = [summarize(simulate(QuantumSG(), c, n, 50 + i))
                 for i, c in enumerate(designs.sg_axes_6())]
        r = separate_sg([SettingRecord.from_stats(s) for s in stats])
        assert r.verdict is Verdict.SEPARABLE_PURE
        # purity = (1 + |rho|^2)/2; rho_z has SE ~ 1/sqrt(2N) near full polarization
        se = math.sqrt(1 / (2 * n))
        assert abs(r.purity - 1) <= 3 * 3 * se

    @pytest.mark.parametrize("n", [10_000, 100_000])
    def test_quadratic_not_separable(self, n):
        stats = [summarize(simulate(Quadratic(), c, n, 80 + i))
                 for i, c in enumerate(designs.sg_axes_6())]
        r = separate_sg([SettingRecord.from_stats(s) for s in stats], sep_tol=0.05)
        assert r.verdict is Verdict.NOT_SEPARABLE
        assert abs(r.residual_rms - 0.471) < 0.02

    def test_held_out_prediction(self):
        n = 200_000
        fit_stats = [summarize(simulate(QuantumEPRB(), c, n, 10 + i))
                     for i, c in enumerate(designs.eprb_axes_9_6())]
        r = separate_eprb([SettingRecord.from_stats(s) for s in fit_stats])
        rng = np.random.default_rng(7)
        for k in range(5):
            a1, a2 = (tuple(v / np.linalg.norm(v)) for v in rng.normal(size=(2, 3)))
            cond = ConditionRecord.eprb(a1, a2)
            held = summarize(simulate(QuantumEPRB(), cond, n, 900 + k))
            pred = predict(r, cond)
            for name, value in held.moments().items():
                se = math.sqrt(max(1 - value ** 2, 1 / n) / n)
                assert abs(pred[name] - value) <= 5 * se
