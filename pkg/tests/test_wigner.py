import math

import numpy as np
import pytest

from fock_oracle import Mixture, Oracle
from wignersim import gaussian as ga
from wignersim import symplectic as sym
from wignersim import wigner as wg
from wignersim.errors import ImprobableBranch

RNG = np.random.default_rng(4242)


def thermal_expr(nbar: float) -> wg.WignerExpr:
    return wg.from_gaussian(ga.thermal_state(nbar))


class TestFromGaussian:
    def test_vacuum_value(self):
        v = wg.from_gaussian(ga.vacuum_state(1))
        assert abs(v.evaluate((0.0, 0.0)) - 1.0 / math.pi) < 1e-14
        assert abs(v.norm - 1.0) < 1e-12

    def test_coherent_displaced_gaussian(self):
        alpha, theta = 1.4, 0.7
        c = wg.from_gaussian(ga.coherent_state(alpha, theta))
        for x, p in RNG.normal(0, 1.5, size=(10, 2)):
            expo = -((x - math.sqrt(2) * alpha * math.cos(theta)) ** 2) - (
                (p - math.sqrt(2) * alpha * math.sin(theta)) ** 2
            )
            assert abs(c.evaluate((x, p)) - math.exp(expo) / math.pi) < 1e-12

    def test_thermal_origin(self):
        assert abs(thermal_expr(2.0).evaluate((0.0, 0.0)) - 1.0 / (5.0 * math.pi)) < 1e-14


class TestFockWigner:
    def test_zero_is_vacuum(self):
        f0 = wg.fock_wigner(0)
        v = wg.from_gaussian(ga.vacuum_state(1))
        for pt in RNG.normal(0, 1, size=(8, 2)):
            assert abs(f0.evaluate(pt) - v.evaluate(pt)) < 1e-13

    def test_single_photon_origin(self):
        assert abs(wg.fock_wigner(1).evaluate((0.0, 0.0)) + 1.0 / math.pi) < 1e-14

    def test_normalized(self):
        assert abs(wg.fock_wigner(3).norm - 1.0) < 1e-10

    def test_cutoff(self):
        with pytest.raises(ValueError):
            wg.fock_wigner(wg.FOCK_CUTOFF + 1)


class TestApplySymplectic:
    def test_identity(self):
        f1 = wg.fock_wigner(1)
        out = wg.apply_symplectic(f1, sym.identity_transform(1))
        for pt in RNG.normal(0, 1, size=(6, 2)):
            assert abs(out.evaluate(pt) - f1.evaluate(pt)) < 1e-13

    def test_gaussian_path_equivalence(self):
        alpha, r, phi = 1.2, 0.7, 1.3
        state = ga.tensor([ga.coherent_state(alpha, 0.0), ga.squeezed_vacuum(r, 0.0)])
        via_gauss = wg.from_gaussian(ga.propagate(state, sym.make_mzi(phi)))
        via_wigner = wg.apply_symplectic(wg.from_gaussian(state), sym.make_mzi(phi))
        t1, t2 = via_gauss.terms[0], via_wigner.terms[0]
        np.testing.assert_allclose(t1.mean, t2.mean, atol=1e-12)
        np.testing.assert_allclose(t1.quad, t2.quad, atol=1e-12)
        assert abs(t1.weight - t2.weight) < 1e-12

    def test_fock_rotation_invariance(self):
        f1 = wg.fock_wigner(1)
        rotated = wg.apply_symplectic(f1, sym.make_phase_shifter(0.9))
        for pt in RNG.normal(0, 1, size=(10, 2)):
            assert abs(rotated.evaluate(pt) - f1.evaluate(pt)) < 1e-12


class TestMoments:
    def test_vacuum_x2(self):
        assert abs(wg.moment(wg.from_gaussian(ga.vacuum_state(1)), (2, 0)) - 0.5) < 1e-13

    def test_coherent_x(self):
        c = wg.from_gaussian(ga.coherent_state(1.0, 0.0))
        assert abs(wg.moment(c, (1, 0)) - math.sqrt(2.0)) < 1e-13

    def test_fock1_symmetric_intensity(self):
        f1 = wg.fock_wigner(1)
        total = wg.moment(f1, (2, 0)) + wg.moment(f1, (0, 2))
        assert abs(total - 3.0) < 1e-12  # <n> = total/2 - 1/2 = 1


class TestMarginalize:
    def test_product_state(self):
        a = ga.coherent_state(0.9, 0.3)
        b = ga.thermal_state(1.2)
        joint = wg.from_gaussian(ga.tensor([a, b]))
        marg = wg.marginalize(joint, 2)
        ref = wg.from_gaussian(a)
        for pt in RNG.normal(0, 1, size=(8, 2)):
            assert abs(marg.evaluate(pt) - ref.evaluate(pt)) < 1e-12

    def test_tmsv_marginal_is_thermal(self):
        r = 0.85
        tms = wg.apply_symplectic(wg.from_gaussian(ga.vacuum_state(2)), sym.make_two_mode_squeezer(r, 0.0))
        marg = wg.marginalize(tms, 2)
        ref = thermal_expr(math.sinh(r) ** 2)
        for pt in RNG.normal(0, 1, size=(8, 2)):
            assert abs(marg.evaluate(pt) - ref.evaluate(pt)) < 1e-12

    def test_norm_preserved(self):
        for _ in range(10):
            r = RNG.uniform(0, 1)
            expr = wg.apply_symplectic(
                wg.tensor_exprs(wg.fock_wigner(1), thermal_expr(RNG.uniform(0, 2))),
                sym.make_beam_splitter(RNG.uniform(0.2, 0.8)),
            )
            marg = wg.marginalize(expr, 1)
            assert abs(marg.norm - expr.norm) < 1e-10


class TestProjections:
    def test_vacuum_fock0(self):
        reduced, p = wg.project_fock(wg.from_gaussian(ga.vacuum_state(1)), 1, 0)
        assert abs(p - 1.0) < 1e-12
        assert reduced.modes == 0

    def test_thermal_geometric(self):
        nbar = 1.7
        for n in (0, 1, 3, 5):
            _, p = wg.project_fock(thermal_expr(nbar), 1, n)
            assert abs(p - nbar**n / (nbar + 1.0) ** (n + 1)) < 1e-12

    def test_fock1_projects_to_itself(self):
        _, p = wg.project_fock(wg.fock_wigner(1), 1, 1)
        assert abs(p - 1.0) < 1e-10

    def test_click_complement(self):
        ex = wg.tensor_exprs(thermal_expr(1.2), wg.from_gaussian(ga.vacuum_state(1)))
        ex = wg.apply_symplectic(ex, sym.make_beam_splitter(0.6))
        _, pc = wg.project_click(ex, 1)
        _, p0 = wg.project_no_click(ex, 1)
        assert abs(pc + p0 - 1.0) < 1e-10

    def test_click_probabilities(self):
        _, p = wg.project_click(wg.tensor_exprs(thermal_expr(4.0), thermal_expr(0.5)), 1)
        assert abs(p - 0.8) < 1e-11
        _, p = wg.project_click(wg.tensor_exprs(wg.from_gaussian(ga.coherent_state(1.0, 0.0)), thermal_expr(0.5)), 1)
        assert abs(p - (1.0 - math.exp(-1.0))) < 1e-11

    def test_vacuum_click_improbable(self):
        with pytest.raises(ImprobableBranch):
            wg.project_click(wg.from_gaussian(ga.vacuum_state(1)), 1)

    def test_middle_mode_bookkeeping(self):
        # projecting out mode 2 of (A, B, C) must leave (A, C) in order
        a = ga.thermal_state(0.6)
        b = ga.thermal_state(2.0)
        c = ga.coherent_state(1.2, 0.4)
        joint = wg.from_gaussian(ga.tensor([a, b, c]))
        reduced, p = wg.project_fock(joint, 2, 0)
        assert abs(p - 1.0 / 3.0) < 1e-10  # thermal P(0) = 1/(nbar+1)
        ref = wg.from_gaussian(ga.tensor([a, c]))
        for pt in RNG.normal(0, 1, size=(6, 4)):
            assert abs(reduced.evaluate(pt) - ref.evaluate(pt)) < 1e-10


class TestGeneratingFunction:
    def test_vacuum_flat(self):
        v = wg.from_gaussian(ga.vacuum_state(1))
        for l in (0.0, 0.3, 0.7, 1.0):
            assert abs(wg.generating_function(v, 1, l) - 1.0) < 1e-12

    def test_fock1_linear(self):
        f1 = wg.fock_wigner(1)
        for l in (0.0, 0.4, 1.0):
            assert abs(wg.generating_function(f1, 1, l) - l) < 1e-10

    def test_domain(self):
        with pytest.raises(ValueError):
            wg.generating_function(wg.fock_wigner(0), 1, -1.0)

    def test_matches_distribution_sum(self):
        expr = wg.apply_symplectic(
            wg.tensor_exprs(thermal_expr(1.0), wg.fock_wigner(1)), sym.make_beam_splitter(0.7)
        )
        reduced = wg.marginal_mode(expr, 1)
        dist = wg.photon_number_distribution(reduced, 1, 60)
        assert dist.tail < 1e-9
        for l in (0.0, 0.3, 0.7):
            ref = sum(p * l**n for n, p in enumerate(dist.probs))
            assert abs(wg.generating_function(reduced, 1, l) - ref) < 1e-7


class TestDistribution:
    def test_thermal_geometric_law(self):
        nbar = 4.0
        dist = wg.photon_number_distribution(thermal_expr(nbar), 1, 40)
        ref = np.array([nbar**n / (nbar + 1.0) ** (n + 1) for n in range(41)])
        assert np.max(np.abs(dist.probs - ref)) < 1e-12
        assert dist.tail < 1e-3

    def test_distribution_matches_projection(self):
        expr = wg.apply_symplectic(
            wg.tensor_exprs(thermal_expr(0.8), wg.fock_wigner(1)), sym.make_beam_splitter(0.8)
        )
        reduced = wg.marginal_mode(expr, 2).normalize()
        dist = wg.photon_number_distribution(reduced, 1, 12)
        for n in range(13):
            _, p = wg.project_fock(reduced, 1, n)
            assert abs(dist.probs[n] - p) < 1e-9

    def test_parity_identity(self):
        # pi W(0,0) = sum (-1)^n P(n); the truncated alternating sum carries a
        # remainder bounded by P(n_max + 1), estimated from the geometric ratio
        for nbar in (0.5, 2.0, 4.0):
            expr = thermal_expr(nbar)
            dist = wg.photon_number_distribution(expr, 1, 60)
            alt = sum((-1.0) ** n * p for n, p in enumerate(dist.probs))
            ratio = dist.probs[-1] / max(dist.probs[-2], 1e-300)
            remainder = dist.probs[-1] * ratio
            assert abs(math.pi * expr.evaluate((0.0, 0.0)) - alt) < 1e-7 + remainder


class TestPurity:
    def test_vacuum(self):
        assert abs(wg.purity(wg.from_gaussian(ga.vacuum_state(1))) - 1.0) < 1e-12

    def test_thermal(self):
        assert abs(wg.purity(thermal_expr(2.0)) - 0.2) < 1e-12

    def test_fock_states_pure(self):
        for n in (1, 2, 4):
            assert abs(wg.purity(wg.fock_wigner(n)) - 1.0) < 1e-9

    def test_thermal_injection_strictly_decreases(self):
        for _ in range(10):
            s = ga.squeezed_vacuum(RNG.uniform(0.1, 0.9), 0.0)
            before = wg.purity(wg.from_gaussian(s))
            after = wg.purity(wg.from_gaussian(ga.inject_thermal(s, 1, RNG.uniform(0.2, 1.5), RNG.uniform(0.3, 0.9))))
            assert after < before


class TestAttenuate:
    def test_matches_gaussian_channel(self):
        state = ga.tensor([ga.coherent_state(1.1, 0.2), ga.squeezed_vacuum(0.6, 0.0)])
        eta, nenv = 0.75, 0.4
        via_gauss = wg.from_gaussian(ga.inject_thermal(state, 1, nenv, eta))
        via_expr = wg.attenuate(wg.from_gaussian(state), 1, eta, nenv)
        for pt in RNG.normal(0, 1, size=(10, 4)):
            assert abs(via_gauss.evaluate(pt) - via_expr.evaluate(pt)) < 1e-12

    def test_on_nongaussian_state_against_oracle(self):
        # lossy single-photon state: P(1) = eta, P(0) = 1 - eta
        eta = 0.65
        lossy = wg.attenuate(wg.fock_wigner(1), 1, eta)
        dist = wg.photon_number_distribution(lossy, 1, 5)
        assert abs(dist.probs[0] - (1.0 - eta)) < 1e-10
        assert abs(dist.probs[1] - eta) < 1e-10

    def test_thermal_environment_on_fock_state(self):
        # single photon in a warm lossy channel, against the Fock oracle
        eta, nenv = 0.7, 0.5
        noisy = wg.attenuate(wg.fock_wigner(1), 1, eta, nenv)
        orc = Oracle([25, 25])
        mix = Mixture.from_product(orc, [("fock", 1), ("thermal", nenv)]).apply(orc.bs(1, 2, eta))
        ref = mix.number_distribution(1)
        dist = wg.photon_number_distribution(noisy, 1, 20)
        assert np.max(np.abs(dist.probs - ref[:21])) < 1e-8


class TestGridExport:
    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "wigner.csv"
        xs = np.linspace(-1.0, 1.0, 5)
        ps = np.linspace(-1.0, 1.0, 5)
        expr = wg.fock_wigner(1)
        wg.save_grid_csv(expr, xs, ps, str(path))
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "x,p,W"
        assert len(rows) == 26
        x, p, w = (float(v) for v in rows[13].split(","))
        assert abs(expr.evaluate((x, p)) - w) < 1e-15

    def test_grid_requires_single_mode(self):
        with pytest.raises(ValueError):
            wg.grid_samples(wg.from_gaussian(ga.vacuum_state(2)), np.zeros(2), np.zeros(2))


class TestOracleEquivalence:
    def test_distribution_against_fock_simulator(self):
        # heralded (non-Gaussian) state: one photon subtracted from thermal light
        orc = Oracle([70, 12])
        mix = Mixture.from_product(orc, [("thermal", 1.6), ("vacuum",)])
        mix = mix.apply(orc.bs(2, 1, 0.85))
        red, prob = mix.herald_fock(2, 1)
        ref = red.number_distribution(1)

        expr = wg.tensor_exprs(thermal_expr(1.6), wg.from_gaussian(ga.vacuum_state(1)))
        expr = wg.apply_symplectic(expr, sym.embed(sym.make_beam_splitter(0.85), [2, 1], 2))
        state, p = wg.project_fock(expr, 2, 1)
        assert abs(p - prob) < 1e-9
        dist = wg.photon_number_distribution(state, 1, 40)
        assert np.max(np.abs(dist.probs - ref[:41])) < 1e-6
