import numpy as np
import pytest

from conftest import random_orbitals
from oracles import counting_projectors, embedding, kron_list, lifted_two_body
from mflab.alpha import (CountingOperator, WeightFunction, alpha_f, alpha_n_fast, derivative,
                         derivative_terms, fhat_apply, mean_field_operator, pair_kernel_matrix,
                         pnk_distribution, q_onebody, sandwich, shifted, term_I, term_II, term_III,
                         weight_m, weight_n, _lagrange_coefficients)
from mflab.errors import InternalConsistencyError, InvalidArgumentError, ResourceLimitError
from mflab.fock import Rdm, build_basis, mix_excitation, random_fock_vector, rdm1, slater
from mflab.lattice import (InteractionSpec, OrbitalSet, ground_orbitals, kernel_table, make_grid)


class TestWeights:
    def test_weight_n(self):
        np.testing.assert_allclose(weight_n(4).values, [0, 0.25, 0.5, 0.75, 1])
        np.testing.assert_array_equal(weight_n(1).values, [0, 1])

    def test_weight_m(self):
        m = weight_m(16, 0.5)
        assert m(2) == 0.5 and m(4) == 1.0 and m(5) == 1.0
        np.testing.assert_allclose(weight_m(7, 1.0).values, weight_n(7).values, atol=1e-15)

    @pytest.mark.parametrize("gamma", [0.0, -0.5, 1.5])
    def test_weight_m_range(self, gamma):
        with pytest.raises(InvalidArgumentError):
            weight_m(4, gamma)

    @pytest.mark.parametrize("vals", [[0.1, 1.0], [0, 0.5], [0, 1.2, 1], [1.0]])
    def test_invalid_weight(self, vals):
        with pytest.raises(InvalidArgumentError):
            WeightFunction(vals)

    def test_json_roundtrip(self):
        m = weight_m(9, 0.3)
        back = WeightFunction.from_json(m.to_json())
        np.testing.assert_array_equal(back.values, m.values)

    def test_monotone(self):
        assert weight_m(9, 0.3).is_monotone()
        assert not WeightFunction([0, 1, 0.5, 1]).is_monotone()


class TestDerivatives:
    def test_weight_n(self):
        np.testing.assert_allclose(derivative(weight_n(5), 1), [0, .2, .2, .2, .2, .2])
        np.testing.assert_allclose(derivative(weight_n(5), -1), [.2, .2, .2, .2, .2, 0])
        np.testing.assert_allclose(derivative(weight_n(5), 2), [0, 0, .4, .4, .4, .4])
        np.testing.assert_allclose(derivative(weight_n(5), -2), [.4, .4, .4, .4, 0, 0])

    def test_weight_m(self):
        d = derivative(weight_m(16, 0.5), 1)
        np.testing.assert_allclose(d[1:5], 0.25)
        assert d[0] == 0 and np.all(d[5:] == 0)

    def test_bad_step(self):
        with pytest.raises(InvalidArgumentError):
            derivative(weight_n(4), 3)
        with pytest.raises(InvalidArgumentError):
            derivative(weight_n(4), 0)

    def test_step_larger_than_n(self):
        assert np.all(derivative(weight_n(1), 2) == 0)

    def test_shifted(self):
        f = weight_n(4)
        assert shifted(f, 1)[3] == 1 and shifted(f, 1)[4] == 0
        np.testing.assert_array_equal(shifted(f, 0), f.values)
        np.testing.assert_allclose(shifted(f, -2), [0, 0, 0, 0.25, 0.5])


class TestProjectors:
    def test_q_is_projector(self, rng):
        orb = random_orbitals(make_grid(7, 7.0), 3, rng)
        q = q_onebody(orb).matrix
        np.testing.assert_allclose(q @ q, q, atol=1e-12)
        assert np.real(np.trace(q)) == pytest.approx(4)

    def test_q_full_and_empty(self):
        g = make_grid(4, 4.0)
        np.testing.assert_allclose(q_onebody(OrbitalSet(g, np.eye(4))).matrix, 0, atol=1e-15)
        np.testing.assert_allclose(q_onebody(OrbitalSet(g, np.zeros((0, 4)))).matrix, np.eye(4))

    def test_lagrange_coefficients(self):
        c = _lagrange_coefficients(4)
        nodes = np.arange(5.0)
        vander = nodes[None, :] ** np.arange(5)[:, None]
        np.testing.assert_allclose(c @ vander, np.eye(5), atol=1e-12)

    @pytest.mark.parametrize("m,n", [(4, 2), (5, 3)])
    def test_tensor_oracle(self, rng, m, n):
        orb = random_orbitals(make_grid(m, float(m)), n, rng)
        psi = random_fock_vector(build_basis(m, n), rng)
        big = embedding(m, n) @ psi.coeffs
        ref = [np.real(np.vdot(big, pk @ big)) for pk in counting_projectors(orb.projector(), n)]
        dist = pnk_distribution(psi, orb)
        np.testing.assert_allclose(dist.probs, ref, atol=1e-12)
        np.testing.assert_allclose(dist.moment_probs, ref, atol=1e-10)

    def test_product_projections_are_orthogonal(self, rng):
        orb = random_orbitals(make_grid(7, 7.0), 3, rng)
        psi = random_fock_vector(build_basis(7, 3), rng)
        rows = CountingOperator(orb).projections(psi)
        gram = rows.conj() @ rows.T
        np.testing.assert_allclose(gram, np.diag(np.diag(gram)), atol=1e-12)
        np.testing.assert_allclose(rows.sum(axis=0), psi.coeffs, atol=1e-12)

    def test_indicators_annihilate_each_other(self, rng):
        orb = random_orbitals(make_grid(6, 6.0), 3, rng)
        psi = random_fock_vector(build_basis(6, 3), rng)
        e1 = np.eye(4)[1]
        e2 = np.eye(4)[2]
        out = fhat_apply(fhat_apply(psi, orb, e1), orb, e2)
        assert np.max(np.abs(out.coeffs)) < 1e-9

    def test_slater_distribution(self, rng):
        orb = random_orbitals(make_grid(6, 6.0), 3, rng)
        psi = slater(orb, build_basis(6, 3))
        np.testing.assert_allclose(pnk_distribution(psi, orb).probs, [1, 0, 0, 0], atol=1e-12)
        assert alpha_f(psi, orb, weight_m(3, 0.5)) == pytest.approx(0, abs=1e-12)
        e0 = np.eye(4)[0]
        np.testing.assert_allclose(fhat_apply(psi, orb, e0).coeffs, psi.coeffs, atol=1e-12)

    @pytest.mark.parametrize("eps,expected", [(1.0, [0, 1, 0]), (0.1, [0.99, 0.01, 0])])
    def test_excitation_distribution(self, eps, expected):
        g = make_grid(6, 6.0)
        full = ground_orbitals(g, None, 3)
        orb = OrbitalSet(g, full.vectors[:2])
        psi = mix_excitation(orb, full.vectors[2], 1, eps)
        np.testing.assert_allclose(pnk_distribution(psi, orb).probs, expected, atol=1e-12)
        assert alpha_f(psi, orb, weight_n(2)) == pytest.approx(eps**2 / 2, abs=1e-12)

    def test_consistency_error_on_tiny_tolerance(self, rng):
        orb = random_orbitals(make_grid(8, 8.0), 4, rng)
        psi = random_fock_vector(build_basis(8, 4), rng)
        with pytest.raises(InternalConsistencyError):
            pnk_distribution(psi, orb, tol=-1.0)

    def test_mismatch_and_normalization(self, rng):
        orb = random_orbitals(make_grid(6, 6.0), 2, rng)
        with pytest.raises(InvalidArgumentError):
            pnk_distribution(random_fock_vector(build_basis(6, 3), rng), orb)
        with pytest.raises(InvalidArgumentError):
            pnk_distribution(2 * random_fock_vector(build_basis(6, 2), rng), orb)

    def test_alpha_n_fast(self, rng):
        orb = random_orbitals(make_grid(8, 8.0), 3, rng)
        psi = random_fock_vector(build_basis(8, 3), rng)
        assert alpha_n_fast(rdm1(psi), orb) == pytest.approx(alpha_f(psi, orb, weight_n(3)), abs=1e-12)
        assert alpha_n_fast(Rdm(np.eye(8) / 8, 3), orb) == pytest.approx(5 / 8, abs=1e-14)

    def test_fhat_identity_and_expectation(self, rng):
        orb = random_orbitals(make_grid(6, 6.0), 3, rng)
        psi = random_fock_vector(build_basis(6, 3), rng)
        np.testing.assert_array_equal(fhat_apply(psi, orb, np.ones(4)).coeffs, psi.coeffs)
        f = weight_m(3, 0.5)
        assert np.real(psi.inner(fhat_apply(psi, orb, f))) == pytest.approx(alpha_f(psi, orb, f), abs=1e-12)
        with pytest.raises(InvalidArgumentError):
            fhat_apply(psi, orb, np.ones(3))


def _derivative_setup(rng, m=5, n=2, strength=1.0):
    g = make_grid(m, float(m))
    orb = random_orbitals(g, n, rng)
    psi = random_fock_vector(build_basis(m, n), rng)
    spec = InteractionSpec.gaussian(1.0, strength)
    return g, orb, psi, spec


class TestDerivativeTerms:
    def test_zero_kernel(self, rng):
        _, orb, psi, _ = _derivative_setup(rng)
        t = derivative_terms(psi, orb, InteractionSpec.zero(), weight_n(2), exchange=True)
        assert t.term_I == 0 and t.term_II == 0 and t.term_III == 0

    def test_slater_state(self, rng):
        g, orb, _, spec = _derivative_setup(rng, 6, 3)
        psi = slater(orb, build_basis(6, 3))
        t = derivative_terms(psi, orb, spec, weight_m(3, 0.5))
        assert abs(t.term_I) < 1e-13 and abs(t.term_II) < 1e-13 and abs(t.term_III) < 1e-13

    def test_non_monotone_rejected(self, rng):
        _, orb, psi, spec = _derivative_setup(rng, 5, 3)
        with pytest.raises(InvalidArgumentError):
            term_I(psi, orb, spec, WeightFunction([0, 1, 0.5, 1]))

    def test_two_body_cap(self, rng):
        g = make_grid(17, 17.0)
        orb = random_orbitals(g, 1, rng)
        psi = random_fock_vector(build_basis(17, 1), rng)
        with pytest.raises(ResourceLimitError):
            term_II(psi, orb, InteractionSpec.gaussian(1.0), weight_n(1))

    def test_hbar_scaling(self, rng):
        _, orb, psi, spec = _derivative_setup(rng)
        a = derivative_terms(psi, orb, spec, weight_n(2))
        b = derivative_terms(psi, orb, spec, weight_n(2), hbar_eff=0.5)
        assert b.total == pytest.approx(2 * a.total, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_tensor_oracle(self, rng, n):
        m = 4
        g, orb, psi, spec = _derivative_setup(rng, m, n)
        f = weight_m(n, 0.5)
        vmat = kernel_table(spec, g).matrix
        p = orb.projector()
        q = np.eye(m) - p
        u = embedding(m, n)
        projs = [u.T @ pk @ u for pk in counting_projectors(p, n)]

        def filt(d):
            gvals = np.sqrt(np.clip(derivative(f, d), 0, None))
            return sum(gvals[k] * projs[k] for k in range(n + 1)) @ psi.coeffs

        def lifted(k):
            return u.T @ lifted_two_body(k, m, n) @ u

        vp = np.diag(vmat.ravel())
        k1 = np.kron(q, p) @ vp @ np.kron(p, p)
        mf = q @ np.diag(vmat @ np.real(np.diag(p))) @ p
        mf_lift = u.T @ sum(kron_list([mf if a == i else np.eye(m) for a in range(n)]) for i in range(n)) @ u
        ref_I = 2 * np.imag(np.vdot(filt(1), (lifted(k1) - mf_lift) @ filt(-1)))
        k2 = np.kron(q, q) @ vp @ np.kron(p, p)
        ref_II = np.imag(np.vdot(filt(2), lifted(k2) @ filt(-2)))
        k3 = np.kron(q, q) @ vp @ np.kron(p, q)
        ref_III = 2 * np.imag(np.vdot(filt(1), lifted(k3) @ filt(-1)))
        t = derivative_terms(psi, orb, spec, f)
        assert t.term_I == pytest.approx(ref_I, abs=1e-12)
        assert t.term_II == pytest.approx(ref_II, abs=1e-12)
        assert t.term_III == pytest.approx(ref_III, abs=1e-12)

    def test_single_particle_terms(self, rng):
        _, orb, psi, spec = _derivative_setup(rng, 5, 1)
        assert term_II(psi, orb, spec, weight_n(1)) == 0.0
        assert term_III(psi, orb, spec, weight_n(1)) == 0.0

    def test_mean_field_operator_exchange(self, rng):
        g = make_grid(5, 5.0)
        orb = random_orbitals(g, 2, rng)
        vmat = kernel_table(InteractionSpec.gaussian(1.0), g).matrix
        direct = mean_field_operator(vmat, orb)
        hf = mean_field_operator(vmat, orb, exchange=True)
        np.testing.assert_allclose(direct - hf, vmat * orb.projector(), atol=1e-14)
        np.testing.assert_allclose(hf, hf.conj().T, atol=1e-14)

    def test_sandwich_layout(self, rng):
        a, b, c, d = (rng.standard_normal((3, 3)) for _ in range(4))
        k = rng.standard_normal((9, 9))
        out = sandwich(a, b, k, c, d)
        assert out.shape == (9, 9)
        x = rng.standard_normal(3)
        y = rng.standard_normal(3)
        np.testing.assert_allclose(out @ np.kron(x, y), np.kron(a, b) @ (k @ np.kron(c @ x, d @ y)))
        np.testing.assert_array_equal(pair_kernel_matrix(np.arange(4.0).reshape(2, 2)), np.diag([0, 1, 2, 3.0]))
