import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flagbundle.homogeneity import (CertificateRefused, MobiusElement, certify_symbol,
                                    mobius_of_flag, weakhom_certificate, weakhom_witness)
from flagbundle.kernel_space import DomainError
from flagbundle.op_model import assemble_flag, block_corner_index, spectral_norm

from conftest import chain_flag, hardy_pair

IDENTITY = MobiusElement(0, np.pi)
discs = st.complex_numbers(max_magnitude=0.8)
angles = st.floats(-np.pi, np.pi)


def rotation(t):
    # z -> e^{it} z in the (alpha - z) convention
    return MobiusElement(0, t + np.pi)


def matrix_poly(c, M):
    # Horner evaluation; exact for a nilpotent truncated backward shift
    out = np.zeros_like(M, dtype=complex)
    I = np.eye(M.shape[0])
    for x in c[::-1]:
        out = out @ M + x * I
    return out


def corner_diff(X, Y, sizes, d):
    idx = block_corner_index(sizes, d)
    return spectral_norm((X - Y)[np.ix_(idx, idx)])


class TestGroup:
    def test_identity_element(self):
        z = np.array([0, 0.3, -0.5j])
        assert np.allclose(IDENTITY(z), z, atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(discs, angles, discs, angles, discs)
    def test_composition_pointwise(self, a1, t1, a2, t2, z):
        f, g = MobiusElement(a1, t1), MobiusElement(a2, t2)
        assert abs(f.compose(g)(z) - f(g(z))) < 1e-10

    @settings(max_examples=50, deadline=None)
    @given(discs, angles, discs)
    def test_inverse(self, a, t, z):
        f = MobiusElement(a, t)
        assert abs(f.inverse()(f(z)) - z) < 1e-10
        assert abs(f(f.inverse()(z)) - z) < 1e-10

    @settings(max_examples=30, deadline=None)
    @given(discs, discs)
    def test_involution(self, a, z):
        f = MobiusElement(a, 0.0)
        assert f.is_involution and abs(f(f(z)) - z) < 1e-10

    @settings(max_examples=30, deadline=None)
    @given(discs, angles, discs)
    def test_conjugate(self, a, t, z):
        f = MobiusElement(a, t)
        assert abs(f.conjugate()(z) - np.conj(f(np.conj(z)))) < 1e-12

    def test_rotation_composition(self):
        assert abs(rotation(0.4).compose(rotation(0.5))(0.3) - np.exp(0.9j) * 0.3) < 1e-14

    def test_derivative_finite_difference(self):
        f, z, h = MobiusElement(0.3 + 0.2j, 0.7), 0.1 - 0.2j, 1e-6
        fd = (f(z + h) - f(z - h)) / (2 * h)
        assert abs(f.derivative(z) - fd) < 1e-8

    def test_rejects_boundary_alpha(self):
        with pytest.raises(DomainError):
            MobiusElement(1.0, 0.0)


class TestCertificate:
    def test_two_plus_z(self):
        cert = weakhom_certificate(hardy_pair([2, 1]))
        assert cert.positive
        assert cert.symbols[0].roots == (-2 + 0j,) and cert.symbols[0].closed_form_roots
        assert abs(cert.symbols[0].grid_min_modulus - 1) < 1e-12

    def test_z_interior_root(self):
        cert = weakhom_certificate(hardy_pair([0, 1]))
        assert not cert.positive and cert.offending_levels == [1]
        assert cert.symbols[0].verdict == "interior-root"

    def test_one_minus_z_boundary(self):
        cert = weakhom_certificate(hardy_pair([1, -1]))
        assert cert.symbols[0].verdict == "boundary-root"
        assert cert.symbols[0].grid_min_modulus < 1e-12

    def test_constant_coupling(self):
        assert certify_symbol(1, [0.5]).verdict == "non-vanishing"

    def test_zero_polynomial(self):
        with pytest.raises(ValueError):
            certify_symbol(1, [0, 0])

    def test_multi_level(self):
        T = chain_flag([1, 2, 1], [[3, 1], [0.5, 0, 1]], N=32)
        # 0.5 + z^2 has roots of modulus sqrt(0.5)
        cert = weakhom_certificate(T)
        assert cert.offending_levels == [2]
        assert abs(cert.symbols[1].min_root_modulus - np.sqrt(0.5)) < 1e-12

    @pytest.mark.parametrize("psi", [[2, 1], [0, 1], [1, -1], [1, 0, 0.3j]])
    @pytest.mark.parametrize("c", [1e-3, 0.5j, 7.0])
    def test_scaling_invariance(self, psi, c):
        a = certify_symbol(1, psi).verdict
        b = certify_symbol(1, c * np.asarray(psi, dtype=complex)).verdict
        assert a == b

    def test_cubic_roots_match_numpy(self):
        c = [1.5, -0.2, 0.7j, 1.0]
        got = sorted(certify_symbol(1, c).roots, key=lambda r: (r.real, r.imag))
        ref = sorted(np.roots(c[::-1]), key=lambda r: (r.real, r.imag))
        assert np.allclose(got, ref, atol=1e-10)


class TestMobiusOfFlag:
    def test_rotation(self):
        T = chain_flag([1, 2], [[2, 1]], N=48)
        img = mobius_of_flag(T, rotation(0.7))
        assert spectral_norm(img.rational - np.exp(0.7j) * T.assembled) < 1e-12
        assert img.agreement < 1e-12

    def test_superdiagonal_is_derivative(self):
        T = chain_flag([1, 2, 1], [[2, 1], [1]], N=48)
        phi = MobiusElement(0.3, 0.0)
        img = mobius_of_flag(T, phi)
        c = phi.series(48)
        dc = np.arange(1, 48) * c[1:]
        for i in (1, 2):
            ref = matrix_poly(dc, T.block(i, i)) @ T.block(i, i + 1)
            assert spectral_norm(img.block(i, i + 1) - ref) < 1e-10
        # second order term on the (1, 3) block
        d2 = np.arange(2, 48) * np.arange(1, 47) * c[2:] / 2
        ref = matrix_poly(d2, T.block(1, 1)) @ T.chain(1, 3)
        assert spectral_norm(img.block(1, 3) - ref) < 1e-10

    def test_single_block(self):
        T = chain_flag([2], [], N=48)
        phi = MobiusElement(0.2 - 0.1j, 1.1)
        img = mobius_of_flag(T, phi)
        ref = matrix_poly(phi.series(48), T.block(1, 1))
        assert spectral_norm(img.rational - ref) < 1e-10

    @settings(max_examples=15, deadline=None)
    @given(st.complex_numbers(max_magnitude=0.5), angles)
    def test_routes_agree(self, a, t):
        T = chain_flag([1, 2, 1], [[2, 1], [1, 0.5]], N=48)
        assert mobius_of_flag(T, MobiusElement(a, t)).agreement < 1e-9

    def test_involution_returns_operator(self):
        T = chain_flag([1, 2, 1], [[2, 1], [1]], N=96)
        phi = MobiusElement(0.3, 0.0)
        twice = mobius_of_flag(mobius_of_flag(T, phi), phi)
        rel = corner_diff(twice.rational, T.assembled, T.sizes, 96 // 4) / T.norm()
        assert rel < 1e-8
        assert corner_diff(twice.structured, T.assembled, T.sizes, 96 // 4) / T.norm() < 1e-8

    def test_rejects_higher_entries(self):
        T = chain_flag([1, 1, 1], [[1], [1]], N=16, condition_a={(1, 3): [1]})
        with pytest.raises(ValueError):
            mobius_of_flag(T, MobiusElement(0.1, 0))


class TestWitness:
    def test_rotation(self):
        T = hardy_pair([1], N=64)
        w = weakhom_witness(T, rotation(0.9))
        assert w.residual < 1e-10
        G = w.X.conj().T @ w.X
        assert spectral_norm(G - np.diag(np.diag(G))) < 1e-12

    def test_two_plus_z(self):
        T = hardy_pair([2, 1], N=128)
        w = weakhom_witness(T, MobiusElement(0.3, 0.0))
        assert w.residual < 1e-5
        assert w.factor_residuals["inverse"] < 1e-8

    def test_mixed_lambdas(self):
        T = chain_flag([1, 2], [[2, 1]], N=128)
        assert weakhom_witness(T, MobiusElement(0.2j, 0.5)).residual < 1e-5

    def test_three_blocks(self):
        T = chain_flag([1, 1, 1], [[2, 1], [3]], N=128)
        w = weakhom_witness(T, MobiusElement(0.25, 0.0))
        assert w.residual < 1e-5

    def test_refused_for_z(self):
        with pytest.raises(CertificateRefused):
            weakhom_witness(hardy_pair([0, 1]), MobiusElement(0.3, 0.0))

    def test_identity_element(self):
        T = hardy_pair([2, 1], N=64)
        w = weakhom_witness(T, IDENTITY)
        assert w.residual < 1e-12
        assert spectral_norm(w.X - np.eye(w.X.shape[0])) < 1e-12
