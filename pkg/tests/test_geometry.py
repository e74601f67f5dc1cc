import numpy as np
import pytest

from conftest import random_band_limited
from dhymflow.errors import DomainMismatch
from dhymflow.geometry import (ScalarField, build_domain, complex_hessian,
                               holomorphic_gradient_norm, integrate,
                               read_snapshot, write_snapshot)


class TestBuildDomain:
    def test_n1_sizes(self):
        d = build_domain(1, 16)
        assert d.total_points == 256 and d.h == 1 / 16

    def test_n2_sizes(self):
        d = build_domain(2, 16)
        assert d.total_points == 65536

    def test_rejects_non_hermitian_metric(self):
        g = np.array([[1.0, 0.5], [0.1, 1.0]])
        with pytest.raises(ValueError, match="Hermitian"):
            build_domain(2, 16, g)

    def test_rejects_indefinite_metric(self):
        with pytest.raises(ValueError, match="positive definite"):
            build_domain(2, 16, np.diag([1.0, -1.0]))

    def test_rejects_odd_and_small_N(self):
        with pytest.raises(ValueError):
            build_domain(1, 15)
        with pytest.raises(ValueError):
            build_domain(1, 6)

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            build_domain(4, 16)

    def test_unit_volume(self, domain2):
        one = ScalarField(domain2, np.ones(domain2.total_points))
        assert integrate(one) == pytest.approx(1.0, abs=1e-15)


class TestComplexHessian:
    def test_cosine_mode(self, domain1):
        x1 = domain1.coords[0]
        u = domain1.field_from_grid(np.cos(2 * np.pi * x1))
        H = complex_hessian(u)
        expect = -np.pi**2 * np.cos(2 * np.pi * x1).reshape(-1)
        assert np.abs(H.values[:, 0, 0].real - expect).max() < 1e-12

    def test_constant_gives_zero(self, domain2):
        u = ScalarField(domain2, np.full(domain2.total_points, 3.7))
        H = complex_hessian(u)
        assert np.abs(H.values).max() < 1e-12

    def test_hermitian_output(self, domain2):
        u = random_band_limited(domain2, seed=1)
        H = complex_hessian(u)
        assert H.check_hermitian(1e-12)

    @staticmethod
    def _fd_mixed_error(N):
        # 4th-order centered stencils along each real axis pair, against
        # the spectral mixed entry, on a fixed continuum function.
        d = build_domain(2, N)
        c = d.coords
        vals = (np.cos(2 * np.pi * (2 * c[0] - c[2]))
                + np.sin(2 * np.pi * (c[1] + c[3]))
                + np.cos(2 * np.pi * c[2]) * np.sin(2 * np.pi * c[1]))
        u = d.field_from_grid(vals)
        H = complex_hessian(u).values
        g = u.grid()
        h = d.h

        def d1(arr, axis):
            return (8 * (np.roll(arr, -1, axis) - np.roll(arr, 1, axis))
                    - (np.roll(arr, -2, axis) - np.roll(arr, 2, axis))) / (12 * h)

        # u_{1 2bar} = 1/4 (dx1 - i dy1)(dx2 + i dy2) u
        mixed = 0.25 * (d1(d1(g, 2), 0) + 1j * d1(d1(g, 3), 0)
                        - 1j * d1(d1(g, 2), 1) + d1(d1(g, 3), 1))
        return float(np.abs(H[:, 0, 1] - mixed.reshape(-1)).max())

    def test_against_finite_differences(self):
        # Spectral result sits within the stencil's own truncation, and
        # the gap shrinks at the stencil's 4th order.
        e16 = self._fd_mixed_error(16)
        e32 = self._fd_mixed_error(32)
        assert e32 < 0.05
        assert e16 / e32 > 10.0  # h^4 would give 16

    def test_linearity(self, domain2):
        u = random_band_limited(domain2, seed=3)
        v = random_band_limited(domain2, seed=4)
        both = ScalarField(domain2, 2.0 * u.values - 0.5 * v.values)
        H = complex_hessian(both).values
        Hu = complex_hessian(u).values
        Hv = complex_hessian(v).values
        assert np.abs(H - (2.0 * Hu - 0.5 * Hv)).max() < 1e-11

    def test_entries_integrate_to_zero(self, domain2):
        u = random_band_limited(domain2, seed=5)
        H = complex_hessian(u).values
        for i in range(2):
            for j in range(2):
                val = H[:, i, j].sum() * domain2.h**4
                assert abs(val) < 1e-12

    def test_double_derivative_matches_squared_multiplier(self, domain1):
        # Applying the diagonal Hessian twice equals the squared symbol.
        from dhymflow.backend import fftn, ifftn

        d = domain1
        u = random_band_limited(d, seed=6)
        m = d._hess_pair_multipliers[0]
        once = ifftn(m * fftn(u.grid()))
        twice_direct = ifftn(m * fftn(once)).real
        twice_squared = ifftn(m**2 * fftn(u.grid())).real
        assert np.abs(twice_direct - twice_squared).max() < 1e-11


class TestGradient:
    def test_constant(self, domain2):
        u = ScalarField(domain2, np.full(domain2.total_points, 2.0))
        assert np.abs(holomorphic_gradient_norm(u).values).max() < 1e-14

    def test_cosine(self, domain1):
        x1 = domain1.coords[0]
        u = domain1.field_from_grid(np.cos(2 * np.pi * x1))
        expect = (np.pi**2 * np.sin(2 * np.pi * x1) ** 2).reshape(-1)
        got = holomorphic_gradient_norm(u).values
        assert np.abs(got - expect).max() < 1e-12

    @staticmethod
    def _fd_grad_error(N):
        d = build_domain(1, N)
        c = d.coords
        vals = (np.cos(2 * np.pi * (2 * c[0] + c[1]))
                + np.sin(2 * np.pi * c[1]))
        u = d.field_from_grid(vals)
        g = u.grid()
        h = d.h

        def d1(arr, axis):
            return (8 * (np.roll(arr, -1, axis) - np.roll(arr, 1, axis))
                    - (np.roll(arr, -2, axis) - np.roll(arr, 2, axis))) / (12 * h)

        uz = 0.5 * (d1(g, 0) - 1j * d1(g, 1))
        expect = (np.abs(uz) ** 2).reshape(-1)
        got = holomorphic_gradient_norm(u).values
        return float(np.abs(got - expect).max())

    def test_against_finite_differences(self):
        e16 = self._fd_grad_error(16)
        e32 = self._fd_grad_error(32)
        assert e32 < 0.1  # |grad u|^2 itself is O(100) here
        assert e16 / e32 > 10.0

    def test_nonnegative(self, domain2):
        u = random_band_limited(domain2, seed=8)
        assert holomorphic_gradient_norm(u).values.min() >= 0.0


class TestIntegrate:
    def test_unit(self, domain1):
        assert integrate(ScalarField(domain1, np.ones(256))) == pytest.approx(1.0)

    def test_cosine_zero(self, domain1):
        x1 = domain1.coords[0]
        f = domain1.field_from_grid(np.cos(2 * np.pi * x1))
        assert abs(integrate(f)) < 1e-15

    def test_cosine_squared(self, domain1):
        x1 = domain1.coords[0]
        f = domain1.field_from_grid(np.cos(2 * np.pi * x1) ** 2)
        assert integrate(f) == pytest.approx(0.5, abs=1e-14)


class TestSnapshots:
    def test_roundtrip(self, tmp_path, domain2):
        u = random_band_limited(domain2, seed=9)
        path = tmp_path / "field.bin"
        write_snapshot(u, path)
        back = read_snapshot(path)
        assert back.domain.n == 2 and back.domain.N == 16
        assert np.array_equal(back.values, u.values)

    def test_header(self, tmp_path, domain1):
        path = tmp_path / "f.bin"
        write_snapshot(ScalarField(domain1, np.zeros(256)), path)
        raw = path.read_bytes()
        assert raw[:4] == b"DHYM"
        assert np.frombuffer(raw[4:16], dtype="<u4").tolist() == [1, 1, 16]
        assert len(raw) == 16 + 256 * 8

    def test_domain_mismatch(self, tmp_path, domain1, domain2):
        path = tmp_path / "f.bin"
        write_snapshot(ScalarField(domain1, np.zeros(256)), path)
        with pytest.raises(DomainMismatch):
            read_snapshot(path, domain=domain2)

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ValueError, match="not a DHYM snapshot"):
            read_snapshot(path)

    def test_canonical_order_is_row_major(self, tmp_path):
        # Serialization follows (x1, y1, ...) row-major grid order.
        d = build_domain(1, 8)
        vals = np.arange(64, dtype=float)
        path = tmp_path / "o.bin"
        write_snapshot(ScalarField(d, vals), path)
        payload = np.frombuffer(path.read_bytes()[16:], dtype="<f8")
        assert np.array_equal(payload.reshape(8, 8),
                              vals.reshape(8, 8))
