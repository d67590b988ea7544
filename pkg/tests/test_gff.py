import hashlib
import math

import numpy as np
import pytest
import scipy.fft
from hypothesis import given, settings
from hypothesis import strategies as st

from gmcsim.domain import Domain, circle_nodes, conformal_radius, green_function, harmonic_part
from gmcsim.errors import GmcError
from gmcsim.gff import (
    FieldSample,
    GridField,
    Lattice,
    LatticeAverager,
    NodeSet,
    build_covariance,
    calibrate_grid,
    circle_average_on_grid,
    cov_circle_avg,
    covariance_from_matrix,
    covariance_matrix,
    load_snapshot,
    sample_exact,
    sample_grid,
    sample_lattice,
    sample_values,
    save_snapshot,
)
from gmcsim.gff.grid import calibrate_lattice, circle_weights, raw_circle_variance, target_variance
from gmcsim.gff.nodes import log_double_average

D = Domain.disk()


def oracle(domain, a, b, M=4096):
    pa, wa = circle_nodes(domain, a[0], a[1], M)
    pb, wb = circle_nodes(domain, b[0], b[1], M, phase=np.pi / M)
    g = -np.log(np.abs(pa[:, None] - pb[None])) + np.real(harmonic_part(domain, pa[:, None], pb[None]))
    return wa @ g @ wb


def ten_nodes():
    rng = np.random.default_rng(10)
    c = 0.7 * np.sqrt(rng.uniform(0, 1, 10)) * np.exp(2j * np.pi * rng.uniform(0, 1, 10))
    return NodeSet(c, 2.0 ** -rng.integers(2, 6, 10), D)


class TestCovariance:
    def test_centre_variance(self):
        assert cov_circle_avg(D, ((0, 0), 0.5), ((0, 0), 0.5)) == pytest.approx(math.log(2), abs=1e-3)

    def test_far_circles_equal_green(self):
        a, b = ((-0.4, 0.1), 0.1), ((0.3, -0.2), 0.15)
        assert cov_circle_avg(D, a, b) == pytest.approx(green_function(D, a[0], b[0]), abs=1e-6)

    def test_concentric(self):
        v = cov_circle_avg(D, ((0, 0), 0.1), ((0, 0), 0.3))
        assert v == pytest.approx(-math.log(0.3), abs=1e-3)
        assert v == pytest.approx(oracle(D, ((0, 0), 0.1), ((0, 0), 0.3)), abs=1e-3)

    def test_full_circle_variance_formula(self):
        for x, e in [(0.3 + 0.2j, 0.05), (-0.6j, 0.2)]:
            v = cov_circle_avg(D, (x, e), (x, e))
            assert v == pytest.approx(-math.log(e) + math.log(1 - abs(x) ** 2), abs=1e-12)

    @pytest.mark.parametrize("a,b", [
        (((0.9, 0.0), 0.2), ((0.8, 0.1), 0.1)),
        (((0.9, 0.0), 0.2), ((0.9, 0.0), 0.2)),
        (((0.1, 0.2), 0.1), ((0.15, 0.25), 0.05)),
    ])
    def test_oracle_disk(self, a, b):
        assert cov_circle_avg(D, a, b) == pytest.approx(oracle(D, a, b), abs=1e-3)

    def test_oracle_square(self, square):
        a, b = ((0.05, 0.5), 0.1), ((0.1, 0.5), 0.1)
        assert cov_circle_avg(square, a, b) == pytest.approx(oracle(square, a, b, 1024), abs=1e-3)
        c = ((0.5, 0.5), 0.125)
        assert cov_circle_avg(square, c, c) == pytest.approx(-math.log(0.125) + math.log(conformal_radius(square, c[0])), abs=1e-12)

    def test_nearly_coincident_clipped(self):
        # two boundary circles with centres 2.4e-3 apart: the cross term must
        # stay below both variances (Cauchy-Schwarz) and match the oracle
        a = (-0.617718420702435 - 0.6317476119630456j, 0.125)
        b = (-0.6198161944272325 - 0.6329798648234346j, 0.125)
        vaa, vbb, vab = cov_circle_avg(D, a, a), cov_circle_avg(D, b, b), cov_circle_avg(D, a, b)
        assert vab < min(vaa, vbb)
        assert vab == pytest.approx(oracle(D, a, b), abs=1e-3)

    def test_log_double_average(self):
        # concentric circles: log of the larger radius
        assert log_double_average(0.0, 0.1, 0.3) == pytest.approx(math.log(0.3), abs=1e-15)
        # crossing circles against brute force
        t = 2 * np.pi * (np.arange(2000) + 0.5) / 2000
        z, w = 0.2 * np.exp(1j * t), 0.15 + 0.1 * np.exp(1j * (t + 1e-3))
        brute = np.mean(np.log(np.abs(z[:, None] - w[None])))
        assert log_double_average(0.15, 0.2, 0.1) == pytest.approx(brute, abs=1e-4)

    def test_symmetric_matrix(self):
        C = covariance_matrix(ten_nodes())
        assert np.max(np.abs(C - C.T)) <= 1e-12

    def test_single_node(self):
        n = NodeSet([0.1 + 0.1j], [0.25], D)
        cov = build_covariance(n)
        assert cov.matrix.shape == (1, 1)
        assert cov.matrix[0, 0] == pytest.approx(cov_circle_avg(D, (0.1 + 0.1j, 0.25), (0.1 + 0.1j, 0.25)))

    def test_eigenvalues_nonnegative(self):
        ev = np.linalg.eigvalsh(covariance_matrix(ten_nodes()))
        assert ev.min() >= -1e-9

    def test_psd_large(self):
        rng = np.random.default_rng(4)
        c = 0.9 * np.sqrt(rng.uniform(0, 1, 1024)) * np.exp(2j * np.pi * rng.uniform(0, 1, 1024))
        nodes = NodeSet.ladder(D, c, 2.0 ** -np.arange(3, 7))
        cov = build_covariance(nodes)
        assert len(nodes) == 4096
        assert cov.jitter <= 1e-6 * cov.matrix.diagonal().max()

    def test_real_scalar_rejected(self):
        with pytest.raises(GmcError) as e:
            NodeSet(0.3, [0.1], D)
        assert e.value.code == "bad-point"

    def test_nodeset_validation(self):
        with pytest.raises(GmcError) as e:
            NodeSet([0.1 + 0j, 0.1 + 0j], [0.1, 0.1], D)
        assert e.value.code == "duplicate-node"
        with pytest.raises(GmcError):
            NodeSet([1.5 + 0j], [0.1], D)
        with pytest.raises(GmcError):
            NodeSet([0.1 + 0j], [0.0], D)

    def test_index_of(self):
        n = NodeSet.ladder(D, [0.1 + 0j, 0.2j], [0.5, 0.25])
        assert n.index_of([0.2j, 0.1 + 0j], 0.25).tolist() == [3, 2]
        with pytest.raises(GmcError) as e:
            n.index_of([0.3 + 0j], 0.25)
        assert e.value.code == "node-mismatch"

    def test_not_psd(self):
        with pytest.raises(GmcError) as e:
            covariance_from_matrix([[1.0, 2.0], [2.0, 1.0]])
        assert e.value.code == "covariance-not-psd"


class TestExactSampling:
    def test_identity(self):
        cov = covariance_from_matrix(np.eye(3))
        v = sample_values(cov, 100_000, seed=1)
        assert np.all((v.var(axis=0) > 0.98) & (v.var(axis=0) < 1.02))

    def test_empirical_covariance(self):
        nodes = ten_nodes()
        cov = build_covariance(nodes)
        n = 10_000
        v = sample_values(cov, n, seed=2)
        E = v.T @ v / n
        C = cov.matrix
        se = np.sqrt((np.outer(C.diagonal(), C.diagonal()) + C**2) / n)
        assert np.all(np.abs(E - C) <= 3 * se)

    def test_brownian_increments(self):
        x = 0.2 - 0.1j
        nodes = NodeSet.ladder(D, [x], 2.0 ** -np.arange(2, 7))
        v = sample_values(build_covariance(nodes), 10_000, seed=3)
        inc = np.diff(v, axis=1)
        var = inc.var(axis=0, ddof=1)
        se = var * math.sqrt(2 / (len(inc) - 1))
        assert np.all(np.abs(var - math.log(2)) <= 3 * se)

    def test_deterministic_and_jobs_invariant(self):
        cov = build_covariance(ten_nodes())
        a = sample_values(cov, 300, seed=99)
        b = sample_values(cov, 300, seed=99, jobs=4)
        assert np.array_equal(a, b)
        c = sample_values(cov, 100, seed=99, start=200)
        assert np.array_equal(a[200:], c)

    def test_sample_exact_objects(self):
        cov = build_covariance(ten_nodes())
        s = sample_exact(cov, 3, seed=5, start=7)
        assert [x.replicate_index for x in s] == [7, 8, 9]
        assert s[0].nodes is cov.nodes and s[0].seed == 5

    def test_bad_seed(self):
        cov = covariance_from_matrix(np.eye(2))
        with pytest.raises(GmcError):
            sample_values(cov, 3, seed=-1)


class TestGrid:
    def test_centred(self):
        vals = np.array([sample_grid(31, seed=8, replicate=r).values[10, 20] for r in range(100)])
        assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / 10

    def test_sine_round_trip(self):
        f = sample_grid(31, seed=1).values
        back = scipy.fft.idstn(scipy.fft.dstn(f, type=1, norm="ortho"), type=1, norm="ortho")
        assert np.max(np.abs(back - f)) <= 1e-10

    @pytest.mark.parametrize("lat", [Lattice.square(31), Lattice.disk(40)])
    def test_green_apply_inverts_laplacian(self, lat):
        v = np.random.default_rng(0).standard_normal(lat.shape) * lat.mask
        u = lat.green_apply(v)
        assert np.max(np.abs(lat.laplacian @ u[lat.mask] - v[lat.mask])) <= 1e-10

    def test_disk_raw_covariance(self):
        lat = Lattice.disk(20)
        from gmcsim.rng import replicate_rng
        S = np.array([lat.raw_sample(replicate_rng(5, i, 1))[lat.mask] for i in range(4000)])
        E = S.T @ S / len(S)
        C = np.linalg.inv(lat.laplacian.toarray())
        se = np.sqrt((np.outer(C.diagonal(), C.diagonal()) + C**2) / len(S))
        assert np.max(np.abs(E - C) / se) <= 5

    def test_calibrated_centre_variance(self):
        N, eps = 63, 0.125
        calibrate_grid(N, eps, method="exact")
        lat = Lattice.square(N)
        w = circle_weights(lat, 0.5 + 0.5j, eps)
        vals = np.array([np.sum(w * sample_grid(N, seed=21, replicate=i).values) for i in range(2000)])
        target = target_variance(lat.domain, 0.5 + 0.5j, eps)
        assert np.mean(vals**2) / target == pytest.approx(1, abs=0.05)

    def test_calibration_factor(self):
        c = calibrate_grid(63, 0.125, n_reps=2000, seed=1, store=False)
        assert math.isfinite(c) and c > 0
        c2 = calibrate_grid(63, 0.125, n_reps=2000, seed=2, store=False)
        assert abs(c / c2 - 1) <= 0.05
        exact = calibrate_grid(63, 0.125, method="exact", store=False)
        assert abs(c / exact - 1) <= 0.05

    def test_recheck_fresh_seed(self):
        # factor from 20000 replicates, rechecked on 20000 fresh ones
        N, eps = 63, 0.125
        c = calibrate_grid(N, eps, n_reps=20_000, seed=30, store=False)
        lat = Lattice.square(N)
        w = circle_weights(lat, lat.domain.center, eps)
        vals = np.array([np.sum(w * sample_lattice(lat, 31, i, c).values) for i in range(20_000)])
        ratio = np.mean(vals**2) / target_variance(lat.domain, lat.domain.center, eps)
        assert 0.95 <= ratio <= 1.05

    def test_exact_calibration_matches_quadratic_form(self):
        lat = Lattice.square(63)
        c = calibrate_lattice(lat, 0.125, method="exact")
        var = raw_circle_variance(lat, lat.domain.center, 0.125)
        assert c * c * var == pytest.approx(target_variance(lat.domain, lat.domain.center, 0.125), rel=1e-12)

    def test_calibration_range(self):
        with pytest.raises(GmcError) as e:
            calibrate_grid(63, 0.5)
        assert e.value.code == "parameter-out-of-range"
        with pytest.raises(GmcError):
            calibrate_grid(63, 0.01)
        with pytest.raises(GmcError):
            calibrate_grid(63, 0.125, method="guess")

    def test_stored_factor_used(self):
        c = calibrate_grid(40, 0.125, method="exact")
        assert sample_grid(40, seed=1).calibration == c
        assert sample_grid(40, seed=1, calibration=2.0).calibration == 2.0

    def test_constant_field(self):
        lat = Lattice.square(31)
        f = GridField(np.full(lat.shape, 1.7), 1.0, lat, fill=1.7)
        for x, e in [((0.5, 0.5), 0.2), ((0.02, 0.5), 0.1), ((0.01, 0.01), 0.05)]:
            assert circle_average_on_grid(f, x, e) == pytest.approx(1.7, abs=1e-13)

    def test_linear_field(self):
        lat = Lattice.square(31)
        g = lat.grid_points
        f = GridField(2.0 * g.real - 3.0 * g.imag, 1.0, lat)
        for x in (0.5 + 0.5j, 0.3 + 0.6j):
            assert circle_average_on_grid(f, x, 0.15) == pytest.approx(2 * x.real - 3 * x.imag, abs=1e-12)

    @pytest.mark.parametrize("dom,n", [(Domain.disk(), 48), (Domain.square(), 31)])
    def test_averager_matches_direct(self, dom, n):
        lat = Lattice.for_domain(dom, n)
        f = sample_lattice(lat, 4, 0, 1.0)
        radii = [0.25, 0.125, 4 * lat.h]
        avg = LatticeAverager(lat, radii)(f.values)
        pts = lat.points
        for i, e in enumerate(radii):
            direct = circle_average_on_grid(f, pts, e)
            assert np.max(np.abs(avg[i][lat.mask] - direct)) <= 1e-12

    def test_disk_lattice_variance(self):
        lat = Lattice.disk(128)
        c = calibrate_lattice(lat, 0.125, method="exact")
        w = circle_weights(lat, 0j, 0.125)
        vals = np.array([np.sum(w * sample_lattice(lat, 77, i, c).values) for i in range(2000)])
        assert np.mean(vals**2) / target_variance(lat.domain, 0j, 0.125) == pytest.approx(1, abs=0.05)

    def test_grid_errors(self):
        with pytest.raises(GmcError):
            Lattice.square(8)
        lat = Lattice.square(31)
        with pytest.raises(GmcError):
            GridField(np.zeros((3, 3)), 1.0, lat)
        f = sample_lattice(lat, 1)
        with pytest.raises(GmcError) as e:
            circle_average_on_grid(f, (3.0, 3.0), 0.1)
        assert e.value.code == "empty-circle"


class TestSnapshot:
    def test_field_sample_round_trip(self, tmp_path):
        cov = build_covariance(ten_nodes())
        s = sample_exact(cov, 1, seed=2**63 + 5, start=4)[0]
        p = tmp_path / "a.bin"
        save_snapshot(p, s, b"config")
        back, digest = load_snapshot(p)
        assert np.array_equal(back.values, s.values)
        assert back.seed == s.seed and back.replicate_index == 4
        assert np.array_equal(back.nodes.centers, s.nodes.centers)
        assert np.array_equal(back.nodes.radii, s.nodes.radii)
        assert digest == hashlib.sha256(b"config").digest()
        assert p.read_bytes()[:8] == b"GMCFLD1\0"

    @pytest.mark.parametrize("dom,n", [(Domain.square(), 20), (Domain.disk((0.5, 0.5), 2.0), 32)])
    def test_grid_round_trip(self, tmp_path, dom, n):
        f = sample_lattice(Lattice.for_domain(dom, n), 3, 2)
        p = tmp_path / "g.bin"
        save_snapshot(p, f)
        back, _ = load_snapshot(p)
        assert np.array_equal(back.values, f.values)
        assert back.calibration == f.calibration and back.lattice.key == f.lattice.key

    def test_bad_file(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b"nonsense")
        with pytest.raises(GmcError) as e:
            load_snapshot(p)
        assert e.value.code == "bad-snapshot"


@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.integers(2, 6), st.integers(2, 6))
@settings(max_examples=40, deadline=None)
def test_covariance_bounded_by_variances(x, y, n, m):
    a = (complex(x, y), 2.0**-n)
    b = (complex(y, -x), 2.0**-m)
    if abs(a[0] - b[0]) < 1e-9:
        return
    cab = cov_circle_avg(D, a, b)
    assert cab**2 <= cov_circle_avg(D, a, a) * cov_circle_avg(D, b, b) + 1e-9
    assert cab == pytest.approx(cov_circle_avg(D, b, a), abs=1e-12)
