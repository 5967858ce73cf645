import json

import numpy as np
import pytest

from ldsm.errors import RejectedInputError
from ldsm.linalg import max_norm
from ldsm.systems import (
    SymmetricDynamics,
    dense_star,
    from_json_dict,
    load_json,
    partition,
    random_2regular,
    random_stable,
    save_json,
    to_json_dict,
)


class TestRandom2Regular:
    def test_triangle_is_forced_at_n3(self):
        d = random_2regular(3, seed=5)
        expected = (np.ones((3, 3)) - np.eye(3)) / 3.0
        assert np.array_equal(d.a, expected)

    def test_row_sums_and_degree(self):
        d = random_2regular(41, seed=9)
        assert np.allclose(d.a.sum(axis=1), 2.0 / 3.0)
        assert np.all((d.a != 0).sum(axis=1) == 2)
        assert np.all(np.diagonal(d.a) == 0.0)
        assert max_norm(d.a - d.a.T) == 0.0

    def test_spectral_radius_exact(self):
        d = random_2regular(100, seed=7)
        assert d.rho == pytest.approx(2.0 / 3.0, abs=1e-9)

    def test_deterministic(self):
        a = random_2regular(20, seed=3).a
        b = random_2regular(20, seed=3).a
        assert np.array_equal(a, b)

    def test_rejects_small_n(self):
        with pytest.raises(RejectedInputError):
            random_2regular(2, seed=0)


class TestDenseStar:
    def test_n2_values(self):
        d = dense_star(2)
        expected = np.array([[1.0 / np.sqrt(5.0), 0.5], [0.5, 0.0]])
        assert np.allclose(d.a, expected, atol=1e-15)

    def test_nonzero_count(self):
        n = 17
        d = dense_star(n)
        assert np.count_nonzero(d.a) == 2 * n - 1

    def test_large_spectral_radius_band(self):
        d = dense_star(500)
        hub = 1.0 / np.sqrt(5.0)
        closed = 0.5 * (hub + np.sqrt(hub**2 + 2.0 * 499.0 / 500.0))
        assert 0.9 < d.rho < 1.0
        assert d.rho == pytest.approx(closed, abs=1e-9)

    def test_rejects_small_n(self):
        with pytest.raises(RejectedInputError):
            dense_star(1)


class TestRandomStable:
    def test_hits_target_radius(self):
        d = random_stable(8, 0.5, seed=1)
        assert d.rho == pytest.approx(0.5, abs=1e-9)

    def test_deterministic(self):
        assert np.array_equal(random_stable(6, 0.7, seed=2).a, random_stable(6, 0.7, seed=2).a)

    def test_symmetric_to_machine_precision(self):
        d = random_stable(8, 0.6, seed=1)
        assert max_norm(d.a - d.a.T) <= 1e-15

    def test_rejects_bad_target(self):
        for bad in (0.0, 1.0, 1.5, -0.3):
            with pytest.raises(RejectedInputError):
                random_stable(4, bad, seed=0)


class TestConstructionInvariants:
    def test_rejects_unstable(self):
        with pytest.raises(RejectedInputError):
            SymmetricDynamics(a=np.eye(3) * 1.01)

    def test_rejects_asymmetric(self):
        a = np.array([[0.0, 0.5], [0.0, 0.0]])
        with pytest.raises(RejectedInputError):
            SymmetricDynamics(a=a)

    def test_rejects_negative_sigma(self):
        with pytest.raises(RejectedInputError):
            SymmetricDynamics(a=np.zeros((2, 2)), sigma=-1.0)

    def test_sigma_zero_allowed_for_diagnostics(self):
        d = SymmetricDynamics(a=np.zeros((2, 2)), sigma=0.0)
        assert d.sigma == 0.0

    def test_rejects_bad_n_obs(self):
        for bad in (0, 5):
            with pytest.raises(RejectedInputError):
                SymmetricDynamics(a=np.zeros((4, 4)), n_obs=bad)

    def test_matrix_frozen(self):
        d = random_stable(4, 0.5, seed=0)
        with pytest.raises(ValueError):
            d.a[0, 0] = 1.0


class TestPartition:
    def test_fully_observed(self):
        d = random_stable(5, 0.5, seed=4)
        b, c, e = partition(d)
        assert np.array_equal(b, d.a)
        assert c.shape == (5, 0)
        assert e.shape == (0, 0)

    def test_reassembly_identity(self):
        d = random_stable(7, 0.5, seed=4, n_obs=3)
        b, c, e = partition(d)
        top = np.hstack([b, c])
        bottom = np.hstack([c.T, e])
        assert np.array_equal(np.vstack([top, bottom]), d.a)

    def test_star_observed_block_keeps_arrow_shape(self):
        n = 16
        d = dense_star(n, n_obs=n // 2)
        b, _, _ = partition(d)
        mask = np.zeros_like(b, dtype=bool)
        mask[0, :] = True
        mask[:, 0] = True
        assert np.all(b[~mask] == 0.0)
        assert np.all(b[0, 1:] == 1.0 / np.sqrt(2.0 * n))
        assert b[0, 0] == 1.0 / np.sqrt(5.0)


class TestJson:
    def test_round_trip(self, tmp_path):
        d = random_stable(5, 0.4, seed=8, sigma=2.0, n_obs=2)
        path = tmp_path / "system.json"
        save_json(d, path)
        with open(path) as fh:
            doc = json.load(fh)
        assert set(doc) == {"n", "sigma", "n_obs", "entries"}
        d2 = load_json(path)
        assert np.array_equal(d2.a, d.a)
        assert d2.sigma == d.sigma and d2.n_obs == d.n_obs

    def test_rejects_wrong_length(self):
        doc = to_json_dict(random_stable(3, 0.5, seed=1))
        doc["entries"] = doc["entries"][:-1]
        with pytest.raises(RejectedInputError):
            from_json_dict(doc)
