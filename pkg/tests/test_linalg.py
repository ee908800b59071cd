import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinopt.linalg import gaussian_init, load_csv, make_rng, matmul, sample_unit_sphere, save_csv


def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(np.eye(2), a), a)


def test_matmul_projector():
    assert np.array_equal(matmul([[1, 0], [0, 0]], [[5], [7]]), [[5], [0]])


def test_matmul_hand_computed():
    assert np.array_equal(matmul([[1, 2], [3, 4]], [[1], [1]]), [[3], [7]])


def test_matmul_rejects_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ValueError):
        matmul(np.ones(3), np.ones((3, 1)))


def test_unit_sphere_dim1_is_sign():
    v = sample_unit_sphere(make_rng(0, "t"), 1, size=100)
    assert set(np.unique(v)) <= {-1.0, 1.0}


@settings(max_examples=50, deadline=None)
@given(dim=st.integers(1, 4096), seed=st.integers(0, 2**32))
def test_unit_sphere_norm(dim, seed):
    v = sample_unit_sphere(make_rng(seed, "sphere"), dim)
    assert v.shape == (dim,)
    assert abs(np.linalg.norm(v) - 1.0) < 1e-12


def test_unit_sphere_moments():
    n = 100_000
    v = sample_unit_sphere(make_rng(3, "moments"), 3, size=n)
    # each coordinate has mean 0 and variance 1/3 on the 2-sphere
    sigma = np.sqrt(1.0 / 3.0 / n)
    assert np.all(np.abs(v.mean(axis=0)) < 5 * sigma)
    assert np.allclose(v.var(axis=0), 1.0 / 3.0, rtol=0.02)


def test_unit_sphere_rejects_zero_dim():
    with pytest.raises(ValueError):
        sample_unit_sphere(make_rng(0), 0)


def test_gaussian_init_zero_std():
    assert np.array_equal(gaussian_init(make_rng(0), 4, 3, 0.0), np.zeros((4, 3)))


def test_gaussian_init_variance():
    m = gaussian_init(make_rng(1, "init"), 50, 5, 0.005)
    assert m.shape == (50, 5)
    assert abs(m.var() / 2.5e-5 - 1.0) < 0.3


def test_gaussian_init_rejects_negative_std():
    with pytest.raises(ValueError):
        gaussian_init(make_rng(0), 2, 2, -1.0)


def test_rng_streams_are_deterministic_and_independent():
    a = make_rng(7, "x").random(5)
    assert np.array_equal(a, make_rng(7, "x").random(5))
    assert not np.array_equal(a, make_rng(7, "y").random(5))
    assert not np.array_equal(a, make_rng(8, "x").random(5))


def test_rng_accepts_full_u64_seed():
    make_rng(2**64 - 1, "top").random()
    with pytest.raises(ValueError):
        make_rng(-1)


def test_csv_round_trip_is_exact(tmp_path, rng):
    m = rng.standard_normal((7, 3)) * 10.0 ** rng.integers(-300, 300, size=(7, 3))
    p = tmp_path / "m.csv"
    save_csv(p, m)
    assert np.array_equal(load_csv(p), m)
    first = p.read_text().splitlines()[0]
    assert first.count(",") == 2
