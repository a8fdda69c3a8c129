import math

import numpy as np
import pytest

from randtensor.sampler import (
    ENCODING_NAME,
    MAX_COORD,
    TRANSFORM_NAME,
    EncodingRangeError,
    GaussianField,
    encode_points,
    interpolate,
    phi_derivative_field,
    sample_streams,
)


def test_scalar_matches_vectorized():
    field = GaussianField(master_seed=42, stream=3)
    points = [(-5,), (0,), (7,)]
    many = field.sample_many(points)
    for pt, want in zip(points, many):
        assert field.sample(pt) == want


def test_same_inputs_same_values():
    a = GaussianField(master_seed=9, stream=1).sample((4,))
    b = GaussianField(master_seed=9, stream=1).sample((4,))
    assert a == b


def test_streams_and_seeds_decorrelate():
    base = GaussianField(master_seed=9, stream=1)
    assert base.sample((4,)) != base.with_stream(2).sample((4,))
    assert base.sample((4,)) != GaussianField(master_seed=10, stream=1).sample((4,))


def test_encode_points_distinct_and_stable():
    coords = np.array([[-3], [0], [3]], dtype=np.int64)
    codes = encode_points(coords)
    assert len(set(codes.tolist())) == 3
    assert np.array_equal(codes, encode_points(coords))
    # d = 2 points with the same first coordinate still separate
    pair = encode_points(np.array([[1, 2], [1, 3]], dtype=np.int64))
    assert pair[0] != pair[1]


def test_encoding_range_errors():
    field = GaussianField(master_seed=1)
    with pytest.raises(EncodingRangeError):
        field.sample((MAX_COORD + 1,))
    with pytest.raises(EncodingRangeError):
        GaussianField(master_seed=1, d=4)


def test_complex_moments():
    field = GaussianField(master_seed=77, stream=0)
    points = [(n,) for n in range(-8000, 8001)]
    values = field.sample_many(points)
    n = len(values)
    assert np.all(np.isfinite(values))
    # E g = 0, E |g|^2 = 1, E |g|^4 = 2 for the standard complex Gaussian
    assert abs(values.mean()) <= 4.0 / math.sqrt(n)
    sq = np.abs(values) ** 2
    assert sq.mean() == pytest.approx(1.0, abs=4.0 / math.sqrt(n))
    assert (sq ** 2).mean() == pytest.approx(2.0, abs=25.0 / math.sqrt(n))


def test_real_moments():
    field = GaussianField(master_seed=77, stream=0, kind="real")
    values = field.sample_many([(n,) for n in range(-8000, 8001)])
    assert np.isrealobj(values)
    n = len(values)
    assert abs(values.mean()) <= 4.0 / math.sqrt(n)
    assert (values ** 2).mean() == pytest.approx(1.0, abs=6.0 / math.sqrt(n))


def test_stream_independence_empirical():
    f1 = GaussianField(master_seed=5, stream=0)
    f2 = GaussianField(master_seed=5, stream=1)
    points = [(n,) for n in range(4000)]
    a, b = f1.sample_many(points), f2.sample_many(points)
    corr = np.vdot(a - a.mean(), b - b.mean()) / len(a)
    assert abs(corr) <= 0.1


def test_interpolation_endpoints():
    g = GaussianField(master_seed=3, stream=0)
    gt = GaussianField(master_seed=3, stream=1)
    points = [(n,) for n in range(-20, 21)]
    # phi = 0: sin is exactly 0, so the blend is exactly g~
    at_zero = interpolate(g, gt, 0.0).sample_many(points)
    assert np.array_equal(at_zero, gt.sample_many(points))
    at_half_pi = interpolate(g, gt, math.pi / 2).sample_many(points)
    assert np.allclose(at_half_pi, g.sample_many(points), rtol=0, atol=1e-14)


def test_interpolation_preserves_variance():
    g = GaussianField(master_seed=31, stream=0)
    gt = GaussianField(master_seed=31, stream=1)
    blend = interpolate(g, gt, 0.9)
    points = [(n,) for n in range(-6000, 6001)]
    sq = np.abs(blend.sample_many(points)) ** 2
    assert sq.mean() == pytest.approx(1.0, abs=4.0 / math.sqrt(len(points)))


def test_phi_derivative_field_values():
    g = GaussianField(master_seed=8, stream=0)
    gt = GaussianField(master_seed=8, stream=1)
    phi = 0.7
    points = [(n,) for n in range(-50, 51)]
    got = phi_derivative_field(g, gt, phi).sample_many(points)
    want = (math.cos(phi) * g.sample_many(points)
            - math.sin(phi) * gt.sample_many(points))
    assert np.allclose(got, want, rtol=0, atol=1e-15)


def test_interpolate_rejects_mismatched_fields():
    g = GaussianField(master_seed=8, stream=0)
    with pytest.raises(ValueError):
        interpolate(g, g, 0.3)  # identical stream is not an independent copy
    with pytest.raises(ValueError):
        interpolate(g, GaussianField(master_seed=8, stream=1, kind="real"), 0.3)


def test_sample_streams_layout():
    g, gt = sample_streams(123, 7)
    assert (g.stream, gt.stream) == (14, 15)
    assert g.master_seed == gt.master_seed == 123


def test_metadata_names():
    meta = GaussianField(master_seed=1).metadata()
    assert meta["transform"] == TRANSFORM_NAME == "polar-box-muller"
    assert meta["encoding"] == ENCODING_NAME == "packed-zigzag-16bit"


def test_multidimensional_points():
    field = GaussianField(master_seed=6, d=2)
    points = [(1, 2), (2, 1), (-1, -2)]
    values = field.sample_many(points)
    assert len(set(values.tolist())) == 3
    assert field.sample((1, 2)) == values[0]
