"""Unit tests for the conservative 1-D translation kernel."""

import numpy as np
import pytest

from hallkin.errors import InvalidInput
from hallkin.remap import RemapKernel, translate

KERNELS = [
    RemapKernel(order=2, limiter="positive"),
    RemapKernel(order=2, limiter="monotone"),
    RemapKernel(order=2, limiter="none"),
    RemapKernel(order=1, limiter="monotone"),
]


def _rand(rng, shape):
    return rng.random(shape)


def test_kernel_validation():
    with pytest.raises(InvalidInput):
        RemapKernel(order=3)
    with pytest.raises(InvalidInput):
        RemapKernel(limiter="fancy")


def test_zero_shift_is_bit_exact_identity(rng):
    vals = _rand(rng, (4, 16))
    for kernel in KERNELS:
        out, lost = translate(vals, np.zeros((4, 1)), axis=1, periodic=False, kernel=kernel)
        assert lost == 0.0
        assert np.array_equal(out, vals)


def test_integer_shift_is_exact_roll(rng):
    vals = _rand(rng, (3, 12))
    shift = np.full((3, 1), 2.0)
    for kernel in KERNELS:
        out, lost = translate(vals, shift, axis=1, periodic=True, kernel=kernel)
        assert np.array_equal(out, np.roll(vals, 2, axis=1))
        out, lost = translate(vals, shift, axis=1, periodic=False, kernel=kernel)
        assert np.array_equal(out[:, 2:], vals[:, :-2])
        assert np.all(out[:, :2] == 0.0)
        assert lost == pytest.approx(vals[:, -2:].sum(), rel=1e-14)


def test_mass_conservation_periodic(rng):
    vals = _rand(rng, (6, 32))
    shifts = rng.uniform(-3, 3, size=(6, 1))
    for kernel in KERNELS:
        out, lost = translate(vals, shifts, axis=1, periodic=True, kernel=kernel)
        assert lost == 0.0
        np.testing.assert_allclose(out.sum(axis=1), vals.sum(axis=1), rtol=1e-13)


def test_mass_plus_lost_conserved_open_boundary(rng):
    vals = _rand(rng, (5, 24))
    shifts = rng.uniform(-6, 6, size=(5, 1))
    for kernel in KERNELS:
        out, lost = translate(vals, shifts, axis=1, periodic=False, kernel=kernel)
        assert out.sum() + lost == pytest.approx(vals.sum(), rel=1e-13)


def test_positivity_preserved(rng):
    vals = np.exp(-np.linspace(-4, 4, 40) ** 2 / 2)[None, :] * _rand(rng, (8, 1))
    shifts = rng.uniform(-1.5, 1.5, size=(8, 1))
    for kernel in KERNELS[:2] + [KERNELS[3]]:  # positive and monotone modes
        out, _ = translate(vals, shifts, axis=1, periodic=False, kernel=kernel)
        assert out.min() >= 0.0


def test_monotone_mode_max_principle(rng):
    kernel = RemapKernel(order=2, limiter="monotone")
    vals = _rand(rng, (10, 30))
    shifts = rng.uniform(-2.2, 2.2, size=(10, 1))
    out, _ = translate(vals, shifts, axis=1, periodic=True, kernel=kernel)
    assert out.max() <= vals.max() * (1 + 1e-13)
    assert out.min() >= vals.min() * (1 - 1e-13) - 1e-15


def test_exact_on_linear_profiles():
    # Unlimited parabolic reconstruction reproduces linear data exactly, so
    # translating a linear profile is exact in the periodic interior.
    n = 32
    x = np.arange(n, dtype=float)
    vals = (3.0 + 0.25 * x)[None, :]
    kernel = RemapKernel(order=2, limiter="none")
    out, _ = translate(vals, np.array([[0.375]]), axis=1, periodic=False, kernel=kernel)
    expected = 3.0 + 0.25 * (x - 0.375)
    np.testing.assert_allclose(out[0, 4:-4], expected[4:-4], rtol=1e-12)


def test_translation_accuracy_gaussian():
    # Smooth profile, fractional shift: the remap converges at third order
    # or better, so a fine grid error must be far below the coarse one.
    def run(n):
        x = (np.arange(n) + 0.5) / n
        vals = np.exp(-((x - 0.5) / 0.08) ** 2)[None, :]
        shift = 0.3  # cells
        kernel = RemapKernel(order=2, limiter="positive")
        out, _ = translate(vals, np.array([[shift]]), axis=1, periodic=True, kernel=kernel)
        exact = np.exp(-((((x - shift / n) % 1.0) - 0.5) / 0.08) ** 2)
        return np.abs(out[0] - exact).max()

    e64, e128 = run(64), run(128)
    assert e128 < e64 / 5.0


def test_numpy_and_numba_paths_agree(rng):
    pytest.importorskip("numba")
    vals = _rand(rng, (7, 28))
    shifts = rng.uniform(-4, 4, size=(7, 1))
    for kernel in KERNELS:
        for periodic in (True, False):
            a, la = translate(vals, shifts, axis=1, periodic=periodic, kernel=kernel)
            b, lb = translate(vals, shifts, axis=1, periodic=periodic, kernel=kernel,
                              force_numpy=True)
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)
            assert la == pytest.approx(lb, abs=1e-13)


def test_axis_handling(rng):
    vals = _rand(rng, (5, 6, 7))
    kernel = RemapKernel()
    shift = rng.uniform(-1, 1, size=(5, 1, 7))
    out, _ = translate(vals, shift, axis=1, periodic=True, kernel=kernel)
    # Same data transposed: translating along the moved axis must agree.
    out_t, _ = translate(vals.transpose(2, 0, 1), shift.transpose(2, 0, 1),
                         axis=2, periodic=True, kernel=kernel)
    np.testing.assert_allclose(out_t, out.transpose(2, 0, 1), atol=1e-15)
