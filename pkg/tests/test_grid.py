"""Spectral operator tests: closed-form oracles and property loops."""
import numpy as np
import pytest

from dragflow.grid import (
    Grid,
    MeanNotZero,
    SpectralError,
    empirical_bogovskii_constant,
    random_band_limited,
)

TWO_PI = 2.0 * np.pi


def test_grid_validation():
    with pytest.raises(SpectralError):
        Grid(0, 64)
    with pytest.raises(SpectralError):
        Grid(4, 64)
    with pytest.raises(SpectralError):
        Grid(1, 6)
    with pytest.raises(SpectralError):
        Grid(1, 63)
    g = Grid(2, 16)
    assert g.shape == (16, 16)
    assert g.dx == pytest.approx(TWO_PI / 16)
    assert g.volume == pytest.approx(TWO_PI**2)


def test_ddx_single_mode():
    g = Grid(1, 64)
    x = g.coords()[0]
    df = g.ddx(np.sin(x), 0)
    assert np.max(np.abs(df - np.cos(x))) < 1e-13


def test_ddx_constant_is_zero():
    g = Grid(1, 32)
    df = g.ddx(np.full(g.shape, 3.7), 0)
    assert np.max(np.abs(df)) < 1e-14


def test_ddx_mixed_mode_2d():
    # hand-differentiated: d/dy [sin(3x) cos(2y)] = -2 sin(3x) sin(2y)
    g = Grid(2, 32)
    x, y = g.coords()
    f = np.sin(3 * x) * np.cos(2 * y)
    expected = -2.0 * np.sin(3 * x) * np.sin(2 * y)
    assert np.max(np.abs(g.ddx(f, 1) - expected)) < 1e-12


def test_ddx_axis_out_of_range():
    g = Grid(1, 16)
    with pytest.raises(SpectralError):
        g.ddx(g.zeros(), 1)


def test_laplacian_eigenfunction():
    g = Grid(1, 64)
    x = g.coords()[0]
    assert np.max(np.abs(g.laplacian(np.sin(x)) + np.sin(x))) < 1e-12


def test_divergence_of_constant_vector():
    g = Grid(2, 16)
    v = np.ones((2,) + g.shape)
    assert np.max(np.abs(g.divergence(v))) < 1e-14


def test_gradient_separable_modes():
    g = Grid(2, 32)
    x, y = g.coords()
    grad = g.gradient(np.cos(x) + np.cos(y))
    assert np.max(np.abs(grad[0] + np.sin(x))) < 1e-12
    assert np.max(np.abs(grad[1] + np.sin(y))) < 1e-12


@pytest.mark.parametrize("dim,n", [(1, 64), (2, 32), (3, 16)])
def test_div_grad_equals_laplacian(dim, n):
    g = Grid(dim, n)
    f = random_band_limited(g, np.random.default_rng(7))
    lhs = g.divergence(g.gradient(f))
    rhs = g.laplacian(f)
    assert np.max(np.abs(lhs - rhs)) < 1e-11


def test_dealias_fixes_band_limited():
    g = Grid(1, 64)
    f = random_band_limited(g, np.random.default_rng(3))  # modes <= n/3
    assert np.max(np.abs(g.dealias(f) - f)) < 1e-13


def test_dealias_kills_high_mode():
    for n in (8, 16, 64):
        g = Grid(1, n)
        x = g.coords()[0]
        f = np.cos((n // 2 - 1) * x)
        assert np.max(np.abs(g.dealias(f))) < 1e-13


def test_dealias_idempotent_and_contractive():
    g = Grid(2, 24)
    rng = np.random.default_rng(11)
    f = rng.standard_normal(g.shape)
    once = g.dealias(f)
    assert np.max(np.abs(g.dealias(once) - once)) < 1e-13
    assert g.norms(once).l2 <= g.norms(f).l2 * (1 + 1e-12)


def test_poisson_single_mode():
    g = Grid(1, 64)
    x = g.coords()[0]
    phi = g.poisson_mean_zero(np.cos(x))
    assert np.max(np.abs(phi + np.cos(x))) < 1e-13


def test_poisson_zero():
    g = Grid(1, 16)
    assert np.max(np.abs(g.poisson_mean_zero(g.zeros()))) == 0.0


def test_poisson_two_modes_2d():
    # per-mode division by -|k|^2: cos(2x) -> -cos(2x)/4, cos(y) -> -cos(y)
    g = Grid(2, 32)
    x, y = g.coords()
    phi = g.poisson_mean_zero(np.cos(2 * x) + np.cos(y))
    expected = -np.cos(2 * x) / 4.0 - np.cos(y)
    assert np.max(np.abs(phi - expected)) < 1e-12


def test_poisson_rejects_nonzero_mean():
    g = Grid(1, 32)
    x = g.coords()[0]
    with pytest.raises(MeanNotZero):
        g.poisson_mean_zero(1.0 + np.cos(x))


def test_bogovskii_single_mode():
    g = Grid(2, 32)
    x, _ = g.coords()
    b = g.bogovskii(np.cos(x))
    assert np.max(np.abs(b[0] - np.sin(x))) < 1e-12
    assert np.max(np.abs(b[1])) < 1e-12


def test_bogovskii_zero():
    g = Grid(1, 16)
    assert np.max(np.abs(g.bogovskii(g.zeros()))) == 0.0


def test_bogovskii_l2_ratio_on_single_mode():
    # f = div(g) with g = (sin x, 0): the lift returns g itself, ratio 1
    g = Grid(2, 32)
    x, _ = g.coords()
    vec = np.stack([np.sin(x), np.zeros(g.shape)])
    f = g.divergence(vec)
    b = g.bogovskii(f)
    ratio = g.norms(b).l2 / g.norms(vec).l2
    assert ratio <= 1.0 + 1e-8


def test_norms_closed_forms():
    g = Grid(1, 64)
    x = g.coords()[0]
    n_sin = g.norms(np.sin(x))
    assert n_sin.l2 == pytest.approx(np.sqrt(np.pi), rel=1e-12)
    assert n_sin.h1 == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
    assert n_sin.linf_grid == pytest.approx(1.0, rel=1e-12)
    n_const = g.norms(np.full(g.shape, -2.5))
    assert n_const.l2 == pytest.approx(2.5 * np.sqrt(TWO_PI), rel=1e-12)


def test_parseval():
    g = Grid(2, 24)
    rng = np.random.default_rng(5)
    f = rng.standard_normal(g.shape)
    phys = g.norms(f).l2
    fhat = np.fft.fftn(f) / f.size
    spec = np.sqrt(np.sum(np.abs(fhat) ** 2) * g.volume)
    assert abs(phys - spec) / phys < 1e-12


@pytest.mark.parametrize("dim,n", [(1, 64), (2, 32)])
def test_poincare_on_random_fields(dim, n):
    g = Grid(dim, n)
    rng = np.random.default_rng(17)
    for _ in range(100):
        f = random_band_limited(g, rng)
        norms = g.norms(f)
        grad_l2 = np.sqrt(norms.h1**2 - norms.l2**2)
        assert norms.l2 <= grad_l2 * (1 + 1e-12)


def test_bogovskii_divergence_roundtrip():
    g = Grid(1, 64)
    rng = np.random.default_rng(23)
    for _ in range(20):
        f = random_band_limited(g, rng)
        residual = g.norms(g.divergence(g.bogovskii(f)) - f).l2
        assert residual <= 1e-10 * g.norms(f).l2


def test_empirical_bogovskii_constant_is_sqrt2():
    # the sup over probe fields is attained at the lowest wavenumber
    g = Grid(1, 64)
    assert empirical_bogovskii_constant(g, n_fields=10) == pytest.approx(
        np.sqrt(2.0), rel=1e-12
    )
