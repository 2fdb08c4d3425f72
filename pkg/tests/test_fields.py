import math

import numpy as np
import pytest

from acsplit.fields import (
    GridSpec,
    HelmholtzOperator,
    ScalarField,
    SingularSystemError,
    field_to_csv,
    h1_seminorm,
    helmholtz_solve,
    l2_inner,
    laplacian,
    load_field,
    lp_norm,
    make_circle,
    make_constant,
    make_field,
    save_field,
)

TWO_PI = 2.0 * math.pi


def sine_x(grid, k=1):
    return make_field(grid, lambda x, y: np.sin(TWO_PI * k * x / grid.length))


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(6)
    with pytest.raises(ValueError):
        GridSpec(33)
    with pytest.raises(ValueError):
        GridSpec(64, length=0.0)
    g = GridSpec(64, length=2.0)
    assert g.h == pytest.approx(2.0 / 64)


def test_make_field_constant():
    g = GridSpec(16)
    u = make_field(g, lambda x, y: np.ones_like(x))
    assert np.all(u.values == 1.0)


def test_make_field_sine_peak():
    # cell centers never hit the crest exactly; the max is cos(pi/n)
    g = GridSpec(64)
    u = sine_x(g)
    assert np.max(np.abs(u.values)) == pytest.approx(math.cos(math.pi / 64), abs=1e-14)


def test_make_field_rejects_nonfinite():
    g = GridSpec(16)
    with pytest.raises(ValueError):
        make_field(g, lambda x, y: np.where(x > 0.5, np.inf, 1.0))


def test_circle_indicator_is_signed():
    g = GridSpec(512)
    u = make_circle(g, 0.4)
    assert set(np.unique(u.values)) == {-1.0, 1.0}
    area = g.h**2 * np.count_nonzero(u.values > 0)
    assert math.sqrt(area / math.pi) == pytest.approx(0.4, abs=2 * g.h)


def test_laplacian_of_constant_is_zero():
    g = GridSpec(32)
    u = make_constant(g, 3.7)
    assert np.max(np.abs(laplacian(u).values)) < 1e-12


def test_laplacian_single_mode():
    g = GridSpec(64)
    u = sine_x(g)
    expected = -4.0 * math.pi**2 * u.values
    assert np.max(np.abs(laplacian(u).values - expected)) < 1e-10


def test_laplacian_two_modes_linearity():
    g = GridSpec(64)
    u = make_field(g, lambda x, y: np.sin(TWO_PI * x) + np.cos(2 * TWO_PI * y))
    expected = make_field(
        g,
        lambda x, y: -4 * math.pi**2 * np.sin(TWO_PI * x)
        - 16 * math.pi**2 * np.cos(2 * TWO_PI * y),
    )
    assert np.max(np.abs(laplacian(u).values - expected.values)) < 1e-9


def test_laplacian_output_has_zero_mean():
    rng = np.random.default_rng(3)
    g = GridSpec(32)
    u = ScalarField(g, rng.normal(size=(32, 32)))
    assert abs(np.mean(laplacian(u).values)) < 1e-13


def test_helmholtz_identity_and_constant():
    g = GridSpec(32)
    rng = np.random.default_rng(0)
    rhs = ScalarField(g, rng.normal(size=(32, 32)))
    ident = HelmholtzOperator(g, a=1.0, b=0.0)
    assert np.max(np.abs(helmholtz_solve(ident, rhs).values - rhs.values)) < 1e-12
    op = HelmholtzOperator(g, a=2.0, b=1.0)
    const = make_constant(g, 4.0)
    assert np.max(np.abs(helmholtz_solve(op, const).values - 2.0)) < 1e-12


def test_helmholtz_single_mode():
    g = GridSpec(64)
    rhs = sine_x(g)
    op = HelmholtzOperator(g, a=1.0, b=1.0)
    expected = rhs.values / (1.0 + 4.0 * math.pi**2)
    assert np.max(np.abs(helmholtz_solve(op, rhs).values - expected)) < 1e-12


def test_helmholtz_roundtrip_random_fields():
    rng = np.random.default_rng(42)
    g = GridSpec(64)
    for a, b in [(1.0, 1.0), (0.5, 2.0), (200.0, 1.0), (1.0, 0.0)]:
        op = HelmholtzOperator(g, a=a, b=b)
        rhs = ScalarField(g, rng.normal(size=(64, 64)))
        u = helmholtz_solve(op, rhs)
        resid = np.max(np.abs(op.apply(u).values - rhs.values))
        assert resid <= 1e-10 * np.max(np.abs(rhs.values))


def test_helmholtz_zero_mode_behavior():
    g = GridSpec(32)
    op = HelmholtzOperator(g, a=0.0, b=1.0)
    with pytest.raises(SingularSystemError):
        helmholtz_solve(op, make_constant(g, 1.0))
    rng = np.random.default_rng(1)
    vals = rng.normal(size=(32, 32))
    vals -= vals.mean()
    u = helmholtz_solve(op, ScalarField(g, vals))
    assert abs(np.mean(u.values)) < 1e-13


def test_helmholtz_mean_relation():
    # constant mode passes through as mean(u) = mean(rhs)/a
    rng = np.random.default_rng(7)
    g = GridSpec(32)
    op = HelmholtzOperator(g, a=3.0, b=2.0)
    rhs = ScalarField(g, rng.normal(size=(32, 32)) + 1.5)
    u = helmholtz_solve(op, rhs)
    assert np.mean(u.values) == pytest.approx(np.mean(rhs.values) / 3.0, rel=1e-12)


def test_helmholtz_invalid_coefficients():
    g = GridSpec(32)
    with pytest.raises(ValueError):
        HelmholtzOperator(g, a=0.0, b=0.0)
    with pytest.raises(ValueError):
        HelmholtzOperator(g, a=-1.0, b=1.0)


def test_laplacian_self_adjoint_and_nsd():
    rng = np.random.default_rng(11)
    g = GridSpec(32)
    u = ScalarField(g, rng.normal(size=(32, 32)))
    v = ScalarField(g, rng.normal(size=(32, 32)))
    lhs = l2_inner(laplacian(u), v)
    rhs = l2_inner(u, laplacian(v))
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)
    assert l2_inner(laplacian(u), u) <= 1e-12


def test_norms_parseval():
    g = GridSpec(64)
    one = make_constant(g, 1.0)
    assert lp_norm(one, 2) == pytest.approx(1.0, rel=1e-12)
    assert h1_seminorm(one) < 1e-12
    u = sine_x(g)
    assert lp_norm(u, 2) == pytest.approx(1.0 / math.sqrt(2), rel=1e-12)
    assert h1_seminorm(u) == pytest.approx(TWO_PI / math.sqrt(2), rel=1e-12)
    with pytest.raises(ValueError):
        lp_norm(u, 0.5)


def test_h1_seminorm_consistent_with_gradient_energy():
    # |grad u|_2^2 via the Laplacian: <-Lap u, u> must match the seminorm
    rng = np.random.default_rng(5)
    g = GridSpec(32)
    u = ScalarField(g, rng.normal(size=(32, 32)))
    quad = -l2_inner(laplacian(u), u)
    assert h1_seminorm(u) ** 2 == pytest.approx(quad, rel=1e-10)


def test_field_serialization_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    g = GridSpec(16, length=2.5)
    u = ScalarField(g, rng.normal(size=(16, 16)))
    path = tmp_path / "field.acsf"
    save_field(u, path)
    back = load_field(path, length=2.5)
    assert back.grid == g
    assert np.array_equal(back.values, u.values)
    raw = path.read_bytes()
    assert raw[:4] == b"ACSF"
    assert len(raw) == 16 + 16 * 16 * 8


def test_field_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.acsf"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(ValueError):
        load_field(path)


def test_field_csv_export(tmp_path):
    g = GridSpec(8)
    u = make_field(g, lambda x, y: x + 10 * y)
    path = tmp_path / "field.csv"
    field_to_csv(u, path)
    data = np.loadtxt(path, delimiter=",")
    assert np.allclose(data, u.values, atol=1e-15)
