import numpy as np
import pytest
from _helpers import smooth_field
from hypothesis import given, settings
from hypothesis import strategies as st

from pamlab.grid_spectral import (
    BoxSpec,
    GridField,
    SpectralField,
    apply_multiplier,
    basis_mode,
    besov_norm,
    extend,
    forward_transform,
    gradient,
    inverse_transform,
    laplacian,
    load_field,
    lp_decompose,
    lp_symbol,
    ortho_to_true,
    product,
    restrict,
    sigma_symbol,
    true_to_ortho,
)

boundaries = st.sampled_from(["neumann", "dirichlet"])
sizes = st.sampled_from([9, 17, 33, 65])
sides = st.floats(1.0, 16.0)


def random_field(box: BoxSpec, seed: int) -> GridField:
    vals = np.random.default_rng(seed).normal(size=(box.N, box.N))
    if box.boundary == "dirichlet":
        vals[0, :] = vals[-1, :] = vals[:, 0] = vals[:, -1] = 0.0
    return GridField(box, vals)


@settings(max_examples=40, deadline=None)
@given(sides, sizes, boundaries, st.integers(0, 2**32 - 1))
def test_transform_roundtrip(L, N, bc, seed):
    f = random_field(BoxSpec(L, N, bc), seed)
    g = inverse_transform(forward_transform(f))
    assert np.allclose(g.values, f.values, atol=1e-12 * np.abs(f.values).max())


@settings(max_examples=40, deadline=None)
@given(sides, sizes, boundaries, st.integers(0, 2**32 - 1))
def test_parseval(L, N, bc, seed):
    f = random_field(BoxSpec(L, N, bc), seed)
    c = forward_transform(f).coeffs
    assert np.sum(c**2) == pytest.approx(f.l2_norm() ** 2, rel=1e-12)


@pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
def test_basis_modes_are_unit_coefficients(bc):
    box = BoxSpec(3.0, 17, bc)
    for k1, k2 in [(1, 1), (2, 5), (7, 3)]:
        c = ortho_to_true(forward_transform(basis_mode(box, k1, k2)).coeffs, box)
        off = 0 if bc == "neumann" else 1
        expect = np.zeros_like(c)
        expect[k1 - off, k2 - off] = 1.0
        assert np.allclose(c, expect, atol=1e-12)


def test_nyquist_convention_roundtrip():
    box = BoxSpec(2.0, 9)
    c = np.random.default_rng(1).normal(size=(9, 9))
    assert np.allclose(ortho_to_true(true_to_ortho(c, box), box), c)
    nyq = basis_mode(box, 8, 0)
    assert nyq.l2_norm() == pytest.approx(np.sqrt(2.0))


@pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
def test_laplacian_of_basis_mode(bc):
    box = BoxSpec(2.5, 33, bc)
    k1, k2 = 3, 4
    f = basis_mode(box, k1, k2)
    lap = laplacian(f)
    assert np.allclose(lap.values, -(np.pi**2) * (k1**2 + k2**2) / box.L**2 * f.values, atol=1e-9)


def test_gradient_of_cosine_mode():
    box = BoxSpec(2.0, 33)
    x = box.coords + box.L / 2
    f = GridField(box, np.outer(np.cos(np.pi * 3 * x / box.L), np.ones(box.N)))
    gx, gy = gradient(f)
    exact = -np.pi * 3 / box.L * np.outer(np.sin(np.pi * 3 * x / box.L), np.ones(box.N))
    assert np.allclose(gx.values, exact, atol=1e-10)
    assert np.allclose(gy.values, 0.0, atol=1e-10)
    assert gx.parity == (-1, 1)


@settings(max_examples=30, deadline=None)
@given(sides, sizes, st.integers(0, 2**32 - 1))
def test_lp_blocks_sum_to_field(L, N, seed):
    f = random_field(BoxSpec(L, N), seed)
    assert np.allclose(lp_decompose(f).total().values, f.values, atol=1e-10 * np.abs(f.values).max())


def test_lp_symbols_partition_unity():
    x = np.linspace(0, 40, 801)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    J = 5
    total = sum(lp_symbol(i, J)(X1, X2) for i in range(-1, J + 1))
    assert np.allclose(total, 1.0, atol=1e-14)


def test_constant_besov_norm():
    box = BoxSpec(4.0, 33)
    f = GridField(box, np.full((33, 33), -2.5))
    for alpha in (-1.5, 0.0, 1.25):
        assert besov_norm(f, alpha) == pytest.approx(2.5 * 2.0 ** (-alpha), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3.0, 3.0).filter(lambda s: abs(s) > 1e-3), st.integers(0, 1000))
def test_besov_norm_homogeneous(scale, seed):
    f = smooth_field(BoxSpec(3.0, 33), seed)
    assert besov_norm(scale * f, -0.5) == pytest.approx(abs(scale) * besov_norm(f, -0.5), rel=1e-12)


def test_dealiased_product_exact_for_band_limited():
    box = BoxSpec(2.0, 65)
    u = smooth_field(box, 3)
    v = smooth_field(box, 4)
    w = product(u, v)
    assert np.allclose(w.values, u.values * v.values, atol=1e-11)


def test_dealiasing_removes_aliased_mode():
    box = BoxSpec(1.0, 17)
    k = 12
    u = basis_mode(box, k, 0)
    w = product(u, u)
    # cos^2 produces mode 2k, which lies beyond the grid and must be dropped rather than folded
    expect = np.full((17, 17), 1.0 / box.L)
    assert np.allclose(w.values, expect, atol=1e-12)


def test_field_io_roundtrip(tmp_path):
    f = random_field(BoxSpec(3.5, 17, "dirichlet"), 9)
    f.save(tmp_path / "f.bin")
    g = load_field(tmp_path / "f.bin")
    assert g.box == f.box and g.parity == f.parity
    assert np.array_equal(g.values, f.values)


def test_field_io_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"x" * 64)
    with pytest.raises(ValueError):
        load_field(p)


def test_box_validation():
    with pytest.raises(ValueError):
        BoxSpec(0.5, 17)
    with pytest.raises(ValueError):
        BoxSpec(2.0, 4)
    with pytest.raises(ValueError):
        GridField(BoxSpec(2.0, 9), np.zeros((8, 8)))


def test_spectral_multiplication_matches_definition():
    box = BoxSpec(2.0, 17)
    f = smooth_field(box, 11)
    s = forward_transform(f)
    g = inverse_transform(SpectralField(box, 2.0 * s.coeffs))
    assert np.allclose(g.values, 2.0 * f.values)


def test_zero_and_constant_modes():
    box = BoxSpec(2.0, 17)
    assert np.array_equal(forward_transform(GridField(box, np.zeros((17, 17)))).coeffs, np.zeros((17, 17)))
    c = np.zeros((17, 17))
    c[0, 0] = 1.0
    assert np.allclose(inverse_transform(SpectralField(box, c)).values, 1.0 / box.L)


def test_sigma_multiplier_on_single_mode():
    box = BoxSpec(3.0, 33)
    k = (2, 3)
    out = apply_multiplier(basis_mode(box, *k), sigma_symbol)
    expect = 1.0 / (1.0 + 0.5 * np.pi**2 * (k[0] ** 2 + k[1] ** 2) / box.L**2)
    assert np.allclose(out.values, expect * basis_mode(box, *k).values, atol=1e-12)
    assert np.allclose(apply_multiplier(out, lambda a, b: np.ones_like(a)).values, out.values, atol=1e-13)


def test_multiplier_composition():
    box = BoxSpec(3.0, 33)
    f = random_field(box, 4)
    m1, m2 = sigma_symbol, lambda a, b: np.pi**2 * (a**2 + b**2)
    two = apply_multiplier(apply_multiplier(f, m1), m2)
    one = apply_multiplier(f, lambda a, b: m1(a, b) * m2(a, b))
    assert np.allclose(two.values, one.values, atol=1e-12 * np.abs(one.values).max())
    neg_lap = apply_multiplier(basis_mode(box, 3, 1), m2)
    assert np.allclose(neg_lap.values, -laplacian(basis_mode(box, 3, 1)).values, atol=1e-9)


def test_lp_block_localizes_mode():
    box = BoxSpec(2.0, 129)
    for i in range(1, box.lp_depth):
        k = int(round(2**i * box.L))
        f = basis_mode(box, k, 0)
        dec = lp_decompose(f)
        energy = np.array([b.l2_norm() ** 2 for b in dec.blocks])
        near = energy[i : i + 3].sum()  # blocks i-1, i, i+1
        assert near >= 0.99 * energy.sum()


def test_constant_field_lives_in_low_block():
    box = BoxSpec(4.0, 33)
    dec = lp_decompose(GridField(box, np.full((33, 33), 3.0)))
    assert np.allclose(dec.block(-1).values, 3.0)
    assert all(np.allclose(dec.block(i).values, 0.0, atol=1e-12) for i in range(0, dec.depth + 1))


def test_single_mode_besov_comparable_to_sup():
    box = BoxSpec(2.0, 65)
    f = basis_mode(box, 9, 4)
    b = besov_norm(f, 0.0)
    sup = np.abs(f.values).max()
    assert sup / 4 <= b <= 4 * sup
    assert besov_norm(GridField(box, np.zeros((65, 65))), 0.5) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 2**31))
def test_besov_subadditive(s1, s2):
    box = BoxSpec(3.0, 33)
    f, g = random_field(box, s1), random_field(box, s2)
    assert besov_norm(f + g, -0.5) <= besov_norm(f, -0.5) + besov_norm(g, -0.5) + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([(1, 1), (1, -1), (-1, -1)]))
def test_extension_restriction_roundtrip(seed, parity):
    vals = np.random.default_rng(seed).normal(size=(17, 17))
    if parity[0] < 0:
        vals[0, :] = vals[-1, :] = 0.0
    if parity[1] < 0:
        vals[:, 0] = vals[:, -1] = 0.0
    ext = extend(vals, parity)
    assert ext.shape == (32, 32)
    assert np.array_equal(restrict(ext, 17), vals)


def test_constant_extension_is_constant():
    assert np.array_equal(extend(np.full((9, 9), 2.0), (1, 1)), np.full((16, 16), 2.0))
