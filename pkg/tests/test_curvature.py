import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpcsurf import gallery
from cpcsurf.config import Tolerances, from_env
from cpcsurf.curvature import (
    DegenerateVertexError,
    Immersion,
    ImmersionError,
    MissingNormalError,
    SingularFormError,
    analyze_vertex,
    curvatures,
    curvatures_from_weingarten,
    decompose_normal_differences,
    symmetric_normal,
    unit_normal,
    weingarten,
)
from cpcsurf.graph import SurfaceGraph, relabel

STAR = SurfaceGraph(((1, 2, 3), (0,), (0,), (0,)))


def unit(v):
    return v / np.linalg.norm(v)


def star(p0, p1, p2, p3, n1, n2, n3) -> Immersion:
    return Immersion(STAR, np.array([p0, p1, p2, p3], float), {1: n1, 2: n2, 3: n3})


def random_star(rng) -> Immersion:
    """A well-conditioned cell: neighbours near the xy-plane, normals near +z."""
    while True:
        pos = np.vstack([np.zeros(3), rng.normal(size=(3, 3)) * [1.0, 1.0, 0.2]])
        normals = {i: unit(np.array([0, 0, 1.0]) + 0.4 * rng.normal(size=3)) for i in (1, 2, 3)}
        imm = Immersion(STAR, pos, normals)
        v1, v2 = pos[1] - pos[3], pos[2] - pos[3]
        sin = np.linalg.norm(np.cross(v1, v2)) / (np.linalg.norm(v1) * np.linalg.norm(v2))
        if sin > 0.2 and min(np.linalg.norm(v1), np.linalg.norm(v2)) > 0.2:
            return imm


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    return q if np.linalg.det(q) > 0 else -q


# -- hand-computed cell ------------------------------------------------------

def test_tilted_normals_give_diagonal_weingarten():
    # v1 = e_x, v2 = e_y, n3 = e_z; n1, n2 tilted by angles t, s in the coordinate planes:
    # II = -diag(sin t, sin s), I = identity
    t, s = 0.3, -0.7
    imm = star(
        [0.2, 0.1, 0.0], [1, 0, 0], [0, 1, 0], [0, 0, 0],
        [math.sin(t), 0, math.cos(t)], [0, math.sin(s), math.cos(s)], [0, 0, 1],
    )
    vc = analyze_vertex(imm, 0)
    assert np.allclose(vc.W, np.diag([-math.sin(t), -math.sin(s)]), atol=1e-15)
    assert vc.H == pytest.approx(-math.sin(t) - math.sin(s), abs=1e-15)
    assert vc.K == pytest.approx(math.sin(t) * math.sin(s), abs=1e-15)
    assert (vc.k1, vc.k2) == pytest.approx((-math.sin(s), -math.sin(t)), abs=1e-15)
    assert vc.normal_sources == ("prescribed",) * 3
    assert np.allclose(vc.n, [0, 0, 1])


def test_mean_curvature_has_no_half():
    W = np.array([[2.0, 0.0], [0.0, 4.0]])
    c = curvatures_from_weingarten(W)
    assert (c.H, c.K, c.k1, c.k2) == (6.0, 8.0, 4.0, 2.0)


def test_complex_principal_curvatures_are_reported_as_none():
    c = curvatures_from_weingarten(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert not c.real and c.k1 is None and c.K == 1.0


def test_symmetric_normal_formula_agrees():
    rng = np.random.default_rng(1)
    for _ in range(200):
        imm = random_star(rng).with_positions(rng.normal(size=(4, 3)))
        try:
            n = unit_normal(imm, 0)
        except DegenerateVertexError:
            continue
        assert np.allclose(n, symmetric_normal(imm, 0), atol=1e-9)


def test_decomposition_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(200):
        imm = random_star(rng)
        alpha, beta = decompose_normal_differences(imm, 0)
        vc = analyze_vertex(imm, 0)
        frame = np.column_stack([vc.v1, vc.v2, vc.n])
        assert np.linalg.norm(frame @ alpha - vc.dn) < 1e-9
        assert np.linalg.norm(frame @ beta - vc.dpn) < 1e-9


# -- the W = -[[a1, b1], [a2, b2]] identity -----------------------------------

def test_weingarten_equals_negated_coefficients_on_1000_cells():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        imm = random_star(rng)
        vc = analyze_vertex(imm, 0)
        # independent oracle: least-squares coefficients
        A = np.column_stack([vc.v1, vc.v2, vc.n])
        a = np.linalg.lstsq(A, vc.dn, rcond=None)[0]
        b = np.linalg.lstsq(A, vc.dpn, rcond=None)[0]
        expected = -np.array([[a[0], b[0]], [a[1], b[1]]])
        assert np.linalg.norm(vc.W - expected) <= 1e-9 * max(1.0, np.linalg.norm(expected))


def triangular_cell(rng, zero: str) -> Immersion:
    """Random cell whose alpha2 (or beta1) vanishes, normals kept unit by solving for the normal part."""
    while True:
        base = random_star(rng)
        p = base.positions
        v1, v2 = p[1] - p[3], p[2] - p[3]
        n = unit(np.cross(v1, v2))
        n3 = base.prescribed_normals[3]
        coef = rng.normal(scale=0.5)
        if zero == "alpha2":
            w, other = n3 + coef * v1, 2
        else:
            w, other = n3 + coef * v2, 1
        b, c = w @ n, w @ w
        disc = b * b - c + 1.0
        if disc < 0.05:
            continue
        t = -b + math.sqrt(disc)
        new = w + t * n
        normals = dict(base.prescribed_normals)
        normals[1 if zero == "alpha2" else 2] = unit(new)
        normals[other] = base.prescribed_normals[other]
        return Immersion(STAR, p, normals)


@pytest.mark.parametrize("zero", ["alpha2", "beta1"])
def test_triangular_case_eigenvalues_are_negated_diagonal(zero):
    rng = np.random.default_rng(4)
    for _ in range(500):
        imm = triangular_cell(rng, zero)
        vc = analyze_vertex(imm, 0)
        off = vc.alpha[1] if zero == "alpha2" else vc.beta[0]
        assert abs(off) < 1e-12
        assert vc.real_principal
        assert sorted([vc.k1, vc.k2]) == pytest.approx(sorted([-vc.alpha[0], -vc.beta[1]]), abs=1e-9)


# -- invariances --------------------------------------------------------------

def test_single_vertex_relabel_keeps_all_curvatures():
    rng = np.random.default_rng(5)
    for _ in range(200):
        imm = random_star(rng)
        c = curvatures(imm, 0)
        for perm in itertools.permutations((1, 2, 3)):
            c2 = curvatures(imm.with_graph(relabel(STAR, 0, perm)), 0)
            assert (c2.H, c2.K) == pytest.approx((c.H, c.K), abs=1e-9)
            assert (c2.k1, c2.k2) == pytest.approx((c.k1, c.k2), abs=1e-9)


def test_global_orientation_reversal_flips_mean_curvature():
    rng = np.random.default_rng(6)
    for _ in range(200):
        imm = random_star(rng)
        c = curvatures(imm, 0)
        flipped = Immersion(
            relabel(STAR, 0, (2, 1, 3)), imm.positions, {k: -v for k, v in imm.prescribed_normals.items()}
        )
        c2 = curvatures(flipped, 0)
        assert unit_normal(flipped, 0) == pytest.approx(-unit_normal(imm, 0))
        assert c2.H == pytest.approx(-c.H, abs=1e-9)
        assert c2.K == pytest.approx(c.K, abs=1e-9)
        if c.real:
            assert (c2.k1, c2.k2) == pytest.approx((-c.k2, -c.k1), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.1, 10.0))
def test_rigid_motion_and_dilation(seed, lam):
    rng = np.random.default_rng(seed)
    imm = random_star(rng)
    c = curvatures(imm, 0)
    R, shift = random_rotation(rng), rng.normal(size=3)
    moved = Immersion(
        STAR, imm.positions @ R.T + shift, {k: R @ v for k, v in imm.prescribed_normals.items()}
    )
    c2 = curvatures(moved, 0)
    assert (c2.H, c2.K) == pytest.approx((c.H, c.K), abs=1e-9)
    scaled = imm.with_positions(lam * imm.positions)
    c3 = curvatures(scaled, 0)
    assert c3.H == pytest.approx(c.H / lam, rel=1e-9, abs=1e-12)
    assert c3.K == pytest.approx(c.K / lam**2, rel=1e-9, abs=1e-12)


# -- generated surfaces ------------------------------------------------------

def test_plane_is_flat():
    imm = gallery.hexagonal_plane(depth=3)
    for x in imm.interior_vertices():
        vc = analyze_vertex(imm, x)
        assert max(abs(vc.H), abs(vc.K), abs(vc.k1), abs(vc.k2)) < 1e-12


def test_chiral_weingarten_eigenvalues():
    imm = gallery.chiral_cylinder()
    for x in imm.interior_vertices():
        vc = analyze_vertex(imm, x)
        assert (vc.H, vc.K) == pytest.approx((-1.0, 0.0), abs=1e-9)
        assert (vc.k1, vc.k2) == pytest.approx((0.0, -1.0), abs=1e-9)


# -- errors and data checks --------------------------------------------------

def test_rank_deficient_vertex_raises():
    imm = star([0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 0, 0.0], [0, 0, 1], [0, 0, 1], [0, 0, 1])
    with pytest.raises(DegenerateVertexError):
        unit_normal(imm, 0)


def test_missing_leaf_normal_raises():
    imm = Immersion(STAR, np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0.1]], float))
    with pytest.raises(MissingNormalError):
        analyze_vertex(imm, 0)


def test_near_singular_first_form_raises():
    imm = star([0, 0, 0], [1, 0, 0], [1, 1e-7, 0], [0, 0, 0], [0, 0, 1], [0, 0, 1], [0, 0, 1])
    imm = Immersion(imm.graph, imm.positions, imm.prescribed_normals, tol=Tolerances(rank=1e-20))
    with pytest.raises(SingularFormError):
        weingarten(imm, 0)


def test_immersion_rejects_bad_data():
    pos = np.zeros((4, 3))
    with pytest.raises(ImmersionError, match="norm 1.1"):
        Immersion(STAR, pos, {1: [1.1, 0, 0]})
    with pytest.raises(ImmersionError, match="shape"):
        Immersion(STAR, np.zeros((3, 3)))
    with pytest.raises(ImmersionError, match="non-finite"):
        Immersion(STAR, np.full((4, 3), np.nan))


def test_positions_are_read_only():
    imm = gallery.hexagonal_plane(depth=1)
    with pytest.raises(ValueError):
        imm.positions[0, 0] = 5.0


def test_tolerance_environment_override():
    tol = from_env({"CPCSURF_TOL_TAU_DIR": "1e-5"})
    assert tol.tau_dir == 1e-5 and tol.tau_cpc == Tolerances().tau_cpc
