import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from dynbc_wave.assembly import (
    DegenerateSystemError,
    ShapeError,
    assemble,
    assemble_full,
    h0_norm,
    h1_norm,
    weighted_lp_norm,
    write_triplets,
)
from dynbc_wave.mesh import InvalidParameterError, Mesh, generate_annulus, generate_interval, generate_rectangle

MESHES = [
    generate_interval(1.0, 30),
    generate_annulus(0.3, 1.0, 4, 16),
    generate_rectangle(1.0, 2.0, 6, 5, "top"),
]


def test_hand_assembled_interval():
    ops = assemble(generate_interval(1.0, 2))
    np.testing.assert_array_equal(ops.stiff_bulk.toarray(), [[4.0, -2.0], [-2.0, 2.0]])
    np.testing.assert_array_equal(ops.mass_boundary.toarray(), [[0.0, 0.0], [0.0, 1.0]])
    assert ops.stiff_boundary.nnz == 0
    # Lumped weights are row sums of the full mass: h at interior nodes, h/2 at the tip.
    np.testing.assert_allclose(ops.lumped_bulk, [0.5, 0.25])


@pytest.mark.parametrize("mesh", MESHES)
def test_exact_symmetry_and_definiteness(mesh):
    ops = assemble(mesh)
    for A in (ops.mass_bulk, ops.mass_boundary, ops.stiff_bulk, ops.stiff_boundary):
        assert abs(A - A.T).max() == 0.0 if A.nnz else True
    assert np.linalg.eigvalsh(ops.M.toarray()).min() > 0
    assert np.linalg.eigvalsh(ops.K.toarray()).min() > 0


@pytest.mark.parametrize("mesh", MESHES)
def test_row_sums_give_measures(mesh):
    full = assemble_full(mesh)
    assert full["mass_bulk"].sum() == pytest.approx(mesh.measure(), rel=1e-13)
    assert full["mass_boundary"].sum() == pytest.approx(mesh.gamma1_measure(), rel=1e-13)


def test_patch_test_closed_chain():
    mesh = generate_annulus(0.3, 1.0, 5, 20)
    full = assemble_full(mesh)
    one = np.ones(mesh.n_nodes)
    assert np.max(np.abs(full["stiff_bulk"] @ one)) < 1e-12
    assert np.max(np.abs(full["stiff_boundary"] @ one)) < 1e-12


def test_boundary_stiffness_is_arclength_laplacian():
    # Gamma1 on the top side of a rectangle: chain of 4 edges of length 0.25.
    mesh = generate_rectangle(1.0, 1.0, 4, 4, "top")
    full = assemble_full(mesh)
    (chain, _), = mesh.chains
    Kc = full["stiff_boundary"][chain][:, chain].toarray()
    ref = 4.0 * (np.diag([1, 2, 2, 2, 1]) - np.eye(5, k=1) - np.eye(5, k=-1))
    np.testing.assert_allclose(Kc, ref, rtol=1e-13)


def test_annulus_poincare_positivity():
    ops = assemble(generate_annulus(0.3, 1.0, 16, 64))
    lam = spla.eigsh(ops.K.tocsc(), k=1, sigma=0, which="LM", return_eigenvectors=False)
    assert lam[0] > 0


def test_h1_norm_of_linear_function():
    mesh = generate_interval(1.0, 10)
    ops = assemble(mesh)
    u = mesh.nodes[ops.free_nodes, 0]
    assert h1_norm(ops, u) ** 2 == pytest.approx(2.0, rel=1e-13)


def test_norms_zero_and_homogeneous(rng):
    ops = assemble(MESHES[1])
    u = rng.normal(size=ops.n)
    assert h1_norm(ops, np.zeros(ops.n)) == 0.0
    assert h0_norm(ops, np.zeros(ops.n)) == 0.0
    for c in (-3.0, 0.5, 7.0):
        assert h1_norm(ops, c * u) == pytest.approx(abs(c) * h1_norm(ops, u), rel=1e-13)
        assert h0_norm(ops, c * u) == pytest.approx(abs(c) * h0_norm(ops, u), rel=1e-13)


def test_shape_errors(rod_small):
    with pytest.raises(ShapeError):
        h1_norm(rod_small, np.zeros(3))
    with pytest.raises(ShapeError):
        h0_norm(rod_small, np.zeros(rod_small.n + 1))


def test_weighted_lp_norm_values():
    ops = assemble(generate_interval(1.0, 2))
    assert weighted_lp_norm(ops, np.array([0.0, 1.0]), 4) == pytest.approx(0.25**0.25)
    assert weighted_lp_norm(ops, np.zeros(2), 3) == 0.0
    u = np.array([0.3, -1.2])
    assert weighted_lp_norm(ops, u, 2) == pytest.approx(np.sqrt(np.sum(ops.lumped_bulk * u**2)))
    with pytest.raises(InvalidParameterError):
        weighted_lp_norm(ops, u, 0.5)
    with pytest.raises(InvalidParameterError):
        weighted_lp_norm(ops, u, 2, field=np.array([1.0, -1.0]))


@given(st.lists(st.floats(-10, 10), min_size=5, max_size=5), st.floats(1.0, 6.0))
@settings(max_examples=50, deadline=None)
def test_weighted_lp_monotone(vals, rho):
    ops = assemble(generate_interval(1.0, 5))
    u = np.array(vals)
    bigger = np.abs(u) + 0.1
    assert weighted_lp_norm(ops, u, rho) <= weighted_lp_norm(ops, bigger, rho) + 1e-12


def test_degenerate_mesh():
    # Two-element rod with every boundary node pinched and no interior node free
    # is impossible via the generators; build a single element directly.
    mesh = Mesh(1, np.array([[0.0], [1.0]]), np.array([[0, 1]]), np.array([[0], [1]]), np.array([0, 0]))
    with pytest.raises(DegenerateSystemError):
        assemble(mesh)


def test_empty_gamma1_switch():
    ops = assemble(generate_annulus(0.3, 1.0, 4, 16).without_gamma1())
    assert ops.mass_boundary.nnz == 0 and len(ops.boundary_dofs) == 0
    assert np.linalg.eigvalsh(ops.M.toarray()).min() > 0


def test_triplet_export(tmp_path):
    ops = assemble(generate_interval(1.0, 2))
    p = tmp_path / "k.csv"
    write_triplets(ops.stiff_bulk, p)
    assert p.read_text().splitlines() == ["row,col,value", "0,0,4.0", "0,1,-2.0", "1,0,-2.0", "1,1,2.0"]
