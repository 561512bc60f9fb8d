import numpy as np
import pytest
import scipy.io
import scipy.sparse as sps
import sympy as sp

from ppifem.analysis import interpolate
from ppifem.assembly import (
    SparseSystem,
    _interface_element,
    apply_dirichlet,
    assemble_full,
    assemble_rhs,
    assemble_system,
    assemble_edge_terms,
    assemble_volume,
    bicgstab,
    conjugate_gradient,
    dump_system,
    flux_coefficients,
    interface_load,
    nodal_values,
    q1_stiffness,
    solve,
)
from ppifem.config import settings
from ppifem.exceptions import SolverBreakdown
from ppifem.ife_basis import IFESpace
from ppifem.mesh import build_mesh
from ppifem.problems import example1
from ppifem.problems.base import ProblemSpec, manufactured_problem, x_sym, y_sym
from ppifem.schemas import Scheme, SchemeParams
from tests.geometries import constant_problem, empty_geometry, linear_jump_problem

PPIFEM = SchemeParams(epsilon=-1, sigma0=100.0)
NONSYMMETRIC = SchemeParams(epsilon=1, sigma0=100.0)
GALERKIN = SchemeParams(scheme=Scheme.galerkin)


def _space(spec, n):
    return IFESpace(build_mesh(spec.domain, n, spec.geom), spec.beta)


def test_q1_stiffness_unit_square():
    expected = np.array(
        [[4, -1, -2, -1], [-1, 4, -1, -2], [-2, -1, 4, -1], [-1, -2, -1, 4]]
    ) / 6.0
    assert q1_stiffness(1.0, 1.0) == pytest.approx(expected, abs=1e-14)


def test_q1_stiffness_rectangle():
    hx, hy = 0.5, 0.25
    k = q1_stiffness(hx, hy)
    a, b = hy / hx, hx / hy
    assert k[0, 0] == pytest.approx((a + b) / 3.0)
    assert k[0, 2] == pytest.approx(-(a + b) / 6.0)
    assert k.sum(axis=1) == pytest.approx(np.zeros(4), abs=1e-14)


def test_interface_element_matrices_are_positive_semidefinite(example1_problem, example1_mesh16):
    space = IFESpace(example1_mesh16, example1_problem.beta)
    for e in example1_mesh16.interface_elements:
        stiffness, _, _ = _interface_element(space, None, int(e), 4)
        assert np.abs(stiffness - stiffness.T).max() < 1e-10 * np.abs(stiffness).max()
        assert np.abs(stiffness @ np.ones(4)).max() < 1e-10 * np.abs(stiffness).max()
        assert np.linalg.eigvalsh(0.5 * (stiffness + stiffness.T)).min() > -1e-10 * np.abs(stiffness).max()


def test_symmetric_scheme_gives_symmetric_matrix(example1_problem, example1_mesh16):
    space = IFESpace(example1_mesh16, example1_problem.beta)
    matrix = assemble_full(space, example1_problem, PPIFEM).matrix
    scale = abs(matrix).max()
    assert abs(matrix - matrix.T).max() <= 1e-12 * scale


def test_edge_terms_annihilate_constants(example1_problem, example1_mesh16):
    space = IFESpace(example1_mesh16, example1_problem.beta)
    matrix, load = assemble_edge_terms(space, PPIFEM)
    scale = abs(matrix).max()
    ones = np.ones(matrix.shape[0])
    assert matrix.nnz > 0
    assert np.abs(matrix @ ones).max() < 1e-8 * scale
    assert np.abs(matrix.T @ ones).max() < 1e-8 * scale
    assert abs(matrix - matrix.T).max() <= 1e-12 * scale
    assert np.abs(load).max() == 0.0


def test_no_interface_means_no_edge_terms():
    spec = manufactured_problem(empty_geometry(), (2.0, 2.0, 2.0), [x_sym * y_sym] * 3)
    space = _space(spec, 8)
    ppifem = assemble_full(space, spec, PPIFEM)
    galerkin = assemble_full(space, spec, GALERKIN)
    assert abs(ppifem.matrix - galerkin.matrix).max() == 0.0
    assert ppifem.rhs == pytest.approx(galerkin.rhs)


@pytest.mark.parametrize("params", [GALERKIN, SchemeParams(epsilon=0), NONSYMMETRIC])
def test_constants_are_reproduced_by_direct_solves(params):
    spec = constant_problem(example1.geometry(), (1.0, 100.0, 10.0), 2.5)
    space = _space(spec, 8)
    system = assemble_system(space, spec, params)
    values = nodal_values(system, solve(system, params))
    assert np.abs(values - 2.5).max() < 1e-9


def test_constants_are_reproduced_by_cg():
    spec = constant_problem(example1.geometry(), (1.0, 100.0, 10.0), 2.5)
    space = _space(spec, 8)
    system = assemble_system(space, spec, PPIFEM)
    values = nodal_values(system, solve(system, PPIFEM))
    assert np.abs(values - 2.5).max() < 1e-6


def test_zero_problem_has_zero_solution():
    spec = constant_problem(example1.geometry(), (10.0, 1.0, 100.0), 0.0)
    space = _space(spec, 8)
    assert np.abs(assemble_rhs(space, spec, PPIFEM)).max() == 0.0
    system = assemble_system(space, spec, PPIFEM)
    assert np.abs(system.rhs).max() == 0.0
    assert np.abs(solve(system, PPIFEM)).max() == 0.0


def test_zero_boundary_data_leaves_the_load_unchanged():
    spec = manufactured_problem(empty_geometry(), (1.0, 1.0, 1.0), [sp.sin(sp.pi * x_sym) * sp.sin(sp.pi * y_sym)] * 3)
    space = _space(spec, 8)
    full = assemble_full(space, spec, GALERKIN)
    system = apply_dirichlet(full, space, spec)
    assert system.rhs == pytest.approx(full.rhs[space.mesh.interior_nodes], abs=1e-14)


def test_flux_coefficient_of_unit_jump_is_segment_length(example1_problem, example1_mesh16):
    ones = lambda x, y: np.ones_like(np.asarray(x, dtype=float))
    spec = ProblemSpec(
        geom=example1_problem.geom,
        beta=example1_problem.beta,
        source=example1_problem.source,
        flux_jumps=(ones, ones, ones),
        boundary=example1_problem.boundary,
    )
    space = IFESpace(example1_mesh16, spec.beta)
    q = flux_coefficients(space, spec)
    for e, values in q.items():
        lengths = [seg.length for seg in example1_mesh16.cuts[e].segments]
        assert values == pytest.approx(lengths, abs=1e-14)


def test_poisson_converges_at_second_order():
    spec = manufactured_problem(empty_geometry(), (1.0, 1.0, 1.0), [sp.sin(sp.pi * x_sym) * sp.sin(sp.pi * y_sym)] * 3)
    errors = []
    for n in (8, 16):
        space = _space(spec, n)
        system = assemble_system(space, spec, GALERKIN)
        values = nodal_values(system, solve(system, GALERKIN))
        nodes = space.mesh.nodes
        errors.append(np.abs(values - spec.exact_at(nodes[:, 0], nodes[:, 1])).max())
    assert np.log2(errors[0] / errors[1]) == pytest.approx(2.0, abs=0.15)


def test_piecewise_linear_solution_is_consistent():
    spec = linear_jump_problem()
    space = _space(spec, 16)
    mesh = space.mesh
    full = assemble_full(space, spec, PPIFEM)
    nodal = interpolate(space, spec).nodal
    residual = full.matrix @ nodal - full.rhs
    flipped = residual - 2.0 * interface_load(space, spec)
    i = np.arange(mesh.node_count) % (mesh.n + 1)
    j = np.arange(mesh.node_count) // (mesh.n + 1)
    deep = (i >= 2) & (i <= mesh.n - 2) & (j >= 2) & (j <= mesh.n - 2)
    assert np.abs(residual[deep]).max() < 1e-7
    assert np.abs(flipped[deep]).max() > 1e-3


def test_cg_solves_spd_system():
    matrix = sps.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(50, 50), format="csr")
    rhs = np.ones(50)
    x, iterations = conjugate_gradient(matrix, rhs)
    assert np.linalg.norm(matrix @ x - rhs) <= 1e-12 * np.linalg.norm(rhs)
    assert iterations <= 50


def test_bicgstab_solves_nonsymmetric_system(monkeypatch):
    matrix = sps.diags([-1.5, 2.0, -0.5], [-1, 0, 1], shape=(60, 60), format="csr")
    rhs = np.linspace(0.0, 1.0, 60)
    x, _ = bicgstab(matrix, rhs)
    assert np.linalg.norm(matrix @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)
    monkeypatch.setattr(settings, "dense_solver_limit", 0)
    system = SparseSystem(matrix, rhs, np.zeros(0), np.arange(60), np.zeros(0, dtype=int))
    assert solve(system, NONSYMMETRIC) == pytest.approx(x, abs=1e-9)


def test_identity_system():
    system = SparseSystem(sps.identity(5, format="csr"), np.arange(5.0), np.zeros(0), np.arange(5), np.zeros(0, dtype=int))
    assert solve(system, PPIFEM) == pytest.approx(np.arange(5.0))
    assert solve(system, NONSYMMETRIC) == pytest.approx(np.arange(5.0))


def test_cg_breaks_down_on_indefinite_matrix():
    matrix = sps.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SolverBreakdown):
        conjugate_gradient(matrix, np.array([1.0, -1.0]))


def test_volume_matrix_is_symmetric(example1_problem, example1_mesh16):
    matrix = assemble_volume(IFESpace(example1_mesh16, example1_problem.beta))
    assert abs(matrix - matrix.T).max() <= 1e-12 * abs(matrix).max()


def test_dump_system(tmp_path):
    system = SparseSystem(sps.identity(3, format="csr"), np.ones(3), np.zeros(0), np.arange(3), np.zeros(0, dtype=int))
    dump_system(system, tmp_path / "n4")
    matrix = scipy.io.mmread(str(tmp_path / "n4" / "matrix.mtx"))
    assert matrix.toarray() == pytest.approx(np.eye(3))
    assert np.loadtxt(tmp_path / "n4" / "rhs.txt") == pytest.approx(np.ones(3))
