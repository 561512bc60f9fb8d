"""Global PPIFEM and Galerkin IFE systems: assembly, Dirichlet elimination and solvers"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .config import settings
from .exceptions import NoConvergence, SolverBreakdown
from .ife_basis import Q1_COEFFS, IFESpace, LocalBasis, monomials
from .problems.base import ProblemSpec
from .quadrature import polygon_rule, reference_square_rule, segment_rule
from .schemas import Scheme, SchemeParams

logger = logging.getLogger(__name__)


@dataclass
class FullSystem:
    """Matrix and load over all mesh nodes, before boundary elimination"""

    matrix: sps.csr_matrix
    rhs: np.ndarray


@dataclass
class SparseSystem:
    matrix: sps.csr_matrix
    rhs: np.ndarray
    dirichlet_values: np.ndarray
    interior_nodes: np.ndarray
    boundary_nodes: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _volume_order(params: Optional[SchemeParams]) -> int:
    if params is not None and params.quad_order is not None:
        return params.quad_order
    return settings.polygon_order


def q1_stiffness(hx: float, hy: float) -> np.ndarray:
    """Stiffness matrix of the Q1 nodal basis on an hx x hy rectangle"""
    local, weights = reference_square_rule(2)
    xi, eta = local[:, 0], local[:, 1]
    zero, one = np.zeros_like(xi), np.ones_like(xi)
    gx = np.stack([zero, one, zero, eta], axis=-1) @ Q1_COEFFS.T / hx
    gy = np.stack([zero, zero, one, xi], axis=-1) @ Q1_COEFFS.T / hy
    w = weights * hx * hy
    return gx.T @ (w[:, None] * gx) + gy.T @ (w[:, None] * gy)


def _piece_arrays(basis: LocalBasis, piece: int, x, y, coeffs: np.ndarray):
    """Values and gradients (m, r) of the functions with coefficient rows `coeffs[:, piece]`"""
    values, gx, gy = monomials(basis.cut, x, y)
    block = coeffs[:, piece, :].T
    return values @ block, gx @ block, gy @ block


def _interface_element(space: IFESpace, spec: Optional[ProblemSpec], e: int, order: int):
    """Local stiffness (4, 4), load (4,) and flux-function coupling (k, 4) of one interface element"""
    basis = space.basis(e)
    k = basis.flux_count
    stiffness = np.zeros((4, 4))
    load = np.zeros(4)
    coupling = np.zeros((k, 4))
    for p, piece in enumerate(basis.pieces):
        rule = polygon_rule(piece.vertices, order)
        x, y = rule.points[:, 0], rule.points[:, 1]
        w = rule.weights
        beta = space.beta[piece.subdomain - 1]
        phi, gx, gy = _piece_arrays(basis, p, x, y, basis.nodal_coeffs)
        stiffness += beta * (gx.T @ (w[:, None] * gx) + gy.T @ (w[:, None] * gy))
        if spec is not None:
            load += phi.T @ (w * spec.source(x, y, piece.subdomain))
        if k:
            _, jx, jy = _piece_arrays(basis, p, x, y, basis.flux_coeffs)
            coupling += beta * (jx.T @ (w[:, None] * gx) + jy.T @ (w[:, None] * gy))
    return stiffness, load, coupling


def assemble_volume(space: IFESpace, params: SchemeParams = None) -> sps.csr_matrix:
    """Sum over elements and pieces of beta * grad(phi_j) . grad(phi_i)"""
    mesh = space.mesh
    order = _volume_order(params)
    size = mesh.node_count
    regular = mesh.regular_elements
    reference = q1_stiffness(mesh.hx, mesh.hy)
    betas = np.array(space.beta)[mesh.owner[regular] - 1]
    conn = mesh.elements[regular]
    rows = [np.repeat(conn, 4, axis=1).ravel()]
    cols = [np.tile(conn, (1, 4)).ravel()]
    data = [(betas[:, None, None] * reference).ravel()]
    for e in mesh.interface_elements:
        stiffness, _, _ = _interface_element(space, None, int(e), order)
        nodes = mesh.elements[e]
        rows.append(np.repeat(nodes, 4))
        cols.append(np.tile(nodes, 4))
        data.append(stiffness.ravel())
    matrix = sps.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    return matrix.tocsr()


def _edge_geometry(space: IFESpace, edge: int):
    mesh = space.mesh
    a, b = (tuple(map(float, mesh.nodes[v])) for v in mesh.edge_nodes[edge])
    normal = (0.0, 1.0) if a[1] == b[1] else (1.0, 0.0)
    breaks = [a] + list(mesh.edge_cuts.get(edge, [])) + [b]
    length = float(np.hypot(b[0] - a[0], b[1] - a[1]))
    return breaks, normal, length


def _edge_traces(space: IFESpace, e: int, points: np.ndarray, midpoint, normal, flux_values=None):
    """Values and averaged-flux contributions of the nodal functions (and u^J) of element e"""
    basis = space.basis(e)
    piece = basis.cut.boundary_piece(midpoint)
    beta = space.beta[basis.pieces[piece].subdomain - 1]
    phi, gx, gy = _piece_arrays(basis, piece, points[:, 0], points[:, 1], basis.nodal_coeffs)
    flux = beta * (gx * normal[0] + gy * normal[1])
    j_val = np.zeros(len(points))
    j_flux = np.zeros(len(points))
    if basis.flux_count and flux_values is not None:
        jv, jx, jy = _piece_arrays(basis, piece, points[:, 0], points[:, 1], basis.flux_coeffs)
        j_val = jv @ flux_values
        j_flux = beta * (jx * normal[0] + jy * normal[1]) @ flux_values
    return phi, flux, j_val, j_flux


def _edge_blocks(space: IFESpace, edge: int, params: SchemeParams, flux_coeffs: Dict[int, np.ndarray],
                 order: int):
    """Local matrix and enrichment load of the consistency, symmetry and penalty terms on one edge"""
    mesh = space.mesh
    t1, t2 = (int(t) for t in mesh.edge_elements[edge])
    breaks, normal, length = _edge_geometry(space, edge)
    dofs = np.unique(np.concatenate([mesh.elements[t1], mesh.elements[t2]]))
    where = {int(node): k for k, node in enumerate(dofs)}
    sigma = params.sigma0 * max(space.beta) / length
    eps = params.epsilon
    matrix = np.zeros((len(dofs), len(dofs)))
    load = np.zeros(len(dofs))
    for start, end in zip(breaks[:-1], breaks[1:]):
        if start == end:
            continue
        rule = segment_rule(start, end, order)
        midpoint = (0.5 * (start[0] + end[0]), 0.5 * (start[1] + end[1]))
        m = len(rule)
        jump = np.zeros((m, len(dofs)))
        average = np.zeros((m, len(dofs)))
        jump_j = np.zeros(m)
        average_j = np.zeros(m)
        for sign, e in ((1.0, t1), (-1.0, t2)):
            phi, flux, j_val, j_flux = _edge_traces(space, e, rule.points, midpoint, normal, flux_coeffs.get(e))
            cols = [where[int(node)] for node in mesh.elements[e]]
            jump[:, cols] += sign * phi
            average[:, cols] += 0.5 * flux
            jump_j += sign * j_val
            average_j += 0.5 * j_flux
        w = rule.weights
        matrix += (
            -jump.T @ (w[:, None] * average)
            + eps * average.T @ (w[:, None] * jump)
            + sigma * jump.T @ (w[:, None] * jump)
        )
        load += jump.T @ (w * average_j) - eps * average.T @ (w * jump_j) - sigma * jump.T @ (w * jump_j)
    return dofs, matrix, load


def assemble_edge_terms(space: IFESpace, params: SchemeParams,
                        flux_coeffs: Optional[Dict[int, np.ndarray]] = None) -> Tuple[sps.csr_matrix, np.ndarray]:
    """Edge matrix over interior interface edges and the matching -a_h(u^J, v) edge load"""
    mesh = space.mesh
    size = mesh.node_count
    flux_coeffs = {} if flux_coeffs is None else flux_coeffs
    order = settings.segment_order
    rows, cols, data = [], [], []
    load = np.zeros(size)
    for edge in np.flatnonzero(mesh.interface_edges):
        dofs, matrix, edge_load = _edge_blocks(space, int(edge), params, flux_coeffs, order)
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        data.append(matrix.ravel())
        np.add.at(load, dofs, edge_load)
    if not rows:
        return sps.csr_matrix((size, size)), load
    matrix = sps.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    return matrix.tocsr(), load


def flux_coefficients(space: IFESpace, spec: ProblemSpec, order: int = None) -> Dict[int, np.ndarray]:
    """q_T^k: integral of the flux jump b_k over each interface segment"""
    order = settings.segment_order if order is None else order
    result = {}
    for e in space.mesh.interface_elements:
        cut = space.mesh.cuts[int(e)]
        values = []
        for seg in cut.segments:
            rule = segment_rule(seg.start, seg.end, order)
            values.append(float(rule.weights @ spec.flux_jump(seg.interface, rule.points[:, 0], rule.points[:, 1])))
        result[int(e)] = np.array(values)
    return result


def source_load(space: IFESpace, spec: ProblemSpec, params: SchemeParams = None) -> np.ndarray:
    """(f, phi_i) for every node"""
    mesh = space.mesh
    order = _volume_order(params)
    load = np.zeros(mesh.node_count)
    regular = mesh.regular_elements
    local, weights = reference_square_rule(order)
    xi, eta = local[:, 0], local[:, 1]
    phi = np.stack([np.ones_like(xi), xi, eta, xi * eta], axis=-1) @ Q1_COEFFS.T
    centers = 0.5 * (mesh.nodes[mesh.elements[regular, 0]] + mesh.nodes[mesh.elements[regular, 2]])
    x = centers[:, 0:1] + mesh.hx * xi[None, :]
    y = centers[:, 1:2] + mesh.hy * eta[None, :]
    f = spec.source(x, y, mesh.owner[regular][:, None])
    local_load = (f * (weights * mesh.hx * mesh.hy)) @ phi
    np.add.at(load, mesh.elements[regular], local_load)
    for e in mesh.interface_elements:
        _, element_load, _ = _interface_element(space, spec, int(e), order)
        np.add.at(load, mesh.elements[e], element_load)
    return load


def interface_load(space: IFESpace, spec: ProblemSpec, order: int = None) -> np.ndarray:
    """Line integrals of b_k times the averaged basis trace on every interface segment"""
    order = settings.segment_order if order is None else order
    mesh = space.mesh
    load = np.zeros(mesh.node_count)
    for e in mesh.interface_elements:
        basis = space.basis(int(e))
        element_load = np.zeros(4)
        for seg in basis.cut.segments:
            rule = segment_rule(seg.start, seg.end, order)
            x, y = rule.points[:, 0], rule.points[:, 1]
            b = spec.flux_jump(seg.interface, x, y)
            plus, _, _ = _piece_arrays(basis, seg.plus_piece, x, y, basis.nodal_coeffs)
            minus, _, _ = _piece_arrays(basis, seg.minus_piece, x, y, basis.nodal_coeffs)
            element_load += (0.5 * (plus + minus)).T @ (rule.weights * b)
        np.add.at(load, mesh.elements[e], element_load)
    return load


def enrichment_volume_load(space: IFESpace, flux_coeffs: Dict[int, np.ndarray], params: SchemeParams = None) -> np.ndarray:
    """Volume part of -a_h(u^J, phi_i)"""
    mesh = space.mesh
    order = _volume_order(params)
    load = np.zeros(mesh.node_count)
    for e in mesh.interface_elements:
        q = flux_coeffs.get(int(e))
        if q is None or not len(q):
            continue
        _, _, coupling = _interface_element(space, None, int(e), order)
        np.add.at(load, mesh.elements[e], -(q @ coupling))
    return load


def assemble_full(space: IFESpace, spec: ProblemSpec, params: SchemeParams) -> FullSystem:
    """Matrix and rhs (f, v) - sum (b, v) - a_h(u^J, v) over all nodes"""
    q = flux_coefficients(space, spec)
    matrix = assemble_volume(space, params)
    rhs = source_load(space, spec, params) - interface_load(space, spec) + enrichment_volume_load(space, q, params)
    if params.scheme == Scheme.ppifem:
        edges, edge_load = assemble_edge_terms(space, params, q)
        matrix = (matrix + edges).tocsr()
        rhs = rhs + edge_load
    return FullSystem(matrix, rhs)


def assemble_rhs(space: IFESpace, spec: ProblemSpec, params: SchemeParams) -> np.ndarray:
    return assemble_full(space, spec, params).rhs


def apply_dirichlet(full: FullSystem, space: IFESpace, spec: ProblemSpec) -> SparseSystem:
    mesh = space.mesh
    interior, boundary = mesh.interior_nodes, mesh.boundary_nodes
    g = np.asarray(spec.boundary(mesh.nodes[boundary, 0], mesh.nodes[boundary, 1]), dtype=float)
    rows = full.matrix[interior]
    matrix = rows[:, interior].tocsr()
    rhs = full.rhs[interior] - rows[:, boundary] @ g
    return SparseSystem(matrix, rhs, g, interior, boundary)


def assemble_system(space: IFESpace, spec: ProblemSpec, params: SchemeParams,
                    dump_dir: Optional[Path] = None) -> SparseSystem:
    system = apply_dirichlet(assemble_full(space, spec, params), space, spec)
    logger.info("assembled %s system on n=%d with %d dofs, %d nonzeros",
                params.scheme.value, space.mesh.n, system.size, system.matrix.nnz)
    if dump_dir is not None or settings.debug:
        dump_system(system, Path(dump_dir or "system_dump") / f"n{space.mesh.n}")
    return system


def dump_system(system: SparseSystem, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(directory / "matrix.mtx"), system.matrix)
    np.savetxt(directory / "rhs.txt", system.rhs)
    logger.debug("wrote system dump to %s", directory)


def conjugate_gradient(matrix, rhs: np.ndarray, *, rtol: float = None, max_iter: int = None) -> Tuple[np.ndarray, int]:
    """Jacobi-preconditioned CG that stops on loss of positive definiteness"""
    rtol = settings.cg_rtol if rtol is None else rtol
    max_iter = settings.cg_max_iter_factor * len(rhs) if max_iter is None else max_iter
    diagonal = matrix.diagonal()
    if np.any(diagonal <= 0):
        raise SolverBreakdown("matrix has a non-positive diagonal entry; increase sigma0")
    inverse = 1.0 / diagonal
    x = np.zeros_like(rhs)
    r = rhs.copy()
    target = rtol * np.linalg.norm(rhs)
    if target == 0.0:
        return x, 0
    z = inverse * r
    d = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        ad = matrix @ d
        curvature = d @ ad
        if curvature <= 0:
            raise SolverBreakdown(
                f"CG curvature {curvature:.3e} at iteration {k}: matrix is not positive definite, increase sigma0"
            )
        alpha = rz / curvature
        x += alpha * d
        r -= alpha * ad
        if np.linalg.norm(r) <= target:
            return x, k
        z = inverse * r
        rz_next = r @ z
        d = z + (rz_next / rz) * d
        rz = rz_next
    raise NoConvergence(f"CG did not reach {rtol:.0e} in {max_iter} iterations")


def bicgstab(matrix, rhs: np.ndarray, *, rtol: float = None, max_iter: int = None) -> Tuple[np.ndarray, int]:
    """ILU-preconditioned BiCGStab"""
    rtol = settings.cg_rtol if rtol is None else rtol
    max_iter = settings.cg_max_iter_factor * len(rhs) if max_iter is None else max_iter
    ilu = spla.spilu(sps.csc_matrix(matrix), drop_tol=1e-6, fill_factor=20)
    preconditioner = spla.LinearOperator(matrix.shape, ilu.solve)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x, info = spla.bicgstab(matrix, rhs, rtol=rtol, atol=0.0, maxiter=max_iter, M=preconditioner, callback=count)
    if info > 0:
        raise NoConvergence(f"BiCGStab did not reach {rtol:.0e} in {info} iterations")
    if info < 0:
        raise SolverBreakdown(f"BiCGStab breakdown (info={info})")
    return x, iterations


def solve(system: SparseSystem, params: SchemeParams) -> np.ndarray:
    """Interior nodal values of the discrete solution"""
    matrix, rhs = system.matrix, system.rhs
    if params.scheme == Scheme.ppifem and params.epsilon == -1:
        x, iterations = conjugate_gradient(matrix, rhs)
        logger.info("CG converged in %d iterations (%d dofs)", iterations, system.size)
        return x
    if system.size < settings.dense_solver_limit:
        return scipy.linalg.solve(matrix.toarray(), rhs)
    try:
        x, iterations = bicgstab(matrix, rhs)
        logger.info("BiCGStab converged in %d iterations (%d dofs)", iterations, system.size)
        return x
    except (SolverBreakdown, NoConvergence, RuntimeError) as err:
        logger.warning("BiCGStab failed (%s); falling back to a sparse direct solve", err)
        return spla.spsolve(sps.csc_matrix(matrix), rhs)


def nodal_values(system: SparseSystem, interior_values: np.ndarray) -> np.ndarray:
    """Values at all nodes: solved interior values plus Dirichlet data"""
    size = len(system.interior_nodes) + len(system.boundary_nodes)
    values = np.zeros(size)
    values[system.interior_nodes] = interior_values
    values[system.boundary_nodes] = system.dirichlet_values
    return values
