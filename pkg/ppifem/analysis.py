"""Interpolation, error norms and convergence studies"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .assembly import (
    assemble_full,
    assemble_system,
    flux_coefficients,
    nodal_values,
    solve,
)
from .config import settings
from .exceptions import MissingExactSolution
from .ife_basis import Q1_COEFFS, IFESpace, locate_pieces, monomials
from .mesh import build_mesh
from .problems.base import ProblemSpec
from .quadrature import polygon_rule, reference_square_rule
from .schemas import ErrorReport, SchemeParams, StudyMode, SurfaceField

logger = logging.getLogger(__name__)

ERROR_COLUMNS = ["n", "linf", "rate_linf", "l2", "rate_l2", "h1", "rate_h1"]


@dataclass
class IFEFunction:
    """Nodal values at every mesh node plus flux-function coefficients per interface element"""

    space: IFESpace
    nodal: np.ndarray
    flux: Dict[int, np.ndarray] = field(default_factory=dict)

    def element_coeffs(self, e: int) -> np.ndarray:
        """Combined (pieces, 4) coefficients on element e"""
        basis = self.space.basis(e)
        values = self.nodal[self.space.mesh.elements[e]]
        coeffs = np.einsum("i,ipk->pk", values, basis.nodal_coeffs)
        q = self.flux.get(int(e))
        if q is not None and len(q):
            coeffs = coeffs + np.einsum("j,jpk->pk", q, basis.flux_coeffs)
        return coeffs

    def evaluate(self, x, y):
        """Values and gradients at arbitrary points of the domain"""
        mesh = self.space.mesh
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        elements = mesh.locate(x, y)
        value = np.zeros(len(x))
        grad_x = np.zeros(len(x))
        grad_y = np.zeros(len(x))
        is_interface = mesh.element_class[elements] != 0

        regular = np.flatnonzero(~is_interface)
        if len(regular):
            e = elements[regular]
            corners = mesh.nodes[mesh.elements[e, 0]]
            xi = (x[regular] - corners[:, 0]) / mesh.hx - 0.5
            eta = (y[regular] - corners[:, 1]) / mesh.hy - 0.5
            coeffs = self.nodal[mesh.elements[e]] @ Q1_COEFFS
            value[regular] = coeffs[:, 0] + coeffs[:, 1] * xi + coeffs[:, 2] * eta + coeffs[:, 3] * xi * eta
            grad_x[regular] = (coeffs[:, 1] + coeffs[:, 3] * eta) / mesh.hx
            grad_y[regular] = (coeffs[:, 2] + coeffs[:, 3] * xi) / mesh.hy

        for e in np.unique(elements[is_interface]):
            idx = np.flatnonzero(elements == e)
            cut = mesh.cuts[int(e)]
            pieces = locate_pieces(cut, x[idx], y[idx])
            coeffs = self.element_coeffs(int(e))[pieces]
            v, gx, gy = monomials(cut, x[idx], y[idx])
            value[idx] = np.einsum("mk,mk->m", v, coeffs)
            grad_x[idx] = np.einsum("mk,mk->m", gx, coeffs)
            grad_y[idx] = np.einsum("mk,mk->m", gy, coeffs)
        return value, grad_x, grad_y


def _require_exact(spec: ProblemSpec):
    if spec.exact is None:
        raise MissingExactSolution(f"problem {spec.name} has no exact solution")


def interpolate(space: IFESpace, spec: ProblemSpec) -> IFEFunction:
    """Nodal interpolant of the exact solution with flux enrichment q_T^k"""
    _require_exact(spec)
    nodes = space.mesh.nodes
    values = spec.exact_at(nodes[:, 0], nodes[:, 1])
    return IFEFunction(space, values, flux_coefficients(space, spec))


def solution_function(space: IFESpace, spec: ProblemSpec, system, interior_values: np.ndarray) -> IFEFunction:
    """Discrete solution u_h + u_h^J"""
    return IFEFunction(space, nodal_values(system, interior_values), flux_coefficients(space, spec))


def compute_errors(space: IFESpace, spec: ProblemSpec, solution: IFEFunction, order: int = None) -> ErrorReport:
    """Nodal max error and L2 / H1-seminorm errors by piecewise quadrature"""
    _require_exact(spec)
    order = settings.error_order if order is None else order
    mesh = space.mesh
    nodes = mesh.nodes
    linf = float(np.max(np.abs(solution.nodal - spec.exact_at(nodes[:, 0], nodes[:, 1]))))

    # regular elements in one vectorized sweep
    regular = mesh.regular_elements
    local, weights = reference_square_rule(order)
    xi, eta = local[:, 0], local[:, 1]
    coeffs = solution.nodal[mesh.elements[regular]] @ Q1_COEFFS
    corners = mesh.nodes[mesh.elements[regular, 0]]
    x = corners[:, 0:1] + mesh.hx * (xi[None, :] + 0.5)
    y = corners[:, 1:2] + mesh.hy * (eta[None, :] + 0.5)
    uh = coeffs[:, 0:1] + coeffs[:, 1:2] * xi + coeffs[:, 2:3] * eta + coeffs[:, 3:4] * xi * eta
    uh_x = (coeffs[:, 1:2] + coeffs[:, 3:4] * eta) / mesh.hx
    uh_y = (coeffs[:, 2:3] + coeffs[:, 3:4] * xi) / mesh.hy
    labels = mesh.owner[regular][:, None]
    u = spec.exact(x, y, labels)
    ux, uy = spec.exact.gradient(x, y, labels)
    w = weights * mesh.hx * mesh.hy
    l2 = float(((uh - u) ** 2 @ w).sum())
    h1 = float((((uh_x - ux) ** 2 + (uh_y - uy) ** 2) @ w).sum())

    for e in mesh.interface_elements:
        cut = mesh.cuts[int(e)]
        combined = solution.element_coeffs(int(e))
        for p, piece in enumerate(cut.pieces):
            rule = polygon_rule(piece.vertices, order)
            px, py = rule.points[:, 0], rule.points[:, 1]
            v, gx, gy = monomials(cut, px, py)
            c = combined[p]
            u = spec.exact(px, py, piece.subdomain)
            ux, uy = spec.exact.gradient(px, py, piece.subdomain)
            l2 += float(rule.weights @ (v @ c - u) ** 2)
            h1 += float(rule.weights @ ((gx @ c - ux) ** 2 + (gy @ c - uy) ** 2))
    return ErrorReport(n=mesh.n, linf=linf, l2=math.sqrt(l2), h1=math.sqrt(h1))


def convergence_rate(previous: float, current: float) -> Optional[float]:
    if previous <= 0 or current <= 0:
        return None
    return math.log2(previous / current)


def with_rates(reports: Sequence[ErrorReport]) -> List[ErrorReport]:
    """Attach log2 error ratios against the preceding mesh"""
    result = []
    for k, report in enumerate(reports):
        if k == 0:
            result.append(report.model_copy(update={"rate_linf": None, "rate_l2": None, "rate_h1": None}))
            continue
        prev = reports[k - 1]
        result.append(
            report.model_copy(
                update={
                    "rate_linf": convergence_rate(prev.linf, report.linf),
                    "rate_l2": convergence_rate(prev.l2, report.l2),
                    "rate_h1": convergence_rate(prev.h1, report.h1),
                }
            )
        )
    return result


@dataclass
class StudyRun:
    """Artifacts of one mesh of a study"""

    space: IFESpace
    function: IFEFunction
    report: ErrorReport


def run_mesh(spec: ProblemSpec, params: SchemeParams, n: int, mode: StudyMode = None,
             dump_dir=None) -> StudyRun:
    """Build, assemble, solve (or interpolate) and measure on one mesh"""
    mode = StudyMode(params.scheme.value) if mode is None else mode
    mesh = build_mesh(spec.domain, n, spec.geom)
    space = IFESpace(mesh, spec.beta)
    if mode == StudyMode.interpolation:
        function = interpolate(space, spec)
    else:
        system = assemble_system(space, spec, params, dump_dir)
        function = solution_function(space, spec, system, solve(system, params))
    report = compute_errors(space, spec, function)
    logger.info("n=%d %s: linf=%.3e l2=%.3e h1=%.3e", n, mode.value, report.linf, report.l2, report.h1)
    return StudyRun(space, function, report)


def _check_increasing(n_list: Sequence[int]):
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError(f"mesh sizes must increase strictly, got {list(n_list)}")


def convergence_study(spec: ProblemSpec, params: SchemeParams, n_list: Sequence[int],
                      mode: StudyMode = None) -> List[ErrorReport]:
    _check_increasing(n_list)
    return with_rates([run_mesh(spec, params, n, mode).report for n in n_list])


def interpolation_study(spec: ProblemSpec, n_list: Sequence[int]) -> List[ErrorReport]:
    return convergence_study(spec, SchemeParams(), n_list, StudyMode.interpolation)


def errors_frame(reports: Sequence[ErrorReport]) -> pd.DataFrame:
    frame = pd.DataFrame([report.model_dump() for report in reports])
    if frame.empty:
        return pd.DataFrame(columns=ERROR_COLUMNS)
    return frame[ERROR_COLUMNS]


def write_errors_csv(reports: Sequence[ErrorReport], path) -> None:
    errors_frame(reports).to_csv(path, index=False, na_rep="")


def format_rate_table(reports: Sequence[ErrorReport]) -> str:
    frame = errors_frame(reports)
    formatters = {
        column: (lambda v: "" if pd.isna(v) else f"{v:.2f}") if column.startswith("rate") else (lambda v: f"{v:.2e}")
        for column in ERROR_COLUMNS
        if column != "n"
    }
    return frame.to_string(index=False, formatters=formatters)


def sample_surface(function: IFEFunction, spec: ProblemSpec, field: SurfaceField = SurfaceField.error,
                   m: Optional[int] = None) -> pd.DataFrame:
    """(x, y, value) on a uniform (m+1) x (m+1) grid, m = 4n by default"""
    mesh = function.space.mesh
    m = 4 * mesh.n if m is None else m
    d = spec.domain
    X, Y = np.meshgrid(np.linspace(d.x0, d.x1, m + 1), np.linspace(d.y0, d.y1, m + 1), indexing="xy")
    x, y = X.ravel(), Y.ravel()
    values, _, _ = function.evaluate(x, y)
    if SurfaceField(field) == SurfaceField.error:
        _require_exact(spec)
        values = values - spec.exact_at(x, y)
    return pd.DataFrame({"x": x, "y": y, "value": values})


def interface_band_max(space: IFESpace, surface: pd.DataFrame) -> float:
    """Largest |value| over surface samples inside interface elements"""
    mesh = space.mesh
    elements = mesh.locate(surface["x"].to_numpy(), surface["y"].to_numpy())
    band = mesh.element_class[elements] != 0
    if not band.any():
        return 0.0
    return float(np.abs(surface["value"].to_numpy()[band]).max())


def consistency_residual(space: IFESpace, spec: ProblemSpec, params: SchemeParams) -> float:
    """max_i |a_h(I_h u, phi_i) - rhs(phi_i)| over interior nodes"""
    full = assemble_full(space, spec, params)
    interpolant = interpolate(space, spec)
    residual = full.matrix @ interpolant.nodal - full.rhs
    return float(np.abs(residual[space.mesh.interior_nodes]).max())
