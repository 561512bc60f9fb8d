"""Problem data: coefficients, source, flux jumps, boundary values and exact solutions"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from ..geometry import Rectangle, SubdomainGeometry

logger = logging.getLogger(__name__)

x_sym, y_sym = sp.symbols("x y", real=True)

DEFAULT_DOMAIN = Rectangle(-1.0, -1.0, 1.0, 1.0)


def lambdify_field(expr) -> Callable:
    """numpy callable of (x, y) that broadcasts constant expressions"""
    func = sp.lambdify((x_sym, y_sym), expr, modules="numpy")

    def field(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(func(x, y), dtype=float), np.broadcast(x, y).shape).copy()

    return field


@dataclass(frozen=True)
class PiecewiseField:
    """One scalar field per subdomain, selected by label"""

    branches: Tuple[Callable, Callable, Callable]

    def __call__(self, x, y, labels) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        labels = np.broadcast_to(np.asarray(labels, dtype=int), x.shape)
        out = np.zeros(x.shape)
        for label in (1, 2, 3):
            mask = labels == label
            if mask.any():
                out[mask] = self.branches[label - 1](x[mask], y[mask])
        return out


@dataclass(frozen=True)
class ExactSolution:
    value: PiecewiseField
    grad_x: PiecewiseField
    grad_y: PiecewiseField

    def __call__(self, x, y, labels) -> np.ndarray:
        return self.value(x, y, labels)

    def gradient(self, x, y, labels) -> Tuple[np.ndarray, np.ndarray]:
        return self.grad_x(x, y, labels), self.grad_y(x, y, labels)


@dataclass(frozen=True)
class ProblemSpec:
    geom: SubdomainGeometry
    beta: Tuple[float, float, float]
    source: PiecewiseField
    flux_jumps: Tuple[Callable, Callable, Callable]
    boundary: Callable
    exact: Optional[ExactSolution] = None
    domain: Rectangle = DEFAULT_DOMAIN
    name: str = "custom"

    def __post_init__(self):
        if len(self.beta) != 3 or any(b <= 0 for b in self.beta):
            raise ValueError(f"coefficients must be three positive numbers, got {self.beta}")

    def flux_jump(self, interface: int, x, y) -> np.ndarray:
        return self.flux_jumps[interface - 1](x, y)

    def exact_at(self, x, y) -> np.ndarray:
        """Exact solution with the branch chosen by the true subdomain of each point"""
        return self.exact(x, y, self.geom.region_of(x, y))


def manufactured_problem(geom: SubdomainGeometry, beta: Sequence[float], solutions: Sequence,
                         name: str = "custom", domain: Rectangle = DEFAULT_DOMAIN) -> ProblemSpec:
    """Source, flux jumps and boundary data derived from per-subdomain exact solutions u_i(x, y)"""
    beta = tuple(float(b) for b in beta)
    exprs = [sp.sympify(u) for u in solutions]
    grads = [(sp.diff(u, x_sym), sp.diff(u, y_sym)) for u in exprs]
    sources = [
        sp.simplify(-beta[i] * (sp.diff(exprs[i], x_sym, 2) + sp.diff(exprs[i], y_sym, 2)))
        for i in range(3)
    ]
    value = PiecewiseField(tuple(lambdify_field(u) for u in exprs))
    grad_x = PiecewiseField(tuple(lambdify_field(g[0]) for g in grads))
    grad_y = PiecewiseField(tuple(lambdify_field(g[1]) for g in grads))
    exact = ExactSolution(value, grad_x, grad_y)

    flux_fields = [
        (lambdify_field(beta[i] * grads[i][0]), lambdify_field(beta[i] * grads[i][1])) for i in range(3)
    ]

    def make_jump(interface: int) -> Callable:
        plus, minus = geom.interface_between[interface - 1]

        def jump(x, y):
            nx, ny = geom.normal(interface, x, y)
            px, py = flux_fields[plus - 1]
            mx, my = flux_fields[minus - 1]
            return (px(x, y) - mx(x, y)) * nx + (py(x, y) - my(x, y)) * ny

        return jump

    def boundary(x, y):
        return exact(x, y, geom.region_of(x, y))

    logger.debug("manufactured %s with sources %s", name, sources)
    return ProblemSpec(
        geom=geom,
        beta=beta,
        source=PiecewiseField(tuple(lambdify_field(f) for f in sources)),
        flux_jumps=tuple(make_jump(i) for i in (1, 2, 3)),
        boundary=boundary,
        exact=exact,
        domain=domain,
        name=name,
    )


def check_manufactured(spec: ProblemSpec, points: int = 1000, step: float = 1e-4, seed: int = 0) -> float:
    """Largest relative mismatch between the source and a finite-difference Laplacian of the exact solution"""
    rng = np.random.default_rng(seed)
    d = spec.domain
    x = rng.uniform(d.x0 + 0.01, d.x1 - 0.01, points)
    y = rng.uniform(d.y0 + 0.01, d.y1 - 0.01, points)
    labels = spec.geom.region_of(x, y)
    u = spec.exact.value
    lap = (
        u(x + step, y, labels) + u(x - step, y, labels) + u(x, y + step, labels) + u(x, y - step, labels)
        - 4.0 * u(x, y, labels)
    ) / step**2
    beta = np.array(spec.beta)[labels - 1]
    expected = spec.source(x, y, labels)
    return float(np.max(np.abs(-beta * lap - expected)) / max(1.0, np.abs(expected).max()))
