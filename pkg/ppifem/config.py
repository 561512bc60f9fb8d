from typing import Tuple

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    app_name: str = "ppifem - bilinear partially penalized IFE solver"
    version: str = "1.0.0"
    debug: bool = False
    log_level: str = "INFO"

    # Scheme defaults; the edge penalty is sigma0 * max(beta) / |e|
    sigma0: float = 0.1
    epsilon: int = -1

    # Quadrature orders (polynomial degree of exactness on triangles/rectangles,
    # Gauss point count on segments)
    polygon_order: int = 4
    segment_order: int = 5
    error_order: int = 5

    # Geometry tolerances
    scan_intervals: int = 64
    root_tol: float = 1e-13
    tol_onsurface: float = 1e-12
    area_epsilon: float = 1e-10
    snap_tolerances: Tuple[float, ...] = (1e-10, 1e-8, 1e-6)
    inward_shift: float = 1e-9
    newton_max_iter: int = 50
    newton_tol: float = 1e-12
    triple_consistency_tol: float = 1e-8
    polygon_area_tol: float = 1e-14

    # Linear algebra
    rank_tol: float = 1e-12
    cg_rtol: float = 1e-12
    cg_max_iter_factor: int = 20
    dense_solver_limit: int = 2000

    class Config:
        env_prefix = "PPIFEM_"
        env_file = ".env"


settings = Settings()
