"""Command-line front end for convergence studies"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, Optional

import pandas as pd
from pydantic import ValidationError

from .analysis import (
    StudyRun,
    format_rate_table,
    interface_band_max,
    run_mesh,
    sample_surface,
    with_rates,
    write_errors_csv,
)
from .config import settings
from .exceptions import ConfigError, PPIFEMError
from .ife_basis import Selector, sample_basis_surface
from .mesh import class_counts, classification_map
from .problems import get_problem
from .schemas import CONFIG_KEYS, RunConfig, StudyMode, SurfaceField

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppifem",
        description=settings.app_name,
    )
    parser.add_argument("--example", type=int, choices=[1, 2])
    parser.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    parser.add_argument("--betas", help="three coefficients, e.g. 10,1,100")
    parser.add_argument("--scheme", choices=[mode.value for mode in StudyMode])
    parser.add_argument("--epsilon", type=int, choices=[-1, 0, 1])
    parser.add_argument("--sigma0", type=float)
    parser.add_argument("--n-start", dest="n_start", type=int)
    parser.add_argument("--refinements", type=int, help="number of meshes in the study")
    parser.add_argument("--quad-order", dest="quad_order", type=int)
    parser.add_argument("--full", action="store_true", default=None, help="add one more refinement (N=512)")
    parser.add_argument("--out-errors", dest="out_errors", type=Path)
    parser.add_argument("--out-classification", dest="out_classification", type=Path)
    parser.add_argument("--out-surface", dest="out_surface", type=Path)
    parser.add_argument("--field", choices=[f.value for f in SurfaceField])
    parser.add_argument("--surface-n", dest="surface_n", type=int)
    parser.add_argument("--basis-element", dest="basis_element", type=int)
    parser.add_argument("--basis-selector", dest="basis_selector")
    parser.add_argument("--out-basis", dest="out_basis", type=Path)
    parser.add_argument("--dump-system", dest="dump_system", type=Path)
    parser.add_argument("--verbose", action="store_true")
    return parser


def read_config_file(path: Path) -> Dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}", key="config")
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {number}: expected key = value", key=key)
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}", key=key)
        values[key] = value.strip()
    return values


def load_config(args: argparse.Namespace) -> RunConfig:
    merged = read_config_file(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    try:
        return RunConfig(**merged)
    except ValidationError as err:
        first = err.errors()[0]
        key = str(first["loc"][0]) if first["loc"] else "config"
        raise ConfigError(f"invalid value for {key}: {first['msg']}", key=key)


def emit_surface(config: RunConfig, n: int, field: SurfaceField, run: Optional[StudyRun] = None) -> pd.DataFrame:
    spec = get_problem(config.example, config.betas)
    if run is None:
        run = run_mesh(spec, config.scheme_params, n, config.scheme)
    surface = sample_surface(run.function, spec, field)
    logger.info("surface n=%d %s: interface-band max %.3e, global max %.3e",
                n, field.value, interface_band_max(run.space, surface), surface["value"].abs().max())
    return surface


def run_study(config: RunConfig) -> int:
    spec = get_problem(config.example, config.betas)
    params = config.scheme_params
    n_list = config.n_list
    surface_n = config.surface_n or n_list[0]
    reports = []
    first_run = surface_run = None
    for n in n_list:
        run = run_mesh(spec, params, n, config.scheme, config.dump_system)
        reports.append(run.report)
        if first_run is None:
            first_run = run
        if n == surface_n:
            surface_run = run
    reports = with_rates(reports)

    print(f"Example {config.example}, betas {config.betas}, {config.scheme.value}")
    print(format_rate_table(reports))

    if config.out_errors:
        write_errors_csv(reports, config.out_errors)
    if config.out_classification:
        mesh = first_run.space.mesh
        pd.DataFrame(classification_map(mesh)).to_csv(config.out_classification, header=False, index=False)
        print(f"classification n={mesh.n}: {class_counts(mesh)}")
    if config.out_surface:
        emit_surface(config, surface_n, config.field, surface_run).to_csv(config.out_surface, index=False)
    if config.basis_element is not None:
        selector = Selector.parse(config.basis_selector)
        sample_basis_surface(first_run.space, config.basis_element, selector).to_csv(config.out_basis, index=False)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return run_study(load_config(args))
    except (PPIFEMError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
