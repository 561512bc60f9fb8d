import dataclasses

import numpy as np
import pandas as pd
import pytest
import sympy as sp

from ppifem.analysis import (
    ERROR_COLUMNS,
    IFEFunction,
    compute_errors,
    consistency_residual,
    convergence_rate,
    convergence_study,
    interface_band_max,
    interpolate,
    interpolation_study,
    run_mesh,
    sample_surface,
    with_rates,
    write_errors_csv,
)
from ppifem.exceptions import MissingExactSolution
from ppifem.ife_basis import IFESpace
from ppifem.mesh import build_mesh
from ppifem.problems import example1, example2
from ppifem.problems.base import manufactured_problem, x_sym, y_sym
from ppifem.schemas import ErrorReport, Scheme, SchemeParams, StudyMode, SurfaceField
from tests.geometries import constant_problem, empty_geometry


def _space(spec, n):
    return IFESpace(build_mesh(spec.domain, n, spec.geom), spec.beta)


def test_bilinear_is_interpolated_exactly_with_equal_coefficients():
    u = 1 + 2 * x_sym - y_sym + x_sym * y_sym / 2
    spec = manufactured_problem(example1.geometry(), (3.0, 3.0, 3.0), [u] * 3)
    space = _space(spec, 16)
    report = compute_errors(space, spec, interpolate(space, spec))
    assert report.linf < 1e-12
    assert report.l2 < 1e-10
    assert report.h1 < 1e-10


def test_zero_solution_has_zero_error():
    spec = constant_problem(example2.geometry(), (10.0, 1.0, 100.0), 0.0)
    space = _space(spec, 8)
    function = IFEFunction(space, np.zeros(space.mesh.node_count))
    report = compute_errors(space, spec, function)
    assert (report.linf, report.l2, report.h1) == (0.0, 0.0, 0.0)


def test_smooth_interpolation_rates():
    spec = manufactured_problem(empty_geometry(), (1.0, 1.0, 1.0), [sp.sin(sp.pi * x_sym) * sp.sin(sp.pi * y_sym)] * 3)
    reports = interpolation_study(spec, [16, 32])
    assert reports[1].rate_l2 == pytest.approx(2.0, abs=0.05)
    assert reports[1].rate_h1 == pytest.approx(1.0, abs=0.05)


def test_convergence_rate():
    assert convergence_rate(1.0, 0.25) == pytest.approx(2.0)
    assert convergence_rate(0.0, 0.25) is None


def test_with_rates():
    reports = with_rates(
        [ErrorReport(n=8, linf=1.0, l2=1.0, h1=1.0), ErrorReport(n=16, linf=0.25, l2=0.25, h1=0.5)]
    )
    assert reports[0].rate_l2 is None
    assert reports[1].rate_linf == pytest.approx(2.0)
    assert reports[1].rate_h1 == pytest.approx(1.0)


def test_errors_csv(tmp_path):
    reports = with_rates(
        [ErrorReport(n=8, linf=1.0, l2=1.0, h1=1.0), ErrorReport(n=16, linf=0.5, l2=0.25, h1=0.5)]
    )
    path = tmp_path / "errors.csv"
    write_errors_csv(reports, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(ERROR_COLUMNS) == "n,linf,rate_linf,l2,rate_l2,h1,rate_h1"
    assert lines[1] == "8,1.0,,1.0,,1.0,"
    frame = pd.read_csv(path)
    assert frame["rate_l2"].iloc[1] == pytest.approx(2.0)


def test_missing_exact_solution():
    spec = dataclasses.replace(constant_problem(empty_geometry(), (1.0, 1.0, 1.0), 1.0), exact=None)
    space = _space(spec, 4)
    with pytest.raises(MissingExactSolution):
        interpolate(space, spec)


def test_constant_solution_is_consistent():
    spec = constant_problem(example1.geometry(), (10.0, 1.0, 100.0), 1.5)
    space = _space(spec, 8)
    assert consistency_residual(space, spec, SchemeParams()) < 1e-8


def test_surface_sampling(example2_problem):
    run = run_mesh(example2_problem, SchemeParams(), 8, StudyMode.interpolation)
    surface = sample_surface(run.function, example2_problem, SurfaceField.error)
    assert len(surface) == (4 * 8 + 1) ** 2
    assert list(surface.columns) == ["x", "y", "value"]
    solution = sample_surface(run.function, example2_problem, SurfaceField.solution, m=4)
    assert len(solution) == 25
    assert interface_band_max(run.space, surface) <= surface["value"].abs().max()


def test_no_interface_band_without_interfaces():
    spec = constant_problem(empty_geometry(), (1.0, 1.0, 1.0), 1.0)
    run = run_mesh(spec, SchemeParams(), 4, StudyMode.interpolation)
    surface = sample_surface(run.function, spec, SurfaceField.error)
    assert interface_band_max(run.space, surface) == 0.0
    assert surface["value"].abs().max() < 1e-14


def test_ppifem_run_on_a_coarse_mesh(example1_problem):
    run = run_mesh(example1_problem, SchemeParams(), 8)
    assert np.isfinite([run.report.linf, run.report.l2, run.report.h1]).all()
    assert run.report.n == 8


def test_study_rejects_unordered_meshes(example1_problem):
    with pytest.raises(ValueError):
        convergence_study(example1_problem, SchemeParams(), [16, 8])


FULL = [16, 32, 64, 128, 256]

EX1_INTERPOLATION = {"l2": [3.05e-2, 7.71e-3, 1.93e-3, 4.84e-4, 1.21e-4], "h1": [6.05e-1, 3.02e-1, 1.51e-1, 7.52e-2, 3.76e-2]}
EX1_PPIFEM = {
    "linf": [2.70e-2, 6.92e-3, 1.75e-3, 4.38e-4, 1.09e-4],
    "l2": [2.81e-2, 7.10e-3, 1.78e-3, 4.45e-4, 1.11e-4],
    "h1": [6.05e-1, 3.02e-1, 1.51e-1, 7.52e-2, 3.76e-2],
}
EX1_HIGH_CONTRAST_L2 = [2.81e-2, 7.10e-3, 1.78e-3, 4.45e-4, 1.11e-4]
EX2_INTERPOLATION = {"l2": [2.46e-2, 6.25e-3, 1.57e-3, 3.93e-4], "h1": [5.27e-1, 2.63e-1, 1.31e-1, 6.57e-2]}
EXPECTED_RATES = {"linf": 2.0, "l2": 2.0, "h1": 1.0}


def _column(reports, key):
    return [getattr(report, key) for report in reports]


def _within_factor(values, reference, factor):
    return all(ref / factor <= value <= ref * factor for value, ref in zip(values, reference))


@pytest.fixture(scope="module")
def example1_ppifem_reports(example1_problem):
    return convergence_study(example1_problem, SchemeParams(), FULL)


@pytest.mark.slow
def test_example1_interpolation_table(example1_problem):
    reports = interpolation_study(example1_problem, FULL)
    for key, expected in EX1_INTERPOLATION.items():
        assert _column(reports, key) == pytest.approx(expected, rel=0.1)
        table_rates = np.log2(np.array(expected[:-1]) / np.array(expected[1:]))
        assert _column(reports[1:], f"rate_{key}") == pytest.approx(table_rates, abs=0.05)


@pytest.mark.slow
def test_example2_interpolation_table(example2_problem):
    reports = interpolation_study(example2_problem, FULL[:4])
    for key, expected in EX2_INTERPOLATION.items():
        assert _column(reports, key) == pytest.approx(expected, rel=0.1)


@pytest.mark.slow
def test_example1_ppifem_errors(example1_ppifem_reports):
    for key, expected in EX1_PPIFEM.items():
        assert _within_factor(_column(example1_ppifem_reports, key), expected, 3.0)
        rates = _column(example1_ppifem_reports[2:], f"rate_{key}")
        assert rates == pytest.approx([EXPECTED_RATES[key]] * 3, abs=0.1)


@pytest.mark.slow
def test_example1_high_contrast_ppifem():
    spec = example1.problem((100.0, 10000.0, 1.0))
    reports = convergence_study(spec, SchemeParams(), FULL)
    assert _within_factor(_column(reports, "l2"), EX1_HIGH_CONTRAST_L2, 3.0)
    assert _column(reports[2:], "rate_l2") == pytest.approx([2.0] * 3, abs=0.1)
    assert _column(reports[2:], "rate_h1") == pytest.approx([1.0] * 3, abs=0.05)


@pytest.mark.slow
def test_penalty_restores_nodal_rate(example1_problem, example1_ppifem_reports):
    galerkin = convergence_study(example1_problem, SchemeParams(scheme=Scheme.galerkin), FULL[-2:])
    assert galerkin[-1].rate_linf <= 1.5
    assert example1_ppifem_reports[-1].rate_linf >= 1.9


@pytest.mark.slow
def test_example2_ppifem_rates(example2_problem):
    reports = convergence_study(example2_problem, SchemeParams(), FULL)
    for key, rate in EXPECTED_RATES.items():
        assert _column(reports[2:], f"rate_{key}") == pytest.approx([rate] * 3, abs=0.15)


@pytest.mark.slow
def test_penalty_shrinks_interface_band_error(example2_problem):
    band = {}
    for scheme in Scheme:
        run = run_mesh(example2_problem, SchemeParams(scheme=scheme), 64)
        band[scheme] = interface_band_max(run.space, sample_surface(run.function, example2_problem))
    assert band[Scheme.galerkin] > 2 * band[Scheme.ppifem]


def test_consistency_residual_decreases(example1_problem):
    residuals = [consistency_residual(_space(example1_problem, n), example1_problem, SchemeParams()) for n in (16, 32)]
    assert np.log2(residuals[0] / residuals[1]) >= 0.9
