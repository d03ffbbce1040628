"""Experiment harness: builds problems from configurations, runs the
solvers deterministically, and emits CSV artifacts for figures.

CSV outputs (per run directory):
    residuals.csv       iter, residual
    singular_values.csv index, sigma_over_sigma1
    runtime.csv         phase, seconds, rank
    cross_section.csv   angle, value
    error.csv           iter, error, svd_tail_ref   (oracle comparisons)
plus run_meta.json echoing the configuration and library version.
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, catalog, farfield, kron, solver2d, solver3d
from .config import ExperimentConfig
from .errors import ConfigError
from .grid import build_ecs_axis, sample_wavenumber, second_derivative
from .tensor import cp_als

CROSS_SECTION_ANGLES = np.linspace(np.pi / 36, np.pi / 2 - np.pi / 36, 35)


@dataclass
class ProblemBundle:
    """Everything a run needs: axes, the solver problem, and the far-field
    ingredients for 2D kinds."""

    config: ExperimentConfig
    axes: list
    problem: object
    wavenumber_field: object = None

    @property
    def dimension(self) -> int:
        return len(self.axes)


def build_axes(config: ExperimentConfig):
    d = 2 if config.is_2d else 3
    axis = build_ecs_axis(
        config.interior_count,
        config.ecs_start,
        config.rotation_angle,
        config.ecs_fraction,
        domain_start=config.domain_start,
    )
    return [axis] * d


def build_problem(config: ExperimentConfig) -> ProblemBundle:
    axes = build_axes(config)
    d = len(axes)
    deriv = second_derivative(axes[0])
    bound = config.ecs_start
    chi = catalog.chi_function(config.chi, config.k0_squared, d)
    field = sample_wavenumber(axes, config.k0_squared, chi, bound)
    rhs = catalog.sample_windowed(axes, catalog.rhs_function(config.rhs_profile), bound)

    if config.is_2d:
        terms = catalog.separable_k_terms(config.chi, config.k0_squared, axes, bound)
        separable = None
        if terms is not None:
            separable = [(w * vecs[0], vecs[1]) for w, vecs in terms]
        problem = solver2d.Helmholtz2D(
            dxx=deriv, dyy=deriv.copy(), K=field.squared(), F=rhs,
            k_separable=separable,
        )
        return ProblemBundle(config=config, axes=axes, problem=problem,
                             wavenumber_field=field)

    if config.chi == "none":
        wavenumber = complex(config.k0_squared)
    elif config.cp_rank == 0:
        wavenumber = catalog.wavenumber_cp(config.chi, config.k0_squared, axes, bound)
        if wavenumber is None:
            raise ConfigError("wavenumber.cp_rank", "profile has no exact CP form; set cp_rank > 0")
    else:
        result = cp_als(field.squared(), config.cp_rank, max_iters=200, tol=1e-12,
                        seed=config.seed)
        wavenumber = result.tensor
    problem = solver3d.Helmholtz3D(
        dxx=deriv, dyy=deriv.copy(), dzz=deriv.copy(), wavenumber=wavenumber, F=rhs,
    )
    return ProblemBundle(config=config, axes=axes, problem=problem,
                         wavenumber_field=field)


def farfield_scene(bundle: ProblemBundle) -> farfield.FarfieldScene:
    config = bundle.config
    if not config.is_2d:
        raise ConfigError("problem.kind", "cross sections require a 2D kind")
    m = bundle.axes[0].interior_count
    chi_int = bundle.wavenumber_field.variation[:m, :m]
    f_int = bundle.problem.F[:m, :m]
    images = abs(config.domain_start) < 1e-14
    return farfield.FarfieldScene(
        axes=list(bundle.axes),
        k0_squared=config.k0_squared,
        chi_interior=chi_int,
        f_interior=f_int,
        dirichlet_images=images,
    )


def _write_csv(path: Path, header: str, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (complex, np.complexfloating)):
        return repr(complex(x))
    return str(x)


def _write_meta(path: Path, config: ExperimentConfig, extra: dict | None = None):
    meta = {"config": config.as_dict(), "version": __version__}
    if extra:
        meta.update(extra)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _solve(bundle: ProblemBundle, iterate_log=None, residual_every=1):
    config = bundle.config
    if config.is_2d:
        return solver2d.alternate(
            bundle.problem, config.rank, max_iters=config.max_iters,
            tol=config.tol, seed=config.seed, init=config.init,
            iterate_log=iterate_log,
        )
    return solver3d.run(
        bundle.problem, config.version, (config.rank,) * 3,
        max_iters=config.max_iters, tol=config.tol, seed=config.seed,
        init="rhs" if config.init == "rhs" else "random",
        residual_every=residual_every, iterate_log=iterate_log,
    )


def _final_singular_values(bundle: ProblemBundle, wave) -> np.ndarray:
    if bundle.config.is_2d:
        s = wave.coupling_singular_values()
    else:
        s = np.linalg.svd(
            np.asarray(wave.core).reshape(wave.core.shape[0], -1),
            compute_uv=False,
        )
    if s.size == 0 or s[0] == 0:
        return s
    return s / s[0]


def run_experiment(config: ExperimentConfig, out_dir=None):
    """Run one configured solve and write the requested CSV artifacts.

    Deterministic for a fixed config and seed (timing columns excluded).
    Returns (report, output_directory).
    """
    out = Path(out_dir) if out_dir is not None else Path(config.directory)
    out.mkdir(parents=True, exist_ok=True)
    bundle = build_problem(config)
    wave, report = _solve(bundle)
    report.config_echo = config.as_dict()

    if "residuals" in config.csv:
        _write_csv(out / "residuals.csv", "iter,residual",
                   [(k + 1, float(r)) for k, r in enumerate(report.residual_history)])
    if "singular_values" in config.csv:
        s = _final_singular_values(bundle, wave)
        _write_csv(out / "singular_values.csv", "index,sigma_over_sigma1",
                   [(k + 1, float(v)) for k, v in enumerate(s)])
    if "runtime" in config.csv:
        _write_csv(out / "runtime.csv", "phase,seconds,rank",
                   [(phase, float(sec), config.rank)
                    for phase, sec in sorted(report.timings.items())])
    if "cross_section" in config.csv:
        scene = farfield_scene(bundle)
        m = bundle.axes[0].interior_count
        u_int = wave.to_dense()[:m, :m]
        values = farfield.cross_section(scene, u_int, CROSS_SECTION_ANGLES)
        _write_csv(out / "cross_section.csv", "angle,value",
                   [(float(a), float(v)) for a, v in zip(CROSS_SECTION_ANGLES, values)])
    _write_meta(out / "run_meta.json", config,
                {"converged": report.converged, "iterations": report.iterations,
                 "stop_reason": report.stop_reason})
    (out / "report.json").write_text(
        json.dumps(report.as_dict(), indent=2, sort_keys=True, default=str) + "\n",
        encoding="utf-8",
    )
    return report, out


def compare_with_oracle(config: ExperimentConfig, out_dir=None):
    """Full-grid reference solve plus per-iteration error of the low-rank
    iteration against it; writes error.csv and singular_values.csv."""
    out = Path(out_dir) if out_dir is not None else Path(config.directory)
    out.mkdir(parents=True, exist_ok=True)
    bundle = build_problem(config)
    problem = bundle.problem
    full = kron.full_solve(problem.operator(), problem.F)
    full_norm = np.linalg.norm(full)

    if config.is_2d:
        sigma = np.linalg.svd(full, compute_uv=False)
    else:
        sigma = np.linalg.svd(full.reshape(full.shape[0], -1), compute_uv=False)
    tail_ref = float(sigma[config.rank] / sigma[0]) if config.rank < sigma.size else 0.0

    iterates = []
    wave, report = _solve(bundle, iterate_log=iterates)
    errors = []
    for k, snapshot in enumerate(iterates):
        err = np.linalg.norm(snapshot.to_dense() - full) / full_norm
        errors.append((k + 1, float(err), tail_ref))
    _write_csv(out / "error.csv", "iter,error,svd_tail_ref", errors)
    _write_csv(out / "singular_values.csv", "index,sigma_over_sigma1",
               [(k + 1, float(v / sigma[0])) for k, v in enumerate(sigma[: 4 * config.rank])])
    _write_meta(out / "run_meta.json", config, {"oracle": True, "svd_tail_ref": tail_ref})
    return report, out


def sweep(config: ExperimentConfig, ranks, out_dir=None, repetitions: int = 3):
    """Run the configured solver over a list of ranks, with median-of-n
    phase timings collected in a top-level runtime.csv."""
    out = Path(out_dir) if out_dir is not None else Path(config.directory)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    reports = {}
    for rank in ranks:
        sub = config.replace(rank=int(rank), directory=str(out / f"rank_{rank}"))
        bundle = build_problem(sub)
        timing_samples = {}
        report = None
        for rep in range(max(1, repetitions)):
            wave, rep_report = _solve(bundle, residual_every=0)
            for phase, sec in rep_report.timings.items():
                timing_samples.setdefault(phase, []).append(sec)
            if report is None:
                report = rep_report
                run_experiment(sub, out_dir=sub.directory)
        reports[int(rank)] = report
        for phase, samples in sorted(timing_samples.items()):
            rows.append((phase, float(statistics.median(samples)), int(rank)))
    _write_csv(out / "runtime.csv", "phase,seconds,rank", rows)
    _write_meta(out / "run_meta.json", config, {"sweep_ranks": [int(r) for r in ranks]})
    return reports, out
