"""Experiment driver: dispatch, parallel map, output envelopes.

Every run lands in its own directory named by config hash and
timestamp, holding the resolved config echo, the payload files, and a
result.json envelope.  Payload bytes depend only on the resolved config
and seed, never on thread count; the envelope carries the wall time and
is the one file excluded from that contract.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import time
from dataclasses import dataclass, is_dataclass, asdict, replace
from pathlib import Path

import numpy as np
import yaml

from .bands import (
    brillouin_zone,
    compute_bands,
    find_band_edges,
    check_regularity,
    write_band_csv,
)
from .config import build_model, config_hash, resolve_config
from .hamiltonian import BoundaryCondition
from .hscalc import (
    QuadratureSpec,
    matrix_function_eigh,
    matrix_function_hs,
    plateau_function,
)
from .ids import (
    DisorderAverage,
    ids_dirichlet_box,
    ids_difference_experiment,
    ids_periodic_approx,
    lifshitz_fit,
    mass_window,
    write_decay_csv,
    write_ids_csv,
)
from .model import AndersonModel
from .probes import (
    combes_thomas_profile,
    fixed_theta_check,
    gap_probability,
    m_regularity_test,
    msa_schedule,
    theta_average_check,
)

__all__ = [
    "CheckFailure",
    "ResultEnvelope",
    "VERSION",
    "parallel_map",
    "run",
]

VERSION = "0.1.0"


class CheckFailure(Exception):
    """An inequality or assertion the experiment was testing did not hold."""


def parallel_map(threads: int):
    """Order-preserving map; a process pool when threads > 1.

    Work items are dispatched by index and collected in submission
    order, so reductions downstream see the same sequence regardless of
    the worker count.
    """
    if threads <= 1:
        return lambda fn, items: [fn(x) for x in items]

    def mapper(fn, items):
        items = list(items)
        if len(items) <= 1:
            return [fn(x) for x in items]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(min(threads, len(items))) as pool:
            return pool.map(fn, items, chunksize=1)

    return mapper


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


class OutputSink:
    """Writes payload files under the run directory and records digests."""

    def __init__(self, directory: Path, metadata: dict):
        self.directory = directory
        self.metadata = dict(metadata)
        self.payloads: dict[str, dict] = {}

    def path(self, name: str) -> str:
        return str(self.directory / name)

    def register(self, name: str) -> None:
        digest = hashlib.sha256((self.directory / name).read_bytes()).hexdigest()
        self.payloads[name] = {"path": name, "sha256": digest}

    def write_json(self, name: str, obj: dict) -> None:
        body = {**self.metadata, **_jsonable(obj)}
        text = json.dumps(body, sort_keys=True, indent=2)
        (self.directory / name).write_text(text + "\n", encoding="ascii")
        self.register(name)


@dataclass(frozen=True)
class ResultEnvelope:
    kind: str
    config_hash: str
    version: str
    wall_time_s: float
    directory: str
    payloads: dict[str, dict]
    summary: str
    check: dict | None = None

    @property
    def check_passed(self) -> bool | None:
        if self.check is None:
            return None
        return bool(self.check.get("passed"))


def _quiet(model: AndersonModel) -> AndersonModel:
    return replace(model, disorder=replace(model.disorder, omega_max=0.0))


# ---------------------------------------------------------------------------
# picklable per-realization workers


class _BrillouinCurveWorker:
    def __init__(self, model, half_width, energies, theta_resolution):
        self.model = model
        self.half_width = half_width
        self.energies = np.asarray(energies, dtype=float)
        self.theta_resolution = theta_resolution

    def __call__(self, realization: int) -> np.ndarray:
        grid = self.model.grid(2 * self.half_width + 1)
        sample = self.model.sample_fundamental(grid, realization)
        curve = ids_periodic_approx(
            self.model, sample, self.half_width, self.energies,
            theta_resolution=self.theta_resolution,
        )
        return curve.values


class _DirichletCurveWorker:
    def __init__(self, model, cells, energies, upper=None):
        self.model = model
        self.cells = cells
        self.energies = np.asarray(energies, dtype=float)
        self.upper = upper

    def __call__(self, realization: int) -> np.ndarray:
        h = self.model.anderson_box(
            self.cells, BoundaryCondition.dirichlet(), realization
        )
        return ids_dirichlet_box(h, self.energies, upper=self.upper).values


class _HsErrorWorker:
    """Error of the resolvent-integral functional calculus on one matrix."""

    def __init__(self, matrix_dim, f, order, quad, master_seed, refine):
        self.matrix_dim = matrix_dim
        self.f = f
        self.order = order
        self.quad = quad
        self.master_seed = master_seed
        self.refine = refine

    def __call__(self, index: int) -> tuple[float, float]:
        rng = np.random.default_rng((self.master_seed, index))
        b = rng.standard_normal((self.matrix_dim, self.matrix_dim))
        c = rng.standard_normal((self.matrix_dim, self.matrix_dim))
        a = b + 1j * c
        a = 0.5 * (a + a.conj().T)
        exact = matrix_function_eigh(a, self.f)
        approx = matrix_function_hs(a, self.f, n=self.order, quad=self.quad)
        err = float(np.linalg.norm(approx - exact, 2))
        if not self.refine:
            return err, math.nan
        refined = matrix_function_hs(a, self.f, n=self.order, quad=self.quad.refine())
        return err, float(np.linalg.norm(refined - exact, 2))


class _RegularityWorker:
    def __init__(self, model, side, energy, delta, mass, probes):
        self.model = model
        self.side = side
        self.energy = energy
        self.delta = delta
        self.mass = mass
        self.probes = tuple(probes)

    def __call__(self, realization: int) -> tuple[bool, float, float]:
        h = self.model.anderson_box(
            self.side, BoundaryCondition.dirichlet(), realization
        )
        res = m_regularity_test(
            h, self.energy, self.delta, self.mass, eps_probes=self.probes
        )
        return res.passed, res.supremum, res.threshold


# ---------------------------------------------------------------------------
# experiment bodies: (model, exp, execution, sink, mapper) -> (summary, check)


def _mean_stderr(stack: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    arr = np.stack(stack)
    mean = arr.mean(axis=0)
    if arr.shape[0] > 1:
        stderr = arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0])
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr


def _run_bandstructure(model, exp, execution, sink, mapper):
    hw = exp["half_width"]
    zone = brillouin_zone(hw, model.dimension)
    if hw == 0:
        factory = model.unit_cell_factory()
    else:
        source = model if exp["realization"] is not None else _quiet(model)
        factory = source.periodic_band_factory(hw, exp["realization"] or 0)
    bands = compute_bands(factory, zone, exp["resolution"], exp["num_bands"])
    write_band_csv(bands, sink.path("bands.csv"), metadata=sink.metadata)
    sink.register("bands.csv")

    edges = find_band_edges(bands)
    payload = {"edges": edges, "half_width": hw, "num_bands": exp["num_bands"]}
    check = None
    if exp["check_regularity"]:
        report = check_regularity(bands, edges[0]["energy"])
        payload["regularity"] = report
        check = {"passed": report.regular, "what": "regular lower band edge"}
    sink.write_json("bands.json", payload)
    lo = edges[0]["energy"]
    return f"{bands.num_bands} band(s), lower edge at {lo:.6g}", check


def _run_ids(model, exp, execution, sink, mapper):
    energies = np.linspace(exp["energy_min"], exp["energy_max"], exp["energy_points"])
    m = execution["realizations"]
    if exp["method"] == "brillouin":
        worker = _BrillouinCurveWorker(
            model, exp["half_width"], energies, exp["theta_resolution"]
        )
    else:
        worker = _DirichletCurveWorker(model, exp["cells"], energies)
    mean, stderr = _mean_stderr(mapper(worker, range(m)))
    write_ids_csv(energies, mean, stderr, sink.path("ids.csv"), metadata=sink.metadata)
    sink.register("ids.csv")
    sink.write_json(
        "ids.json",
        {
            "method": exp["method"],
            "realizations": m,
            "mass_at_max": float(mean[-1]),
            "energy_range": [float(energies[0]), float(energies[-1])],
        },
    )
    return f"{exp['method']} IDS over {m} realizations, N(max)={mean[-1]:.6g}", None


def _run_lifshitz(model, exp, execution, sink, mapper):
    edge = exp["edge"]
    offsets = np.geomspace(
        exp["energy_min"] - edge, exp["energy_max"] - edge, exp["energy_points"]
    )
    energies = edge + offsets
    m = execution["realizations"]
    worker = _DirichletCurveWorker(model, exp["cells"], energies, exp["eigen_cutoff"])
    mean, stderr = _mean_stderr(mapper(worker, range(m)))
    avg = DisorderAverage(energies, mean, stderr, m)
    write_ids_csv(energies, mean, stderr, sink.path("ids.csv"), metadata=sink.metadata)
    sink.register("ids.csv")

    window = mass_window(avg, edge, exp["mass_low"], exp["mass_high"])
    fit = lifshitz_fit(avg, edge, window, target=-model.dimension / 2.0)
    sink.write_json(
        "lifshitz.json",
        {
            "fit": fit,
            "cells": exp["cells"],
            "realizations": m,
            "mass_bounds": [exp["mass_low"], exp["mass_high"]],
        },
    )
    return (
        f"tail exponent {fit.exponent:.4f} +/- {fit.confidence_halfwidth:.4f} "
        f"(target {-model.dimension / 2.0})",
        None,
    )


def _run_ids_diff(model, exp, execution, sink, mapper):
    g = plateau_function(exp["plateau_energy"], exp["plateau_order"])
    table = ids_difference_experiment(
        model,
        g,
        exp["half_widths"],
        execution["realizations"],
        reference_half_width=exp["reference_half_width"],
        theta_resolution=exp["theta_resolution"],
        map_fn=mapper,
    )
    write_decay_csv(table, sink.path("decay.csv"), metadata=sink.metadata)
    sink.register("decay.csv")
    sink.write_json("decay.json", {"table": table})
    deltas = ", ".join(f"{r.delta:.3e}" for r in table.rows)
    return f"Delta(l) = [{deltas}] vs reference l={table.reference_half_width}", None


def _run_hs_check(model, exp, execution, sink, mapper):
    f = plateau_function(exp["plateau_energy"], exp["plateau_order"])
    quad = QuadratureSpec.for_function(
        f,
        x_points=exp["x_points"],
        y_panels=exp["y_panels"],
        y_subnodes=exp["y_subnodes"],
        eps_y=exp["eps_y"],
        scheme=exp["scheme"],
    )
    worker = _HsErrorWorker(
        exp["matrix_dim"], f, exp["order"], quad,
        execution["master_seed"], exp["refine"],
    )
    pairs = mapper(worker, range(exp["matrices"]))
    errors = [p[0] for p in pairs]
    refined = [p[1] for p in pairs]
    max_err = max(errors)
    tolerance = 1e-6
    passed = max_err <= tolerance
    ratio = None
    if exp["refine"]:
        max_ref = max(refined)
        ratio = max_err / max_ref if max_ref > 0 else math.inf
        passed = passed and ratio >= 4.0
    sink.write_json(
        "hs_check.json",
        {
            "errors": errors,
            "refined_errors": refined if exp["refine"] else None,
            "max_error": max_err,
            "refinement_gain": ratio,
            "tolerance": tolerance,
            "passed": passed,
        },
    )
    gain = f", refinement gain {ratio:.1f}x" if ratio is not None else ""
    check = {"passed": passed, "what": f"operator-norm error <= {tolerance}"}
    return f"max |f(A)_quad - f(A)_eigh| = {max_err:.3e}{gain}", check


def _run_ct_decay(model, exp, execution, sink, mapper):
    if exp["realization"] is None:
        h = model.h0_box(exp["cells"], BoundaryCondition.dirichlet())
    else:
        h = model.anderson_box(
            exp["cells"], BoundaryCondition.dirichlet(), exp["realization"]
        )
    z = complex(exp["z_real"], exp["z_imag"])
    anchor = (exp["cells"] // 2,) * model.dimension
    profile = combes_thomas_profile(h, z, anchor, exp["max_distance"])

    with open(sink.path("decay.csv"), "w", encoding="ascii") as fh:
        for key, val in sink.metadata.items():
            fh.write(f"# {key}={val}\n")
        fh.write("distance,norm\n")
        for dist, norm in zip(profile.distances, profile.norms):
            fh.write(f"{int(dist)},{float(norm)!r}\n")
    sink.register("decay.csv")
    sink.write_json(
        "decay.json",
        {
            "rate": profile.rate,
            "prefactor": profile.prefactor,
            "r_squared": profile.r_squared,
            "dist_to_spectrum": profile.dist_to_spectrum,
            "fitted_points": profile.fitted_points,
            "z": [z.real, z.imag],
        },
    )
    return (
        f"resolvent decay rate {profile.rate:.4f} per cell "
        f"(R^2 = {profile.r_squared:.4f})",
        None,
    )


def _run_gap_prob(model, exp, execution, sink, mapper):
    theta0 = tuple(exp["theta0"]) if exp["theta0"] is not None else None
    estimates = [
        gap_probability(model, side, exp["alpha"], execution["realizations"], theta0)
        for side in exp["sides"]
    ]
    sink.write_json("gap_prob.json", {"estimates": estimates, "alpha": exp["alpha"]})
    text = ", ".join(f"P({e.side})={e.estimate:.3f}" for e in estimates)
    return f"low-eigenvalue hit rates: {text}", None


def _run_theta_bounds(model, exp, execution, sink, mapper):
    m = execution["realizations"]
    avg = theta_average_check(
        model, exp["half_width"], exp["energy"], m,
        theta_resolution=exp["theta_resolution"],
    )
    payload: dict = {"average": avg, "average_passed": avg.passed}
    passed = avg.passed
    parts = [f"zone-average slack {avg.slack:+.3e}"]
    if exp["theta0"] is not None:
        fixed = fixed_theta_check(
            model, exp["half_width"], exp["energy"], tuple(exp["theta0"]), m,
            exp["xi"], theta_resolution=exp["theta_resolution"],
        )
        payload["fixed"] = fixed
        payload["fixed_passed"] = fixed.passed
        passed = passed and fixed.passed
        parts.append(f"fixed-theta slack {fixed.slack:+.3e}")
    payload["passed"] = passed
    sink.write_json("theta_bounds.json", payload)
    check = {"passed": passed, "what": "counting bounds hold within 2 stderr"}
    return "; ".join(parts), check


def _run_msa_schedule(model, exp, execution, sink, mapper):
    sched = msa_schedule(
        exp["l0"], exp["m0"], exp["q0"], exp["zeta"], exp["steps"],
        c1=exp["c1"], c2=exp["c2"], c3=exp["c3"], xi=exp["xi"],
        dimension=model.dimension,
    )
    with open(sink.path("schedule.csv"), "w", encoding="ascii") as fh:
        for key, val in sink.metadata.items():
            fh.write(f"# {key}={val}\n")
        fh.write("step,scale,mass,exponent\n")
        for j, (l, mm, q) in enumerate(
            zip(sched.scales, sched.masses, sched.exponents)
        ):
            fh.write(f"{j},{l},{float(mm)!r},{float(q)!r}\n")
    sink.register("schedule.csv")
    sink.write_json(
        "schedule.json",
        {
            "scales": list(sched.scales),
            "masses": list(sched.masses),
            "exponents": list(sched.exponents),
            "min_mass": sched.min_mass,
            "mass_positive": sched.mass_positive,
        },
    )
    return (
        f"scales {list(sched.scales[:3])}..., min mass {sched.min_mass:.4f}, "
        f"mass stays positive: {sched.mass_positive}",
        None,
    )


def _run_m_regularity(model, exp, execution, sink, mapper):
    m = execution["realizations"]
    worker = _RegularityWorker(
        model, exp["side"], exp["energy"], exp["delta"], exp["mass"],
        exp["eps_probes"],
    )
    rows = mapper(worker, range(m))
    passes = sum(1 for r in rows if r[0])
    suprema = [r[1] for r in rows]
    sink.write_json(
        "regularity.json",
        {
            "realizations": m,
            "passes": passes,
            "pass_rate": passes / m,
            "suprema": suprema,
            "threshold": rows[0][2],
        },
    )
    return f"{passes}/{m} realizations ({exp['side']},{exp['mass']})-regular", None


_DISPATCH = {
    "bandstructure": _run_bandstructure,
    "ids": _run_ids,
    "lifshitz": _run_lifshitz,
    "ids-diff": _run_ids_diff,
    "hs-check": _run_hs_check,
    "ct-decay": _run_ct_decay,
    "gap-prob": _run_gap_prob,
    "theta-bounds": _run_theta_bounds,
    "msa-schedule": _run_msa_schedule,
    "m-regularity": _run_m_regularity,
}


def _make_run_dir(root: Path, digest: str) -> Path:
    stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    base = f"{digest[:12]}-{stamp}"
    path = root / base
    suffix = 0
    while path.exists():
        suffix += 1
        path = root / f"{base}-{suffix}"
    path.mkdir(parents=True)
    return path


def run(config: dict, out_root: str | None = None) -> ResultEnvelope:
    """Validate, execute, and persist one experiment.

    Raises ConfigError before touching the filesystem; any failure
    after the run directory exists leaves a FAILED marker next to the
    partial output.  Returns the envelope that was written to
    result.json.
    """
    resolved = resolve_config(config)
    model = build_model(resolved)
    digest = config_hash(resolved)
    kind = resolved["experiment"]["kind"]
    execution = resolved["execution"]

    root = Path(out_root if out_root is not None else execution["output_dir"])
    directory = _make_run_dir(root, digest)
    started = time.perf_counter()
    try:
        with open(directory / "resolved_config.yaml", "w", encoding="utf-8") as fh:
            yaml.safe_dump(resolved, fh, sort_keys=True)
        sink = OutputSink(directory, {"config": digest, "kind": kind,
                                      "version": VERSION})
        mapper = parallel_map(execution["threads"])
        summary, check = _DISPATCH[kind](
            model, resolved["experiment"], execution, sink, mapper
        )
    except Exception as exc:
        (directory / "FAILED").write_text(
            f"{type(exc).__name__}: {exc}\n", encoding="utf-8"
        )
        raise

    envelope = ResultEnvelope(
        kind=kind,
        config_hash=digest,
        version=VERSION,
        wall_time_s=time.perf_counter() - started,
        directory=str(directory),
        payloads=sink.payloads,
        summary=summary,
        check=check,
    )
    body = json.dumps(_jsonable(asdict(envelope)), sort_keys=True, indent=2)
    (directory / "result.json").write_text(body + "\n", encoding="ascii")
    return envelope
