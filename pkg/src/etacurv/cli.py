"""Command-line entry point.

One subcommand per pipeline: ``solve-surface`` runs the continuity-method
solve on a radial graph, ``solve-flat`` runs the Euclidean Dirichlet
problem, and the ``oracle`` group exposes the brute-force symmetric
function utilities for debugging. Reports are deterministic JSON (sorted
keys, floats at 17 significant digits) and every artifact is written
atomically (temp file + rename).

Exit codes: 0 converged, 2 configuration error, 3 precondition failed,
4 Newton or continuation failure.
"""

import json
import math
import os
import sys
import tempfile

import click
import numpy as np

from . import flatcase, geometry, solver, symm, verify
from .errors import (ConeExit, ConfigError, ContinuationStuck,
                     NewtonDiverged, PreconditionError)
from .newton import NewtonConfig

__all__ = ["main", "json_text", "atomic_write_text", "load_config"]


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt_float(x):
    if not math.isfinite(x):
        return "null"
    return "{:.17g}".format(x)


def _json_parts(obj, out):
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _json_parts(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _json_parts(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def json_text(obj):
    """Deterministic JSON: sorted keys, 17-significant-digit floats."""
    out = []
    _json_parts(obj, out)
    return "".join(out)


def atomic_write_text(path, text):
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# configuration


def _apply_override(cfg, spec):
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} is not of the form key=value")
    path, raw = spec.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = path.split(".")
    cur = cfg
    for part in parts[:-1]:
        cur = cur.setdefault(part, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"override path '{path}' crosses a non-object")
    cur[parts[-1]] = value


def load_config(path, overrides=()):
    """Parse the JSON run configuration and apply dot-path overrides."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for spec in overrides:
        _apply_override(cfg, spec)
    return cfg


_TYPES = {
    float: (int, float),
    int: (int,),
    str: (str,),
    list: (list,),
    dict: (dict,),
}


def _get(cfg, path, typ, required=True, default=None):
    cur = cfg
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if required:
                raise ConfigError(f"missing required key '{path}'")
            return default
        cur = cur[part]
    if isinstance(cur, bool) or not isinstance(cur, _TYPES[typ]):
        raise ConfigError(f"key '{path}' must be of type {typ.__name__}")
    return typ(cur) if typ in (float, int) else cur


def _newton_config(cfg):
    return NewtonConfig(
        tol=_get(cfg, "newton.tol", float, required=False, default=1e-10),
        max_iter=_get(cfg, "newton.max_iter", int, required=False,
                      default=40),
        jacobian=_get(cfg, "newton.jacobian", str, required=False,
                      default="analytic"),
        form=_get(cfg, "newton.form", str, required=False, default="raw"),
    )


# ---------------------------------------------------------------------------
# builtin right-hand sides


def build_surface_f(spec):
    """Callable f(X, nu) from the builtin catalog entry in the config."""
    name = _get(spec, "builtin", str)

    if name == "power_decay":
        c = _get(spec, "c", float)
        p = _get(spec, "p", float)
        if c <= 0:
            raise ConfigError("key 'f.c' must be positive")
        return lambda x, nu: c * np.linalg.norm(x, axis=-1) ** (-p)

    if name == "aniso_power":
        c = _get(spec, "c", float)
        p = _get(spec, "p", float)
        delta = _get(spec, "delta", float)
        axis = _get(spec, "axis", int, required=False, default=-1)
        if not abs(delta) < 1.0:
            raise ConfigError("key 'f.delta' must satisfy |delta| < 1")
        return lambda x, nu: (c * (1.0 + delta * nu[..., axis])
                              * np.linalg.norm(x, axis=-1) ** (-p))

    if name == "constant":
        value = _get(spec, "value", float)
        if value <= 0:
            raise ConfigError("key 'f.value' must be positive")
        return lambda x, nu: np.full(x.shape[:-1], value)

    if name == "tabulated":
        radii = np.asarray(_get(spec, "r", list), dtype=float)
        values = np.asarray(_get(spec, "values", list), dtype=float)
        if radii.size != values.size or radii.size < 2:
            raise ConfigError("key 'f.r' and 'f.values' must be equal-length "
                              "tables with at least two entries")
        if np.any(np.diff(radii) <= 0):
            raise ConfigError("key 'f.r' must be strictly increasing")
        if np.any(values <= 0):
            raise ConfigError("key 'f.values' must be positive")
        return lambda x, nu: np.interp(
            np.linalg.norm(x, axis=-1), radii, values)

    raise ConfigError(f"key 'f.builtin': unknown surface builtin {name!r}")


def build_flat_f(spec):
    """Callable f(x, phi, grad phi) from the flat builtin catalog."""
    name = _get(spec, "builtin", str)

    if name == "constant":
        value = _get(spec, "value", float)
        if value <= 0:
            raise ConfigError("key 'f.value' must be positive")
        return lambda x, phi, grad: np.full(x.shape[0], value)

    if name == "grad_sq":
        c0 = _get(spec, "c0", float, required=False, default=1.0)
        c1 = _get(spec, "c1", float, required=False, default=1.0)
        if c0 <= 0 or c1 < 0:
            raise ConfigError("key 'f.c0' must be positive and 'f.c1' "
                              "nonnegative")
        return lambda x, phi, grad: (
            c0 + c1 * np.einsum("ni,ni->n", grad, grad))

    if name == "tabulated":
        radii = np.asarray(_get(spec, "r", list), dtype=float)
        values = np.asarray(_get(spec, "values", list), dtype=float)
        if radii.size != values.size or radii.size < 2:
            raise ConfigError("key 'f.r' and 'f.values' must be equal-length "
                              "tables with at least two entries")
        if np.any(np.diff(radii) <= 0):
            raise ConfigError("key 'f.r' must be strictly increasing")
        if np.any(values <= 0):
            raise ConfigError("key 'f.values' must be positive")
        return lambda x, phi, grad: np.interp(
            np.linalg.norm(x, axis=-1), radii, values)

    raise ConfigError(f"key 'f.builtin': unknown flat builtin {name!r}")


# ---------------------------------------------------------------------------
# command plumbing


def _set_threads(n):
    """Best-effort thread cap for the numeric backends."""
    if n <= 0:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        pass


def _emit_error(outdir, exc, code, extra=None):
    payload = {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": code,
    }
    if extra:
        payload.update(extra)
    atomic_write_text(os.path.join(outdir, "error.json"),
                      json_text(payload) + "\n")
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="JSON run configuration")(fn)
    fn = click.option("--out", "outdir", default="out", show_default=True,
                      type=click.Path(), help="artifact directory")(fn)
    fn = click.option("--override", "overrides", multiple=True,
                      metavar="KEY=VALUE",
                      help="dot-path config override, repeatable")(fn)
    fn = click.option("--threads", default=0, show_default=True,
                      help="thread cap for numeric backends (0 = auto)")(fn)
    return fn


@click.group()
def main():
    """Numerical laboratory for the equation sigma_k(lambda(eta)) = f."""


@main.command("solve-surface")
@_common_options
def cmd_solve_surface(config_path, outdir, overrides, threads):
    """Continuity-method solve of the curved problem; writes trace,
    surface CSV, and report JSON."""
    _set_threads(threads)
    try:
        cfg = load_config(config_path, overrides)
        n = _get(cfg, "n", int)
        k = _get(cfg, "k", int)
        if n < 2:
            raise ConfigError("key 'n' must be at least 2")
        if not 1 <= k <= n:
            raise ConfigError(f"key 'k' must lie in [1, n] = [1, {n}]")
        mode = _get(cfg, "grid.mode", str)
        sizes = _get(cfg, "grid.sizes", list)
        fcall = build_surface_f(_get(cfg, "f", dict))
        data = solver.PrescribedData(
            f=fcall, r1=_get(cfg, "r1", float), r2=_get(cfg, "r2", float))
        run = solver.HomotopyRun(
            epsilon=_get(cfg, "epsilon", float, required=False,
                         default=0.01),
            dt0=_get(cfg, "t_schedule.dt0", float, required=False,
                     default=0.1),
            dt_min=_get(cfg, "t_schedule.dt_min", float, required=False,
                        default=1e-4),
            dt_max=_get(cfg, "t_schedule.dt_max", float, required=False,
                        default=0.5),
            newton=_newton_config(cfg),
        )
        seed = _get(cfg, "seed", int, required=False, default=0)
        grid = geometry.build_grid(n, mode, sizes)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)

    conditions = solver.validate_conditions(data, n, k)
    if not conditions.passed:
        exc = PreconditionError(
            "barrier/monotonicity conditions failed")
        _emit_error(outdir, exc, 3,
                    extra={"conditions": conditions.as_dict()})

    try:
        rho, run = solver.continue_to_target(grid, data, run, k)
    except PreconditionError as exc:
        _emit_error(outdir, exc, 3,
                    extra={"conditions": conditions.as_dict()})
    except (ContinuationStuck, NewtonDiverged, ConeExit) as exc:
        trace = getattr(exc, "trace", None)
        if trace is not None:
            atomic_write_text(
                os.path.join(outdir, "trace.jsonl"),
                "".join(json_text(rec) + "\n" for rec in trace))
        _emit_error(outdir, exc, 4)

    jet = geometry.surface_jet(grid, rho)
    data1 = solver.homotopy_f(data, n, k, run.epsilon, 1.0)
    monitors = verify.estimate_report(jet, data1, k,
                                      A=run.monitor_A,
                                      alpha=run.monitor_alpha)
    report = {
        "config": cfg,
        "seed": seed,
        "converged": True,
        "conditions": conditions.as_dict(),
        "nonunique": conditions.zero_margin,
        "accepted_steps": len(run.trace),
        "final_t": run.trace[-1]["t"],
        "final_max_residual": run.trace[-1]["max_residual"],
        "monitors": monitors,
    }
    atomic_write_text(os.path.join(outdir, "trace.jsonl"),
                      "".join(json_text(rec) + "\n" for rec in run.trace))
    atomic_write_text(os.path.join(outdir, "surface.csv"),
                      geometry.surface_csv_text(jet, k))
    atomic_write_text(os.path.join(outdir, "report.json"),
                      json_text(report) + "\n")
    click.echo(f"converged in {len(run.trace)} accepted steps; "
               f"report in {outdir}/report.json")
    sys.exit(0)


@main.command("solve-flat")
@_common_options
def cmd_solve_flat(config_path, outdir, overrides, threads):
    """Dirichlet solve of the flat problem; writes flat CSV and report."""
    _set_threads(threads)
    try:
        cfg = load_config(config_path, overrides)
        n = _get(cfg, "n", int)
        k = _get(cfg, "k", int)
        if n < 2:
            raise ConfigError("key 'n' must be at least 2")
        if not 1 <= k <= n:
            raise ConfigError(f"key 'k' must lie in [1, n] = [1, {n}]")
        shape = _get(cfg, "grid.shape", str, required=False, default="ball")
        h = _get(cfg, "grid.h", float)
        radius = _get(cfg, "grid.radius", float, required=False, default=1.0)
        bounds = _get(cfg, "grid.bounds", list, required=False, default=None)
        beta = _get(cfg, "beta", float, required=False, default=4.0)
        fcall = build_flat_f(_get(cfg, "f", dict))
        ncfg = _newton_config(cfg)
        seed = _get(cfg, "seed", int, required=False, default=0)
        if shape not in ("ball", "rect"):
            raise ConfigError("key 'grid.shape' must be 'ball' or 'rect'")
        grid = flatcase.build_flat_grid(n, shape=shape, h=h, radius=radius,
                                        bounds=bounds)
    except (ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)

    try:
        state, rep = flatcase.dirichlet_solve(grid, fcall, k, config=ncfg,
                                              beta=beta)
    except PreconditionError as exc:
        _emit_error(outdir, exc, 3)
    except (NewtonDiverged, ConeExit) as exc:
        _emit_error(outdir, exc, 4)

    res = flatcase.flat_residual(state, fcall, k)
    report = {
        "config": cfg,
        "seed": seed,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "final_max_residual": rep.final_residual,
        "pogorelov": flatcase.pogorelov_monitor(state),
        "pogorelov_beta": beta,
        "phi_min": float(state.phi.min()),
        "phi_max": float(state.phi.max()),
        "interior_negative": bool(state.phi.max() < 0.0),
        "max_hessian_norm": float(np.abs(state.hess).max()),
    }
    atomic_write_text(os.path.join(outdir, "flat.csv"),
                      flatcase.flat_csv_text(state, res))
    atomic_write_text(os.path.join(outdir, "report.json"),
                      json_text(report) + "\n")
    click.echo(f"converged in {rep.iterations} iterations; "
               f"report in {outdir}/report.json")
    sys.exit(0)


# ---------------------------------------------------------------------------
# oracle utilities


@main.group()
def oracle():
    """Brute-force symmetric function utilities for debugging."""


def _parse_values(tokens):
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise click.UsageError(str(exc))
    if len(vals) < 2:
        raise click.UsageError("need at least two eigenvalues")
    if len(vals) > 12:
        raise click.UsageError("enumeration oracle limited to n <= 12")
    return np.asarray(vals)


@oracle.command("sigma",
                context_settings={"ignore_unknown_options": True})
@click.argument("values", nargs=-1, required=True)
@click.option("--m", type=int, required=True, help="order of sigma_m")
def oracle_sigma(values, m):
    """sigma_m by explicit subset enumeration."""
    lam = _parse_values(values)
    if not 0 <= m <= lam.size:
        raise click.UsageError(f"--m must lie in [0, {lam.size}]")
    click.echo(_fmt_float(symm.sigma_brute(lam, m)))


@oracle.command("cone",
                context_settings={"ignore_unknown_options": True})
@click.argument("values", nargs=-1, required=True)
@click.option("--k", type=int, required=True, help="cone order")
def oracle_cone(values, k):
    """Gamma_k membership verdict by enumeration."""
    lam = _parse_values(values)
    if not 1 <= k <= lam.size:
        raise click.UsageError(f"--k must lie in [1, {lam.size}]")
    inside = all(symm.sigma_brute(lam, j) > 0.0 for j in range(1, k + 1))
    click.echo("inside" if inside else "outside")


@oracle.command("coeffs",
                context_settings={"ignore_unknown_options": True})
@click.argument("values", nargs=-1, required=True)
@click.option("--k", type=int, required=True, help="operator order")
@click.option("--step", type=float, default=1e-5, show_default=True,
              help="finite difference step scale")
def oracle_coeffs(values, k, step):
    """G = sigma_k^(1/k) with gradient and Hessian by central differences."""
    lam = _parse_values(values)
    n = lam.size
    if not 1 <= k <= n:
        raise click.UsageError(f"--k must lie in [1, {n}]")
    inside = all(symm.sigma_brute(lam, j) > 0.0 for j in range(1, k + 1))
    if not inside:
        raise click.UsageError("point is outside Gamma_k")

    def g(v):
        return symm.sigma_brute(v, k) ** (1.0 / k)

    hs = step * (1.0 + np.abs(lam))
    grad = np.empty(n)
    hess = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hs[i]
        grad[i] = (g(lam + ei) - g(lam - ei)) / (2.0 * hs[i])
        for j in range(n):
            ej = np.zeros(n)
            ej[j] = hs[j]
            hess[i, j] = (g(lam + ei + ej) - g(lam + ei - ej)
                          - g(lam - ei + ej) + g(lam - ei - ej)) \
                / (4.0 * hs[i] * hs[j])

    click.echo(f"G = {_fmt_float(g(lam))}")
    click.echo("grad = " + " ".join(_fmt_float(v) for v in grad))
    for i in range(n):
        click.echo("hess = " + " ".join(_fmt_float(v) for v in hess[i]))


if __name__ == "__main__":
    main()
