"""Command-line entry point: ``explab <command> [options]``.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 not found or
budget exhausted. Every JSON report embeds the options that produced it.
"""

from __future__ import annotations

import functools
import hashlib
import sys

import click

from explab import _io
from explab._parallel import resolve_threads
from explab.classify import classify_parameter
from explab.derivatives import LEDGER_COLUMNS, build_ledger, levin_estimate
from explab.hyperbolic import NotFound, find_hyperbolic_near
from explab.measure import density_scan
from explab.motion import (
    BudgetExceeded, distortion_report, time_to_scale, track_point, verify_conjugacy,
    write_distortion_csv,
)
from explab.orbit import EscapePolicy, Param, ParamError, singular_orbit
from explab.render import (
    ViewRect, ppm_bytes, render_dynamical_plane, render_parameter_plane, write_atomic,
)

EXIT_RUNTIME = 1
EXIT_NOT_FOUND = 3


def _fmt(x: float) -> str:
    return repr(float(x))


class ComplexType(click.ParamType):
    """A complex number written "re,im"."""

    name = "re,im"

    def __init__(self, nonzero: bool = False):
        self.nonzero = nonzero

    def convert(self, value, param, ctx):
        if isinstance(value, complex):
            z = value
        else:
            parts = str(value).split(",")
            if len(parts) != 2:
                self.fail(f"expected 're,im', got {value!r}", param, ctx)
            try:
                z = complex(float(parts[0]), float(parts[1]))
            except ValueError:
                self.fail(f"not a number pair: {value!r}", param, ctx)
        if self.nonzero:
            try:
                Param(z)
            except ParamError as exc:
                self.fail(str(exc), param, ctx)
        return z


class ListType(click.ParamType):
    name = "list"

    def __init__(self, item=float):
        self.item = item

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            return list(value)
        try:
            return [self.item(v) for v in str(value).split(",") if v]
        except ValueError:
            self.fail(f"bad list {value!r}", param, ctx)


class RectType(click.ParamType):
    name = "re_min,re_max,im_min,im_max"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            vals = tuple(float(v) for v in str(value).split(","))
        except ValueError:
            self.fail(f"bad rectangle {value!r}", param, ctx)
        if len(vals) != 4:
            self.fail("rectangle needs four numbers", param, ctx)
        return vals


class SizeType(click.ParamType):
    name = "WxH"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            w, h = (int(v) for v in str(value).lower().split("x"))
        except ValueError:
            self.fail(f"bad size {value!r}", param, ctx)
        if w < 1 or h < 1:
            self.fail("size must be at least 1x1", param, ctx)
        return w, h


LAMBDA = ComplexType(nonzero=True)
POINT = ComplexType()


def _serialize(value):
    if isinstance(value, complex):
        return f"{_fmt(value.real)},{_fmt(value.imag)}"
    if isinstance(value, float):
        return _fmt(value)
    if isinstance(value, tuple) and len(value) == 2 and all(isinstance(v, int) for v in value):
        return f"{value[0]}x{value[1]}"
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) if isinstance(v, float) else str(v) for v in value)
    return value


def run_config(ctx: click.Context) -> dict:
    """The resolved options of the running command keyed by option name, re-parseable."""
    names = {p.name: p.opts[0].lstrip("-") for p in ctx.command.params if p.opts}
    return {names[k]: _serialize(v) for k, v in ctx.params.items() if v is not None}


def args_from_config(command: str, config: dict) -> list[str]:
    """Command-line arguments that reproduce a run from its embedded config."""
    argv = [command]
    for key, value in config.items():
        flag = "--" + key
        if value is True:
            argv.append(flag)
        elif value is False:
            continue
        else:
            argv += [flag, str(value)]
    return argv


def _emit(command: str, result: dict, out: str | None) -> None:
    report = _io.envelope(command, run_config(click.get_current_context()), result)
    if out:
        _io.write_json(out, report)
    else:
        click.echo(_io.dumps(report), nl=False)


def _guarded(fn):
    """Map library failures onto exit codes 3 (not found / budget) and 1 (anything else)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (click.exceptions.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except (NotFound, BudgetExceeded) as exc:
            click.echo(f"explab: {exc}", err=True)
            sys.exit(EXIT_NOT_FOUND)
        except Exception as exc:  # noqa: BLE001
            click.echo(f"explab: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def _threads_option(f):
    return click.option("--threads", type=int, default=None,
                        help="Worker threads (default $EXPLAB_THREADS, then CPU count).")(f)


@click.group()
def main():
    """Numerical experiments for the exponential family f(z) = lambda * exp(z)."""


@main.command()
@click.option("--lambda", "lam", type=LAMBDA, required=True)
@click.option("--iters", type=int, default=100, show_default=True)
@click.option("--threshold", type=float, default=50.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="JSON report path.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Derivative ledger CSV path.")
@_guarded
def orbit(lam, iters, threshold, out, csv_path):
    """Singular orbit and derivative ledger."""
    if iters < 1:
        raise click.BadParameter("must be >= 1", param_hint="--iters")
    policy = EscapePolicy(re_threshold=threshold, max_iter=iters)
    record = singular_orbit(lam, policy)
    ledger = build_ledger(lam, policy)
    est = levin_estimate(ledger)
    if csv_path:
        ledger.write_csv(csv_path)
    result = {
        "orbit": record.to_json(),
        "ledger": {
            "columns": list(LEDGER_COLUMNS),
            "rows": ledger.rows(),
            "stop_reason": ledger.stop_reason,
            "levin": {"value": est.value, "terms_used": est.terms_used,
                      "tail_bound": est.tail_bound, "converged": est.converged,
                      "diverging": est.diverging},
        },
    }
    _emit("orbit", result, out)


@main.command()
@click.option("--lambda", "lam", type=LAMBDA, required=True)
@click.option("--budget", type=int, default=1000, show_default=True)
@click.option("--threshold", type=float, default=50.0, show_default=True)
@click.option("--delta", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_guarded
def classify(lam, budget, threshold, delta, out):
    """Budgeted classification of one parameter."""
    cls = classify_parameter(lam, EscapePolicy(re_threshold=threshold, max_iter=budget), delta)
    _emit("classify", cls.to_json(), out)


@main.command("find-hyp")
@click.option("--seed-lambda", "lam", type=LAMBDA, required=True)
@click.option("--radius", type=float, required=True)
@click.option("--strategy", type=click.Choice(["auto", "scan", "route"]), default="auto",
              show_default=True)
@click.option("--samples", type=int, default=1024, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--budget", type=int, default=500, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_guarded
def find_hyp(lam, radius, strategy, samples, seed, budget, out):
    """Certified hyperbolic parameter within --radius of --seed-lambda."""
    if not radius > 0:
        raise click.BadParameter("must be positive", param_hint="--radius")
    w = find_hyperbolic_near(lam, radius, EscapePolicy(max_iter=budget), strategy, samples, seed)
    _emit("find-hyp", w.to_json(), out)


@main.command()
@click.option("--lambda0", "lam", type=LAMBDA, required=True)
@click.option("--delta", type=float, default=1.0, show_default=True)
@click.option("--radii", type=ListType(float), default="0.01", show_default=True)
@click.option("--budgets", type=ListType(int), default="20,40,80", show_default=True)
@click.option("--samples", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threshold", type=float, default=50.0, show_default=True)
@click.option("--include-center", is_flag=True, help="Use lambda0 itself as sample 0.")
@_threads_option
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Candidate-fraction matrix (rows radii, columns budgets).")
@_guarded
def density(lam, delta, radii, budgets, samples, seed, threshold, include_center, threads,
            out, csv_path):
    """Seeded density scan of classification outcomes."""
    if samples < 1:
        raise click.BadParameter("must be >= 1", param_hint="--samples")
    rep = density_scan(lam, delta, radii, budgets, samples, seed,
                       EscapePolicy(re_threshold=threshold), resolve_threads(threads),
                       include_center)
    if csv_path:
        rep.write_csv(csv_path)
    _emit("density", rep.to_json(), out)


@main.command()
@click.option("--lambda0", "lam0", type=LAMBDA, required=True)
@click.option("--lambda1", "lam1", type=LAMBDA, required=True)
@click.option("--point", type=POINT, default=None,
              help="Base point (default: zeta_1 = lambda0).")
@click.option("--depth", type=int, default=30, show_default=True)
@click.option("--steps", type=int, default=8, show_default=True)
@click.option("--verify", is_flag=True, help="Also recompute the conjugacy residual.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_guarded
def motion(lam0, lam1, point, depth, steps, verify, out):
    """Track an orbit point of lambda0 to lambda1."""
    t = track_point(lam0, lam1, lam0 if point is None else point, depth, steps)
    result = t.to_json()
    if verify:
        result["verified_residual"] = verify_conjugacy(t)
    _emit("motion", result, out)


@main.command()
@click.option("--lambda0", "lam0", type=LAMBDA, required=True)
@click.option("--radii", type=ListType(float), default="0.001,0.0001,1e-05", show_default=True)
@click.option("--n", "n", type=int, default=None,
              help="Orbit index (default: time to reach --scale, per radius).")
@click.option("--scale", type=float, default=0.25, show_default=True)
@click.option("--pairs", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--delta", type=float, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None)
@_guarded
def distortion(lam0, radii, n, scale, pairs, seed, delta, out, csv_path):
    """Distortion of the parameter derivative over small disks."""
    stats = []
    for r in radii:
        k = n if n is not None else time_to_scale(lam0, r, scale)
        stats.append(distortion_report(lam0, r, k, pairs, seed, delta))
    if csv_path:
        write_distortion_csv(stats, csv_path)
    _emit("distortion", {"lambda0": lam0, "stats": [s.to_json() for s in stats]}, out)


@main.command("time-to-scale")
@click.option("--lambda0", "lam0", type=LAMBDA, required=True)
@click.option("--radius", type=float, required=True)
@click.option("--scale", type=float, default=0.25, show_default=True)
@click.option("--max-iter", type=int, default=200, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_guarded
def time_to_scale_cmd(lam0, radius, scale, max_iter, out):
    """Iterations until a parameter disk's orbit image reaches diameter --scale."""
    if not (radius > 0 and scale > 0):
        raise click.BadParameter("--radius and --scale must be positive")
    k = time_to_scale(lam0, radius, scale, max_iter)
    _emit("time-to-scale", {"lambda0": lam0, "radius": radius, "scale": scale, "n": k}, out)


@main.command()
@click.option("--plane", type=click.Choice(["parameter", "dynamical"]), default="parameter",
              show_default=True)
@click.option("--lambda", "lam", type=LAMBDA, default=None, help="Required for --plane dynamical.")
@click.option("--rect", type=RectType(), default="-4,4,-4,4", show_default=True)
@click.option("--size", type=SizeType(), default="800x800", show_default=True)
@click.option("--budget", type=int, default=200, show_default=True)
@click.option("--threshold", type=float, default=50.0, show_default=True)
@click.option("--delta", type=float, default=1.0, show_default=True)
@_threads_option
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="PPM output path.")
@click.option("--report", type=click.Path(dir_okay=False), default=None,
              help="JSON report path (default: stdout).")
@_guarded
def render(plane, lam, rect, size, budget, threshold, delta, threads, out, report):
    """Render the parameter plane or a dynamical plane to a binary PPM."""
    try:
        view = ViewRect(*rect, *size)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--rect/--size") from None
    policy = EscapePolicy(re_threshold=threshold, max_iter=budget)
    n = resolve_threads(threads)
    if plane == "parameter":
        img = render_parameter_plane(view, policy, delta, threads=n)
    else:
        if lam is None:
            raise click.BadParameter("required with --plane dynamical", param_hint="--lambda")
        img = render_dynamical_plane(lam, view, policy, threads=n)
    data = ppm_bytes(img)
    write_atomic(out, data)
    _emit("render", {"plane": plane, "rect": view.to_json(), "path": out,
                     "sha256": hashlib.sha256(data).hexdigest()}, report)


if __name__ == "__main__":
    main()
