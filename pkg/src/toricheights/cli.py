"""Command-line interface.  Every command prints one JSON report.

Exit codes: 0 success, 1 internal invariant failure, 2 unreadable fan spec or bad
usage, 3 precondition violation.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
import time
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any

import click
import sympy as sp

from . import arith, cyclicfan, fanspec, periods, residue
from .errors import InvariantError, PreconditionError, SpecParseError
from .fan import Cone, convexity_class, default_d_cones, invariant_fan, restricted_fan, validate_fan
from .ratfunc import RationalFunctionMV

_OUTPUT_OPTION = click.option("--output", type=click.Path(dir_okay=False), default=None, help="Also write the report here.")


def jsonable(value: Any) -> Any:
    """Exact rationals become "p/q", complex numbers [re, im], containers lists or dicts."""
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, Fraction):
        return fanspec.format_rat(value)
    if isinstance(value, float):
        return value
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, RationalFunctionMV):
        return str(value)
    if isinstance(value, sp.Basic):
        return sp.sstr(value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: jsonable(getattr(value, f.name)) for f in dataclasses.fields(value) if f.repr}
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "item"):
        return jsonable(value.item())
    return str(value)


class Report:
    def __init__(self, ctx: click.Context, parameters: dict, input_files: tuple[str, ...] = ()):
        self.command = ctx.command_path.split(" ", 1)[1] if " " in ctx.command_path else ctx.command_path
        self.parameters = {k: v for k, v in parameters.items() if k != "output"}
        self.inputs = list(input_files)
        self.output = parameters.get("output")
        self.start = time.perf_counter()

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.command.encode())
        h.update(json.dumps(jsonable(self.parameters), sort_keys=True).encode())
        for path in self.inputs:
            h.update(Path(path).read_bytes())
        return h.hexdigest()

    def emit(self, outputs: dict) -> None:
        doc = {
            "command": self.command,
            "inputs": self.inputs,
            "inputs_digest": self.digest(),
            "parameters": jsonable(self.parameters),
            "outputs": jsonable(outputs),
            "wall_time": round(time.perf_counter() - self.start, 6),
        }
        text = json.dumps(doc, indent=2) + "\n"
        click.echo(text, nl=False)
        if self.output:
            Path(self.output).write_text(text)


def _indices(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from exc


def _rats(text: str | None) -> tuple[Fraction, ...] | None:
    if text is None:
        return None
    try:
        return tuple(Fraction(x) for x in text.split(","))
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated rationals, got {text!r}") from exc


def _default_sigma(fan) -> Cone:
    cones = [c for c in default_d_cones(fan) if len(c) == invariant_fan(fan).fan.rank]
    if not cones:
        raise PreconditionError("NOT_A_CONE", "the fan has no full-dimensional D-cone")
    return cones[0]


@click.group()
def cli() -> None:
    """Exact toric height-zeta tools."""


# fan -------------------------------------------------------------------------

@cli.group()
def fan() -> None:
    """Fan validation and restriction."""


@fan.command("validate")
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@_OUTPUT_OPTION
@click.pass_context
def fan_validate(ctx, spec, output):
    rep = Report(ctx, ctx.params, (spec,))
    f, _ = fanspec.load(spec)
    result = validate_fan(f)
    rep.emit({"ok": result.ok, **jsonable(result)})


@fan.command("restrict")
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@click.option("--subgroup", default=None, help="Comma-separated group indices (default: the whole group).")
@click.option("--write", "write_path", type=click.Path(dir_okay=False), default=None, help="Write the restricted fan spec.")
@_OUTPUT_OPTION
@click.pass_context
def fan_restrict(ctx, spec, subgroup, write_path, output):
    rep = Report(ctx, ctx.params, (spec,))
    f, _ = fanspec.load(spec)
    sub = _indices(subgroup)
    res = restricted_fan(f, range(f.lattice.order) if sub is None else sub)
    text = fanspec.dumps(res.fan)
    if write_path:
        Path(write_path).write_text(text)
    rep.emit(
        {
            "rays": res.fan.rays,
            "ambient_rays": res.ambient_rays,
            "k": [k for _, k in res.back_map],
            "orbits": [o for o, _ in res.back_map],
            "max_cones": res.fan.max_cones,
            "spec": json.loads(text),
        }
    )


@fan.command("convexity")
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@_OUTPUT_OPTION
@click.pass_context
def fan_convexity(ctx, spec, output):
    rep = Report(ctx, ctx.params, (spec,))
    f, _ = fanspec.load(spec)
    rep.emit({"convexity": convexity_class(f)})


# residue ---------------------------------------------------------------------

@cli.group("residue")
def residue_group() -> None:
    """Flags, residual functions and applicability."""


def _flag_summary(f, flag: residue.Flag) -> dict:
    return {
        "rays": flag.rays,
        "defining_subsets": flag.defining_subsets,
        "jacobian": flag.jacobian.matrix if flag.jacobian else None,
        "stable": flag.stable,
        "terminal_in_polyhedron": flag.terminal_in_polyhedron,
        "residual": residue.residual_function(f, flag),
    }


@residue_group.command("flags")
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@click.option("--sigma", default=None, help="Maximal invariant cone as comma-separated ray indices.")
@click.option("--all", "show_all", is_flag=True, help="Include unstable flags.")
@_OUTPUT_OPTION
@click.pass_context
def residue_flags(ctx, spec, sigma, show_all, output):
    rep = Report(ctx, ctx.params, (spec,))
    f, _ = fanspec.load(spec)
    cone = _indices(sigma) or _default_sigma(f)
    flags = residue.all_flags(f, cone) if show_all else residue.enumerate_Z_sigma(f, cone)
    rep.emit({"sigma": cone, "count": len(flags), "flags": [_flag_summary(f, fl) for fl in flags]})


@residue_group.command("rfun")
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@click.option("--flag", "flag_text", default=None, help="Ordered place rays defining the flag (default: every flag of Z_sigma).")
@click.option("--sigma", default=None, help="Maximal invariant cone (default: first D-cone).")
@click.option("--invariant", is_flag=True, help="Identify the variables along each orbit.")
@_OUTPUT_OPTION
@click.pass_context
def residue_rfun(ctx, spec, flag_text, sigma, invariant, output):
    rep = Report(ctx, ctx.params, (spec,))
    f, _ = fanspec.load(spec)
    subset = _indices(flag_text)
    if subset:
        funcs = [residue.residual_function(f, subset, invariant=invariant)]
        cone = None
    else:
        cone = _indices(sigma) or _default_sigma(f)
        funcs = [residue.residual_function(f, fl, invariant=invariant) for fl in residue.enumerate_Z_sigma(f, cone)]
    total = RationalFunctionMV(sp.Add(*[g.expr() for g in funcs]), funcs[0].gens) if funcs else None
    rep.emit({"sigma": cone, "flags": len(funcs), "function": total, "functions": funcs})


@residue_group.command("applicable")
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@_OUTPUT_OPTION
@click.pass_context
def residue_applicable(ctx, spec, output):
    rep = Report(ctx, ctx.params, (spec,))
    f, _ = fanspec.load(spec)
    res = residue.method_applicable(f)
    rep.emit({"applicable": res.applicable, "checked": res.checked, "witness": res.witness})


# period ----------------------------------------------------------------------

@cli.command("period")
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@click.option("--sigma", default=None, help="Maximal invariant cone (default: first D-cone).")
@click.option("--s-base", default=None, help="Comma-separated base point (default: the spec's s, else all ones).")
@_OUTPUT_OPTION
@click.pass_context
def period_cmd(ctx, spec, sigma, s_base, output):
    rep = Report(ctx, ctx.params, (spec,))
    f, s_spec = fanspec.load(spec)
    base = _rats(s_base) or s_spec or tuple(Fraction(1) for _ in f.rays)
    cone = _indices(sigma) or _default_sigma(f)
    per_flag = []
    for fl in residue.enumerate_Z_sigma(f, cone):
        per_flag.append({"rays": fl.rays, "integral": periods.rho_integral(f, residue.residual_function(f, fl), base)})
    rep.emit({"sigma": cone, "s_base": base, "flags": per_flag, "period": sum(x["integral"] for x in per_flag)})


# quadratic example -----------------------------------------------------------

@cli.group()
def sb() -> None:
    """Height zeta function of the quadratic Severi-Brauer example."""


@sb.command("zeta")
@click.option("--d", "d", type=int, required=True)
@click.option("--s", "s", type=float, required=True)
@click.option("--kmax", type=int, default=25, show_default=True)
@click.option("--norms", type=int, default=10**4, show_default=True)
@click.option("--brute-x", type=int, default=None, help="Also evaluate the lattice-box sum up to this height.")
@_OUTPUT_OPTION
@click.pass_context
def sb_zeta(ctx, d, s, kmax, norms, brute_x, output):
    rep = Report(ctx, ctx.params)
    field = arith.RealQuadraticField(d)
    out = {
        "regulator": field.regulator,
        "class_number": field.class_number,
        "zeta": arith.zeta_sb_rhs(field, s, kmax, norms),
    }
    if brute_x is not None:
        out["brute"] = arith.brute_zeta_sb(field, s, brute_x)
    rep.emit(out)


@sb.command("count")
@click.option("--d", "d", type=int, required=True)
@click.option("--X", "x", type=float, required=True)
@click.option("--explicit", is_flag=True, help="Use the explicit formula instead of enumeration.")
@click.option("--kmax", type=int, default=30, show_default=True)
@_OUTPUT_OPTION
@click.pass_context
def sb_count(ctx, d, x, explicit, kmax, output):
    rep = Report(ctx, ctx.params)
    field = arith.RealQuadraticField(d)
    if explicit:
        rep.emit(
            {
                "explicit": arith.explicit_count_sb(field, x, kmax),
                "main_term": arith.explicit_count_sb(field, x, 0, main_only=True),
            }
        )
    else:
        if x != int(x):
            raise PreconditionError("DOMAIN", "enumeration needs an integer X")
        rep.emit({"count": arith.brute_count_sb(field, int(x))})


@sb.command("brute")
@click.option("--d", "d", type=int, required=True)
@click.option("--X", "x", type=int, required=True)
@click.option("--s", "s", type=float, default=None, help="Also accumulate max(|a|,|a'|)^-s.")
@_OUTPUT_OPTION
@click.pass_context
def sb_brute(ctx, d, x, s, output):
    rep = Report(ctx, ctx.params)
    field = arith.RealQuadraticField(d)
    out: dict[str, Any] = {"count": arith.brute_count_sb(field, x)}
    if s is not None:
        out["zeta"] = arith.brute_zeta_sb(field, s, x)
    rep.emit(out)


# cyclic family ---------------------------------------------------------------

@cli.group()
def cyclic() -> None:
    """Quotients of projective space by a cyclic group."""


@cyclic.command("build")
@click.option("--n", "n", type=int, required=True)
@click.option("--write", "write_path", type=click.Path(dir_okay=False), default=None, help="Write the fan spec.")
@_OUTPUT_OPTION
@click.pass_context
def cyclic_build(ctx, n, write_path, output):
    rep = Report(ctx, ctx.params)
    data = cyclicfan.build_cyclic_fan(n)
    if write_path:
        Path(write_path).write_text(fanspec.dumps(data.fan))
    rank, guess = cyclicfan.real_place_rank(data)
    rep.emit(
        {
            "lattice_basis": data.fan.lattice.basis,
            "omega": data.omega,
            "rays": data.fan.rays,
            "orbits": {d: data.orbit(d) for d in data.divisors},
            "f_generators": data.f_generators,
            "omega_projection": cyclicfan.omega_projection(data),
            "valid": validate_fan(data.fan).ok,
            "real_place_rank": rank,
            "real_place_rank_formula": guess,
        }
    )


@cyclic.command("compat")
@click.option("--n", "n", type=int, required=True)
@click.option("--generators", type=click.Choice(["orbit_sum", "primitive"]), default="orbit_sum", show_default=True)
@click.option("--place-check", is_flag=True, help="Also classify every ordered set of real-place rays.")
@_OUTPUT_OPTION
@click.pass_context
def cyclic_compat(ctx, n, generators, place_check, output):
    rep = Report(ctx, ctx.params)
    data = cyclicfan.build_cyclic_fan(n)
    tables = cyclicfan.compat_tables(data, data.real_place if place_check else None, generators)
    rep.emit(
        {
            "verdict": "all compatible" if tables.all_compatible else "incompatible",
            "count": len(tables.entries),
            "place_checks": tables.place_checks,
            "tables": [
                {"sigma": e.sigma, "j": e.j, "matrix": e.matrix, "stable": e.classification.stable, "compatible": e.classification.compatible}
                for e in tables.entries
            ],
        }
    )


@cyclic.command("qp")
@click.option("--n", "n", type=int, required=True)
@click.option("--p", "p", type=int, required=True)
@click.option("--u", "u", type=complex, default=1.0, show_default=True)
@_OUTPUT_OPTION
@click.pass_context
def cyclic_qp(ctx, n, p, u, output):
    rep = Report(ctx, ctx.params)
    data = cyclicfan.build_cyclic_fan(n)
    group = cyclicfan.decomposition_group(n, p)
    rep.emit(
        {
            "decomposition_group": group,
            "delta_points": cyclicfan.delta_points(data, group),
            "symbolic": cyclicfan.qp_factor_symbolic(data, group),
            "value": cyclicfan.qp_factor(data, group, p, u),
        }
    )


@cyclic.command("kappa")
@click.option("--n", "n", type=int, required=True)
@click.option("--pbound", type=int, default=10**4, show_default=True)
@_OUTPUT_OPTION
@click.pass_context
def cyclic_kappa(ctx, n, pbound, output):
    rep = Report(ctx, ctx.params)
    data = cyclicfan.build_cyclic_fan(n)
    kd = {d: cyclicfan.kappa_d(n, d) for d in data.divisors}
    k0 = cyclicfan.kappa_0_partial(n, pbound)
    rep.emit(
        {
            "kappa_d": {d: {**jsonable(k), "counts_agree": k.counts_agree, "value_proof": k.value_proof} for d, k in kd.items()},
            "kappa_d_sum": sum(k.value for k in kd.values()),
            "kappa_0": {**jsonable(k0), "log_difference": k0.log_difference},
        }
    )


@cyclic.command("brute3")
@click.option("--H", "h", type=int, required=True)
@_OUTPUT_OPTION
@click.pass_context
def cyclic_brute3(ctx, h, output):
    rep = Report(ctx, ctx.params)
    counts = cyclicfan.cyclic_cubic_counts(h)
    rep.emit({"cyclic": counts.cyclic, "normal": counts.normal})


# entry point -----------------------------------------------------------------

def _fail(code: int, kind: str, exc: BaseException) -> int:
    err = {"type": kind, "message": str(exc)}
    if isinstance(exc, PreconditionError):
        err["code"] = exc.code
    click.echo(json.dumps({"error": err}, indent=2), err=True)
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="toricheights", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.Abort:
        return 1
    except SpecParseError as exc:
        return _fail(2, "SpecParseError", exc)
    except PreconditionError as exc:
        return _fail(3, "PreconditionError", exc)
    except (InvariantError, AssertionError) as exc:
        return _fail(1, "InvariantError", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
