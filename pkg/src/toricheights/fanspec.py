"""JSON fan-spec reader and writer.

Grammar (one JSON object)::

    {
      "name": str,                          optional
      "rank": int,
      "lattice_basis": [[rat, ...], ...],   optional, ambient basis vectors (default: standard)
      "rays": [[rat, ...], ...],            ambient coordinates
      "max_cones": [[int, ...], ...],
      "group": [{"matrix": [[rat, ...], ...], "perm": [int, ...]}, ...],
      "boundary_rays": [int, ...],
      "place": [int, ...],                  optional, group indices of the decomposition subgroup
      "s": [rat, ...],                      optional, one value per ray
      "d_cones": [[[rat, ...], ...], ...]   optional, D-cones as lists of ambient ray vectors
    }

``rat`` is an integer or a ``"p/q"`` string; floats are rejected.  Group matrices act
on ambient column vectors and the first listed element must be the identity (an
empty ``group`` means the trivial group).  ``perm`` is optional and checked against
the permutation induced on ``rays``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from .errors import PreconditionError, SpecParseError
from .exactlin import LatticeWithAction, identity, to_rat
from .fan import GaloisFan


def _rat(value: Any, where: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise SpecParseError(f"{where}: floats are not allowed, use 'p/q' strings")
    try:
        return to_rat(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise SpecParseError(f"{where}: cannot read {value!r} as a rational") from exc


def _vector(values: Any, length: int, where: str) -> tuple[Fraction, ...]:
    if not isinstance(values, list) or len(values) != length:
        raise SpecParseError(f"{where}: expected a list of {length} rationals")
    return tuple(_rat(v, f"{where}[{i}]") for i, v in enumerate(values))


def _ints(values: Any, where: str) -> tuple[int, ...]:
    if not isinstance(values, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
        raise SpecParseError(f"{where}: expected a list of integers")
    return tuple(values)


def format_rat(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_spec(doc: dict) -> tuple[GaloisFan, tuple[Fraction, ...] | None]:
    """Build a fan (and the optional ``s`` vector) from a decoded spec document."""
    if not isinstance(doc, dict):
        raise SpecParseError("spec must be a JSON object")
    for key in ("rank", "rays", "max_cones"):
        if key not in doc:
            raise SpecParseError(f"missing field {key!r}")
    n = doc["rank"]
    if not isinstance(n, int) or n < 0:
        raise SpecParseError("rank must be a nonnegative integer")
    rays = tuple(_vector(r, n, f"rays[{i}]") for i, r in enumerate(doc["rays"]))
    cones = tuple(_ints(c, f"max_cones[{i}]") for i, c in enumerate(doc["max_cones"]))
    basis = (
        tuple(_vector(b, n, f"lattice_basis[{i}]") for i, b in enumerate(doc["lattice_basis"]))
        if "lattice_basis" in doc
        else identity(n)
    )
    group = doc.get("group", [])
    if not isinstance(group, list):
        raise SpecParseError("group must be a list")
    mats, perms = [], []
    for i, g in enumerate(group):
        if not isinstance(g, dict) or "matrix" not in g:
            raise SpecParseError(f"group[{i}] needs a 'matrix'")
        if not isinstance(g["matrix"], list) or len(g["matrix"]) != n:
            raise SpecParseError(f"group[{i}].matrix must have {n} rows")
        mats.append(tuple(_vector(row, n, f"group[{i}].matrix") for row in g["matrix"]))
        perms.append(_ints(g["perm"], f"group[{i}].perm") if "perm" in g else None)
    if mats and mats[0] != identity(n):
        raise SpecParseError("the first group element must be the identity")
    try:
        lat = LatticeWithAction.from_ambient(basis, mats or [identity(n)])
        if len(lat.group) != max(len(mats), 1):
            raise SpecParseError("group elements must be distinct")
        declared = None
        if mats and all(p is not None for p in perms):
            declared = tuple(perms)
        d_cones = None
        if "d_cones" in doc:
            d_cones = tuple(
                tuple(_vector(v, n, f"d_cones[{i}]") for v in cone) for i, cone in enumerate(doc["d_cones"])
            )
        fan = GaloisFan(
            lat,
            rays,
            cones,
            boundary_rays=_ints(doc.get("boundary_rays", []), "boundary_rays"),
            place=_ints(doc.get("place", [0]), "place"),
            ray_permutations=declared,
            d_cones=d_cones,
            name=str(doc.get("name", "")),
        )
    except PreconditionError as exc:
        raise SpecParseError(str(exc)) from exc
    if any(g >= lat.order or g < 0 for g in fan.place):
        raise SpecParseError("place refers to a missing group element")
    s = _vector(doc["s"], len(rays), "s") if "s" in doc else None
    return fan, s


def spec_to_dict(fan: GaloisFan, s=None) -> dict:
    n = fan.rank
    out: dict[str, Any] = {}
    if fan.name:
        out["name"] = fan.name
    out["rank"] = n
    if fan.lattice.basis != identity(n):
        out["lattice_basis"] = [[format_rat(x) for x in b] for b in fan.lattice.basis]
    out["rays"] = [[format_rat(x) for x in r] for r in fan.rays]
    out["max_cones"] = [list(c) for c in fan.max_cones]
    out["group"] = [
        {"matrix": [[format_rat(x) for x in row] for row in g], "perm": list(p)}
        for g, p in zip(fan.lattice.ambient_group(), fan.ray_permutations)
    ]
    out["boundary_rays"] = list(fan.boundary_rays)
    out["place"] = list(fan.place)
    if s is not None:
        out["s"] = [format_rat(x) for x in s]
    if fan.d_cones is not None:
        out["d_cones"] = [[[format_rat(x) for x in v] for v in cone] for cone in fan.d_cones]
    return out


def _compact(value: Any, indent: int = 0) -> str:
    """JSON with one line per innermost list, so matrices and vectors stay readable."""
    pad = "  " * (indent + 1)
    if isinstance(value, dict):
        items = [f"{pad}{json.dumps(k)}: {_compact(v, indent + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(value, list) and any(isinstance(v, (list, dict)) for v in value):
        items = [pad + _compact(v, indent + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    return json.dumps(value)


def dumps(fan: GaloisFan, s=None) -> str:
    return _compact(spec_to_dict(fan, s)) + "\n"


def loads(text: str) -> tuple[GaloisFan, tuple[Fraction, ...] | None]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"invalid JSON: {exc}") from exc
    return parse_spec(doc)


def load(path: str | Path) -> tuple[GaloisFan, tuple[Fraction, ...] | None]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecParseError(f"cannot read {path}: {exc}") from exc
    return loads(text)
