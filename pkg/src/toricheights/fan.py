"""Simplicial fans with a ray-permuting lattice action."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import PreconditionError
from .exactlin import (
    LatticeWithAction,
    Subspace,
    Vector,
    invariants_basis,
    is_integral,
    lattice_index,
    matvec,
    primitive_integer,
    project_pi,
    rank,
    solve_in_span,
    vec,
)

Cone = tuple[int, ...]


class Convexity(str, Enum):
    NOT_CONVEX = "NOT_CONVEX"
    CONVEX = "CONVEX"
    STRONGLY_CONVEX = "STRONGLY_CONVEX"


@dataclass(frozen=True)
class GaloisFan:
    """A simplicial fan stored by its maximal cones.

    ``place`` lists the group indices of the decomposition subgroup at the chosen
    place.  ``d_cones``, when given, overrides the default choice of maximal cones
    of the invariant fan used for the integral subfan.
    """

    lattice: LatticeWithAction
    rays: tuple[Vector, ...]
    max_cones: tuple[Cone, ...]
    boundary_rays: tuple[int, ...] = ()
    place: tuple[int, ...] = (0,)
    ray_permutations: tuple[tuple[int, ...], ...] | None = None
    d_cones: tuple[tuple[Vector, ...], ...] | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rays", tuple(vec(r) for r in self.rays))
        object.__setattr__(self, "max_cones", tuple(sorted(tuple(sorted(c)) for c in self.max_cones)))
        object.__setattr__(self, "boundary_rays", tuple(sorted(self.boundary_rays)))
        object.__setattr__(self, "place", tuple(sorted(set(self.place) | {0})))
        for r in self.rays:
            if len(r) != self.rank:
                raise PreconditionError("DIMENSION_MISMATCH", f"ray {r} has wrong length")
        for c in self.max_cones:
            if any(i < 0 or i >= len(self.rays) for i in c):
                raise PreconditionError("DOMAIN", f"cone {c} uses unknown rays")
        if self.ray_permutations is None:
            object.__setattr__(self, "ray_permutations", self._induced_permutations())

    @property
    def rank(self) -> int:
        return self.lattice.rank

    def _induced_permutations(self) -> tuple[tuple[int, ...], ...]:
        lookup = {r: i for i, r in enumerate(self.rays)}
        perms = []
        for g in self.lattice.ambient_group():
            images = [lookup.get(matvec(g, r)) for r in self.rays]
            if any(i is None for i in images):
                raise PreconditionError("DOMAIN", "group action does not permute the rays")
            perms.append(tuple(images))
        return tuple(perms)

    @cached_property
    def cones(self) -> tuple[Cone, ...]:
        """All cones (faces of maximal cones), including the zero cone, sorted."""
        out = set()
        for c in self.max_cones:
            for k in range(len(c) + 1):
                out.update(itertools.combinations(c, k))
        return tuple(sorted(out, key=lambda c: (len(c), c)))

    def cones_of_dim(self, k: int) -> tuple[Cone, ...]:
        return tuple(c for c in self.cones if len(c) == k)

    def cone_vectors(self, cone: Iterable[int]) -> tuple[Vector, ...]:
        return tuple(self.rays[i] for i in cone)

    def orbit(self, ray: int, subgroup: Iterable[int] | None = None) -> tuple[int, ...]:
        idx = range(self.lattice.order) if subgroup is None else subgroup
        return tuple(sorted({self.ray_permutations[g][ray] for g in idx}))

    def orbits(self, subgroup: Iterable[int] | None = None) -> tuple[tuple[int, ...], ...]:
        subgroup = None if subgroup is None else tuple(subgroup)
        seen, out = set(), []
        for i in range(len(self.rays)):
            if i not in seen:
                o = self.orbit(i, subgroup)
                seen.update(o)
                out.append(o)
        return tuple(out)

    def is_cone(self, rays: Iterable[int]) -> bool:
        s = set(rays)
        return any(s <= set(c) for c in self.max_cones)

    def index(self, cone: Iterable[int]) -> int | float:
        return lattice_index(self.lattice, self.cone_vectors(cone))


@dataclass(frozen=True)
class FanReport:
    simplicial: bool
    faces_closed: bool
    complete: bool
    action_ok: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.simplicial and self.faces_closed and self.complete and self.action_ok


def _improper_overlap(fan: GaloisFan, a: Cone, b: Cone) -> bool:
    """True if the cones meet outside the cone spanned by their common rays (LP feasibility)."""
    extra = [i for i in a if i not in b]
    if not extra:
        return False
    ra = np.array([[float(x) for x in fan.rays[i]] for i in a]).T
    rb = np.array([[float(x) for x in fan.rays[i]] for i in b]).T
    na, nb = ra.shape[1], rb.shape[1]
    cost = np.zeros(na + nb)
    for j, i in enumerate(a):
        if i in extra:
            cost[j] = -1.0
    a_eq = np.hstack([ra, -rb])
    a_ub = np.zeros((1, na + nb))
    a_ub[0, :na] = 1.0
    res = linprog(cost, A_ub=a_ub, b_ub=[1.0], A_eq=a_eq, b_eq=np.zeros(fan.rank), bounds=(0, None), method="highs")
    return res.status == 0 and -res.fun > 1e-9


def validate_fan(fan: GaloisFan) -> FanReport:
    wit: dict = {}
    simplicial = True
    for c in fan.max_cones:
        if rank(fan.cone_vectors(c)) != len(c):
            simplicial = False
            wit.setdefault("simplicial", c)
    faces_closed = True
    for a, b in itertools.combinations(fan.max_cones, 2):
        if _improper_overlap(fan, a, b) or _improper_overlap(fan, b, a):
            faces_closed = False
            wit.setdefault("faces_closed", (a, b))
    complete = all(len(c) == fan.rank for c in fan.max_cones) and bool(fan.max_cones)
    if not complete:
        wit["complete"] = next((c for c in fan.max_cones if len(c) != fan.rank), ())
    else:
        counts: dict[Cone, int] = {}
        for c in fan.max_cones:
            for facet in itertools.combinations(c, fan.rank - 1):
                counts[facet] = counts.get(facet, 0) + 1
        bad = [f for f, k in sorted(counts.items()) if k != 2]
        if bad:
            complete = False
            wit["complete"] = bad[0]
    action_ok = True
    try:
        induced = fan._induced_permutations()
        if induced != tuple(tuple(p) for p in fan.ray_permutations):
            action_ok = False
            wit["action_ok"] = "declared permutations differ from the induced ones"
        maxset = set(fan.max_cones)
        for p in induced:
            for c in fan.max_cones:
                if tuple(sorted(p[i] for i in c)) not in maxset:
                    action_ok = False
                    wit.setdefault("action_ok", c)
    except PreconditionError as exc:
        action_ok = False
        wit["action_ok"] = str(exc)
    for i, r in enumerate(fan.rays):
        c = fan.lattice.coordinates(r)
        if not is_integral(c) or primitive_integer(c)[1] != 1:
            simplicial = False
            wit.setdefault("simplicial", f"ray {i} is not a primitive lattice vector")
    return FanReport(simplicial, faces_closed, complete, action_ok, wit)


@dataclass(frozen=True)
class SupportFunction:
    """The piecewise linear function with value ``-s[e]`` on each ray generator."""

    fan: GaloisFan
    s: tuple

    def is_invariant(self) -> bool:
        return all(self.s[p[i]] == self.s[i] for p in self.fan.ray_permutations for i in range(len(self.s)))

    def __call__(self, v: Sequence):
        return support_eval(self, v)


def containing_cone(fan: GaloisFan, v: Sequence) -> tuple[Cone, Vector]:
    """A maximal cone containing ``v`` with the nonnegative coefficients of ``v`` on its rays."""
    v = vec(v)
    for c in fan.max_cones:
        coeffs = solve_in_span(fan.cone_vectors(c), v)
        if coeffs is not None and all(x >= 0 for x in coeffs):
            return c, coeffs
    raise PreconditionError("OUTSIDE_SUPPORT", f"{v} is not in the support of the fan")


def support_eval(phi: SupportFunction, v: Sequence):
    cone, coeffs = containing_cone(phi.fan, v)
    return -sum((a * phi.s[i] for a, i in zip(coeffs, cone)), Fraction(0))


def sigma_convex(fan: GaloisFan, rays: Iterable) -> bool:
    """Whether the given rays (indices or generator vectors) lie in a common cone."""
    idx = set()
    lookup = {r: i for i, r in enumerate(fan.rays)}
    for r in rays:
        if isinstance(r, int):
            idx.add(r)
        else:
            key = vec(r)
            if key not in lookup:
                return False
            idx.add(lookup[key])
    return fan.is_cone(idx)


@dataclass(frozen=True)
class RestrictedFan:
    """Fan of a subgroup's fixed space.

    ``fan`` is expressed in coordinates of ``subspace.basis`` (a saturated basis of the
    fixed sublattice).  ``back_map[i] = (orbit, k)`` records the parent rays whose sum is
    ``k`` times restricted ray ``i``; ``ambient_rays`` are the same rays in parent coordinates.
    """

    fan: GaloisFan
    parent: GaloisFan
    subgroup: tuple[int, ...]
    subspace: Subspace
    back_map: tuple[tuple[tuple[int, ...], int], ...]
    ambient_rays: tuple[Vector, ...]
    parent_cones: tuple[Cone, ...]

    def parent_cone(self, cone: Iterable[int]) -> Cone:
        """The smallest stable parent cone whose fixed part is the given restricted cone."""
        return tuple(sorted(i for r in cone for i in self.back_map[r][0]))

    def cone_ambient(self, cone: Iterable[int]) -> tuple[Vector, ...]:
        return tuple(self.ambient_rays[i] for i in cone)

    def ray_of(self, parent_ray: int) -> int | None:
        for j, (orbit, _) in enumerate(self.back_map):
            if parent_ray in orbit:
                return j
        return None


def restricted_fan(fan: GaloisFan, subgroup: Iterable[int]) -> RestrictedFan:
    sub = tuple(sorted(set(subgroup) | {0}))
    space = invariants_basis(fan.lattice, sub)
    orbits = [o for o in fan.orbits(sub) if fan.is_cone(o)]
    orbits.sort(key=min)
    back, coords, ambient = [], [], []
    for o in orbits:
        total = tuple(sum((fan.rays[i][k] for i in o), Fraction(0)) for k in range(fan.rank))
        c = space.coordinates(total)
        prim, k = primitive_integer(c)
        if k.denominator != 1:
            raise PreconditionError("DOMAIN", "orbit sum is not integral in the fixed lattice")
        back.append((o, int(k)))
        coords.append(tuple(Fraction(x) for x in prim))
        ambient.append(tuple(x / k for x in total))
    ray_of = {i: j for j, (o, _) in enumerate(back) for i in o}
    stable = []
    for c in fan.cones:
        cs = set(c)
        if all(set(p[i] for i in c) == cs for g, p in enumerate(fan.ray_permutations) if g in sub):
            if all(i in ray_of for i in c):
                stable.append(tuple(sorted({ray_of[i] for i in c})))
    stable_set = set(stable)
    maximal = sorted(c for c in stable_set if not any(set(c) < set(d) for d in stable_set))
    # residual action: group elements preserving the fixed space, in its coordinates
    mats = []
    for g in fan.lattice.ambient_group():
        cols = []
        for b in space.basis:
            img = space.coordinates(matvec(g, b))
            if img is None:
                break
            cols.append(img)
        else:
            m = tuple(tuple(int(cols[j][i]) for j in range(len(cols))) for i in range(len(cols)))
            mats.append(m)
    dim = space.dim
    lat = LatticeWithAction.standard(dim, dict.fromkeys(mats)) if dim else LatticeWithAction.standard(0)
    boundary = tuple(j for j, (o, _) in enumerate(back) if set(o) <= set(fan.boundary_rays))
    child = GaloisFan(lat, tuple(coords), tuple(maximal), boundary, (0,), name=f"{fan.name}|fixed")
    parent_cones = tuple(tuple(sorted(i for r in c for i in back[r][0])) for c in child.max_cones)
    return RestrictedFan(child, fan, sub, space, tuple(back), tuple(ambient), parent_cones)


def invariant_fan(fan: GaloisFan) -> RestrictedFan:
    return restricted_fan(fan, range(fan.lattice.order))


def place_fan(fan: GaloisFan) -> RestrictedFan:
    return restricted_fan(fan, fan.place)


def _projected_convex(inv: RestrictedFan, vectors: Sequence[Vector]) -> bool:
    for c in inv.fan.max_cones:
        gens = inv.cone_ambient(c)
        ok = True
        for v in vectors:
            coeffs = solve_in_span(gens, v)
            if coeffs is None or any(x < 0 for x in coeffs):
                ok = False
                break
        if ok:
            return True
    return False


def convexity_class(fan: GaloisFan) -> Convexity:
    if not all(fan.is_cone(o) for o in fan.orbits()):
        return Convexity.NOT_CONVEX
    inv = invariant_fan(fan)
    pw = place_fan(fan)
    r = inv.fan.rank
    for subset in itertools.combinations(range(len(pw.ambient_rays)), r):
        if not pw.fan.is_cone(subset):
            continue
        images = [project_pi(fan.lattice, pw.ambient_rays[i]) for i in subset]
        if rank(images) < r:
            continue
        if not _projected_convex(inv, images):
            return Convexity.CONVEX
    return Convexity.STRONGLY_CONVEX


@dataclass(frozen=True)
class Subfan:
    cones: tuple[Cone, ...]
    max_cones: tuple[Cone, ...]


def subfan_D(inv: RestrictedFan | GaloisFan, targets: Iterable[Iterable[int]]) -> Subfan:
    """Smallest face-closed subfan containing the target cones (given as ray-index sets)."""
    f = inv.fan if isinstance(inv, RestrictedFan) else inv
    cones = set()
    tops = set()
    for t in targets:
        t = tuple(sorted(t))
        if not f.is_cone(t):
            raise PreconditionError("NOT_A_CONE", f"{t} is not a cone of the fan")
        tops.add(t)
        for k in range(len(t) + 1):
            cones.update(itertools.combinations(t, k))
    cones.add(())
    maximal = tuple(sorted(c for c in tops if not any(set(c) < set(d) for d in tops)))
    return Subfan(tuple(sorted(cones, key=lambda c: (len(c), c))), maximal)


def default_d_cones(fan: GaloisFan) -> tuple[Cone, ...]:
    """Maximal invariant cones meeting the boundary, unless the fan declares its own."""
    inv = invariant_fan(fan)
    if fan.d_cones is not None:
        lookup = {r: i for i, r in enumerate(inv.fan.rays)}
        out = []
        for cone in fan.d_cones:
            idx = []
            for v in cone:
                c = inv.subspace.coordinates(v)
                prim = tuple(Fraction(x) for x in primitive_integer(c)[0]) if c is not None else None
                if prim not in lookup:
                    raise PreconditionError("NOT_A_CONE", f"{v} is not a ray of the invariant fan")
                idx.append(lookup[prim])
            out.append(tuple(sorted(idx)))
        return tuple(sorted(out))
    return tuple(c for c in inv.fan.max_cones if set(c) & set(inv.fan.boundary_rays))
