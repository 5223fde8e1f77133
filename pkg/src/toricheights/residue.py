"""Flags of singular hyperplanes, polyhedra, Jacobian minor tests and residual functions.

Conventions
-----------
* Points of ``M_C`` are written in coordinates ``z`` = values on the saturated basis of
  the invariant lattice ``N``; ``zeta = 2 pi i z`` keeps all formulas rational.
* Each ray ``e`` of the fan at the chosen place gives the hyperplane
  ``c_e . zeta + s_e = 0`` where ``c_e`` are the ``N``-coordinates of ``pi(e)`` and
  ``s_e = (1/k) * sum of the parent variables over the orbit of e``.
* A polyhedron ``Pi_sigma`` has defining basis ``v = columns of G^-1`` where the rows of
  ``G`` are the generators of ``sigma``; so the Jacobian is ``J = C_E G^-1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import sympy as sp

from .errors import PreconditionError
from .exactlin import (
    RatMatrix,
    Vector,
    det,
    inverse,
    project_pi,
    transfer_mu,
    transpose,
    vec,
)
from .fan import Cone, GaloisFan, Subfan, default_d_cones, invariant_fan, place_fan, subfan_D
from .ratfunc import RationalFunctionMV, symbols, to_sympy

__all__ = [
    "FlagContext",
    "Hyperplane",
    "Polyhedron",
    "Jacobian",
    "Minors",
    "Classification",
    "Flag",
    "RationalFunctionMV",
    "context",
    "jacobian_of",
    "classify_jacobian",
    "lu_factor",
    "enumerate_Z_sigma",
    "all_flags",
    "z_sigma_divergence",
    "terminal_point",
    "residual_function",
    "simple_residual",
    "method_applicable",
]


@dataclass(frozen=True)
class Hyperplane:
    ray: int
    form: Vector
    shift: sp.Expr
    key: tuple


@dataclass(frozen=True)
class Polyhedron:
    cone: Cone
    generators: RatMatrix
    basis: RatMatrix  # defining basis v_1..v_r, one per row


@dataclass(frozen=True)
class Jacobian:
    matrix: RatMatrix

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.matrix), len(self.matrix[0]) if self.matrix else 0


@dataclass(frozen=True)
class Minors:
    p: tuple[Fraction, ...]
    q: dict
    r: dict


@dataclass(frozen=True)
class Classification:
    stable: bool
    compatible: bool
    minors: Minors


@dataclass(frozen=True)
class Flag:
    """A flag of singular hyperplanes, with every defining subset that yields it."""

    hyperplanes: tuple[Hyperplane, ...]
    defining_subsets: tuple[tuple[int, ...], ...]
    polyhedron: Polyhedron | None = None
    jacobian: Jacobian | None = None
    stable: bool | None = None
    terminal_in_polyhedron: bool | None = None

    @property
    def rays(self) -> tuple[int, ...]:
        return self.defining_subsets[0]


class FlagContext:
    """Precomputed hyperplane data for a fan at its chosen place."""

    def __init__(self, fan: GaloisFan):
        self.fan = fan
        self.place = place_fan(fan)
        self.inv = invariant_fan(fan)
        self.r = self.inv.fan.rank
        self.rw = self.place.fan.rank
        self.s = symbols("s", len(fan.rays))
        lat = fan.lattice
        planes = []
        for e, (orbit, k) in enumerate(self.place.back_map):
            form = self.inv.subspace.coordinates(project_pi(lat, self.place.ambient_rays[e]))
            shift = sp.Add(*[self.s[i] for i in orbit]) / k
            gamma_orbit = min(fan.orbit(orbit[0]))
            planes.append(Hyperplane(e, form, shift, (form, gamma_orbit, Fraction(len(orbit), k))))
        self.hyperplanes = tuple(planes)

    @cached_property
    def invariant_substitution(self) -> dict:
        """Map every parent variable to the variable of the smallest ray in its orbit."""
        return {self.s[i]: self.s[min(self.fan.orbit(i))] for i in range(len(self.s))}

    def anticanonical(self, t=1) -> dict:
        return {v: to_sympy(t) for v in self.s}

    def forms(self, subset: Sequence[int]) -> RatMatrix:
        return tuple(self.hyperplanes[e].form for e in subset)

    def polyhedron(self, cone: Cone) -> Polyhedron:
        cone = tuple(sorted(cone))
        if cone not in self.inv.fan.max_cones:
            raise PreconditionError("NOT_A_CONE", f"{cone} is not a maximal invariant cone")
        gens = self.inv.fan.cone_vectors(cone)
        return Polyhedron(cone, gens, transpose(inverse(gens)))

    @cached_property
    def candidate_subsets(self) -> tuple[tuple[int, ...], ...]:
        """Ordered r-subsets of rays at the place that lie in a cone and have independent projections."""
        out = []
        for combo in itertools.combinations(range(len(self.hyperplanes)), self.r):
            if not self.place.fan.is_cone(combo) or det(self.forms(combo)) == 0:
                continue
            out.extend(itertools.permutations(combo))
        return tuple(sorted(out, key=lambda e: (tuple(sorted(e)), e)))

    def maximal_cones_containing(self, subset: Iterable[int]) -> tuple[Cone, ...]:
        s = set(subset)
        return tuple(c for c in self.place.fan.max_cones if s <= set(c))


@lru_cache(maxsize=64)
def context(fan: GaloisFan) -> FlagContext:
    return FlagContext(fan)


def jacobian_of(forms: Sequence[Sequence], pi: Polyhedron) -> Jacobian:
    """``J[i][j] = e_i(v_j)`` for forms given in ``N``-coordinates."""
    return Jacobian(tuple(tuple(sum((a * b for a, b in zip(vec(f), v)), Fraction(0)) for v in pi.basis) for f in forms))


def _minor(m: RatMatrix, rows: Sequence[int], cols: Sequence[int]) -> Fraction:
    return det([[m[i][j] for j in cols] for i in rows])


def minors(j: Jacobian) -> Minors:
    m = j.matrix
    k, ncols = j.shape
    p = tuple(_minor(m, range(a), range(a)) for a in range(1, k + 1))
    q = {(a, b): _minor(m, range(a), list(range(a - 1)) + [b - 1]) for a in range(1, k + 1) for b in range(a, ncols + 1)}
    r = {
        (a, b): _minor(m, [i for i in range(b) if i != a - 1], range(b - 1))
        for b in range(1, k + 1)
        for a in range(1, b + 1)
    }
    return Minors(p, q, r)


def classify_jacobian(j: Jacobian) -> Classification:
    mi = minors(j)
    k = j.shape[0]
    stable = all(x > 0 for x in mi.p) and all(
        (-1) ** (b - a) * mi.r[(a, b)] >= 0 for b in range(1, k + 1) for a in range(1, b)
    )
    compatible = (not stable) or all(mi.q[(a, b)] <= 0 for b in range(1, k + 1) for a in range(1, b))
    return Classification(stable, compatible, mi)


def lu_factor(m: RatMatrix) -> tuple[RatMatrix, RatMatrix]:
    """Doolittle factorisation ``m = L U`` without pivoting; needs all leading minors nonzero."""
    n = len(m)
    lower = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    upper = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            upper[i][j] = m[i][j] - sum((lower[i][t] * upper[t][j] for t in range(i)), Fraction(0))
        if upper[i][i] == 0:
            raise PreconditionError("NOT_BTB", f"leading principal minor {i + 1} vanishes")
        for j in range(i + 1, n):
            lower[j][i] = (m[j][i] - sum((lower[j][t] * upper[t][i] for t in range(i)), Fraction(0))) / upper[i][i]
    return tuple(map(tuple, lower)), tuple(map(tuple, upper))


@dataclass(frozen=True)
class TerminalPoint:
    """``zeta`` is ``2 pi i`` times the point, as linear expressions in the parent variables."""

    zeta: tuple[sp.Expr, ...]

    def z(self, values: dict) -> tuple[complex, ...]:
        import math

        return tuple(complex(x.subs(values)) / (2j * math.pi) for x in self.zeta)


def terminal_point(fan: GaloisFan, subset: Sequence[int], m_xi: Sequence | None = None) -> TerminalPoint:
    """Point where the hyperplanes of ``subset`` meet, computed through the transfer map.

    ``m_xi`` (values on the basis of the place lattice) twists the point by ``-mu_E(m_xi)``;
    it is given in the same ``2 pi i``-scaled units as the result.
    """
    ctx = context(fan)
    cones = ctx.maximal_cones_containing(subset)
    if not cones:
        raise PreconditionError("NOT_CONVEX", f"no cone contains {tuple(subset)}")
    tau = cones[0]
    rays = ctx.place.fan.cone_vectors(tau)  # place-lattice coordinates
    tinv = inverse(rays)
    values = [-ctx.hyperplanes[e].shift for e in tau]
    # linear form on the place lattice agreeing with phi on tau, as values on its basis
    phi = [sp.Add(*[to_sympy(tinv[i][j]) * values[j] for j in range(len(tau))]) for i in range(len(tau))]
    mu = transfer_mu(fan.lattice, fan.place, [ctx.place.ambient_rays[e] for e in subset])
    if m_xi is not None:
        phi = [a - to_sympy(b) for a, b in zip(phi, vec(m_xi))]
    zeta = tuple(sp.expand(sp.Add(*[to_sympy(mu[i][j]) * phi[j] for j in range(len(phi))])) for i in range(len(mu)))
    return TerminalPoint(zeta)


def _solve_terminal(ctx: FlagContext, subset: Sequence[int]) -> tuple[sp.Expr, ...]:
    cinv = inverse(ctx.forms(subset))
    rhs = [-ctx.hyperplanes[e].shift for e in subset]
    return tuple(sp.Add(*[to_sympy(cinv[i][j]) * rhs[j] for j in range(len(rhs))]) for i in range(len(rhs)))


def simple_residual(fan: GaloisFan, subset: Sequence[int], m_xi_shift: Sequence | None = None) -> sp.Expr:
    """Residual function of a single defining subset (simple terminal point)."""
    ctx = context(fan)
    zeta = _solve_terminal(ctx, subset)
    if m_xi_shift is not None:
        zeta = tuple(a + to_sympy(b) for a, b in zip(zeta, m_xi_shift))
    weight = to_sympy(Fraction(1) / abs(det(ctx.forms(subset))))
    total = sp.Integer(0)
    for tau in ctx.maximal_cones_containing(subset):
        idx = int(ctx.place.fan.index(tau))
        term = sp.Integer(idx) * weight
        for e in tau:
            if e in subset:
                continue
            h = ctx.hyperplanes[e]
            term /= h.shift + sp.Add(*[to_sympy(c) * z for c, z in zip(h.form, zeta)])
        total += term
    return total


def enumerate_Z_sigma(fan: GaloisFan, sigma: Cone, s_values: dict | None = None) -> list[Flag]:
    """Stable flags for ``Pi_sigma``, merged when their hyperplane sequences agree under invariance.

    Every returned flag also records whether its terminal point lies in ``Pi_sigma``
    (evaluated at ``s_values``, default anticanonical) so the two readings can be compared.
    """
    return [f for f in all_flags(fan, sigma, s_values) if f.stable]


def all_flags(fan: GaloisFan, sigma: Cone, s_values: dict | None = None) -> list[Flag]:
    ctx = context(fan)
    pi = ctx.polyhedron(sigma)
    s_values = ctx.anticanonical() if s_values is None else s_values
    groups: dict[tuple, list[tuple[int, ...]]] = {}
    for subset in ctx.candidate_subsets:
        key = tuple(ctx.hyperplanes[e].key for e in subset)
        groups.setdefault(key, []).append(subset)
    gens = pi.generators
    out = []
    for key, subsets in groups.items():
        first = subsets[0]
        jac = jacobian_of(ctx.forms(first), pi)
        stable = classify_jacobian(jac).stable
        zeta = _solve_terminal(ctx, first)
        zval = [sp.Rational(sp.nsimplify(x.subs(s_values))) for x in zeta]
        inside = all(sum((to_sympy(g_i) * z for g_i, z in zip(g, zval)), sp.Integer(0)) <= 0 for g in gens)
        out.append(
            Flag(tuple(ctx.hyperplanes[e] for e in first), tuple(subsets), pi, jac, stable, bool(inside))
        )
    out.sort(key=lambda f: (tuple(sorted(f.rays)), f.rays))
    return out


def z_sigma_divergence(fan: GaloisFan, sigma: Cone) -> list[Flag]:
    """Flags on which the stability cut and the terminal-point test disagree."""
    return [f for f in all_flags(fan, sigma) if f.stable != f.terminal_in_polyhedron]


def residual_function(fan: GaloisFan, flag: Flag | Sequence[int], invariant: bool = False) -> RationalFunctionMV:
    """Residual rational function of a flag in the parent variables ``s0, s1, ...``.

    Flags with several defining subsets are summed before any specialisation, which
    realises the limit along converging simple flags.  ``invariant=True`` then imposes
    equal variables along each orbit.
    """
    ctx = context(fan)
    if not isinstance(flag, Flag):
        subset = tuple(flag)
        key = tuple(ctx.hyperplanes[e].key for e in subset)
        subsets = [e for e in ctx.candidate_subsets if tuple(ctx.hyperplanes[i].key for i in e) == key]
        if subset not in subsets:
            raise PreconditionError("NOT_CONVEX", f"{subset} is not a convex independent subset")
        flag = Flag(tuple(ctx.hyperplanes[e] for e in subset), tuple(subsets))
    for subset in flag.defining_subsets:
        if flag.polyhedron is not None:
            jac = jacobian_of(ctx.forms(subset), flag.polyhedron)
            if any(x == 0 for x in minors(jac).p):
                raise PreconditionError("NOT_BTB", f"Jacobian of {subset} has a vanishing leading minor")
    expr = sp.cancel(sp.together(sp.Add(*[simple_residual(fan, e) for e in flag.defining_subsets])))
    if invariant:
        expr = sp.cancel(expr.subs(ctx.invariant_substitution, simultaneous=True))
    return RationalFunctionMV(expr, ctx.s)


@dataclass(frozen=True)
class Applicability:
    applicable: bool
    witness: tuple | None = None
    checked: int = 0
    jacobians: tuple = field(default=(), repr=False)


def method_applicable(fan: GaloisFan, subfan: Subfan | None = None) -> Applicability:
    """Check compatibility of every convex independent ordered subset with every polyhedron of the subfan."""
    ctx = context(fan)
    if subfan is None:
        subfan = subfan_D(ctx.inv, default_d_cones(fan))
    cones = [c for c in subfan.max_cones if len(c) == ctx.r]
    seen = []
    count = 0
    for sigma in cones:
        pi = ctx.polyhedron(sigma)
        for subset in ctx.candidate_subsets:
            jac = jacobian_of(ctx.forms(subset), pi)
            count += 1
            seen.append(jac.matrix)
            if not classify_jacobian(jac).compatible:
                return Applicability(False, (sigma, subset, jac.matrix), count, tuple(seen))
    return Applicability(True, None, count, tuple(seen))
