"""Toric data for the quotient of projective space by a cyclic group acting through its regular representation.

Ambient coordinates are indexed by characters ``a`` in ``Z/n``; the lattice is
``Z^n + Z*omega`` with ``omega_a = ((-a) mod n) / n``.  Rays are ``v0 = -sum e_a``
(the boundary ray) followed by the primitive generators along ``e_a`` ordered by the
order of ``a`` and then by ``a``.  The Galois group ``(Z/n)^x`` acts by ``e_a -> e_{ta}``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
import sympy as sp
from sympy import primerange, totient
from sympy.ntheory import discrete_log, primitive_root

from .errors import PreconditionError
from .exactlin import (
    LatticeWithAction,
    Vector,
    add,
    lattice_from_generators,
    primitive_integer,
    project_pi,
    scale,
    solve_in_span,
    vec,
)
from .fan import GaloisFan, invariant_fan
from .residue import Classification, Jacobian, classify_jacobian, context, jacobian_of, method_applicable

log = logging.getLogger(__name__)


def _order(a: int, n: int) -> int:
    return n // math.gcd(a, n)


def _frac(x: Fraction) -> Fraction:
    return x - math.floor(x)


@dataclass(frozen=True)
class CyclicFanData:
    n: int
    fan: GaloisFan
    units: tuple[int, ...]  # (Z/n)^x in the order of the lattice group
    characters: tuple[int, ...]  # character label of parent ray i (ray 0, the boundary, has None)
    omega: Vector
    divisors: tuple[int, ...]

    @property
    def r(self) -> int:
        return len(self.divisors)

    @property
    def boundary_ray(self) -> int:
        return 0

    def unit_index(self, t: int) -> int:
        return self.units.index(t % self.n)

    @cached_property
    def real_place(self) -> tuple[int, ...]:
        return tuple(sorted({self.unit_index(1), self.unit_index(-1)}))

    def orbit(self, d: int) -> tuple[int, ...]:
        """Characters of order ``d``."""
        return tuple(a for a in range(self.n) if _order(a, self.n) == d)

    def e(self, a: int) -> Vector:
        return tuple(Fraction(int(i == a)) for i in range(self.n))

    def orbit_sum(self, d: int) -> Vector:
        total = tuple(Fraction(0) for _ in range(self.n))
        for a in self.orbit(d):
            total = add(total, self.e(a))
        return total

    @cached_property
    def f_generators(self) -> tuple[Vector, ...]:
        """Orbit sums ``f_1, ..., f_r`` ordered by divisor."""
        return tuple(self.orbit_sum(d) for d in self.divisors)

    @cached_property
    def f_primitive(self) -> tuple[Vector, ...]:
        """Primitive generators of the invariant rays, ordered by divisor."""
        inv = invariant_fan(self.fan)
        out = []
        for d in self.divisors:
            ray = inv.ray_of(self.characters.index(self.orbit(d)[0]))
            out.append(inv.ambient_rays[ray])
        return tuple(out)

    @cached_property
    def e0(self) -> Vector:
        return self.fan.rays[0]

    def f_coordinates(self, v: Sequence) -> Vector | None:
        return solve_in_span(self.f_generators, vec(v))


@lru_cache(maxsize=16)
def build_cyclic_fan(n: int, place: str = "real") -> CyclicFanData:
    """Fan of the quotient for ``2 <= n <= 8``; ``place`` is ``"real"`` or ``"split"``."""
    if not 2 <= n <= 8:
        raise PreconditionError("DOMAIN", "n must lie in 2..8")
    omega = tuple(Fraction((-a) % n, n) for a in range(n))
    ident = [tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)]
    basis = lattice_from_generators(ident + [omega], n)
    units = tuple(t for t in range(1, n) if math.gcd(t, n) == 1) if n > 1 else (1,)
    mats = []
    for t in units:
        # column a of the permutation matrix is e_{ta}
        mats.append(tuple(tuple(int((t * a) % n == b) for a in range(n)) for b in range(n)))
    lat = LatticeWithAction.from_ambient(basis, mats)
    chars = sorted(range(n), key=lambda a: (_order(a, n), a))
    raw = [tuple(Fraction(-1) for _ in range(n))] + [tuple(Fraction(int(i == a)) for i in range(n)) for a in chars]
    rays = []
    for v in raw:
        coords = lat.coordinates(v)
        _, k = primitive_integer(coords)
        rays.append(scale(1 / k, v))
    cones = [tuple(i for i in range(n + 1) if i != skip) for skip in range(n + 1)]
    divisors = tuple(sorted(sp.divisors(n)))
    data_units = tuple(units)
    fan = GaloisFan(lat, tuple(rays), tuple(cones), boundary_rays=(0,), place=(0,), name=f"cyclic{n}")
    if place == "real":
        real = tuple(sorted({data_units.index(1), data_units.index(n - 1)}))
        fan = GaloisFan(lat, tuple(rays), tuple(cones), boundary_rays=(0,), place=real, name=f"cyclic{n}")
    elif place != "split":
        raise PreconditionError("DOMAIN", f"unknown place {place!r}")
    return CyclicFanData(n, fan, data_units, (None, *chars), omega, divisors)


def omega_projection(data: CyclicFanData) -> Vector:
    return project_pi(data.fan.lattice, data.omega)


def real_place_rank(data: CyclicFanData) -> tuple[int, Fraction]:
    """Rank of the fixed lattice under complex conjugation, and the closed-form guess ``(1 + n) / 2``."""
    real = [data.units[i] for i in data.real_place]
    seen, count = set(), 0
    for a in range(data.n):
        if a not in seen:
            seen.update((t * a) % data.n for t in real)
            count += 1
    guess = Fraction(1 + sum(int(totient(d)) for d in data.divisors), 2)
    return count, guess


# regions and compatibility ---------------------------------------------------

def lambda_region(data: CyclicFanData, j: int, v: Sequence) -> bool:
    """Membership of ``v`` in ``Lambda_j`` (``j`` is 1-based, ``v`` in f-coordinates or ambient)."""
    if not 1 <= j <= data.r:
        raise PreconditionError("DOMAIN", f"j must lie in 1..{data.r}")
    v = vec(v)
    if len(v) == data.n and data.n != data.r:
        coords = data.f_coordinates(v)
        if coords is None:
            raise PreconditionError("COORDINATES", "vector is not in the span of the orbit sums")
        v = coords
    elif len(v) != data.r:
        raise PreconditionError("COORDINATES", f"expected {data.r} f-coordinates")
    b = v[j - 1]
    return b >= 0 and all(b >= x for x in v)


def sigma_cone(data: CyclicFanData, label, generators: str = "orbit_sum") -> tuple[Vector, ...]:
    """Generators of ``sigma_(j)`` (``e0`` then ``f_i`` for ``i != j``) or of ``sigma_(inf)``."""
    fs = data.f_generators if generators == "orbit_sum" else data.f_primitive
    e0 = data.e0 if generators != "orbit_sum" else scale(-1, _sum_all(data))
    if label == "inf":
        return tuple(fs)
    return (e0,) + tuple(f for i, f in enumerate(fs, start=1) if i != label)


def _sum_all(data: CyclicFanData) -> Vector:
    return tuple(Fraction(1) for _ in range(data.n))


def _dual_coordinates(basis: Sequence[Vector], v: Vector) -> Vector:
    coords = solve_in_span(basis, v)
    if coords is None:
        raise PreconditionError("COORDINATES", "vector outside the invariant span")
    return coords


@dataclass(frozen=True)
class CompatEntry:
    sigma: object
    j: int
    matrix: tuple[tuple[int, ...], ...]
    classification: Classification


@dataclass(frozen=True)
class CompatTables:
    entries: tuple[CompatEntry, ...]
    place_checks: int = 0

    @property
    def all_compatible(self) -> bool:
        return all(e.classification.compatible for e in self.entries)

    def get(self, sigma, j: int) -> tuple[tuple[int, ...], ...]:
        for e in self.entries:
            if e.sigma == sigma and e.j == j:
                return e.matrix
        raise KeyError((sigma, j))


def compat_tables(
    data: CyclicFanData,
    place: Iterable[int] | None = None,
    generators: str = "orbit_sum",
    labels: Sequence | None = None,
) -> CompatTables:
    """Jacobians of every maximal restricted cone against every polyhedron ``Pi_j``.

    ``J[k][l]`` is the ``l``-th coordinate of the ``k``-th generator of ``sigma`` in the basis
    ``sigma_(j)(1)``.  With ``place`` given, every ordered set of place rays projecting onto a
    cone is also classified against every ``Pi_j``.
    """
    if generators not in ("orbit_sum", "primitive"):
        raise PreconditionError("DOMAIN", "generators must be 'orbit_sum' or 'primitive'")
    labels = list(labels) if labels is not None else list(range(1, data.r + 1)) + ["inf"]
    entries = []
    for sigma in labels:
        rows = sigma_cone(data, sigma, generators)
        for j in range(1, data.r + 1):
            target = sigma_cone(data, j, generators)
            m = tuple(_dual_coordinates(target, v) for v in rows)
            jac = Jacobian(m)
            mat = tuple(tuple(int(x) if x.denominator == 1 else x for x in row) for row in m)
            entries.append(CompatEntry(sigma, j, mat, classify_jacobian(jac)))
    checks = 0
    if place is not None:
        fan = GaloisFan(
            data.fan.lattice, data.fan.rays, data.fan.max_cones, data.fan.boundary_rays, tuple(place), name=data.fan.name
        )
        res = method_applicable(fan)
        checks = res.checked
        if not res.applicable:
            entries.append(CompatEntry("place", 0, tuple(map(tuple, res.witness[2])), classify_jacobian(Jacobian(res.witness[2]))))
    return CompatTables(tuple(entries), checks)


# local factors ---------------------------------------------------------------

def decomposition_group(n: int, p: int) -> tuple[int, ...]:
    """Residues of the cyclic group generated by ``p`` mod ``n`` (unramified ``p`` only)."""
    if n % p == 0:
        raise PreconditionError("RAMIFIED_UNSUPPORTED", f"{p} divides {n}")
    out, x = [1 % n], p % n
    while x not in out:
        out.append(x)
        x = (x * p) % n
    return tuple(sorted(out))


def delta_points(data: CyclicFanData, subgroup: Iterable[int], ramified: bool = False) -> tuple[Vector, ...]:
    """Coset representatives ``frac(k omega)`` fixed by the given residues ``t``."""
    if ramified:
        raise PreconditionError("RAMIFIED_UNSUPPORTED", "image of the local map is unspecified at ramified primes")
    n = data.n
    subgroup = tuple(t % n for t in subgroup)
    out = []
    for k in range(n):
        # t sends frac(k omega) to frac(k t^-1 omega)
        if all((k * (t - 1)) % n == 0 for t in subgroup):
            out.append(tuple(_frac(k * x) for x in data.omega))
    return tuple(out)


def _weights(data: CyclicFanData, subgroup: Iterable[int]) -> list[Fraction]:
    """``-phi_AC / u`` at each point: the points lie in the cone of the ``e_a``, all with ``s = 1``."""
    return [sum(pt, Fraction(0)) for pt in delta_points(data, subgroup)]


def qp_factor(data: CyclicFanData, subgroup: Iterable[int], p: int, u: complex) -> complex:
    if data.n % p == 0:
        raise PreconditionError("RAMIFIED_UNSUPPORTED", f"{p} divides {data.n}")
    if complex(u).real <= 0:
        raise PreconditionError("DOMAIN", "u needs a positive real part")
    return complex(sum(p ** (-float(w) * complex(u)) for w in _weights(data, subgroup)))


def qp_factor_symbolic(data: CyclicFanData, subgroup: Iterable[int]) -> sp.Expr:
    """Exact ``Q_p`` as a sympy expression in the symbols ``p`` and ``u``."""
    p, u = sp.symbols("p u", positive=True)
    return sp.Add(*[p ** (-sp.Rational(w.numerator, w.denominator) * u) for w in _weights(data, subgroup)])


def qp_for_prime(data: CyclicFanData, p: int, u: complex = 1.0) -> complex:
    return qp_factor(data, decomposition_group(data.n, p), p, u)


# kappa -----------------------------------------------------------------------

@dataclass(frozen=True)
class KappaD:
    d: int
    value: float
    unordered_sum: Fraction
    ordered_sum: Fraction
    prefactor_theorem: float
    prefactor_proof: float
    exponent_theorem: Fraction
    exponent_proof: int

    @property
    def counts_agree(self) -> bool:
        return self.unordered_sum == self.ordered_sum

    @property
    def value_proof(self) -> float:
        return self.prefactor_proof * float(self.unordered_sum)


def kappa_d(n: int, d: int) -> KappaD:
    """Exhaustive cone enumeration at the real place for ``3 <= n <= 6``."""
    if not 3 <= n <= 6:
        raise PreconditionError("DOMAIN", "kappa_d supports 3 <= n <= 6")
    if n % d:
        raise PreconditionError("DOMAIN", f"{d} does not divide {n}")
    data = build_cyclic_fan(n, "real")
    ctx = context(data.fan)
    inv, pw = ctx.inv, ctx.place
    # sigma_(j): e0 and every invariant ray other than the j-th divisor's
    excluded = inv.ray_of(data.characters.index(data.orbit(d)[0]))
    sigma = tuple(sorted(i for i in range(len(inv.fan.rays)) if i != excluded))
    sigma_index = inv.fan.index(sigma)
    pi = ctx.polyhedron(sigma)
    proj = [inv.ray_of(pw.back_map[e][0][0]) for e in range(len(pw.fan.rays))]
    unordered, ordered = Fraction(0), Fraction(0)
    for tau in pw.fan.max_cones:
        if len(tau) != pw.fan.rank:
            continue
        ratio = Fraction(int(pw.fan.index(tau))) / Fraction(int(sigma_index))
        for combo in itertools.combinations(tau, ctx.r):
            if sorted(proj[e] for e in combo) != list(sigma):
                continue
            unordered += ratio
            for perm in itertools.permutations(combo):
                if classify_jacobian(jacobian_of(ctx.forms(perm), pi)).stable:
                    ordered += ratio
    phi_n, phi_d = int(totient(n)), int(totient(d))
    exp_thm = Fraction(1 - phi_n, 2)
    exp_proof = pw.fan.rank - ctx.r
    pre_thm = (phi_d / (2 * n)) ** float(exp_thm)
    pre_proof = (phi_d / (2 * n)) ** exp_proof
    if pre_thm != pre_proof:
        log.info("kappa_%d(n=%d): prefactor exponents differ (%s vs %s)", d, n, exp_thm, exp_proof)
    return KappaD(d, pre_thm * float(unordered), unordered, ordered, pre_thm, pre_proof, exp_thm, exp_proof)


def _primitive_characters(q: int) -> list[list[complex]]:
    """Nontrivial Dirichlet characters mod ``q`` as value tables, replaced by their primitive inducers."""
    if q <= 2:
        return []
    units = [a for a in range(1, q) if math.gcd(a, q) == 1]
    try:
        g = primitive_root(q)
    except ValueError:
        g = None
    if g is None:
        raise PreconditionError("UNSUPPORTED", f"(Z/{q})^x is not cyclic")
    m = len(units)
    logs = {a: discrete_log(q, a, g) for a in units}
    out = []
    for k in range(1, m):
        table = {a: complex(np.exp(2j * np.pi * k * logs[a] / m)) for a in units}
        f = min(c for c in sp.divisors(q) if all(abs(table[a] - 1) < 1e-12 for a in units if a % c == 1 % c))
        prim = [0j] * f
        for a in units:
            prim[a % f] = table[a]
        out.append(prim)
    return out


def _digamma_asymptotic(x: float) -> float:
    inv = 1.0 / x
    inv2 = inv * inv
    return math.log(x) - 0.5 * inv - inv2 * (1 / 12 - inv2 * (1 / 120 - inv2 / 252))


def l_value_at_one(chi: Sequence[complex], terms: int = 10**5) -> complex:
    """``L(1, chi)`` for a nontrivial character given by its table mod ``q``.

    Direct partial sum over whole periods, then the tail ``sum_{m >= M} chi(a) / (mq + a)``
    via the asymptotic digamma expansion (the divergent parts cancel since the period sum is 0).
    """
    q = len(chi)
    periods = max(terms // q, 10)
    ns = np.arange(1, periods * q + 1)
    vals = np.array(chi)[ns % q]
    head = np.sum(vals / ns)
    tail = -sum(chi[a] * _digamma_asymptotic(periods + a / q) for a in range(q) if chi[a] != 0) / q
    return complex(head + tail)


def cyclotomic_residue(d: int) -> float:
    """Residue at 1 of the Dedekind zeta function of ``Q(zeta_d)``."""
    total = 1.0 + 0j
    for chi in _primitive_characters(d):
        total *= l_value_at_one(chi)
    return float(total.real)


@dataclass(frozen=True)
class Kappa0:
    value: float
    residues: dict
    euler_product: float
    euler_product_half: float
    tail_bound: float
    skipped_primes: tuple[int, ...]

    @property
    def log_difference(self) -> float:
        return abs(math.log(self.euler_product) - math.log(self.euler_product_half))


def kappa_0_partial(n: int, p_bound: int) -> Kappa0:
    """Residue product times the Euler product of ``Q_p(1, s_AC)`` over unramified ``p <= p_bound``.

    ``euler_product_half`` stops at ``p_bound // 2`` so the reported log difference tracks
    convergence against ``tail_bound``.
    """
    if not 2 <= n <= 6:
        raise PreconditionError("DOMAIN", "kappa_0 supports n <= 6")
    data = build_cyclic_fan(n, "split")
    residues = {d: cyclotomic_residue(d) for d in data.divisors}
    skipped = tuple(p for p in primerange(2, p_bound + 1) if n % p == 0)
    for p in skipped:
        log.warning("prime %d is ramified; its local factor is omitted", p)
    cache: dict[tuple[int, ...], list[Fraction]] = {}
    logs = []
    for p in primerange(2, p_bound + 1):
        if n % p == 0:
            continue
        grp = decomposition_group(n, p)
        if grp not in cache:
            cache[grp] = _weights(data, grp)
        logs.append((p, math.log(sum(p ** (-float(w)) for w in cache[grp]))))
    full = math.exp(sum(v for _, v in logs))
    half = math.exp(sum(v for p, v in logs if p <= p_bound // 2))
    exponent = (n - 1) / 2
    if exponent > 1:
        # explicit primes up to 4P, then the integral of x^-exponent beyond
        explicit = sum(p ** (-exponent) for p in primerange(p_bound // 2 + 1, 4 * p_bound))
        tail = float(totient(n)) * (explicit + (4 * p_bound) ** (1 - exponent) / (exponent - 1))
    else:
        tail = math.inf
    res = math.prod(residues.values())
    return Kappa0(res * full, residues, full, half, tail, skipped)


# polynomials -----------------------------------------------------------------

def root_height(coefficients: Sequence[int]) -> float:
    """``max_k |a_k|^(1/k)`` for ``t^n + a_1 t^(n-1) + ... + a_n``."""
    return max((abs(a) ** (1.0 / k) for k, a in enumerate(coefficients, start=1)), default=0.0)


def cubic_discriminant(a: int, b: int, c: int) -> int:
    return a * a * b * b - 4 * b**3 - 4 * a**3 * c - 27 * c * c + 18 * a * b * c


def cubic_group_determinant(a: int, b: int, c: int) -> int:
    """Circulant determinant of the roots of a cyclic cubic: ``e1 * (e1^2 - 3 e2)``."""
    e1, e2 = -a, b
    return e1 * (e1 * e1 - 3 * e2)


def _has_integer_root(a: int, b: int, c: int) -> bool:
    if c == 0:
        return True
    for r in sp.divisors(abs(c)):
        for x in (r, -r):
            if x**3 + a * x * x + b * x + c == 0:
                return True
    return False


@dataclass(frozen=True)
class CubicCount:
    cyclic: int
    normal: int


def cyclic_cubic_counts(h: int) -> CubicCount:
    """Monic integer cubics with root height below ``h`` and Galois group ``C3``, and the normal ones."""
    if not 1 <= h <= 60:
        raise PreconditionError("DOMAIN", "H must lie in 1..60")
    cyc = normal = 0
    amax, bmax, cmax = h - 1, math.ceil(h * h) - 1, math.ceil(h**3) - 1
    for a in range(-amax, amax + 1):
        for b in range(-bmax, bmax + 1):
            # discriminant is -27 c^2 + B c + C; only c with a nonnegative value matter
            big_b = 18 * a * b - 4 * a**3
            big_c = a * a * b * b - 4 * b**3
            disc = big_b * big_b + 108 * big_c
            if disc < 0:
                continue
            root = math.isqrt(disc)
            lo = max(-cmax, (big_b - root) // 54 - 1)
            hi = min(cmax, (big_b + root) // 54 + 1)
            if lo > hi:
                continue
            cs = np.arange(lo, hi + 1, dtype=np.int64)
            vals = -27 * cs * cs + big_b * cs + big_c
            ok = vals > 0
            roots = np.sqrt(np.where(ok, vals, 0).astype(np.float64)).round().astype(np.int64)
            square = ok & (roots * roots == vals)
            for c in cs[square]:
                c = int(c)
                if math.isqrt(cubic_discriminant(a, b, c)) ** 2 != cubic_discriminant(a, b, c):
                    continue
                if _has_integer_root(a, b, c):
                    continue
                cyc += 1
                if cubic_group_determinant(a, b, c) != 0:
                    normal += 1
    return CubicCount(cyc, normal)


def brute_cyclic_cubic(h: int) -> int:
    """Number of normal monic integer cubics with Galois group ``C3`` and root height below ``h``."""
    return cyclic_cubic_counts(h).normal
