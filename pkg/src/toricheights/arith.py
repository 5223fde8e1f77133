"""Real quadratic fields: units, ideals, class and regulator characters, and the height zeta example.

Elements of the ring of integers are integer pairs ``(x, y)`` meaning ``x + y*omega`` with
``omega = sqrt(d)`` or ``(1 + sqrt(d))/2``.  Ideals are enumerated as products of prime
ideals, so norms, classes and generator logarithms are carried multiplicatively without
ever forming the product lattices.
"""

from __future__ import annotations

import cmath
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from sympy import Matrix, primerange
from sympy.functions.combinatorial.numbers import kronecker_symbol
from sympy.matrices.normalforms import hermite_normal_form
from sympy.ntheory import continued_fraction_periodic, factorint, sqrt_mod

from .errors import PreconditionError

log = logging.getLogger(__name__)

Element = tuple[int, int]


@dataclass(frozen=True)
class Ideal:
    """Integral ideal with Z-basis ``a`` and ``b + c*omega`` (Hermite form, ``c | a``, ``c | b``)."""

    a: int
    b: int
    c: int

    @property
    def norm(self) -> int:
        return self.a * self.c


@dataclass(frozen=True)
class PrimeIdeal:
    p: int
    kind: str  # "split", "inert" or "ramified"
    ideal: Ideal
    norm: int
    generator: Element | None
    log_ratio: float | None
    class_index: int


@dataclass(frozen=True)
class IdealRecord:
    norm: int
    class_index: int
    log_ratio: float | None
    factors: tuple[int, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class ClassCharacter:
    """Character of the class group: ``values[c] = j`` means ``exp(2 pi i j / h)``."""

    values: tuple[int, ...]

    def __call__(self, class_index: int) -> complex:
        h = len(self.values)
        return cmath.exp(2j * math.pi * self.values[class_index] / h)

    def conjugate(self) -> "ClassCharacter":
        h = len(self.values)
        return ClassCharacter(tuple((-v) % h for v in self.values))

    @property
    def is_trivial(self) -> bool:
        return not any(self.values)


class RealQuadraticField:
    def __init__(self, d: int):
        if d <= 1 or any(e > 1 for e in factorint(d).values()):
            raise PreconditionError("DOMAIN", f"{d} is not a squarefree integer > 1")
        self.d = d
        self.one_mod_four = d % 4 == 1
        self.disc = d if self.one_mod_four else 4 * d
        self.sqrt_d = math.sqrt(d)
        self.omega = (1 + self.sqrt_d) / 2 if self.one_mod_four else self.sqrt_d
        self.omega_conj = (1 - self.sqrt_d) / 2 if self.one_mod_four else -self.sqrt_d
        self.trace_omega = 1 if self.one_mod_four else 0
        self.norm_omega = (1 - d) // 4 if self.one_mod_four else -d

    # elements -------------------------------------------------------------

    def norm(self, el: Element) -> int:
        x, y = el
        return x * x + self.trace_omega * x * y + self.norm_omega * y * y

    def embed(self, el: Element) -> tuple[float, float]:
        x, y = el
        return x + y * self.omega, x + y * self.omega_conj

    def mul(self, u: Element, v: Element) -> Element:
        # omega^2 = trace*omega - norm
        x1, y1 = u
        x2, y2 = v
        yy = y1 * y2
        return x1 * x2 - self.norm_omega * yy, x1 * y2 + x2 * y1 + self.trace_omega * yy

    def as_sqrt_form(self, el: Element) -> tuple[int, int, int]:
        """``(a, b, k)`` with the element equal to ``(a + b sqrt d) / k``."""
        x, y = el
        if self.one_mod_four:
            return 2 * x + y, y, 2
        return x, y, 1

    def log_ratio(self, el: Element) -> float:
        # take the larger embedding directly and the other from the norm, avoiding cancellation
        a, b = self.embed(el)
        n = abs(self.norm(el))
        big = max(abs(a), abs(b))
        ratio = big * big / n
        return math.log(ratio) if abs(a) >= abs(b) else -math.log(ratio)

    # units ----------------------------------------------------------------

    @cached_property
    def fundamental_unit(self) -> Element:
        """Smallest unit > 1, from the continued fraction of ``-conj(omega)``."""
        cf = continued_fraction_periodic(-1, 2, self.d) if self.one_mod_four else continued_fraction_periodic(0, 1, self.d)
        terms = itertools.chain(cf[:-1], itertools.cycle(cf[-1]))
        h_prev, h = 0, 1
        k_prev, k = 1, 0
        for a in terms:
            h_prev, h = h, a * h + h_prev
            k_prev, k = k, a * k + k_prev
            if k > 0 and abs(self.norm((h, k))) == 1 and self.embed((h, k))[0] > 1:
                return h, k
        raise AssertionError("unreachable")

    @cached_property
    def regulator(self) -> float:
        return math.log(self.embed(self.fundamental_unit)[0])

    @cached_property
    def unit_norm(self) -> int:
        return self.norm(self.fundamental_unit)

    # ideals ---------------------------------------------------------------

    def _hnf(self, gens: Sequence[Element]) -> Ideal:
        m = Matrix([[x for x, _ in gens], [y for _, y in gens]])
        h = hermite_normal_form(m)
        cols = [tuple(int(v) for v in h.col(j)) for j in range(h.cols)]
        if len(cols) != 2:
            raise PreconditionError("DOMAIN", "generators do not span a full-rank ideal")
        # column-style HNF: one column is (a, 0), the other (b, c)
        first, second = cols
        if first[1] == 0:
            a, (b, c) = first[0], second
        else:
            a, (b, c) = second[0], first
        a, c = abs(a), abs(c)
        return Ideal(a, b % a, c)

    def ideal(self, gens: Sequence[Element]) -> Ideal:
        """Ideal generated (as an ideal) by the given elements."""
        zgens = []
        for g in gens:
            zgens.append(g)
            zgens.append(self.mul(g, (0, 1)))
        return self._hnf(zgens)

    def ideal_mul(self, i: Ideal, j: Ideal) -> Ideal:
        gi = [(i.a, 0), (i.b, i.c)]
        gj = [(j.a, 0), (j.b, j.c)]
        return self.ideal([self.mul(u, v) for u in gi for v in gj])

    def ideal_conj(self, i: Ideal) -> Ideal:
        return self.ideal([(i.a, 0), (i.b + i.c * self.trace_omega, -i.c)])

    def contains(self, i: Ideal, el: Element) -> bool:
        x, y = el
        if y % i.c:
            return False
        return (x - (y // i.c) * i.b) % i.a == 0

    def find_generator(self, i: Ideal) -> Element | None:
        """An element of norm ``±N(i)`` in ``i``, searched in the unit-balanced box, or None."""
        n = i.norm
        bound = math.sqrt(n * self.embed(self.fundamental_unit)[0]) * (1 + 1e-9)
        ymax = int(2 * bound / self.sqrt_d) + 1
        for y in range(0, ymax + 1):
            if y % i.c:
                continue
            # |x + y*omega| <= bound and |x + y*omega'| <= bound
            lo = math.ceil(max(-bound - y * self.omega, -bound - y * self.omega_conj)) - 1
            hi = math.floor(min(bound - y * self.omega, bound - y * self.omega_conj)) + 1
            start = y // i.c * i.b
            first = lo + ((start - lo) % i.a)
            for x in range(first, hi + 1, i.a):
                if abs(self.norm((x, y))) == n and (x, y) != (0, 0):
                    return x, y
        return None

    def is_principal(self, i: Ideal) -> bool:
        return self.find_generator(i) is not None

    def _prime_ideals_over(self, p: int) -> list[tuple[str, Ideal]]:
        k = kronecker_symbol(self.disc, p)
        if k == -1:
            return [("inert", Ideal(p, 0, p))]
        if p == 2:
            roots = [r for r in range(2) if (r * r - self.trace_omega * r + self.norm_omega) % 2 == 0]
        elif self.one_mod_four:
            inv2 = pow(2, -1, p)
            roots = sorted({(1 + s) * inv2 % p for s in sqrt_mod(self.d % p, p, all_roots=True)})
        else:
            roots = sorted(set(sqrt_mod(self.d % p, p, all_roots=True)))
        ideals = [Ideal(p, (-r) % p, 1) for r in roots]
        if k == 0:
            return [("ramified", ideals[0])]
        return [("split", i) for i in ideals]

    # class group ----------------------------------------------------------

    @cached_property
    def _class_data(self) -> tuple[list[Ideal], list[list[int]]]:
        unit = Ideal(1, 0, 1)
        reps = [unit]
        bound = int(math.sqrt(self.disc) / 2) + 1
        gens = [i for p in primerange(2, bound + 1) for _, i in self._prime_ideals_over(p)]
        frontier = [unit]
        while frontier:
            nxt = []
            for rep in frontier:
                for g in gens:
                    cand = self.ideal_mul(rep, g)
                    if self._class_of(cand, reps) is None:
                        reps.append(cand)
                        nxt.append(cand)
            frontier = nxt
        table = [[self._class_of(self.ideal_mul(a, b), reps) for b in reps] for a in reps]
        return reps, table

    def _class_of(self, i: Ideal, reps: Sequence[Ideal]) -> int | None:
        for idx, rep in enumerate(reps):
            if self.is_principal(self.ideal_mul(i, self.ideal_conj(rep))):
                return idx
        return None

    @property
    def class_number(self) -> int:
        return len(self._class_data[0])

    def class_index(self, i: Ideal) -> int:
        idx = self._class_of(i, self._class_data[0])
        if idx is None:
            raise AssertionError("ideal not equivalent to any class representative")
        return idx

    @cached_property
    def class_characters(self) -> tuple[ClassCharacter, ...]:
        reps, table = self._class_data
        h = len(reps)
        if h == 1:
            return (ClassCharacter((0,)),)
        if h > 8:
            raise PreconditionError("UNSUPPORTED", "class groups larger than 8 are not supported")
        chars = []
        for values in itertools.product(range(h), repeat=h):
            if values[0] != 0:
                continue
            if all((values[a] + values[b] - values[table[a][b]]) % h == 0 for a in range(h) for b in range(h)):
                chars.append(ClassCharacter(values))
        return tuple(chars)

    # prime and ideal enumeration ------------------------------------------

    @lru_cache(maxsize=8)
    def prime_ideals(self, bound: int) -> tuple[PrimeIdeal, ...]:
        out = []
        h = self.class_number
        for p in primerange(2, bound + 1):
            for kind, ideal in self._prime_ideals_over(p):
                if ideal.norm > bound:
                    continue
                gen = self.find_generator(ideal)
                lr = self.log_ratio(gen) if gen is not None else None
                cls = 0 if (h == 1 or gen is not None) else self.class_index(ideal)
                out.append(PrimeIdeal(p, kind, ideal, ideal.norm, gen, lr, cls))
        return tuple(out)

    def enumerate_ideals(self, bound: int) -> list[IdealRecord]:
        """All integral ideals of norm at most ``bound`` (sorted by norm, class, log)."""
        if bound < 1:
            raise PreconditionError("DOMAIN", "bound must be at least 1")
        primes = sorted(self.prime_ideals(bound), key=lambda q: q.norm)
        table = self._class_data[1]
        out: list[IdealRecord] = []

        def walk(start: int, norm: int, cls: int, lr: float | None, factors: tuple[int, ...]):
            out.append(IdealRecord(norm, cls, lr, factors))
            for j in range(start, len(primes)):
                q = primes[j]
                if norm * q.norm > bound:
                    break
                nlr = None if (lr is None or q.log_ratio is None) else lr + q.log_ratio
                walk(j, norm * q.norm, table[cls][q.class_index], nlr, factors + (j,))

        walk(0, 1, 0, 0.0, ())
        if self.class_number > 1:
            # generator logs are only tracked for class-number-one fields
            out = [IdealRecord(r.norm, r.class_index, None, r.factors) for r in out]
        out.sort(key=lambda r: (r.norm, r.class_index, r.log_ratio if r.log_ratio is not None else 0.0))
        return out

    def ideal_counts(self, bound: int) -> dict[int, int]:
        counts: dict[int, int] = {}
        for r in self.enumerate_ideals(bound):
            counts[r.norm] = counts.get(r.norm, 0) + 1
        return counts

    def zeta_residue(self) -> float:
        return 2 * self.class_number * self.regulator / math.sqrt(self.disc)


def fundamental_unit(d: int) -> Element:
    return RealQuadraticField(d).fundamental_unit


def enumerate_ideals(field_: RealQuadraticField, bound: int) -> list[IdealRecord]:
    return field_.enumerate_ideals(bound)


def hecke_coefficient(field_: RealQuadraticField, record: IdealRecord, k: int, psi: ClassCharacter | None = None) -> complex:
    """``psi(class) * exp(pi i k log|a/a'| / R)`` for a generator ``a`` of the ideal."""
    value = psi(record.class_index) if psi is not None else 1.0
    if k == 0:
        return complex(value)
    if field_.class_number > 1 or record.log_ratio is None:
        raise PreconditionError("UNSUPPORTED", "regulator characters need class number one")
    return complex(value * cmath.exp(1j * math.pi * k * record.log_ratio / field_.regulator))


def _arrays(field_: RealQuadraticField, bound: int):
    recs = field_.enumerate_ideals(bound)
    norms = np.array([r.norm for r in recs], dtype=float)
    classes = np.array([r.class_index for r in recs])
    logs = np.array([r.log_ratio if r.log_ratio is not None else np.nan for r in recs])
    return norms, classes, logs


def _coefficients(field_: RealQuadraticField, classes, logs, k: int, psi: ClassCharacter) -> np.ndarray:
    h = field_.class_number
    vals = np.exp(2j * np.pi * np.array(psi.values)[classes] / h)
    if k:
        if h > 1:
            raise PreconditionError("UNSUPPORTED", "regulator characters need class number one")
        vals = vals * np.exp(1j * np.pi * k * logs / field_.regulator)
    return vals


def conical_series_truncated(field_: RealQuadraticField, s: complex, k: int, psi: ClassCharacter | None, bound: int) -> complex:
    """Sum of ``chi(I) N(I)^-s`` over ideals of norm at most ``bound`` (the cone is all ideals)."""
    psi = psi or field_.class_characters[0]
    norms, classes, logs = _arrays(field_, bound)
    return complex(np.sum(_coefficients(field_, classes, logs, k, psi) * norms ** (-s)))


def b_coefficients(field_: RealQuadraticField, bound: int, k: int, psi: ClassCharacter | None = None) -> dict[int, complex]:
    """``b_N = sum over ideals of norm N of chi(I)``."""
    psi = psi or field_.class_characters[0]
    norms, classes, logs = _arrays(field_, bound)
    vals = _coefficients(field_, classes, logs, k, psi)
    out: dict[int, complex] = {}
    for n, v in zip(norms.astype(int), vals):
        out[int(n)] = out.get(int(n), 0) + complex(v)
    return out


def zeta_sb_rhs(field_: RealQuadraticField, s: float, k_max: int, bound: int) -> float:
    """``(4/hR) sum_{|k|<=K} sum_psi L(s/2, psi xi^k) s / (s^2 + (2 pi k / R)^2)`` truncated at norm ``bound``."""
    if s <= 2:
        raise PreconditionError("DOMAIN", "s must exceed 2")
    h, reg = field_.class_number, field_.regulator
    if h > 1 and k_max > 0:
        raise PreconditionError("UNSUPPORTED", "regulator characters need class number one")
    norms, classes, logs = _arrays(field_, bound)
    weights = norms ** (-s / 2)
    total = 0j
    for k in range(-k_max, k_max + 1):
        c = 2 * math.pi * k / reg
        for psi in field_.class_characters:
            lval = np.sum(_coefficients(field_, classes, logs, k, psi) * weights)
            total += lval * s / (s * s + c * c)
    return float((4 / (h * reg) * total).real)


def explicit_count_sb(field_: RealQuadraticField, x: float, k_max: int, main_only: bool = False) -> float:
    """Main term plus oscillatory terms of the summatory function, from Perron's formula.

    Each ``k`` contributes ``(4/hR) sum_N b_N(psi xi^k) sin(c_k y_N) / c_k`` with
    ``c_k = 2 pi k / R`` and ``y_N = log(X / sqrt N)``; for ``k = 0`` the ratio is ``y_N``.
    """
    if x <= 1:
        raise PreconditionError("DOMAIN", "X must exceed 1")
    h, reg = field_.class_number, field_.regulator
    if h > 1 and k_max > 0 and not main_only:
        raise PreconditionError("UNSUPPORTED", "regulator characters need class number one")
    bound = math.ceil(x * x) - 1 if float(x * x).is_integer() else math.floor(x * x)
    norms, classes, logs = _arrays(field_, max(bound, 1))
    keep = norms < x * x
    norms, classes, logs = norms[keep], classes[keep], logs[keep]
    y = np.log(x / np.sqrt(norms))
    total = 0j
    ks = [0] if main_only else range(-k_max, k_max + 1)
    for k in ks:
        c = 2 * math.pi * k / reg
        kernel = y if k == 0 else np.sin(c * y) / c
        for psi in field_.class_characters:
            total += np.sum(_coefficients(field_, classes, logs, k, psi) * kernel)
    return float((4 / (h * reg) * total).real)


def _lattice_rows(field_: RealQuadraticField, x: int):
    """Yield ``(B, A_values)`` with ``A + B sqrt d`` (halved when d = 1 mod 4) covering the box."""
    scale = 2 if field_.one_mod_four else 1
    lim = scale * x
    bmax = math.isqrt((lim * lim) // field_.d + 1) + 1
    for b in range(-bmax, bmax + 1):
        a = np.arange(-lim, lim + 1, dtype=np.int64)
        if field_.one_mod_four:
            a = a[(a - b) % 2 == 0]
        # |A| + |B| sqrt d < lim  <=>  lim - |A| > 0 and (lim - |A|)^2 > d B^2
        gap = lim - np.abs(a)
        ok = (gap > 0) & (gap * gap > field_.d * b * b)
        yield b, a[ok]


def brute_count_sb(field_: RealQuadraticField, x: int) -> int:
    """Number of nonzero integers ``a`` with ``max(|a|, |a'|) < X``."""
    if int(x) != x:
        raise PreconditionError("DOMAIN", "X must be an integer")
    x = int(x)
    if x > 10**4:
        raise PreconditionError("DOMAIN", "X above desk scale")
    return sum(len(a) for _, a in _lattice_rows(field_, x)) - 1


def brute_zeta_sb(field_: RealQuadraticField, s: float, x: int) -> float:
    """Sum of ``max(|a|, |a'|)^-s`` over nonzero integers in the box ``max < X``."""
    scale = 2 if field_.one_mod_four else 1
    total = 0.0
    for b, a in _lattice_rows(field_, int(x)):
        height = (np.abs(a) + abs(b) * field_.sqrt_d) / scale
        if b == 0:
            height = height[a != 0]
        total += float(np.sum(height ** (-s)))
    return total
