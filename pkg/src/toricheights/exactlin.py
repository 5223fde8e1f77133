"""Exact rational linear algebra for lattices carrying a finite group action.

Vectors are tuples of :class:`fractions.Fraction`; matrices are tuples of row
tuples.  Heavy lifting (determinants, kernels, Smith and Hermite normal forms)
is delegated to sympy's exact domain matrices and converted back to Fractions
at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd, lcm
from typing import Iterable, Sequence

from sympy import Matrix, ZZ, QQ
from sympy.polys.matrices import DomainMatrix
from sympy.matrices.normalforms import hermite_normal_form, smith_normal_decomp

from .errors import PreconditionError

Rat = Fraction
Vector = tuple[Fraction, ...]
RatMatrix = tuple[Vector, ...]

INFINITE = float("inf")


def to_rat(value) -> Fraction:
    """Parse an int, Fraction, or ``"p/q"`` string into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact rationals")
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        return Fraction(int(value.numerator), int(value.denominator))
    return Fraction(value)


def vec(values: Iterable) -> Vector:
    return tuple(to_rat(v) for v in values)


def mat(rows: Iterable[Iterable]) -> RatMatrix:
    return tuple(vec(r) for r in rows)


def identity(n: int) -> RatMatrix:
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


def transpose(m: Sequence[Sequence]) -> RatMatrix:
    return tuple(zip(*m)) if m else ()


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> RatMatrix:
    bt = transpose(b)
    return tuple(tuple(sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt) for row in a)


def matvec(a: Sequence[Sequence], v: Sequence) -> Vector:
    return tuple(sum((x * y for x, y in zip(row, v)), Fraction(0)) for row in a)


def dot(u: Sequence, v: Sequence):
    return sum((x * y for x, y in zip(u, v)), Fraction(0))


def add(u: Sequence, v: Sequence) -> Vector:
    return tuple(x + y for x, y in zip(u, v))


def scale(c, v: Sequence) -> Vector:
    return tuple(c * x for x in v)


def is_integral(v: Iterable[Fraction]) -> bool:
    return all(x.denominator == 1 for x in v)


def primitive_integer(v: Sequence[Fraction]) -> tuple[tuple[int, ...], Fraction]:
    """Write ``v = c * w`` with ``w`` a primitive integer vector and ``c > 0``."""
    den = reduce(lcm, (x.denominator for x in v), 1)
    ints = [int(x * den) for x in v]
    g = reduce(gcd, ints, 0)
    if g == 0:
        raise PreconditionError("DOMAIN", "zero vector has no primitive generator")
    return tuple(i // g for i in ints), Fraction(g, den)


# sympy bridge ---------------------------------------------------------------

def _dm(rows: Sequence[Sequence[Fraction]], ncols: int | None = None) -> DomainMatrix:
    nrows = len(rows)
    ncols = len(rows[0]) if rows else (ncols or 0)
    data = [[QQ(int(x.numerator), int(x.denominator)) for x in map(to_rat, r)] for r in rows]
    return DomainMatrix(data, (nrows, ncols), QQ)


def _rows(dm: DomainMatrix) -> RatMatrix:
    return tuple(tuple(Fraction(int(x.numerator), int(x.denominator)) for x in r) for r in dm.to_list())


def det(m: Sequence[Sequence]) -> Fraction:
    if len(m) == 0:
        return Fraction(1)
    d = _dm(m).det()
    return Fraction(int(d.numerator), int(d.denominator))


def inverse(m: Sequence[Sequence]) -> RatMatrix:
    if det(m) == 0:
        raise PreconditionError("DEGENERATE_PROJECTION", "matrix is singular")
    return _rows(_dm(m).inv())


def rank(rows: Sequence[Sequence]) -> int:
    if not rows:
        return 0
    return _dm(rows).rank()


def nullspace(rows: Sequence[Sequence], ncols: int) -> RatMatrix:
    """Basis (as rows) of ``{x : rows . x = 0}``."""
    if not rows:
        return identity(ncols)
    return _rows(_dm(rows, ncols).nullspace()) if rank(rows) < ncols else ()


def solve_in_span(columns: Sequence[Sequence], v: Sequence) -> Vector | None:
    """Exact coefficients ``c`` with ``sum c_i columns_i = v``, or None if ``v`` is outside the span.

    The columns are assumed linearly independent.
    """
    k = len(columns)
    if k == 0:
        return () if all(x == 0 for x in v) else None
    aug = [list(row) + [x] for row, x in zip(transpose(columns), v)]
    red, pivots = _dm(aug).rref()
    if k in pivots:
        return None
    rows = _rows(red)
    coeffs = [Fraction(0)] * k
    for i, p in enumerate(pivots):
        coeffs[p] = rows[i][k]
    return tuple(coeffs)


def saturate(rows: Sequence[Sequence[Fraction]], n: int) -> RatMatrix:
    """Integral basis of ``span_Q(rows) ∩ Z^n`` in Hermite normal form."""
    if not rows or rank(rows) == 0:
        return ()
    ints = [primitive_integer(r)[0] for r in rows if any(x != 0 for x in r)]
    m = Matrix(ints)
    _, _, v = smith_normal_decomp(m, domain=ZZ)
    k = m.rank()
    top = v.inv()[:k, :]
    hnf = hermite_normal_form(top.T).T
    out = [tuple(Fraction(int(x)) for x in hnf.row(i)) for i in range(hnf.rows)]
    return tuple(sorted(out, reverse=True))


def lattice_from_generators(rows: Sequence[Sequence], n: int) -> RatMatrix:
    """Basis (Hermite form) of the lattice generated by rational vectors spanning ``Q^n``."""
    rows = [vec(r) for r in rows]
    den = reduce(lcm, (x.denominator for r in rows for x in r), 1)
    ints = Matrix([[int(x * den) for x in r] for r in rows])
    hnf = hermite_normal_form(ints.T)
    if hnf.cols != n:
        raise PreconditionError("DOMAIN", "generators do not span a full-rank lattice")
    return tuple(tuple(Fraction(int(hnf[i, j]), den) for i in range(n)) for j in range(n))


# types ----------------------------------------------------------------------

@dataclass(frozen=True)
class Subspace:
    """A rational subspace of ``Q^ambient_rank`` with an explicit basis."""

    ambient_rank: int
    basis: RatMatrix

    def __post_init__(self):
        if any(len(b) != self.ambient_rank for b in self.basis):
            raise PreconditionError("DIMENSION_MISMATCH", "basis vector of wrong length")
        if rank(self.basis) != len(self.basis):
            raise PreconditionError("DOMAIN", "subspace basis is dependent")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coordinates(self, v: Sequence) -> Vector | None:
        return solve_in_span(self.basis, vec(v))

    def contains(self, v: Sequence) -> bool:
        return self.coordinates(v) is not None


@dataclass(frozen=True)
class LatticeWithAction:
    """A full-rank lattice in ``Q^n`` with a finite group acting by lattice automorphisms.

    ``basis`` holds the lattice basis vectors (the columns of the basis matrix).
    ``group`` holds matrices in lattice coordinates; element 0 must be the identity.
    """

    basis: RatMatrix
    group: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self):
        n = self.rank
        if any(len(b) != n for b in self.basis) or det(transpose(self.basis)) == 0:
            raise PreconditionError("DIMENSION_MISMATCH", "lattice basis must be n invertible vectors")
        if not self.group or tuple(map(tuple, self.group[0])) != tuple(
            tuple(int(i == j) for j in range(n)) for i in range(n)
        ):
            raise PreconditionError("DOMAIN", "group element 0 must be the identity")
        keys = {g for g in self.group}
        for g in self.group:
            if len(g) != n or any(len(r) != n for r in g):
                raise PreconditionError("DIMENSION_MISMATCH", "group matrix of wrong size")
            if abs(det(g)) != 1:
                raise PreconditionError("DOMAIN", "group matrix is not unimodular")
            for h in self.group:
                prod = tuple(tuple(int(x) for x in r) for r in matmul(g, h))
                if prod not in keys:
                    raise PreconditionError("DOMAIN", "group is not closed under products")

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def order(self) -> int:
        return len(self.group)

    @classmethod
    def standard(cls, n: int, group: Iterable[Sequence[Sequence[int]]] = ()) -> "LatticeWithAction":
        mats = [tuple(tuple(int(x) for x in r) for r in g) for g in group]
        ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        mats = [ident] + [g for g in mats if g != ident]
        return cls(identity(n), tuple(mats))

    @classmethod
    def from_ambient(cls, basis: Iterable[Sequence], ambient_group: Iterable[Sequence[Sequence]]) -> "LatticeWithAction":
        """Build from basis vectors and group matrices acting on ambient coordinates by ``v -> A v``."""
        b = mat(basis)
        bmat = transpose(b)
        binv = inverse(bmat)
        n = len(b)
        mats = []
        for a in ambient_group:
            local = matmul(binv, matmul(mat(a), bmat))
            if not all(is_integral(r) for r in local):
                raise PreconditionError("DOMAIN", "group does not preserve the lattice")
            mats.append(tuple(tuple(int(x) for x in r) for r in local))
        ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        mats = [ident] + [g for g in dict.fromkeys(mats) if g != ident]
        return cls(b, tuple(mats))

    def basis_matrix(self) -> RatMatrix:
        return transpose(self.basis)

    def coordinates(self, v: Sequence) -> Vector:
        v = vec(v)
        if len(v) != self.rank:
            raise PreconditionError("DIMENSION_MISMATCH", f"expected length {self.rank}, got {len(v)}")
        return matvec(inverse(self.basis_matrix()), v)

    def ambient(self, coords: Sequence) -> Vector:
        return matvec(self.basis_matrix(), vec(coords))

    def ambient_group(self) -> tuple[RatMatrix, ...]:
        b = self.basis_matrix()
        binv = inverse(b)
        return tuple(matmul(b, matmul(mat(g), binv)) for g in self.group)

    def act(self, index: int, v: Sequence) -> Vector:
        return matvec(self.ambient_group()[index], vec(v))


# operations -----------------------------------------------------------------

def lattice_index(lat: LatticeWithAction | Subspace, vectors: Sequence[Sequence]) -> int | float:
    """Index of the sublattice spanned by ``vectors``; ``INFINITE`` when they do not span.

    A :class:`Subspace` is read as the lattice spanned by its basis.
    """
    if isinstance(lat, Subspace):
        n = lat.dim
        coords = []
        for v in vectors:
            v = vec(v)
            if len(v) != lat.ambient_rank:
                raise PreconditionError("DIMENSION_MISMATCH", "vector of wrong length")
            c = lat.coordinates(v)
            if c is None:
                raise PreconditionError("NOT_IN_LATTICE", f"{v} is outside the subspace")
            coords.append(c)
    else:
        n = lat.rank
        coords = [lat.coordinates(v) for v in vectors]
    for c in coords:
        if not is_integral(c):
            raise PreconditionError("NOT_IN_LATTICE", f"coordinates {c} are not integral")
    if n == 0:
        return 1
    if len(coords) < n or rank(coords) < n:
        return INFINITE
    if len(coords) == n:
        return abs(int(det(coords)))
    snf = smith_normal_decomp(Matrix([[int(x) for x in c] for c in coords]), domain=ZZ)[0]
    return abs(int(reduce(lambda a, b: a * b, (snf[i, i] for i in range(n)), 1)))


def _check_subgroup(lat: LatticeWithAction, subgroup: Iterable[int]) -> tuple[int, ...]:
    idx = tuple(sorted(set(subgroup)))
    if any(i < 0 or i >= lat.order for i in idx):
        raise PreconditionError("DOMAIN", f"subgroup indices {idx} out of range")
    return idx


def invariants_basis(lat: LatticeWithAction, subgroup: Iterable[int]) -> Subspace:
    """Saturated integral basis (ambient coordinates) of the sublattice fixed by ``subgroup``."""
    idx = _check_subgroup(lat, subgroup)
    n = lat.rank
    stacked = []
    for i in idx:
        g = lat.group[i]
        stacked.extend(tuple(Fraction(g[r][c] - (r == c)) for c in range(n)) for r in range(n))
    kernel = nullspace([r for r in stacked if any(r)], n)
    coords = saturate(kernel, n)
    return Subspace(n, tuple(lat.ambient(c) for c in coords))


def project_pi(lat: LatticeWithAction, v: Sequence) -> Vector:
    """Orbit average of ``v`` over the whole group (ambient coordinates)."""
    v = vec(v)
    if len(v) != lat.rank:
        raise PreconditionError("DIMENSION_MISMATCH", "vector of wrong length")
    total = tuple(Fraction(0) for _ in v)
    for g in lat.ambient_group():
        total = add(total, matvec(g, v))
    return scale(Fraction(1, lat.order), total)


def trace_zero_basis(lat: LatticeWithAction, subgroup_w: Iterable[int]) -> Subspace:
    """Kernel of the averaging projector inside the ``subgroup_w``-fixed space, as a saturated basis."""
    fixed = invariants_basis(lat, subgroup_w)
    images = [project_pi(lat, b) for b in fixed.basis]
    # coefficient vectors c with sum c_i * pi(b_i) = 0
    kernel = nullspace(transpose(images), fixed.dim) if images else ()
    vectors = [tuple(sum((c * b[k] for c, b in zip(row, fixed.basis)), Fraction(0)) for k in range(lat.rank)) for row in kernel]
    if not vectors:
        return Subspace(lat.rank, ())
    coords = saturate([lat.coordinates(v) for v in vectors], lat.rank)
    return Subspace(lat.rank, tuple(lat.ambient(c) for c in coords))


def transfer_mu(lat: LatticeWithAction, subgroup_w: Iterable[int], vectors: Sequence[Sequence]) -> RatMatrix:
    """Matrix of the transfer map from forms on the ``subgroup_w``-fixed space to forms on the invariants.

    A form on the fixed space is encoded by its values on ``invariants_basis(lat, subgroup_w)``;
    a form on the invariants by its values on ``invariants_basis(lat, all)``.  The returned
    matrix ``T`` satisfies ``(T m)(pi e) = m(e)`` for every ``e`` in ``vectors``.
    """
    fixed_w = invariants_basis(lat, subgroup_w)
    fixed = invariants_basis(lat, range(lat.order))
    if len(vectors) != fixed.dim:
        raise PreconditionError("DIMENSION_MISMATCH", f"need exactly {fixed.dim} vectors")
    d_rows, c_rows = [], []
    for e in vectors:
        dw = fixed_w.coordinates(e)
        if dw is None:
            raise PreconditionError("DIMENSION_MISMATCH", f"{tuple(e)} is not fixed by the place subgroup")
        d_rows.append(dw)
        c_rows.append(fixed.coordinates(project_pi(lat, e)))
    if det(c_rows) == 0:
        raise PreconditionError("DEGENERATE_PROJECTION", "projected vectors are dependent")
    return matmul(inverse(c_rows), d_rows)
