"""Lattice sums of residual functions over regulator characters, and their integrals.

A point ``m`` of the dual of the trace-zero space is given by its values ``mu`` on the
saturated trace-zero basis.  It shifts the parent variable ``s_i`` by
``2 pi i * m(avg_w(v_i) - pi(v_i))``, where ``avg_w`` averages over the place subgroup.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import sympy as sp
from scipy.integrate import nquad, quad

from .errors import PreconditionError
from .exactlin import add, matvec, project_pi, scale, trace_zero_basis
from .fan import Cone, GaloisFan
from .ratfunc import RationalFunctionMV, to_sympy
from .residue import context, enumerate_Z_sigma, residual_function

TWO_PI_I = 2j * math.pi


def trace_zero_shifts(fan: GaloisFan) -> tuple[tuple[tuple[Fraction, ...], ...], tuple[tuple[Fraction, ...], ...]]:
    """Saturated trace-zero basis and, per parent ray, its trace-zero coordinates."""
    lat = fan.lattice
    space = trace_zero_basis(lat, fan.place)
    groups = lat.ambient_group()
    rows = []
    for v in fan.rays:
        avg = scale(Fraction(1, len(fan.place)), _sum(matvec(groups[g], v) for g in fan.place))
        rest = add(avg, scale(-1, project_pi(lat, v)))
        coords = space.coordinates(rest) if space.dim else ()
        if coords is None:
            raise PreconditionError("DOMAIN", "trace-zero component escaped the trace-zero space")
        rows.append(coords)
    return space.basis, tuple(rows)


def _sum(vectors):
    vectors = list(vectors)
    total = vectors[0]
    for v in vectors[1:]:
        total = add(total, v)
    return total


@dataclass(frozen=True)
class RegulatorLattice:
    """Exponent lattice of the regulator characters inside the trace-zero dual.

    ``basis`` rows are lattice generators in ``mu`` coordinates; ``regulator`` is the
    volume of the regulator torus.
    """

    basis: tuple[tuple[float, ...], ...]
    regulator: float

    def __post_init__(self):
        if self.basis and abs(np.linalg.det(np.array(self.basis, dtype=float))) == 0:
            raise PreconditionError("DOMAIN", "regulator lattice basis is dependent")

    @property
    def covolume(self) -> float:
        return float(abs(np.linalg.det(np.array(self.basis, dtype=float)))) if self.basis else 1.0

    @classmethod
    def from_place_forms(cls, fan: GaloisFan, forms: Sequence[Sequence[float]], regulator: float) -> "RegulatorLattice":
        """Lattice generated by forms given as values on the parent rays (split places only)."""
        basis, _ = trace_zero_shifts(fan)
        lat = fan.lattice
        rows = []
        for form in forms:
            # values on parent rays -> values on the trace-zero basis vectors
            coeffs = [lat.coordinates(b) for b in basis]
            ray_coords = np.array([[float(x) for x in lat.coordinates(v)] for v in fan.rays])
            solved = np.linalg.lstsq(ray_coords, np.asarray(form, dtype=float), rcond=None)[0]
            rows.append(tuple(float(np.dot([float(x) for x in c], solved)) for c in coeffs))
        return cls(tuple(rows), regulator)


@dataclass(frozen=True)
class _Shifted:
    func: object
    variables: tuple
    shifts: np.ndarray  # (num parent rays, dim trace zero)


def _shifted(fan: GaloisFan, r_gamma: RationalFunctionMV) -> _Shifted:
    ctx = context(fan)
    _, rows = trace_zero_shifts(fan)
    shifts = np.array([[float(x) for x in row] for row in rows]) if rows and rows[0] else np.zeros((len(fan.rays), 0))
    return _Shifted(sp.lambdify(ctx.s, r_gamma.expr(), "numpy"), ctx.s, shifts)


def _evaluate(sh: _Shifted, base: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Evaluate at ``base + 2 pi i * shifts @ mu`` for a batch of ``mu`` rows."""
    args = base[None, :] + TWO_PI_I * (mu @ sh.shifts.T)
    out = sh.func(*[args[:, i] for i in range(args.shape[1])])
    out = np.broadcast_to(np.asarray(out, dtype=complex), (mu.shape[0],))
    if not np.all(np.isfinite(out)):
        raise PreconditionError("POLE_ON_LATTICE", "a summed point hits a pole")
    return out


def _base(fan: GaloisFan, s_base: Mapping | Sequence) -> np.ndarray:
    ctx = context(fan)
    if isinstance(s_base, Mapping):
        return np.array([complex(to_sympy(s_base[v])) for v in ctx.s])
    return np.array([complex(x) for x in s_base])


def rho_partial_sum(
    fan: GaloisFan,
    r_gamma: RationalFunctionMV,
    lattice: RegulatorLattice,
    s_base,
    t: float,
    radius: int,
    tail_correction: bool = False,
) -> complex:
    """Sum of ``R(t * s_base + 2 pi i m_xi)`` over lattice points with max-norm coefficient at most ``radius``.

    With ``tail_correction`` (one-dimensional lattices only) the omitted tail is replaced
    by the integral of the summand beyond ``radius + 1/2`` on each side.
    """
    if t <= 0:
        raise PreconditionError("DOMAIN", "t must be positive")
    sh = _shifted(fan, r_gamma)
    base = t * _base(fan, s_base)
    dim = len(lattice.basis)
    if dim == 0:
        return complex(_evaluate(sh, base, np.zeros((1, 0)))[0])
    gens = np.array(lattice.basis, dtype=float)
    total = 0j
    ks = np.arange(-radius, radius + 1)
    for block in itertools.product(ks, repeat=dim - 1) if dim > 1 else [()]:
        coeffs = np.array([list(block) + [k] for k in ks], dtype=float)
        total += _evaluate(sh, base, coeffs @ gens).sum()
    if tail_correction:
        if dim != 1:
            raise PreconditionError("DIM_TOO_LARGE", "tail correction is implemented for rank one lattices")

        def f(k: float, part) -> float:
            return part(_evaluate(sh, base, np.array([[k]]) @ gens)[0])

        for sign in (1, -1):
            lo = radius + 0.5
            re = quad(lambda x: f(sign * x, np.real), lo, np.inf, epsabs=1e-13, limit=200)[0]
            im = quad(lambda x: f(sign * x, np.imag), lo, np.inf, epsabs=1e-13, limit=200)[0]
            total += re + 1j * im
    return complex(total)


def _check_integrable(fan: GaloisFan, r_gamma: RationalFunctionMV, dim: int) -> None:
    ctx = context(fan)
    _, rows = trace_zero_shifts(fan)
    mus = sp.symbols(f"mu0:{dim}")
    sub = {ctx.s[i]: ctx.s[i] + sp.I * sp.Add(*[to_sympy(rows[i][j]) * mus[j] for j in range(dim)]) for i in range(len(ctx.s))}
    num, den = sp.fraction(sp.cancel(r_gamma.expr().subs(sub, simultaneous=True)))
    for mu in mus:
        drop = sp.Poly(den, mu).degree() - sp.Poly(num, mu).degree()
        if drop < 2:
            raise PreconditionError("NOT_INTEGRABLE", f"degree drop {drop} < 2 along {mu}")


def rho_integral(fan: GaloisFan, r_gamma: RationalFunctionMV, s_base, regulator: float = 1.0) -> float:
    """``regulator * integral of R(s_base + 2 pi i m) dm`` over the trace-zero dual (real part)."""
    basis, _ = trace_zero_shifts(fan)
    dim = len(basis)
    if dim > 2:
        raise PreconditionError("DIM_TOO_LARGE", "quadrature supports trace-zero dimension at most 2")
    if r_gamma.numerator.is_zero:
        return 0.0
    sh = _shifted(fan, r_gamma)
    base = _base(fan, s_base)
    if dim == 0:
        return float(regulator * _evaluate(sh, base, np.zeros((1, 0)))[0].real)
    _check_integrable(fan, r_gamma, dim)

    def integrand(*mu: float) -> float:
        # the imaginary part is odd under mu -> -mu and integrates to zero
        return float(_evaluate(sh, base, np.array([mu]))[0].real)

    if dim == 1:
        value = quad(integrand, -np.inf, np.inf, epsabs=1e-11, epsrel=1e-11, limit=400)[0]
    else:
        value = nquad(integrand, [(-np.inf, np.inf)] * 2, opts={"epsabs": 1e-10, "limit": 200})[0]
    return float(regulator * value)


def period_P(fan: GaloisFan, sigma: Cone, s_base) -> float:
    """Sum over the stable flags of ``Pi_sigma`` of the trace-zero integrals (no regulator factor)."""
    total = 0.0
    for flag in enumerate_Z_sigma(fan, sigma):
        total += rho_integral(fan, residual_function(fan, flag), s_base, 1.0)
    return total
