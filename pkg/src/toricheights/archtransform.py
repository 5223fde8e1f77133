"""Archimedean Fourier transform of the height function over a complete simplicial fan.

Closed form::

    H(m, s) = sum over maximal cones tau of [N : Z tau(1)] * prod_{e in tau(1)} 1 / (s_e + 2 pi i m(e))

which equals ``(2 pi i)^(-r) sum_tau [N : Z tau(1)] prod (m(e) + t_e)^(-1)`` with ``t_e = s_e / (2 pi i)``.
The quadrature oracle integrates ``exp(phi(y)) exp(-2 pi i <y, m>)`` directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
import sympy as sp
from scipy.integrate import simpson

from .errors import PreconditionError
from .exactlin import inverse, transpose
from .fan import GaloisFan, place_fan, validate_fan
from .ratfunc import RationalFunctionMV, symbols

TWO_PI_I = 2j * math.pi


@dataclass(frozen=True)
class ArchTransform:
    """Transform attached to a complete fan given in coordinates of its own lattice."""

    fan: GaloisFan

    def __post_init__(self):
        if not validate_fan(self.fan).complete:
            raise PreconditionError("DOMAIN", "the archimedean transform needs a complete fan")

    @classmethod
    def at_place(cls, fan: GaloisFan) -> "ArchTransform":
        return cls(place_fan(fan).fan)

    @property
    def rank(self) -> int:
        return self.fan.rank

    @cached_property
    def indices(self) -> dict[tuple[int, ...], int]:
        return {c: int(self.fan.index(c)) for c in self.fan.max_cones}

    @cached_property
    def float_rays(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.fan.rays])


def hhat_inf_eval(a: ArchTransform, s: Sequence[complex], m: Sequence[float]) -> complex:
    s = [complex(x) for x in s]
    if any(x.real <= 0 for x in s):
        raise PreconditionError("DOMAIN", "every s_e needs a positive real part")
    pairing = a.float_rays @ np.asarray(m, dtype=float)
    factors = [s[i] + TWO_PI_I * pairing[i] for i in range(len(s))]
    total = 0j
    for cone, idx in a.indices.items():
        prod = 1 + 0j
        for i in cone:
            if factors[i] == 0:
                raise PreconditionError("POLE", f"factor for ray {i} vanishes")
            prod /= factors[i]
        total += idx * prod
    return total


@dataclass(frozen=True)
class SymbolicTransform:
    """``prefactor_power`` records the omitted ``(2 pi i)^(-rank)`` factor."""

    function: RationalFunctionMV
    m_vars: tuple[sp.Symbol, ...]
    t_vars: tuple[sp.Symbol, ...]
    hyperplanes: tuple[sp.Expr, ...]
    prefactor_power: int


def hhat_inf_symbolic(a: ArchTransform) -> SymbolicTransform:
    m_vars = symbols("m", a.rank)
    t_vars = symbols("t", len(a.fan.rays))
    forms = [sum((sp.Rational(x.numerator, x.denominator) * v for x, v in zip(r, m_vars)), sp.Integer(0)) for r in a.fan.rays]
    planes = tuple(f + t for f, t in zip(forms, t_vars))
    expr = sum((idx * sp.Mul(*[1 / planes[i] for i in cone]) for cone, idx in a.indices.items()), sp.Integer(0))
    return SymbolicTransform(RationalFunctionMV(expr, m_vars + t_vars), m_vars, t_vars, planes, -a.rank)


class QuadratureResult(NamedTuple):
    value: complex
    truncation_bound: float


def _odd(k: float) -> int:
    """Smallest count ``4j + 1 >= k`` (at least 5), so the grid halves to a Simpson grid."""
    k = max(int(math.ceil(k)), 5)
    return k + (1 - k) % 4


def _simpson_richardson(vals: np.ndarray, x: np.ndarray, axis: int = -1):
    """Simpson on the full grid and on every other point, combined by one Richardson step."""
    fine = simpson(vals, x=x, axis=axis)
    idx = [slice(None)] * vals.ndim
    idx[axis] = slice(None, None, 2)
    coarse = simpson(vals[tuple(idx)], x=x[::2], axis=axis)
    return (16.0 * fine - coarse) / 15.0


def _cone_functionals(a: ArchTransform, s: np.ndarray) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """For each maximal cone, the row vector ``l`` with ``phi(y) = l . y`` on that cone."""
    out = []
    for cone in a.fan.max_cones:
        ginv = np.array([[complex(x) for x in row] for row in inverse(transpose(a.fan.cone_vectors(cone)))])
        out.append((cone, -(s[list(cone)] @ ginv)))
    return out


def _phi_linear(a: ArchTransform, funcs, point: np.ndarray) -> np.ndarray:
    for cone, ell in funcs:
        g = np.array([[float(x) for x in a.fan.rays[i]] for i in cone]).T
        coeff = np.linalg.solve(g, point)
        if (coeff >= -1e-12).all():
            return ell
    raise PreconditionError("OUTSIDE_SUPPORT", "fan does not cover the quadrature box")


def hhat_inf_quadrature(a: ArchTransform, s: Sequence[complex], m: Sequence[float], box: float, grid: int) -> QuadratureResult:
    """Piecewise tensor Simpson rule on ``[-box, box]^r``.

    The box is cut along every ray so the integrand is smooth on each piece; each
    one-dimensional Simpson sum gets one Richardson step against its half-resolution grid.
    """
    if a.rank > 2:
        raise PreconditionError("RANK_TOO_LARGE", "quadrature oracle supports rank <= 2")
    s = np.asarray([complex(x) for x in s])
    if (s.real <= 0).any():
        raise PreconditionError("DOMAIN", "every s_e needs a positive real part")
    m = np.asarray(m, dtype=float)
    funcs = _cone_functionals(a, s)
    h = 2.0 * box / (grid - 1)
    decay = min(x.real for x in s) / max(np.abs(a.float_rays).sum(axis=1))
    bound = float(len(a.fan.max_cones) * math.exp(-decay * box) / max(decay, 1e-300) ** a.rank)
    if a.rank == 1:
        total = 0j
        for lo, hi in ((-box, 0.0), (0.0, box)):
            x = np.linspace(lo, hi, _odd((hi - lo) / h + 1))
            ell = _phi_linear(a, funcs, np.array([0.5 * (lo + hi)]))
            total += _simpson_richardson(np.exp((ell[0] - TWO_PI_I * m[0]) * x), x)
        return QuadratureResult(complex(total), bound)
    return QuadratureResult(_quad2(a, funcs, m, box, h), bound)


def _row_breaks(a: ArchTransform, y: float, box: float) -> list[float]:
    pts = [-box, box]
    for rx, ry in a.float_rays:
        if ry != 0 and y / ry > 0:
            x = y * rx / ry
            if -box < x < box:
                pts.append(x)
        elif ry == 0 and y == 0:
            pass
    return sorted(pts)


def _quad2(a: ArchTransform, funcs, m: np.ndarray, box: float, h: float) -> complex:
    ycuts = {-box, 0.0, box}
    for rx, ry in a.float_rays:
        if rx != 0 and ry != 0:
            yc = box * abs(ry / rx)
            if yc < box:
                ycuts.update({yc, -yc})
    ycuts = sorted(ycuts)
    total = 0j
    for y0, y1 in zip(ycuts[:-1], ycuts[1:]):
        ymid = 0.5 * (y0 + y1)
        lo_breaks, hi_breaks = _row_breaks(a, y0 + 1e-12 * (y1 - y0), box), _row_breaks(a, y1 - 1e-12 * (y1 - y0), box)
        mid_breaks = _row_breaks(a, ymid, box)
        if not (len(lo_breaks) == len(hi_breaks) == len(mid_breaks)):
            raise PreconditionError("DOMAIN", "breakpoint structure changes inside a band")
        ny = _odd((y1 - y0) / h + 1)
        ys = np.linspace(y0, y1, ny)
        # breakpoints are linear in y inside the band: x = c*y for ray crossings, constant at the box edge
        breaks = np.array([_row_breaks_at(a, ys, box, ymid, j) for j in range(len(mid_breaks))])
        for j in range(len(mid_breaks) - 1):
            left, right = breaks[j], breaks[j + 1]
            width = right - left
            xm = 0.5 * (mid_breaks[j] + mid_breaks[j + 1])
            ell = _phi_linear(a, funcs, np.array([xm, ymid]))
            nu = _odd(max(width.max(), 1e-300) / h + 1)
            u = np.linspace(0.0, 1.0, nu)
            rate_x = ell[0] - TWO_PI_I * m[0]
            rate_y = ell[1] - TWO_PI_I * m[1]
            # integrand on the (u, y) grid, integrated over u first
            inner = np.empty(ny, dtype=complex)
            for c0 in range(0, ny, 256):
                sl = slice(c0, c0 + 256)
                xs = left[None, sl] + u[:, None] * width[None, sl]
                vals = np.exp(rate_x * xs + rate_y * ys[None, sl]) * width[None, sl]
                inner[sl] = _simpson_richardson(vals, u, axis=0)
            total += _simpson_richardson(inner, ys)
    return complex(total)


def _row_breaks_at(a: ArchTransform, ys: np.ndarray, box: float, ymid: float, j: int) -> np.ndarray:
    """Track the j-th breakpoint (ordered at ``ymid``) across a band of rows."""
    pts = [(-box, None), (box, None)]
    for rx, ry in a.float_rays:
        if ry != 0 and ymid / ry > 0:
            x = ymid * rx / ry
            if -box < x < box:
                pts.append((x, rx / ry))
    pts.sort(key=lambda p: p[0])
    x, slope = pts[j]
    if slope is None:
        return np.full_like(ys, x)
    return ys * slope
