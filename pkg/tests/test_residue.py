import itertools
import random
from fractions import Fraction

import pytest
import sympy as sp

from conftest import laplace_det, random_rational
from toricheights.cyclicfan import build_cyclic_fan
from toricheights.errors import PreconditionError
from toricheights.exactlin import LatticeWithAction, invariants_basis, matmul, project_pi
from toricheights.fan import GaloisFan, default_d_cones, invariant_fan, place_fan
from toricheights.residue import (
    Jacobian,
    all_flags,
    classify_jacobian,
    context,
    enumerate_Z_sigma,
    jacobian_of,
    lu_factor,
    method_applicable,
    minors,
    residual_function,
    terminal_point,
    z_sigma_divergence,
)
from toricheights.standard_fans import (
    incompatible_example,
    projective_line,
    projective_plane,
    quadratic_severi_brauer,
)


def split_antenna():
    rays = ((-1, 0), (0, 1), (0, -1), (1, 1), (1, -1))
    cones = ((1, 3), (3, 4), (2, 4), (0, 1), (0, 2))
    return GaloisFan(LatticeWithAction.standard(2), rays, cones, boundary_rays=(0,), name="split-antenna")


def flag_fans():
    return [
        projective_line(),
        projective_plane(),
        quadratic_severi_brauer(),
        split_antenna(),
        build_cyclic_fan(3).fan,
        build_cyclic_fan(4).fan,
        build_cyclic_fan(5).fan,
    ]


def example_flags():
    out = []
    for fan in flag_fans():
        for sigma in default_d_cones(fan):
            for flag in enumerate_Z_sigma(fan, sigma):
                out.append((fan, sigma, flag))
    return out


def flag_id(item):
    fan, sigma, flag = item
    return f"{fan.name}-{sigma}-{flag.rays}"


EXAMPLE_FLAGS = example_flags()


def severi_brauer_r():
    s0, s1, s2 = sp.symbols("s0 s1 s2")
    return (s0 + s1 + s2) / ((s0 / 2 + s1) * (s0 / 2 + s2)), (s0, s1, s2)


# minors ----------------------------------------------------------------------

def naive_minors(m):
    """Direct transcription of the p, q, r minor definitions, with cofactor determinants."""
    k, ncols = len(m), len(m[0])
    p = [laplace_det([row[:a] for row in m[:a]]) for a in range(1, k + 1)]
    q = {}
    for a in range(1, k + 1):
        for b in range(a, ncols + 1):
            cols = list(range(a - 1)) + [b - 1]
            q[(a, b)] = laplace_det([[m[i][j] for j in cols] for i in range(a)])
    r = {}
    for b in range(1, k + 1):
        for a in range(1, b + 1):
            rows = [i for i in range(b) if i != a - 1]
            r[(a, b)] = laplace_det([[m[i][j] for j in range(b - 1)] for i in rows])
    return p, q, r


@pytest.mark.property
def test_minors_against_cofactor_expansion():
    rng = random.Random(99)
    for _ in range(100):
        m = tuple(tuple(Fraction(rng.randint(-5, 5)) for _ in range(4)) for _ in range(4))
        mi = minors(Jacobian(m))
        p, q, r = naive_minors(m)
        assert list(mi.p) == p
        assert mi.q == q
        assert mi.r == r
        for k in range(1, 5):
            assert mi.q[(k, k)] == mi.p[k - 1]
            # expanding p_k along its last column uses the r minors of that column
            expansion = sum(((-1) ** (j + k) * m[j - 1][k - 1] * mi.r[(j, k)] for j in range(1, k + 1)), Fraction(0))
            assert expansion == mi.p[k - 1]
            for ell in range(k + 1, 5):
                expansion = sum(((-1) ** (j + k) * m[j - 1][ell - 1] * mi.r[(j, k)] for j in range(1, k + 1)), Fraction(0))
                assert expansion == mi.q[(k, ell)]


@pytest.mark.property
def test_not_stable_implies_compatible():
    rng = random.Random(5)
    for _ in range(300):
        k, r = rng.randint(1, 4), 4
        m = tuple(tuple(Fraction(rng.randint(-3, 3)) for _ in range(r)) for _ in range(k))
        c = classify_jacobian(Jacobian(m))
        if not c.stable:
            assert c.compatible


@pytest.mark.property
def test_lu_factorisation_exists_when_leading_minors_are_nonzero():
    rng = random.Random(17)
    seen = 0
    for _ in range(200):
        m = tuple(tuple(Fraction(rng.randint(-4, 4)) for _ in range(3)) for _ in range(3))
        leading = minors(Jacobian(m)).p
        if all(x != 0 for x in leading):
            lower, upper = lu_factor(m)
            assert matmul(lower, upper) == m
            assert all(lower[i][j] == 0 for i in range(3) for j in range(i + 1, 3))
            assert all(upper[i][j] == 0 for i in range(3) for j in range(i))
            seen += 1
        else:
            with pytest.raises(PreconditionError) as e:
                lu_factor(m)
            assert e.value.code == "NOT_BTB"
    assert seen > 50


def test_classification_examples():
    ident = tuple(tuple(Fraction(int(i == j)) for j in range(4)) for i in range(4))
    c = classify_jacobian(Jacobian(ident))
    assert c.stable and c.compatible
    c = classify_jacobian(Jacobian(((Fraction(-1),),)))
    assert not c.stable and c.compatible
    c = classify_jacobian(Jacobian(((Fraction(1), Fraction(1)), (Fraction(0), Fraction(1)))))
    assert c.stable and not c.compatible


# jacobians and flags ----------------------------------------------------------

def test_severi_brauer_jacobians():
    fan = quadratic_severi_brauer()
    ctx = context(fan)
    inv = invariant_fan(fan)
    up = (inv.ambient_rays.index((1, 1)),)
    down = (inv.ambient_rays.index((-1, -1)),)
    assert jacobian_of(ctx.forms((0,)), ctx.polyhedron(up)).matrix == ((-1,),)
    assert jacobian_of(ctx.forms((0,)), ctx.polyhedron(down)).matrix == ((1,),)


def test_severi_brauer_single_flag_for_either_cone():
    fan = quadratic_severi_brauer()
    inv = invariant_fan(fan)
    expected, gens = severi_brauer_r()
    results = {}
    for ray in ((1, 1), (-1, -1)):
        sigma = (inv.ambient_rays.index(ray),)
        flags = enumerate_Z_sigma(fan, sigma)
        assert len(flags) == 1
        results[ray] = flags[0]
    assert results[(-1, -1)].rays == (0,)
    # the swapped pair e1, e2 cut out one hyperplane after imposing invariance
    assert sorted(results[(1, 1)].defining_subsets) == [(1,), (2,)]
    for flag in results.values():
        assert residual_function(fan, flag) == expected


def test_projective_plane_quadrant_has_one_flag():
    fan = projective_plane()
    sigma = (1, 2)
    flags = enumerate_Z_sigma(fan, sigma)
    # brute force over the six ordered pairs with the naive minors
    stable = []
    for pair in itertools.permutations(range(3), 2):
        m = [fan.rays[i] for i in pair]
        p, q, r = naive_minors(m)
        if all(x > 0 for x in p) and all((-1) ** (b - a) * r[(a, b)] >= 0 for b in (1, 2) for a in range(1, b)):
            stable.append(pair)
    assert stable == [(1, 2)]
    assert [f.rays for f in flags] == stable


@pytest.mark.parametrize("sigma_index", [0, 1])
def test_cyclic_three_flags(sigma_index):
    fan = build_cyclic_fan(3).fan
    sigma = default_d_cones(fan)[sigma_index]
    flags = enumerate_Z_sigma(fan, sigma)
    assert len(flags) == 1
    assert all(classify_jacobian(f.jacobian).stable for f in flags)
    assert residual_function(fan, flags[0]) == 1


def test_flag_listing_is_sorted_and_deterministic():
    fan = build_cyclic_fan(4).fan
    sigma = default_d_cones(fan)[0]
    first = [f.defining_subsets for f in all_flags(fan, sigma)]
    second = [f.defining_subsets for f in all_flags(fan, sigma)]
    assert first == second
    keys = [(tuple(sorted(s[0])), s[0]) for s in first]
    assert keys == sorted(keys)


def test_divergence_report_is_consistent():
    fan = build_cyclic_fan(4).fan
    for sigma in default_d_cones(fan):
        for flag in z_sigma_divergence(fan, sigma):
            assert flag.stable != flag.terminal_in_polyhedron


# terminal points --------------------------------------------------------------

def test_terminal_point_of_the_boundary_hyperplane():
    fan = quadratic_severi_brauer()
    ctx = context(fan)
    s0, s1, s2 = ctx.s
    point = terminal_point(fan, (0,))
    # the form of e0 is -1 on the invariant basis, so zeta = s0 solves -zeta + s0 = 0
    assert sp.simplify(point.zeta[0] - s0) == 0
    # a trace-zero twist restricts to zero on the fixed ray e0 ...
    m_xi = (1, -1)
    assert terminal_point(fan, (0,), m_xi=m_xi).zeta == point.zeta
    # ... but moves the point of a swapped ray by -mu(m_xi), and mu doubles m_xi(e1) on f1
    plain = terminal_point(fan, (1,)).zeta[0]
    assert sp.expand(plain + 2 * s1) == 0
    assert sp.expand(terminal_point(fan, (1,), m_xi=m_xi).zeta[0] - (plain - 2 * m_xi[0])) == 0


def test_terminal_point_for_fixed_rays_is_restriction():
    fan = projective_plane()
    ctx = context(fan)
    point = terminal_point(fan, (1, 2))
    s0, s1, s2 = ctx.s
    assert [sp.expand(x) for x in point.zeta] == [-s1, -s2]


def test_terminal_point_needs_a_cone():
    fan = projective_line()
    with pytest.raises(PreconditionError) as e:
        terminal_point(fan, (0, 1))
    assert e.value.code == "NOT_CONVEX"


# residual functions -----------------------------------------------------------

def test_severi_brauer_residual_function():
    fan = quadratic_severi_brauer()
    expected, _ = severi_brauer_r()
    rf = residual_function(fan, enumerate_Z_sigma(fan, default_d_cones(fan)[0])[0])
    assert rf == expected
    rng = random.Random(1)
    for _ in range(5):
        vals = {g: random_rational(rng, 1, 9) for g in rf.gens}
        assert rf.evaluate(vals) == Fraction(str(sp.Rational(expected.subs(vals))))


def test_projective_line_residual_is_one():
    fan = projective_line()
    (flag,) = enumerate_Z_sigma(fan, default_d_cones(fan)[0])
    assert residual_function(fan, flag) == 1


def invariant_linear_forms(fan, rng):
    """Random rational linear forms on the ambient space that the group fixes."""
    lat = fan.lattice
    groups = lat.ambient_group()
    base = [random_rational(rng) for _ in range(fan.rank)]
    total = [Fraction(0)] * fan.rank
    for g in groups:
        for j in range(fan.rank):
            total[j] += sum((base[i] * g[i][j] for i in range(fan.rank)), Fraction(0))
    return total


@pytest.mark.property
@pytest.mark.parametrize("item", EXAMPLE_FLAGS, ids=flag_id)
def test_translation_invariance(item):
    fan, _, flag = item
    rf = residual_function(fan, flag)
    rng = random.Random(hash(flag_id(item)) % 1000)
    for _ in range(5):
        form = invariant_linear_forms(fan, rng)
        shift = {v: v + sp.Rational(str(sum((a * b for a, b in zip(form, ray)), Fraction(0))))
                 for v, ray in zip(rf.gens, fan.rays)}
        moved = rf.expr().subs(shift, simultaneous=True)
        assert sp.cancel(moved - rf.expr()) == 0
        for _ in range(5):
            vals = {v: sp.Rational(str(random_rational(rng, 1, 9))) for v in rf.gens}
            assert moved.subs(vals) == rf.expr().subs(vals)


@pytest.mark.property
@pytest.mark.parametrize(
    "item",
    [i for i in EXAMPLE_FLAGS if i[0].name in ("quadratic-SB", "cyclic3", "cyclic4", "cyclic5")],
    ids=flag_id,
)
def test_positivity_along_the_anticanonical_ray(item):
    fan, _, flag = item
    rf = residual_function(fan, flag)
    for t in (Fraction(1, 2), Fraction(3, 4), Fraction(1), Fraction(2)):
        assert rf.evaluate({v: t for v in rf.gens}) > 0


def place_transform(fan):
    """The transform at the place built directly from fan data, in variables m (invariant dual) and s."""
    lat = fan.lattice
    pw = place_fan(fan)
    fixed = invariants_basis(lat, range(lat.order))
    s = sp.symbols(f"s0:{len(fan.rays)}")
    m = sp.symbols(f"m0:{fixed.dim}")
    forms, shifts = [], []
    for (orbit, k), ray in zip(pw.back_map, pw.ambient_rays):
        c = fixed.coordinates(project_pi(lat, ray))
        forms.append([sp.Rational(x.numerator, x.denominator) for x in c])
        shifts.append(sp.Add(*[s[i] for i in orbit]) / k)
    total = sp.Integer(0)
    for cone in pw.fan.max_cones:
        term = sp.Integer(int(pw.fan.index(cone)))
        for e in cone:
            term /= sp.Add(*[a * b for a, b in zip(forms[e], m)]) + shifts[e]
        total += term
    return total, forms, shifts, m, s


def iterated_residue(fan, subset):
    f, forms, shifts, m, s = place_transform(fan)
    c = sp.Matrix([forms[e] for e in subset])
    z = sp.symbols(f"z0:{len(subset)}")
    m_of_z = c.inv() * sp.Matrix(z)
    g = f.subs(dict(zip(m, m_of_z)), simultaneous=True) / abs(c.det())
    for zi, e in zip(z, subset):
        g = sp.cancel(sp.together((zi + shifts[e]) * g)).subs(zi, -shifts[e])
    return sp.cancel(g), s


@pytest.mark.property
@pytest.mark.parametrize(
    "item",
    [i for i in EXAMPLE_FLAGS if i[0].name in ("P1", "P2", "quadratic-SB", "split-antenna", "cyclic3", "cyclic5")],
    ids=flag_id,
)
def test_residual_equals_iterated_one_variable_residues(item):
    fan, _, flag = item
    total = sp.Integer(0)
    for subset in flag.defining_subsets:
        value, s = iterated_residue(fan, subset)
        total += value
    rf = residual_function(fan, flag)
    assert sp.cancel(total.subs(dict(zip(s, rf.gens))) - rf.expr()) == 0


def test_residual_rejects_non_convex_subsets():
    with pytest.raises(PreconditionError):
        residual_function(projective_line(), (0, 1))


# applicability -----------------------------------------------------------------

@pytest.mark.property
@pytest.mark.parametrize("n", [3, 4, 5])
def test_cyclic_fans_are_applicable(n):
    res = method_applicable(build_cyclic_fan(n).fan)
    assert res.applicable and res.checked > 0


def test_severi_brauer_is_applicable():
    assert method_applicable(quadratic_severi_brauer()).applicable


def test_incompatible_example_has_a_witness():
    res = method_applicable(incompatible_example())
    assert not res.applicable
    sigma, subset, matrix = res.witness
    c = classify_jacobian(Jacobian(matrix))
    assert c.stable and not c.compatible
    assert any(c.minors.q[(a, b)] > 0 for b in range(2, 3) for a in range(1, b))
    # the witness is a genuine flag: its rays share a cone of the fan
    ctx = context(incompatible_example())
    assert ctx.place.fan.is_cone(subset)
    assert laplace_det(ctx.forms(subset)) != 0
