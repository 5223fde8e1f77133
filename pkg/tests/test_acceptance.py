"""Acceptance criteria, one test each, with every tolerance and time budget pinned below.

Each test prints ``PASS`` or ``FAIL`` with its runtime; the lines are repeated in the
terminal summary.
"""

import math
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import sympy as sp

from conftest import ACCEPTANCE_LINES
from test_cyclicfan import PUBLISHED_R4
from test_residue import flag_fans, invariant_linear_forms
from toricheights.arith import RealQuadraticField, brute_count_sb, brute_zeta_sb, explicit_count_sb, zeta_sb_rhs
from toricheights.archtransform import ArchTransform, hhat_inf_eval, hhat_inf_quadrature, hhat_inf_symbolic
from toricheights.cyclicfan import (
    build_cyclic_fan,
    compat_tables,
    cyclotomic_residue,
    kappa_0_partial,
    kappa_d,
    omega_projection,
    qp_factor_symbolic,
)
from toricheights.fan import Convexity, convexity_class, default_d_cones, invariant_fan
from toricheights.periods import RegulatorLattice, rho_integral, rho_partial_sum
from toricheights.residue import enumerate_Z_sigma, method_applicable, residual_function
from toricheights.standard_fans import antenna, projective_plane, quadratic_severi_brauer

ROOT = Path(__file__).resolve().parent.parent
LOG_U = math.log(1 + math.sqrt(2))

# pinned tolerances and budgets (seconds)
RFUN_POINTS, RFUN_BUDGET = 5, 1.0
PERIOD_TARGET, PERIOD_TOL, RHO_T, RHO_RADIUS, RHO_TOL, PERIOD_BUDGET = 2.0, 1e-6, 1.0, 500, 1e-6, 5.0
ARCH_POINTS, ARCH_REL_TOL, ARCH_BUDGET = 10, 1e-5, 30.0
RESTRICT_BUDGET = 1.0
COMPAT_BUDGET = 60.0
QP_BUDGET = 1.0
OMEGA_BUDGET = 1.0
SHIFT_SAMPLES, SHIFT_BUDGET = 5, 5.0
POSITIVITY_TS, POSITIVITY_BUDGET = (Fraction(1, 2), Fraction(1), Fraction(2)), 5.0
BRUTE_X, BRUTE_WINDOW, BRUTE_BUDGET = 200, (1.34, 1.48), 60.0
EXPLICIT_X, EXPLICIT_K, EXPLICIT_REL, EXPLICIT_BUDGET = 50, 30, 0.02, 120.0
ZETA_S, ZETA_K, ZETA_NORMS, ZETA_X, ZETA_REL, ZETA_BUDGET = 6.0, 25, 10**4, 10**3, 0.01, 120.0
KAPPA_N, KAPPA_PBOUND, RESIDUE_TOL, KAPPA_BUDGET = 5, 10**4, 1e-6, 300.0
PROPERTY_BUDGET = 300.0


@contextmanager
def criterion(number, title, budget):
    """Time the body; the body sets ``state['ok']`` and ``state['detail']``."""
    state = {"ok": False, "detail": ""}
    start = time.perf_counter()
    try:
        yield state
    finally:
        elapsed = time.perf_counter() - start
        in_time = elapsed < budget
        verdict = "PASS" if state["ok"] and in_time else "FAIL"
        line = f"criterion {number}: {verdict} {title} [{elapsed:.2f}s / {budget:g}s] {state['detail']}".rstrip()
        print(line)
        ACCEPTANCE_LINES.append(line)
    assert state["ok"], line
    assert in_time, line


def projective_plane_single_fraction(m_vars, t_vars):
    x, y = m_vars
    t0, t1, t2 = t_vars
    return (t0 + t1 + t2) / ((x + t1) * (y + t2) * (-x - y + t0))


def sb_flag():
    fan = quadratic_severi_brauer()
    (sigma,) = default_d_cones(fan)
    (flag,) = enumerate_Z_sigma(fan, sigma)
    return fan, residual_function(fan, flag)


def test_criterion_01_residual_function():
    with criterion(1, "SB residual function exact", RFUN_BUDGET) as st:
        fan, rf = sb_flag()
        rng = random.Random(1)
        s0, s1, s2 = rf.gens
        mismatches = 0
        for _ in range(RFUN_POINTS):
            a, b, c = (Fraction(rng.randint(1, 50), rng.randint(1, 17)) for _ in range(3))
            expected = (a + b + c) / ((a / 2 + b) * (a / 2 + c))
            got = rf.evaluate({s0: a, s1: b, s2: c})
            mismatches += got != expected
        st["ok"] = mismatches == 0
        st["detail"] = f"mismatches={mismatches}/{RFUN_POINTS}"


def test_criterion_02_period_and_rho():
    with criterion(2, "SB period integral and rho partial sum", PERIOD_BUDGET) as st:
        fan, rf = sb_flag()
        thirds = (Fraction(1, 3),) * 3
        integral = rho_integral(fan, rf, thirds)
        lattice = RegulatorLattice(((1 / LOG_U,),), LOG_U)
        target = 2 * LOG_U / math.tanh(RHO_T * LOG_U / 2)
        partial = rho_partial_sum(fan, rf, lattice, thirds, RHO_T, RHO_RADIUS).real
        corrected = rho_partial_sum(fan, rf, lattice, thirds, RHO_T, RHO_RADIUS, tail_correction=True).real
        integral_err, partial_err = abs(integral - PERIOD_TARGET), abs(partial - target)
        st["ok"] = integral_err < PERIOD_TOL and partial_err < RHO_TOL
        st["detail"] = (
            f"integral_err={integral_err:.2e} partial_sum_err={partial_err:.2e} (tol {RHO_TOL:g}); "
            f"with integral tail the error is {abs(corrected - target):.2e}"
        )


def test_criterion_03_archimedean_transform():
    with criterion(3, "P2 transform: closed form vs quadrature", ARCH_BUDGET) as st:
        arch = ArchTransform(projective_plane())
        rng = random.Random(3)
        worst = 0.0
        for _ in range(ARCH_POINTS):
            s = [complex(rng.uniform(1, 3), rng.uniform(-1, 1)) for _ in range(3)]
            radius, angle = 2 * math.sqrt(rng.random()), rng.uniform(0, 2 * math.pi)
            m = (radius * math.cos(angle), radius * math.sin(angle))
            exact = hhat_inf_eval(arch, s, m)
            quad = hhat_inf_quadrature(arch, s, m, box=30, grid=4001).value
            worst = max(worst, abs(quad - exact) / abs(exact))
        sym = hhat_inf_symbolic(arch)
        matches = sp.cancel(sym.function.expr() - projective_plane_single_fraction(sym.m_vars, sym.t_vars)) == 0
        st["ok"] = worst < ARCH_REL_TOL and matches and sym.prefactor_power == -2
        st["detail"] = f"worst_rel_err={worst:.2e} exact_form_match={matches}"


def test_criterion_04_restricted_fans():
    with criterion(4, "restricted fans and convexity", RESTRICT_BUDGET) as st:
        sb = invariant_fan(quadratic_severi_brauer())
        sb_ks = [k for _, k in sb.back_map]
        ant = invariant_fan(antenna())
        ant_k = ant.back_map[ant.ambient_rays.index((1, 0))][1]
        cls = convexity_class(antenna())
        st["ok"] = sb_ks == [1, 1] and ant_k == 2 and cls is Convexity.NOT_CONVEX
        st["detail"] = f"sb_k={sb_ks} antenna_k={ant_k} antenna={cls.value}"


def test_criterion_05_compatibility():
    with criterion(5, "r=4 Jacobian tables and applicability", COMPAT_BUDGET) as st:
        tables = compat_tables(build_cyclic_fan(8))
        wrong = [key for key, mat in PUBLISHED_R4.items() if tables.get(*key) != mat]
        verdicts = {f"cyclic{n}": method_applicable(build_cyclic_fan(n).fan).applicable for n in (3, 4, 5)}
        verdicts["SB"] = method_applicable(quadratic_severi_brauer()).applicable
        st["ok"] = not wrong and tables.all_compatible and all(verdicts.values())
        st["detail"] = f"mismatched={wrong} all_compatible={tables.all_compatible} applicable={verdicts}"


def test_criterion_06_local_factors():
    with criterion(6, "Q_p exact", QP_BUDGET) as st:
        p, u = sp.symbols("p u", positive=True)
        split = qp_factor_symbolic(build_cyclic_fan(5), [1])
        split_ok = sp.expand(split - (1 + 4 * p ** (-2 * u))) == 0
        inert = {n: qp_factor_symbolic(build_cyclic_fan(n), range(1, n)) for n in (3, 5, 7)}
        st["ok"] = split_ok and all(v == 1 for v in inert.values())
        st["detail"] = f"split={split} inert={inert}"


def test_criterion_07_omega_projection():
    with criterion(7, "projection of omega", OMEGA_BUDGET) as st:
        bad = []
        for n in range(3, 9):
            data = build_cyclic_fan(n)
            half = tuple(Fraction(sum(col), 2) for col in zip(*data.f_generators[1:]))
            if omega_projection(data) != half:
                bad.append(n)
        st["ok"] = not bad
        st["detail"] = f"failing_n={bad}"


def example_flags():
    for fan in flag_fans():
        for sigma in default_d_cones(fan):
            for flag in enumerate_Z_sigma(fan, sigma):
                yield fan, flag


def test_criterion_08_translation_invariance():
    with criterion(8, "translation invariance", SHIFT_BUDGET) as st:
        rng = random.Random(8)
        checked = failures = 0
        for fan, flag in example_flags():
            rf = residual_function(fan, flag)
            expr = rf.expr()
            for _ in range(SHIFT_SAMPLES):
                form = invariant_linear_forms(fan, rng)
                shift = {
                    v: v + 2 * sp.pi * sp.I * sp.Rational(str(sum((a * b for a, b in zip(form, ray)), Fraction(0))))
                    for v, ray in zip(rf.gens, fan.rays)
                }
                failures += sp.cancel(expr.subs(shift, simultaneous=True) - expr) != 0
                checked += 1
        st["ok"] = failures == 0 and checked > 0
        st["detail"] = f"checked={checked} failures={failures}"


def test_criterion_09_positivity():
    with criterion(9, "positivity along the anticanonical ray", POSITIVITY_BUDGET) as st:
        checked, bad = 0, []
        for fan, flag in example_flags():
            if convexity_class(fan) is not Convexity.STRONGLY_CONVEX:
                continue
            rf = residual_function(fan, flag)
            for t in POSITIVITY_TS:
                checked += 1
                if not rf.evaluate({v: t for v in rf.gens}) > 0:
                    bad.append((fan.name, flag.rays, t))
        st["ok"] = not bad and checked > 0
        st["detail"] = f"checked={checked} nonpositive={bad}"


def test_criterion_10_brute_main_term():
    with criterion(10, "brute-force count over X^2", BRUTE_BUDGET) as st:
        ratio = brute_count_sb(RealQuadraticField(2), BRUTE_X) / BRUTE_X**2
        st["ok"] = BRUTE_WINDOW[0] <= ratio <= BRUTE_WINDOW[1]
        st["detail"] = f"ratio={ratio:.5f} window={BRUTE_WINDOW}"


def test_criterion_11_explicit_formula():
    with criterion(11, "explicit formula vs brute count", EXPLICIT_BUDGET) as st:
        field = RealQuadraticField(2)
        brute = brute_count_sb(field, EXPLICIT_X)
        explicit = explicit_count_sb(field, EXPLICIT_X, EXPLICIT_K)
        rel = abs(explicit - brute) / brute
        st["ok"] = rel < EXPLICIT_REL
        st["detail"] = f"brute={brute} explicit={explicit:.3f} rel_err={rel:.4f}"


def test_criterion_12_zeta_identity():
    with criterion(12, "zeta identity at s=6", ZETA_BUDGET) as st:
        field = RealQuadraticField(2)
        rhs = zeta_sb_rhs(field, ZETA_S, ZETA_K, ZETA_NORMS)
        brute = brute_zeta_sb(field, ZETA_S, ZETA_X)
        rel = abs(rhs - brute) / brute
        st["ok"] = rel < ZETA_REL
        st["detail"] = f"rhs={rhs:.6f} brute={brute:.6f} rel_err={rel:.4f} (tol {ZETA_REL:g})"


def test_criterion_13_kappa_assembly():
    with criterion(13, "kappa assembly", KAPPA_BUDGET) as st:
        data = build_cyclic_fan(KAPPA_N)
        kd = [kappa_d(KAPPA_N, d).value for d in data.divisors]
        k0 = kappa_0_partial(KAPPA_N, KAPPA_PBOUND)
        factors = kd + [k0.value, k0.euler_product, *k0.residues.values()]
        finite = all(math.isfinite(x) and x > 0 for x in factors)
        res_err = abs(cyclotomic_residue(3) - math.pi / (3 * math.sqrt(3)))
        st["ok"] = finite and res_err < RESIDUE_TOL
        st["detail"] = f"kappa_d={[round(x, 4) for x in kd]} kappa_0={k0.value:.6f} residue_err={res_err:.1e}"


def test_criterion_14_property_suite():
    with criterion(14, "property suite", PROPERTY_BUDGET) as st:
        proc = subprocess.run(
            [sys.executable, "-m", "pytest", "-q", "-m", "property", "-p", "no:cacheprovider", "tests"],
            cwd=ROOT,
            capture_output=True,
            text=True,
            check=False,
        )
        tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
        st["ok"] = proc.returncode == 0
        st["detail"] = f"exit={proc.returncode} ({tail})"
