"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute. Every tolerance is pinned here, not configurable.
"""

import json

import numpy as np
import pytest

from opcalc.calculus import (
    CalculusOptions,
    boxdot,
    boxtimes,
    funm,
    transformator_matrix,
    transformator_resolvent,
    transformator_spectrum,
)
from opcalc.cli import main as cli_main
from opcalc.cli import read_matrix, write_matrix
from opcalc.errors import MethodNotApplicable, NuInSpectrum
from opcalc.frechet import (
    DifferentialRequest,
    frechet,
    frechet_block_oracle,
    frechet_exp,
)
from opcalc.holofun import (
    HoloFun2,
    builtin,
    composed,
    dd_kernel,
    kernel2,
    separable,
)
from opcalc.numcore import eigenvalues, multiset_match_distance
from opcalc.pencil import (
    PencilFactorization,
    QuadraticPencil,
    impulse_response,
    impulse_response_factored,
    right_solvent_newton,
    solve_ivp,
)
from opcalc.sylvester import SylvesterProblem, q_apply_sign_form, solve_sylvester

from helpers import diagonalizable, rand_complex, separated_pair
from oracles import expm_taylor, rk4_second_order


def _report(num, desc, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:2d} [{status}] {desc} ({detail})")
    assert ok, f"criterion {num}: {desc} -- {detail}"


def test_criterion_01_sylvester_backends():
    worst_resid, worst_agree = 0.0, 0.0
    series_used = 0
    for seed in range(20):
        a, b, c = separated_pair(seed)
        prob = SylvesterProblem(a, b, c)
        cnorm = np.linalg.norm(c)
        ref = solve_sylvester(prob, "kron_oracle").array
        results = {
            "contour": solve_sylvester(prob, "contour").array,
            "exp_integral": solve_sylvester(prob, "exp_integral").array,
            "sign_form": q_apply_sign_form(a, b, c).array,
        }
        try:
            results["series"] = solve_sylvester(prob, "series").array
            series_used += 1
        except MethodNotApplicable:
            pass
        for z in results.values():
            worst_resid = max(worst_resid, np.linalg.norm(a @ z - z @ b - c) / cnorm)
            worst_agree = max(worst_agree, np.linalg.norm(z - ref) / np.linalg.norm(ref))
    ok = worst_resid <= 1e-8 and worst_agree <= 1e-7 and series_used > 0
    _report(
        1,
        "Sylvester backends residual <= 1e-8 and kron agreement <= 1e-7 on 20 instances",
        ok,
        f"max residual {worst_resid:.2e}, max disagreement {worst_agree:.2e}, "
        f"series applicable on {series_used}/20",
    )


def test_criterion_02_two_variable_spectral_mapping():
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(300 + seed)
        a = diagonalizable(rng, 5, center=-2.0, spread=0.8)
        b = diagonalizable(rng, 4, center=2.0, spread=0.8)
        kernels = [
            kernel2("sylvester_w"),
            separable(builtin("exp", t=1.0), builtin("exp", t=1.0)),
            composed(builtin("exp", t=1.0), kernel2("sum")),
        ]
        for f in kernels:
            vals = transformator_spectrum(f, a, b)
            lifted = eigenvalues(transformator_matrix(f, a, b).lift.array)
            worst = max(worst, multiset_match_distance(vals, lifted))
    _report(
        2,
        "transformator spectrum matches lifted eigenvalues <= 1e-6 after matching",
        worst <= 1e-6,
        f"max multiset distance {worst:.2e}",
    )


def test_criterion_03_boxdot_boxtimes_bridge():
    fs = [
        builtin("pow", n=2),
        builtin("pow", n=5),
        builtin("exp", t=0.7),
        builtin("inv_shift", l0=7.0),
        builtin("rational", p=(1.0, 1.0), q=(6.0, 1.0)),
    ]
    rng = np.random.default_rng(310)
    a = diagonalizable(rng, 5, center=0.3, spread=1.0)
    b = diagonalizable(rng, 4, center=-0.2, spread=1.0)
    c = rand_complex(rng, 5, 4)
    worst = 0.0
    for f in fs:
        lhs = boxdot(f, a, b, c).array
        rhs = boxtimes(dd_kernel(f), a, b, c).array
        scale = 1.0 + np.linalg.norm(rhs)
        worst = max(worst, np.linalg.norm(lhs - rhs) / scale)
    _report(
        3,
        "boxdot equals boxtimes of the divided difference <= 1e-8 * scale",
        worst <= 1e-8,
        f"max scaled deviation {worst:.2e}",
    )


def test_criterion_04_frechet_routes():
    fs = [
        builtin("exp", t=1.0),
        builtin("pow", n=3),
        builtin("rational", p=(1.0, 1.0), q=(8.0, 1.0)),
    ]
    rng = np.random.default_rng(320)
    a = rand_complex(rng, 5, 5, scale=0.6)
    da = rand_complex(rng, 5, 5)
    worst_block, worst_fd = 0.0, 0.0
    for f in fs:
        d = frechet(DifferentialRequest(f, a, da)).array
        oracle = frechet_block_oracle(f, a, da).array
        worst_block = max(
            worst_block, np.linalg.norm(d - oracle) / (1 + np.linalg.norm(oracle))
        )
        h = 1e-5
        fd = (funm(f, a + h * da).array - funm(f, a - h * da).array) / (2 * h)
        worst_fd = max(worst_fd, np.linalg.norm(d - fd) / (1 + np.linalg.norm(fd)))
    # quadratic remainder of the first-order expansion at three magnitudes
    f = builtin("exp", t=1.0)
    fa = funm(f, a).array
    ks = []
    for mag in (1e-2, 1e-3, 1e-4):
        step = mag * da / np.linalg.norm(da)
        d = frechet(DifferentialRequest(f, a, step)).array
        ks.append(np.linalg.norm(funm(f, a + step).array - fa - d) / mag ** 2)
    k_stable = max(ks) <= 10 * min(ks) + 1e-9
    dks = frechet_exp(a, da, 1.0).array
    d_exp = frechet(DifferentialRequest(builtin("exp", t=1.0), a, da)).array
    ks_dev = np.linalg.norm(dks - d_exp) / (1 + np.linalg.norm(d_exp))
    ok = worst_block <= 1e-8 and worst_fd <= 1e-4 and k_stable and ks_dev <= 1e-8
    _report(
        4,
        "Frechet matches block oracle (1e-8), finite differences (1e-4), "
        "quadratic remainder stable, time-integral exponential path (1e-8)",
        ok,
        f"block {worst_block:.2e}, fd {worst_fd:.2e}, K range "
        f"[{min(ks):.3g}, {max(ks):.3g}], exp-path {ks_dev:.2e}",
    )


def test_criterion_05_pencil():
    p = QuadraticPencil([[1.0]], [[0.0]], [[1.0]])
    worst_scalar = 0.0
    for t in np.arange(0.1, 2.0001, 0.1):
        tt, td = impulse_response(p, float(t))
        worst_scalar = max(
            worst_scalar,
            abs(tt.array[0, 0] - np.sin(t)),
            abs(td.array[0, 0] - np.cos(t)),
        )
    worst_cross, worst_ivp, worst_semi = 0.0, 0.0, 0.0
    for seed in (330, 331):
        rng = np.random.default_rng(seed)
        a1 = diagonalizable(rng, 5, center=-2.0, spread=0.8)
        a2 = diagonalizable(rng, 5, center=2.0, spread=0.8)
        f, h = -(a1 + a2), a2 @ a1
        pen = QuadraticPencil(np.eye(5), f, h)
        fact = PencilFactorization(a1, a2)
        t = 0.8
        tt1, td1 = impulse_response(pen, t)
        tt2, td2 = impulse_response_factored(fact, np.eye(5), t)
        worst_cross = max(
            worst_cross,
            np.linalg.norm(tt1.array - tt2.array) / (1 + np.linalg.norm(tt1.array)),
            np.linalg.norm(td1.array - td2.array) / (1 + np.linalg.norm(td1.array)),
        )
        y0, y1 = rand_complex(rng, 5, 1), rand_complex(rng, 5, 1)
        for tq in (0.7, 2.0):
            y = solve_ivp(pen, y0, y1, tq).array
            ref = rk4_second_order(np.eye(5), f, h, y0, y1, tq)
            worst_ivp = max(worst_ivp, np.linalg.norm(y - ref) / (1 + np.linalg.norm(ref)))
        ts, ss = 0.6, 0.9
        t_sum = impulse_response(pen, ts + ss)[0].array
        t1m = funm(builtin("exp", t=ts), a1).array
        t2m = funm(builtin("exp", t=ss), a2).array
        t_t = impulse_response(pen, ts)[0].array
        t_s = impulse_response(pen, ss)[0].array
        worst_semi = max(
            worst_semi,
            np.linalg.norm(t_sum - (t1m @ t_s + t_t @ t2m)) / (1 + np.linalg.norm(t_sum)),
        )
    ok = (
        worst_scalar <= 1e-9
        and worst_cross <= 1e-8
        and worst_ivp <= 1e-6
        and worst_semi <= 1e-8
    )
    _report(
        5,
        "pencil: scalar sin/cos 1e-9, factored/direct 1e-8, RK4 IVP 1e-6, semigroup 1e-8",
        ok,
        f"scalar {worst_scalar:.2e}, cross {worst_cross:.2e}, ivp {worst_ivp:.2e}, "
        f"semigroup {worst_semi:.2e}",
    )


def test_criterion_06_pseudo_resolvent():
    rng = np.random.default_rng(340)
    a = diagonalizable(rng, 4, center=-1.5, spread=0.6)
    b = diagonalizable(rng, 3, center=1.5, spread=0.6)
    kernels = [kernel2("diff"), separable(builtin("pow", n=2), builtin("const", c=1.0))]
    worst = 0.0
    for f in kernels:
        vals = transformator_spectrum(f, a, b)
        far = 1.0 + max(abs(v) for v in vals)
        nus = (far * 1j, -2.0 * far)
        lifts = {}
        for nu in nus:
            h = HoloFun2(
                f"h_{nu}", lambda lam, mu, nu=nu, f=f: 1.0 / (nu - f(lam, mu)),
                cross=("plane", nu, -1.0) if f.kind == "diff" else None,
            )
            lifts[nu] = transformator_matrix(h, a, b).lift.array
        n1, n2 = nus
        resid = np.linalg.norm(lifts[n1] - lifts[n2] + (n1 - n2) * lifts[n1] @ lifts[n2])
        worst = max(worst, resid)
    raised = False
    try:
        bad_nu = complex(
            transformator_spectrum(kernel2("diff"), a, b)[0]
        )
        transformator_resolvent(kernel2("diff"), a, b, bad_nu, rand_complex(rng, 4, 3))
    except NuInSpectrum:
        raised = True
    ok = worst <= 1e-8 and raised
    _report(
        6,
        "S_nu Hilbert identity <= 1e-8 on lifted matrices; NuInSpectrum guarded",
        ok,
        f"max Hilbert residual {worst:.2e}, guard raised: {raised}",
    )


def test_criterion_07_quadrature_convergence():
    from opcalc.contour import Contour, integrate

    rng = np.random.default_rng(350)
    v = np.eye(6) + 0.2 * rng.standard_normal((6, 6))
    a = v @ np.diag([0.0, 0.5, 1.0, 1.5, 2.0, 2.5]) @ np.linalg.inv(v)
    ref = expm_taylor(a)
    eye = np.eye(6)
    errs = {}
    for nodes in (32, 64):
        gamma = Contour(components=((1.25 + 0j, 1.9, 1),), nodes_per_component=nodes)
        q = integrate(gamma, lambda z: np.exp(z) * np.linalg.solve(z * eye - a, eye), fixed=True)
        errs[nodes] = np.linalg.norm(q.value.array - ref)
    ratio = errs[32] / errs[64]
    _report(
        7,
        "funm(exp) error vs Taylor oracle drops >= 100x from 32 to 64 nodes",
        ratio >= 100.0,
        f"err32 {errs[32]:.2e}, err64 {errs[64]:.2e}, ratio {ratio:.1f}",
    )


def test_criterion_08_morphism_and_spectral_mapping():
    rng = np.random.default_rng(360)
    a = diagonalizable(rng, 6, center=0.2, spread=1.2)
    pairs = [
        (builtin("exp", t=0.5), builtin("pow", n=2)),
        (builtin("inv_shift", l0=9.0), builtin("exp", t=0.3)),
        (builtin("poly", coeffs=(0.5, 1.0, 0.25)), builtin("id")),
    ]
    worst_mult = 0.0
    for f, g in pairs:
        prod = funm(f * g, a).array
        sep = funm(f, a).array @ funm(g, a).array
        worst_mult = max(worst_mult, np.linalg.norm(prod - sep) / (1 + np.linalg.norm(prod)))
    worst_map = 0.0
    for f in (builtin("exp", t=0.8), builtin("pow", n=3)):
        mapped = [f(lam) for lam in eigenvalues(a)]
        computed = eigenvalues(funm(f, a).array)
        worst_map = max(worst_map, multiset_match_distance(mapped, computed))
    ok = worst_mult <= 1e-9 and worst_map <= 1e-6
    _report(
        8,
        "funm multiplicativity <= 1e-9; one-variable spectral mapping <= 1e-6",
        ok,
        f"multiplicativity {worst_mult:.2e}, mapping {worst_map:.2e}",
    )


def test_criterion_09_newton_solvent():
    worst_resid, worst_ident, worst_iters = 0.0, 0.0, 0
    for seed in range(10):
        rng = np.random.default_rng(370 + seed)
        a1 = diagonalizable(rng, 5, center=-2.0, spread=0.8)
        a2 = diagonalizable(rng, 5, center=2.0, spread=0.8)
        f, h = -(a1 + a2), a2 @ a1
        x0 = a1 + 0.05 * rand_complex(rng, 5, 5)
        rep = {}
        x = right_solvent_newton(f, h, x0, report=rep).array
        worst_iters = max(worst_iters, rep["iterations"])
        worst_resid = max(worst_resid, np.linalg.norm(x @ x + f @ x + h))
        fact = PencilFactorization(x, -f - x)
        worst_ident = max(worst_ident, fact.verify(np.eye(5), f, h, npoints=5, tol=1e-8))
    ok = worst_resid <= 1e-10 and worst_iters <= 30 and worst_ident <= 1e-8
    _report(
        9,
        "Newton solvent: residual <= 1e-10 within 30 iterations, "
        "factorization resolvent identity <= 1e-8 at 5 points",
        ok,
        f"max residual {worst_resid:.2e}, max iterations {worst_iters}, "
        f"max identity deviation {worst_ident:.2e}",
    )


def test_criterion_10_cli_determinism_and_guards(tmp_path):
    a, b, c = separated_pair(380)
    pa, pb, pc = (str(tmp_path / f"{k}.json") for k in "abc")
    write_matrix(pa, a)
    write_matrix(pb, b)
    write_matrix(pc, c)
    out = str(tmp_path / "z.mtx")
    blobs = []
    for k in range(2):
        rc = cli_main(["sylvester", "--A", pa, "--B", pb, "--C", pc,
                       "--method", "contour", "--out", out,
                       "--report", str(tmp_path / f"rep{k}.json")])
        assert rc == 0
        blobs.append(open(out, "rb").read())
    identical = blobs[0] == blobs[1]
    rep0 = json.loads((tmp_path / "rep0.json").read_text())
    rep1 = json.loads((tmp_path / "rep1.json").read_text())
    rep0.pop("timings")
    rep1.pop("timings")
    identical = identical and rep0 == rep1
    po_a = str(tmp_path / "oa.json")
    po_b = str(tmp_path / "ob.json")
    po_c = str(tmp_path / "oc.json")
    write_matrix(po_a, np.diag([1.0, 2.0]))
    write_matrix(po_b, np.diag([2.0, 5.0]))
    write_matrix(po_c, np.ones((2, 2)))
    blocked_out = tmp_path / "blocked.json"
    rc = cli_main(["sylvester", "--A", po_a, "--B", po_b, "--C", po_c,
                   "--out", str(blocked_out)])
    guarded = rc == 3 and not blocked_out.exists()
    ok = identical and guarded
    _report(
        10,
        "CLI repeated runs bit-identical; overlapping spectra exit 3 with no output",
        ok,
        f"bit-identical: {identical}, guarded failure: {guarded}",
    )
