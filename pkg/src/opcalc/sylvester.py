"""The transformator Q and equation solvers built on it.

Sign convention, pinned by the scalar case A=[2], B=[-3], C=[5] -> Z=[1]:
``Q`` applied to ``C`` is the unique solution of ``A Z - Z B = C``, i.e. the
two-variable calculus applied to the kernel ``1/(lam - mu)``. Every backend
certifies its own residual before returning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import CalculusOptions, boxtimes, funm_family, _enclose, _resolvent_cache
from .contour import envelope, integrate
from .errors import (
    CannotSeparate,
    CertificationError,
    DivergenceDetected,
    MethodNotApplicable,
    NotASolution,
    ProductSpectrumHitsOne,
    ShapeMismatch,
    SpectraOverlap,
)
from .holofun import builtin, kernel2
from .numcore import ComplexMatrix, _as_array, as_matrix, eigenvalues, unvec, vec

_DEFAULT = CalculusOptions()

SYLVESTER_METHODS = ("contour", "exp_integral", "series", "kron_oracle")
STEIN_METHODS = ("boxtimes", "kron_oracle")


@dataclass(frozen=True)
class SylvesterProblem:
    """Data of a continuous Sylvester (A Z - Z B = C) or Stein (Z - A Z B = C) equation."""

    a: ComplexMatrix
    b: ComplexMatrix
    c: ComplexMatrix
    kind: str = "continuous"

    def __post_init__(self):
        object.__setattr__(self, "a", as_matrix(self.a))
        object.__setattr__(self, "b", as_matrix(self.b))
        object.__setattr__(self, "c", as_matrix(self.c))
        if not self.a.is_square or not self.b.is_square:
            raise ShapeMismatch("A and B must be square")
        if self.c.rows != self.a.rows or self.c.cols != self.b.rows:
            raise ShapeMismatch(
                f"C must be {self.a.rows}x{self.b.rows}, got {self.c.rows}x{self.c.cols}"
            )
        if self.kind not in ("continuous", "stein"):
            raise ValueError(f"kind must be 'continuous' or 'stein', got {self.kind!r}")


def _certify(residual: float, cnorm: float, tol: float, label: str, report) -> None:
    bound = tol * max(cnorm, np.finfo(float).tiny)
    if report is not None:
        report.setdefault("residuals", {})[label] = residual
    if residual > bound:
        raise CertificationError(
            f"{label} residual {residual:.3e} exceeds tol*||C|| = {bound:.3e}"
        )


def _sylvester_residual(a, b, c, z) -> float:
    return float(np.linalg.norm(a @ z - z @ b - c))


def _check_disjoint(eigs_a, eigs_b) -> float:
    scale = 1.0 + max(abs(x) for x in eigs_a + eigs_b)
    sep = min(abs(la - mu) for la in eigs_a for mu in eigs_b)
    if sep <= 1e-10 * scale:
        raise SpectraOverlap(
            f"spectra not separable: min |lambda_i - mu_j| = {sep:.3e}"
        )
    return sep


def _tight(opts: CalculusOptions) -> CalculusOptions:
    # run the quadrature two decades below the certification threshold
    return CalculusOptions(
        tol=opts.tol * 1e-2,
        margin=opts.margin,
        node_cap=opts.node_cap,
        enclosure_mode=opts.enclosure_mode,
    )


def solve_sylvester(
    problem: SylvesterProblem,
    method: str = "contour",
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Solve ``A Z - Z B = C`` by the chosen representation of Q.

    Methods: ``contour`` (single-contour integral of ``R_A C R_B`` around
    ``sigma(A)`` only), ``exp_integral`` (Laplace-type integral, needs the
    spectra separated by a vertical line), ``series`` (Neumann series in
    ``A`` and ``B^-1``, needs separation by a circle), ``kron_oracle``
    (direct solve of the column-stacked linear system).

    Raises
    ------
    SpectraOverlap
        If ``sigma(A)`` and ``sigma(B)`` are not disjoint (any method).
    MethodNotApplicable
        If the chosen representation's stronger precondition fails.
    """
    if problem.kind != "continuous":
        raise MethodNotApplicable("solve_sylvester handles kind='continuous' only")
    if method not in SYLVESTER_METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {SYLVESTER_METHODS}")
    opts = opts or _DEFAULT
    a, b, c = problem.a.array, problem.b.array, problem.c.array
    eigs_a, eigs_b = eigenvalues(a), eigenvalues(b)
    _check_disjoint(eigs_a, eigs_b)
    cnorm = float(np.linalg.norm(c))
    if cnorm == 0.0:
        return ComplexMatrix(np.zeros_like(c))

    if method == "contour":
        z = _q_contour(a, b, c, opts)
    elif method == "exp_integral":
        z = _q_exp_integral(a, b, c, eigs_a, eigs_b, opts)
    elif method == "series":
        z = _q_series(a, b, c, eigs_a, eigs_b, opts)
    else:
        z = _q_kron(a, b, c)
    _certify(_sylvester_residual(a, b, c, z), cnorm, opts.tol, f"sylvester_{method}", report)
    return ComplexMatrix(z)


def _q_contour(a, b, c, opts: CalculusOptions) -> np.ndarray:
    topts = _tight(opts)
    encl_a, _ = _enclose(a, topts)
    encl_b, _ = _enclose(b, topts)
    try:
        gamma = envelope(encl_a, encl_b)
    except CannotSeparate as exc:
        raise SpectraOverlap(f"spectra not separable by circles: {exc}") from exc
    ra = _resolvent_cache(a)
    rb = _resolvent_cache(b)
    q = integrate(
        gamma,
        lambda z: ra(z) @ c @ rb(z),
        tol=topts.tol,
        node_cap=topts.node_cap,
    )
    return q.value.array


def _q_exp_integral(a, b, c, eigs_a, eigs_b, opts: CalculusOptions) -> np.ndarray:
    re_a = max(x.real for x in eigs_a)
    re_b = min(x.real for x in eigs_b)
    gap = re_b - re_a
    if gap <= 0.0:
        raise MethodNotApplicable(
            f"exp_integral needs max Re sigma(A) < min Re sigma(B); gap = {gap:.3e}"
        )
    cnorm = float(np.linalg.norm(c))
    horizon = max(np.log(100.0 * cnorm / (opts.tol * gap)) / gap, 1e-3)
    # composite Gauss-Legendre: 32 panels of 8 nodes on [0, horizon]
    base_x, base_w = np.polynomial.legendre.leggauss(8)
    ts, ws = [], []
    edges = np.linspace(0.0, horizon, 33)
    for k in range(32):
        mid = 0.5 * (edges[k] + edges[k + 1])
        half = 0.5 * (edges[k + 1] - edges[k])
        ts.extend(mid + half * base_x)
        ws.extend(half * base_w)
    topts = _tight(opts)
    exp_a = funm_family([builtin("exp", t=t) for t in ts], a, topts)
    exp_mb = funm_family([builtin("exp", t=-t) for t in ts], b, topts)
    z = np.zeros_like(c)
    for k in range(len(ts)):
        z -= ws[k] * (exp_a[k].array @ c @ exp_mb[k].array)
    return z


def _q_series(a, b, c, eigs_a, eigs_b, opts: CalculusOptions, cap: int = 10000) -> np.ndarray:
    rho_a = max(abs(x) for x in eigs_a)
    rho_b = min(abs(x) for x in eigs_b)
    if rho_a >= rho_b:
        raise MethodNotApplicable(
            f"series needs max |sigma(A)| < min |sigma(B)|; got {rho_a:.3e} >= {rho_b:.3e}"
        )
    n = b.shape[0]
    b_inv = np.linalg.solve(b, np.eye(n, dtype=np.complex128))
    term = -c @ b_inv
    z = term.copy()
    first_norm = np.linalg.norm(term)
    prev_norm = first_norm
    growth = 0
    for _ in range(cap):
        term = a @ term @ b_inv
        z += term
        tn = np.linalg.norm(term)
        if tn < opts.tol * 1e-2 * max(np.linalg.norm(z), np.finfo(float).tiny):
            return z
        # transient humps of non-normal powers may grow for a while but stay
        # at the initial scale; only an unbounded run signals real trouble
        growth = growth + 1 if tn > prev_norm else 0
        if growth >= 10 and tn > 1e3 * first_norm:
            raise DivergenceDetected(
                "series terms grew for 10 consecutive steps beyond their "
                "initial scale; spectral separation assumption violated "
                "numerically"
            )
        prev_norm = tn
    raise DivergenceDetected(f"series did not converge within {cap} terms")


def _q_kron(a, b, c) -> np.ndarray:
    n, m = a.shape[0], b.shape[0]
    lift = np.kron(np.eye(m), a) - np.kron(b.T, np.eye(n))
    try:
        zv = np.linalg.solve(lift, vec(c))
    except np.linalg.LinAlgError as exc:
        raise SpectraOverlap(f"Kronecker system singular: {exc}") from exc
    return unvec(zv, n, m)


def q_apply_sign_form(
    a,
    b,
    c,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Q as half the one-contour calculus of the two-sided sign function.

    Evaluates ``(1/2) * (int_{Gamma_A} - int_{Gamma_B}) R_A C R_B dlam / 2 pi i``
    with ``Gamma_A`` winding around ``sigma(A)`` only and ``Gamma_B`` around
    ``sigma(B)`` only, which realizes the function that is +1 near
    ``sigma(A)`` and -1 near ``sigma(B)``.
    """
    opts = opts or _DEFAULT
    aa, bb, cc = _as_array(a), _as_array(b), _as_array(c)
    eigs_a, eigs_b = eigenvalues(aa), eigenvalues(bb)
    _check_disjoint(eigs_a, eigs_b)
    topts = _tight(opts)
    encl_a, _ = _enclose(aa, topts)
    encl_b, _ = _enclose(bb, topts)
    try:
        gamma_a = envelope(encl_a, encl_b)
        gamma_b = envelope(encl_b, encl_a)
    except CannotSeparate as exc:
        raise SpectraOverlap(f"spectra not separable by circles: {exc}") from exc
    ra = _resolvent_cache(aa)
    rb = _resolvent_cache(bb)
    integrand = lambda z: ra(z) @ cc @ rb(z)
    qa = integrate(gamma_a, integrand, tol=topts.tol, node_cap=topts.node_cap)
    qb = integrate(gamma_b, integrand, tol=topts.tol, node_cap=topts.node_cap)
    z = 0.5 * (qa.value.array - qb.value.array)
    if report is not None:
        report["nodes_used"] = qa.nodes_used + qb.nodes_used
        report["error_estimate"] = qa.error_estimate + qb.error_estimate
        report["closed_sum_norm"] = float(np.linalg.norm(qa.value.array + qb.value.array))
    _certify(
        _sylvester_residual(aa, bb, cc, z),
        float(np.linalg.norm(cc)),
        opts.tol,
        "sylvester_sign_form",
        report,
    )
    return ComplexMatrix(z)


def solve_stein(
    problem: SylvesterProblem,
    method: str = "boxtimes",
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Solve the Stein equation ``Z - A Z B = C``.

    The ``boxtimes`` backend applies the two-variable calculus to the kernel
    ``1/(1 - lam mu)``; ``kron_oracle`` solves the column-stacked system
    ``(I - B.T (x) A) vec(Z) = vec(C)`` directly.

    Raises
    ------
    ProductSpectrumHitsOne
        If ``sigma(A) * sigma(B)`` meets 1 within the enclosure margin.
    """
    if problem.kind != "stein":
        raise MethodNotApplicable("solve_stein handles kind='stein' only")
    if method not in STEIN_METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {STEIN_METHODS}")
    opts = opts or _DEFAULT
    a, b, c = problem.a.array, problem.b.array, problem.c.array
    eigs_a, eigs_b = eigenvalues(a), eigenvalues(b)
    scale = 1.0 + max(abs(la * mu) for la in eigs_a for mu in eigs_b)
    worst = min(abs(1.0 - la * mu) for la in eigs_a for mu in eigs_b)
    if worst <= 1e-9 * scale:
        raise ProductSpectrumHitsOne(
            f"sigma(A)*sigma(B) hits 1 (closest distance {worst:.3e})"
        )
    cnorm = float(np.linalg.norm(c))
    if cnorm == 0.0:
        return ComplexMatrix(np.zeros_like(c))
    if method == "boxtimes":
        z = boxtimes(kernel2("stein_s"), a, b, c, _tight(opts), report).array
    else:
        n, m = a.shape[0], b.shape[0]
        lift = np.eye(n * m, dtype=np.complex128) - np.kron(b.T, a)
        try:
            z = unvec(np.linalg.solve(lift, vec(c)), n, m)
        except np.linalg.LinAlgError as exc:
            raise ProductSpectrumHitsOne(f"Stein system singular: {exc}") from exc
    residual = float(np.linalg.norm(z - a @ z @ b - c))
    _certify(residual, cnorm, opts.tol, f"stein_{method}", report)
    return ComplexMatrix(z)


def riccati_differential(
    a,
    b,
    c,
    d,
    z,
    da,
    db,
    dc,
    dd,
    opts: CalculusOptions | None = None,
    method: str = "contour",
    report: dict | None = None,
) -> ComplexMatrix:
    """Differential of the Riccati solution ``Z`` of ``AZ + ZB + ZCZ + D = 0``.

    Solves the Sylvester equation with coefficients ``(A + ZC, -B - CZ)``
    and right-hand side ``-dD - dA Z - Z dB - Z dC Z``.

    Raises
    ------
    NotASolution
        If ``Z`` does not satisfy the Riccati equation to within
        ``tol * scale`` in the Frobenius norm.
    """
    opts = opts or _DEFAULT
    aa, bb, cc, dd_m = _as_array(a), _as_array(b), _as_array(c), _as_array(d)
    zz = _as_array(z)
    daa, dbb, dcc, ddd = _as_array(da), _as_array(db), _as_array(dc), _as_array(dd)
    scale = max(
        1.0,
        np.linalg.norm(aa) * np.linalg.norm(zz)
        + np.linalg.norm(zz) * np.linalg.norm(bb)
        + np.linalg.norm(zz) ** 2 * np.linalg.norm(cc)
        + np.linalg.norm(dd_m),
    )
    resid = float(np.linalg.norm(aa @ zz + zz @ bb + zz @ cc @ zz + dd_m))
    if resid > max(opts.tol, 1e-9) * scale:
        raise NotASolution(
            f"Z is not a Riccati solution: residual {resid:.3e} vs "
            f"{max(opts.tol, 1e-9) * scale:.3e}"
        )
    lhs_a = aa + zz @ cc
    lhs_b = -bb - cc @ zz
    rhs = -ddd - daa @ zz - zz @ dbb - zz @ dcc @ zz
    if float(np.linalg.norm(rhs)) == 0.0:
        return ComplexMatrix(np.zeros_like(zz))
    prob = SylvesterProblem(
        ComplexMatrix(lhs_a), ComplexMatrix(lhs_b), ComplexMatrix(rhs), "continuous"
    )
    return solve_sylvester(prob, method=method, opts=opts, report=report)
