"""Frechet differentials of the matrix functional calculus.

The differential of ``A -> f(A)`` applied to a direction ``dA`` is the
one-contour two-operator calculus of ``f`` with both operators equal to
``A``: ``df(dA, A) = (1/2 pi i) int f(lam) R_lam dA R_lam dlam``. The block
2x2 trick and the time-domain exponential formulas provide independent
routes to the same object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import (
    CalculusOptions,
    _check_branch_cut,
    _enclose,
    _sing_enclosure,
    boxdot,
    funm_family,
)
from .contour import envelope, integrate, _component_nodes
from .errors import DegenerateDifferential, ShapeMismatch, SingularResolvent
from .holofun import HoloFun1, HoloFun2, builtin, divided_difference
from .numcore import ComplexMatrix, _as_array, as_matrix, eigenvalues

_DEFAULT = CalculusOptions()


@dataclass(frozen=True)
class DifferentialRequest:
    """Function, base point, and direction of a Frechet differential."""

    f: HoloFun1
    a: ComplexMatrix
    da: ComplexMatrix

    def __post_init__(self):
        object.__setattr__(self, "a", as_matrix(self.a))
        object.__setattr__(self, "da", as_matrix(self.da))
        if not self.a.is_square:
            raise ShapeMismatch("A must be square")
        if self.da.rows != self.a.rows or self.da.cols != self.a.cols:
            raise ShapeMismatch(
                f"dA must match A ({self.a.rows}x{self.a.cols}), "
                f"got {self.da.rows}x{self.da.cols}"
            )


def frechet(
    req: DifferentialRequest,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Differential ``df(dA, A)`` via the one-contour calculus with B = A."""
    return boxdot(req.f, req.a, req.a, req.da, opts, report)


def frechet_block_oracle(
    f: HoloFun1,
    a,
    da,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Differential as the upper-right block of ``f([[A, dA], [0, A]])``.

    The block matrix has the same spectrum as ``A``, so the contour is built
    from ``sigma(A)`` directly and the 2n x 2n resolvent is integrated on it.
    """
    opts = opts or _DEFAULT
    aa = _as_array(a)
    daa = _as_array(da)
    if aa.shape != daa.shape or aa.shape[0] != aa.shape[1]:
        raise ShapeMismatch("A and dA must be square matrices of equal size")
    n = aa.shape[0]
    block = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    block[:n, :n] = aa
    block[:n, n:] = daa
    block[n:, n:] = aa
    encl, _ = _enclose(aa, opts)
    gamma = envelope(encl, _sing_enclosure(f.singularities))
    if f.branch_cut:
        _check_branch_cut(gamma, f.name)
    eye2 = np.eye(2 * n, dtype=np.complex128)
    cache: dict = {}

    def integrand(z: complex) -> np.ndarray:
        m = cache.get(z)
        if m is None:
            m = np.linalg.solve(z * eye2 - block, eye2)[:n, n:]
            cache[z] = m
        return f(z) * m

    q = integrate(gamma, integrand, tol=opts.tol, node_cap=opts.node_cap)
    if report is not None:
        report["nodes_used"] = q.nodes_used
        report["error_estimate"] = q.error_estimate
    return q.value


def _gl_nodes(t: float, n: int = 64):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * t * (x + 1.0), 0.5 * t * w


def frechet_exp(
    a,
    da,
    t: float,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Exponential differential ``int_0^t exp((t-s)A) dA exp(sA) ds``.

    Gauss-Legendre quadrature in ``s``; the exponential families share one
    contour and one resolvent sweep each.
    """
    opts = opts or _DEFAULT
    aa, daa = _as_array(a), _as_array(da)
    t = float(t)
    if t < 0.0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0.0:
        return ComplexMatrix(np.zeros_like(daa))
    s_nodes, s_weights = _gl_nodes(t)
    left = funm_family([builtin("exp", t=t - s) for s in s_nodes], aa, opts, report)
    right = funm_family([builtin("exp", t=s) for s in s_nodes], aa, opts)
    out = np.zeros_like(daa)
    for k in range(len(s_nodes)):
        out += s_weights[k] * (left[k].array @ daa @ right[k].array)
    return ComplexMatrix(out)


def frechet_xexp(
    a,
    da,
    t: float,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Differential of ``A -> A exp(tA)``.

    Equals ``exp(tA) dA + int_0^t exp((t-s)A) dA A exp(sA) ds``.
    """
    opts = opts or _DEFAULT
    aa, daa = _as_array(a), _as_array(da)
    t = float(t)
    if t < 0.0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0.0:
        return ComplexMatrix(daa.copy())
    s_nodes, s_weights = _gl_nodes(t)
    fams = [builtin("exp", t=t)] + [builtin("exp", t=t - s) for s in s_nodes]
    left = funm_family(fams, aa, opts, report)
    right = funm_family([builtin("exp", t=s) for s in s_nodes], aa, opts)
    out = left[0].array @ daa
    for k in range(len(s_nodes)):
        out += s_weights[k] * (left[k + 1].array @ daa @ (aa @ right[k].array))
    return ComplexMatrix(out)


def frechet_spectrum(f: HoloFun1, a) -> list[complex]:
    """Spectrum of the differential: divided differences over eigenvalue pairs."""
    eigs = eigenvalues(_as_array(a))
    return [
        complex(divided_difference(f, la, mu))
        for la in eigs
        for mu in eigs
    ]


def inverse_frechet(
    f: HoloFun1,
    a,
    db,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Differential of the inverse function ``B -> f^-1(B)`` at ``B = f(A)``.

    Applies the two-variable kernel ``1/f^[1](lam, mu)`` over two copies of
    the envelope of ``sigma(A)``; composing with ``frechet(f, A, .)``
    returns the identity on directions.

    Raises
    ------
    DegenerateDifferential
        If some divided difference ``f^[1](lam_i, lam_j)`` vanishes within
        a relative margin, so the differential is not invertible.
    """
    from .calculus import boxtimes

    opts = opts or _DEFAULT
    vals = frechet_spectrum(f, a)
    scale = 1.0 + max(abs(v) for v in vals)
    vmin = min(abs(v) for v in vals)
    if vmin <= 1e-6 * scale:
        raise DegenerateDifferential(
            f"f^[1] vanishes on the spectrum pairs (min |value| {vmin:.3e}); "
            f"the differential is not invertible"
        )
    from .holofun import divided_difference_grid

    kernel = HoloFun2(
        f"1/dd({f.name})",
        lambda lam, mu: 1.0 / divided_difference(f, lam, mu),
        sing1=f.singularities,
        sing2=f.singularities,
        cut1=f.branch_cut,
        cut2=f.branch_cut,
        eval2_grid=lambda lam, mu: 1.0 / divided_difference_grid(f, lam, mu),
    )
    # 1/f^[1] can have poles at fixed argument offsets that the enclosure
    # cannot know about (for exp they sit on lam - mu = 2 pi i k); if fat
    # contours swallow one, retry with the disks shrunk toward the spectrum
    from .errors import QuadratureStall

    margins = [opts.margin]
    if opts.margin is None:
        eigs = eigenvalues(_as_array(a))
        spread = max((abs(x - y) for x in eigs for y in eigs), default=0.0)
        base = max(0.1 * spread, 0.1)
        margins = [None, base / 4.0, base / 16.0]
    last_exc = None
    for m in margins:
        trial = CalculusOptions(
            tol=opts.tol, margin=m, node_cap=opts.node_cap,
            enclosure_mode=opts.enclosure_mode,
        )
        try:
            return boxtimes(kernel, a, a, db, trial, report)
        except QuadratureStall as exc:
            last_exc = exc
    raise last_exc


def perturbed_resolvent(a, da, lam: complex) -> ComplexMatrix:
    """Perturbation ``T_lam = R_lam (I - dA R_lam)^-1`` of the resolvent.

    ``T`` is itself a pseudo-resolvent (it satisfies the Hilbert identity
    wherever defined); this helper exists for diagnostics and tests, not as
    a solver.
    """
    aa, daa = _as_array(a), _as_array(da)
    n = aa.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    r = np.linalg.solve(complex(lam) * eye - aa, eye)
    m = eye - daa @ r
    if np.linalg.cond(m) > 1.0 / (_as_eps() * 10):
        raise SingularResolvent(
            f"perturbed resolvent undefined at lambda={lam}: I - dA R is singular"
        )
    return ComplexMatrix(r @ np.linalg.solve(m, eye))


def _as_eps() -> float:
    return float(np.finfo(np.complex128).eps)


def frechet_norm_est(
    f: HoloFun1,
    a,
    iters: int = 12,
    nodes: int = 256,
    opts: CalculusOptions | None = None,
) -> float:
    """Operator-norm estimate of ``df(., A)`` without materializing its lift.

    Power iteration on ``L* L`` where both the differential ``L`` and its
    adjoint are applied through one fixed set of contour nodes; the lift is
    never formed. Feeds condition-number reporting.
    """
    opts = opts or _DEFAULT
    aa = _as_array(a)
    n = aa.shape[0]
    encl, _ = _enclose(aa, opts)
    gamma = envelope(encl, _sing_enclosure(f.singularities))
    if f.branch_cut:
        _check_branch_cut(gamma, f.name)
    zs, cs = [], []
    for comp in gamma.components:
        z, w = _component_nodes(comp, nodes)
        zs.append(z)
        cs.append(w)
    z_all = np.concatenate(zs)
    c_all = np.concatenate(cs) / (2.0j * np.pi)
    eye = np.eye(n, dtype=np.complex128)
    rs = np.stack([np.linalg.solve(z * eye - aa, eye) for z in z_all])
    coef = np.array([f(complex(z)) for z in z_all]) * c_all
    rs_h = rs.conj().transpose(0, 2, 1)

    def apply_l(x):
        return np.einsum("k,kab,bc,kcd->ad", coef, rs, x, rs)

    def apply_l_adj(y):
        return np.einsum("k,kab,bc,kcd->ad", coef.conj(), rs_h, y, rs_h)

    x = eye / np.linalg.norm(eye)
    sigma2 = 0.0
    for _ in range(iters):
        y = apply_l_adj(apply_l(x))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        sigma2 = ny
    return float(np.sqrt(sigma2))
