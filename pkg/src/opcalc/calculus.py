"""The three contour calculi: f(A), two-variable kernels, one-contour kernels.

``funm`` realizes the one-operator calculus, ``boxtimes`` the two-variable
transformator calculus applied to an operand ``C``, and ``boxdot`` the
single-contour two-operator calculus of one-variable functions. Because all
operators here are finite matrices, infinity is always a regular point, so
the ``f(.,inf)``/``f(inf,inf)`` correction terms of the general theory are
identically zero and never materialize in these formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contour import (
    Contour,
    SpectralEnclosure,
    envelope,
    integrate,
    points_enclosure,
    _component_nodes,
)
from .errors import (
    CannotSeparate,
    NuInSpectrum,
    ProductSpectrumHitsOne,
    QuadratureStall,
    ShapeMismatch,
)
from .holofun import HoloFun1, HoloFun2, divided_difference
from .numcore import (
    ComplexMatrix,
    TransformatorMatrix,
    _as_array,
    eigenvalues,
    unvec,
    vec,
)

_TWO_PI_I = 2.0j * np.pi


@dataclass(frozen=True)
class CalculusOptions:
    """Knobs shared by every contour-based operation.

    ``margin`` is the enclosure disk radius; ``None`` selects one tenth of
    the spectral diameter with an absolute floor of 0.1. ``node_cap`` bounds
    the per-component node count of the adaptive quadrature.
    """

    tol: float = 1e-10
    margin: float | None = None
    node_cap: int = 4096
    enclosure_mode: str = "eigen"

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.margin is not None and self.margin <= 0.0:
            raise ValueError("margin must be positive when given")
        n = self.node_cap
        if n < 64 or (n & (n - 1)) != 0:
            raise ValueError("node_cap must be a power of two >= 64")
        if self.enclosure_mode not in ("eigen", "gershgorin"):
            raise ValueError(f"unknown enclosure_mode {self.enclosure_mode!r}")


_DEFAULT = CalculusOptions()


def _spread(points) -> float:
    pts = np.asarray(list(points), dtype=np.complex128)
    if pts.size <= 1:
        return 0.0
    return float(max(abs(pts[i] - pts[j]) for i in range(len(pts)) for j in range(i + 1, len(pts))))


def _auto_margin(points, opts: CalculusOptions) -> float:
    if opts.margin is not None:
        return opts.margin
    return max(0.1 * _spread(points), 0.1)


def _enclose(a: np.ndarray, opts: CalculusOptions):
    """Spectral enclosure of A plus the eigenvalues used to build it."""
    if opts.enclosure_mode == "gershgorin":
        centers = np.diag(a)
        radii = np.sum(np.abs(a), axis=1) - np.abs(centers)
        base = SpectralEnclosure(tuple(zip(centers, radii)))
        margin = opts.margin if opts.margin is not None else max(0.1 * base.diameter(), 0.1)
        disks = tuple((c, r + margin) for c, r in base.disks)
        return SpectralEnclosure(disks), None
    eigs = eigenvalues(a)
    return points_enclosure(eigs, _auto_margin(eigs, opts)), eigs


def _sing_enclosure(points) -> SpectralEnclosure | None:
    pts = tuple(points)
    if not pts:
        return None
    return SpectralEnclosure(tuple((p, 0.0) for p in pts))


def _union(e1: SpectralEnclosure | None, e2: SpectralEnclosure | None):
    if e1 is None:
        return e2
    if e2 is None:
        return e1
    return SpectralEnclosure(e1.disks + e2.disks)


def _dist_to_cut(z: complex) -> float:
    # distance to the principal branch cut (-inf, 0]
    return abs(z.imag) if z.real <= 0.0 else abs(z)


def _check_branch_cut(contour: Contour, fun_name: str) -> None:
    for c, r, _ in contour.components:
        if _dist_to_cut(c) <= r:
            raise CannotSeparate(
                f"integration circle (center {c}, radius {r}) meets the "
                f"principal branch cut of {fun_name}"
            )


def _resolvent_cache(a: np.ndarray):
    n = a.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    cache: dict = {}

    def r(z: complex) -> np.ndarray:
        m = cache.get(z)
        if m is None:
            m = np.linalg.solve(z * eye - a, eye)
            cache[z] = m
        return m

    return r


def _square(a, name: str) -> np.ndarray:
    aa = _as_array(a)
    if aa.ndim != 2 or aa.shape[0] != aa.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got {aa.shape}")
    return aa


def _fill_report(report, q, extra=None):
    if report is None:
        return
    report["nodes_used"] = q.nodes_used
    report["error_estimate"] = q.error_estimate
    if extra:
        report.update(extra)


def funm(
    f: HoloFun1,
    a,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """f(A) as the contour integral of ``f(lambda) (lambda I - A)^-1``.

    The contour is an automatically built envelope of a spectral enclosure
    of ``A`` that avoids the isolated singularities of ``f``; branch-cut
    functions additionally require the contour circles to stay off the cut.
    """
    opts = opts or _DEFAULT
    aa = _square(a, "A")
    encl, _ = _enclose(aa, opts)
    gamma = envelope(encl, _sing_enclosure(f.singularities))
    if f.branch_cut:
        _check_branch_cut(gamma, f.name)
    r = _resolvent_cache(aa)
    q = integrate(gamma, lambda z: f(z) * r(z), tol=opts.tol, node_cap=opts.node_cap)
    _fill_report(report, q)
    return q.value


def funm_family(
    fs,
    a,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> list[ComplexMatrix]:
    """Evaluate several functions of the same matrix on one shared contour.

    All functions see identical quadrature nodes and a single doubling loop
    (the error estimate is taken on the stacked result), so families such
    as ``exp(t_k A)`` for many ``t_k`` cost one resolvent sweep.
    """
    opts = opts or _DEFAULT
    aa = _square(a, "A")
    fs = list(fs)
    if not fs:
        return []
    n = aa.shape[0]
    sing = tuple(s for f in fs for s in f.singularities)
    encl, _ = _enclose(aa, opts)
    gamma = envelope(encl, _sing_enclosure(sing))
    if any(f.branch_cut for f in fs):
        _check_branch_cut(gamma, ", ".join(f.name for f in fs))
    r = _resolvent_cache(aa)

    def stacked(z: complex) -> np.ndarray:
        rz = r(z)
        return np.concatenate([f(z) * rz for f in fs], axis=0)

    q = integrate(gamma, stacked, tol=opts.tol, node_cap=opts.node_cap)
    _fill_report(report, q)
    va = q.value.array
    return [ComplexMatrix(va[k * n:(k + 1) * n, :]) for k in range(len(fs))]


def _cross_precheck(f: HoloFun2, eigs_a, eigs_b, margin_a: float, margin_b: float) -> None:
    """Reject kernels whose coupled singular set meets the enclosure product."""
    if f.cross is None or eigs_a is None or eigs_b is None:
        return
    kind = f.cross[0]
    if kind == "product_one":
        worst = min(
            abs(1.0 - la * mu) - (abs(la) * margin_b + abs(mu) * margin_a + margin_a * margin_b)
            for la in eigs_a
            for mu in eigs_b
        )
        if worst <= 0.0:
            raise ProductSpectrumHitsOne(
                "sigma(A)*sigma(B) meets 1 within the enclosure margin"
            )
    elif kind == "plane":
        _, nu0, s = f.cross
        worst = min(
            abs(nu0 - la - s * mu) - (margin_a + margin_b)
            for la in eigs_a
            for mu in eigs_b
        )
        if worst <= 0.0:
            raise CannotSeparate(
                f"the singular plane of kernel {f.kind} meets the enclosure "
                f"product of sigma(A) x sigma(B)"
            )


def _two_contours(f: HoloFun2, a: np.ndarray, b: np.ndarray, opts: CalculusOptions):
    """Build the two envelopes for a boxtimes-type double integral."""
    encl_a, eigs_a = _enclose(a, opts)
    encl_b, eigs_b = _enclose(b, opts)
    margin_a = max(r for _, r in encl_a.disks)
    margin_b = max(r for _, r in encl_b.disks)
    _cross_precheck(f, eigs_a, eigs_b, margin_a, margin_b)
    avoid1 = _sing_enclosure(f.sing1)
    avoid2 = _sing_enclosure(f.sing2)
    if f.cross is not None and f.cross[0] == "diagonal":
        g1 = envelope(encl_a, _union(encl_b, avoid1))
        g2 = envelope(encl_b, _union(encl_a, avoid2))
    else:
        g1 = envelope(encl_a, avoid1)
        g2 = envelope(encl_b, avoid2)
    if f.cut1:
        _check_branch_cut(g1, f.kind)
    if f.cut2:
        _check_branch_cut(g2, f.kind)
    return g1, g2


def _contour_arrays(contour: Contour, n: int):
    zs, ws = [], []
    for comp in contour.components:
        z, w = _component_nodes(comp, n)
        zs.append(z)
        ws.append(w)
    return np.concatenate(zs), np.concatenate(ws)


def _kernel_coef(f: HoloFun2, z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Kernel values over the node-pair grid, vectorized when possible.

    Tries the kernel's grid evaluator, then plain broadcasting of the
    scalar evaluator; kernels whose code cannot take arrays fall back to
    an explicit double loop. The chosen path depends only on the kernel,
    so results stay reproducible.
    """
    col, row = z1[:, None], z2[None, :]
    shape = (z1.size, z2.size)
    for evaluator in (f.eval2_grid, f._eval2):
        if evaluator is None:
            continue
        try:
            raw = np.asarray(evaluator(col, row), dtype=np.complex128)
            return np.array(np.broadcast_to(raw, shape), dtype=np.complex128)
        except Exception:
            continue
    coef = np.empty(shape, dtype=np.complex128)
    for i, zi in enumerate(z1):
        for j, zj in enumerate(z2):
            coef[i, j] = f(complex(zi), complex(zj))
    return coef


def _double_loop(g1: Contour, g2: Contour, f: HoloFun2, term, opts: CalculusOptions):
    """Synchronized node doubling of a double contour integral.

    ``term(z1, w1, z2, w2, coef)`` evaluates the level; node counts on both
    contours double together so the error estimate stays single-knobbed.
    """
    n = min(g1.nodes_per_component, g2.nodes_per_component)
    prev = None
    prev_err = None
    err = float("inf")
    strikes = 0
    while n <= opts.node_cap:
        z1, w1 = _contour_arrays(g1, n)
        z2, w2 = _contour_arrays(g2, n)
        coef = _kernel_coef(f, z1, z2)
        coef *= np.outer(w1, w2) / (_TWO_PI_I * _TWO_PI_I)
        value = term(z1, z2, coef)
        if prev is not None:
            err = float(np.linalg.norm(value - prev))
            goal = opts.tol * (1.0 + float(np.linalg.norm(value)))
            if err <= goal:
                return value, err, n * (len(g1.components) + len(g2.components))
            # spectral accuracy shrinks the estimate by orders of magnitude
            # per doubling; two consecutive doublings gaining less than 4x
            # while far from the goal mean a kernel singularity sits between
            # the contours and the cap is unreachable (level cost is n^2,
            # so bailing early matters)
            if prev_err is not None and err > 100.0 * goal and err * 4.0 > prev_err:
                strikes += 1
                if strikes >= 2:
                    break
            else:
                strikes = 0
            prev_err = err
        prev = value
        n *= 2
    raise QuadratureStall(
        f"double-contour error estimate {err:.3e} above tolerance at "
        f"{min(n, opts.node_cap)} nodes per component; a singularity of "
        f"the kernel may lie between the contours"
    )


def boxtimes(
    f: HoloFun2,
    a,
    b,
    c,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Two-variable calculus applied to C: nested quadrature of R_A C R_B.

    Computes ``(1/(2 pi i)^2) * iint f(lam, mu) R_{A,lam} C R_{B,mu} dmu dlam``
    over envelopes of the two spectra. Kernels with a pole on ``lam = mu``
    (Sylvester-type) get mutually avoiding contours; other coupled singular
    sets are checked against the enclosure product before integrating.
    """
    opts = opts or _DEFAULT
    aa = _square(a, "A")
    bb = _square(b, "B")
    cc = _as_array(c)
    if cc.shape != (aa.shape[0], bb.shape[0]):
        raise ShapeMismatch(
            f"C must be {aa.shape[0]}x{bb.shape[0]}, got {cc.shape}"
        )
    g1, g2 = _two_contours(f, aa, bb, opts)
    ra = _resolvent_cache(aa)
    rb = _resolvent_cache(bb)

    def term(z1, z2, coef):
        pa = np.stack([ra(complex(z)) @ cc for z in z1])
        qb = np.stack([rb(complex(z)) for z in z2])
        inner = np.einsum("ij,iab->jab", coef, pa)
        return np.einsum("jab,jbc->ac", inner, qb)

    value, err, nodes = _double_loop(g1, g2, f, term, opts)
    if report is not None:
        report["nodes_used"] = nodes
        report["error_estimate"] = err
    return ComplexMatrix(value)


def boxdot(
    f: HoloFun1,
    a,
    b,
    c,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """One-contour calculus: ``(1/2 pi i) * int f(lam) R_A C R_B dlam``.

    The contour is an envelope of the union of both spectra, so this equals
    ``boxtimes`` of the divided difference of ``f``.
    """
    opts = opts or _DEFAULT
    aa = _square(a, "A")
    bb = _square(b, "B")
    cc = _as_array(c)
    if cc.shape != (aa.shape[0], bb.shape[0]):
        raise ShapeMismatch(f"C must be {aa.shape[0]}x{bb.shape[0]}, got {cc.shape}")
    encl_a, eigs_a = _enclose(aa, opts)
    encl_b, eigs_b = _enclose(bb, opts)
    union = _union(encl_a, encl_b)
    if opts.margin is None and eigs_a is not None and eigs_b is not None:
        # eigen mode: rebuild with one margin from the union spread so the
        # disks of both spectra inflate consistently (gershgorin disks keep
        # their own covering radii)
        margin = max(0.1 * _spread(eigs_a + eigs_b), 0.1)
        union = points_enclosure(eigs_a + eigs_b, margin)
    gamma = envelope(union, _sing_enclosure(f.singularities))
    if f.branch_cut:
        _check_branch_cut(gamma, f.name)
    ra = _resolvent_cache(aa)
    rb = _resolvent_cache(bb)
    q = integrate(
        gamma,
        lambda z: f(z) * (ra(z) @ cc @ rb(z)),
        tol=opts.tol,
        node_cap=opts.node_cap,
    )
    _fill_report(report, q)
    return q.value


def transformator_matrix(
    f: HoloFun2,
    a,
    b,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> TransformatorMatrix:
    """Materialized Kronecker lift of the transformator ``(phi1 x phi2) f``.

    Column ``j`` of the lift equals ``vec`` of ``boxtimes`` applied to the
    j-th canonical basis matrix; the lift is accumulated directly from the
    same node data, one Kronecker term per inner node.
    """
    opts = opts or _DEFAULT
    aa = _square(a, "A")
    bb = _square(b, "B")
    n, m = aa.shape[0], bb.shape[0]
    g1, g2 = _two_contours(f, aa, bb, opts)
    ra = _resolvent_cache(aa)
    rb = _resolvent_cache(bb)

    def term(z1, z2, coef):
        rs = np.stack([ra(complex(z)) for z in z1])
        lift = np.zeros((n * m, n * m), dtype=np.complex128)
        inner = np.einsum("ij,iab->jab", coef, rs)
        for j, zj in enumerate(z2):
            lift += np.kron(rb(complex(zj)).T, inner[j])
        return lift

    value, err, nodes = _double_loop(g1, g2, f, term, opts)
    if report is not None:
        report["nodes_used"] = nodes
        report["error_estimate"] = err
    return TransformatorMatrix(n=n, m=m, lift=ComplexMatrix(value))


def transformator_spectrum(f: HoloFun2, a, b) -> list[complex]:
    """Spectrum of the transformator: ``{f(lam_i, mu_j)}`` over eigenvalue pairs."""
    aa = _square(a, "A")
    bb = _square(b, "B")
    return [
        complex(f(la, mu))
        for la in eigenvalues(aa)
        for mu in eigenvalues(bb)
    ]


def compose_apply(
    f: HoloFun1,
    g: HoloFun2,
    a,
    b,
    c,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """f of the transformator ``(phi1 x phi2) g`` applied to C.

    Materializes the lift ``M`` of ``g``, builds a third contour around the
    value set ``{g(lam_i, mu_j)}`` (margin one tenth of its spread), and
    evaluates ``(1/2 pi i) * int f(nu) (nu I - M)^-1 vec(C) dnu``.
    """
    opts = opts or _DEFAULT
    aa = _square(a, "A")
    bb = _square(b, "B")
    cc = _as_array(c)
    n, m = aa.shape[0], bb.shape[0]
    if cc.shape != (n, m):
        raise ShapeMismatch(f"C must be {n}x{m}, got {cc.shape}")
    lift = transformator_matrix(g, a, b, opts).lift.array
    values = transformator_spectrum(g, a, b)
    margin3 = max(0.1 * _spread(values), 0.1)
    gamma3 = envelope(points_enclosure(values, margin3), _sing_enclosure(f.singularities))
    if f.branch_cut:
        _check_branch_cut(gamma3, f.name)
    eye = np.eye(n * m, dtype=np.complex128)
    vc = vec(cc).reshape(-1, 1)
    q = integrate(
        gamma3,
        lambda z: f(z) * np.linalg.solve(z * eye - lift, vc),
        tol=opts.tol,
        node_cap=opts.node_cap,
    )
    _fill_report(report, q)
    return ComplexMatrix(unvec(q.value.array.ravel(), n, m))


def transformator_resolvent(
    f: HoloFun2,
    a,
    b,
    nu: complex,
    c,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Pseudo-resolvent ``S_nu`` of the function ``f`` of two operators.

    ``S_nu(C) = boxtimes(h_nu, A, B, C)`` with ``h_nu = 1/(nu - f)``.

    Raises
    ------
    NuInSpectrum
        If ``nu`` comes within a relative margin of the transformator
        spectrum ``{f(lam_i, mu_j)}``.
    """
    opts = opts or _DEFAULT
    nu = complex(nu)
    values = transformator_spectrum(f, a, b)
    scale = 1.0 + max(abs(v) for v in values)
    dist = min(abs(nu - v) for v in values)
    if dist <= 1e-6 * scale:
        raise NuInSpectrum(
            f"nu={nu} lies within margin {1e-6 * scale:.3e} of the "
            f"transformator spectrum (closest value distance {dist:.3e})"
        )
    if f.cross is None and f.kind == "diff":
        cross = ("plane", nu, -1.0)
    elif f.cross is None and f.kind == "sum":
        cross = ("plane", nu, 1.0)
    else:
        cross = f.cross
    h = HoloFun2(
        f"resolvent[{nu}]({f.kind})",
        lambda lam, mu: 1.0 / (nu - f(lam, mu)),
        sing1=f.sing1,
        sing2=f.sing2,
        cut1=f.cut1,
        cut2=f.cut2,
        cross=cross,
    )
    return boxtimes(h, a, b, c, opts, report)
