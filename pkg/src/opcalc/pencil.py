"""Quadratic operator pencils: resolvents, impulse response, solvents, IVPs.

A pencil ``lam^2 E + lam F + H`` with invertible ``E`` has its spectrum
located through the companion linearization ``[[0, I], [-E^-1 H, -E^-1 F]]``.
The impulse response ``T(t)`` is the contour integral of ``exp(lam t)``
against the pencil resolvent; factorizations route the same object through
the one-contour two-operator calculus.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .calculus import CalculusOptions, boxdot, _spread
from .contour import SpectralEnclosure, envelope, integrate, points_enclosure
from .errors import NewtonStall, NotASolution, ShapeMismatch, SingularPencil
from .holofun import builtin
from .numcore import ComplexMatrix, _as_array, as_matrix, eigenvalues

_EPS = float(np.finfo(np.complex128).eps)
_DEFAULT = CalculusOptions()


def _checked_inverse(m: np.ndarray, label: str) -> np.ndarray:
    n = m.shape[0]
    scale = np.linalg.norm(m)
    with warnings.catch_warnings():
        # singularity is detected by the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or np.min(pivots) <= n * _EPS * scale:
        raise SingularPencil(f"{label} is numerically singular")
    return scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=np.complex128), check_finite=False)


class QuadraticPencil:
    """Square pencil ``lam^2 E + lam F + H`` with invertible leading coefficient.

    Construction computes the pencil spectrum from the companion
    linearization and stores a disk enclosure of it (margin defaults to one
    tenth of the spectral spread, floored at 0.1).
    """

    def __init__(self, e, f, h, margin: float | None = None):
        self.e = as_matrix(e)
        self.f = as_matrix(f)
        self.h = as_matrix(h)
        n = self.e.rows
        for name, m in (("E", self.e), ("F", self.f), ("H", self.h)):
            if not m.is_square or m.rows != n:
                raise ShapeMismatch(f"{name} must be {n}x{n}, got {m.rows}x{m.cols}")
        e_inv = _checked_inverse(self.e.array, "E")
        lin = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        lin[:n, n:] = np.eye(n)
        lin[n:, :n] = -e_inv @ self.h.array
        lin[n:, n:] = -e_inv @ self.f.array
        self.spectrum = tuple(eigenvalues(lin))
        m_eff = margin if margin is not None else max(0.1 * _spread(self.spectrum), 0.1)
        self.spectrum_enclosure: SpectralEnclosure = points_enclosure(self.spectrum, m_eff)

    @property
    def dim(self) -> int:
        return self.e.rows

    def value(self, lam: complex) -> np.ndarray:
        lam = complex(lam)
        return lam * lam * self.e.array + lam * self.f.array + self.h.array

    def __repr__(self):
        return f"QuadraticPencil(n={self.dim})"


@dataclass(frozen=True)
class PencilFactorization:
    """Linear factors of a pencil: resolvent splits as ``R_A1 E R_A2``.

    For ``E = I`` this is the solvent factorization
    ``lam^2 + lam F + H = (lam I - A2)(lam I - A1)`` with ``A1 + A2 = -F``
    and ``A2 A1 = H``.
    """

    a1: ComplexMatrix
    a2: ComplexMatrix

    def __post_init__(self):
        object.__setattr__(self, "a1", as_matrix(self.a1))
        object.__setattr__(self, "a2", as_matrix(self.a2))
        if not self.a1.is_square or self.a1.rows != self.a2.rows or not self.a2.is_square:
            raise ShapeMismatch("factors must be square matrices of equal size")

    def verify(self, e, f, h, npoints: int = 5, tol: float = 1e-8, seed: int = 7041) -> float:
        """Check the resolvent identity at sample points outside the spectra.

        Returns the worst relative deviation of
        ``(lam^2 E + lam F + H)^-1 - R_{A1,lam} E R_{A2,lam}`` over the
        sample points; raises ``NotASolution`` above ``tol``.
        """
        ea, fa, ha = _as_array(e), _as_array(f), _as_array(h)
        n = self.a1.rows
        radius = 1.0 + 2.0 * max(
            max(abs(x) for x in eigenvalues(self.a1.array)),
            max(abs(x) for x in eigenvalues(self.a2.array)),
        )
        rng = np.random.default_rng(seed)
        worst = 0.0
        eye = np.eye(n, dtype=np.complex128)
        for _ in range(npoints):
            lam = radius * np.exp(2j * np.pi * rng.random())
            r_pencil = np.linalg.solve(lam * lam * ea + lam * fa + ha, eye)
            r1 = np.linalg.solve(lam * eye - self.a1.array, eye)
            r2 = np.linalg.solve(lam * eye - self.a2.array, eye)
            dev = np.linalg.norm(r_pencil - r1 @ ea @ r2) / max(np.linalg.norm(r_pencil), 1e-300)
            worst = max(worst, float(dev))
        if worst > tol:
            raise NotASolution(
                f"resolvent identity fails: worst relative deviation {worst:.3e} > {tol:.1e}"
            )
        return worst


def pencil_resolvent(p: QuadraticPencil, lam: complex) -> ComplexMatrix:
    """Pencil resolvent ``(lam^2 E + lam F + H)^-1`` at a regular point.

    Raises
    ------
    SingularPencil
        If ``lam`` lies inside the spectral enclosure or the pencil value is
        numerically singular.
    """
    lam = complex(lam)
    if p.spectrum_enclosure.contains_point(lam):
        raise SingularPencil(f"lambda={lam} lies inside the pencil spectral enclosure")
    return ComplexMatrix(_checked_inverse(p.value(lam), f"pencil at lambda={lam}"))


def _check_time(t) -> float:
    if isinstance(t, complex):
        if t.imag != 0.0:
            raise ValueError(f"t must be real and non-negative, got {t}")
        t = t.real
    t = float(t)
    if t < 0.0:
        raise ValueError(f"t must be non-negative, got {t}")
    return t


def impulse_response(
    p: QuadraticPencil,
    t,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> tuple[ComplexMatrix, ComplexMatrix]:
    """Impulse response ``T(t)`` and its derivative on one shared contour.

    ``T`` integrates ``exp(lam t)`` against the pencil resolvent, ``Tdot``
    integrates ``lam exp(lam t)``; stacking both into one integrand keeps
    the quadrature nodes identical.
    """
    opts = opts or _DEFAULT
    t = _check_time(t)
    n = p.dim
    gamma = envelope(p.spectrum_enclosure)
    cache: dict = {}
    eye = np.eye(n, dtype=np.complex128)

    def rz(z: complex) -> np.ndarray:
        m = cache.get(z)
        if m is None:
            m = np.linalg.solve(p.value(z), eye)
            cache[z] = m
        return m

    def stacked(z: complex) -> np.ndarray:
        r = rz(z)
        ez = np.exp(z * t)
        return np.concatenate([ez * r, (z * ez) * r], axis=0)

    q = integrate(gamma, stacked, tol=opts.tol, node_cap=opts.node_cap)
    if report is not None:
        report["nodes_used"] = q.nodes_used
        report["error_estimate"] = q.error_estimate
    va = q.value.array
    return ComplexMatrix(va[:n, :]), ComplexMatrix(va[n:, :])


def impulse_response_factored(
    fact: PencilFactorization,
    e,
    t,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> tuple[ComplexMatrix, ComplexMatrix]:
    """Impulse response through the factorization: one-contour calculus on E.

    ``T(t)`` applies the two-operator calculus of ``exp(t .)`` to the
    factors, ``Tdot`` the calculus of ``lam exp(t lam)``.
    """
    opts = opts or _DEFAULT
    t = _check_time(t)
    rep_t: dict | None = {} if report is not None else None
    rep_d: dict | None = {} if report is not None else None
    tt = boxdot(builtin("exp", t=t), fact.a1, fact.a2, e, opts, rep_t)
    td = boxdot(builtin("xexp", t=t), fact.a1, fact.a2, e, opts, rep_d)
    if report is not None:
        report["nodes_used"] = rep_t["nodes_used"] + rep_d["nodes_used"]
        report["error_estimate"] = max(rep_t["error_estimate"], rep_d["error_estimate"])
    return tt, td


def right_solvent_newton(
    f,
    h,
    x0,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
    max_iter: int = 30,
) -> ComplexMatrix:
    """Newton iteration for a right solvent ``X^2 + F X + H = 0``.

    Each step solves the Sylvester equation
    ``(X + F) D - D (-X) = -(X^2 + F X + H)`` for the correction ``D``.
    Converges to residual ``1e-10 * (1 + ||F|| + ||H||)`` within
    ``max_iter`` iterations or raises ``NewtonStall``.
    """
    from .sylvester import SylvesterProblem, solve_sylvester

    opts = opts or _DEFAULT
    fa, ha = _as_array(f), _as_array(h)
    x = _as_array(x0).copy()
    scale = 1.0 + float(np.linalg.norm(fa)) + float(np.linalg.norm(ha))
    target = 1e-10 * scale
    polished = False
    for it in range(max_iter + 1):
        g = x @ x + fa @ x + ha
        resid = float(np.linalg.norm(g))
        if report is not None:
            report["iterations"] = it
            report.setdefault("residuals", {})["solvent"] = resid
        if resid <= target and (polished or resid == 0.0 or it == max_iter):
            return ComplexMatrix(x)
        if it == max_iter:
            break
        # below the documented target, take one more quadratic step to
        # polish toward the roundoff floor, keeping the better iterate
        polished = resid <= target
        prob = SylvesterProblem(
            ComplexMatrix(x + fa), ComplexMatrix(-x), ComplexMatrix(-g), "continuous"
        )
        step = solve_sylvester(prob, method="kron_oracle", opts=opts)
        x_new = x + step.array
        if polished:
            g_new = x_new @ x_new + fa @ x_new + ha
            if float(np.linalg.norm(g_new)) >= resid:
                return ComplexMatrix(x)
        x = x_new
    raise NewtonStall(
        f"solvent Newton did not reach residual {target:.3e} in {max_iter} iterations"
    )


def solve_ivp(
    p: QuadraticPencil,
    y0,
    y1,
    t,
    opts: CalculusOptions | None = None,
    report: dict | None = None,
) -> ComplexMatrix:
    """Solution ``y(t) = Tdot(t) E y0 + T(t) (E y1 + F y0)`` of the pencil IVP.

    ``y0`` and ``y1`` are the initial value and initial derivative as n x 1
    matrices.
    """
    y0a, y1a = _as_array(y0), _as_array(y1)
    n = p.dim
    if y0a.shape != (n, 1) or y1a.shape != (n, 1):
        raise ShapeMismatch(f"y0 and y1 must be {n}x1 column vectors")
    tt, td = impulse_response(p, t, opts, report)
    ea, fa = p.e.array, p.f.array
    y = td.array @ (ea @ y0a) + tt.array @ (ea @ y1a + fa @ y0a)
    return ComplexMatrix(y)
