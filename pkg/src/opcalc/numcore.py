"""Dense complex matrix substrate: resolvents, eigenvalues, Kronecker lifts.

Conventions used throughout the package:

* ``vec`` is column-stacking, so the transformator ``C -> A C B`` lifts to
  the Kronecker matrix ``B.T (x) A`` acting on ``vec(C)``.
* Residuals are measured in the Frobenius norm; operator 2-norms are
  estimated by power iteration (30 steps) where a cheap bound is enough.

All public operations are pure functions over immutable values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    NoConvergence,
    NotApplicable,
    ShapeMismatch,
    SingularResolvent,
)

_EPS = float(np.finfo(np.complex128).eps)


class ComplexMatrix:
    """Immutable dense complex matrix.

    Thin validated wrapper around a read-only ``complex128`` ndarray. All
    operators and functions of operators in this package are realized as
    instances of this class.
    """

    __slots__ = ("_a",)

    def __init__(self, data):
        a = np.array(data, dtype=np.complex128, order="C")
        if a.ndim != 2:
            raise ShapeMismatch(f"matrix must be 2-d, got ndim={a.ndim}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ShapeMismatch(f"matrix dimensions must be positive, got {a.shape}")
        if not np.all(np.isfinite(a.view(np.float64))):
            raise ValueError("matrix entries must be finite (no NaN/Inf)")
        a.setflags(write=False)
        self._a = a

    # -- construction helpers -------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "ComplexMatrix":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "ComplexMatrix":
        return cls(np.zeros((rows, cols)))

    # -- spec fields -----------------------------------------------------------
    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def entries(self) -> tuple:
        """Row-major tuple of entries."""
        return tuple(self._a.ravel(order="C"))

    @property
    def array(self) -> np.ndarray:
        """Read-only ndarray view of the matrix."""
        return self._a

    # -- conveniences ----------------------------------------------------------
    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def norm_f(self) -> float:
        return float(np.linalg.norm(self._a))

    def __getitem__(self, idx):
        return self._a[idx]

    def __add__(self, other):
        return ComplexMatrix(self._a + _as_array(other))

    def __sub__(self, other):
        return ComplexMatrix(self._a - _as_array(other))

    def __neg__(self):
        return ComplexMatrix(-self._a)

    def __mul__(self, scalar):
        return ComplexMatrix(self._a * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return ComplexMatrix(self._a @ _as_array(other))

    def __repr__(self):
        return f"ComplexMatrix({self.rows}x{self.cols})"


def _as_array(m) -> np.ndarray:
    """Accept ComplexMatrix or array-like, return a complex128 ndarray."""
    if isinstance(m, ComplexMatrix):
        return m.array
    return np.asarray(m, dtype=np.complex128)


def as_matrix(m) -> ComplexMatrix:
    return m if isinstance(m, ComplexMatrix) else ComplexMatrix(m)


def _require_square(a: np.ndarray, name: str = "matrix") -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got shape {a.shape}")


def vec(c) -> np.ndarray:
    """Column-stacking vectorization."""
    return _as_array(c).ravel(order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=np.complex128)
    if v.size != rows * cols:
        raise ShapeMismatch(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def fro_norm(m) -> float:
    return float(np.linalg.norm(_as_array(m)))


def op_norm_est(m, iters: int = 30) -> float:
    """Power-iteration estimate of the operator 2-norm.

    Runs ``iters`` steps of power iteration on ``M* M`` from the fixed
    starting vector ``ones/sqrt(n)``; deterministic and cheap, adequate for
    the Neumann-series bounds it feeds.
    """
    a = _as_array(m)
    n = a.shape[1]
    v = np.ones(n, dtype=np.complex128) / np.sqrt(n)
    s = 0.0
    for _ in range(iters):
        w = a.conj().T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        s = nw
    return float(np.sqrt(s))


@dataclass(frozen=True)
class TransformatorMatrix:
    """Kronecker lift of a transformator acting on n x m matrices.

    ``lift`` is the (n*m) x (n*m) matrix with ``lift @ vec(C) = vec(T(C))``
    for the represented transformator ``T``, with column-stacking ``vec``.
    """

    n: int
    m: int
    lift: ComplexMatrix = field()

    def __post_init__(self):
        nm = self.n * self.m
        if self.lift.rows != nm or self.lift.cols != nm:
            raise ShapeMismatch(
                f"lift must be {nm}x{nm} for n={self.n}, m={self.m}, "
                f"got {self.lift.rows}x{self.lift.cols}"
            )

    def apply(self, c) -> ComplexMatrix:
        ca = _as_array(c)
        if ca.shape != (self.n, self.m):
            raise ShapeMismatch(f"expected {self.n}x{self.m} operand, got {ca.shape}")
        return ComplexMatrix(unvec(self.lift.array @ vec(ca), self.n, self.m))


def resolvent(a, lam: complex) -> ComplexMatrix:
    """Resolvent ``(lam*I - A)^-1`` via partially pivoted LU.

    Raises
    ------
    SingularResolvent
        If a pivot of the LU factorization falls below ``n*eps*||lam*I-A||_F``,
        which signals that ``lam`` lies in or numerically near ``sigma(A)``.
    """
    aa = _as_array(a)
    _require_square(aa, "A")
    n = aa.shape[0]
    m = complex(lam) * np.eye(n) - aa
    scale = np.linalg.norm(m)
    with warnings.catch_warnings():
        # singularity is detected by the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or np.min(pivots) <= n * _EPS * scale:
        raise SingularResolvent(
            f"lambda={lam} is in or near the spectrum (pivot "
            f"{np.min(pivots):.3e} below {n * _EPS * scale:.3e})"
        )
    r = scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=np.complex128), check_finite=False)
    return ComplexMatrix(r)


# -- eigenvalues: Hessenberg reduction + implicitly restarted shifted QR -----

def _hessenberg(a: np.ndarray) -> np.ndarray:
    """Reduce to upper Hessenberg form by complex Householder reflections."""
    h = a.copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k]
        nx = np.linalg.norm(x)
        if nx <= _EPS * np.linalg.norm(h):
            h[k + 2:, k] = 0.0
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        alpha = -phase * nx
        v = x.copy()
        v[0] -= alpha
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        v /= nv
        h[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v.conj())
        h[k + 2:, k] = 0.0
    return h


def _eig2(a, b, c, d):
    """Eigenvalues of a 2x2 complex matrix, stable quadratic formula."""
    m = 0.5 * (a + d)
    disc = np.sqrt(m * m - (a * d - b * c))
    l1 = m + disc if abs(m + disc) >= abs(m - disc) else m - disc
    if l1 == 0.0:
        return 0.0 + 0.0j, 0.0 + 0.0j
    l2 = (a * d - b * c) / l1
    return l1, l2


def _qr_step(h: np.ndarray, mu: complex) -> None:
    """One explicit shifted QR sweep H <- RQ + mu*I on a Hessenberg block."""
    m = h.shape[0]
    h.flat[:: m + 1] -= mu
    rots = []
    for j in range(m - 1):
        a, b = h[j, j], h[j + 1, j]
        r = np.hypot(abs(a), abs(b))
        if r == 0.0:
            rots.append((1.0 + 0.0j, 0.0 + 0.0j, 1.0))
            continue
        rots.append((a, b, r))
        ca, cb = np.conj(a) / r, np.conj(b) / r
        row_j = h[j, j:].copy()
        row_j1 = h[j + 1, j:].copy()
        h[j, j:] = ca * row_j + cb * row_j1
        h[j + 1, j:] = (-b / r) * row_j + (a / r) * row_j1
    for j in range(m - 1):
        a, b, r = rots[j]
        hi = min(j + 3, m)
        col_j = h[:hi, j].copy()
        col_j1 = h[:hi, j + 1].copy()
        h[:hi, j] = col_j * (a / r) + col_j1 * (b / r)
        h[:hi, j + 1] = col_j * (-np.conj(b) / r) + col_j1 * (np.conj(a) / r)
    h.flat[:: m + 1] += mu


def eigenvalues(a, iter_cap: int | None = None) -> list[complex]:
    """All eigenvalues of a square complex matrix, with multiplicity.

    Hessenberg reduction followed by explicitly shifted QR with Wilkinson
    shifts; deflation uses the standard subdiagonal test. The iteration cap
    defaults to ``50*n`` total sweeps.

    Raises
    ------
    NoConvergence
        If the iteration cap is exceeded (pathological input).
    """
    aa = _as_array(a)
    _require_square(aa, "A")
    n = aa.shape[0]
    if n == 1:
        return [complex(aa[0, 0])]
    cap = iter_cap if iter_cap is not None else 50 * n
    h = _hessenberg(aa)
    floor = _EPS * max(np.linalg.norm(h), 1e-300)
    eigs: list[complex] = []
    hi = n - 1
    total = 0
    since_deflation = 0
    while hi >= 0:
        if hi == 0:
            eigs.append(complex(h[0, 0]))
            break
        lo = hi
        while lo > 0:
            tol_k = _EPS * (abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])) + floor
            if abs(h[lo, lo - 1]) <= tol_k:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eigs.append(complex(h[hi, hi]))
            hi -= 1
            since_deflation = 0
            continue
        if lo == hi - 1:
            l1, l2 = _eig2(h[lo, lo], h[lo, hi], h[hi, lo], h[hi, hi])
            eigs.extend([complex(l1), complex(l2)])
            hi -= 2
            since_deflation = 0
            continue
        total += 1
        since_deflation += 1
        if total > cap:
            raise NoConvergence(f"QR iteration exceeded {cap} sweeps for n={n}")
        if since_deflation % 12 == 0:
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1])
        else:
            l1, l2 = _eig2(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
            mu = l1 if abs(l1 - h[hi, hi]) <= abs(l2 - h[hi, hi]) else l2
        block = h[lo:hi + 1, lo:hi + 1].copy()
        _qr_step(block, mu)
        h[lo:hi + 1, lo:hi + 1] = block
    return eigs


def kron_lift(terms) -> TransformatorMatrix:
    """Kronecker lift of the transformator ``C -> sum_i A_i C B_i``.

    ``terms`` is a sequence of ``(A_i, B_i)`` pairs with every ``A_i`` n x n
    and every ``B_i`` m x m. The lift is ``sum_i B_i.T (x) A_i``.
    """
    pairs = [(_as_array(p[0]), _as_array(p[1])) for p in terms]
    if not pairs:
        raise ShapeMismatch("kron_lift needs at least one (A, B) term")
    n = pairs[0][0].shape[0]
    m = pairs[0][1].shape[0]
    lift = np.zeros((n * m, n * m), dtype=np.complex128)
    for ai, bi in pairs:
        _require_square(ai, "A_i")
        _require_square(bi, "B_i")
        if ai.shape[0] != n or bi.shape[0] != m:
            raise ShapeMismatch(
                f"inconsistent term shapes: expected ({n},{n}) x ({m},{m}), "
                f"got {ai.shape} x {bi.shape}"
            )
        lift += np.kron(bi.T, ai)
    return TransformatorMatrix(n=n, m=m, lift=ComplexMatrix(lift))


def multiset_match_distance(xs, ys) -> float:
    """Largest pair distance between two complex multisets under optimal matching."""
    from scipy.optimize import linear_sum_assignment

    xa = np.asarray(list(xs), dtype=np.complex128)
    ya = np.asarray(list(ys), dtype=np.complex128)
    if xa.size != ya.size:
        raise ShapeMismatch(f"multisets differ in size: {xa.size} vs {ya.size}")
    cost = np.abs(xa[:, None] - ya[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def perturbed_inverse(a, b) -> tuple[ComplexMatrix, float]:
    """Inverse of ``A - B`` with the a-priori Neumann-series bound.

    Requires ``||B|| * ||A^-1|| < 1`` in the (power-iteration estimated)
    operator norm. Returns ``(A-B)^-1`` together with the bound
    ``||B|| ||A^-1||^2 / (1 - ||B|| ||A^-1||)`` on ``||(A-B)^-1 - A^-1||``.

    Raises
    ------
    NotApplicable
        If the contraction condition ``||B||*||A^-1|| >= 1`` fails.
    """
    aa = _as_array(a)
    bb = _as_array(b)
    _require_square(aa, "A")
    if bb.shape != aa.shape:
        raise ShapeMismatch(f"A and B must have equal shapes, got {aa.shape}, {bb.shape}")
    n = aa.shape[0]
    a_inv = np.linalg.solve(aa, np.eye(n, dtype=np.complex128))
    norm_b = op_norm_est(bb)
    norm_ainv = op_norm_est(a_inv)
    q = norm_b * norm_ainv
    if q >= 1.0:
        raise NotApplicable(f"||B||*||A^-1|| = {q:.3e} >= 1; Neumann series diverges")
    inv = np.linalg.solve(aa - bb, np.eye(n, dtype=np.complex128))
    bound = norm_b * norm_ainv ** 2 / (1.0 - q) if q > 0.0 else 0.0
    return ComplexMatrix(inv), float(bound)
