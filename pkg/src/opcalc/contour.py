"""Oriented envelopes of spectral sets and matrix-valued contour quadrature.

Contours are finite unions of circles. On a circle the trapezoidal rule is
spectrally accurate for analytic integrands, winding numbers are trivial to
evaluate, and node doubling reuses all previous integrand evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CannotSeparate, QuadratureStall, ShapeMismatch
from .numcore import ComplexMatrix, _as_array, eigenvalues

_TWO_PI = 2.0 * np.pi


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpectralEnclosure:
    """Finite union of disks guaranteed to contain a spectrum."""

    disks: tuple

    def __post_init__(self):
        d = tuple((complex(c), float(r)) for c, r in self.disks)
        if any(r < 0 for _, r in d):
            raise ValueError("disk radii must be non-negative")
        object.__setattr__(self, "disks", d)

    @property
    def is_empty(self) -> bool:
        return len(self.disks) == 0

    def diameter(self) -> float:
        """Diameter of the union (for one disk, 2r)."""
        if not self.disks:
            return 0.0
        best = max(2.0 * r for _, r in self.disks)
        for i, (ci, ri) in enumerate(self.disks):
            for cj, rj in self.disks[i + 1:]:
                best = max(best, abs(ci - cj) + ri + rj)
        return best

    def max_abs(self) -> float:
        return max((abs(c) + r for c, r in self.disks), default=0.0)

    def contains_point(self, p: complex) -> bool:
        return any(abs(p - c) <= r for c, r in self.disks)

    def gap_to(self, other: "SpectralEnclosure") -> float:
        """Smallest boundary-to-boundary distance to another union (may be <= 0)."""
        return min(
            abs(ci - cj) - ri - rj
            for ci, ri in self.disks
            for cj, rj in other.disks
        )


def enclosure(a, margin: float, mode: str = "eigen") -> SpectralEnclosure:
    """Disk union covering ``sigma(A)``.

    ``eigen`` mode places one disk of radius ``margin`` on every computed
    eigenvalue; ``gershgorin`` mode uses the row Gershgorin disks inflated
    by ``margin``.
    """
    aa = _as_array(a)
    if margin <= 0.0:
        raise ValueError(f"margin must be positive, got {margin}")
    if mode == "eigen":
        pts = eigenvalues(aa)
        return SpectralEnclosure(tuple((p, margin) for p in pts))
    if mode == "gershgorin":
        n = aa.shape[0]
        disks = []
        for i in range(n):
            radius = float(np.sum(np.abs(aa[i, :])) - abs(aa[i, i]))
            disks.append((complex(aa[i, i]), radius + margin))
        return SpectralEnclosure(tuple(disks))
    raise ValueError(f"unknown enclosure mode {mode!r}")


def points_enclosure(points, margin: float) -> SpectralEnclosure:
    """Disk union of radius ``margin`` around a finite point set."""
    pts = [complex(p) for p in points]
    if not pts:
        raise ValueError("cannot enclose an empty point set")
    if margin <= 0.0:
        raise ValueError(f"margin must be positive, got {margin}")
    return SpectralEnclosure(tuple((p, margin) for p in pts))


@dataclass(frozen=True)
class Contour:
    """Union of oriented circles with trapezoidal quadrature nodes.

    ``components`` holds ``(center, radius, orientation)`` triples with
    orientation ``+1`` counterclockwise, ``-1`` clockwise. The base node
    count per component is a power of two; quadrature may refine it by
    doubling without moving existing nodes.
    """

    components: tuple
    nodes_per_component: int = 64

    def __post_init__(self):
        comps = tuple((complex(c), float(r), int(o)) for c, r, o in self.components)
        if not comps:
            raise ValueError("contour needs at least one circle")
        if any(r <= 0 for _, r, _ in comps):
            raise ValueError("circle radii must be positive")
        if any(o not in (-1, 1) for _, _, o in comps):
            raise ValueError("orientation must be +1 or -1")
        if not _is_pow2(self.nodes_per_component) or self.nodes_per_component < 4:
            raise ValueError("nodes_per_component must be a power of two >= 4")
        object.__setattr__(self, "components", comps)

    @property
    def nodes(self) -> list:
        """Base-level quadrature nodes as ``(z, w)`` pairs, index order."""
        out = []
        for comp in self.components:
            z, w = _component_nodes(comp, self.nodes_per_component)
            out.extend(zip(z, w))
        return out

    def winding(self, p: complex) -> int:
        """Winding number of the contour about a point not on any circle."""
        total = 0
        for c, r, o in self.components:
            if abs(p - c) < r:
                total += o
        return total

    def reversed(self) -> "Contour":
        return Contour(
            components=tuple((c, r, -o) for c, r, o in self.components),
            nodes_per_component=self.nodes_per_component,
        )


def _component_nodes(comp, n: int):
    c, r, o = comp
    theta = _TWO_PI * np.arange(n) / n
    ring = np.exp(1j * theta)
    z = c + r * ring
    w = (o * r * _TWO_PI * 1j / n) * ring
    return z, w


def _cover_circle(disks):
    """Center and radius of a circle covering a set of disks."""
    if len(disks) == 1:
        (c, r), = disks
        return c, r
    best, pi, pj = -1.0, 0, 0
    for i, (ci, ri) in enumerate(disks):
        for j in range(i + 1, len(disks)):
            cj, rj = disks[j]
            d = abs(ci - cj) + ri + rj
            if d > best:
                best, pi, pj = d, i, j
    ci, ri = disks[pi]
    cj, rj = disks[pj]
    sep = abs(cj - ci)
    if sep == 0.0:
        center = ci
    else:
        center = ci + (cj - ci) * ((best / 2.0 - ri) / sep)
    radius = max(abs(ck - center) + rk for ck, rk in disks)
    return center, radius


def envelope(
    inside: SpectralEnclosure,
    avoid: SpectralEnclosure | None = None,
    nodes_per_component: int = 64,
) -> Contour:
    """Counterclockwise contour winding once around ``inside``, zero around ``avoid``.

    Circle radii keep every quadrature node at distance at least ``gap/4``
    from both enclosures (``gap`` = boundary distance between the two
    unions), with a floor of five percent of the inside diameter when there
    is nothing to avoid. Overlapping inflated circles are merged into one
    covering circle.

    Raises
    ------
    CannotSeparate
        If the enclosures intersect, or merging forces a circle to swallow
        part of the ``avoid`` region.
    """
    if inside.is_empty:
        raise ValueError("cannot build an envelope of an empty enclosure")
    scale = max(inside.diameter(), 1e-12)
    have_avoid = avoid is not None and not avoid.is_empty
    if have_avoid:
        gap = inside.gap_to(avoid)
        if gap <= 0.0:
            raise CannotSeparate(
                f"enclosures intersect or touch (boundary gap {gap:.3e})"
            )
        pad = min(max(gap / 4.0, 0.05 * scale), 0.45 * gap)
        sep_threshold = gap / 4.0
    else:
        gap = np.inf
        pad = 0.05 * scale
        sep_threshold = pad / 2.0

    clusters = [[d] for d in inside.disks]
    while True:
        circles = [_cover_circle(cl) for cl in clusters]
        merged = False
        for i in range(len(circles)):
            for j in range(i + 1, len(circles)):
                ci, ri = circles[i]
                cj, rj = circles[j]
                if abs(ci - cj) - (ri + pad) - (rj + pad) < sep_threshold:
                    clusters[i].extend(clusters[j])
                    del clusters[j]
                    merged = True
                    break
            if merged:
                break
        if not merged:
            break

    final = [(c, r + pad) for c, r in (_cover_circle(cl) for cl in clusters)]
    if have_avoid:
        slack = gap / 4.0 * (1.0 - 1e-9)
        for ck, rk in final:
            for ca, ra in avoid.disks:
                if abs(ck - ca) - rk - ra < slack:
                    raise CannotSeparate(
                        "merged contour circle comes within gap/4 of the "
                        "avoided enclosure; spectra too interleaved for "
                        "contour separation"
                    )
    return Contour(
        components=tuple((c, r, 1) for c, r in final),
        nodes_per_component=nodes_per_component,
    )


@dataclass(frozen=True)
class QuadratureResult:
    """Contour integral value with its node-doubling error estimate."""

    value: ComplexMatrix
    error_estimate: float
    nodes_used: int

    def __post_init__(self):
        if self.error_estimate < 0.0:
            raise ValueError("error_estimate must be non-negative")


def integrate(
    contour: Contour,
    integrand,
    tol: float = 1e-10,
    node_cap: int = 4096,
    fixed: bool = False,
) -> QuadratureResult:
    """Evaluate ``(1/2pi i) * integral of integrand`` over the contour.

    The trapezoidal sum starts at the contour's base node count and doubles
    (all components together, previous evaluations reused) until the
    Frobenius difference between consecutive levels satisfies
    ``err <= tol * (1 + ||value||_F)``. With ``fixed=True`` a single pass at
    the base node count is performed and the error estimate compares against
    the half-node subset.

    Raises
    ------
    QuadratureStall
        If the per-component node cap is reached before the tolerance,
        which usually means the contour runs too close to a singularity.
    """
    cache: dict = {}

    def level_sum(n: int) -> np.ndarray:
        total = None
        for comp in contour.components:
            z, w = _component_nodes(comp, n)
            for k in range(n):
                zk = complex(z[k])
                fv = cache.get(zk)
                if fv is None:
                    fv = _as_array(integrand(zk))
                    cache[zk] = fv
                term = w[k] * fv
                total = term if total is None else total + term
        return total / (2.0j * np.pi)

    ncomp = len(contour.components)
    n = contour.nodes_per_component
    if fixed:
        value = level_sum(n)
        half = level_sum(n // 2)
        err = float(np.linalg.norm(value - half))
        return QuadratureResult(ComplexMatrix(value), err, n * ncomp)

    prev = level_sum(n)
    err = float("inf")
    while n * 2 <= node_cap:
        n *= 2
        value = level_sum(n)
        err = float(np.linalg.norm(value - prev))
        if err <= tol * (1.0 + float(np.linalg.norm(value))):
            return QuadratureResult(ComplexMatrix(value), err, n * ncomp)
        prev = value
    raise QuadratureStall(
        f"error estimate {err:.3e} above tolerance at {node_cap} nodes per "
        f"component; contour may be too close to a singularity"
    )
