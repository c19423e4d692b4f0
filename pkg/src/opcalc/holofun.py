"""Analytic functions of one and two variables, divided differences, kernels.

``HoloFun1`` bundles a scalar analytic function with its exact derivative
and singularity metadata; ``HoloFun2`` does the same for two variables.
The function-spec grammar used by the CLI is parsed here:

    exp:t=1.0   pow:n=3   inv_shift:l0=2+1i   poly:1,0,-2
    rational:p=1,0;q=1,-2   sep(exp:t=1|exp:t=1)   kernel:sylvester_w

Polynomial coefficient lists are ascending (`poly:1,0,-2` is 1 - 2*z**2).
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import InvalidParams, UnknownBuiltin, UnknownKernel

#: Relative diagonal switch for divided differences.
DIAG_TAU = 1e-7


class HoloFun1:
    """Analytic function of one complex variable with exact derivative.

    ``singularities`` lists isolated singular points (poles); ``branch_cut``
    marks the principal branch cut along (-inf, 0]. Contour builders consult
    both to keep integration paths inside the analyticity domain.
    ``dd_override`` optionally supplies a specialized divided-difference
    evaluator (used where a rearranged formula is more stable than the
    generic quotient). Built-in evaluators accept numpy arrays as well as
    scalars, which the contour quadrature exploits to evaluate node grids
    in one shot.
    """

    __slots__ = (
        "name", "params", "_eval", "_deriv", "singularities", "branch_cut", "dd_override",
    )

    def __init__(self, name, ev, deriv, params=None, singularities=(), branch_cut=False,
                 dd_override=None):
        self.name = name
        self.params = dict(params or {})
        self._eval = ev
        self._deriv = deriv
        self.singularities = tuple(complex(s) for s in singularities)
        self.branch_cut = bool(branch_cut)
        self.dd_override = dd_override

    def __call__(self, z: complex) -> complex:
        return self._eval(z)

    def eval(self, z: complex) -> complex:
        return self._eval(z)

    def deriv(self, z: complex) -> complex:
        return self._deriv(z)

    def __mul__(self, other: "HoloFun1") -> "HoloFun1":
        f, g = self, other
        return HoloFun1(

            f"({f.name})*({g.name})",
            lambda z: f(z) * g(z),
            lambda z: f.deriv(z) * g(z) + f(z) * g.deriv(z),
            singularities=f.singularities + g.singularities,
            branch_cut=f.branch_cut or g.branch_cut,
        )

    def __add__(self, other: "HoloFun1") -> "HoloFun1":
        f, g = self, other
        return HoloFun1(
            f"({f.name})+({g.name})",
            lambda z: f(z) + g(z),
            lambda z: f.deriv(z) + g.deriv(z),
            singularities=f.singularities + g.singularities,
            branch_cut=f.branch_cut or g.branch_cut,
        )

    def __repr__(self):
        return f"HoloFun1({self.name})"


def _poly_pair(coeffs):
    c = np.asarray([complex(x) for x in coeffs], dtype=np.complex128)
    if c.size == 0:
        raise InvalidParams("polynomial needs at least one coefficient")
    dc = npoly.polyder(c) if c.size > 1 else np.zeros(1, dtype=np.complex128)
    return c, dc


def _poly_roots(coeffs):
    c = np.asarray(coeffs, dtype=np.complex128)
    # np.roots wants descending order and no leading zeros
    desc = c[::-1]
    nz = np.nonzero(np.abs(desc) > 0)[0]
    if nz.size == 0 or nz[0] == desc.size - 1:
        return ()
    return tuple(np.roots(desc[nz[0]:]))


def builtin(name: str, **params) -> HoloFun1:
    """Catalogue function by name with exact analytic derivative.

    Known names: ``const``, ``id``, ``pow``, ``exp``, ``xexp``,
    ``inv_shift``, ``inv_shift_pow``, ``sqrt_principal``, ``log_principal``,
    ``poly``, ``rational``.
    """
    if name == "const":
        c = complex(params.get("c", 1.0))
        return HoloFun1("const", lambda z, c=c: c, lambda z: 0.0 + 0.0j, {"c": c})
    if name == "id":
        return HoloFun1("id", lambda z: z, lambda z: 1.0 + 0.0j)
    if name == "pow":
        n = int(params.get("n", 1))
        if n < 0:
            raise InvalidParams(f"pow needs n >= 0, got {n}")
        return HoloFun1(
            f"pow:{n}",
            lambda z, n=n: z ** n,
            lambda z, n=n: (n * z ** (n - 1)) if n > 0 else 0.0 + 0.0j,
            {"n": n},
        )
    if name == "exp":
        t = float(params.get("t", 1.0))
        return HoloFun1(
            f"exp:{t}",
            lambda z, t=t: np.exp(t * z),
            lambda z, t=t: t * np.exp(t * z),
            {"t": t},
        )
    if name == "xexp":
        t = float(params.get("t", 1.0))
        exp_t = builtin("exp", t=t)

        def dd_xexp(lam, mu, t=t, exp_t=exp_t):
            # (lam e^{lam t} - mu e^{mu t})/(lam - mu) rearranged to
            # e^{lam t} + mu * dd(exp_t), which inherits the stable
            # near-diagonal handling of the exponential
            if isinstance(lam, np.ndarray) or isinstance(mu, np.ndarray):
                return np.exp(t * lam) + mu * divided_difference_grid(exp_t, lam, mu)
            return np.exp(t * lam) + mu * divided_difference(exp_t, lam, mu)

        return HoloFun1(
            f"xexp:{t}",
            lambda z, t=t: z * np.exp(t * z),
            lambda z, t=t: (1.0 + t * z) * np.exp(t * z),
            {"t": t},
            dd_override=dd_xexp,
        )
    if name == "inv_shift":
        l0 = complex(params["l0"])
        return HoloFun1(
            f"inv_shift:{l0}",
            lambda z, l0=l0: 1.0 / (l0 - z),
            lambda z, l0=l0: 1.0 / (l0 - z) ** 2,
            {"l0": l0},
            singularities=(l0,),
        )
    if name == "inv_shift_pow":
        l0 = complex(params["l0"])
        n = int(params["n"])
        if n < 1:
            raise InvalidParams(f"inv_shift_pow needs n >= 1, got {n}")
        return HoloFun1(
            f"inv_shift_pow:{l0},{n}",
            lambda z, l0=l0, n=n: (l0 - z) ** (-n),
            lambda z, l0=l0, n=n: n * (l0 - z) ** (-(n + 1)),
            {"l0": l0, "n": n},
            singularities=(l0,),
        )
    if name == "sqrt_principal":
        return HoloFun1(
            "sqrt_principal",
            lambda z: np.sqrt(z * (1.0 + 0.0j)),
            lambda z: 0.5 / np.sqrt(z * (1.0 + 0.0j)),
            singularities=(0.0,),
            branch_cut=True,
        )
    if name == "log_principal":
        return HoloFun1(
            "log_principal",
            lambda z: np.log(z * (1.0 + 0.0j)),
            lambda z: 1.0 / (z * (1.0 + 0.0j)),
            singularities=(0.0,),
            branch_cut=True,
        )
    if name == "poly":
        c, dc = _poly_pair(params["coeffs"])
        return HoloFun1(
            "poly",
            lambda z, c=c: npoly.polyval(z, c),
            lambda z, dc=dc: npoly.polyval(z, dc),
            {"coeffs": tuple(c)},
        )
    if name == "rational":
        p, dp = _poly_pair(params["p"])
        q, dq = _poly_pair(params["q"])

        def ev(z, p=p, q=q):
            return npoly.polyval(z, p) / npoly.polyval(z, q)

        def dv(z, p=p, q=q, dp=dp, dq=dq):
            pz, qz = npoly.polyval(z, p), npoly.polyval(z, q)
            return (npoly.polyval(z, dp) * qz - pz * npoly.polyval(z, dq)) / qz ** 2

        return HoloFun1(
            "rational",
            ev,
            dv,
            {"p": tuple(p), "q": tuple(q)},
            singularities=_poly_roots(q),
        )
    raise UnknownBuiltin(f"unknown builtin function {name!r}")


def divided_difference(f: HoloFun1, lam: complex, mu: complex) -> complex:
    """First divided difference of ``f``, exact derivative on the diagonal.

    Uses ``(f(lam)-f(mu))/(lam-mu)`` when the arguments are farther apart
    than ``tau*(1+|lam|+|mu|)`` with ``tau = 1e-7``; otherwise the analytic
    derivative at the midpoint, which keeps the error O(|lam-mu|^2) without
    cancellation.
    """
    lam, mu = complex(lam), complex(mu)
    if f.dd_override is not None:
        return f.dd_override(lam, mu)
    if abs(lam - mu) > DIAG_TAU * (1.0 + abs(lam) + abs(mu)):
        return (f(lam) - f(mu)) / (lam - mu)
    return f.deriv(0.5 * (lam + mu))


def divided_difference_grid(f: HoloFun1, lam, mu) -> np.ndarray:
    """Divided difference of ``f`` evaluated over broadcast node grids.

    Vectorized counterpart of :func:`divided_difference` with the same
    near-diagonal switch; requires the function's evaluators to accept
    arrays (all builtins do).
    """
    lam = np.asarray(lam, dtype=np.complex128)
    mu = np.asarray(mu, dtype=np.complex128)
    lam_b, mu_b = np.broadcast_arrays(lam, mu)
    if f.dd_override is not None:
        return np.asarray(f.dd_override(lam_b, mu_b), dtype=np.complex128)
    diff = lam_b - mu_b
    far = np.abs(diff) > DIAG_TAU * (1.0 + np.abs(lam_b) + np.abs(mu_b))
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = (f(lam_b) - f(mu_b)) / diff
    mid = f.deriv(0.5 * (lam_b + mu_b))
    return np.asarray(np.where(far, quot, mid), dtype=np.complex128)


def bezoutian(g: HoloFun1, h: HoloFun1, lam: complex, mu: complex) -> complex:
    """Bezoutian ``(g(lam)h(mu) - h(lam)g(mu)) / (lam - mu)``.

    Evaluated through divided differences so the near-diagonal rule is
    inherited: ``beta = g^[1](lam,mu) h(mu) - h^[1](lam,mu) g(mu)``.
    """
    return divided_difference(g, lam, mu) * h(mu) - divided_difference(h, lam, mu) * g(mu)


class HoloFun2:
    """Analytic function of two complex variables with singularity metadata.

    ``cross`` describes the coupled singular set consulted by calculus
    preconditions: ``None`` (entire in the cross variables),
    ``("diagonal",)`` for a pole on lam = mu, ``("product_one",)`` for
    lam*mu = 1, ``("plane", nu0, s)`` for lam + s*mu = nu0. ``sing1`` and
    ``sing2`` list per-variable poles; ``cut1``/``cut2`` mark principal
    branch cuts.
    """

    __slots__ = ("kind", "_eval2", "sing1", "sing2", "cut1", "cut2", "cross", "eval2_grid")

    def __init__(self, kind, eval2, sing1=(), sing2=(), cut1=False, cut2=False, cross=None,
                 eval2_grid=None):
        self.kind = kind
        self._eval2 = eval2
        self.sing1 = tuple(complex(s) for s in sing1)
        self.sing2 = tuple(complex(s) for s in sing2)
        self.cut1 = bool(cut1)
        self.cut2 = bool(cut2)
        self.cross = cross
        # optional vectorized evaluator over broadcast node grids; plain
        # arithmetic kernels broadcast through eval2 directly
        self.eval2_grid = eval2_grid

    def __call__(self, lam: complex, mu: complex) -> complex:
        return self._eval2(lam, mu)

    def eval2(self, lam: complex, mu: complex) -> complex:
        return self._eval2(lam, mu)

    def __repr__(self):
        return f"HoloFun2({self.kind})"


def separable(g: HoloFun1, h: HoloFun1) -> HoloFun2:
    """Product kernel ``(lam, mu) -> g(lam) * h(mu)``."""
    return HoloFun2(
        f"sep({g.name}|{h.name})",
        lambda lam, mu: g(lam) * h(mu),
        sing1=g.singularities,
        sing2=h.singularities,
        cut1=g.branch_cut,
        cut2=h.branch_cut,
    )


def dd_kernel(f: HoloFun1) -> HoloFun2:
    """Divided difference of ``f`` as a two-variable kernel."""
    return HoloFun2(
        f"divided_difference({f.name})",
        lambda lam, mu: divided_difference(f, lam, mu),
        sing1=f.singularities,
        sing2=f.singularities,
        cut1=f.branch_cut,
        cut2=f.branch_cut,
        eval2_grid=lambda lam, mu: divided_difference_grid(f, lam, mu),
    )


def composed(f: HoloFun1, g: HoloFun2) -> HoloFun2:
    """Composition ``(lam, mu) -> f(g(lam, mu))``.

    Singularity metadata of ``g`` is kept; analyticity of ``f`` on the value
    set of ``g`` is the caller's responsibility.
    """
    return HoloFun2(
        f"({f.name})o({g.kind})",
        lambda lam, mu: f(g(lam, mu)),
        sing1=g.sing1,
        sing2=g.sing2,
        cut1=g.cut1,
        cut2=g.cut2,
        cross=g.cross,
    )


def kernel2(name: str, **params) -> HoloFun2:
    """Named two-variable kernel with documented singular set.

    ``sylvester_w`` is 1/(lam-mu), ``stein_s`` is 1/(1-lam*mu), ``diff`` is
    lam-mu, ``sum`` is lam+mu, ``shift_resolvent`` is 1/(nu0-lam-+mu) with
    ``sign`` choosing the mu sign in the denominator.
    """
    if name == "sylvester_w":
        return HoloFun2("sylvester_w", lambda lam, mu: 1.0 / (lam - mu), cross=("diagonal",))
    if name == "stein_s":
        return HoloFun2("stein_s", lambda lam, mu: 1.0 / (1.0 - lam * mu), cross=("product_one",))
    if name == "diff":
        return HoloFun2("diff", lambda lam, mu: lam - mu)
    if name == "sum":
        return HoloFun2("sum", lambda lam, mu: lam + mu)
    if name == "shift_resolvent":
        nu0 = complex(params["nu0"])
        sign = params.get("sign", "-")
        if sign not in ("+", "-"):
            raise InvalidParams(f"shift_resolvent sign must be '+' or '-', got {sign!r}")
        s = 1.0 if sign == "+" else -1.0
        # denominator nu0 - lam -+ mu: '-' branch gives 1/(nu0 - lam + mu)
        return HoloFun2(
            f"shift_resolvent:{nu0},{sign}",
            lambda lam, mu, nu0=nu0, s=s: 1.0 / (nu0 - lam - s * mu),
            cross=("plane", nu0, s),
        )
    if name == "separable":
        try:
            return separable(params["g"], params["h"])
        except KeyError as exc:
            raise InvalidParams("separable kernel needs g=... and h=...") from exc
    raise UnknownKernel(f"unknown two-variable kernel {name!r}")


# -- CLI function-spec grammar ------------------------------------------------

def _parse_complex(text: str) -> complex:
    try:
        return complex(text.strip().replace("i", "j"))
    except ValueError as exc:
        raise InvalidParams(f"cannot parse complex literal {text!r}") from exc


def _parse_number_list(text: str):
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise InvalidParams(f"empty coefficient list in {text!r}")
    return tuple(_parse_complex(t) for t in items)


def parse_fun1(spec: str) -> HoloFun1:
    """Parse a one-variable function spec like ``exp:t=1.0`` or ``poly:1,0,-2``."""
    spec = spec.strip()
    name, sep, rest = spec.partition(":")
    name = name.strip()
    if name in ("id", "sqrt_principal", "log_principal"):
        if sep and rest.strip():
            raise InvalidParams(f"{name} takes no parameters, got {rest!r}")
        return builtin(name)
    if name == "poly":
        return builtin("poly", coeffs=_parse_number_list(rest))
    if name == "rational":
        parts = dict()
        for chunk in rest.split(";"):
            key, eq, val = chunk.partition("=")
            if not eq:
                raise InvalidParams(f"rational needs p=...;q=..., got {spec!r}")
            parts[key.strip()] = _parse_number_list(val)
        if set(parts) != {"p", "q"}:
            raise InvalidParams(f"rational needs exactly p and q, got {sorted(parts)}")
        return builtin("rational", p=parts["p"], q=parts["q"])
    if name in ("const", "pow", "exp", "xexp", "inv_shift", "inv_shift_pow"):
        keymap = {"const": "c", "pow": "n", "exp": "t", "xexp": "t", "inv_shift": "l0"}
        params = {}
        if rest.strip():
            for chunk in rest.split(","):
                key, eq, val = chunk.partition("=")
                if eq:
                    params[key.strip()] = val.strip()
                elif name in keymap and len(params) == 0:
                    params[keymap[name]] = chunk.strip()
                else:
                    raise InvalidParams(f"cannot parse parameter {chunk!r} in {spec!r}")
        try:
            if name == "const":
                return builtin("const", c=_parse_complex(params.get("c", "1")))
            if name == "pow":
                return builtin("pow", n=int(params["n"]))
            if name in ("exp", "xexp"):
                return builtin(name, t=float(params.get("t", "1")))
            if name == "inv_shift":
                return builtin("inv_shift", l0=_parse_complex(params["l0"]))
            return builtin(
                "inv_shift_pow",
                l0=_parse_complex(params["l0"]),
                n=int(params["n"]),
            )
        except KeyError as exc:
            raise InvalidParams(f"missing parameter {exc} for {name!r}") from exc
        except ValueError as exc:
            raise InvalidParams(f"bad parameter in {spec!r}: {exc}") from exc
    raise UnknownBuiltin(f"unknown function {name!r} in spec {spec!r}")


def parse_fun2(spec: str) -> HoloFun2:
    """Parse a two-variable spec: ``sep(F|G)`` or ``kernel:NAME[...]``."""
    spec = spec.strip()
    if spec.startswith("sep(") and spec.endswith(")"):
        inner = spec[4:-1]
        left, bar, right = inner.partition("|")
        if not bar:
            raise InvalidParams(f"sep(...) needs two specs split by '|', got {spec!r}")
        return separable(parse_fun1(left), parse_fun1(right))
    if spec.startswith("kernel:"):
        rest = spec[len("kernel:"):]
        name, sep, paramstr = rest.partition(":")
        name = name.strip()
        params = {}
        if sep and paramstr.strip():
            for chunk in paramstr.split(","):
                key, eq, val = chunk.partition("=")
                if not eq:
                    raise InvalidParams(f"cannot parse kernel parameter {chunk!r}")
                params[key.strip()] = val.strip()
        if name == "shift_resolvent":
            if "nu0" not in params:
                raise InvalidParams("shift_resolvent needs nu0=...")
            return kernel2(
                "shift_resolvent",
                nu0=_parse_complex(params["nu0"]),
                sign=params.get("sign", "-"),
            )
        if params:
            raise InvalidParams(f"kernel {name!r} takes no parameters")
        return kernel2(name)
    raise UnknownKernel(f"cannot parse two-variable spec {spec!r}")
