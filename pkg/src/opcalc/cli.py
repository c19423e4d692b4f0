"""Command-line interface: matrix I/O, dispatch, machine-readable reports.

Heavy numerical modules are imported inside :func:`main` so the
``OPCALC_THREADS`` cap can be exported to the BLAS thread-count variables
before numpy loads. Matrix files are either Matrix Market
(``array complex general``, column-major, one "re im" pair per line) or
JSON ``{"rows": n, "cols": m, "data": [[re, im], ...]}`` in row-major
order, chosen by file extension.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

_REPORT_SCHEMA = 1

_MM_HEADER = "%%MatrixMarket matrix array complex general"


def _apply_thread_cap() -> None:
    cap = os.environ.get("OPCALC_THREADS")
    if cap:
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS",
        ):
            os.environ.setdefault(var, cap)


def read_matrix(path: str):
    """Read a matrix from a .mtx or .json file."""
    from .numcore import ComplexMatrix

    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        rows, cols = int(payload["rows"]), int(payload["cols"])
        data = payload["data"]
        if len(data) != rows * cols:
            raise ValueError(f"{path}: expected {rows * cols} entries, got {len(data)}")
        entries = [complex(re, im) for re, im in data]
        return ComplexMatrix([entries[i * cols:(i + 1) * cols] for i in range(rows)])
    if path.endswith(".mtx"):
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0].strip().lower() != _MM_HEADER.lower():
            raise ValueError(f"{path}: missing MatrixMarket 'array complex general' header")
        body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%")]
        rows, cols = (int(tok) for tok in body[0].split())
        vals = body[1:]
        if len(vals) != rows * cols:
            raise ValueError(f"{path}: expected {rows * cols} entries, got {len(vals)}")
        import numpy as np

        m = np.empty((rows, cols), dtype=np.complex128)
        k = 0
        for j in range(cols):
            for i in range(rows):
                re_s, im_s = vals[k].split()
                m[i, j] = complex(float(re_s), float(im_s))
                k += 1
        return ComplexMatrix(m)
    raise ValueError(f"{path}: unknown matrix format (use .mtx or .json)")


def write_matrix(path: str, m) -> None:
    """Write a matrix to a .mtx or .json file (format by extension)."""
    from .numcore import as_matrix

    cm = as_matrix(m)
    if path.endswith(".json"):
        data = [[z.real, z.imag] for z in cm.entries]
        payload = {"rows": cm.rows, "cols": cm.cols, "data": data}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
        return
    if path.endswith(".mtx"):
        a = cm.array
        out = [_MM_HEADER, f"{cm.rows} {cm.cols}"]
        for j in range(cm.cols):
            for i in range(cm.rows):
                z = a[i, j]
                out.append(f"{z.real:.17g} {z.imag:.17g}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(out) + "\n")
        return
    raise ValueError(f"{path}: unknown matrix format (use .mtx or .json)")


def _add_common(sub: argparse.ArgumentParser, out_required: bool = True) -> None:
    sub.add_argument("--tol", type=float, default=1e-10, help="quadrature tolerance")
    sub.add_argument("--margin", type=float, default=None, help="enclosure disk radius")
    sub.add_argument("--node-cap", type=int, default=4096, help="max nodes per contour component")
    sub.add_argument(
        "--enclosure-mode", choices=("eigen", "gershgorin"), default="eigen",
        help="spectral enclosure construction",
    )
    sub.add_argument("--report", default=None, help="write the JSON report here (default stdout)")
    if out_required:
        sub.add_argument("--out", required=True, help="output matrix path (.mtx or .json)")


def _parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="opcalc",
        description="Contour-calculus toolkit for functions of one and two matrices",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("funm", help="f(A) by contour quadrature")
    p.add_argument("--f", required=True, help="one-variable function spec")
    p.add_argument("--A", required=True)
    _add_common(p)

    p = subs.add_parser("funm2", help="two-variable calculus applied to C")
    p.add_argument("--f", required=True, help="two-variable function spec")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--C", required=True)
    _add_common(p)

    p = subs.add_parser("boxdot", help="one-contour two-operator calculus applied to C")
    p.add_argument("--f", required=True, help="one-variable function spec")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--C", required=True)
    _add_common(p)

    p = subs.add_parser("sylvester", help="solve A Z - Z B = C")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--C", required=True)
    p.add_argument(
        "--method",
        choices=("contour", "exp_integral", "series", "kron", "sign_form"),
        default="contour",
    )
    p.add_argument("--verify", choices=("kron",), default=None,
                   help="cross-check against the Kronecker oracle")
    _add_common(p)

    p = subs.add_parser("stein", help="solve Z - A Z B = C")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--C", required=True)
    p.add_argument("--method", choices=("boxtimes", "kron"), default="boxtimes")
    _add_common(p)

    p = subs.add_parser("pencil-response", help="impulse response T, Tdot at times")
    p.add_argument("--E", required=True)
    p.add_argument("--F", required=True)
    p.add_argument("--H", required=True)
    p.add_argument("--t", required=True, help="comma-separated non-negative times")
    _add_common(p)

    p = subs.add_parser("pencil-ivp", help="pencil initial value problem at time t")
    p.add_argument("--E", required=True)
    p.add_argument("--F", required=True)
    p.add_argument("--H", required=True)
    p.add_argument("--y0", required=True)
    p.add_argument("--y1", required=True)
    p.add_argument("--t", type=float, required=True)
    _add_common(p)

    p = subs.add_parser("solvent", help="Newton iteration for a right solvent")
    p.add_argument("--F", required=True)
    p.add_argument("--H", required=True)
    p.add_argument("--X0", default=None, help="starting guess (default zero matrix)")
    _add_common(p)

    p = subs.add_parser("frechet", help="Frechet differential df(dA, A)")
    p.add_argument("--f", required=True, help="one-variable function spec")
    p.add_argument("--A", required=True)
    p.add_argument("--dA", required=True)
    p.add_argument("--oracle", action="store_true",
                   help="cross-check against the block 2x2 oracle")
    _add_common(p)

    p = subs.add_parser("spectrum-map", help="transformator spectrum of f(A, B)")
    p.add_argument("--f", required=True, help="two-variable function spec")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--verify", action="store_true",
                   help="compare against eigenvalues of the materialized lift")
    _add_common(p, out_required=False)

    return parser.parse_args(argv)


def _options(args):
    from .calculus import CalculusOptions

    return CalculusOptions(
        tol=args.tol,
        margin=args.margin,
        node_cap=args.node_cap,
        enclosure_mode=args.enclosure_mode,
    )


def _dispatch(args, report: dict):
    import numpy as np

    from . import calculus, frechet, holofun, pencil, sylvester
    from .numcore import multiset_match_distance

    opts = _options(args)
    report["options"] = {
        "tol": opts.tol,
        "margin": opts.margin,
        "node_cap": opts.node_cap,
        "enclosure_mode": opts.enclosure_mode,
    }
    writes: list[tuple[str, object]] = []

    if args.command == "funm":
        f = holofun.parse_fun1(args.f)
        a = read_matrix(args.A)
        writes.append((args.out, calculus.funm(f, a, opts, report)))

    elif args.command == "funm2":
        f = holofun.parse_fun2(args.f)
        a, b, c = read_matrix(args.A), read_matrix(args.B), read_matrix(args.C)
        writes.append((args.out, calculus.boxtimes(f, a, b, c, opts, report)))

    elif args.command == "boxdot":
        f = holofun.parse_fun1(args.f)
        a, b, c = read_matrix(args.A), read_matrix(args.B), read_matrix(args.C)
        writes.append((args.out, calculus.boxdot(f, a, b, c, opts, report)))

    elif args.command == "sylvester":
        a, b, c = read_matrix(args.A), read_matrix(args.B), read_matrix(args.C)
        prob = sylvester.SylvesterProblem(a, b, c, "continuous")
        if args.method == "sign_form":
            z = sylvester.q_apply_sign_form(a, b, c, opts, report)
        else:
            method = "kron_oracle" if args.method == "kron" else args.method
            z = sylvester.solve_sylvester(prob, method, opts, report)
        if args.verify == "kron":
            zk = sylvester.solve_sylvester(prob, "kron_oracle", opts)
            rel = float(np.linalg.norm(z.array - zk.array) / max(np.linalg.norm(zk.array), 1e-300))
            report["verify"] = {"method": "kron", "relative_difference": rel}
        writes.append((args.out, z))

    elif args.command == "stein":
        a, b, c = read_matrix(args.A), read_matrix(args.B), read_matrix(args.C)
        prob = sylvester.SylvesterProblem(a, b, c, "stein")
        method = "kron_oracle" if args.method == "kron" else args.method
        writes.append((args.out, sylvester.solve_stein(prob, method, opts, report)))

    elif args.command == "pencil-response":
        e, f_m, h = read_matrix(args.E), read_matrix(args.F), read_matrix(args.H)
        times = [float(tok) for tok in args.t.split(",") if tok.strip()]
        if not times:
            raise ValueError("--t must list at least one time")
        p = pencil.QuadraticPencil(e, f_m, h, margin=opts.margin)
        stem, ext = os.path.splitext(args.out)
        report["times"] = times
        for k, t in enumerate(times):
            tt, td = pencil.impulse_response(p, t, opts, report)
            writes.append((f"{stem}_T_{k}{ext}", tt))
            writes.append((f"{stem}_Tdot_{k}{ext}", td))

    elif args.command == "pencil-ivp":
        e, f_m, h = read_matrix(args.E), read_matrix(args.F), read_matrix(args.H)
        y0, y1 = read_matrix(args.y0), read_matrix(args.y1)
        p = pencil.QuadraticPencil(e, f_m, h, margin=opts.margin)
        writes.append((args.out, pencil.solve_ivp(p, y0, y1, args.t, opts, report)))

    elif args.command == "solvent":
        f_m, h = read_matrix(args.F), read_matrix(args.H)
        if args.X0 is not None:
            x0 = read_matrix(args.X0)
        else:
            x0 = np.zeros((f_m.rows, f_m.cols))
        writes.append((args.out, pencil.right_solvent_newton(f_m, h, x0, opts, report)))

    elif args.command == "frechet":
        f = holofun.parse_fun1(args.f)
        a, da = read_matrix(args.A), read_matrix(args.dA)
        req = frechet.DifferentialRequest(f, a, da)
        df = frechet.frechet(req, opts, report)
        if args.oracle:
            oracle = frechet.frechet_block_oracle(f, a, da, opts)
            rel = float(
                np.linalg.norm(df.array - oracle.array)
                / max(np.linalg.norm(oracle.array), 1e-300)
            )
            report["verify"] = {"method": "block_oracle", "relative_difference": rel}
        writes.append((args.out, df))

    elif args.command == "spectrum-map":
        f = holofun.parse_fun2(args.f)
        a, b = read_matrix(args.A), read_matrix(args.B)
        if f.cross is not None and f.cross[0] == "diagonal":
            from .numcore import eigenvalues
            from .errors import SpectraOverlap

            eigs_a, eigs_b = eigenvalues(a.array), eigenvalues(b.array)
            scale = 1.0 + max(abs(x) for x in eigs_a + eigs_b)
            if min(abs(la - mu) for la in eigs_a for mu in eigs_b) <= 1e-10 * scale:
                raise SpectraOverlap("spectra not separable")
        values = calculus.transformator_spectrum(f, a, b)
        report["spectrum"] = [[v.real, v.imag] for v in values]
        for v in values:
            print(f"{v.real:.17g} {v.imag:.17g}")
        if args.verify:
            lift = calculus.transformator_matrix(f, a, b, opts, report)
            from .numcore import eigenvalues as _eigs

            lifted = _eigs(lift.lift.array)
            print("# lifted eigenvalues")
            for v in lifted:
                print(f"{v.real:.17g} {v.imag:.17g}")
            dist = multiset_match_distance(values, lifted)
            report["verify"] = {"lifted_eigenvalues_match_distance": dist}

    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown command {args.command!r}")

    for path, matrix in writes:
        write_matrix(path, matrix)
    report["outputs"] = [path for path, _ in writes]
    return report


def main(argv=None) -> int:
    _apply_thread_cap()
    args = _parse_args(argv)
    from .errors import FunctionSpecError, NumericalError, PreconditionError

    report: dict = {"schema": _REPORT_SCHEMA, "command": args.command}
    start = time.perf_counter()
    try:
        _dispatch(args, report)
    except FunctionSpecError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 4
    report["timings"] = {"total_s": time.perf_counter() - start}
    payload = json.dumps(report, sort_keys=True)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
