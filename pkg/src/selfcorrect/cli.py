"""Command-line front end.

Every subcommand writes one artifact (CSV or JSON) to ``--out`` or stdout.
CSV files start with ``#`` comment lines echoing the command, its full
configuration and the seed, so a rerun with the same arguments reproduces
the file byte for byte.

Exit codes: 0 ok, 2 usage, 3 unreadable input, 4 contract violation,
5 Monte Carlo step cap reached.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import csscode, ergodic, freeenergy, kmc, thermal
from .f2algebra import F2Poly3

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_CONTRACT, EXIT_TIMEOUT = 0, 2, 3, 4, 5


class InputError(Exception):
    pass


class TimeoutResult(Exception):
    pass


# --------------------------------------------------------------------------
# parsing helpers

def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def _load_code(path: str) -> csscode.CssCode:
    data = _read_json(path)
    try:
        return csscode.code_from_json(data)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path} is not a code file: missing or bad field {exc}") from exc


def _config(args: argparse.Namespace) -> dict:
    skip = {"func", "out", "threads"}  # neither changes the results
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# --------------------------------------------------------------------------
# emitters

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _csv_text(args, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(f"# selfcorrect {args.command}\n")
    buf.write(f"# config: {json.dumps(_config(args), sort_keys=True)}\n")
    if "seed" in vars(args):
        buf.write(f"# seed: {args.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_text(args, payload: dict) -> str:
    doc = {"command": args.command, "config": _config(args)}
    doc.update(payload)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _table(args, header, rows) -> str:
    if getattr(args, "format", "csv") == "json":
        return _json_text(args, {"columns": header,
                                 "rows": [[_jsonable(v) for v in r] for r in rows]})
    return _csv_text(args, header, rows)


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _emit(args, text: str, path: str | None = None) -> None:
    target = path if path is not None else args.out
    if target in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8", newline="\n")


# --------------------------------------------------------------------------
# subcommands

def _spec_from_args(args) -> csscode.CodeSpec:
    if args.spec:
        try:
            return csscode.CodeSpec.from_json(_read_json(args.spec))
        except (KeyError, TypeError) as exc:
            raise InputError(f"{args.spec} is not a code spec: {exc}") from exc
    if args.variant == "fractal":
        if args.f and args.g:
            f = F2Poly3.from_univariate(args.f, args.L)
            g = F2Poly3.from_univariate(args.g, args.L)
            alpha, beta = csscode.fractal_polynomials(f, g)
        else:
            alpha, beta = csscode.cubic_code_polynomials(args.L)
        return csscode.CodeSpec("fractal", args.L, alpha, beta)
    if args.variant == "explicit":
        raise InputError("explicit variant needs --spec with hx and hz")
    return csscode.CodeSpec(args.variant, args.L)


def cmd_catalog(args) -> int:
    code = csscode.catalog_build(_spec_from_args(args))
    doc = csscode.code_to_json(code)
    _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if args.out not in (None, "-"):
        print(json.dumps({"n": code.n, "k": code.k, "n_x": code.n_x, "n_z": code.n_z,
                          "name": code.name}, sort_keys=True))
    return EXIT_OK


def cmd_decompose(args) -> int:
    code = _load_code(args.code)
    d = ergodic.decompose(code)
    payload = {"sizes": {"L": len(d.set_l), "R_X": len(d.set_rx), "R_Z": len(d.set_rz)},
               "n": code.n, "k": code.k, "decomposition": d.to_json()}
    _emit(args, _json_text(args, payload))
    return EXIT_OK


def cmd_verify(args) -> int:
    code = _load_code(args.code)
    d = ergodic.decompose(code)
    lset = set(d.set_l)
    ops = []
    for q in sorted(d.set_rx + d.set_l):
        if not (args.omit_l and q in lset):
            ops.append(csscode.PauliOperator.from_support(code.n, xs=[q]))
    for q in sorted(d.set_rz + d.set_l):
        if not (args.omit_l and q in lset):
            ops.append(csscode.PauliOperator.from_support(code.n, zs=[q]))
    ok = ergodic.verify_ergodicity(code, ops)
    _emit(args, _json_text(args, {"ergodic": ok, "n_couplings": len(ops)}))
    return EXIT_OK


def cmd_percolate(args) -> int:
    rows = []
    for L in args.L:
        for p in args.p:
            for c in args.c:
                r = thermal.grid_sink_probability(L, p, c, args.trials, args.seed)
                rows.append([L, p, c, r.trials, r.empirical, r.formula, r.stderr, r.z_score])
    _emit(args, _table(args, ["L", "p", "c", "trials", "estimate", "formula", "stderr", "z"], rows))
    return EXIT_OK


def cmd_lemma3(args) -> int:
    L = args.r * max(1, len(args.f)) + 1
    f = F2Poly3.from_univariate(args.f, L)
    rows = []
    if args.scaling:
        sc = thermal.min_box_scaling(f, args.p, eps=args.eps, r_max=args.r,
                                     trials=args.trials, seed=args.seed)
        for row in sc.rows:
            rows.append([row.p, row.r_star, row.prob, "", row.trials])
        if args.fit_out:
            _emit(args, json.dumps({"fit_exponent": sc.fit_exponent,
                                    "fit_prefactor": sc.fit_prefactor, "eps": sc.eps,
                                    "m": sc.m}, indent=2, sort_keys=True) + "\n", args.fit_out)
        _emit(args, _table(args, ["p", "r", "estimate", "stderr", "trials"], rows))
        return EXIT_OK
    for idx, p in enumerate(args.p):
        st = thermal.lemma3_simulate(f, p, args.r, args.trials, args.seed + idx)
        for t in range(1, args.r + 1):
            est, se = st.prob_maximal(t)
            stay, n_stay = st.stay_given_maximal(t) if t < args.r else (float("nan"), 0)
            jump, n_jump = st.jump_given_submaximal(t) if t < args.r else (float("nan"), 0)
            rows.append([p, t, est, se, st.trials, stay, n_stay, jump, n_jump])
    _emit(args, _table(args, ["p", "t", "estimate", "stderr", "trials", "stay_given_max",
                              "n_max", "jump_given_submax", "n_submax"], rows))
    return EXIT_OK


def cmd_gibbs(args) -> int:
    code = _load_code(args.code)
    rows = []
    for b in args.beta:
        r = thermal.gibbs_free_distance(code, b, samples=args.samples, seed=args.seed)
        rows.append([b, r.distance, r.stderr, r.exact])
    _emit(args, _table(args, ["beta", "distance", "stderr", "exact"], rows))
    return EXIT_OK


def cmd_remover(args) -> int:
    code = _load_code(args.code)
    if args.beta is not None:
        mask = thermal.sample_imperfect(code, args.beta, args.seed)
    else:
        mask = thermal.ImperfectMask.removing(code, x_removed=args.remove_x)
    if args.target is None:
        res = thermal.classicalize(code, mask, args.r_box)
        payload = {"ok": res.ok, "failed_index": res.failed_index,
                   "removers": None if res.removers is None else
                   [{"j": j, "z_support": v.support()} for j, v in res.removers]}
    else:
        v = thermal.find_remover(code, mask, args.target, args.r_box)
        payload = {"target": args.target,
                   "remover": None if v is None else {"z_support": v.support()}}
    payload["kept"] = "".join(str(int(b)) for b in mask.kept)
    _emit(args, _json_text(args, payload))
    return EXIT_OK


def cmd_free_energy(args) -> int:
    rows = []
    for b in args.beta:
        params = freeenergy.WeldedBoundParams(beta=b, J=args.J, alpha=args.alpha)
        for L in args.L:
            F = freeenergy.welded_fb_bound(params, L)
            rows.append([b, L, F, freeenergy.arrhenius_tau(b, F).ln_tau])
    _emit(args, _table(args, ["beta", "L", "F_b", "ln_tau"], rows))
    return EXIT_OK


def cmd_lmax(args) -> int:
    grid = np.exp(np.linspace(math.log(args.L_min), math.log(args.L_max), args.points))
    rows, xs, ys = [], [], []
    for b in args.beta:
        params = freeenergy.WeldedBoundParams(beta=b, J=args.J, alpha=args.alpha)
        r = freeenergy.l_max(params, grid)
        Lc, Fc = freeenergy.welded_stationary_point(params)
        rows.append([b, r.L_star, r.F_star, math.log(r.L_star), math.log(Lc), Fc, r.flagged])
        if not r.flagged:
            xs.append(b)
            ys.append(math.log(r.L_star))
    if args.fit_out and len(xs) >= 2:
        fit = freeenergy.fit_line(xs, ys)
        _emit(args, json.dumps(fit.to_json(), indent=2, sort_keys=True) + "\n", args.fit_out)
    _emit(args, _table(args, ["beta", "L_star", "F_star", "ln_L_star", "ln_L_closed",
                              "F_closed", "flagged"], rows))
    return EXIT_OK


def _sweep_betas(args) -> list[float]:
    if args.beta is not None:
        return list(args.beta)
    return [1.0 / v for v in args.beta_inv]


def cmd_kmc_sweep(args) -> int:
    betas = _sweep_betas(args)
    res = kmc.sweep_and_fit(args.L, betas, args.trials, args.seed, J=args.J, alpha=args.alpha,
                            clock=args.clock, max_steps=args.max_steps, threads=args.threads,
                            fit=False)
    rows = [[r.L, r.beta, r.trial, r.tau, r.steps, r.timed_out] for r in res.rows]
    _emit(args, _table(args, ["L", "beta", "trial", "tau", "steps", "timed_out"], rows))
    if args.fit_out:
        bs = sorted(res.peaks)
        try:
            fit = kmc.fit_double_exponential(bs, [res.peaks[b][1] for b in bs])
        except ValueError as exc:
            fit = {"error": str(exc)}
        _emit(args, json.dumps(fit, indent=2, sort_keys=True) + "\n", args.fit_out)
    if args.plot_data:
        prow = []
        for b in sorted({r.beta for r in res.rows}):
            for L, m, se in res.series(b):
                prow.append([b, L, m, se])
        _emit(args, _csv_text(args, ["beta", "L", "mean_tau", "stderr"], prow), args.plot_data)
    if any(r.timed_out for r in res.rows):
        raise TimeoutResult("some trials reached --max-steps; their tau is a lower bound")
    return EXIT_OK


def _read_sweep_csv(path: str) -> list[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    need = {"L", "beta", "tau"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise InputError(f"{path} lacks columns {sorted(need)}")
    try:
        return [{"L": int(r["L"]), "beta": float(r["beta"]), "tau": float(r["tau"])} for r in reader]
    except ValueError as exc:
        raise InputError(f"bad number in {path}: {exc}") from exc


def cmd_fit(args) -> int:
    rows = _read_sweep_csv(args.input)
    cells: dict[tuple[int, float], list[float]] = {}
    for r in rows:
        cells.setdefault((r["L"], r["beta"]), []).append(r["tau"])
    peaks: dict[float, tuple[int, float]] = {}
    for (L, b), taus in cells.items():
        m = float(np.mean(taus))
        if b not in peaks or m > peaks[b][1]:
            peaks[b] = (L, m)
    bs = sorted(peaks)
    fit = kmc.fit_double_exponential(bs, [peaks[b][1] for b in bs])
    fit["peaks"] = [[b, peaks[b][0], peaks[b][1]] for b in bs]
    _emit(args, _json_text(args, {"fit": fit}))
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="selfcorrect", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        return p

    def table_opts(p):
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = add("catalog", cmd_catalog, "build a code from the catalog")
    p.add_argument("--variant", choices=("toric2d", "toric3d", "fractal", "explicit"), default="toric2d")
    p.add_argument("--L", type=int, default=4)
    p.add_argument("--spec", help="CodeSpec JSON file (overrides --variant/--L)")
    p.add_argument("--f", type=_ints, help="fractal f(x) coefficients, lowest first")
    p.add_argument("--g", type=_ints, help="fractal g(x) coefficients, lowest first")

    p = add("decompose", cmd_decompose, "ergodic decomposition of a code file")
    p.add_argument("--code", required=True)

    p = add("verify-ergodic", cmd_verify, "check the decomposition couplings are ergodic")
    p.add_argument("--code", required=True)
    p.add_argument("--omit-l", action="store_true", help="drop the couplings on L")

    p = add("percolate", cmd_percolate, "toric-code sink percolation versus closed form")
    p.add_argument("--L", type=_ints, required=True)
    p.add_argument("--p", type=_floats, required=True)
    p.add_argument("--c", type=_floats, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    table_opts(p)

    p = add("lemma3", cmd_lemma3, "span growth statistics in the staircase region")
    p.add_argument("--f", type=_ints, default=[1, 1], help="f(x) coefficients, lowest first")
    p.add_argument("--p", type=_floats, required=True)
    p.add_argument("--r", type=int, default=12)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scaling", action="store_true", help="emit the minimal-box table instead")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--fit-out", help="JSON file for the scaling fit")
    table_opts(p)

    p = add("gibbs-check", cmd_gibbs, "trace distance between Gibbs state and free ensemble")
    p.add_argument("--code", required=True)
    p.add_argument("--beta", type=_floats, required=True)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    table_opts(p)

    p = add("remover", cmd_remover, "find removers for X-generators of an imperfect code")
    p.add_argument("--code", required=True)
    p.add_argument("--remove-x", type=_ints, default=[], help="indices of removed X-generators")
    p.add_argument("--beta", type=float, help="sample the mask at this beta instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", type=int, help="one X-generator (default: all present)")
    p.add_argument("--r-box", type=float, required=True)

    p = add("free-energy", cmd_free_energy, "welded-code barrier bound on a grid")
    p.add_argument("--beta", type=_floats, required=True)
    p.add_argument("--L", type=_floats, required=True)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.5)
    table_opts(p)

    p = add("lmax", cmd_lmax, "optimal welded-code size per beta")
    p.add_argument("--beta", type=_floats, required=True)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--L-min", type=float, default=2.0)
    p.add_argument("--L-max", type=float, default=1e9)
    p.add_argument("--points", type=int, default=20001)
    p.add_argument("--fit-out", help="JSON file for the ln L_max versus beta fit")
    table_opts(p)

    p = add("kmc-sweep", cmd_kmc_sweep, "BKL memory-time sweep on the sparse lattice")
    p.add_argument("--L", type=_ints, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--beta-inv", type=_floats)
    g.add_argument("--beta", type=_floats)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--clock", choices=("mean", "exponential"), default="mean")
    p.add_argument("--max-steps", type=int, default=kmc.DEFAULT_MAX_STEPS)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default from env)")
    p.add_argument("--fit-out", help="JSON file for the double-exponential fit")
    p.add_argument("--plot-data", help="CSV file of per-beta (L, mean_tau, stderr) series")
    table_opts(p)

    p = add("fit", cmd_fit, "double-exponential fit of a kmc-sweep CSV")
    p.add_argument("--input", required=True)
    return ap


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error[input]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TimeoutResult as exc:
        print(f"error[timeout]: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (ValueError, ArithmeticError) as exc:
        print(f"error[contract]: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
