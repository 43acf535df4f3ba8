"""``stratqec`` command line.

Subcommands: ``gen``, ``estimate``, ``baseline``, ``fit`` and ``compare``.
Exit codes: 0 success, 2 configuration error, 3 budget exhausted (partial
results written), 4 I/O error, 5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import secrets
import sys
import time
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from scipy import stats as sps

from . import __version__
from .circuit import CircuitError, CodeSpec, UnsupportedDistance, generate_code, parse_circuit, \
    serialize_circuit
from .decoders import MwpmDecoder
from .pipeline import SCHEMA_VERSION, AdapSamConfig, BudgetExhausted, NoErrorsAnywhere, run_scaler
from .qepg import Qepg, compile_qepg
from .sampling import SamplerConfig, read_stats_csv, sample_baseline, write_histogram_csv, \
    write_stats_csv
from .scurve import InsufficientData, compute_w_sweet, eval_f, fit, parse_variant, y_closed_form, y_transform

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_IO, EXIT_INVARIANT = 0, 2, 3, 4, 5
THREADS_ENV = "STRATQEC_THREADS"
SWEEP_S = ("1/4", "1/3", "1/2", "1", "2")


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


# ---------------------------------------------------------------- helpers


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(outdir: Path, command: str, config: dict, seed: int | None,
                    inputs: list[str], started: float) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "inputs": {p: _digest(p) for p in inputs},
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "seconds": round(time.time() - started, 3),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = secrets.randbits(63)
        print(f"*** seed: {seed} (generated; pass --seed {seed} to reproduce) ***",
              file=sys.stderr)
    return seed


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


def _load_qepg(circuit_path: str, cache: str | None) -> Qepg:
    text = Path(circuit_path).read_text()
    circuit = parse_circuit(text)
    if cache is None:
        return compile_qepg(circuit)
    key = hashlib.sha256(serialize_circuit(circuit).encode()).hexdigest()[:32]
    path = Path(cache) / f"{key}.qepg"
    if path.exists():
        return Qepg.load(path)
    g = compile_qepg(circuit)
    path.parent.mkdir(parents=True, exist_ok=True)
    g.dump(path)
    return g


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def svg_plot(series: list[tuple[str, list[tuple[float, float]]]],
             curves: list[tuple[str, list[tuple[float, float]]]],
             title: str, xlabel: str, ylabel: str, width: int = 640, height: int = 420) -> str:
    """Static SVG: one ``<polyline class="model">`` per curve, one ``<g class="series">`` per data set."""
    pts = [p for _, s in series for p in s] + [p for _, c in curves for p in c]
    pts = [(x, y) for x, y in pts if math.isfinite(x) and math.isfinite(y)]
    if pts:
        xs, ys = zip(*pts)
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 60, 20, 30, 45

    def sx(x: float) -> float:
        return ml + (x - x0) / (x1 - x0) * (width - ml - mr)

    def sy(y: float) -> float:
        return height - mb - (y - y0) / (y1 - y0) * (height - mt - mb)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<title>{escape(title)}</title>',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
           f'<text x="{width / 2:.0f}" y="{height - 10}" text-anchor="middle" font-size="12">'
           f'{escape(xlabel)}</text>',
           f'<text x="14" y="{height / 2:.0f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 14 {height / 2:.0f})">{escape(ylabel)}</text>',
           f'<text x="{ml}" y="{height - mb + 15}" font-size="10">{x0:.4g}</text>',
           f'<text x="{width - mr}" y="{height - mb + 15}" font-size="10" text-anchor="end">'
           f'{x1:.4g}</text>',
           f'<text x="{ml - 4}" y="{height - mb}" font-size="10" text-anchor="end">{y0:.4g}</text>',
           f'<text x="{ml - 4}" y="{mt + 8}" font-size="10" text-anchor="end">{y1:.4g}</text>']
    for i, (name, c) in enumerate(curves):
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in c
                          if math.isfinite(x) and math.isfinite(y))
        out.append(f'<polyline class="model" data-name="{escape(name)}" fill="none" '
                   f'stroke="{palette[i % len(palette)]}" stroke-width="1.5" points="{coords}"/>')
    for i, (name, s) in enumerate(series):
        out.append(f'<g class="series" data-name="{escape(name)}" fill="black">')
        for x, y in s:
            if math.isfinite(x) and math.isfinite(y):
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3"/>')
        out.append("</g>")
    legend_y = mt
    for i, (name, _) in enumerate(curves):
        out.append(f'<text x="{width - mr - 5}" y="{legend_y + 12 * i}" font-size="10" '
                   f'text-anchor="end" fill="{palette[i % len(palette)]}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _curve_grid(lo: float, hi: float, n: int = 200) -> np.ndarray:
    return np.linspace(lo, hi, n)


# ---------------------------------------------------------------- commands


def cmd_gen(args: argparse.Namespace) -> int:
    rounds = args.rounds
    if rounds is None and args.family == "repetition":
        rounds = 1
    circuit = generate_code(CodeSpec(args.family, args.distance, rounds,
                                     full_readout=args.full_readout))
    text = serialize_circuit(circuit)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"locations: {circuit.num_locations}, detectors: {circuit.num_detectors}, "
          f"qubits: {len(circuit.used_qubits())}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    started = time.time()
    seed = _resolve_seed(args.seed)
    cfg = AdapSamConfig(s_max=args.s_max, n_le=args.n_le, gamma=args.gamma,
                        binary_search_shots=args.binary_search_shots,
                        max_seconds=args.max_seconds)
    if not 0 < args.p < 1:
        raise ConfigError("p must lie strictly between 0 and 1")
    g = _load_qepg(args.circuit, args.qepg_cache)
    threads = args.threads or _default_threads()
    report = run_scaler(g, args.distance, args.p, cfg, seed=seed, threads=threads)
    if report.recompute() != report.p_l_hat:
        raise InvariantViolation("estimate does not match its own fit and critical region")
    if report.total_shots != sum(s.num_samples for s in report.subspaces):
        raise InvariantViolation("shot accounting mismatch")
    out = _outdir(args.out)
    (out / "report.json").write_text(report.to_json() + "\n")
    write_stats_csv(out / "subspaces.csv", report.subspaces)
    m = report.fit.model
    top = max(report.w_sat, max(s.weight for s in report.subspaces))
    grid = _curve_grid(m.t + 1e-3, top)
    (out / "scurve.svg").write_text(svg_plot(
        [("subspaces", [(s.weight, s.p_hat) for s in report.subspaces if s.num_samples])],
        [(m.label, [(float(w), float(eval_f(m, w))) for w in grid])],
        "S-curve fit", "weight w", "logical error rate"))
    _write_manifest(out, "estimate", {**vars_clean(args), "seed": seed}, seed,
                    [args.circuit], started)
    print(f"p_l_hat: {report.p_l_hat:.6e}")
    print(f"w_err: {report.w_err}, w_sweet: {report.w_sweet}, w_sat: {report.w_sat}, "
          f"critical region: {list(report.critical_region)}")
    print(f"total shots: {report.total_shots}, stop: {report.stop_reason}")
    if report.budget_exhausted:
        print("budget exhausted before every subspace reached its error target; "
              "partial results written", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    started = time.time()
    seed = _resolve_seed(args.seed)
    if not 0 < args.p < 1:
        raise ConfigError("p must lie strictly between 0 and 1")
    max_errors = args.max_errors if args.max_errors > 0 else None
    if max_errors is None and args.max_shots is None and args.max_seconds is None:
        raise ConfigError("at least one stopping bound is required")
    g = _load_qepg(args.circuit, args.qepg_cache)
    dec = MwpmDecoder.from_qepg(g)
    threads = args.threads or _default_threads()
    res = sample_baseline(g, dec, args.p, SamplerConfig(seed=seed, p=args.p, threads=threads),
                          max_errors=max_errors, max_shots=args.max_shots,
                          max_seconds=args.max_seconds)
    out = _outdir(args.out)
    doc = {"schema_version": SCHEMA_VERSION, "kind": "baseline", "p": args.p, "seed": seed,
           "num_locations": g.num_locations, **res.to_dict()}
    (out / "baseline.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    write_histogram_csv(out / "histogram.csv", res)
    _write_manifest(out, "baseline", {**vars_clean(args), "seed": seed}, seed,
                    [args.circuit], started)
    print(f"p_hat: {res.p_hat:.6e} ({res.logical_errors} errors / {res.shots} shots), "
          f"stop: {res.stop_reason}")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    started = time.time()
    data = read_stats_csv(args.csv)
    variants = list(args.variant or [])
    if args.sweep:
        variants += [f"generalized:{s}" for s in SWEEP_S]
    if not variants:
        variants = ["ours"]
    out = _outdir(args.out)
    results = []
    for v in variants:
        name, s = parse_variant(v)
        res = fit(data, name, args.t, s=s, weighted=not args.unweighted)
        results.append(res)
        sweet = compute_w_sweet(res.model, args.gamma)
        doc = {"schema_version": SCHEMA_VERSION, "w_sweet": sweet, "gamma": args.gamma,
               **res.to_dict()}
        label = res.model.label.replace(":", "_").replace("/", "-")
        (out / f"fit_{label}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        m = res.model
        print(f"{m.label:>20}  mu={m.mu:.6g} alpha={m.alpha:.6g} beta={m.beta:.6g}  "
              f"R2_y={res.r_squared_y:.6f} R2_p={res.r_squared_p:.6f} w_sweet={sweet}"
              + (f"  flags={','.join(res.flags)}" if res.flags else ""))
    usable = [s for s in data if 0 < s.p_hat < 0.5 and s.weight > args.t]
    ws = [s.weight for s in usable]
    lo, hi = (args.t + 0.25, max(ws)) if ws else (args.t + 0.25, args.t + 2.0)
    grid = _curve_grid(lo, hi)
    curves = [(r.model.label, [(float(w), float(y_closed_form(r.model, w))) for w in grid])
              for r in results]
    (out / "ycurve.svg").write_text(svg_plot(
        [("data", [(s.weight, float(y_transform(s.p_hat))) for s in usable])], curves,
        "Y-curve fits", "weight w", "y = ln(1/(2f) - 1)"))
    _write_manifest(out, "fit", vars_clean(args), None, [args.csv], started)
    return EXIT_OK


def _rate_and_interval(doc: dict) -> tuple[float, tuple[float, float] | None]:
    if "p_l_hat" in doc:
        return float(doc["p_l_hat"]), None
    if "p_hat" in doc:
        n, k = int(doc["shots"]), int(doc["logical_errors"])
        lo = sps.beta.ppf(0.025, k, n - k + 1) if k > 0 else 0.0
        hi = sps.beta.ppf(0.975, k + 1, n - k) if k < n else 1.0
        return float(doc["p_hat"]), (float(lo), float(hi))
    raise KeyError("document has neither p_l_hat nor p_hat")


def cmd_compare(args: argparse.Namespace) -> int:
    docs = []
    for path in (args.a, args.b):
        docs.append(json.loads(Path(path).read_text()))
    try:
        (a, ia), (b, ib) = (_rate_and_interval(d) for d in docs)
    except KeyError as exc:
        raise ConfigError(f"missing field: {exc}") from None
    print(f"a: {a:.6e}" + (f"  95% CI [{ia[0]:.3e}, {ia[1]:.3e}]" if ia else ""))
    print(f"b: {b:.6e}" + (f"  95% CI [{ib[0]:.3e}, {ib[1]:.3e}]" if ib else ""))
    if b == 0:
        print("baseline saw no errors; no relative error defined")
        return EXIT_OK
    print(f"relative error (a-b)/b: {(a - b) / b * 100:+.1f}%")
    if ia and ib:
        overlap = ia[0] <= ib[1] and ib[0] <= ia[1]
        print(f"confidence intervals overlap: {'yes' if overlap else 'no'}")
    elif ib or ia:
        lo, hi = ib or ia
        inside = lo <= (a if ib else b) <= hi
        print(f"point estimate inside the other's 95% interval: {'yes' if inside else 'no'}")
    return EXIT_OK


def vars_clean(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stratqec",
                                 description="Stratified fault-injection estimates of logical "
                                             "error rates.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a repetition or rotated surface code circuit")
    p.add_argument("family", choices=["repetition", "surface"])
    p.add_argument("distance", type=int)
    p.add_argument("--rounds", type=int, default=None, help="stabilizer rounds (default: 1 for repetition, 3d for surface)")
    p.add_argument("--full-readout", action="store_true",
                   help="repetition code: read out every data qubit at the end")
    p.add_argument("-o", "--out", help="output circuit file (default stdout)")
    p.set_defaults(func=cmd_gen)

    def common_run(q: argparse.ArgumentParser) -> None:
        q.add_argument("circuit", help="circuit file")
        q.add_argument("-p", type=float, required=True, help="physical error rate")
        q.add_argument("--seed", type=int, default=None)
        q.add_argument("--threads", type=int, default=None,
                       help=f"sampling threads (default ${THREADS_ENV} or 1)")
        q.add_argument("--qepg-cache", default=None, help="directory for compiled QEPG files")
        q.add_argument("--max-seconds", type=float, default=None)
        q.add_argument("-o", "--out", required=True, help="output directory")

    p = sub.add_parser("estimate", help="adaptive stratified estimate")
    common_run(p)
    p.add_argument("-d", "--distance", type=int, required=True)
    p.add_argument("--s-max", type=int, default=500_000, help="total shot budget")
    p.add_argument("--n-le", type=int, default=30, help="logical errors per subspace")
    p.add_argument("--gamma", type=float, default=1.0, help="sweet-spot curvature threshold")
    p.add_argument("--binary-search-shots", type=int, default=1000)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("baseline", help="plain Monte Carlo at rate p")
    common_run(p)
    p.add_argument("--max-errors", type=int, default=100, help="0 disables the error bound")
    p.add_argument("--max-shots", type=int, default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("fit", help="fit S-curve variants to a saved subspace CSV")
    p.add_argument("csv")
    p.add_argument("--variant", action="append",
                   help="ours, ibm or generalized:<s>; repeatable")
    p.add_argument("--sweep", action="store_true",
                   help="add generalized variants for s in 1/4, 1/3, 1/2, 1, 2")
    p.add_argument("-t", type=int, required=True, help="(d-1)/2")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="relative error of report a against report b")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return args.func(args)
    except BudgetExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, UnsupportedDistance, CircuitError, InsufficientData,
            NoErrorsAnywhere, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
