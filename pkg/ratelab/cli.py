"""CLI entry point for ratelab."""

import argparse
import json
import logging
import sys

import numpy as np

from .channels import ParameterSlice, channel_from_string, joint_distribution, stokes_to_choi
from .codes import (
    LinearCode,
    bsc_grid,
    decoding_error_rate,
    sample_pairs,
    syndrome_cost_comparison,
    two_way_ir,
    universal_correctness,
)
from .config import load_config
from .errors import BudgetExceededError, DomainError
from .finite_key import simulate_protocol
from .hashing import classical_secrecy_audit, iid_classical_joint, iid_key_state, secrecy_audit
from .oneway import RateQuery, compute_rate
from .sweeps import FAMILIES, FIGURES, FamilyGrid, Settings, SweepSpec, run_figure, run_sweep
from .tomography import (
    MODES,
    SampleSet,
    consistency_report,
    draw_samples,
    estimated_ambiguity,
    eta_hat,
    ml_estimate,
)
from .twoway import (
    BlockFunctions,
    comparison_rates,
    conventional_twoway,
    optimize_block_functions,
    rate_twoway,
)

logger = logging.getLogger(__name__)


def _choi(args, config):
    tol = config["tolerances"]["psd"]
    return stokes_to_choi(channel_from_string(args.channel, tol), tol)


def _emit(result: dict, args, render) -> None:
    if args.text:
        render(result)
    else:
        print(json.dumps(result, indent=2))


def _write_csv(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as f:
            f.write(text)
        logger.info("wrote %s", path)
    else:
        sys.stdout.write(text)


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, list):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _print_fields(title: str, rows: list[tuple[str, object]]) -> None:
    print(title)
    print(f"{'=' * 40}")
    for label, value in rows:
        print(f"{label + ':':<24}{_fmt(value)}")


# --- rate ---

def cmd_rate(args, config):
    choi = _choi(args, config)
    settings = Settings.from_config(config)
    functions = BlockFunctions.parse(args.functions) if args.functions else None

    if args.two_way:
        if args.optimize_functions:
            search = optimize_block_functions(choi, args.protocol, args.direction, config["threads"],
                                              settings.prescan, settings.xatol)
            result = search.result.to_dict()
            result["functions"] = search.functions.label
        elif args.estimation == "conventional":
            kind = "sixstate-gamma" if args.protocol == "sixstate" else "bb84-upsilon"
            result = conventional_twoway(ParameterSlice.of(kind, choi), settings.prescan, settings.xatol).to_dict()
        else:
            result = rate_twoway(choi, args.protocol, args.direction, functions, args.basis,
                                 settings.prescan, settings.xatol).to_dict()
        if args.compare:
            result["comparison"] = comparison_rates(choi, args.protocol, functions,
                                                    settings.prescan, settings.xatol).to_dict()
    else:
        query = RateQuery(choi, args.protocol, args.estimation, args.direction, args.basis,
                          noisy_preprocessing=args.noisy, optimize_flip=args.optimize_q)
        result = compute_rate(query, settings.grid_step, settings.prescan, settings.xatol).to_dict()

    def render(r):
        scheme = "two-way" if args.two_way else "one-way"
        rows = [
            ("Rate", r["rate"]),
            ("Raw", r["raw"]),
            ("Eve's ambiguity", r["eveAmbiguity"]),
            ("Reconciliation cost", r["cost"]),
        ]
        if "optimalQ" in r:
            rows.append(("Optimal q", r["optimalQ"]))
        if "branches" in r:
            rows.append(("Branches", ", ".join(_fmt(b) for b in r["branches"])))
        if "functions" in r:
            rows.append(("Block functions", r["functions"]))
        for key, value in r.get("comparison", {}).items():
            rows.append((key, value))
        _print_fields(f"Key rate ({scheme}) - {args.protocol} / {args.estimation} / {args.direction}", rows)

    _emit(result, args, render)


# --- sweep / figure ---

def cmd_sweep(args, config):
    grid = FamilyGrid(args.family, args.start, args.stop, args.steps, args.angle)
    spec = SweepSpec(grid, tuple(args.variant))
    table = run_sweep(spec, config["threads"], Settings.from_config(config))
    _write_csv(table.to_csv(), args.output)


def cmd_figure(args, config):
    points = args.points or config["figures"]["points"]
    table = run_figure(args.name, points, config["threads"], Settings.from_config(config))
    _write_csv(table.to_csv(), args.output)


# --- estimate ---

def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"cannot parse integer list {text!r}") from None


def cmd_estimate(args, config):
    protocol = MODES[args.mode][0]
    est = config["estimation"]

    if args.consistency:
        if not args.channel:
            raise DomainError("--consistency needs --channel")
        rows = consistency_report(_choi(args, config), args.mode, args.alpha, _parse_int_list(args.m_list),
                                  args.trials, args.seed, config["threads"])
        result = {"mode": args.mode, "alpha": args.alpha,
                  "rows": [{"m": r.m, "trials": r.trials, "failures": r.failures, "muHat": r.mu_hat}
                           for r in rows]}

        def render(r):
            print(f"Consistency - {r['mode']}, alpha = {r['alpha']}")
            print(f"{'=' * 40}")
            for row in r["rows"]:
                print(f"  m = {row['m']:<10} mu = {row['muHat']:.3f}  ({row['failures']}/{row['trials']})")

        _emit(result, args, render)
        return

    if args.samples:
        samples = SampleSet.from_csv(args.samples)
    elif args.channel:
        samples = draw_samples(_choi(args, config), protocol, args.m, args.seed)
    else:
        raise DomainError("estimate needs --samples or --channel")
    if args.save_samples:
        samples.to_csv(args.save_samples)

    report = ml_estimate(samples, args.mode, est["max_iterations"], est["step_tolerance"])
    result = report.to_dict()
    result["ambiguity"] = estimated_ambiguity(report, args.direction)
    if args.eta:
        result["eta"] = eta_hat(report, args.alpha, args.direction, directions=est["eta_directions"])

    def render(r):
        rows = [(key, value) for key, value in r["estimate"].items()]
        rows += [("Log-likelihood", r["logLikelihood"]), ("Converged", r["converged"]),
                 ("Iterations", r["iterations"]), ("Eve's ambiguity", r["ambiguity"])]
        if "eta" in r:
            rows.append(("eta", r["eta"]))
        _print_fields(f"ML estimate - {r['mode']} (m = {r['m']:g})", rows)

    _emit(result, args, render)


# --- simulate ---

def cmd_simulate(args, config):
    fk = config["finite_key"]
    settings = Settings.from_config(config)
    functions = BlockFunctions.parse(args.functions) if args.functions else None
    report = simulate_protocol(
        _choi(args, config), args.protocol, args.n, args.m, args.seed, args.direction,
        eps=args.eps or fk["epsilon"], alpha=args.alpha or fk["alpha"],
        ir_margin=fk["ir_margin"] if args.margin is None else args.margin,
        desk_block=args.desk_block or fk["desk_block"],
        two_way=args.two_way, functions=functions, prescan=settings.prescan, xatol=settings.xatol,
    )
    result = report.to_dict()

    def render(r):
        key = r["finiteKey"]
        desk = r["desk"]
        _print_fields(f"Simulation ({r['scheme']}) - {args.protocol} / {args.direction}", [
            ("Estimated ambiguity", r["hHat"]),
            ("eta", r["eta"]),
            ("Estimated cost", r["cost"]),
            ("Syndrome rate", r["syndromeRate"]),
            ("nu", key["nu"]),
            ("Key length", key["length"]),
            ("Abort", key["abort"]),
            ("Desk block", desk["block"]),
            ("Desk keys agree", desk["keysAgree"]),
        ])
        for note in r["notes"]:
            print(f"  note: {note}")

    _emit(result, args, render)


# --- audit ---

def cmd_audit_pa(args, config):
    audit = config["audit"]
    if args.eve == "classical":
        q = args.flip
        single = np.array([[1 - q, q], [q, 1 - q]]) / 2
        res = classical_secrecy_audit(iid_classical_joint(single, args.bits), args.ell,
                                      audit["max_exhaustive_seeds"], audit["subsample_seeds"])
    else:
        state = iid_key_state(_choi(args, config), args.bits, args.direction, args.basis)
        res = secrecy_audit(state, args.ell, audit["max_exhaustive_seeds"], audit["subsample_seeds"])
    result = res.to_dict()
    result.update({"bits": args.bits, "ell": args.ell, "eve": args.eve})

    def render(r):
        _print_fields(f"Privacy amplification audit - {r['eve']} Eve, n = {r['bits']}, ell = {r['ell']}", [
            ("Min-entropy", r["minEntropy"]),
            ("Distance", r["distance"]),
            ("Bound", r["bound"]),
            ("Seeds", r["seeds"]),
            ("Exhaustive", r["exhaustive"]),
            ("Holds", r["holds"]),
        ])

    _emit(result, args, render)


def cmd_audit_ir(args, config):
    choi = _choi(args, config)
    joint = joint_distribution(choi, "z", "z")
    rng = np.random.default_rng(args.seed)
    conditional, error_entropy = syndrome_cost_comparison(joint)
    result = {"hXgivenY": conditional, "hError": error_entropy, "trials": args.trials}

    if args.two_way:
        functions = BlockFunctions.parse(args.functions) if args.functions else BlockFunctions.advantage_distillation()
        codes = tuple(LinearCode.random(args.n, k, rng, min_distance=d)
                      for k, d in ((args.k1, args.d1), (args.ka2, args.d2), (args.kb2, 1)))
        successes = 0
        for _ in range(args.trials):
            x, y = sample_pairs(joint, 2 * args.n, rng)
            successes += two_way_ir(x, y, codes, functions).success
        result.update({"scheme": "two-way", "blocks": args.n, "successRate": successes / args.trials})
    else:
        code = LinearCode.load(args.code) if args.code else LinearCode.random(args.n, args.k, rng)
        result.update({"scheme": "one-way", "n": code.n, "k": code.k})
        if args.universal:
            flip = float(joint[0, 1] + joint[1, 0])
            report = universal_correctness(code, bsc_grid(flip, args.radius, args.grid), args.trials, rng, args.delta)
            result.update({"errorRates": list(report.error_rates), "worst": report.worst, "passed": report.passed})
        else:
            result["errorRate"] = decoding_error_rate(code, joint, args.trials, rng)

    def render(r):
        rows = [(key, value) for key, value in r.items() if not isinstance(value, list)]
        _print_fields("Reconciliation audit", rows)

    _emit(result, args, render)


def cmd_serve(args, config):
    from .server import run_server
    config["server_port"] = args.port or config.get("server_port", 19898)
    run_server(config, args.workers)


# --- parser ---

def _add_common(sub):
    sub.add_argument("--text", action="store_true", help="Human-readable report instead of JSON")


def _add_channel(sub, required=True, default=None):
    sub.add_argument("--channel", required=required, default=default,
                     help="Channel, e.g. amplitude_damping:0.2, pauli:0.85,0.05,0.05,0.05 or raw:@file.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratelab", description="QKD key rates, channel estimation and desk-scale postprocessing")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    parser.add_argument("--config", help="Path to a config JSON file")

    subparsers = parser.add_subparsers(dest="command")

    # rate
    sub = subparsers.add_parser("rate", help="Asymptotic key rate of a channel")
    _add_channel(sub)
    sub.add_argument("--protocol", choices=["bb84", "sixstate"], default="sixstate")
    sub.add_argument("--estimation", choices=["proposed", "conventional"], default="proposed")
    sub.add_argument("--direction", choices=["direct", "reverse"], default="direct")
    sub.add_argument("--basis", choices=["z", "x", "y"], default="z", help="Key basis (default: z)")
    sub.add_argument("--noisy", type=float, help="Fixed noisy-preprocessing flip probability")
    sub.add_argument("--optimize-q", action="store_true", help="Optimise the flip probability")
    sub.add_argument("--two-way", action="store_true", help="Two-way postprocessing on blocks of two")
    sub.add_argument("--functions", help="Block functions chiA/chiB, e.g. 0110/1111")
    sub.add_argument("--optimize-functions", action="store_true", help="Search all 256 block-function pairs")
    sub.add_argument("--compare", action="store_true", help="Add advantage distillation, Gohari and Vollbrecht")
    _add_common(sub)

    # sweep
    sub = subparsers.add_parser("sweep", help="Rates over a channel-family parameter range (CSV)")
    sub.add_argument("--family", choices=sorted(FAMILIES), required=True)
    sub.add_argument("--start", type=float, required=True)
    sub.add_argument("--stop", type=float, required=True)
    sub.add_argument("--steps", type=int, default=11)
    sub.add_argument("--angle", type=float, default=0.7853981633974483, help="Rotation angle for rotated_depolarizing")
    sub.add_argument("--variant", action="append", required=True,
                     help="[twoway-]protocol[:estimation[:direction[:basis]]][@chiA/chiB][+noisy]; repeatable")
    sub.add_argument("--output", help="CSV path (default: stdout)")

    # figure
    sub = subparsers.add_parser("figure", help="Reproduce a stock figure's curves (CSV)")
    sub.add_argument("name", choices=sorted(FIGURES))
    sub.add_argument("--points", type=int, help="Grid size (default from config)")
    sub.add_argument("--output", help="CSV path (default: stdout)")

    # estimate
    sub = subparsers.add_parser("estimate", help="Maximum-likelihood channel estimation")
    _add_channel(sub, required=False)
    sub.add_argument("--mode", choices=sorted(MODES), default="full-sixstate")
    sub.add_argument("--samples", help="Sample CSV (x,basisA,y,basisB,count)")
    sub.add_argument("--save-samples", help="Write the drawn samples to this CSV")
    sub.add_argument("-m", type=int, default=100000, help="Samples to draw (default: 100000)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--direction", choices=["direct", "reverse"], default="direct")
    sub.add_argument("--eta", action="store_true", help="Also report the continuity modulus at --alpha")
    sub.add_argument("--alpha", type=float, default=0.05)
    sub.add_argument("--consistency", action="store_true", help="Run the consistency table instead")
    sub.add_argument("--m-list", default="1000,10000,100000")
    sub.add_argument("--trials", type=int, default=20)
    _add_common(sub)

    # simulate
    sub = subparsers.add_parser("simulate", help="End-to-end protocol run with finite-key output")
    _add_channel(sub)
    sub.add_argument("--protocol", choices=["bb84", "sixstate"], default="sixstate")
    sub.add_argument("--direction", choices=["direct", "reverse"], default="direct")
    sub.add_argument("-n", type=int, default=1000000, help="Key-generation block length")
    sub.add_argument("-m", type=int, default=100000, help="Estimation sample count")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--eps", type=float)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--margin", type=float, help="Syndrome rate above the estimated cost")
    sub.add_argument("--desk-block", type=int)
    sub.add_argument("--two-way", action="store_true", help="Two-way postprocessing on blocks of two channel uses")
    sub.add_argument("--functions", help="Block functions chiA/chiB for --two-way, e.g. 0110/1111")
    _add_common(sub)

    # audit
    sub = subparsers.add_parser("audit", help="Privacy-amplification and reconciliation property runs")
    audits = sub.add_subparsers(dest="audit_command")

    pa = audits.add_parser("pa", help="Leftover-hash audit over the Toeplitz family")
    pa.add_argument("--bits", type=int, default=4)
    pa.add_argument("--ell", type=int, default=1)
    pa.add_argument("--eve", choices=["classical", "quantum"], default="classical")
    pa.add_argument("--flip", type=float, default=0.1, help="Classical Eve: probability her copy is wrong")
    _add_channel(pa, required=False, default="amplitude_damping:0.2")
    pa.add_argument("--direction", choices=["direct", "reverse"], default="direct")
    pa.add_argument("--basis", choices=["z", "x", "y"], default="z")
    _add_common(pa)

    ir = audits.add_parser("ir", help="Minimum-entropy decoding error rates")
    _add_channel(ir, required=False, default="depolarizing:0.05")
    ir.add_argument("-n", type=int, default=20)
    ir.add_argument("-k", type=int, default=12)
    ir.add_argument("--code", help="Parity-check matrix file ('n k' then k rows)")
    ir.add_argument("--trials", type=int, default=500)
    ir.add_argument("--seed", type=int, default=0)
    ir.add_argument("--universal", action="store_true", help="Error rates over a grid of flip probabilities")
    ir.add_argument("--radius", type=float, default=0.02)
    ir.add_argument("--grid", type=int, default=5)
    ir.add_argument("--delta", type=float, default=0.05)
    ir.add_argument("--two-way", action="store_true")
    ir.add_argument("--functions")
    ir.add_argument("--k1", type=int, default=10)
    ir.add_argument("--d1", type=int, default=5, help="Minimum distance of the first code")
    ir.add_argument("--ka2", type=int, default=9)
    ir.add_argument("--d2", type=int, default=4, help="Minimum distance of Alice's second code")
    ir.add_argument("--kb2", type=int, default=0)
    _add_common(ir)

    # serve
    sub = subparsers.add_parser("serve", help="Start HTTP API server")
    sub.add_argument("--port", type=int, help="Port number (default: 19898)")
    sub.add_argument("--workers", type=int, help="Serve under gunicorn with this many worker processes")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        config = load_config(args.config)
        if args.command == "rate":
            cmd_rate(args, config)
        elif args.command == "sweep":
            cmd_sweep(args, config)
        elif args.command == "figure":
            cmd_figure(args, config)
        elif args.command == "estimate":
            cmd_estimate(args, config)
        elif args.command == "simulate":
            cmd_simulate(args, config)
        elif args.command == "audit" and args.audit_command == "pa":
            cmd_audit_pa(args, config)
        elif args.command == "audit" and args.audit_command == "ir":
            cmd_audit_ir(args, config)
        elif args.command == "serve":
            cmd_serve(args, config)
        else:
            parser.print_help()
            return 1
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
