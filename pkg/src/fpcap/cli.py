"""Command-line front end.

Every command prints one result document (JSON by default, CSV with
``--format csv``).  Exit status is 0 on success, 1 for invalid input and 2 when
a computation is refused at run time (for example a joint decoder whose tuple
enumeration exceeds the budget).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import (
    ATTACKS,
    CapacityTableRow,
    capacity,
    capacity_table,
    maximize_over_p,
    odd_log_grid,
    payoff_fn,
    scaling_exponent,
)
from .channels import canonical_attack, load_channel, make_channel
from .core import RngStream
from .decode import (
    BayesianM,
    BudgetExceeded,
    InformedLLR,
    JointLLR,
    JointUniversal,
    OosterwijkH,
    UniversalG,
    bayesian_score,
    oosterwijk_score,
    scheme_params_joint,
    scheme_params_simple,
    simple_llr_table,
    universal_score,
)
from .encode import BiasModel, default_cutoff, save_code
from .sim import Scenario, estimate_error_rates, group_testing_plan, group_testing_scenario, trial_artifacts

SCHEMA_VERSION = "1.0"
SEED_ENV = "FPCAP_SEED"
DECODERS = ("informed", "universal", "oosterwijk", "bayesian", "joint-informed", "joint-universal")
TABLE_HEADER = ["attack", "mode", "side", "c", "capacity_bits", "optimal_p", "L", "scaled_constant"]


class CliError(Exception):
    """Invalid command-line input (exit status 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# --------------------------------------------------------------- formatting


def fmt_float(x):
    """12 significant digits; non-finite values become strings since JSON has no inf."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.12g}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    return obj


def _parse_count(text: str) -> int:
    """Positive integer; also accepts ``10^k`` and ``2^k`` for very large populations."""
    t = text.strip().replace("**", "^")
    try:
        if "^" in t:
            base, exp = t.split("^", 1)
            v = int(base) ** int(exp)
        else:
            v = int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _count_str(n: int) -> int | str:
    # huge populations are echoed as strings that parse back to the same int
    if n < 10**15:
        return n
    k = len(str(n)) - 1
    return f"10^{k}" if n == 10**k else str(n)


# ----------------------------------------------------------------- commands


def _channel(args):
    if getattr(args, "channel_file", None):
        theta = load_channel(args.channel_file)
        if args.c is not None and args.c != theta.c:
            raise ValueError(f"--c {args.c} disagrees with the channel file (c={theta.c})")
        return theta
    if args.c is None:
        raise ValueError("--c is required unless --channel-file is given")
    return make_channel(args.attack, args.c)


def _row_dict(row) -> dict:
    r = row.result
    return {
        "attack": row.attack,
        "mode": row.mode,
        "side": row.side,
        "c": row.c,
        "capacity_bits": r.capacity_bits if r else math.nan,
        "optimal_p": (r.optimal_p if r and r.optimal_p is not None else math.nan),
        "L": row.L,
        "scaled_constant": row.scaled_constant,
        "exponent": row.exponent,
        "normalized_L": row.normalized_L if r else math.nan,
        "reference_constant": row.reference if row.reference is not None else math.nan,
        "error": row.error,
    }


_TABLE_UNITS = {
    "capacity_bits": "bits per position",
    "optimal_p": "probability",
    "L": "positions per nat of n",
    "scaled_constant": "bits per position times c^exponent",
    "normalized_L": "L / c^exponent",
}


def cmd_capacity(args):
    theta = _channel(args)
    res = capacity(theta, args.mode, args.side, nodes=args.nodes)
    kind = theta.name if theta.name in ATTACKS else "custom"
    k = scaling_exponent(kind, args.side)
    row = CapacityTableRow(kind, args.mode, args.side, theta.c, res, k)
    d = _row_dict(row)
    d["degenerate"] = res.degenerate
    d["diagnostics"] = res.diagnostics
    d["units"] = dict(_TABLE_UNITS)
    return d, [d]


def cmd_table(args):
    attacks = [canonical_attack(a) for a in args.attacks.split(",")] if args.attacks else list(ATTACKS)
    modes = ["simple", "joint"] if args.mode == "both" else [args.mode]
    if args.curve:
        cs = odd_log_grid(args.cmin, args.cmax, args.points)
        exponent = 1.5 if args.exponent is None else args.exponent
    else:
        if args.c is None:
            raise ValueError("table needs --c, or --curve for a sweep over c")
        cs = [args.c]
        exponent = args.exponent
    rows = []
    for mode in modes:
        for c in cs:
            rows.extend(_row_dict(r) for r in capacity_table(attacks, c, mode, args.side, nodes=args.nodes, exponent=exponent))
    return {"rows": rows, "units": dict(_TABLE_UNITS)}, rows


def _resolve_p(args, theta, mode):
    """Numeric p, or None for arcsine biases. Returns (p, how it was chosen)."""
    if args.p != "auto":
        try:
            p = float(args.p)
        except ValueError:
            raise ValueError(f"--p must be a number or 'auto', got {args.p!r}") from None
        if not 0 < p < 1:
            raise ValueError(f"--p must lie in (0, 1), got {p}")
        return p, "given"
    if args.side == "partial":
        return None, "arcsine"
    res = maximize_over_p(payoff_fn(theta, mode), theta.c)
    if res.degenerate:
        raise ValueError("the channel carries no information at any bias")
    return res.optimal_p, "optimum"


def cmd_params(args):
    theta = _channel(args)
    p, how = _resolve_p(args, theta, args.mode)
    if args.mode == "simple":
        sp = scheme_params_simple(args.n, args.eps1, args.eps2, theta, p, nodes=args.nodes)
    else:
        sp = scheme_params_joint(args.n, theta.c, args.eps1, args.eps2, theta, p, nodes=args.nodes)
    d = {
        "gamma": sp.gamma,
        "eta": sp.eta,
        "ell": sp.ell,
        "ell_raw": sp.ell_raw,
        "m_at_point": sp.m_at_point,
        "p": p if p is not None else "arcsine",
        "p_choice": how,
        "units": {
            "gamma": "dimensionless",
            "eta": "nats",
            "ell": "positions",
            "ell_raw": "positions",
            "m_at_point": "dimensionless",
            "p": "probability",
        },
    }
    return d, None


def _scenario(args):
    theta = _channel(args)
    c, n = theta.c, args.n
    dec = args.decoder
    joint = dec.startswith("joint")
    mode = "joint" if joint else "simple"
    ln_ratio = (c if joint else 1) * math.log(n) - math.log(args.eps1)
    notes = {}
    if dec in ("informed", "joint-informed"):
        p, how = _resolve_p(args, theta, mode)
        notes["p_choice"] = how
        if joint:
            sp = scheme_params_joint(n, c, args.eps1, args.eps2, theta, p, nodes=args.nodes)
            model = JointLLR(theta)
        else:
            sp = scheme_params_simple(n, args.eps1, args.eps2, theta, p, nodes=args.nodes)
            model = InformedLLR(theta)
        eta, ell = sp.eta, sp.ell
        notes["gamma"] = sp.gamma
        bias = BiasModel.fixed(p) if p is not None else BiasModel.arcsine()
    else:
        if dec == "universal":
            model, scale = UniversalG(c), 1.0
        elif dec == "oosterwijk":
            model, scale = OosterwijkH(c), float(c)
        elif dec == "bayesian":
            model, scale = BayesianM(c, n), c / n
        else:
            model, scale = JointUniversal(c), 1.0
        eta = scale * ln_ratio
        ell = int(math.ceil(4 * c * c * math.log(n)))
        bias = BiasModel.arcsine_cutoff(args.delta or default_cutoff(c)) if dec == "oosterwijk" else BiasModel.arcsine()
    if args.bias == "arcsine":
        bias = BiasModel.arcsine()
    elif args.bias == "cutoff":
        bias = BiasModel.arcsine_cutoff(args.delta or default_cutoff(c))
    elif args.bias == "fixed":
        if args.p == "auto":
            raise ValueError("--bias fixed needs a numeric --p")
        bias = BiasModel.fixed(float(args.p))
    if args.eta is not None:
        eta = args.eta
    if args.ell is not None:
        ell = args.ell
    sc = Scenario(n=n, c=c, attack=theta, bias_model=bias, score_model=model, eta=eta, ell=ell, mode=mode)
    return sc, notes


def _scenario_echo(sc, decoder, notes):
    return {
        "n": sc.n,
        "c": sc.c,
        "attack": sc.attack.name,
        "decoder": decoder,
        "mode": sc.mode,
        "bias_model": sc.bias_model.describe(),
        "eta": sc.eta,
        "ell": sc.ell,
        **notes,
    }


def _estimate_payload(est, extra):
    d = {**extra, **est.summary()}
    d["units"] = {
        "fp_rate": "rate",
        "fn_rate": "rate",
        "fp_ci95": "rate",
        "fn_ci95": "rate",
        "eta": "nats",
        "ell": "positions",
        "mean_accused_guilty": "users",
    }
    return d


def _write_trial_csv(path, outcomes):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial_index", "fp", "fn", "accused_guilty_count"])
        for o in outcomes:
            w.writerow([o.trial_index, int(o.fp_occurred), int(o.fn_occurred), o.accused_guilty_count])


def cmd_simulate(args, master):
    sc, notes = _scenario(args)
    est = estimate_error_rates(sc, args.trials, master, threads=args.threads, keep_outcomes=bool(args.trial_csv))
    if args.trial_csv:
        _write_trial_csv(args.trial_csv, est.outcomes)
    if args.save_code:
        _, code, _ = trial_artifacts(sc, 0, master)
        save_code(code, args.save_code)
    return _estimate_payload(est, {"scenario": _scenario_echo(sc, args.decoder, notes)}), None


def cmd_grouptest(args, master):
    plan = group_testing_plan(args.n, args.c, args.eps1, args.eps2)
    d = {
        "n": _count_str(plan.n),
        "c": plan.c,
        "p": plan.p,
        "gamma": plan.params.gamma,
        "eta": plan.params.eta,
        "ell": plan.params.ell,
        "ratio": plan.ratio,
        "capacity_ratio": plan.capacity_ratio,
        "asymptote": 1.0 / math.log(2.0) ** 2,
        "info_bits": plan.info_bits,
    }
    if args.trials > 0:
        if plan.n > 10**7:
            raise ValueError(f"n = {d['n']} is too large to simulate; use --trials 0 for the plan only")
        est = estimate_error_rates(group_testing_scenario(plan), args.trials, master, threads=args.threads)
        d.update(est.summary())
    d["units"] = {
        "p": "probability",
        "eta": "nats",
        "ell": "tests",
        "ratio": "tests per defective per nat of n",
        "capacity_ratio": "dimensionless",
        "asymptote": "tests per defective per nat of n",
        "info_bits": "bits per test",
        "fp_rate": "rate",
        "fn_rate": "rate",
    }
    return d, None


def scan_scorefns(c: int, n: int, pmin: float, pmax: float, step: float) -> dict:
    """Compare c g and n m with h over a p grid, plus the exact score identities."""
    count = int(round((pmax - pmin) / step)) + 1
    p = np.linspace(pmin, pmax, count)
    if p[0] <= 0 or p[-1] >= 1:
        raise ValueError("the p grid must lie inside (0, 1)")
    worst_cg = worst_nm = worst_rel = worst_id = worst_llr = 0.0
    interleave = make_channel("interleaving", c)
    llr = simple_llr_table(interleave, p)
    direct = {
        (0, 0): np.log1p(p / (c * (1 - p))),
        (0, 1): np.full_like(p, math.log1p(-1.0 / c)),
        (1, 0): np.full_like(p, math.log1p(-1.0 / c)),
        (1, 1): np.log1p((1 - p) / (c * p)),
    }
    for x in (0, 1):
        for y in (0, 1):
            h = oosterwijk_score(x, y, p)
            g = universal_score(x, y, p, c)
            m = bayesian_score(x, y, p, n)
            worst_cg = max(worst_cg, float(np.max(np.abs(c * g - h))))
            worst_nm = max(worst_nm, float(np.max(np.abs(n * m - h))))
            worst_rel = max(worst_rel, float(np.max(np.abs(c * g - h) / np.abs(h))))
            worst_id = max(worst_id, float(np.max(np.abs(direct[x, y] - g))))
            worst_llr = max(worst_llr, float(np.max(np.abs(llr[:, x, y] - g))))
    return {
        "c": c,
        "n": n,
        "grid_points": count,
        "max_abs_cg_minus_h": worst_cg,
        "max_abs_nm_minus_h": worst_nm,
        "max_rel_dev_cg_from_h": worst_rel,
        "max_identity_error_g": worst_id,
        "max_llr_interleaving_minus_g": worst_llr,
        "units": {k: "nats" for k in ("max_abs_cg_minus_h", "max_abs_nm_minus_h", "max_identity_error_g", "max_llr_interleaving_minus_g")}
        | {"max_rel_dev_cg_from_h": "fraction"},
    }


def cmd_scan(args):
    if args.c < 2 or args.n < 2:
        raise ValueError("scan-scorefns needs c >= 2 and n >= 2")
    return scan_scorefns(args.c, args.n, args.pmin, args.pmax, args.step), None


# ------------------------------------------------------------------- parser


def _add_common(sp, *, seed=False):
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--out", help="write the result document here instead of stdout")
    if seed:
        sp.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")


def _add_channel(sp):
    sp.add_argument("--attack", default="interleaving", help="interleaving, all1, majority, minority, coinflip")
    sp.add_argument("--c", type=int, default=None, help="coalition size")
    sp.add_argument("--channel-file", help="custom channel: line 1 c, line 2 the c+1 probabilities")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fpcap", description="Fingerprinting capacities, decoders and simulations.")
    ap.add_argument("--version", action="version", version=f"fpcap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("capacity", help="capacity and length constant of one channel")
    _add_channel(sp)
    sp.add_argument("--mode", choices=("simple", "joint"), default="simple")
    sp.add_argument("--side", choices=("full", "partial"), default="full")
    sp.add_argument("--nodes", type=int, default=2000, help="quadrature nodes for --side partial")
    _add_common(sp)

    sp = sub.add_parser("table", help="capacity table over attacks, or a curve over c")
    sp.add_argument("--attacks", default=None, help="comma-separated attack list (default all five)")
    sp.add_argument("--c", type=int, default=None)
    sp.add_argument("--mode", choices=("simple", "joint", "both"), default="both")
    sp.add_argument("--side", choices=("full", "partial"), default="full")
    sp.add_argument("--nodes", type=int, default=2000)
    sp.add_argument("--curve", action="store_true", help="sweep log-spaced odd c from --cmin to --cmax")
    sp.add_argument("--cmin", type=int, default=10)
    sp.add_argument("--cmax", type=int, default=1000)
    sp.add_argument("--points", type=int, default=15)
    sp.add_argument("--exponent", type=float, default=None, help="common scaling power (curves default to 1.5)")
    _add_common(sp)

    sp = sub.add_parser("params", help="threshold and code length for target error rates")
    _add_channel(sp)
    sp.add_argument("--n", type=_parse_count, required=True)
    sp.add_argument("--eps1", type=float, required=True)
    sp.add_argument("--eps2", type=float, required=True)
    sp.add_argument("--p", default="auto", help="bias, or 'auto'")
    sp.add_argument("--mode", choices=("simple", "joint"), default="simple")
    sp.add_argument("--side", choices=("full", "partial"), default="full")
    sp.add_argument("--nodes", type=int, default=2000)
    _add_common(sp)

    sp = sub.add_parser("simulate", help="Monte Carlo error rates of a decoder against an attack")
    _add_channel(sp)
    sp.add_argument("--decoder", choices=DECODERS, default="informed")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--trials", type=int, default=500)
    sp.add_argument("--eps1", type=float, default=0.05)
    sp.add_argument("--eps2", type=float, default=0.5)
    sp.add_argument("--p", default="auto")
    sp.add_argument("--side", choices=("full", "partial"), default="full")
    sp.add_argument("--bias", choices=("auto", "fixed", "arcsine", "cutoff"), default="auto")
    sp.add_argument("--delta", type=float, default=None, help="cut-off (default 1/(720 c))")
    sp.add_argument("--eta", type=float, default=None, help="override the threshold")
    sp.add_argument("--ell", type=int, default=None, help="override the code length")
    sp.add_argument("--nodes", type=int, default=2000)
    sp.add_argument("--trial-csv", help="write per-trial outcomes here")
    sp.add_argument("--save-code", help="write trial 0's code in the binary code format")
    _add_common(sp, seed=True)

    sp = sub.add_parser("grouptest", help="noiseless group testing via the all-1 channel")
    sp.add_argument("--n", type=_parse_count, required=True)
    sp.add_argument("--c", type=int, required=True)
    sp.add_argument("--eps1", type=float, default=0.05)
    sp.add_argument("--eps2", type=float, default=0.5)
    sp.add_argument("--trials", type=int, default=500, help="0 computes the plan only")
    _add_common(sp, seed=True)

    sp = sub.add_parser("scan-scorefns", help="compare the score functions h, c g and n m")
    sp.add_argument("--c", type=int, required=True)
    sp.add_argument("--n", type=int, default=10**4)
    sp.add_argument("--pmin", type=float, default=0.1)
    sp.add_argument("--pmax", type=float, default=0.9)
    sp.add_argument("--step", type=float, default=0.01)
    _add_common(sp)
    return ap


_OUTPUT_KEYS = ("format", "out", "threads", "trial_csv", "save_code")


def resolve_seed(flag, environ=None) -> int:
    environ = os.environ if environ is None else environ
    if flag is not None:
        return int(flag)
    raw = environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def dispatch(args) -> tuple[dict, list | None]:
    """Run a parsed command; returns the envelope and optional CSV rows."""
    seed = resolve_seed(getattr(args, "seed", None)) if hasattr(args, "seed") else None
    if seed is not None:
        args.seed = seed
        if not 0 <= seed < 2**64:
            raise CliError("seed must be a 64-bit unsigned integer")
    if getattr(args, "c", None) is not None and args.c < 1:
        raise CliError("--c must be a positive integer")
    if getattr(args, "trials", None) is not None and args.trials < (0 if args.command == "grouptest" else 1):
        raise CliError("--trials must be positive")
    handlers = {
        "capacity": cmd_capacity,
        "table": cmd_table,
        "params": cmd_params,
        "scan-scorefns": cmd_scan,
    }
    if args.command in handlers:
        results, rows = handlers[args.command](args)
    elif args.command == "simulate":
        results, rows = cmd_simulate(args, RngStream(seed))
    else:
        results, rows = cmd_grouptest(args, RngStream(seed))
    inputs = {k: v for k, v in vars(args).items() if k not in _OUTPUT_KEYS}
    if isinstance(inputs.get("n"), int):
        inputs["n"] = _count_str(inputs["n"])
    envelope = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "inputs": inputs,
        "results": results,
        "master_seed": seed if seed is not None else 0,
        "artifact_version": __version__,
    }
    return _clean(envelope), rows


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            if k != "units":
                _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def render(envelope: dict, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(envelope, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows is not None:
        w.writerow(TABLE_HEADER)
        for r in _clean(rows):
            w.writerow([r[k] for k in TABLE_HEADER])
    else:
        units = envelope["results"].get("units", {})
        w.writerow(["field", "value", "unit"])
        flat = []
        _flatten("", envelope["results"], flat)
        for key, val in flat:
            w.writerow([key, val, units.get(key.split("[")[0], "")])
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        envelope, rows = dispatch(args)
        text = render(envelope, rows, args.format)
    except CliError as exc:
        print(f"fpcap: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"fpcap: error: {exc}", file=sys.stderr)
        return 1
    except BudgetExceeded as exc:
        print(f"fpcap: refused: {exc}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
