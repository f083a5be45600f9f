"""``mimobc`` command-line interface.

Subcommands: ``offsets``, ``curve``, ``weighted``, ``queue``, ``verify``.
Tables go to CSV (stdout or ``--out``); every file written with ``--out``
gets a ``<out>.manifest.json`` next to it recording how to reproduce it.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels, offsets, rates
from .channel import SnrProfile, SystemDims
from .errors import DimensionError, DomainError, InvalidInputError, MimoBCError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3
SEED_ENV = "MIMOBC_SEED"

__all__ = ["Table", "RunManifest", "emit_csv", "format_value", "build_parser", "dispatch", "main"]


class UsageError(Exception):
    pass


@dataclass
class Table:
    header: list
    rows: list = field(default_factory=list)


@dataclass
class RunManifest:
    command: str
    params: dict
    seed: Optional[int]
    version: str = __version__
    backend: str = kernels.BACKEND
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=str) + "\n"


def format_value(v) -> str:
    """CSV cell text: floats with 12 significant digits, '.' decimal point."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".12g")
    return str(v)


def _sorted_rows(table: Table) -> list:
    if "snr_db" in table.header and "scheme" in table.header:
        i, j = table.header.index("snr_db"), table.header.index("scheme")
        return sorted(table.rows, key=lambda r: (float(r[i]), str(r[j])))
    return list(table.rows)


def emit_csv(table: Table, path: Optional[str], manifest: Optional[RunManifest] = None) -> str:
    """Write `table` as CSV to `path` (``None`` or ``"-"`` means stdout).

    Rows are sorted by ``(snr_db, scheme)`` when both columns exist. With a
    real path and a manifest, the manifest is written to
    ``<path>.manifest.json``. Returns the CSV text.
    """
    if not table.rows:
        raise DomainError("refusing to write an empty table")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for r in _sorted_rows(table):
        w.writerow([format_value(v) for v in r])
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
        return text
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if manifest is not None:
            with open(path + ".manifest.json", "w", encoding="utf-8") as fh:
                fh.write(manifest.to_json())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer")


def _add_dims(p, M=None, K=None, N=None):
    p.add_argument("--M", type=int, default=M, help="transmit antennas")
    p.add_argument("--K", type=int, default=K, help="users")
    p.add_argument("--N", type=int, default=N, help="receive antennas per user")


def _add_common(p):
    p.add_argument("--trials", type=int, default=None, help="channel realizations")
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mimobc", description=(
        "Throughput of the MIMO broadcast channel under dirty-paper coding, "
        "zero-forcing and block diagonalization: closed-form offsets, Monte "
        "Carlo curves, weighted sum rates and queue simulations."),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=("figure reproductions:\n"
                "  fig2  curve --figure fig2 (M=5,K=5; rerun with --M 10 for the second panel)\n"
                "  fig3  curve --figure fig3 (M=12,K=4,N=3: DPC, BD, ZF)\n"
                "  fig4  curve --figure fig4 (optimal-minus-uniform power gap, unequal SNR)\n"
                "  fig5  weighted --region 21 --M 4 --K 2 --N 1 (two-user rate region)\n"
                "  fig6  weighted --figure fig6 (exact vs proportional weighted sum rate)\n"
                "  fig7  queue --figure fig7 (average queue vs load)\n"
                "  fig8  weighted --figure fig8 (K > M heuristics)\n"
                f"\nexit codes: 0 ok, 1 usage, 2 verification failed, 3 runtime error\n"
                f"environment: {SEED_ENV} sets the default seed"))
    ap.add_argument("--version", action="version", version=f"mimobc {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("offsets", help="closed-form rate/power offsets")
    _add_dims(p, N=1)
    p.add_argument("--alpha", type=float, default=None,
                   help="antenna ratio M/(KN) for the large-system ZF power offset")
    p.add_argument("--weights", type=float, nargs="+", default=None,
                   help="descending weights for the weighted DPC-ZF offset (N=1)")
    p.add_argument("--out", default=None, help="also write the table as CSV")

    p = sub.add_parser("curve", help="ergodic sum-rate curves (fig2, fig3, fig4)",
                       description="Monte Carlo sum-rate curves. Presets: fig2 (M=K=5, DPC vs ZF), "
                                   "fig3 (M=12,K=4,N=3, DPC vs BD vs ZF), fig4 (optimal minus "
                                   "uniform power, gamma = -10,-3,0,3 dB).")
    p.add_argument("--figure", choices=("fig2", "fig3", "fig4"), default=None)
    _add_dims(p)
    p.add_argument("--snr-db", type=float, nargs="+", default=None, help="SNR grid in dB")
    p.add_argument("--schemes", nargs="+", default=None,
                   help="subset of DPC_exact DPC_uniform ZF_uniform ZF_waterfill BD_uniform BD_waterfill")
    p.add_argument("--gamma-db", type=float, nargs="+", default=None, help="per-user average SNR in dB")
    p.add_argument("--power-gap", action="store_true",
                   help="report optimal minus uniform power per scheme (fig4)")
    _add_common(p)

    p = sub.add_parser("weighted", help="weighted sum rates (fig5, fig6, fig8)",
                       description="Exact vs proportional-power weighted sum rate. Presets: fig6 "
                                   "(M=4,K=2, mu=0.6,0.4) and fig8 (M=2,K=3, mu=0.5,0.3,0.2). "
                                   "--region traces a two-user rate region (fig5).")
    p.add_argument("--figure", choices=("fig6", "fig8"), default=None)
    _add_dims(p)
    p.add_argument("--weights", type=float, nargs="+", default=None)
    p.add_argument("--snr-db", type=float, nargs="+", default=None)
    p.add_argument("--schemes", nargs="+", default=None,
                   help="WSR_exact WSR_proportional WSR_proportional_decoupled WSR_zf_proportional "
                        "WSR_bd_proportional WSR_all_users WSR_top_M")
    p.add_argument("--region", type=int, default=None, metavar="POINTS",
                   help="trace the K=2 region of one channel with this many weight points")
    _add_common(p)

    p = sub.add_parser("queue", help="max-weight queue simulation (fig7)",
                       description="Average total queue length vs normalized load for exact and "
                                   "proportional scheduling. Preset fig7: M=4, K=2, 10 dB.")
    p.add_argument("--figure", choices=("fig7",), default=None)
    _add_dims(p)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--loads", type=float, nargs="+", default=None,
                   help="sum arrival rate / ergodic sum capacity")
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--policies", nargs="+", default=None, choices=("exact", "proportional"))
    p.add_argument("--arrival-law", choices=("poisson", "deterministic"), default="poisson")
    p.add_argument("--capacity-trials", type=int, default=2000)
    p.add_argument("--trace-out", default=None,
                   help="write the per-slot trace of the first (load, policy) run here")
    _add_common(p)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="reduced trial counts")
    p.add_argument("--only", type=int, nargs="+", default=None, help="criterion numbers")
    return ap


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _require(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required option(s): {' '.join(missing)}")


def _dims(args) -> SystemDims:
    _require(args, "M", "K", "N")
    return SystemDims(args.M, args.K, args.N)


def _need_full(dims: SystemDims):
    if not dims.fully_loaded_or_under:
        raise UsageError(f"constraint M >= K*N violated: M={dims.M}, K*N={dims.KN}")


def _manifest(args, seed) -> RunManifest:
    params = {k: v for k, v in vars(args).items() if k not in ("out", "trace_out", "func")}
    return RunManifest(args.command, params, seed)


def cmd_offsets(args) -> int:
    dims = _dims(args)
    _need_full(dims)
    M, K, N = dims.M, dims.K, dims.N
    table = Table(["quantity", "M", "K", "N", "beta_bps_hz", "delta_db", "source"])
    lines = []

    def add(name, beta, delta):
        table.rows.append((name, M, K, N, beta, delta, "closed_form"))
        b = "" if beta is None or (isinstance(beta, float) and math.isnan(beta)) else f"beta={beta:.4f} bps/Hz  "
        lines.append(f"{name:<28s} {b}delta={delta:.4f} dB")

    zf = offsets.beta_dpc_zf(M, K, N)
    bd = offsets.beta_dpc_bd(M, K, N)
    bz = offsets.beta_bd_zf(M, K, N)
    add("DPC-ZF", zf.beta, zf.delta)
    add("DPC-BD", bd.beta, bd.delta)
    add("BD-ZF", bz.beta, bz.delta)
    if M == dims.KN and M >= 2:
        approx = offsets.beta_dpc_zf_bigM(M)
        add("DPC-ZF approx M*log2(M)", approx, 3.0 * approx / dims.KN)
    add(f"BD-ZF at M=KN, N={N}", float("nan"), offsets.delta_bd_zf_square(N))
    alpha = args.alpha if args.alpha is not None else M / dims.KN
    if alpha > 1:
        add(f"DPC-ZF KN->inf, alpha={alpha:g}", float("nan"), offsets.delta_dpc_zf_asymptotic(alpha))
    if args.weights is not None:
        if N != 1:
            raise UsageError("--weights needs --N 1")
        w = np.asarray(args.weights, dtype=float)
        if w.size != K:
            raise UsageError(f"--weights needs {K} values")
        w = w / w.sum()
        rep = offsets.weighted_beta_dpc_zf(w, M, K)
        add("weighted DPC-ZF", rep.beta, rep.delta)
    print(f"closed-form offsets for M={M}, K={K}, N={N}")
    for ln in lines:
        print("  " + ln)
    if args.out:
        emit_csv(table, args.out, _manifest(args, None))
    return EXIT_OK


CURVE_PRESETS = {
    "fig2": dict(M=5, K=5, N=1, snr=list(range(0, 41, 5)), schemes=["DPC_exact", "DPC_uniform", "ZF_uniform", "ZF_waterfill"]),
    "fig3": dict(M=12, K=4, N=3, snr=list(range(0, 41, 5)), schemes=["DPC_uniform", "BD_uniform", "ZF_uniform"]),
    "fig4": dict(M=4, K=4, N=1, snr=list(range(0, 41, 5)), schemes=["DPC", "ZF"], gamma_db=[-10.0, -3.0103, 0.0, 3.0103]),
}


def _fill(args, preset: dict, trials_default: int):
    for k in ("M", "K", "N"):
        if getattr(args, k) is None and k in preset:
            setattr(args, k, preset[k])
    if args.snr_db is None:
        args.snr_db = preset.get("snr")
    if args.schemes is None:
        args.schemes = preset.get("schemes")
    if getattr(args, "gamma_db", None) is None and "gamma_db" in preset:
        args.gamma_db = preset["gamma_db"]
    if args.trials is None:
        args.trials = trials_default
    if args.seed is None:
        args.seed = _default_seed()


def _profile(args, dims) -> SnrProfile:
    if getattr(args, "gamma_db", None) is None:
        return SnrProfile.symmetric(dims.K)
    if len(args.gamma_db) != dims.K:
        raise UsageError(f"--gamma-db needs {dims.K} values")
    return SnrProfile.from_db(args.gamma_db)


def cmd_curve(args) -> int:
    from .montecarlo import ExperimentSpec, run_power_convergence, run_rate_curve

    preset = CURVE_PRESETS.get(args.figure, {})
    if args.figure == "fig4":
        args.power_gap = True
    _fill(args, preset, 200)
    if args.snr_db is None:
        args.snr_db = list(range(0, 41, 5))
    dims = _dims(args)
    profile = _profile(args, dims)
    header = ["snr_db", "scheme", "mean_bps_hz", "stderr", "trials", "seed"]
    table = Table(header)
    if args.power_gap:
        _need_full(dims)
        schemes = args.schemes or ["DPC", "ZF"]
        rows = run_power_convergence(dims, profile, args.snr_db, args.trials, args.seed,
                                     schemes, workers=args.workers)
        for snr, sc, st in rows:
            table.rows.append((snr, f"{sc}_gap", st.mean, st.stderr, st.trials, args.seed))
    else:
        schemes = args.schemes or ["DPC_exact", "DPC_uniform", "ZF_uniform", "BD_uniform"]
        spec = ExperimentSpec(dims, tuple(args.snr_db), tuple(schemes), args.trials, args.seed, profile)
        curve = run_rate_curve(spec, workers=args.workers)
        table.rows.extend(curve.rows())
        for c in curve.cells:
            if c.error:
                print(f"warning: {c.scheme} at {c.snr_db:g} dB: {c.error}", file=sys.stderr)
                break
    emit_csv(table, args.out, _manifest(args, args.seed))
    return EXIT_OK


WEIGHTED_PRESETS = {
    "fig6": dict(M=4, K=2, N=1, weights=[0.6, 0.4], snr=list(range(0, 31, 5)),
                 schemes=["WSR_exact", "WSR_proportional", "WSR_zf_proportional"]),
    "fig8": dict(M=2, K=3, N=1, weights=[0.5, 0.3, 0.2], snr=list(range(0, 31, 5)),
                 schemes=["WSR_exact", "WSR_all_users", "WSR_top_M"]),
}


def cmd_weighted(args) -> int:
    from .montecarlo import ExperimentSpec, db_to_linear, run_rate_curve, trial_channel

    preset = WEIGHTED_PRESETS.get(args.figure, {})
    _fill(args, preset, 200)
    if args.weights is None:
        args.weights = preset.get("weights")
    dims = _dims(args)
    if args.region is not None:
        if dims.K != 2 or dims.N != 1:
            raise UsageError("--region needs K=2, N=1")
        if args.region < 2:
            raise UsageError("--region needs at least 2 points")
        snr = (args.snr_db or [10.0])[0]
        cs = trial_channel(dims, None, args.seed, 0)
        P = db_to_linear(snr)
        table = Table(["mu_1", "scheme", "rate_1", "rate_2", "snr_db", "seed"])
        for m in np.linspace(0.0, 1.0, args.region):
            mu = (float(m), float(1.0 - m))
            ex = rates.weighted_sum_rate_dpc_exact(cs, mu, P)
            pr = rates.proportional_user_rates(cs, mu, P)
            table.rows.append((mu[0], "exact", ex.user_rates[0], ex.user_rates[1], snr, args.seed))
            table.rows.append((mu[0], "proportional", pr[0], pr[1], snr, args.seed))
        emit_csv(table, args.out, _manifest(args, args.seed))
        return EXIT_OK
    if args.weights is None:
        raise UsageError("missing required option: --weights")
    if args.snr_db is None:
        args.snr_db = list(range(0, 31, 5))
    schemes = args.schemes or ["WSR_exact", "WSR_proportional"]
    spec = ExperimentSpec(dims, tuple(args.snr_db), tuple(schemes), args.trials, args.seed,
                          None, tuple(args.weights))
    curve = run_rate_curve(spec, workers=args.workers)
    table = Table(["snr_db", "scheme", "mean_bps_hz", "stderr", "trials", "seed"], curve.rows())
    emit_csv(table, args.out, _manifest(args, args.seed))
    return EXIT_OK


def cmd_queue(args) -> int:
    from . import queuesim

    if args.figure == "fig7":
        for k, v in dict(M=4, K=2, N=1).items():
            if getattr(args, k) is None:
                setattr(args, k, v)
        if args.snr_db is None:
            args.snr_db = 10.0
    if args.N is None:
        args.N = 1
    if args.seed is None:
        args.seed = _default_seed()
    if args.snr_db is None:
        args.snr_db = 10.0
    loads = args.loads or [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    slots = args.slots or 10000
    policies = args.policies or ["exact", "proportional"]
    dims = _dims(args)
    sweep = queuesim.run_load_sweep(dims, args.snr_db, loads, slots, args.seed, policies,
                                    args.arrival_law, args.capacity_trials, args.workers)
    cap = sweep["capacity"].mean
    table = Table(["load", "policy", "sum_arrival_rate", "avg_total_queue", "drift", "drift_slope",
                   "capacity_bps_hz", "slots", "seed"])
    for load, pol, avg, drift, slope in sweep["rows"]:
        table.rows.append((load, pol, load * cap, avg, drift, slope, cap, slots, args.seed))
    emit_csv(table, args.out, _manifest(args, args.seed))
    if args.trace_out:
        K = dims.K
        cfg = queuesim.QueueSimConfig(dims, args.snr_db, tuple([loads[0] * cap / K] * K),
                                      args.arrival_law, slots, policies[0], args.seed)
        res = queuesim.run_queue_sim(cfg)
        tr = Table(["slot"] + [f"q_{k + 1}" for k in range(K)] + [f"R_{k + 1}" for k in range(K)])
        for t in range(slots):
            tr.rows.append((t, *res.queue_trace[t], *res.rate_trace[t]))
        emit_csv(tr, args.trace_out, _manifest(args, args.seed))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import CRITERIA, run_criterion

    nums = args.only or sorted(CRITERIA)
    bad = [n for n in nums if n not in CRITERIA]
    if bad:
        raise UsageError(f"unknown criteria {bad}; choose from {sorted(CRITERIA)}")
    ok = True
    for n in nums:
        r = run_criterion(n, quick=args.quick)
        print(r.line(), flush=True)
        ok &= r.passed
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"offsets": cmd_offsets, "curve": cmd_curve, "weighted": cmd_weighted,
            "queue": cmd_queue, "verify": cmd_verify}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse `argv` and run the subcommand; returns the exit code."""
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0)
        if args.command is None:
            raise UsageError(parser.format_help())
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, DimensionError, InvalidInputError) as exc:
        print(f"mimobc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MimoBCError, OSError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"mimobc: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":  # pragma: no cover
    main()
