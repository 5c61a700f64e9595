"""Command-line entry point.

Subcommands: ``gen`` (write a random instance), ``solve`` (certified solve
of a matrix file), ``oracle-compare`` (solver vs brute force), ``bounds``
(closed-form bound evaluation), ``mc`` (Monte Carlo estimators),
``verify-tail`` (convolution tail fit), ``report`` (support-size campaign
from a config file).

Every stochastic subcommand takes one ``--seed``; all streams derive from
it, so identical argv reproduces identical primary outputs byte for byte.
Exit codes: 0 success, 1 domain/usage error, 2 numerical failure or
verification mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as bd
from . import experiments as xp
from . import rng as rng_mod
from .distributions import DistributionSpec, spec_to_dict
from .errors import NumericalFailureError, StqpError
from .instance import Model, generate, read_instance, write_instance
from .solver import brute_force_oracle, solve_global

_MODELS = {"sym": Model.SYMMETRIC_IID, "symmetric_iid": Model.SYMMETRIC_IID,
           "wigner": Model.WIGNER_AVERAGE, "wigner_average": Model.WIGNER_AVERAGE}


def parse_dist(name: str) -> DistributionSpec:
    """Parse a distribution flag.

    Plain names: uniform, exponential, normal, laplace, cosh.
    Parametric: ``power:NU[:RHO]`` and ``tail:A:B[:C[:R]]``.
    """
    key = name.strip().lower()
    plain = {
        "uniform": DistributionSpec.uniform01,
        "uniform01": DistributionSpec.uniform01,
        "exp": DistributionSpec.exponential,
        "exponential": DistributionSpec.exponential,
        "normal": DistributionSpec.normal,
        "laplace": DistributionSpec.two_sided_exponential,
        "two_sided_exponential": DistributionSpec.two_sided_exponential,
        "cosh": DistributionSpec.cosh,
    }
    if key in plain:
        return plain[key]()
    if key.startswith("power:"):
        parts = key.split(":")[1:]
        nu = float(parts[0])
        rho = float(parts[1]) if len(parts) > 1 else 1.0
        return DistributionSpec.left_bounded_power(nu, rho)
    if key.startswith("tail:"):
        parts = [float(p) for p in key.split(":")[1:]]
        a, b = parts[0], parts[1]
        c = parts[2] if len(parts) > 2 else 0.25
        r = parts[3] if len(parts) > 3 else 1.0
        return DistributionSpec.exp_tail(a=a, b=b, c=c, r=r)
    raise argparse.ArgumentTypeError(f"unknown distribution {name!r}")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stqp",
                                description="random simplex-constrained quadratic programs: "
                                            "generation, certified solving, tail bounds")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--model", choices=sorted(_MODELS), default="sym")
    g.add_argument("--dist", type=parse_dist, required=True,
                   help="entry law (both diagonal and off-diagonal unless overridden)")
    g.add_argument("--diag", type=parse_dist, help="diagonal law override")
    g.add_argument("--offdiag", type=parse_dist, help="off-diagonal law override")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve a matrix file to certified optimality")
    s.add_argument("--in", dest="path", required=True)
    s.add_argument("--kmax", type=int, default=None,
                   help="support-size cap; omit for the unrestricted search (n <= 25)")
    s.add_argument("--json", dest="json_out", help="write the solution as JSON")

    oc = sub.add_parser("oracle-compare", help="cross-check solver against brute force")
    oc.add_argument("--n", type=int, required=True)
    oc.add_argument("--reps", type=int, required=True)
    oc.add_argument("--dist", type=parse_dist, required=True)
    oc.add_argument("--model", choices=sorted(_MODELS), default="sym")
    oc.add_argument("--seed", type=int, required=True)

    b = sub.add_parser("bounds", help="evaluate closed-form bound formulas")
    b.add_argument("--formula", required=True,
                   choices=["s_nk", "s_nk_tail", "gamma_alpha", "pairwise_dominance",
                            "delta_n", "c_nu", "sigma_ab", "support_tail",
                            "polylog_support", "conv_tail", "euler_moments",
                            "gamma_weights"])
    b.add_argument("--n", type=int)
    b.add_argument("--k", type=int)
    b.add_argument("--alpha", type=float, default=4.0)
    b.add_argument("--nu", type=float)
    b.add_argument("--a", type=float)
    b.add_argument("--b", type=float)
    b.add_argument("--d", type=float)
    b.add_argument("--gamma", type=float, default=1.0)
    b.add_argument("--denom-c", type=float, default=2.0)
    b.add_argument("--params", help="JSON file with tail params {a, b, ...}")
    b.add_argument("--csv", help="write rows as CSV")

    m = sub.add_parser("mc", help="Monte Carlo estimators")
    m.add_argument("--estimator", required=True,
                   choices=["key", "pairwise", "sconc", "rhohat"])
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--k", type=int)
    m.add_argument("--dist", type=parse_dist)
    m.add_argument("--gdist", type=parse_dist)
    m.add_argument("--fdist", type=parse_dist)
    m.add_argument("--alpha", type=float)
    m.add_argument("--beta", type=float)
    m.add_argument("--reps", type=int, required=True)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--csv")

    v = sub.add_parser("verify-tail", help="convolution tail fit for the half-sum model")
    v.add_argument("--a", type=float, required=True)
    v.add_argument("--b", type=float, required=True)
    v.add_argument("--c", type=float, default=0.25)
    v.add_argument("--xmin", type=float, default=-8.0)
    v.add_argument("--xmax", type=float, default=-4.0)
    v.add_argument("--points", type=int, default=17)
    v.add_argument("--ratio", action="store_true",
                   help="also tabulate the entry/convolution tail ratio")
    v.add_argument("--csv")

    r = sub.add_parser("report", help="support-size campaign from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", default="campaign_out")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--svg", action="store_true")
    return p


def _cmd_gen(args) -> int:
    model = _MODELS[args.model]
    if model is Model.SYMMETRIC_IID:
        inst = generate(model, args.n, args.seed,
                        diag_spec=args.diag or args.dist,
                        offdiag_spec=args.offdiag or args.dist)
    else:
        inst = generate(model, args.n, args.seed, entry_spec=args.dist)
    write_instance(inst, args.out)
    print(f"wrote {args.out} (n={args.n}, model={model.value})")
    return 0


def _cmd_solve(args) -> int:
    inst = read_instance(args.path)
    sol = solve_global(inst, k_max=args.kmax)
    payload = sol.to_dict()
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(payload, indent=2) + "\n")
    print(json.dumps({"support": payload["support"],
                      "lambda_star": payload["lambda_star"],
                      "certificate": payload["certificate"]}))
    return 0


def _cmd_oracle_compare(args) -> int:
    model = _MODELS[args.model]
    mismatches = 0
    for rep in range(args.reps):
        seed_i = rng_mod.substream_seed(args.seed, args.n, rep)
        if model is Model.SYMMETRIC_IID:
            inst = generate(model, args.n, seed_i, diag_spec=args.dist,
                            offdiag_spec=args.dist)
        else:
            inst = generate(model, args.n, seed_i, entry_spec=args.dist)
        fast = solve_global(inst)
        slow = brute_force_oracle(inst)
        if fast.support != slow.support or abs(fast.lambda_star - slow.lambda_star) > 1e-9:
            mismatches += 1
            print(f"rep {rep}: solver {fast.support} {fast.lambda_star:.12g} "
                  f"!= oracle {slow.support} {slow.lambda_star:.12g}", file=sys.stderr)
    print(f"{args.reps - mismatches}/{args.reps} agree")
    return 0 if mismatches == 0 else 2


def _load_tail_params(args):
    if args.params:
        data = json.loads(Path(args.params).read_text())
        return data.get("a", args.a), data.get("b", args.b)
    return args.a, args.b


def _cmd_bounds(args) -> int:
    rep = bd.BoundReport(metadata={"formula": args.formula})
    f = args.formula
    need = lambda v, name: v if v is not None else _usage(f"--{name} is required for {f}")
    if f == "s_nk":
        lv = bd.s_nk(need(args.n, "n"), need(args.k, "k"))
        rep.add("s_nk", math.exp(lv), n=args.n, k=args.k)
    elif f == "s_nk_tail":
        k_from = args.k if args.k is not None else int(math.ceil(args.alpha * math.sqrt(args.n)))
        rep.add("s_nk_tail", bd.s_nk_tail(need(args.n, "n"), k_from), n=args.n, k=k_from)
    elif f == "gamma_alpha":
        rep.rows.append(bd.BoundRow("gamma_alpha", None, None,
                                    bd.gamma_alpha(args.alpha), math.nan))
    elif f == "pairwise_dominance":
        lv = bd.pairwise_dominance_bound(need(args.n, "n"))
        rep.add("pairwise_dominance", math.exp(lv), n=args.n)
    elif f == "delta_n":
        kn = args.k if args.k is not None else int(math.ceil(args.alpha * math.sqrt(args.n)))
        dt = bd.delta_n(need(args.n, "n"), kn)
        rep.add("delta_n", dt.value, n=args.n, k=kn)
        rep.metadata["clamped"] = dt.clamped
    elif f == "c_nu":
        rep.add("c_nu", bd.c_nu(need(args.nu, "nu")))
        rep.metadata["series"] = bd.c_nu(args.nu, method="series")
    elif f == "sigma_ab":
        a, b = _load_tail_params(args)
        rep.add("sigma_ab", bd.sigma_ab(need(a, "a"), need(b, "b")))
    elif f == "support_tail":
        a, b = _load_tail_params(args)
        tb = bd.support_tail_bound(need(args.n, "n"), need(args.k, "k"),
                                   need(a, "a"), need(b, "b"), args.denom_c)
        rep.rows.append(bd.BoundRow("support_tail", args.n, args.k, tb.value, tb.log_value))
    elif f == "polylog_support":
        pb = bd.polylog_support_bound(need(args.n, "n"), need(args.d, "d"))
        rep.add("polylog_support", pb.value, n=args.n)
        rep.metadata["threshold"] = pb.threshold
    elif f == "conv_tail":
        a, b = _load_tail_params(args)
        ct = bd.convolved_tail_params(need(a, "a"), need(b, "b"))
        rep.rows.append(bd.BoundRow("conv_tail_a_prime", None, None, ct.a_prime, math.nan))
        rep.rows.append(bd.BoundRow("conv_tail_r_prime", None, None, ct.r_prime, math.nan))
    elif f == "euler_moments":
        m1, m2 = bd.euler_gamma_moments()
        rep.rows.append(bd.BoundRow("euler_m1", None, None, m1, math.nan))
        rep.add("euler_m2", m2)
    elif f == "gamma_weights":
        w = bd.gamma_weights(need(args.k, "k"), need(args.nu, "nu"), args.gamma)
        for j, wj in enumerate(w, start=1):
            rep.add("gamma_weight", wj, k=j)
    _emit(rep, args.csv)
    return 0


def _cmd_mc(args) -> int:
    rep = bd.BoundReport(metadata={"estimator": args.estimator, "seed": args.seed})
    if args.estimator == "key":
        g = args.gdist or args.dist or _usage("--gdist (or --dist) required")
        fdist = args.fdist or args.dist or g
        est = bd.mc_key_expectation(g, fdist, args.n, args.k, args.reps, args.seed)
        rep.add("mc_key", est.value, n=args.n, k=args.k, se=est.se,
                reps=est.reps, seed=est.seed)
    elif args.estimator == "pairwise":
        est = xp.run_pairwise_dominance_frequency(
            args.n, args.dist or _usage("--dist required"), args.reps, args.seed)
        rep.add("mc_pairwise", est.value, n=args.n, se=est.se,
                reps=est.reps, seed=est.seed)
        rep.metadata["bound"] = math.exp(bd.pairwise_dominance_bound(args.n))
    elif args.estimator == "sconc":
        if args.alpha is None or args.beta is None:
            _usage("--alpha and --beta required for sconc")
        res = xp.run_s_concentration(args.n, args.k, args.alpha, args.beta,
                                     args.reps, args.seed)
        rep.rows.append(bd.BoundRow("sconc_freq", args.n, args.k, res.frequency,
                                    math.log(res.frequency) if res.frequency > 0 else -math.inf,
                                    se=res.se, reps=res.reps, seed=res.seed))
        rep.add("sconc_bound", res.bound, n=args.n, k=args.k)
        rep.metadata["threshold"] = res.threshold
    else:  # rhohat
        g = args.gdist or args.dist or _usage("--gdist (or --dist) required")
        fdist = args.fdist or args.dist or g
        est = bd.mc_rho_hat(g, fdist, args.n, args.k, args.reps, args.seed)
        rep.add("mc_rho_hat", max(est.value, 1e-300), n=args.n, k=args.k,
                se=est.se, reps=est.reps, seed=est.seed)
    _emit(rep, args.csv)
    return 0


def _cmd_verify_tail(args) -> int:
    from .distributions import TailParams

    tail = TailParams(a=args.a, b=args.b, c=args.c)
    grid = np.linspace(args.xmin, args.xmax, args.points)
    fit = xp.verify_convolution_tail(tail, grid)
    print(f"a_fit={fit.a_fit:+.4f} (target {fit.a_target:+.4f})  "
          f"r_fit={fit.r_fit:.5f} (target {fit.r_target:.5f})  "
          f"max_residual={fit.max_residual:.2e}")
    lines = ["x,log_f"]
    lines += [f"{x:.6g},{lf:.10g}" for x, lf in zip(fit.x, fit.log_f)]
    if args.ratio:
        table = xp.verify_tail_ratio_divergence(tail, grid)
        print(f"ratio increasing toward -inf: {table.increasing_towards_minus_inf}  "
              f"slope_fit={table.slope_fit:.4f} (target {table.slope_target:.4f})")
        lines = ["x,log_f,log_ratio"]
        lines += [f"{x:.6g},{lf:.10g},{lr:.10g}"
                  for x, lf, lr in zip(fit.x, fit.log_f, table.log_ratio)]
    if args.csv:
        Path(args.csv).write_text("\n".join(lines) + "\n")
    return 0


def _cmd_report(args) -> int:
    cfg = xp.CampaignConfig.from_dict(json.loads(Path(args.config).read_text()))
    results = xp.run_support_campaign(cfg, jobs=args.jobs, out_dir=args.out_dir,
                                      svg=args.svg)
    for res in results:
        h = res.histogram
        print(f"n={h.n}: solved={h.solved} capped={h.capped_count} "
              f"failed={h.failed_count} counts={h.counts}")
    return 0


class _UsageError(StqpError):
    pass


def _usage(msg: str):
    raise _UsageError(msg)


def _emit(rep: "bd.BoundReport", csv_path) -> None:
    if csv_path:
        with open(csv_path, "w") as fh:
            rep.write_csv(fh)
    rep.write_csv(sys.stdout)


_HANDLERS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "oracle-compare": _cmd_oracle_compare,
    "bounds": _cmd_bounds,
    "mc": _cmd_mc,
    "verify-tail": _cmd_verify_tail,
    "report": _cmd_report,
}


def dispatch(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return _HANDLERS[args.command](args)
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (StqpError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
