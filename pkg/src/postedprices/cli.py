"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 capability limit, 3 numerical or
verification failure.
"""

from __future__ import annotations

import argparse
import itertools
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .errors import InputError, NumericError, PostedPriceError
from .game import game_value, q_schedule, schedule_bound
from .generators import FAMILIES, gen_instance
from .lowerbound import (StackedValuation, adversary_mu, best_response_value, critical_level,
                         proof_bound)
from .mechsim import expected_outcome, run_posted_price, verify_utility_bound
from .pricing import (compute_prices, compute_prices_exact, price_inequality_lhs,
                      sample_counts)
from .prices import PriceVector
from .revenue import run_aspe, run_rspm
from .valuations import Instance, iter_profiles, restrict
from .welfare_lp import f_value, opt_welfare, solve_config_lp

VERIFY_TOL = 1e-5


def _emit(doc, out: str | None) -> None:
    text = io.dump_json(doc)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _orders(inst: Instance, mode: str, count: int, seed: int) -> list[tuple[int, ...]]:
    if mode == "identity":
        return [inst.resolve_order(None)]
    if mode == "all":
        if inst.n > 7:
            raise InputError("--orders all supports at most 7 agents")
        return list(itertools.permutations(range(inst.n)))
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        perm = list(range(inst.n))
        rng.shuffle(perm)
        out.append(tuple(perm))
    return out


def _prices_for(args, inst: Instance) -> tuple[PriceVector, dict]:
    if getattr(args, "prices", None):
        return io.load_prices(args.prices, inst.m), {"source": args.prices}
    ex = compute_prices_exact(inst)
    return ex.prices, {"source": "exact", "q": ex.q}


def cmd_gen_instance(args) -> int:
    inst = gen_instance(args.family, args.m, args.n, args.support, args.seed, args.L)
    text = io.save_instance(inst)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_compute_prices(args) -> int:
    inst = io.load_instance(args.instance)
    if args.exact:
        ex = compute_prices_exact(inst)
        doc = {"prices": ex.prices.to_list(), "q": ex.q, "mode": "exact",
               "expected_f": {repr(k): v for k, v in ex.expected_f.items()}}
    else:
        plan = sample_counts(inst.m, inst.n, args.epsilon, args.zeta, args.seed)
        prices, diag = compute_prices(inst, plan)
        doc = {"prices": prices.to_list(), "q": diag["q"], "mode": "sampled",
               "plan": {"epsilon": plan.epsilon, "zeta": plan.zeta, "delta": plan.delta,
                        "n1": plan.n1, "n2": plan.n2, "seed": plan.seed},
               "f_hat": {repr(k): v for k, v in diag["f_hat"].items()},
               "price_tolerance": diag["price_tolerance"]}
    _emit(doc, args.out)
    return 0


def _simulate_order(payload):
    inst, prices, order, n_samples, seed = payload
    rows = []
    if n_samples is None:
        draws = [(idx, p) for idx, p, _ in iter_profiles(inst)]
    else:
        rng = np.random.default_rng(seed)
        draws = [(tuple(int(k) for k in idx), 1.0 / n_samples)
                 for idx in inst.sample_indices(rng, n_samples)]
    for idx, p in draws:
        prof = inst.profile(idx)
        run = run_posted_price(prof, prices, order)
        opt = opt_welfare(prof)[0]
        row = {"seed": seed, "profile": "-".join(map(str, idx)), "prob": p,
               "order": "-".join(map(str, order)), "welfare": run.welfare,
               "revenue": run.revenue, "opt": opt,
               "ratio": opt / run.welfare if run.welfare > 0 else float("inf")}
        row.update({f"u{i}": float(u) for i, u in enumerate(run.utilities)})
        rows.append(row)
    return rows


def _map(fn, payloads, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, payloads))
    return [fn(p) for p in payloads]


def cmd_simulate(args) -> int:
    inst = io.load_instance(args.instance)
    prices, src = _prices_for(args, inst)
    orders = _orders(inst, args.orders, args.n_orders, args.seed)
    payloads = [(inst, prices.values, o, args.n_samples, args.seed) for o in orders]
    rows = [r for chunk in _map(_simulate_order, payloads, args.workers) for r in chunk]
    if args.out:
        io.write_csv(rows, args.out)
    summary = []
    for o in orders:
        out = expected_outcome(inst, prices, o, args.n_samples, args.seed)
        summary.append({"order": list(o), "welfare": out.welfare, "revenue": out.revenue,
                        "opt": out.opt, "ratio": out.ratio})
    _emit({"prices": prices.to_list(), "price_source": src, "orders": summary,
           "bound_factor": schedule_bound(inst.m)}, None)
    return 0


def cmd_game_value(args) -> int:
    inst = io.load_instance(args.instance)
    D = inst.agents[args.agent]
    v = D.valuations[args.type]
    U = (1 << inst.m) - 1 if args.items is None else sum(1 << j for j in args.items)
    qs = args.q or q_schedule(inst.m)
    rows = []
    for q in qs:
        g = game_value(v, U, q)
        vu = restrict(v, U)
        fq, fq2 = f_value([vu], q), f_value([vu], q * q)
        rows.append({**g.to_dict(), "f_q": fq, "f_q2": fq2, "telescoping_slack": g.value - fq + fq2})
    _emit({"agent": args.agent, "type": args.type, "items": sorted(
        j for j in range(inst.m) if U >> j & 1), "v_U": v.value(U), "games": rows}, args.out)
    return 0


def _lowerbound_row(payload):
    L, q = payload
    sv = StackedValuation(L)
    mu = adversary_mu(sv, q)
    br = best_response_value(sv, q, mu)
    return {"L": L, "q": q, "ell_star": critical_level(q), "atoms": len(mu),
            "best_response": br, "proof_bound": proof_bound(sv, q, mu),
            "v_M": sv.value((1 << sv.m) - 1), "f_q": f_value([sv], q),
            "f_q2": f_value([sv], q * q)}


def cmd_lowerbound(args) -> int:
    sv_m = 2 ** (2 ** args.L)
    qs = args.q if args.q else q_schedule(sv_m)
    rows = _map(_lowerbound_row, [(args.L, q) for q in sorted(qs, reverse=True)], args.workers)
    if args.out:
        io.write_csv(rows, args.out)
    _emit(rows, None)
    return 0


def cmd_revenue_sim(args) -> int:
    inst = io.load_instance(args.instance)
    order = args.order
    if args.mechanism == "aspe":
        if not args.beta or not args.prices:
            raise InputError("aspe needs --beta and --prices")
        beta = io.load_matrix(args.beta, "beta", (inst.n, inst.m))
        prices = io.load_prices(args.prices, inst.m)
        res = run_aspe(inst, prices, beta, order, args.n_samples, args.seed)
    else:
        if not args.personal_prices:
            raise InputError("rspm needs --personal-prices")
        P = io.load_matrix(args.personal_prices, "prices", (inst.n, inst.m))
        res = run_rspm(inst, P, order, args.n_samples, args.seed)
    _emit({"mechanism": args.mechanism, "revenue": res.revenue, "welfare": res.welfare,
           "item_revenue": res.item_revenue, "fee_revenue": res.fee_revenue,
           "samples": res.samples}, args.out)
    return 0


def verify_report(inst: Instance, prices: PriceVector | None = None) -> dict:
    """Exact checks of the welfare guarantee chain for one instance."""
    ex = compute_prices_exact(inst)
    p = ex.prices if prices is None else prices
    bound = schedule_bound(inst.m)
    checks = []
    gaps = [solve_config_lp(prof, ex.q).duality_gap for _, _, prof in iter_profiles(inst)]
    checks.append({"name": "duality_gap", "value": max(gaps), "ok": max(gaps) <= 1e-6})
    if inst.m <= 12 and prices is None:
        lhs = price_inequality_lhs(inst, p, ex.lambdas, ex.profiles)
        checks.append({"name": "price_inequality", "value": float(lhs.min() - ex.gap),
                       "ok": bool(lhs.min() >= ex.gap - VERIFY_TOL)})
    orders = (list(itertools.permutations(range(inst.n))) if inst.n <= 5
              else [inst.resolve_order(None)])
    worst = np.inf
    for o in orders:
        out = expected_outcome(inst, p, o)
        worst = min(worst, out.welfare - bound * out.opt)
    checks.append({"name": "prophet_bound", "value": float(worst),
                   "ok": bool(worst >= -VERIFY_TOL)})
    if prices is None:
        rep = verify_utility_bound(inst, p, ex.lambdas, 1.0 / bound)
        checks.append({"name": "utility_bound", "value": rep.slack,
                       "ok": rep.slack >= -VERIFY_TOL})
        checks.append({"name": "hallucination", "value": rep.hallucination_slack,
                       "ok": rep.hallucination_slack >= -VERIFY_TOL})
    return {"prices": p.to_list(), "q": ex.q, "bound_factor": bound, "checks": checks,
            "ok": all(c["ok"] for c in checks)}


def cmd_verify(args) -> int:
    inst = io.load_instance(args.instance)
    prices = io.load_prices(args.prices, inst.m) if args.prices else None
    rep = verify_report(inst, prices)
    _emit(rep, args.out)
    if not rep["ok"]:
        raise NumericError("verification failed: " + ", ".join(
            c["name"] for c in rep["checks"] if not c["ok"]))
    return 0


def run_pipeline(instance: str | Path, out_dir: str | Path, epsilon: float = 0.5,
                 zeta: float = 0.05, seed: int = 0, exact: bool = False) -> dict:
    """compute-prices, simulate and verify; writes prices.json, runs.csv, verify.json."""
    inst = io.load_instance(instance)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if exact:
        ex = compute_prices_exact(inst)
        prices, meta = ex.prices, {"mode": "exact", "q": ex.q}
    else:
        plan = sample_counts(inst.m, inst.n, epsilon, zeta, seed)
        prices, diag = compute_prices(inst, plan)
        meta = {"mode": "sampled", "q": diag["q"], "n1": plan.n1, "n2": plan.n2,
                "delta": plan.delta, "seed": plan.seed}
    io.dump_json({"prices": prices.to_list(), **meta}, out / "prices.json")
    order = inst.resolve_order(None)
    io.write_csv(_simulate_order((inst, prices.values, order, None, seed)), out / "runs.csv")
    rep = verify_report(inst, None if exact else prices)
    io.dump_json(rep, out / "verify.json")
    res = expected_outcome(inst, prices, order)
    summary = {"out_dir": str(out), "prices": prices.to_list(), **meta,
               "theoretical_ratio_bound": 1.0 / schedule_bound(inst.m),
               "measured_ratio": res.ratio, "welfare": res.welfare, "opt": res.opt,
               "slacks": {c["name"]: c["value"] for c in rep["checks"]}, "ok": rep["ok"]}
    io.dump_json(summary, out / "summary.json")
    return summary


def cmd_pipeline(args) -> int:
    summary = run_pipeline(args.instance, args.out_dir, args.epsilon, args.zeta, args.seed,
                           args.exact)
    _emit(summary, None)
    if not summary["ok"]:
        raise NumericError("pipeline verification failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="postedprices",
                                 description="Posted prices for subadditive combinatorial auctions")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-instance", help="write a random instance as JSON")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--m", type=int, default=4)
    g.add_argument("--n", type=int, default=2)
    g.add_argument("--support", type=int, default=2)
    g.add_argument("--L", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_instance)

    c = sub.add_parser("compute-prices", help="sampled or exact Bayesian prices")
    c.add_argument("--instance", required=True)
    c.add_argument("--epsilon", type=float, default=0.5)
    c.add_argument("--zeta", type=float, default=0.05)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--exact", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compute_prices)

    s = sub.add_parser("simulate", help="run the posted-price mechanism, write per-run CSV")
    s.add_argument("--instance", required=True)
    s.add_argument("--prices", help="price JSON; exact prices are computed when omitted")
    s.add_argument("--orders", choices=["identity", "all", "random"], default="identity")
    s.add_argument("--n-orders", type=int, default=5)
    s.add_argument("--n-samples", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    gv = sub.add_parser("game-value", help="value of the equal-marginals game")
    gv.add_argument("--instance", required=True)
    gv.add_argument("--agent", type=int, default=0)
    gv.add_argument("--type", type=int, default=0, help="support index of the valuation")
    gv.add_argument("--items", type=int, nargs="*", default=None)
    gv.add_argument("--q", type=float, nargs="*", default=None)
    gv.add_argument("--out")
    gv.set_defaults(func=cmd_game_value)

    lb = sub.add_parser("lowerbound", help="adversary sweep on the stacked valuation")
    lb.add_argument("--L", type=int, default=2)
    lb.add_argument("--q-sweep", action="store_true", help="sweep the q schedule (default)")
    lb.add_argument("--q", type=float, nargs="*", default=None)
    lb.add_argument("--workers", type=int, default=1)
    lb.add_argument("--out")
    lb.set_defaults(func=cmd_lowerbound)

    r = sub.add_parser("revenue-sim", help="entry-fee or sequential personalised prices")
    r.add_argument("mechanism", choices=["aspe", "rspm"])
    r.add_argument("--instance", required=True)
    r.add_argument("--beta")
    r.add_argument("--prices")
    r.add_argument("--personal-prices")
    r.add_argument("--order", type=int, nargs="*", default=None)
    r.add_argument("--n-samples", type=int, default=None)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.set_defaults(func=cmd_revenue_sim)

    v = sub.add_parser("verify", help="exact checks of the welfare guarantee")
    v.add_argument("--instance", required=True)
    v.add_argument("--prices")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("pipeline", help="prices, simulation and verification in one go")
    p.add_argument("--instance", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--zeta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PostedPriceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
