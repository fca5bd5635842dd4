"""``matchkit`` command line.

Exit status: 0 on success, 1 on domain errors (error JSON on stderr),
2 on I/O or parse errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .comparative_statics import comparative_statics
from .equilibrium import DEFAULT_TOL, MAX_NEWTON_ITER, ipfp_logit, solve_equilibrium
from .errors import InvalidSpec, MatchkitError
from .heterogeneity import MEN, WOMEN, worker_count
from .identification import estimate_lambda, laplace_smooth, recover_u, recover_v
from .micro import aggregate, realized_market, sample_population, solve_assignment
from .onetype import DISTRIBUTIONS, OneTypeModel, one_type_differentials, \
    one_type_identify, solve_one_type

log = logging.getLogger("matchkit")

COMMANDS = ("solve", "identify", "estimate", "cs", "onetype", "simulate", "selftest")


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    out: Optional[Path] = None
    tolerance: Optional[float] = None
    seed: Optional[int] = None
    verbosity: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidSpec(f"unknown command {self.command!r}")
        if self.tolerance is not None and not self.tolerance > 0:
            raise InvalidSpec("tolerance must be positive")
        for name, path in self.inputs.items():
            if path is not None and path != "logit" and not Path(path).exists():
                raise FileNotFoundError(f"--{name.replace('_', '-')}: {path} does not exist")


def _het_pair(cfg: RunConfig, market):
    het = cfg.inputs.get("het") or "logit"
    het_w = cfg.inputs.get("het_women") or het
    return io.load_heterogeneity(het, market, MEN), io.load_heterogeneity(het_w, market, WOMEN)


def _emit(cfg: RunConfig, payload: dict) -> None:
    text = io.dumps(payload)
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        Path(cfg.out).write_text(text)


def _load_observed(cfg: RunConfig, market):
    matching = io.read_matching_csv(cfg.inputs["matching"], market)
    eps = cfg.options.get("laplace")
    if eps:
        matching = laplace_smooth(matching, market, eps)
    return matching


def cmd_solve(cfg: RunConfig) -> None:
    market, phi = io.load_market(cfg.inputs["market"])
    if phi is None:
        raise io.ParseError("market file has no phi matrix")
    hm, hw = _het_pair(cfg, market)
    tol = cfg.tolerance or DEFAULT_TOL
    if cfg.options.get("method") == "ipfp":
        eq = ipfp_logit(market, hm, hw, phi, tolerance=tol)
    else:
        eq = solve_equilibrium(market, hm, hw, phi, tolerance=tol,
                               max_iterations=cfg.options.get("max_iter") or MAX_NEWTON_ITER)
    log.info("solved in %s iterations, residual %.3e", eq.diagnostics["iterations"],
             eq.diagnostics["residual"])
    _emit(cfg, io.equilibrium_to_dict(eq))
    if cfg.options.get("matching_out"):
        io.write_matching_csv(cfg.options["matching_out"], eq.matching, market)


def cmd_identify(cfg: RunConfig) -> None:
    market, _ = io.load_market(cfg.inputs["market"])
    hm, hw = _het_pair(cfg, market)
    matching = _load_observed(cfg, market)
    U = recover_u(matching, market, hm)
    V = recover_v(matching, market, hw)
    _emit(cfg, {"phi": U + V, "U": U, "V": V,
                "laplace": cfg.options.get("laplace") or 0.0})


def cmd_estimate(cfg: RunConfig) -> None:
    market, _ = io.load_market(cfg.inputs["market"])
    hm, hw = _het_pair(cfg, market)
    matching = _load_observed(cfg, market)
    basis = io.basis_from_dict(io.read_json(cfg.inputs["basis"]))
    kwargs = {"tolerance": cfg.tolerance} if cfg.tolerance else {}
    est = estimate_lambda(matching, market, hm, hw, basis, **kwargs)
    fitted = est.fitted.matching
    _emit(cfg, {
        "lambda": est.lam, "names": list(basis.names),
        "diagnostics": {"iterations": est.iterations, "moment_gap": est.moment_gap},
        "observed_moments": est.observed_moments, "fitted_moments": est.fitted_moments,
        "phi": est.phi,
        "matching": {"mu": fitted.mu, "mu_x0": fitted.mu_x0, "mu_0y": fitted.mu_0y},
    })


def cmd_cs(cfg: RunConfig) -> None:
    market, _ = io.load_market(cfg.inputs["market"])
    hm, hw = _het_pair(cfg, market)
    eq = io.equilibrium_from_dict(io.read_json(cfg.inputs["equilibrium"]), market)
    shock = io.shock_from_dict(io.read_json(cfg.inputs["shock"]), market)
    report = comparative_statics(market, hm, hw, eq, shock)
    _emit(cfg, io.cs_report_to_dict(report))
    blocks_dir = cfg.options.get("blocks")
    if blocks_dir:
        out = Path(blocks_dir)
        out.mkdir(parents=True, exist_ok=True)
        xs, ys = market.types.x_types, market.types.y_types
        cells = [f"{x}|{y}" for x in xs for y in ys]
        b = report.blocks
        for name, mat, rows, cols in (("du_dn", b.du_dn, xs, xs), ("du_dm", b.du_dm, xs, ys),
                                      ("du_dphi", b.du_dphi, xs, cells),
                                      ("dv_dn", b.dv_dn, ys, xs), ("dv_dm", b.dv_dm, ys, ys),
                                      ("dv_dphi", b.dv_dphi, ys, cells)):
            io.write_matrix_csv(out / f"{name}.csv", mat, rows, cols)


def cmd_onetype(cfg: RunConfig) -> None:
    o = cfg.options
    P, Q = DISTRIBUTIONS[o["dist_men"]], DISTRIBUTIONS[o["dist_women"]]
    phi = o["phi"]
    if o.get("mu") is not None:
        phi = one_type_identify(o["mu"], o["n"], o["m"], P, Q)
    if phi is None:
        raise InvalidSpec("onetype needs --phi or --mu")
    sol = solve_one_type(OneTypeModel(o["n"], o["m"], phi, P, Q))
    d = one_type_differentials(sol, o["dlogn"], o["dlogm"], o["dphi"])
    _emit(cfg, {"phi": phi, "U": sol.U, "V": sol.V, "mu": sol.mu, "u": sol.u, "v": sol.v,
                "kP": sol.kP, "kQ": sol.kQ, "S": sol.S, "T": sol.T,
                "differentials": {"dU": d.dU, "du": d.du, "dv": d.dv, "dmu": d.dmu,
                                  "e_n": d.e_n, "e_m": d.e_m, "s": d.s}})


def cmd_simulate(cfg: RunConfig) -> None:
    market, phi = io.load_market(cfg.inputs["market"])
    if phi is None:
        raise io.ParseError("market file has no phi matrix")
    hm, hw = _het_pair(cfg, market)
    pop = sample_population(market, hm, hw, scale=cfg.options["scale"], seed=cfg.seed or 0)
    res = solve_assignment(pop, phi)
    emp = aggregate(pop, res)
    star = solve_equilibrium(market, hm, hw, phi)
    realized = solve_equilibrium(realized_market(pop, market), hm, hw, phi)
    _emit(cfg, {
        "scale": pop.scale, "seed": pop.seed,
        "men_counts": pop.men_counts, "women_counts": pop.women_counts,
        "mu_hat": emp.mu, "mu_x0_hat": emp.mu_x0, "mu_0y_hat": emp.mu_0y,
        "total_surplus": res.total_surplus,
        "blocking_surplus": res.blocking_surplus,
        "mu_star": star.mu, "mu_x0_star": star.matching.mu_x0,
        "mu_0y_star": star.matching.mu_0y,
        "mu_star_realized_counts": realized.mu,
        "max_abs_gap": float(np.max(np.abs(emp.mu - star.mu))),
    })


def cmd_selftest(cfg: RunConfig) -> int:
    from .acceptance import run_all
    results = run_all()
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return 0 if passed == len(results) else 1


HANDLERS = {"solve": cmd_solve, "identify": cmd_identify, "estimate": cmd_estimate,
            "cs": cmd_cs, "onetype": cmd_onetype, "simulate": cmd_simulate,
            "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matchkit", description=(
        "Separable transferable-utility matching: equilibrium, identification, "
        "estimation, comparative statics and a finite-population oracle."))
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="log progress to stderr (repeat for debug output)")
    sub = p.add_subparsers(dest="command", required=True)

    def het_args(sp):
        sp.add_argument("--het", default="logit",
                        help="'logit' (unit scale) or a heterogeneity JSON file; applies "
                             "to both sides unless --het-women is given")
        sp.add_argument("--het-women", default=None,
                        help="heterogeneity for women if different from --het")

    s = sub.add_parser("solve", help="compute the equilibrium of a market")
    s.add_argument("--market", required=True, help="market JSON including phi")
    het_args(s)
    s.add_argument("--method", choices=("newton", "ipfp"), default="newton",
                   help="solver; ipfp needs logit on both sides")
    s.add_argument("--tol", type=float, default=None, help=f"stationarity tolerance "
                   f"(default {DEFAULT_TOL:g})")
    s.add_argument("--max-iter", type=int, default=None, help="Newton iteration cap")
    s.add_argument("--matching-out", default=None, help="also write the matching as CSV")
    s.add_argument("--out", default=None, help="equilibrium JSON (default stdout)")

    s = sub.add_parser("identify", help="recover U, V and Phi from an observed matching")
    s.add_argument("--matching", required=True, help="matching CSV (x,y,mu)")
    s.add_argument("--market", required=True, help="market JSON (phi not needed)")
    het_args(s)
    s.add_argument("--laplace", type=float, default=None,
                   help="add this mass to every cell and renormalise margins first")
    s.add_argument("--out", default=None, help="output JSON (default stdout)")

    s = sub.add_parser("estimate", help="fit a linear surplus by matching comoments")
    s.add_argument("--matching", required=True, help="matching CSV (x,y,mu)")
    s.add_argument("--market", required=True, help="market JSON")
    s.add_argument("--basis", required=True, help="basis JSON")
    het_args(s)
    s.add_argument("--laplace", type=float, default=None, help="see identify")
    s.add_argument("--tol", type=float, default=None, help="moment gap tolerance")
    s.add_argument("--out", default=None, help="estimation report JSON (default stdout)")

    s = sub.add_parser("cs", help="local comparative statics at an equilibrium")
    s.add_argument("--equilibrium", required=True, help="equilibrium JSON from solve")
    s.add_argument("--market", required=True, help="market JSON used for the solve")
    s.add_argument("--shock", required=True, help='shock JSON {"dn","dm","dphi"}')
    het_args(s)
    s.add_argument("--blocks", default=None, metavar="DIR",
                   help="write the welfare-derivative blocks as CSV matrices into DIR")
    s.add_argument("--out", default=None, help="report JSON (default stdout)")

    s = sub.add_parser("onetype", help="one type on each side: solve, identify, differentiate")
    s.add_argument("--n", type=float, required=True, help="mass of men")
    s.add_argument("--m", type=float, required=True, help="mass of women")
    s.add_argument("--phi", type=float, default=None, help="joint surplus")
    s.add_argument("--mu", type=float, default=None,
                   help="observed marriages; identifies phi instead of --phi")
    s.add_argument("--dist-men", choices=sorted(DISTRIBUTIONS), default="logistic",
                   help="distribution of eps_0 - eps")
    s.add_argument("--dist-women", choices=sorted(DISTRIBUTIONS), default="logistic",
                   help="distribution of eta_0 - eta")
    s.add_argument("--dlogn", type=float, default=0.0, help="shock to log n")
    s.add_argument("--dlogm", type=float, default=0.0, help="shock to log m")
    s.add_argument("--dphi", type=float, default=0.0, help="shock to phi")
    s.add_argument("--out", default=None, help="output JSON (default stdout)")

    s = sub.add_parser("simulate", help="finite-population assignment oracle")
    s.add_argument("--market", required=True, help="market JSON including phi")
    het_args(s)
    s.add_argument("--scale", type=float, default=1000.0, help="agents per unit mass")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.add_argument("--out", default=None, help="output JSON (default stdout)")

    sub.add_parser("selftest", help="run the built-in acceptance suite")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    ns = vars(args).copy()
    command = ns.pop("command")
    verbosity = ns.pop("verbose", 0)
    out = ns.pop("out", None)
    tol = ns.pop("tol", None)
    seed = ns.pop("seed", None)
    input_keys = ("market", "matching", "basis", "equilibrium", "shock", "het", "het_women")
    inputs = {k: ns.pop(k) for k in input_keys if k in ns}
    return RunConfig(command, inputs, Path(out) if out else None, tol, seed, verbosity, ns)


def _fail(code: int, err: dict) -> int:
    sys.stderr.write(json.dumps({"error": err}, default=str) + "\n")
    return code


def run(cfg: RunConfig) -> int:
    handler = HANDLERS[cfg.command]
    status = handler(cfg)
    return 0 if status is None else status


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        worker_count()
        cfg = config_from_args(args)
        return run(cfg)
    except MatchkitError as exc:
        return _fail(1, exc.to_dict())
    except (OSError, io.ParseError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        return _fail(2, {"code": "IO_ERROR" if isinstance(exc, OSError) else "PARSE_ERROR",
                         "message": str(exc)})


if __name__ == "__main__":
    sys.exit(main())
