"""Command-line front end.

Exit codes: 0 ok, 1 unreadable or invalid model, 2 solver failure,
3 the model is outside the regime a command needs.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from contextlib import contextmanager
from importlib import resources
from typing import Sequence

import numpy as np

from . import catalog, oracle, qbd, simulate, traffic, twisted
from .algebra import PairSpec
from .errors import AlgebraError, RegimeError, SolverError
from .model import Model, ModelError, load

EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_REGIME = 0, 1, 2, 3
MATCH_TOL = 1e-8

log = logging.getLogger("zeroqueue")


def fmt(x: float) -> str:
    return f"{x:.17g}"


def short(x: float) -> str:
    return f"{x:.10g}"


def bundled_model(name: str) -> str:
    """Path of a model file shipped with the package (``z3z3``, ``zqueue``, ``bicyclic``)."""
    return str(resources.files("zeroqueue") / "models" / f"{name}.json")


@contextmanager
def _csv_out(path: str | None):
    if path is None:
        yield None
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        yield csv.writer(fh, lineterminator="\n")


def _vec(pair: PairSpec, v) -> str:
    return ", ".join(f"{x}={short(y)}" for x, y in zip(pair.labels, v))


class Analysis:
    """Everything the commands share: the built pair and the solved equations."""

    def __init__(self, model: Model):
        self.model = model
        self.pair = model.pair()
        self.nu = model.nu_vector(self.pair)
        self.lam, self.mu = model.lam, model.mu
        opts = {k: model.solver[k] for k in ("tol", "max_iter", "theta") if k in model.solver}
        self.opts = opts
        self.te = traffic.solve_te(self.pair, self.nu, **opts)
        self.gamma = traffic.walk_drift(self.pair, self.nu, self.te)
        self.verdict = twisted.stability(self.lam, self.mu, self.gamma)
        self.tte = twisted.solve_tte(self.pair, self.nu, self.lam, self.mu, **opts)

    def solution(self) -> twisted.TTESolution:
        """The admissible solution whose ``r`` is the model's boundary vector.

        Without ``r_boundary`` the choice must be unambiguous.
        """
        r = self.model.r_vector(self.pair)
        if r is not None:
            for s in self.tte:
                if np.max(np.abs(s.r - r)) < MATCH_TOL:
                    return s
            raise RegimeError("r_boundary is not part of an admissible solution: no product form")
        if len(self.tte) > 1:
            raise RegimeError(f"{len(self.tte)} admissible solutions; set r_boundary to pick one")
        return self.tte[0]

    def boundary(self) -> np.ndarray:
        r = self.model.r_vector(self.pair)
        return r if r is not None else self.solution().r

    def law(self) -> twisted.StationaryLaw:
        return twisted.StationaryLaw(self.pair, self.solution())


def cmd_analyze(args) -> int:
    an = Analysis(load(args.model))
    pair = an.pair
    print(f"alphabet: {', '.join(pair.labels)}")
    if pair.is_plain:
        print("triple: plain (unique admissible solution)")
    else:
        print("triple: general (all solutions found are listed)")
        if pair.excluded_case is not None:
            print(f"note: pair is {pair.excluded_case.value}; analysed as a general pair")
    for t in an.te:
        print(f"r_hat: {_vec(pair, t.r_hat)}  (residual {t.residual:.2e})")
    print(f"gamma_hat: {short(an.gamma)}")
    print(f"stability: {an.verdict.verdict.value} (lambda*gamma_hat - mu = {short(an.verdict.margin)})")
    for k, s in enumerate(an.tte):
        print(f"solution {k}: rho={short(s.rho)}  departure rate={short(s.rho * an.mu)}")
        print(f"  r: {_vec(pair, s.r)}")
        print(f"  q: {_vec(pair, s.q)}")
    with _csv_out(args.csv) as out:
        if out:
            out.writerow(["solution", "letter", "rho", "r", "q", "gamma_hat"])
            for k, s in enumerate(an.tte):
                for i, x in enumerate(pair.labels):
                    out.writerow([k, x, fmt(s.rho), fmt(s.r[i]), fmt(s.q[i]), fmt(an.gamma)])
    return EXIT_OK


def cmd_stationary(args) -> int:
    an = Analysis(load(args.model))
    law = an.law()
    words = oracle.enumerate_words(an.pair, args.max_len, cap=max(args.max_len, oracle.MAX_LEN_CAP))
    rows = []
    total = 0.0
    for w in words:
        p = law.probability(w)
        total += p
        rows.append((an.pair.format(w), p, total))
    with _csv_out(args.csv) as out:
        if out:
            out.writerow(["word", "pi", "cumulative"])
            for w, p, c in rows:
                out.writerow([w, fmt(p), fmt(c)])
        else:
            print("word,pi,cumulative")
            for w, p, c in rows:
                print(f"{w},{fmt(p)},{fmt(c)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    an = Analysis(load(args.model))
    sim = an.model.simulation
    events = args.events or sim.get("events", 1_000_000)
    seed = args.seed if args.seed is not None else sim.get("seed", 0)
    reps = args.reps or sim.get("reps", 1)
    cap = args.max_len if args.max_len is not None else sim.get("max_tracked_len", 5)
    cfg = simulate.SimConfig(an.lam, an.mu, an.boundary(), events, sim.get("warmup"), seed, cap)
    reports = simulate.replicate(an.pair, an.nu, cfg, reps, args.threads, args.engine)
    law = None
    try:
        law = an.law()
    except RegimeError as exc:
        print(f"no analytic comparison: {exc}")
    header = ["rep", "empty_fraction", "departure_rate", "interdeparture_cv", "dispersion",
              "returns_to_empty", "final_length", "growth_rate", "tv_vs_product_form"]
    rows = []
    for k, rep in enumerate(reports):
        try:
            disp = simulate.departure_stats(rep).dispersion
        except ValueError:
            disp = float("nan")
        tv = simulate.empirical_vs_product_form(rep, law, min(cap, 5)) if law else float("nan")
        rows.append([k, rep.empty_fraction, rep.departure_rate, rep.interdeparture_cv, disp,
                     rep.returned_to_empty, rep.final_length, simulate.growth_rate(rep), tv])
    pooled = simulate.pool(reports)
    print(f"rng: {simulate.RNG_NAME}, seed {seed}, {reps} replication(s) of {events} events")
    print(",".join(header))
    for row in rows:
        print(",".join(short(x) if isinstance(x, float) else str(x) for x in row))
    print(f"pooled empty fraction {short(pooled.empty_fraction)} (se {short(pooled.empty_fraction_se)})")
    print(f"pooled departure rate {short(pooled.departure_rate)} (se {short(pooled.departure_rate_se)})")
    if law:
        rho = law.solution.rho
        print(f"analytic empty fraction {short(1 - rho)}, departure rate {short(rho * an.mu)}")
    else:
        print(f"pooled growth rate {short(pooled.growth_rate)} (se {short(pooled.growth_rate_se)}); "
              f"lambda*gamma_hat - mu = {short(an.verdict.margin)}")
    with _csv_out(args.csv) as out:
        if out:
            out.writerow(header)
            for row in rows:
                out.writerow([fmt(x) if isinstance(x, float) else x for x in row])
    return EXIT_OK


def cmd_qbd(args) -> int:
    an = Analysis(load(args.model))
    sol = an.solution()
    blocks = qbd.build_blocks(an.pair, an.nu, an.lam, an.mu, sol.r)
    R = qbd.solve_R(blocks, tol=args.tol)
    y, x = qbd.boundary_solve(blocks, R.R)
    check = qbd.product_form_check(blocks, R.R, y, x, sol)
    np.set_printoptions(precision=10, suppress=True)
    print(f"R ({R.iterations} iterations, defect {R.defect:.2e}):")
    print(R.R)
    print(f"spectral radius {short(check.spectral_radius)}  rho {short(sol.rho)}")
    print(f"y = {short(y)}")
    print(f"x = {_vec(an.pair, x)}")
    print(f"|xR - rho x| = {check.eigen_defect:.3e}")
    print(f"|x - rho(1-rho) r| = {check.boundary_defect:.3e}")
    print(f"|y - (1-rho)| = {check.empty_defect:.3e}")
    print("product form confirmed" if check.ok else "product form NOT confirmed")
    return EXIT_OK


def cmd_validate(args) -> int:
    an = Analysis(load(args.model))
    law = an.law()
    chain = oracle.truncated_generator(an.pair, an.nu, an.lam, an.mu, law.solution.r, args.max_len,
                                       cap=max(args.max_len, oracle.MAX_LEN_CAP))
    orc = oracle.solve_stationary(chain)
    cmp = oracle.compare(orc, law, args.max_len)
    bal = twisted.balance_residual(an.pair, an.nu, an.lam, an.mu, law.solution, min(args.max_len, 6))
    print(f"states {len(chain.states)} (reachable {orc.reachable}), oracle residual {orc.residual:.2e}")
    print(f"total variation on |u| <= {cmp.compared_len}: {cmp.tv:.3e}")
    print(f"tail bound rho^(N-1): {cmp.tail_bound:.3e}")
    print(f"max abs difference: {cmp.max_abs:.3e}")
    print(f"global balance residual: {bal:.3e}")
    if args.csv:
        oracle.dump_csv(args.csv, an.pair, orc, law)
    return EXIT_OK


GRID_FAMILIES = {
    "z3z3": lambda p, q: catalog.z3_star_z3(p),
    "nb": lambda p, q: catalog.n_star_b(p),
    "bicyclic": lambda p, q: catalog.bicyclic(p),
    "zqueue": lambda p, q: catalog.z_pair(p),
    "nzb": lambda p, q: catalog.n_star_z_star_b(p, q),
    "zc": lambda p, q: catalog.z_star_c(p, q),
    "bicyclic-c": lambda p, q: catalog.bicyclic_star_c(p, q),
}


def cmd_grid(args) -> int:
    """Stability frontier ``lambda/mu = 1/gamma_hat`` and load ``rho`` over a (p, lambda/mu) grid."""
    ps = np.linspace(*args.p)
    ratios = np.linspace(*args.ratio) if args.ratio else []
    make = GRID_FAMILIES[args.family]
    with _csv_out(args.csv) as out:
        write = out.writerow if out else (lambda row: print(",".join(map(str, row))))
        if args.kind == "frontier":
            write(["p", "gamma_hat", "critical_ratio"])
        else:
            write(["p", "ratio", "solution", "rho", "stability"])
        for p in ps:
            pair, nu = make(float(p), args.q)
            gamma = traffic.walk_drift(pair, nu)
            if args.kind == "frontier":
                write([fmt(p), fmt(gamma), fmt(1 / gamma) if gamma > 0 else "inf"])
                continue
            for ratio in ratios:
                verdict = twisted.classify(float(ratio), 1.0, gamma).value
                try:
                    sols = twisted.solve_tte(pair, nu, float(ratio), 1.0)
                except SolverError:
                    write([fmt(p), fmt(ratio), "", "nan", verdict])
                    continue
                for k, s in enumerate(sols):
                    write([fmt(p), fmt(ratio), k, fmt(s.rho), verdict])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zeroqueue", description="Analyse queues whose buffer is a monoid.")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--dump-normalized", action="store_true",
                    help="print the parsed model as normalized JSON and exit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="traffic equations, drift, stability and product-form solutions")
    p.add_argument("model", help="model JSON file or a bundled name (z3z3, zqueue, bicyclic)")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("stationary", help="product-form probabilities of short words")
    p.add_argument("model", help="model JSON file or a bundled name (z3z3, zqueue, bicyclic)")
    p.add_argument("--max-len", type=int, default=4)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("simulate", help="event-driven simulation")
    p.add_argument("model", help="model JSON file or a bundled name (z3z3, zqueue, bicyclic)")
    p.add_argument("--events", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--engine", choices=["numba", "python"], default="numba")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("qbd", help="matrix-geometric solution of the lumped chain")
    p.add_argument("model", help="model JSON file or a bundled name (z3z3, zqueue, bicyclic)")
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_qbd)

    p = sub.add_parser("validate", help="truncated-generator oracle against the product form")
    p.add_argument("model", help="model JSON file or a bundled name (z3z3, zqueue, bicyclic)")
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("grid", help="stability frontier or load tables over a parameter grid")
    p.add_argument("family", choices=sorted(GRID_FAMILIES))
    p.add_argument("--kind", choices=["frontier", "rho"], default="frontier")
    p.add_argument("--p", type=float, nargs=3, metavar=("START", "STOP", "NUM"), default=[0.05, 0.45, 9])
    p.add_argument("--ratio", type=float, nargs=3, metavar=("START", "STOP", "NUM"))
    p.add_argument("--q", type=float, default=0.0, help="second family parameter where needed")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_grid)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "grid":
        if args.kind == "rho" and not args.ratio:
            print("error: --ratio is required for --kind rho", file=sys.stderr)
            return EXIT_PARSE
        args.p[2] = int(args.p[2])
        if args.ratio:
            args.ratio[2] = int(args.ratio[2])
    model_arg = getattr(args, "model", None)
    if model_arg and not os.path.exists(model_arg) and os.path.exists(bundled_model(model_arg)):
        args.model = bundled_model(model_arg)
    try:
        if args.dump_normalized:
            if not hasattr(args, "model"):
                print("error: --dump-normalized needs a model", file=sys.stderr)
                return EXIT_PARSE
            m = load(args.model)
            m.pair()
            print(m.dumps())
            return EXIT_OK
        return args.func(args)
    except (ModelError, AlgebraError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RegimeError as exc:
        print(f"regime: {exc}", file=sys.stderr)
        return EXIT_REGIME


if __name__ == "__main__":
    sys.exit(main())
