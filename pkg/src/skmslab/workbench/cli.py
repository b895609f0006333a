"""Command line front end.

Subcommands: model gen|validate, verify <suite>, tau eval, perturb sweep,
homotopy check.  Exit status is 0 only when every emitted check row
passed (evaluation-only commands count as passing).
"""

import argparse
import json
import sys as _sys

import numpy as np

from ..cochain import tau_eval
from ..dynamics import superderivation
from ..errors import ChainBudgetExceeded
from ..graded import as_matrix
from ..kernels import SimplexQuadratureRule, heat_chain_integrand, simplex_quadrature
from ..perturbation import (PerturbedContext, endpoint_transgression_check,
                            homotopy_check, lipschitz_check,
                            skms_check_perturbed, witten_invariance_check)
from ..report import make_report
from .models import ModelSpec, build_model, model_digest
from .reports import emit_report
from .suites import SUITES, SuiteConfig, default_perturbation_spec, \
    parse_quadrature, run_suite


def _add_common(parser):
    parser.add_argument("--tol", type=float, default=None,
                        help="override the exact-identity tolerance")
    parser.add_argument("--max-degree", type=int, default=5)
    parser.add_argument("--series-order", type=int, default=None)
    parser.add_argument("--quadrature", default=None,
                        help="gauss:<order> or mc:<samples>")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="write report/output here")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--timing", action="store_true",
                        help="record wall times (breaks byte determinism)")


def _config(args):
    kwargs = dict(max_degree=args.max_degree, series_order=args.series_order,
                  quadrature=args.quadrature or "gauss:8", seed=args.seed,
                  jobs=args.jobs, timing=args.timing)
    if args.tol is not None:
        kwargs["tol_exact"] = args.tol
    return SuiteConfig(**kwargs)


def _load_spec(path):
    with open(path) as fh:
        return ModelSpec.from_json(fh.read())


def _finish(reports, args):
    text = emit_report(reports, format=args.format, path=args.out)
    if args.out is None:
        _sys.stdout.write(text)
    return 0 if all(r.passed for r in reports) else 1


def _cmd_model_gen(args):
    pert = None
    if args.perturb_seed is not None or args.perturb_scale is not None:
        # same default strength the suites use when they synthesize one
        pert = {"seed": args.perturb_seed or 0,
                "scale": args.perturb_scale if args.perturb_scale is not None
                else 0.3}
    spec = ModelSpec(kind=args.kind, p=args.p, q=args.q, seed=args.seed,
                     scale=args.scale, perturbation=pert)
    build_model(spec)  # raises on invalid specs before anything is written
    text = spec.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)
    return 0


def _cmd_model_validate(args):
    spec = _load_spec(args.model)
    system, pert = build_model(spec)
    info = {
        "digest": model_digest(spec),
        "dim": system.dim,
        "witten_index": system.witten_index,
        "has_perturbation": pert is not None,
    }
    _sys.stdout.write(json.dumps(info, indent=2) + "\n")
    return 0


def _cmd_verify(args):
    spec = _load_spec(args.model)
    reports = run_suite(spec, args.suite, _config(args))
    return _finish(reports, args)


def _tau_by_quadrature(system, n, xs, kind, num, seed):
    # dual route to the divided-difference path, driven by --quadrature
    mats = [as_matrix(xs[0])]
    mats += [as_matrix(superderivation(system, x)) for x in xs[1:]]
    integrand = heat_chain_integrand(system.spectrum, mats, system.grading)
    rule = SimplexQuadratureRule(kind, num, seed=seed, vectorized=True)
    value, err = simplex_quadrature(integrand, n, rule)
    return value / system.witten_index, abs(err / system.witten_index)


def _cmd_tau_eval(args):
    spec = _load_spec(args.model)
    system, _ = build_model(spec)
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 0x7E)))
    out = []
    for index in range(args.tuples):
        xs = [system.random_element(rng, parity="even")
              for _ in range(args.degree + 1)]
        entry = {"degree": args.degree, "tuple_index": index}
        try:
            if args.quadrature is not None and args.degree % 2 == 0:
                kind, num = parse_quadrature(args.quadrature)
                val, err = _tau_by_quadrature(system, args.degree, xs,
                                              kind, num, args.seed)
                entry["estimate"] = [val.real, val.imag]
                entry["quadrature_error"] = err
            val = tau_eval(system, args.degree, xs)
            entry["value"] = [val.real, val.imag]
        except ChainBudgetExceeded as exc:
            entry["error"] = str(exc)
        out.append(entry)
    text = json.dumps({"schema": "skms-tau/1", "model_digest": model_digest(spec),
                       "evaluations": out}, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)
    return 0


def _resolve_perturbation(spec, system, args):
    _, pert = build_model(spec)
    if pert is None:
        from .models import _build_perturbation
        pert = _build_perturbation(default_perturbation_spec(_config(args)),
                                   system.grading, spec.p, spec.q)
    return pert


def _cmd_perturb_sweep(args):
    spec = _load_spec(args.model)
    system, _ = build_model(spec)
    pert = _resolve_perturbation(spec, system, args)
    digest = model_digest(spec)
    tol = args.tol if args.tol is not None else 1e-10
    reports = list(witten_invariance_check(system, pert, grid=args.grid,
                                           tol=tol, seed=args.seed,
                                           model_digest=digest))
    reports += lipschitz_check(system, pert, samples=50, seed=args.seed,
                               model_digest=digest)
    for r_value in (0.0, 0.5, 1.0):
        ctx = PerturbedContext(system, pert, r_value)
        for row in skms_check_perturbed(ctx, samples=10, tol=max(tol, 1e-9),
                                        seed=args.seed, model_digest=digest):
            reports.append(make_report(
                "%s@r=%s" % (row.identity_name, r_value), row.paper_anchor,
                row.samples, row.max_residual, row.tolerance, seed=row.seed,
                model_digest=row.model_digest))
    return _finish(reports, args)


def _cmd_homotopy_check(args):
    spec = _load_spec(args.model)
    system, _ = build_model(spec)
    pert = _resolve_perturbation(spec, system, args)
    digest = model_digest(spec)
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 0x48)))
    xs = [as_matrix(system.random_element(rng, parity="even"))
          for _ in range(args.degree + 1)]
    hs = tuple(float(h) for h in args.steps.split(","))
    reports = homotopy_check(system, pert, args.degree, xs, r=args.r, hs=hs,
                             seed=args.seed, model_digest=digest)
    reports += endpoint_transgression_check(
        system, pert, args.degree, xs,
        tol=args.tol if args.tol is not None else 1e-6,
        seed=args.seed, model_digest=digest)
    return _finish(reports, args)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="skms",
        description="numerical workbench for graded KMS functionals and "
                    "their cyclic cocycles")
    sub = parser.add_subparsers(dest="command", required=True)

    model = sub.add_parser("model", help="generate or validate model files")
    model_sub = model.add_subparsers(dest="model_command", required=True)
    gen = model_sub.add_parser("gen")
    gen.add_argument("--kind", choices=("RectangularBlock", "RandomGraded"),
                     default="RectangularBlock")
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--q", type=int, required=True)
    gen.add_argument("--scale", type=float, default=None)
    gen.add_argument("--perturb-seed", type=int, default=None)
    gen.add_argument("--perturb-scale", type=float, default=None)
    _add_common(gen)
    gen.set_defaults(func=_cmd_model_gen)
    val = model_sub.add_parser("validate")
    val.add_argument("model")
    _add_common(val)
    val.set_defaults(func=_cmd_model_validate)

    verify = sub.add_parser("verify", help="run a verification suite")
    verify.add_argument("suite", choices=SUITES + tuple(s.lower() for s in SUITES))
    verify.add_argument("--model", required=True)
    _add_common(verify)
    verify.set_defaults(func=_cmd_verify)

    tau = sub.add_parser("tau", help="evaluate the cocycle on seeded tuples")
    tau_sub = tau.add_subparsers(dest="tau_command", required=True)
    tau_eval_p = tau_sub.add_parser("eval")
    tau_eval_p.add_argument("--model", required=True)
    tau_eval_p.add_argument("--degree", type=int, default=2)
    tau_eval_p.add_argument("--tuples", type=int, default=1)
    _add_common(tau_eval_p)
    tau_eval_p.set_defaults(func=_cmd_tau_eval)

    perturb = sub.add_parser("perturb", help="sweep the coupling parameter")
    perturb_sub = perturb.add_subparsers(dest="perturb_command", required=True)
    sweep = perturb_sub.add_parser("sweep")
    sweep.add_argument("--model", required=True)
    sweep.add_argument("--grid", type=int, default=11)
    _add_common(sweep)
    sweep.set_defaults(func=_cmd_perturb_sweep)

    homotopy = sub.add_parser("homotopy", help="transgression checks")
    homotopy_sub = homotopy.add_subparsers(dest="homotopy_command",
                                           required=True)
    check = homotopy_sub.add_parser("check")
    check.add_argument("--model", required=True)
    check.add_argument("--degree", type=int, default=2)
    check.add_argument("--r", type=float, default=0.5)
    check.add_argument("--steps", default="1e-2,5e-3,2.5e-3")
    _add_common(check)
    check.set_defaults(func=_cmd_homotopy_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
