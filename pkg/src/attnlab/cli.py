"""``attnlab`` command line.

Exit codes: 0 success, 1 a check failed, 2 bad input. Every subcommand
accepts ``--config file.json`` whose keys are the long option names (with
underscores); flags given on the command line win over the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import _backend
from .attention import SCHEMES, HeadParams, attention_forward, dnas_weights, hnas_weights, unas_weights
from .collapse_sim import simulate_2d, sweep_ratio, two_gaussians
from .diagnostics import DEFAULT_BINS, DEFAULT_EPSILON, analyze
from .gmm_lab import (LOWER_AS_CENTERS, UPPER_AS_CENTERS, GmmConfig, fixed_point_dnas, fixed_point_unas,
                      log_likelihood, responsibilities)
from .gradients import gradcheck_suite
from .sinkhorn import DEFAULT_MAX_ITERS, DEFAULT_TOL, sinkhorn_run
from .tensor_core import mask_from_json, matrix_from_json, matrix_to_json


class InputError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def read_matrix(path):
    try:
        return matrix_from_json(read_json(path))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _logits_source(args):
    if (args.logits is None) == (args.random is None):
        raise InputError("give exactly one of --logits or --random")
    if args.logits is not None:
        return read_matrix(args.logits)
    if args.random < 1:
        raise InputError(f"--random must be >= 1, got {args.random}")
    rng = np.random.default_rng(args.seed)
    return args.scale * rng.standard_normal((args.random, args.random))


def _weights(z, scheme, u, mask=None):
    if scheme == "unas":
        return unas_weights(z, mask)
    if scheme == "dnas":
        return dnas_weights(z, mask)
    return hnas_weights(z, u, mask)


def _check_u(u):
    if not 0.0 <= u <= 1.0:
        raise InputError(f"--u must lie in [0, 1], got {u}")


def _read_params(path, default_u):
    obj = read_json(path)
    try:
        heads = obj["heads"]
        return [HeadParams.with_u(matrix_from_json(h["Q"]), matrix_from_json(h["K"]),
                                  matrix_from_json(h["V"]), float(h.get("u", default_u))) for h in heads]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad params file ({exc})") from None


def cmd_attn(args):
    _check_u(args.u)
    mask = None
    if args.x is not None:
        if args.logits is not None or args.random is not None:
            raise InputError("--x cannot be combined with --logits or --random")
        if args.params is None:
            raise InputError("--x needs --params")
        x = read_matrix(args.x)
        params = _read_params(args.params, args.u)
        if args.mask is not None:
            mask = mask_from_json(read_json(args.mask))
        out = attention_forward(x, params, args.scheme, mask)
        weights = out.weights
        if args.features_out:
            write_json(args.features_out, matrix_to_json(out.output))
    else:
        z = _logits_source(args)
        if args.mask is not None:
            mask = mask_from_json(read_json(args.mask))
        weights = _weights(z, args.scheme, args.u, mask)[None]
        if args.features_out:
            raise InputError("--features-out needs --x and --params")
    if len(weights) == 1:
        write_json(args.out, matrix_to_json(weights[0]))
    else:
        write_json(args.out, {"heads": [matrix_to_json(w) for w in weights]})
    return 0


def cmd_sinkhorn(args):
    z = _logits_source(args)
    rep = sinkhorn_run(z, args.max_iters, args.tol)
    write_json(args.out, {**matrix_to_json(rep.final), "iterations": rep.iterations, "converged": rep.converged})
    if args.history:
        write_csv(args.history, ["iter", "residual"], enumerate(rep.residual_history, start=1))
    print(f"iterations={rep.iterations} residual={rep.residual_history[-1]:.3e} converged={rep.converged}")
    return 0


def cmd_diagnose(args):
    if args.weights is not None:
        if args.logits is not None or args.random is not None:
            raise InputError("--weights cannot be combined with --logits or --random")
        p = read_matrix(args.weights)
    else:
        _check_u(args.u)
        p = _weights(_logits_source(args), args.scheme, args.u)
    rep = analyze(p, args.epsilon, args.bins)
    write_json(args.report, rep.to_json())
    if args.histogram:
        edges, counts = rep.log_mass_histogram
        write_csv(args.histogram, ["bin_left", "bin_right", "count"], zip(edges[:-1], edges[1:], counts))
    n = int(np.sum(rep.explained_away))
    print(f"explained_away={n}/{len(rep.column_mass)} min_mass={rep.column_mass.min():.3e} "
          f"bound_ok={rep.theorem_bound_ok}")
    return 0


def cmd_gmm(args):
    if args.q is not None or args.k is not None:
        if args.q is None or args.k is None or args.random is not None:
            raise InputError("give both --q and --k, or --random alone")
        q, k = read_matrix(args.q), read_matrix(args.k)
    else:
        if args.random is None:
            raise InputError("give --q and --k, or --random")
        rng = np.random.default_rng(args.seed)
        q = args.scale * rng.standard_normal((args.random, args.dim))
        k = args.scale * rng.standard_normal((args.random, args.dim))
    if args.steps < 0:
        raise InputError(f"--steps must be >= 0, got {args.steps}")
    direction = LOWER_AS_CENTERS if args.scheme == "unas" else UPPER_AS_CENTERS
    update = fixed_point_unas if args.scheme == "unas" else fixed_point_dnas
    try:
        cfg = GmmConfig.for_attention(q, k, direction)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    ll = [log_likelihood(cfg)]
    resp = responsibilities(cfg)
    cur = q
    for _ in range(args.steps):
        cur = update(cur, k)
        ll.append(log_likelihood(GmmConfig.for_attention(cur, k, direction)))
    write_json(args.out, {
        "direction": direction,
        "responsibilities": matrix_to_json(resp),
        "q_final": matrix_to_json(cur),
        "log_likelihood": ll,
    })
    return 0


def _floats(text):
    if isinstance(text, (list, tuple)):
        text = ",".join(str(t) for t in text)
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_collapse(args):
    if args.mode == "analytic":
        if args.a < 0:
            raise InputError(f"--a must be >= 0, got {args.a}")
        r_values = _floats(args.r_values) if args.r_values else list(np.logspace(-2, 2, 41))
        if any(r <= 0 for r in r_values):
            raise InputError("mass ratios must be positive")
        if not args.out:
            raise InputError("analytic mode needs --out")
        write_csv(args.out, ["r", "unas_dist", "dnas_dist"], sweep_ratio(args.a, r_values))
        return 0
    if args.n0 < 0 or args.n1 < 0 or args.n0 + args.n1 < 1:
        raise InputError("need at least one point")
    if args.scheme not in ("unas", "dnas"):
        raise InputError("collapse simulation supports --scheme unas or dnas")
    pts, labels = two_gaussians(args.n0, args.n1, args.seed)
    traj = simulate_2d(pts, labels, args.steps, args.scheme)
    if args.trajectory:
        rows = ((t, i, int(labels[i]), s[i, 0], s[i, 1]) for t, s in enumerate(traj.snapshots)
                for i in range(len(labels)))
        write_csv(args.trajectory, ["step", "point_id", "label", "x", "y"], rows)
    if args.metrics:
        rows = ((t, b, sp[0], sp[1]) for t, (b, sp) in enumerate(zip(traj.between_dist, traj.spread)))
        write_csv(args.metrics, ["step", "between_dist", "spread_0", "spread_1"], rows)
    print(f"scheme={args.scheme} between_dist={traj.between_dist[-1]:.6g} diameter={traj.diameter():.6g}")
    return 0


def cmd_gradcheck(args):
    schemes = tuple(args.schemes.split(","))
    for s in schemes:
        if s not in SCHEMES:
            raise InputError(f"unknown scheme {s!r}")
    if args.H is not None and args.D is not None and args.D % args.H:
        raise InputError(f"--D {args.D} not divisible by --H {args.H}")
    if args.H is not None and args.D is None:
        raise InputError("--H needs --D")
    res = gradcheck_suite(args.instances, args.seed, schemes, args.S, args.D, args.H,
                          corrupt=0.1 if args.corrupt else 0.0)
    ok = True
    for s in schemes:
        passed = res[s] < args.threshold
        ok &= passed
        print(f"{s}: max_rel_err={res[s]:.3e} {'PASS' if passed else 'FAIL'}")
    if args.S == 1:
        print("note: S=1, attention weights are constant so query/key gradients are zero")
    return 0 if ok else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults")
    common.add_argument("--seed", type=int, default=0)

    logits = argparse.ArgumentParser(add_help=False)
    logits.add_argument("--logits", help="logit matrix JSON")
    logits.add_argument("--random", type=int, help="use a random N x N logit matrix")
    logits.add_argument("--scale", type=float, default=1.0, help="std of random logits")

    parser = argparse.ArgumentParser(prog="attnlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s 0.1.0 ({_backend.NAME} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("attn", parents=[common, logits], help="attention weights / outputs")
    p.add_argument("--scheme", choices=SCHEMES, default="unas")
    p.add_argument("--u", type=float, default=0.5, help="hybrid weight for hnas")
    p.add_argument("--x", help="input features JSON (S x D)")
    p.add_argument("--params", help='head parameters JSON: {"heads": [{"Q","K","V","u"}]}')
    p.add_argument("--mask", help="mask JSON (matrix schema, nonzero = keep)")
    p.add_argument("--out", help="weights JSON (required)")
    p.add_argument("--features-out", help="output features JSON")
    p.set_defaults(func=cmd_attn)
    subs["attn"] = p

    p = sub.add_parser("sinkhorn", parents=[common, logits], help="Sinkhorn iterations on exp(logits)")
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--out", help="final matrix JSON (required)")
    p.add_argument("--history", help="residual history CSV")
    p.set_defaults(func=cmd_sinkhorn)
    subs["sinkhorn"] = p

    p = sub.add_parser("diagnose", parents=[common, logits], help="explaining-away report")
    p.add_argument("--weights", help="row-stochastic attention matrix JSON")
    p.add_argument("--scheme", choices=SCHEMES, default="unas")
    p.add_argument("--u", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--report", help="report JSON (required)")
    p.add_argument("--histogram", help="log column-mass histogram CSV")
    p.set_defaults(func=cmd_diagnose)
    subs["diagnose"] = p

    p = sub.add_parser("gmm", parents=[common], help="GMM responsibilities and fixed-point steps")
    p.add_argument("--q", help="queries JSON")
    p.add_argument("--k", help="keys JSON")
    p.add_argument("--random", type=int, help="random N queries and keys")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--scheme", choices=("unas", "dnas"), default="unas")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--out", help="result JSON (required)")
    p.set_defaults(func=cmd_gmm)
    subs["gmm"] = p

    p = sub.add_parser("collapse", parents=[common], help="mode-collapse analytics and 2-D simulation")
    p.add_argument("--mode", choices=("analytic", "sim"), default="analytic")
    p.add_argument("--a", type=float, default=1.0, help="half distance between 1-D clusters")
    p.add_argument("--r-values", help="comma-separated mass ratios (default: 41 log-spaced in [0.01, 100])")
    p.add_argument("--out", help="analytic sweep CSV")
    p.add_argument("--n0", type=int, default=500)
    p.add_argument("--n1", type=int, default=50)
    p.add_argument("--steps", type=int, default=4)
    p.add_argument("--scheme", default="unas")
    p.add_argument("--trajectory", help="trajectory CSV")
    p.add_argument("--metrics", help="per-step metrics CSV")
    p.set_defaults(func=cmd_collapse)
    subs["collapse"] = p

    p = sub.add_parser("gradcheck", parents=[common], help="analytic vs finite-difference gradients")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--schemes", default="unas,dnas,hnas")
    p.add_argument("--threshold", type=float, default=1e-5)
    p.add_argument("--S", type=int)
    p.add_argument("--D", type=int)
    p.add_argument("--H", type=int)
    p.add_argument("--corrupt", action="store_true", help="scale analytic gradients by 1.1 (harness check)")
    p.set_defaults(func=cmd_gradcheck)
    subs["gradcheck"] = p
    return parser, subs


_REQUIRED = {"attn": "out", "sinkhorn": "out", "diagnose": "report", "gmm": "out"}


def _apply_config(parser, subs, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = read_json(args.config)
    if not isinstance(cfg, dict):
        raise InputError(f"{args.config}: config must be a JSON object")
    sp = subs[args.command]
    known = {a.dest for a in sp._actions} - {"help", "config"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise InputError(f"{args.config}: unknown option(s) {', '.join(unknown)}")
    sp.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None):
    parser, subs = build_parser()
    try:
        args = _apply_config(parser, subs, argv)
        need = _REQUIRED.get(args.command)
        if need and not getattr(args, need):
            raise InputError(f"{args.command} needs --{need}")
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:
        print(f"attnlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
