"""Command-line front end.

Subcommands: `validate` runs the deterministic property suite and writes
its evidence as CSVs (exit code 1 on any failure), the rest drive the
individual studies. A flat key=value config file can override any flag
default; explicit flags still win.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from fouriernet.cplx import embed, extract
from fouriernet.experiments import (fig1_signals, fit_loglog_slope,
                                    run_fig1, run_scaling_benchmark,
                                    run_scaling_fhn, truncation_bound,
                                    write_csv)
from fouriernet.periodization import fold, hs_norm
from fouriernet.problems import (FHNConfig, benchmark_eval, fhn_solve,
                                 save_trajectory)
from fouriernet.synthesis import (DyadicGrid, build_F_omega, build_Psi,
                                  build_S_m, build_phi_z, mode_frequencies)
from fouriernet.training import (TrainConfig, frozen_decoder, init_he,
                                 loss_and_grad, mlp_dims, pack_params,
                                 unpack_params)

__all__ = ["main"]


def _run_complex(net, z):
    return extract(net.graph.forward(embed(np.asarray(z, dtype=complex))))


def _validate_synthesis(k_list, m_list, seed, trials=20):
    """Constructed networks against direct summation; rows (net,k,m,err)."""
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for k in k_list:
        nodes = DyadicGrid(k).nodes
        for m in m_list:
            errs = {"phi_z": 0.0, "F_omega": 0.0, "S_m": 0.0}
            for _ in range(trials):
                z = complex(rng.standard_normal(), rng.standard_normal())
                w = rng.standard_normal(2 ** (k - 1)) \
                    + 1j * rng.standard_normal(2 ** (k - 1))
                got = _run_complex(build_phi_z(k, z), w)
                want = np.empty(2 ** k, dtype=complex)
                want[0::2], want[1::2] = w, z * w
                errs["phi_z"] = max(errs["phi_z"],
                                    np.abs(got - want).max()
                                    / np.abs(w).sum())
                omega = float(rng.uniform(-4 * np.pi, 4 * np.pi))
                w0 = complex(rng.standard_normal(), rng.standard_normal())
                got = _run_complex(build_F_omega(k, omega), [w0])
                want = w0 * np.exp(1j * omega * nodes[:-1])
                errs["F_omega"] = max(errs["F_omega"],
                                      np.abs(got - want).max() / abs(w0))
                zv = rng.standard_normal(2 * m + 1) \
                    + 1j * rng.standard_normal(2 * m + 1)
                got = _run_complex(build_S_m(k, m), zv)
                want = np.exp(2j * np.pi * np.outer(
                    nodes, mode_frequencies(m))) @ zv
                errs["S_m"] = max(errs["S_m"],
                                  np.abs(got - want).max()
                                  / np.abs(zv).sum())
            for net, err in sorted(errs.items()):
                rows.append((net, k, m, float(err)))
                worst = max(worst, err)
    return worst <= 1e-10, rows, f"max rel err {worst:.3g}"


def _validate_decay(m_list, k_list):
    """Truncation errors against the analytic ceiling, plus monotonicity."""
    rows = run_fig1(m_list=m_list, k_list=k_list)
    norms = {}
    for name, (signal, s) in sorted(fig1_signals().items()):
        norms[name] = hs_norm(fold(signal), s, check=(s == 1))
    ok = True
    out = []
    for r in rows:
        bound = truncation_bound(r["s"], r["m"], norms[r["signal"]]) * 1.05
        ok = ok and r["error"] <= bound
        out.append((r["signal"], r["s"], r["k"], r["m"], r["error"], bound))
    for name in norms:
        for k in k_list:
            errs = [r["error"] for r in rows
                    if r["signal"] == name and r["k"] == k]
            ok = ok and all(b <= a * 1.05 for a, b in zip(errs, errs[1:]))
    return ok, out, f"{len(out)} cells against the shifted-series ceiling"


def _validate_lipschitz(seed, pairs=500, k=5, m=8):
    rng = np.random.default_rng(seed)
    net = build_Psi(k, m).graph
    worst = 0.0
    for _ in range(pairs):
        a = rng.standard_normal(2 * m + 1) + 1j * rng.standard_normal(2 * m + 1)
        b = a + 0.1 * (rng.standard_normal(2 * m + 1)
                       + 1j * rng.standard_normal(2 * m + 1))
        gap = np.abs(net.forward(embed(a)) - net.forward(embed(b))).max()
        worst = max(worst, gap / np.abs(a - b).sum())
    return worst <= 1.0 + 1e-12, [(pairs, k, m, float(worst))], \
        f"max |gap|/l1 {worst:.6f}"


def _validate_periodization(seed, trials=5):
    """Fold junction smoothness and dyadic fidelity on random signals."""
    from fouriernet.periodization import SobolevSignal

    rng = np.random.default_rng(seed)
    rows = []
    ok = True
    for trial in range(trials):
        s = int(rng.integers(1, 4))
        coeffs = rng.standard_normal(4)
        kink = float(rng.uniform(0.2, 0.8))
        poly = np.polynomial.Polynomial(coeffs)
        derivs = [poly.deriv(d) for d in range(1, 4)]

        def f(x, poly=poly, kink=kink):
            return poly(x) + np.abs(x - kink) ** 3

        def df(x, d, derivs=derivs, kink=kink):
            tail = {1: lambda t: 3 * t ** 2 * np.sign(t),
                    2: lambda t: 6 * np.abs(t),
                    3: lambda t: 6 * np.sign(t)}[d](x - kink)
            return derivs[d - 1](x) + tail

        signal = SobolevSignal(f, [lambda x, d=d: df(x, d)
                                   for d in range(1, s + 1)],
                               smoothness=s, kinks=[kink])
        tilde = fold(signal)
        gap = 0.0
        for d in range(s):
            for x0 in (0.5, 1.0):
                left = _one_sided(tilde, x0 if x0 < 1 else 1.0, -1, d)
                right = _one_sided(tilde, x0 % 1.0, +1, d)
                gap = max(gap, abs(left - right))
        nodes = DyadicGrid(6).nodes
        dyadic = float(np.max(np.abs(tilde((nodes + 1.0) / 2.0)
                                     - signal(nodes))))
        ok = ok and gap <= 1e-4 and dyadic == 0.0
        rows.append((trial, s, float(gap), dyadic))
    return ok, rows, f"{trials} random kinked signals"


def _one_sided(fn, x0, sign, order, step=1e-3, points=6):
    """Interpolatory one-sided derivative, exact on low-degree branches."""
    offsets = sign * step * np.arange(points)
    rhs = np.zeros(points)
    rhs[order] = math.factorial(order)
    weights = np.linalg.solve(np.vander(offsets, increasing=True).T, rhs)
    return float(weights @ fn(np.clip(x0 + offsets, 0.0, 1.0)))


def _validate_fhn():
    rows = []
    quiet = FHNConfig(level=5, forcing_amplitude=0.0, final_time=0.1,
                      dt=5e-3)
    traj = fhn_solve(0.02, quiet)
    rest = float(np.abs(traj.u).max() + np.abs(traj.w).max())
    rows.append(("zero_forcing_max", rest))
    grid = DyadicGrid(5)
    bench = float(benchmark_eval((0.5, 1.0, 1.0), grid)[-1])
    rows.append(("benchmark_right_endpoint", bench))
    steeps = []
    for mu in (0.005, 0.05):
        traj = fhn_solve(mu, FHNConfig(level=7))
        du = np.abs(np.diff(traj.u, axis=1)).max() * (2 ** 7)
        steeps.append(du)
        rows.append((f"front_steepness_mu_{mu:g}", float(du)))
    ok = rest == 0.0 and abs(bench - 0.04598493014643029) < 1e-15 \
        and steeps[0] > steeps[1]
    return ok, rows, "fixed point, closed-form sample, front sharpening"


def _validate_gradient(seed):
    rows = []
    ok = True
    for k, m, width, depth in ((4, 2, 5, 3), (5, 3, 4, 2)):
        decoder = frozen_decoder(k, m)
        dims = mlp_dims(2, width, depth, m)
        params = init_he(dims, seed)
        rng = np.random.default_rng(seed + 1)
        x = rng.uniform(size=(12, 2))
        u = rng.standard_normal((12, decoder.v.shape[0]))
        _, grad = loss_and_grad(params, decoder, x, u)
        flat = pack_params(params)
        gvec = pack_params(grad)
        worst = 0.0
        for idx in rng.choice(len(flat), size=25, replace=False):
            h = 1e-6
            up, down = flat.copy(), flat.copy()
            up[idx] += h
            down[idx] -= h
            fu, _ = loss_and_grad(unpack_params(up, params), decoder, x, u)
            fd, _ = loss_and_grad(unpack_params(down, params), decoder, x, u)
            num = (fu - fd) / (2 * h)
            worst = max(worst, abs(num - gvec[idx]) / max(1.0, abs(num)))
        ok = ok and worst <= 1e-5
        rows.append((f"k{k}_m{m}_w{width}_L{depth}", float(worst)))
    return ok, rows, "backprop vs central differences"


def _cmd_validate(args):
    os.makedirs(args.out, exist_ok=True)
    k_list = tuple(args.k) if args.k else (1, 2, 3, 4, 5, 6)
    m_list = tuple(args.m_list) if args.m_list else (1, 2, 4, 8)
    decay_m = tuple(m for m in (4, 8, 16, 32, 64)) if not args.m_list \
        else tuple(sorted(set(args.m_list)))
    sections = [
        ("synthesis", ("net", "k", "m", "max_rel_err"),
         lambda: _validate_synthesis(k_list, m_list, args.seed)),
        ("decay", ("signal", "s", "k", "m", "error", "bound"),
         lambda: _validate_decay(decay_m, (5, 6))),
        ("lipschitz", ("pairs", "k", "m", "max_ratio"),
         lambda: _validate_lipschitz(args.seed)),
        ("periodization", ("trial", "s", "junction_gap", "dyadic_gap"),
         lambda: _validate_periodization(args.seed)),
        ("fhn", ("check", "value"), _validate_fhn),
        ("gradient", ("arch", "rel_err"), lambda: _validate_gradient(args.seed)),
    ]
    failed = []
    for name, header, runner in sections:
        ok, rows, detail = runner()
        write_csv(os.path.join(args.out, f"validate_{name}.csv"),
                  header, rows)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failed.append(name)
    if failed:
        print(f"validation failed: {', '.join(failed)}")
        return 1
    print(f"all sections passed; evidence in {args.out}")
    return 0


def _cmd_fig1(args):
    os.makedirs(args.out, exist_ok=True)
    rows = run_fig1(m_list=args.m_list, k_list=args.k, out_dir=args.out,
                    plot=args.plot)
    for name in sorted(set(r["signal"] for r in rows)):
        pts = [(r["m"], r["error"]) for r in rows
               if r["signal"] == name and r["k"] == args.k[0]]
        slope = fit_loglog_slope([p[0] for p in pts], [p[1] for p in pts])
        print(f"{name}: fitted slope {slope:.3f} at k={args.k[0]}")
    print(f"{len(rows)} rows -> {args.out}/fig1.csv")
    return 0


def _parse_triple(text):
    parts = [int(p) for p in str(text).replace(";", ",").split(",") if p]
    if len(parts) != 3:
        raise ValueError(f"expected m,w,L triple, got {text!r}")
    return tuple(parts)


def _cmd_bench_scale(args):
    os.makedirs(args.out, exist_ok=True)
    config = TrainConfig(restarts=args.restarts, seed=args.seed,
                         max_iter=args.max_iter)
    rows = run_scaling_benchmark(initial=_parse_triple(args.initial),
                                 k_list=tuple(args.k), levels=args.levels,
                                 config=config, out_dir=args.out)
    for r in rows:
        print(f"k={r['k']} level={r['level']} (m={r['m']},w={r['w']},"
              f"L={r['L']}) weights={r['active_weights']} "
              f"E={r['E']:.4g} [{r['wall_s']:.1f}s]")
    return 0


def _cmd_fhn_solve(args):
    os.makedirs(args.out, exist_ok=True)
    config = FHNConfig(level=args.k[0] if args.k else 7)
    for mu in args.mu:
        traj = fhn_solve(mu, config)
        stem = os.path.join(args.out, f"fhn_mu{mu:g}")
        save_trajectory(traj, f"{stem}_u.csv", f"{stem}_w.csv")
        print(f"mu={mu:g}: |u|_max={np.abs(traj.u).max():.4f} -> {stem}_*.csv")
    return 0


def _cmd_fhn_scale(args):
    os.makedirs(args.out, exist_ok=True)
    config = TrainConfig(restarts=args.restarts, seed=args.seed,
                         max_iter=args.max_iter)
    initials = tuple(_parse_triple(t) for t in args.initials.split(";"))
    rows = run_scaling_fhn(initials=initials, levels=args.levels,
                           config=config, out_dir=args.out)
    for r in rows:
        print(f"guess={r['guess']} level={r['level']} (m={r['m']},"
              f"w={r['w']},L={r['L']}) E={r['E']:.4g} [{r['wall_s']:.1f}s]")
    return 0


def _coerce(text: str):
    t = text.strip()
    if t.lower() in ("true", "false"):
        return t.lower() == "true"
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def _load_config(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fouriernet",
        description="Spectral synthesis networks: validation and studies.")
    parser.add_argument("--config", help="flat key=value file of defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    subparsers = {}

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        subparsers[name] = p
        return p

    p = add("validate", _cmd_validate,
            help="deterministic property suite with CSV evidence")
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--m-list", type=int, nargs="+")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/validate")

    p = add("fig1", _cmd_fig1, help="mode-truncation decay study")
    p.add_argument("--k", type=int, nargs="+", default=[5, 6, 7])
    p.add_argument("--m-list", type=int, nargs="+",
                   default=[4, 8, 16, 32, 64, 128, 256, 512])
    p.add_argument("--out", default="runs/fig1")
    p.add_argument("--plot", action="store_true")

    p = add("bench-scale", _cmd_bench_scale,
            help="architecture scaling on the closed-form family")
    p.add_argument("--k", type=int, nargs="+", default=[5, 6, 7])
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--initial", default="5,3,4",
                   help="m,w,L start (text variant: 5,4,3)")
    p.add_argument("--out", default="runs/bench")

    p = add("fhn-solve", _cmd_fhn_solve,
            help="solve the excitable-medium system, dump trajectories")
    p.add_argument("--mu", type=float, nargs="+", default=[0.05])
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--out", default="runs/fhn")

    p = add("fhn-scale", _cmd_fhn_scale,
            help="architecture scaling on excitable-medium snapshots")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--initials", default="1,3,3;1,2,4",
                   help="semicolon-separated m,w,L starts")
    p.add_argument("--out", default="runs/fhn_scale")

    return parser, subparsers


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    config_path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path:
        overrides = {k: _coerce(v)
                     for k, v in _load_config(config_path).items()}
        for p in subparsers.values():
            known = {a.dest for a in p._actions}
            scoped = {k: v for k, v in overrides.items() if k in known}
            list_keys = {k for k in scoped
                         if k in ("k", "m_list", "mu")
                         and not isinstance(scoped[k], (list, tuple))}
            for k in list_keys:
                scoped[k] = [_coerce(part) for part in
                             str(scoped[k]).split(",") if part]
            p.set_defaults(**scoped)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
