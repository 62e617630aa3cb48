"""Experiment drivers: mode-truncation decay curves and architecture scaling.

Three studies, mirroring how the construction is validated end to end:

* decay of max_j |f(x_j) - (decoded T f)_j| as the mode count m grows, for a
  kinked H^1 signal and a smoother H^2 one, across several grid levels;
* error scaling of trained surrogates for the closed-form benchmark family
  when the architecture is grown by the m/width/depth rule;
* the same scaling study on FitzHugh-Nagumo snapshot data, from two
  different initial architectures.

Every emitted CSV/SVG/manifest is deterministic given seeds; wall-clock
columns are the only exception and only appear next to trained quantities.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from fouriernet import __version__
from fouriernet.cplx import embed
from fouriernet.layers import count_active_weights
from fouriernet.periodization import (SobolevSignal, fold, hs_norm,
                                      operator_T)
from fouriernet.problems import (BENCHMARK_BOX, FHN_MU_RANGE, FHNConfig,
                                 benchmark_eval, fhn_dataset,
                                 sample_parameters)
from fouriernet.synthesis import DyadicGrid, build_Psi
from fouriernet.training import (TrainConfig, frozen_decoder, mlp_dims,
                                 test_error, train_ensemble)

__all__ = [
    "ArchSpec",
    "scale_architecture",
    "choose_m",
    "fig1_signals",
    "run_fig1",
    "truncation_bound",
    "fit_loglog_slope",
    "benchmark_architectures",
    "fhn_architectures",
    "run_scaling_benchmark",
    "run_scaling_fhn",
    "emit_svg",
    "write_manifest",
    "write_csv",
]


@dataclass(frozen=True)
class ArchSpec:
    m: int
    width: int
    depth: int
    p: int
    level: int
    slope: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if min(self.m, self.width, self.depth, self.p, self.level) < 1:
            raise ValueError("architecture sizes must be positive")

    @property
    def dims(self):
        return mlp_dims(self.p, self.width, self.depth, self.m)


def scale_architecture(spec: ArchSpec, s: int, r, l: int) -> ArchSpec:
    """One refinement step: m and width stretched by the rate-matched
    factors 2^{2/(2s-1)} and 2^{p/(r+1)+2/(2s-1)} (rounded up, never
    under-provisioning), depth deepened by l. r may be math.inf, which
    drops the p/(r+1) term."""
    if s < 1:
        raise ValueError("s must be >= 1")
    r = float(r)
    m_factor = 2.0 ** (2.0 / (2 * s - 1))
    w_factor = 2.0 ** (spec.p / (r + 1.0) + 2.0 / (2 * s - 1))
    return replace(spec,
                   m=math.ceil(spec.m * m_factor),
                   width=math.ceil(spec.width * w_factor),
                   depth=spec.depth + l)


def choose_m(epsilon: float, s: int, big_m: float = 1.0, c: float = 1.0) -> int:
    """Smallest mode count covering accuracy epsilon at smoothness s."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    if s < 1 or big_m <= 0.0 or c <= 0.0:
        raise ValueError("s, M, c must be positive")
    return math.ceil((epsilon / 2.0) ** (-2.0 / (2 * s - 1)) * big_m * c)


def fig1_signals():
    """The two decay-study signals, keyed by name: (signal, smoothness)."""
    kinked = SobolevSignal(lambda x: np.abs(x - 0.2),
                           [lambda x: np.sign(x - 0.2)],
                           smoothness=1, kinks=[0.2])
    rough = SobolevSignal(
        lambda x: x ** 1.5,
        [lambda x: 1.5 * np.sqrt(x),
         lambda x: 0.75 / np.sqrt(np.maximum(x, 1e-300))],
        smoothness=2)
    return {"abs_shift": (kinked, 1), "x_pow_3_2": (rough, 2)}


def truncation_bound(s: int, m: int, fold_norm: float) -> float:
    """sqrt(2/(2s-1)) m^{1/2-s} times the fold's Sobolev norm."""
    return math.sqrt(2.0 / (2 * s - 1)) * m ** (0.5 - s) * fold_norm


def run_fig1(m_list=(4, 8, 16, 32, 64, 128, 256, 512), k_list=(5, 6, 7),
             out_dir=None, plot: bool = False):
    """Truncation error of the synthesized series at the grid nodes.

    Coefficients are computed once per signal at max(m_list) and sliced;
    every reported error goes through the constructed network, not the
    scalar series. Returns rows as dicts with keys signal, s, k, m, error.
    """
    m_list = sorted(set(int(m) for m in m_list))
    k_list = sorted(set(int(k) for k in k_list))
    if m_list[0] < 1:
        raise ValueError("mode counts must be >= 1")
    rows = []
    for name, (signal, s) in sorted(fig1_signals().items()):
        coeffs = operator_T(signal, m_list[-1])
        for k in k_list:
            grid = DyadicGrid(k)
            target = signal(grid.nodes)
            for m in m_list:
                net = build_Psi(k, m)
                values = net.graph.forward(embed(coeffs.truncated(m).z))[0]
                err = float(np.abs(values - target).max())
                rows.append({"signal": name, "s": s, "k": k, "m": m,
                             "error": err})
    if out_dir is not None:
        write_csv(f"{out_dir}/fig1.csv", ("signal", "s", "k", "m", "error"),
                  [(r["signal"], r["s"], r["k"], r["m"], r["error"])
                   for r in rows])
        if plot:
            series = []
            for name, (_, s) in sorted(fig1_signals().items()):
                for k in k_list:
                    pts = [(r["m"], r["error"]) for r in rows
                           if r["signal"] == name and r["k"] == k]
                    series.append((f"{name} k={k}",
                                   [p[0] for p in pts], [p[1] for p in pts]))
            emit_svg(series, f"{out_dir}/fig1.svg",
                     guides=(-0.5, -1.5), xlabel="m", ylabel="max error")
    return rows


def fit_loglog_slope(xs, ys) -> float:
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    if len(xs) < 2:
        return float("nan")
    return float(np.polyfit(xs, ys, 1)[0])


def benchmark_architectures(initial=(5, 3, 4), levels: int = 3, l: int = 2,
                            level: int = 7):
    """The architecture ladder of the closed-form study: s=3, r=2, p=3."""
    spec = ArchSpec(m=initial[0], width=initial[1], depth=initial[2],
                    p=3, level=level)
    ladder = [spec]
    for _ in range(levels - 1):
        ladder.append(scale_architecture(ladder[-1], s=3, r=2, l=l))
    return ladder


def fhn_architectures(initial, levels: int = 3, l: int = 1, level: int = 7):
    """The snapshot-data ladder: s=1, r=infinite, p=2 (mu and t)."""
    spec = ArchSpec(m=initial[0], width=initial[1], depth=initial[2],
                    p=2, level=level)
    ladder = [spec]
    for _ in range(levels - 1):
        ladder.append(scale_architecture(ladder[-1], s=1, r=math.inf, l=l))
    return ladder


def _normalize(inputs: np.ndarray, box) -> np.ndarray:
    """Affine map of a parameter box onto the unit cube; keeps the head's
    first layer well-scaled regardless of the physical parameter ranges."""
    out = np.array(inputs, dtype=float)
    for j, (lo, hi) in enumerate(box):
        out[:, j] = (out[:, j] - lo) / (hi - lo)
    return out


def _surrogate_weights(dims, decoder_graph_weights: int) -> int:
    dense = sum(a * b + b for a, b in zip(dims, dims[1:]))
    return dense + decoder_graph_weights


def _train_level(spec: ArchSpec, decoder, train_in, train_out, test_in,
                 test_out, config: TrainConfig):
    t0 = time.perf_counter()
    best, results = train_ensemble(spec.dims, decoder, train_in, train_out,
                                   config)
    wall = time.perf_counter() - t0
    err = test_error(best, decoder, test_in, test_out)
    return best, results, err, wall


def run_scaling_benchmark(initial=(5, 3, 4), k_list=(5, 6, 7),
                          levels: int = 3, l: int = 2,
                          config: TrainConfig | None = None,
                          n_train: int = 500, n_test: int = 500,
                          normalize: bool = False, out_dir=None):
    """Grow the architecture over the closed-form family and record E.

    Train/test parameters are fresh uniform draws (seeds offset from the
    config seed so restarts and data never share streams). The regression
    sees raw parameter vectors by default: mapping them onto the unit cube
    flattens the loss landscape enough that the two largest architectures
    land in the same basin on the finest grid, and the size-to-error trend
    disappears. Returns rows: k, level, m, w, L, active_weights, E, seed,
    wall_s.
    """
    if config is None:
        config = TrainConfig(restarts=5, max_iter=5000)
    rows = []
    manifests = []
    for k in k_list:
        grid = DyadicGrid(k)
        train_mu = sample_parameters(BENCHMARK_BOX, n_train, "uniform-random",
                                     seed=10_000 + config.seed)
        test_mu = sample_parameters(BENCHMARK_BOX, n_test, "uniform-random",
                                    seed=20_000 + config.seed)
        train_u = np.array([benchmark_eval(mu, grid) for mu in train_mu])
        test_u = np.array([benchmark_eval(mu, grid) for mu in test_mu])
        if normalize:
            train_in = _normalize(train_mu, BENCHMARK_BOX)
            test_in = _normalize(test_mu, BENCHMARK_BOX)
        else:
            train_in, test_in = train_mu, test_mu
        for j, spec in enumerate(benchmark_architectures(initial, levels, l,
                                                         level=k), start=1):
            decoder = frozen_decoder(k, spec.m)
            best, results, err, wall = _train_level(
                spec, decoder, train_in, train_u, test_in, test_u, config)
            weights = _surrogate_weights(
                spec.dims, count_active_weights(
                    build_Psi(k, spec.m).graph))
            rows.append({"k": k, "level": j, "m": spec.m, "w": spec.width,
                         "L": spec.depth, "active_weights": weights,
                         "E": err, "seed": config.seed, "wall_s": wall})
            manifests.append(_manifest_entries(
                "benchmark", k, j, spec, config, results, err, weights, wall,
                normalize))
    _emit_scaling(rows, manifests, out_dir, "bench_scaling")
    return rows


def run_scaling_fhn(initials=((1, 3, 3), (1, 2, 4)), levels: int = 3,
                    l: int = 1, config: TrainConfig | None = None,
                    fhn_config: FHNConfig | None = None,
                    normalize: bool = True, out_dir=None):
    """The same ladder on FitzHugh-Nagumo snapshots, once per initial guess.

    Inputs are (mu, t) pairs normalized to the unit square by default: the
    raw mu range spans two orders of magnitude less than the time axis, and
    leaving it degenerate stalls every restart. Rows carry a `guess` key;
    CSV emission splits by guess to keep the shared schema.
    """
    if config is None:
        config = TrainConfig(restarts=5, max_iter=5000)
    if fhn_config is None:
        fhn_config = FHNConfig(level=7)
    train, test = fhn_dataset(fhn_config)
    if normalize:
        box = [FHN_MU_RANGE, (0.0, fhn_config.final_time)]
        train_in = _normalize(train.inputs, box)
        test_in = _normalize(test.inputs, box)
    else:
        train_in, test_in = train.inputs, test.inputs
    rows = []
    manifests = []
    for g, initial in enumerate(initials, start=1):
        for j, spec in enumerate(fhn_architectures(initial, levels, l,
                                                   level=fhn_config.level),
                                 start=1):
            decoder = frozen_decoder(fhn_config.level, spec.m)
            best, results, err, wall = _train_level(
                spec, decoder, train_in, train.targets, test_in, test.targets,
                config)
            weights = _surrogate_weights(
                spec.dims, count_active_weights(
                    build_Psi(fhn_config.level, spec.m).graph))
            rows.append({"guess": g, "level": j, "m": spec.m, "w": spec.width,
                         "L": spec.depth, "active_weights": weights,
                         "E": err, "seed": config.seed, "wall_s": wall})
            manifests.append(_manifest_entries(
                f"fhn_guess{g}", fhn_config.level, j, spec, config, results,
                err, weights, wall, normalize))
    if out_dir is not None:
        for g in sorted(set(r["guess"] for r in rows)):
            write_csv(f"{out_dir}/fhn_scaling_guess{g}.csv",
                      ("level", "m", "w", "L", "active_weights", "E", "seed",
                       "wall_s"),
                      [(r["level"], r["m"], r["w"], r["L"],
                        r["active_weights"], r["E"], r["seed"], r["wall_s"])
                       for r in rows if r["guess"] == g])
        for name, entries in manifests:
            write_manifest(f"{out_dir}/{name}.manifest", entries)
        series = []
        for g in sorted(set(r["guess"] for r in rows)):
            pts = [(r["active_weights"], r["E"]) for r in rows
                   if r["guess"] == g]
            series.append((f"guess {g}", [p[0] for p in pts],
                           [p[1] for p in pts]))
        emit_svg(series, f"{out_dir}/fhn_scaling.svg", xlabel="weights",
                 ylabel="E")
    return rows


def _manifest_entries(tag, k, level, spec, config, results, err, weights,
                      wall, normalized):
    entries = {
        "tag": tag, "grid_level": k, "scale_level": level, "m": spec.m,
        "width": spec.width, "depth": spec.depth, "p": spec.p,
        "optimizer": config.optimizer, "max_iter": config.max_iter,
        "restarts": config.restarts, "seed": config.seed,
        "inputs_normalized": "true" if normalized else "false",
        "version": __version__,
        "active_weights": weights, "E": err, "wall_s": wall,
    }
    for i, res in enumerate(results):
        entries[f"restart_{i}_final_loss"] = res.value
        entries[f"restart_{i}_iterations"] = res.iterations
    return f"{tag}_k{k}_level{level}", entries


def _emit_scaling(rows, manifests, out_dir, stem):
    if out_dir is None:
        return
    write_csv(f"{out_dir}/{stem}.csv",
              ("k", "level", "m", "w", "L", "active_weights", "E", "seed",
               "wall_s"),
              [(r["k"], r["level"], r["m"], r["w"], r["L"],
                r["active_weights"], r["E"], r["seed"], r["wall_s"])
               for r in rows])
    for name, entries in manifests:
        write_manifest(f"{out_dir}/{name}.manifest", entries)
    series = []
    for k in sorted(set(r["k"] for r in rows)):
        pts = [(r["active_weights"], r["E"]) for r in rows if r["k"] == k]
        series.append((f"k={k}", [p[0] for p in pts], [p[1] for p in pts]))
    emit_svg(series, f"{out_dir}/{stem}.svg", xlabel="weights", ylabel="E")


def write_csv(path, header, rows) -> None:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.17g}"
        return str(v)

    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_manifest(path, entries: dict) -> None:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.17g}"
        return str(v)

    with open(path, "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={fmt(entries[key])}\n")


_PALETTE = ("#1f6fb2", "#c03a2b", "#2c8c4b", "#8e5bb2", "#b2741f",
            "#3aa6a6", "#7a7a7a", "#b23a86")


def emit_svg(series, path, guides=(), xlabel="x", ylabel="y",
             width: int = 640, height: int = 460) -> None:
    """Log-log plot of (label, xs, ys) series with dashed slope guides.

    Pure text emission with pinned float formatting, so identical inputs
    produce identical bytes.
    """
    series = list(series)
    if not series or any(len(xs) == 0 or len(xs) != len(ys)
                         for _, xs, ys in series):
        raise ValueError("need non-empty, aligned series")
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    if min(all_x) <= 0.0 or min(all_y) <= 0.0:
        raise ValueError("log-log plot needs positive data")
    lx0, lx1 = math.log10(min(all_x)), math.log10(max(all_x))
    ly0, ly1 = math.log10(min(all_y)), math.log10(max(all_y))
    lx1 += 0.05 * max(lx1 - lx0, 0.1)
    lx0 -= 0.05 * max(lx1 - lx0, 0.1)
    ly1 += 0.08 * max(ly1 - ly0, 0.1)
    ly0 -= 0.08 * max(ly1 - ly0, 0.1)
    m_left, m_right, m_top, m_bot = 64, 16, 16, 48

    def px(x):
        return m_left + (math.log10(x) - lx0) / (lx1 - lx0) \
            * (width - m_left - m_right)

    def py(y):
        return height - m_bot - (math.log10(y) - ly0) / (ly1 - ly0) \
            * (height - m_top - m_bot)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" '
           'fill="white"/>',
           f'<rect x="{m_left}" y="{m_top}" '
           f'width="{width - m_left - m_right}" '
           f'height="{height - m_top - m_bot}" fill="none" stroke="#333"/>']
    for t in range(4):
        fx = 10.0 ** (lx0 + (t + 0.5) * (lx1 - lx0) / 4.0)
        fy = 10.0 ** (ly0 + (t + 0.5) * (ly1 - ly0) / 4.0)
        out.append(f'<text x="{px(fx):.2f}" y="{height - m_bot + 16}" '
                   f'font-size="11" text-anchor="middle">{fx:.3g}</text>')
        out.append(f'<text x="{m_left - 6}" y="{py(fy):.2f}" font-size="11" '
                   f'text-anchor="end">{fy:.3g}</text>')
    out.append(f'<text x="{(m_left + width - m_right) // 2}" '
               f'y="{height - 10}" font-size="12" '
               f'text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="14" y="{(m_top + height - m_bot) // 2}" '
               f'font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {(m_top + height - m_bot) // 2})">'
               f'{ylabel}</text>')
    anchor_x, anchor_y = series[0][1][0], series[0][2][0]
    for slope in guides:
        x0, x1 = min(all_x), max(all_x)
        y0 = anchor_y * 2.0 * (x0 / anchor_x) ** slope
        y1 = anchor_y * 2.0 * (x1 / anchor_x) ** slope
        out.append(f'<polyline points="{px(x0):.2f},{py(y0):.2f} '
                   f'{px(x1):.2f},{py(y1):.2f}" fill="none" stroke="#999" '
                   'stroke-dasharray="6,4"/>')
        out.append(f'<text x="{px(x1) - 4:.2f}" y="{py(y1) - 4:.2f}" '
                   f'font-size="10" text-anchor="end" fill="#777">'
                   f'slope {slope:g}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.6" '
                       f'fill="{color}"/>')
        ly = m_top + 16 + 14 * i
        out.append(f'<line x1="{width - m_right - 120}" y1="{ly - 4}" '
                   f'x2="{width - m_right - 100}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - m_right - 94}" y="{ly}" '
                   f'font-size="11">{label}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
