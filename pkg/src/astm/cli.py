"""Command-line interface: file-based composition of the other modules.

Configuration lives in flags; `--config FILE` may point to a JSON object
whose keys mirror the long flag names, with explicit flags winning on
conflict.  Every randomized command requires --seed, and output bytes are
independent of --threads.  Errors exit nonzero with a one-line diagnostic.
"""

import argparse
import json
import os
import sys

import numpy as np

from ._version import __version__
from . import analytics
from .errors import AstmError
from .harness import ExperimentConfig, SweepResult, SweepRow, base_manifest, \
    capacity, corruption_prob, equilibrium_error, duty_sweep, noise_sweep, \
    weight_noise_sweep
from .lattice import LatticeConfig, build_connectivity, flip_pixels, \
    load_movie, random_movie, save_movie
from .recording import RECORDERS, load_weights, save_weights
from .retrieval import perturb_weights, run
from .selftest import run_selftest
from .tcam import per_retrieval_error, retrieval_error_mc


class CliError(AstmError):
    """Raised for malformed command lines; printed as one diagnostic line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _default_threads() -> int:
    env = os.environ.get("ASTM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"ASTM_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"config file is not valid JSON: {exc}")
    if not isinstance(config, dict):
        raise CliError("config file must hold a JSON object")
    return config


def _pick(args, config, name, cast, default=None, required=False):
    """Resolve one option: explicit flag, then config key, then default."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is None:
        value = config.get(name, default)
    if value is None:
        if required:
            raise CliError(f"missing required flag --{name}")
        return None
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise CliError(f"flag --{name} got an unusable value {value!r}")


def _float_list(value) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(part) for part in str(value).split(",") if part.strip()]


def _write_text(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write output file: {exc}")


def _experiment_config(args, config, *, need_frames=True) -> ExperimentConfig:
    lattice = LatticeConfig(
        side=_pick(args, config, "side", int, required=True),
        window=_pick(args, config, "window", int, required=True))
    return ExperimentConfig(
        lattice=lattice,
        method=_pick(args, config, "method", str, required=True),
        frames=_pick(args, config, "frames", int, required=need_frames,
                     default=None if need_frames else 1),
        duty=_pick(args, config, "duty", float, 0.5),
        flip_fraction=_pick(args, config, "flip", float, 0.0),
        weight_noise=_pick(args, config, "weight-noise", float, 0.0),
        trials=_pick(args, config, "trials", int, 200),
        master_seed=_pick(args, config, "seed", int, required=True),
        threads=_pick(args, config, "threads", int, _default_threads()),
        qp_margin=_pick(args, config, "qp-margin", float, 1.0),
        qp_max_iters=_pick(args, config, "qp-max-iters", int, 2000),
        qp_tol=_pick(args, config, "qp-tol", float, 1e-8),
        agd_eta=_pick(args, config, "agd-eta", float, 1e-3),
        agd_max_epochs=_pick(args, config, "agd-max-epochs", int, 100_000),
        agd_eps_stop=_pick(args, config, "agd-eps-stop", float, 0.1),
        dgd_eta=_pick(args, config, "dgd-eta", float, 0.01),
        dgd_margin=_pick(args, config, "dgd-margin", float, 1.0),
        dgd_max_epochs=_pick(args, config, "dgd-max-epochs", int, 100_000),
    )


def _cmd_gen_movie(args, config) -> int:
    cfg = LatticeConfig(side=_pick(args, config, "side", int, required=True),
                        window=_pick(args, config, "window", int,
                                     required=True))
    movie = random_movie(cfg.cell_count,
                         _pick(args, config, "frames", int, required=True),
                         _pick(args, config, "duty", float, 0.5),
                         _pick(args, config, "seed", int, required=True))
    save_movie(movie, cfg, _pick(args, config, "out", str, required=True))
    return 0


def _cmd_record(args, config) -> int:
    method = _pick(args, config, "method", str, required=True)
    if method not in RECORDERS:
        raise CliError(f"unknown method {method!r}, expected one of "
                       f"{tuple(RECORDERS)}")
    movie, lattice = load_movie(_pick(args, config, "movie", str,
                                      required=True))
    conn = build_connectivity(lattice)
    if method == "hebb":
        weights, report = RECORDERS[method](movie, conn)
    elif method == "qp":
        weights, report = RECORDERS[method](
            movie, conn, margin=_pick(args, config, "qp-margin", float, 1.0),
            max_iters=_pick(args, config, "qp-max-iters", int, 2000),
            tol=_pick(args, config, "qp-tol", float, 1e-8))
    elif method == "agd":
        weights, report = RECORDERS[method](
            movie, conn, eta=_pick(args, config, "agd-eta", float, 1e-3),
            max_epochs=_pick(args, config, "agd-max-epochs", int, 100_000),
            eps_stop=_pick(args, config, "agd-eps-stop", float, 0.1))
    else:
        weights, report = RECORDERS[method](
            movie, conn, eta=_pick(args, config, "dgd-eta", float, 0.01),
            d_margin=_pick(args, config, "dgd-margin", float, 1.0),
            max_epochs=_pick(args, config, "dgd-max-epochs", int, 100_000))
    save_weights(weights, lattice, _pick(args, config, "out", str,
                                         required=True))
    print(f"converged={str(report.converged).lower()} "
          f"epochs={report.epochs_used} violations={report.violations} "
          f"weight_rms={report.weight_rms:.12g}")
    return 0


def _cmd_retrieve(args, config) -> int:
    weights, w_cfg = load_weights(_pick(args, config, "weights", str,
                                        required=True))
    movie, m_cfg = load_movie(_pick(args, config, "movie", str,
                                    required=True))
    if w_cfg != m_cfg:
        raise CliError(
            f"weight lattice {w_cfg.side}x{w_cfg.side}/m={w_cfg.window} does "
            f"not match movie lattice {m_cfg.side}x{m_cfg.side}/"
            f"m={m_cfg.window}")
    conn = build_connectivity(m_cfg)
    rng = np.random.default_rng(_pick(args, config, "seed", int,
                                      required=True))
    noise = _pick(args, config, "weight-noise", float, 0.0)
    if noise > 0:
        weights = perturb_weights(weights, noise, rng)
    start = _pick(args, config, "start", int, 0)
    probe = flip_pixels(movie.frames[start % movie.frame_count],
                        _pick(args, config, "flip", float, 0.0), rng)
    trace = run(weights, conn, probe, movie, start,
                _pick(args, config, "horizon", int, movie.frame_count))
    text = "\n".join(trace.to_csv_lines(movie.pixel_count)) + "\n"
    _write_text(_pick(args, config, "out", str), text)
    return 0


def _cmd_sweep_capacity(args, config) -> int:
    cfg = _experiment_config(args, config, need_frames=False)
    target_p = _pick(args, config, "target-p", float, 0.01)
    resolution = _pick(args, config, "resolution", int, 1)
    result = capacity(cfg, target_p=target_p, resolution=resolution)
    manifest = base_manifest(
        cfg, "sweep-capacity", target_p=target_p, resolution=resolution,
        trials=cfg.trials, bracket_lo=result.q_lo, bracket_hi=result.q_hi)
    row = SweepRow(experiment="sweep-capacity", method=cfg.method,
                   lattice=cfg.lattice, frames=result.q_max, duty=cfg.duty,
                   flip_fraction=cfg.flip_fraction,
                   weight_noise=cfg.weight_noise, trials=cfg.trials,
                   estimate=float(result.q_max),
                   stderr=(result.q_hi - result.q_lo) / 2.0,
                   master_seed=cfg.master_seed)
    _write_text(_pick(args, config, "out", str),
                SweepResult(rows=[row], manifest=manifest).to_csv())
    return 0


def _cmd_sweep_noise(args, config) -> int:
    cfg = _experiment_config(args, config)
    values = _pick(args, config, "flip-values", _float_list, required=True)
    result = noise_sweep(cfg, values)
    _write_text(_pick(args, config, "out", str), result.to_csv())
    return 0


def _cmd_sweep_weight_noise(args, config) -> int:
    cfg = _experiment_config(args, config)
    values = _pick(args, config, "r-values", _float_list, required=True)
    result = weight_noise_sweep(cfg, values)
    _write_text(_pick(args, config, "out", str), result.to_csv())
    return 0


def _cmd_sweep_duty(args, config) -> int:
    if getattr(args, "method", None) is None and "method" not in config:
        args.method = "dgd"
    cfg = _experiment_config(args, config, need_frames=False)
    values = _pick(args, config, "duty-values", _float_list, required=True)
    result = duty_sweep(cfg, values,
                        target_p=_pick(args, config, "target-p", float, 0.01),
                        resolution=_pick(args, config, "resolution", int, 1))
    _write_text(_pick(args, config, "out", str), result.to_csv())
    return 0


def _cmd_equilibrium(args, config) -> int:
    if getattr(args, "method", None) is None and "method" not in config:
        args.method = "hebb"
    cfg = _experiment_config(args, config)
    p_hat, stderr = equilibrium_error(cfg)
    manifest = base_manifest(cfg, "equilibrium", Q=cfg.frames,
                             trials=cfg.trials)
    row = SweepRow(experiment="equilibrium", method=cfg.method,
                   lattice=cfg.lattice, frames=cfg.frames, duty=cfg.duty,
                   flip_fraction=cfg.flip_fraction,
                   weight_noise=cfg.weight_noise, trials=cfg.trials,
                   estimate=p_hat, stderr=stderr,
                   master_seed=cfg.master_seed)
    _write_text(_pick(args, config, "out", str),
                SweepResult(rows=[row], manifest=manifest).to_csv())
    return 0


def _cmd_corruption(args, config) -> int:
    cfg = _experiment_config(args, config)
    p_hat, stderr = corruption_prob(cfg)
    manifest = base_manifest(cfg, "corruption", Q=cfg.frames,
                             trials=cfg.trials)
    row = SweepRow(experiment="corruption", method=cfg.method,
                   lattice=cfg.lattice, frames=cfg.frames, duty=cfg.duty,
                   flip_fraction=cfg.flip_fraction,
                   weight_noise=cfg.weight_noise, trials=cfg.trials,
                   estimate=p_hat, stderr=stderr,
                   master_seed=cfg.master_seed)
    _write_text(_pick(args, config, "out", str),
                SweepResult(rows=[row], manifest=manifest).to_csv())
    return 0


def _cmd_tcam(args, config) -> int:
    pixels = _pick(args, config, "pixels", int, required=True)
    frames = _pick(args, config, "frames", int, required=True)
    flip = _pick(args, config, "flip", float, 0.0)
    trials = _pick(args, config, "trials", int, 10_000)
    seed = _pick(args, config, "seed", int, required=True)
    p_mc, stderr = retrieval_error_mc(pixels, frames, flip, trials, seed)
    p_formula = per_retrieval_error(pixels, frames, flip)
    g_on = _pick(args, config, "g-on", float, 1.0)
    g_off = _pick(args, config, "g-off", float, 0.0)
    sigma_g = _pick(args, config, "sigma-g", float, 0.0)
    lines = [
        f"# experiment=tcam master_seed={seed} version={__version__} "
        f"g_on={g_on:.12g} g_off={g_off:.12g} sigma_g={sigma_g:.12g}",
        "N,Q,f,trials,p_mc,stderr,p_eq14_per_retrieval",
        f"{pixels},{frames},{flip:.12g},{trials},{p_mc:.12g},"
        f"{stderr:.12g},{p_formula:.12g}",
    ]
    _write_text(_pick(args, config, "out", str), "\n".join(lines) + "\n")
    return 0


_FORMULAS = {
    "hebb-p": (("connectivity", "frames"),
               lambda m, q: analytics.hebb_pixel_error(int(m), int(q))),
    "hebb-p-asymptotic": (("connectivity", "frames"),
                          lambda m, q: analytics.hebb_pixel_error_asymptotic(
                              int(m), int(q))),
    "hebb-p-quadrature": (("connectivity", "frames"),
                          lambda m, q: analytics.hebb_pixel_error_quadrature(
                              int(m), int(q))),
    "tcam-confusion": (("pixels", "flip"),
                       lambda n, f: analytics.tcam_confusion_prob(
                           int(n), float(f))),
    "tcam-confusion-exact": (("pixels", "flip"),
                             lambda n, f: analytics.tcam_confusion_prob_exact(
                                 int(n), float(f))),
    "tcam-capacity": (("memristors", "pixels"),
                      lambda n, npix: analytics.tcam_capacity(
                          int(n), int(npix))),
    "crossnet-capacity": (("memristors", "pixels"),
                          lambda n, npix: analytics.crossnet_capacity(
                              int(n), int(npix))),
    "condition-check": (("g-off-max", "g-on-max"),
                        lambda lo, hi: float(analytics.condition_check(
                            float(lo), float(hi)))),
}


def _cmd_analytic(args, config) -> int:
    name = _pick(args, config, "formula", str, required=True)
    if name not in _FORMULAS:
        raise CliError(f"unknown formula {name!r}, expected one of "
                       f"{tuple(sorted(_FORMULAS))}")
    params, fn = _FORMULAS[name]
    values = [_pick(args, config, p, float, required=True) for p in params]
    result = fn(*values)
    param_text = ";".join(f"{p}={v:.12g}" for p, v in zip(params, values))
    lines = ["formula,parameters,value",
             f"{name},{param_text},{result:.12g}"]
    _write_text(_pick(args, config, "out", str), "\n".join(lines) + "\n")
    return 0


def _cmd_selftest(args, config) -> int:
    return 0 if run_selftest() else 1


def _add_common(parser, *names):
    """Attach the requested option flags; defaults resolve in _pick."""
    specs = {
        "side": (int, "lattice edge length L"),
        "window": (int, "connectivity window edge m (odd)"),
        "frames": (int, "number of movie frames Q"),
        "duty": (float, "fraction of +1 pixels (default 0.5)"),
        "seed": (int, "master RNG seed (required for randomized commands)"),
        "out": (str, "output path (default stdout for CSV commands)"),
        "method": (str, "recording method: hebb | qp | agd | dgd"),
        "movie": (str, "movie file path"),
        "weights": (str, "weight file path"),
        "trials": (int, "Monte Carlo trials"),
        "threads": (int, "worker threads (output is thread-invariant)"),
        "flip": (float, "input flip fraction f"),
        "weight-noise": (float, "relative weight noise rms r"),
        "start": (int, "truth frame index of the input (default 0)"),
        "horizon": (int, "retrieval steps (default Q)"),
        "target-p": (float, "capacity fidelity threshold (default 0.01)"),
        "resolution": (int, "capacity bracket width (default 1)"),
        "flip-values": (str, "comma-separated flip fractions"),
        "r-values": (str, "comma-separated weight-noise values"),
        "duty-values": (str, "comma-separated duty cycles"),
        "pixels": (int, "bits per stored row N"),
        "connectivity": (int, "cell connectivity M"),
        "memristors": (int, "device count n"),
        "g-on": (float, "nominal ON conductance"),
        "g-off": (float, "nominal OFF conductance"),
        "sigma-g": (float, "relative conductance spread"),
        "g-off-max": (float, "worst-case OFF conductance"),
        "g-on-max": (float, "worst-case ON conductance"),
        "formula": (str, "analytic formula name"),
        "qp-margin": (float, "QP margin (default 1)"),
        "qp-max-iters": (int, "QP constraint passes cap (default 2000)"),
        "qp-tol": (float, "QP feasibility tolerance (default 1e-8)"),
        "agd-eta": (float, "analog GD rate (default 1e-3)"),
        "agd-max-epochs": (int, "analog GD epoch cap (default 100000)"),
        "agd-eps-stop": (float, "analog GD stop threshold (default 0.1)"),
        "dgd-eta": (float, "discrete GD rate (default 0.01)"),
        "dgd-margin": (float, "discrete GD margin D (default 1)"),
        "dgd-max-epochs": (int, "discrete GD epoch cap (default 100000)"),
    }
    for name in names:
        cast, help_text = specs[name]
        parser.add_argument(f"--{name}", type=cast, default=None,
                            help=help_text)


_METHOD_KNOBS = ("qp-margin", "qp-max-iters", "qp-tol", "agd-eta",
                 "agd-max-epochs", "agd-eps-stop", "dgd-eta", "dgd-margin",
                 "dgd-max-epochs")


def build_parser() -> _Parser:
    parser = _Parser(prog="astm",
                     description="Associative spatial-temporal memory lab")
    parser.add_argument("--version", action="version",
                        version=f"astm {__version__}")
    sub = parser.add_subparsers(dest="cmd", metavar="subcommand")

    def command(name, handler, help_text, *options):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None,
                       help="JSON file whose keys mirror flag names")
        _add_common(p, *options)
        p.set_defaults(handler=handler)
        return p

    command("gen-movie", _cmd_gen_movie, "generate a random movie file",
            "side", "window", "frames", "duty", "seed", "out")
    command("record", _cmd_record, "record a movie into a weight file",
            "method", "movie", "out", *_METHOD_KNOBS)
    command("retrieve", _cmd_retrieve, "replay retrieval from a noisy frame",
            "weights", "movie", "start", "flip", "weight-noise", "horizon",
            "seed", "out")
    command("sweep-capacity", _cmd_sweep_capacity,
            "bisect the capacity at a fidelity target",
            "method", "side", "window", "duty", "target-p", "resolution",
            "trials", "seed", "threads", "out", *_METHOD_KNOBS)
    command("sweep-noise", _cmd_sweep_noise,
            "corruption probability vs input flip fraction",
            "method", "side", "window", "frames", "duty", "weight-noise",
            "flip-values", "trials", "seed", "threads", "out",
            *_METHOD_KNOBS)
    command("sweep-weight-noise", _cmd_sweep_weight_noise,
            "corruption probability vs weight noise rms",
            "method", "side", "window", "frames", "duty", "flip",
            "r-values", "trials", "seed", "threads", "out", *_METHOD_KNOBS)
    command("sweep-duty", _cmd_sweep_duty,
            "discrete-GD capacity vs duty cycle",
            "method", "side", "window", "duty-values", "target-p",
            "resolution", "trials", "seed", "threads", "out",
            *_METHOD_KNOBS)
    command("equilibrium", _cmd_equilibrium,
            "stationary wrong-pixel fraction of Hebb retrieval",
            "method", "side", "window", "frames", "duty", "trials", "seed",
            "threads", "out")
    command("corruption", _cmd_corruption,
            "corruption probability at one operating point",
            "method", "side", "window", "frames", "duty", "flip",
            "weight-noise", "trials", "seed", "threads", "out",
            *_METHOD_KNOBS)
    command("tcam", _cmd_tcam, "ternary-CAM matching error Monte Carlo",
            "pixels", "frames", "flip", "trials", "g-on", "g-off", "sigma-g",
            "seed", "out")
    command("analytic", _cmd_analytic, "evaluate a closed-form expression",
            "formula", "connectivity", "frames", "pixels", "flip",
            "memristors", "g-off-max", "g-on-max", "out")
    command("selftest", _cmd_selftest, "run the fast invariant suite")
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if getattr(args, "cmd", None) is None:
            raise CliError("missing subcommand (see --help)")
        config = _load_config(getattr(args, "config", None))
        return args.handler(args, config)
    except CliError as exc:
        print(f"astm: error: {exc}", file=sys.stderr)
        return 2
    except AstmError as exc:
        print(f"astm: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"astm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
