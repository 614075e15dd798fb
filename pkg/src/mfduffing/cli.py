"""Command-line front end.

Every output file gets one JSON manifest next to it (``<out>.manifest.json``)
holding the resolved arguments, seed, package version, output paths and wall
time.  ``mfduffing --from-manifest m.json`` replays a run.  Relative output
paths resolve against ``$MFDUFFING_OUT`` when it is set.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import MFDuffingError
from .model import Cosine, ExpEnvelope, SampledPeriodic, SquareWave, SystemParams
from .moments import (
    TruncationOrders,
    assemble_dense,
    build_from_basis,
    make_basis,
    saf_sweep,
    solve_block_tridiagonal,
    solve_dense,
    susceptibility,
    truncation_convergence,
)
from .response import (
    DEFAULT_HARMONICS,
    amplification_gain,
    harmonic_decompose,
    order_parameter_response,
    write_response_csv,
)
from .simulate import (
    SimConfig,
    empirical_saf,
    h_functional_monitor,
    simulate_mean_field,
    simulate_network,
    write_h_csv,
    write_trajectory_csv,
)
from .stationary import (
    bifurcation_sweep,
    critical_parameter,
    solve_equilibria,
    static_susceptibility,
)

OUT_ENV = "MFDUFFING_OUT"
COMMANDS = ("bifurcation", "critical", "susceptibility", "saf-sweep", "respond",
            "simulate", "saf-measure", "hmonitor", "validate")


@dataclass
class RunManifest:
    subcommand: str
    args: dict
    params: dict
    seed: Optional[int] = None
    version: str = __version__
    outputs: list = field(default_factory=list)
    duration: float = 0.0
    results: dict = field(default_factory=dict)

    def write(self, path: Path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=_jsonable)

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path) as fh:
            return cls(**json.load(fh))


def _jsonable(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _physics(p):
    g = p.add_argument_group("model")
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--b", type=float, default=1.0)
    g.add_argument("--gamma", type=float, default=0.4)
    g.add_argument("--mu", type=float, default=0.2)
    g.add_argument("--D", type=float, default=0.15)


def _orders(p):
    p.add_argument("--K", type=int, default=10, help="position truncation order")
    p.add_argument("--J", type=int, default=10, help="velocity truncation order")


def _grid(p, required=True):
    p.add_argument("--from", dest="start", type=float, required=required)
    p.add_argument("--to", dest="stop", type=float, required=required)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--log", action="store_true", help="geometric spacing")


def _sim(p, size=10_000, t_measure=200.0):
    g = p.add_argument_group("simulation")
    g.add_argument("--dt", type=float, default=0.01)
    g.add_argument("--size", type=int, default=size, help="ensemble or network size")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--t-transient", type=float, default=100.0)
    g.add_argument("--t-measure", type=float, default=t_measure)
    g.add_argument("--init", choices=("well", "stationary", "point"), default="stationary")
    g.add_argument("--x-init", type=float, default=2.0)
    g.add_argument("--spread", type=float, default=0.1)
    g.add_argument("--record-every", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfduffing", description="Mean-field coupled Duffing oscillators.")
    parser.add_argument("--from-manifest", metavar="PATH", help="replay a recorded run")
    parser.add_argument("--threads", type=int, default=1, help="worker cap for sweeps")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("bifurcation", help="equilibrium branches along D or mu")
    _physics(p)
    p.add_argument("--axis", choices=("D", "mu"), default="D")
    _grid(p)
    p.add_argument("--include-unstable", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("critical", help="pitchfork point along D or mu")
    _physics(p)
    p.add_argument("--axis", choices=("D", "mu"), default="D")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--out")

    p = sub.add_parser("susceptibility", help="chi over a frequency grid")
    _physics(p)
    _orders(p)
    p.add_argument("--Omega", type=float, help="single frequency")
    _grid(p, required=False)
    p.add_argument("--branch", choices=("nonnegative", "positive", "negative"), default="nonnegative")
    p.add_argument("--out")

    p = sub.add_parser("saf-sweep", help="SAF along D, mu, gamma or Omega")
    _physics(p)
    _orders(p)
    p.add_argument("--axis", choices=("D", "mu", "gamma", "Omega"), default="D")
    p.add_argument("--Omega", type=float, default=0.1)
    _grid(p)
    p.add_argument("--branch", choices=("nonnegative", "positive", "negative"), default="nonnegative")
    p.add_argument("--out")

    p = sub.add_parser("respond", help="response to a periodic drive by superposition")
    _physics(p)
    _orders(p)
    p.add_argument("--signal", choices=("cosine", "square", "envelope", "sampled"), default="square")
    p.add_argument("--eps0", type=float, default=0.03)
    p.add_argument("--Omega", type=float, default=0.0314159265)
    p.add_argument("--d", type=float, default=0.2, help="envelope decay rate")
    p.add_argument("--samples", help="file with one period of samples (sampled signal)")
    p.add_argument("--kmax", type=int, default=DEFAULT_HARMONICS)
    p.add_argument("--periods", type=int, default=1)
    p.add_argument("--step", type=float, default=0.1, help="output time step")
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="Euler-Maruyama run of the ensemble or network")
    _physics(p)
    _sim(p)
    p.add_argument("--network", action="store_true", help="explicit N-oscillator network")
    p.add_argument("--eps0", type=float, default=0.0)
    p.add_argument("--Omega", type=float, default=0.1)
    p.add_argument("--out")

    p = sub.add_parser("saf-measure", help="SAF from a driven simulation")
    _physics(p)
    _orders(p)
    _sim(p, t_measure=400.0)
    p.add_argument("--eps0", type=float, default=0.03)
    p.add_argument("--Omega", type=float, default=0.314159265)
    p.add_argument("--out")

    p = sub.add_parser("hmonitor", help="H functional of a relaxing ensemble")
    _physics(p)
    _sim(p, size=200_000)
    p.add_argument("--t-end", type=float, default=40.0)
    p.add_argument("--sample-every", type=float, default=0.5)
    p.add_argument("--bins", type=int, default=128)
    p.add_argument("--out")

    p = sub.add_parser("validate", help="cross-oracle checks with a pass/fail table")
    _physics(p)
    p.add_argument("--size", type=int, default=5_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    return parser


def _params(ns) -> SystemParams:
    return SystemParams(ns.a, ns.b, ns.gamma, ns.mu, ns.D)


def _axis_values(ns):
    if ns.points < 2:
        raise ValueError("--points must be at least 2")
    if ns.log:
        return list(np.geomspace(ns.start, ns.stop, ns.points))
    return list(np.linspace(ns.start, ns.stop, ns.points))


def _out_path(ns, default_name) -> Path:
    name = Path(ns.out) if ns.out else Path(default_name)
    base = os.environ.get(OUT_ENV)
    if base and not name.is_absolute():
        name = Path(base) / name
    name.parent.mkdir(parents=True, exist_ok=True)
    return name


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _sim_config(ns, X_init=None) -> SimConfig:
    return SimConfig(dt=ns.dt, t_transient=ns.t_transient, t_measure=ns.t_measure,
                     size=ns.size, seed=ns.seed, init=ns.init, x_init=ns.x_init,
                     spread=ns.spread if ns.init == "point" else 0.0,
                     X_init=X_init, record_every=ns.record_every)


def _signal(ns):
    if ns.signal == "cosine":
        return Cosine(ns.eps0, ns.Omega)
    if ns.signal == "square":
        return SquareWave(ns.eps0, ns.Omega)
    if ns.signal == "envelope":
        return ExpEnvelope(ns.eps0, ns.d, 2 * math.pi / ns.Omega)
    if not ns.samples:
        raise ValueError("--samples is required for a sampled signal")
    samples = np.loadtxt(ns.samples, dtype=float, ndmin=1)
    return SampledPeriodic(tuple(ns.eps0 * samples), 2 * math.pi / ns.Omega)


# subcommands; each returns (results dict, seed or None) and writes to ``out``


def cmd_bifurcation(ns, out, comment):
    curve = bifurcation_sweep(_params(ns), ns.axis, _axis_values(ns),
                              include_unstable=ns.include_unstable, workers=ns.threads)
    with open(out, "w") as fh:
        curve.to_csv(fh, comment)
    return {"errors": curve.errors}, None


def cmd_critical(ns, out, comment):
    bracket = (ns.lo, ns.hi) if ns.lo is not None and ns.hi is not None else None
    value = critical_parameter(_params(ns), ns.axis, bracket)
    print(f"{ns.axis}_c = {value:.8g}")
    with open(out, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(f"axis,critical\n{ns.axis},{value:.12g}\n")
    return {"critical": value}, None


def cmd_susceptibility(ns, out, comment):
    p = _params(ns)
    orders = TruncationOrders(ns.K, ns.J)
    if ns.Omega is not None:
        X0 = solve_equilibria(p).select(ns.branch).X0
        chi = susceptibility(p, X0, ns.Omega, orders).value
        print(f"chi({ns.Omega:g}) = {chi.real:.10g} {chi.imag:+.10g}i  SAF = {abs(chi)**2:.10g}")
        with open(out, "w") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write("axis,re_chi,im_chi,saf\n")
            fh.write(f"{ns.Omega:.12g},{chi.real:.12g},{chi.imag:.12g},{abs(chi)**2:.12g}\n")
        return {"chi": chi, "X0": X0}, None
    if ns.start is None or ns.stop is None:
        raise ValueError("give --Omega or a --from/--to frequency grid")
    curve = saf_sweep(p, "Omega", _axis_values(ns), orders=orders, branch=ns.branch,
                      workers=ns.threads)
    with open(out, "w") as fh:
        curve.to_csv(fh, comment)
    return {"errors": curve.errors}, None


def cmd_saf_sweep(ns, out, comment):
    curve = saf_sweep(_params(ns), ns.axis, _axis_values(ns), ns.Omega,
                      TruncationOrders(ns.K, ns.J), branch=ns.branch, workers=ns.threads)
    with open(out, "w") as fh:
        curve.to_csv(fh, comment)
    return {"errors": curve.errors}, None


def cmd_respond(ns, out, comment):
    p = _params(ns)
    signal = _signal(ns)
    series = harmonic_decompose(signal, ns.kmax)
    X0 = solve_equilibria(p).select().X0
    n = int(round(ns.periods * signal.period / ns.step))
    t = ns.step * np.arange(n)
    resp = order_parameter_response(p, X0, series, t, TruncationOrders(ns.K, ns.J),
                                    workers=ns.threads)
    gain = amplification_gain(series, t, resp.X)
    print(f"gain = {gain.fundamental:.6g}  peak-to-peak ratio = {gain.peak_to_peak:.6g}")
    with open(out, "w") as fh:
        write_response_csv(t, signal(t), resp.X, fh, comment, gain.fundamental)
    return {"gain": gain.fundamental, "peak_to_peak": gain.peak_to_peak, "X0": X0,
            "tail_rms": series.tail_rms, "dropped_bound": resp.dropped_bound}, None


def cmd_simulate(ns, out, comment):
    p = _params(ns)
    cfg = _sim_config(ns)
    signal = Cosine(ns.eps0, ns.Omega) if ns.eps0 > 0 else None
    run = simulate_network if ns.network else simulate_mean_field
    traj = run(p, signal, cfg)
    with open(out, "w") as fh:
        write_trajectory_csv(traj, fh, comment)
    return {"config": cfg.as_dict(), "mean_X": float(traj.X.mean())}, cfg.seed


def cmd_saf_measure(ns, out, comment):
    p = _params(ns)
    X0 = solve_equilibria(p).select().X0
    cfg = _sim_config(ns, X_init=X0)
    traj = simulate_mean_field(p, Cosine(ns.eps0, ns.Omega), cfg)
    est = empirical_saf(traj, ns.Omega, ns.eps0)
    theory = susceptibility(p, X0, ns.Omega, TruncationOrders(ns.K, ns.J)).saf
    print(f"simulated SAF = {est.saf:.6g} +- {est.stderr:.2g}  moments SAF = {theory:.6g}")
    with open(out, "w") as fh:
        write_trajectory_csv(traj, fh, comment)
    return {"config": cfg.as_dict(), "saf": est.saf, "stderr": est.stderr,
            "chi": est.chi, "theory_saf": theory}, cfg.seed


def cmd_hmonitor(ns, out, comment):
    p = _params(ns)
    cfg = _sim_config(ns)
    series = h_functional_monitor(p, cfg, ns.t_end, ns.sample_every, ns.bins)
    print(f"violations: {series.n_violations}/{series.H.size - 1} "
          f"({series.violation_fraction:.1%})")
    with open(out, "w") as fh:
        write_h_csv(series, fh, comment)
    return {"config": cfg.as_dict(), "violation_fraction": series.violation_fraction}, cfg.seed


def validation_checks(p: SystemParams, size: int = 5_000, seed: int = 0):
    """Cross-oracle checks; yields ``(name, passed, detail)``."""
    X0 = solve_equilibria(p).select().X0
    Omega = 0.3
    basis = make_basis(p, X0, 10)
    system = build_from_basis(basis, p, Omega, 10)
    c_block = solve_block_tridiagonal(system)
    c_dense = solve_dense(system)
    err = float(np.max(np.abs(c_block - c_dense)) / np.max(np.abs(c_dense)))
    yield "block-Thomas vs dense", err < 1e-9, f"rel diff {err:.2e}"

    chi0 = static_susceptibility(p, X0)
    chi_low = susceptibility(p, X0, 1e-3).value
    rel = abs(chi_low - chi0) / abs(chi0)
    yield "chi(Omega->0) vs static", rel < 0.01, f"rel diff {rel:.2e}"

    changes = truncation_convergence(p, X0, Omega, [10, 12, 14])
    yield "truncation 10->14", max(changes) < 0.005, f"max change {max(changes):.2e}"

    W = 0.1 * math.pi
    cfg = SimConfig(size=size, seed=seed, t_transient=100.0, t_measure=400.0,
                    init="stationary", X_init=X0, record_every=10)
    est = empirical_saf(simulate_mean_field(p, Cosine(0.03, W), cfg), W, 0.03)
    theory = susceptibility(p, X0, W).saf
    tol = max(0.1 * theory, 3 * est.stderr)
    yield ("moments vs Monte Carlo SAF", abs(est.saf - theory) <= tol,
           f"sim {est.saf:.4g} +- {est.stderr:.2g}, theory {theory:.4g}")


def cmd_validate(ns, out, comment):
    rows = []
    for name, ok, detail in validation_checks(_params(ns), ns.size, ns.seed):
        rows.append((name, ok, detail))
        print(f"{'PASS' if ok else 'FAIL'}  {name:<28} {detail}")
    with open(out, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("check,passed,detail\n")
        for name, ok, detail in rows:
            fh.write(f"{name},{int(ok)},\"{detail}\"\n")
    failed = [r[0] for r in rows if not r[1]]
    return {"failed": failed}, ns.seed


HANDLERS = {
    "bifurcation": cmd_bifurcation,
    "critical": cmd_critical,
    "susceptibility": cmd_susceptibility,
    "saf-sweep": cmd_saf_sweep,
    "respond": cmd_respond,
    "simulate": cmd_simulate,
    "saf-measure": cmd_saf_measure,
    "hmonitor": cmd_hmonitor,
    "validate": cmd_validate,
}


def _replay_argv(path) -> list:
    manifest = RunManifest.read(path)
    return list(manifest.args["argv"])


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.from_manifest:
        try:
            argv = _replay_argv(ns.from_manifest)
        except (OSError, KeyError, ValueError, TypeError) as exc:
            print(f"mfduffing: error: cannot read manifest: {exc}", file=sys.stderr)
            return 2
        try:
            ns = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
    if ns.command is None:
        parser.print_usage(sys.stderr)
        print("mfduffing: error: a subcommand is required", file=sys.stderr)
        return 2

    try:
        out = _out_path(ns, f"{ns.command}.csv")
        params = _params(ns)
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"mfduffing: error: {exc}", file=sys.stderr)
        return 2
    mpath = _manifest_path(out)
    comment = f"manifest: {mpath}"
    started = time.perf_counter()
    try:
        results, seed = HANDLERS[ns.command](ns, out, comment)
    except MFDuffingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"mfduffing: error: {exc}", file=sys.stderr)
        return 2
    args = {k: v for k, v in vars(ns).items() if k != "from_manifest"}
    args["argv"] = [a for a in argv]
    manifest = RunManifest(ns.command, args, params.as_dict(), seed,
                           outputs=[str(out)], duration=time.perf_counter() - started,
                           results=results)
    manifest.write(mpath)
    if ns.command == "validate" and results["failed"]:
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
