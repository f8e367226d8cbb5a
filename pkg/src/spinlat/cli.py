"""Command-line front end: thin adapters over the library operations.

Every subcommand resolves its parameters, calls the corresponding module
functions, writes CSV/JSON outputs plus a run manifest, and exits with
0 (ok), 2 (usage), 3 (unreadable/invalid input), or 4 (numerical failure).
Subcommands never mutate their inputs and compute nothing that cannot be
reproduced by calling the library with the manifest's parameters.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import (GeometryError, competing_pathway_configuration,
                       coupling_matrix, coupling_stats, generate_configuration,
                       load_configuration, save_configuration,
                       tight_cluster_configuration, with_labels)
from .liouvillian import (DegenerateSteadyStateError, build_hamiltonian,
                          build_liouvillian, decompose, export_spectrum_rows,
                          mode_site_weights, slow_mode_indices)
from .dynamics import evolve, log_time_grid, site_state
from .measures import (SolverError, dephasing_builder, gamma_grid,
                       survival_curve, transfer_matrix)
from .ness import (NessProblem, NessSolverError, dominant_pathway,
                   flux_sweep, solve_ness)
from .reference import MinimalModelParams, analytic_eta, hierarchical_hamiltonian, table_rows
from .ensemble import (CampaignError, CampaignSpec, run_gateway_campaign,
                       run_scaling_campaign, tidy_rows)
from .tables import RunManifest, read_csv, write_csv, write_json

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4

INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError,
                json.JSONDecodeError, GeometryError, KeyError)
NUMERICAL_ERRORS = (SolverError, NessSolverError, DegenerateSteadyStateError,
                    CampaignError, np.linalg.LinAlgError, FloatingPointError)


def parse_gamma_spec(text: str) -> np.ndarray:
    """Either a single float or ``lo:hi:npts-log`` for a log grid."""
    if ":" in text:
        lo_s, hi_s, n_s = text.split(":")
        if not n_s.endswith("-log"):
            raise argparse.ArgumentTypeError(
                "grid spec must look like lo:hi:npts-log")
        lo, hi, npts = float(lo_s), float(hi_s), int(n_s[: -len("-log")])
        if not (0 < lo < hi) or npts < 2:
            raise argparse.ArgumentTypeError("need 0 < lo < hi and npts >= 2")
        return np.geomspace(lo, hi, npts)
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("gamma must be positive")
    return np.array([value])


def _resolve_threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("SPINLAT_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _load_config(args):
    if getattr(args, "config", None):
        return load_configuration(args.config)
    if getattr(args, "demo", None) == "cluster":
        return tight_cluster_configuration()
    if getattr(args, "demo", None) == "pathways":
        return competing_pathway_configuration()
    raise GeometryError("no configuration given (use --config or --demo)")


def _uniform_liouvillian(config, gamma: float):
    h = build_hamiltonian(config, coupling_matrix(config))
    return h, build_liouvillian(h, np.full(config.n_sites, gamma))


# --------------------------------------------------------------------------
# subcommand bodies; each returns a list of output files

def cmd_gen_config(args, out: Path, manifest: RunManifest):
    config = generate_configuration(args.n, args.radius, args.seed,
                                    min_separation=args.min_separation)
    if args.excitation is not None:
        config = with_labels(config, excitation=args.excitation)
    path = out / "configuration.json"
    save_configuration(config, path)
    manifest.add_output(path)


def cmd_couplings(args, out: Path, manifest: RunManifest):
    config = _load_config(args)
    cm = coupling_matrix(config)
    stats = coupling_stats(cm)
    write_csv(out / "couplings.csv", [str(i) for i in range(cm.n_sites)],
              cm.values.tolist())
    write_csv(out / "coupling_site_stats.csv", ["site", "s1", "s2", "m"],
              [(i, stats.s1[i], stats.s2[i], stats.m[i])
               for i in range(cm.n_sites)])
    write_csv(out / "coupling_histogram.csv", ["bin_lo", "bin_hi", "count"],
              stats.histogram.tolist())
    manifest.residuals["jmax_bath"] = stats.jmax_bath
    for name in ("couplings.csv", "coupling_site_stats.csv",
                 "coupling_histogram.csv"):
        manifest.add_output(out / name)


def cmd_spectrum(args, out: Path, manifest: RunManifest):
    config = _load_config(args)
    gamma = float(args.gamma[0])
    _, liou = _uniform_liouvillian(config, gamma)
    spec = decompose(liou)
    write_csv(out / "spectrum.csv", ["index", "re", "im"],
              export_spectrum_rows(spec))
    slow = slow_mode_indices(spec, args.slow_modes)
    weights = mode_site_weights(spec, slow, config.n_sites)
    write_json(out / "mode_weights.json", {
        "gamma": gamma,
        "mode_indices": slow.tolist(),
        "eigenvalues": [[float(spec.eigenvalues[k].real),
                         float(spec.eigenvalues[k].imag)] for k in slow],
        "site_weights": weights.tolist(),
    })
    manifest.residuals["eigen_residual"] = spec.residual
    manifest.add_output(out / "spectrum.csv")
    manifest.add_output(out / "mode_weights.json")


def cmd_evolve(args, out: Path, manifest: RunManifest):
    config = _load_config(args)
    gamma = float(args.gamma[0])
    _, liou = _uniform_liouvillian(config, gamma)
    times = log_time_grid(args.t_min, args.t_max, args.t_points)
    traj = evolve(liou, site_state(config.n_sites, args.init_site), times)
    header = ["t"] + [f"P_{j}" for j in range(config.n_sites)] + ["purity"]
    rows = [[t, *traj.populations[k], traj.purity[k]]
            for k, t in enumerate(times)]
    path = out / f"trajectory_site{args.init_site}_gamma{gamma:g}.csv"
    write_csv(path, header, rows)
    manifest.add_output(path)


def cmd_transfer(args, out: Path, manifest: RunManifest):
    config = _load_config(args)
    gamma = float(args.gamma[0])
    _, liou = _uniform_liouvillian(config, gamma)
    tm = transfer_matrix(liou)
    path = out / f"transfer_gamma{gamma:g}.csv"
    write_csv(path, [str(i) for i in range(tm.n_sites)], tm.values.tolist())
    manifest.residuals["imag_residue"] = tm.imag_residue
    manifest.residuals["condition_estimate"] = tm.condition_estimate
    manifest.add_output(path)


def cmd_survival(args, out: Path, manifest: RunManifest):
    config = _load_config(args)
    gammas = gamma_grid() if args.gamma is None else args.gamma
    manifest.parameters["gamma_resolved"] = [float(g) for g in gammas]
    h = build_hamiltonian(config, coupling_matrix(config))
    build = dephasing_builder(h)
    sites = ([args.site] if args.site is not None
             else list(range(config.n_sites)))
    summary = []
    for site in sites:
        curve = survival_curve(build, site, gammas)
        path = out / f"survival_site{site}.csv"
        write_csv(path, ["gamma", "t_ii", "inv_t_ii"],
                  [(g, t, 1.0 / t) for g, t in zip(curve.gammas, curve.t_ii)])
        manifest.add_output(path)
        summary.append((site, curve.gamma_star, curve.t_min))
    write_csv(out / "survival_summary.csv", ["site", "gamma_star", "t_min"],
              summary)
    manifest.add_output(out / "survival_summary.csv")


def _ness_problem(args):
    if args.three_site:
        p = MinimalModelParams(j=args.j, eps=args.eps, gamma=float(args.gamma[0]),
                               gamma_l=args.gamma_l)
        h = hierarchical_hamiltonian(p)
        reference = analytic_eta(p)
    else:
        config = _load_config(args)
        h = build_hamiltonian(config, coupling_matrix(config))
        reference = None
    problem = NessProblem(hamiltonian=h,
                          dephasing_rates=np.full(h.n_sites, float(args.gamma[0])),
                          inject=args.inject, extract=args.extract,
                          loss_rate=args.gamma_l)
    return problem, reference


def cmd_ness(args, out: Path, manifest: RunManifest):
    problem, reference = _ness_problem(args)
    result = solve_ness(problem)
    n = problem.hamiltonian.n_sites
    write_csv(out / "ness_currents.csv", ["site_from", "site_to", "F"],
              [(m, t, result.currents[m, t])
               for m in range(n) for t in range(n) if m != t])
    payload = {"eta": result.eta, "residual": result.residual,
               "populations": np.diag(result.rho).real.tolist()}
    if reference is not None:
        payload["analytic_eta"] = reference
        payload["relative_error"] = abs(result.eta - reference) / reference
    write_json(out / "ness.json", payload)
    manifest.residuals["ness_residual"] = result.residual
    manifest.add_output(out / "ness_currents.csv")
    manifest.add_output(out / "ness.json")


def cmd_flux_sweep(args, out: Path, manifest: RunManifest):
    config = _load_config(args)
    h = build_hamiltonian(config, coupling_matrix(config))
    gammas = gamma_grid() if args.gamma is None else args.gamma
    manifest.parameters["gamma_resolved"] = [float(g) for g in gammas]
    loss_rates = [float(v) for v in args.gamma_l_list.split(",")]
    sweep = flux_sweep(h, args.inject, args.extract, gammas, loss_rates)
    rows = [(g, gl, sweep.eta[a, k])
            for a, gl in enumerate(sweep.loss_rates)
            for k, g in enumerate(sweep.gammas)]
    write_csv(out / "flux.csv", ["gamma", "gamma_l", "eta"], rows)
    write_json(out / "flux_peaks.json",
               {f"{gl:g}": peaks.tolist() for gl, peaks in sweep.peaks.items()})
    manifest.add_output(out / "flux.csv")
    manifest.add_output(out / "flux_peaks.json")


def cmd_pathway(args, out: Path, manifest: RunManifest):
    problem, _ = _ness_problem(args)
    result = solve_ness(problem)
    path = dominant_pathway(result, args.inject, args.extract,
                            threshold=args.threshold)
    write_json(out / "pathway.json", {
        "inject": args.inject, "extract": args.extract, "eta": result.eta,
        "threshold": args.threshold, "is_chain": path.is_chain,
        "edges": [{"from": m, "to": t, "current": f}
                  for m, t, f in path.edges],
    })
    manifest.add_output(out / "pathway.json")


def cmd_table1(args, out: Path, manifest: RunManifest):
    rows = table_rows()
    write_csv(out / "table1.csv",
              ["connectivity", "regime", "j", "eps", "gamma", "timescale"],
              rows)
    manifest.add_output(out / "table1.csv")


def _campaign_spec_from_file(path, threads: int) -> CampaignSpec:
    with open(path) as fh:
        payload = json.load(fh)
    payload.setdefault("workers", threads)
    for key in ("n_values", "gammas", "j_values"):
        if key in payload:
            payload[key] = tuple(payload[key])
    try:
        return CampaignSpec(**payload)
    except TypeError as err:
        raise KeyError(f"bad campaign spec file {path}: {err}") from err


def cmd_campaign(args, out: Path, manifest: RunManifest):
    from .ensemble import fit_model

    spec = _campaign_spec_from_file(args.spec, _resolve_threads(args))
    manifest.parameters["campaign"] = spec.__dict__.copy()
    fits = {}
    if spec.mode == "gateway":
        result = run_gateway_campaign(spec)
        write_csv(out / "campaign_summary.csv",
                  ["j", "gamma_star", "t_min"],
                  list(zip(result.j_values, result.gamma_star, result.t_min)))
        fits["eps_link"] = result.eps_link
        fits["eps_bath"] = result.eps_bath
        fits["excluded"] = len(result.excluded)
        window = result.large_j_window(10.0)
        if window.sum() >= 3:
            gamma_ref = float(result.gammas[np.argmin(np.abs(result.gammas
                                                             - 3.2e-5))])
            fits["survival_vs_j"] = fit_model(
                result.j_values[window], result.survival_at(gamma_ref)[window],
                "power").params
            fits["gamma_star_vs_j"] = fit_model(
                result.j_values[window], result.gamma_star[window],
                "linear").params
            fits["t_min_vs_j"] = fit_model(
                result.j_values[window], result.t_min[window], "power").params
    else:
        result = run_scaling_campaign(spec)
        write_csv(out / "campaign_summary.csv",
                  ["n", "gamma_star", "t_min"],
                  [(int(n), result.gamma_star[int(n)], result.t_min[int(n)])
                   for n in result.n_values])
        if len(result.n_values) >= 3:
            ns = result.n_values.astype(float)
            for gamma in (float(result.gammas.min()), float(result.gammas.max())):
                fits[f"alpha_at_{gamma:g}"] = fit_model(
                    ns, result.median_abs_at(gamma), "power").params
    write_json(out / "campaign_fits.json", fits)
    write_csv(out / "campaign_tidy.csv",
              ["mode", "n", "j", "gamma", "realization", "site", "t_ii"],
              tidy_rows(result))
    manifest.add_output(out / "campaign_fits.json")
    manifest.add_output(out / "campaign_tidy.csv")
    manifest.add_output(out / "campaign_summary.csv")


def cmd_plot(args, out: Path, manifest: RunManifest):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, rows = read_csv(args.input)
    data = np.array([[c if isinstance(c, float) else np.nan for c in row]
                     for row in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if args.kind == "heatmap":
        im = ax.imshow(data, aspect="auto", origin="lower")
        fig.colorbar(im, ax=ax)
    elif data.shape[1] == 1:
        ax.plot(np.arange(data.shape[0]), data[:, 0], label=header[0])
        ax.set_xlabel("index")
    else:
        x = data[:, 0]
        for col in range(1, data.shape[1]):
            ax.plot(x, data[:, col], label=header[col] if col < len(header) else None)
        if args.kind == "loglog":
            ax.set_xscale("log")
            ax.set_yscale("log")
        elif args.kind == "line" and x.size > 1 and x.min() > 0 and x.max() / x.min() > 100:
            ax.set_xscale("log")
        ax.set_xlabel(header[0])
    if args.kind != "heatmap" and data.shape[1] <= 12:
        ax.legend(fontsize=7)
    ax.set_title(Path(args.input).name)
    path = out / (Path(args.input).stem + ".svg")
    fig.savefig(path, format="svg")
    plt.close(fig)
    manifest.add_output(path)


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinlat",
        description="Single-excitation transport in dipolar spin networks "
                    "under local dephasing")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, gamma=True):
        p.add_argument("--out", type=Path, default=Path("."),
                       help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: SPINLAT_THREADS or all cores)")
        p.add_argument("--profile", choices=("desk", "full"), default="desk")
        if config:
            p.add_argument("--config", type=Path, default=None,
                           help="configuration JSON")
            p.add_argument("--demo", choices=("cluster", "pathways"),
                           default=None, help="use a built-in reference geometry")
        if gamma:
            p.add_argument("--gamma", type=parse_gamma_spec,
                           default=np.array([1e-3]),
                           help="dephasing rate or grid lo:hi:npts-log")

    p = sub.add_parser("gen-config", help="sample a random configuration")
    common(p, config=False, gamma=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--min-separation", type=float, default=1e-3)
    p.add_argument("--excitation", type=int, default=None)
    p.set_defaults(func=cmd_gen_config)

    p = sub.add_parser("couplings", help="coupling matrix, stats, histogram")
    common(p, gamma=False)
    p.set_defaults(func=cmd_couplings)

    p = sub.add_parser("spectrum", help="Liouvillian eigenvalues and slow-mode weights")
    common(p)
    p.add_argument("--slow-modes", type=int, default=10)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("evolve", help="population/purity trajectory")
    common(p)
    p.add_argument("--init-site", type=int, default=0)
    p.add_argument("--t-min", type=float, default=1e-2)
    p.add_argument("--t-max", type=float, default=1e10)
    p.add_argument("--t-points", type=int, default=600)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("transfer", help="integrated transfer matrix")
    common(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("survival", help="T_ii against dephasing")
    common(p)
    p.add_argument("--site", type=int, default=None)
    p.set_defaults(func=cmd_survival, gamma=None)

    def ness_args(p):
        p.add_argument("--inject", type=int, required=True)
        p.add_argument("--extract", type=int, required=True)
        p.add_argument("--gamma-l", type=float, default=1e-5)
        p.add_argument("--three-site", action="store_true")
        p.add_argument("--j", type=float, default=1e-2)
        p.add_argument("--eps", type=float, default=1e-4)

    p = sub.add_parser("ness", help="steady state, flux, and currents")
    common(p)
    ness_args(p)
    p.set_defaults(func=cmd_ness)

    p = sub.add_parser("flux-sweep", help="eta over a dephasing grid")
    common(p)
    p.add_argument("--inject", type=int, required=True)
    p.add_argument("--extract", type=int, required=True)
    p.add_argument("--gamma-l-list", type=str, default="1e-4,1e-5,1e-6")
    p.set_defaults(func=cmd_flux_sweep, gamma=None)

    p = sub.add_parser("pathway", help="dominant-current edge list")
    common(p)
    ness_args(p)
    p.add_argument("--threshold", type=float, default=0.2)
    p.set_defaults(func=cmd_pathway)

    p = sub.add_parser("table1", help="regime timescale grid")
    common(p, config=False, gamma=False)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("campaign", help="run an ensemble campaign from a JSON spec")
    common(p, config=False, gamma=False)
    p.add_argument("--spec", type=Path, required=True)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("plot", help="render a CSV as an SVG")
    common(p, config=False, gamma=False)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--kind", choices=("line", "loglog", "heatmap"),
                   default="line")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command=args.command,
        parameters={k: (str(v) if isinstance(v, Path)
                        else v.tolist() if isinstance(v, np.ndarray) else v)
                    for k, v in vars(args).items()
                    if k not in ("func",) and v is not None},
        seed=getattr(args, "seed", None),
        version=__version__,
    )
    if getattr(args, "config", None):
        manifest.inputs.append(str(args.config))
    manifest_path = out / "manifest.json"
    try:
        args.func(args, out, manifest)
    except INPUT_ERRORS as err:
        manifest.finish(manifest_path, status="input-error", error=str(err))
        print(f"spinlat: input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERICAL_ERRORS as err:
        manifest.finish(manifest_path, status="numerical-error", error=str(err))
        print(f"spinlat: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    manifest.add_output(manifest_path)
    manifest.finish(manifest_path)
    return EXIT_OK
