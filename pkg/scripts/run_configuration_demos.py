#!/usr/bin/env python3
"""Reference-geometry walkthrough: trajectories, transfer measures, spectra,
steady flux, and current maps for the two built-in ten-site networks.

The tight-cluster network shows hierarchical relaxation (population plateaus
at 1/3 and 1/7, single-peak flux); the competing-pathway network shows the
dephasing-controlled route switch and a double-peak flux curve.
"""
import argparse
from pathlib import Path

import numpy as np

from spinlat.dynamics import evolve, log_time_grid, site_state
from spinlat.geometry import (competing_pathway_configuration, coupling_matrix,
                              coupling_stats, save_configuration,
                              tight_cluster_configuration)
from spinlat.liouvillian import (build_hamiltonian, build_liouvillian,
                                 decompose, export_spectrum_rows)
from spinlat.measures import dephasing_builder, gamma_grid, survival_curve, transfer_matrix
from spinlat.ness import NessProblem, dominant_pathway, flux_sweep, solve_ness
from spinlat.tables import write_csv, write_json


def analyze(config, name, inject, extract, out: Path):
    out = out / name
    out.mkdir(parents=True, exist_ok=True)
    save_configuration(config, out / "configuration.json")
    cm = coupling_matrix(config)
    stats = coupling_stats(cm)
    write_csv(out / "coupling_histogram.csv", ["bin_lo", "bin_hi", "count"],
              stats.histogram.tolist())
    h = build_hamiltonian(config, cm)
    n = config.n_sites

    # population/purity trajectories at three dephasing strengths
    times = log_time_grid(1e-2, 1e11, 700)
    for gamma in (1e-5, 1e-3, 1e-1):
        liou = build_liouvillian(h, np.full(n, gamma))
        traj = evolve(liou, site_state(n, inject), times)
        write_csv(out / f"trajectory_gamma{gamma:g}.csv",
                  ["t"] + [f"P_{j}" for j in range(n)] + ["purity"],
                  [[t, *traj.populations[k], traj.purity[k]]
                   for k, t in enumerate(times)])

    # transfer rows and survival curves over the dephasing grid
    gammas = gamma_grid(1e-6, 1.0, 40)
    rows = []
    for gamma in gammas:
        tm = transfer_matrix(build_liouvillian(h, np.full(n, gamma)),
                             sites=[inject])
        rows.append([gamma, *tm.values[inject]])
    write_csv(out / "transfer_rows.csv",
              ["gamma"] + [f"T_{inject}{j}" for j in range(n)], rows)
    build = dephasing_builder(h)
    summary = []
    for site in range(n):
        curve = survival_curve(build, site, gammas)
        summary.append((site, curve.gamma_star, curve.t_min))
    write_csv(out / "survival_summary.csv", ["site", "gamma_star", "t_min"],
              summary)

    # Liouvillian spectrum at strong dephasing
    spec = decompose(build_liouvillian(h, np.full(n, 1e-1)))
    write_csv(out / "spectrum_gamma0.1.csv", ["index", "re", "im"],
              export_spectrum_rows(spec))

    # steady flux against dephasing plus the current map at each peak
    sweep = flux_sweep(h, inject, extract, np.geomspace(1e-6, 1.0, 49),
                       [1e-4, 1e-5, 1e-6])
    write_csv(out / "flux.csv", ["gamma", "gamma_l", "eta"],
              [(g, gl, sweep.eta[a, k])
               for a, gl in enumerate(sweep.loss_rates)
               for k, g in enumerate(sweep.gammas)])
    payload = {}
    for peak in sweep.peaks[1e-5]:
        problem = NessProblem(hamiltonian=h, dephasing_rates=np.full(n, peak),
                              inject=inject, extract=extract, loss_rate=1e-5)
        result = solve_ness(problem)
        path = dominant_pathway(result, inject, extract, threshold=0.3)
        payload[f"{peak:g}"] = {
            "eta": result.eta,
            "is_chain": path.is_chain,
            "edges": [{"from": m, "to": t, "current": f}
                      for m, t, f in path.edges],
        }
    write_json(out / "peak_pathways.json", payload)
    print(f"{name}: flux peaks at {sweep.peaks[1e-5]}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("results/configurations"))
    args = parser.parse_args()
    analyze(tight_cluster_configuration(), "tight_cluster", 0, 8, args.out)
    analyze(competing_pathway_configuration(), "competing_pathways", 5, 8, args.out)


if __name__ == "__main__":
    main()
