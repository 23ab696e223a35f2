"""Command line interface.

Subcommands mirror the library layers: `clt run/report` drive experiments,
`sample` and `gibbs-sample` emit configurations, and `hilbert-tab`,
`perturb-dump`, `transport-verify` tabulate the analytic machinery.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import click
import numpy as np

from .gibbs import GibbsSpec, gibbs_mcmc
from .harness import ExperimentConfig, run_clt_experiment
from .perturb import build_approx_measure
from .pointproc import PointConfiguration
from .sampler import sample_bulk
from .singular import HilbertEvaluator
from .testfn import get_test_function
from .transport import (
    TransportBundle,
    difference_field,
    s_max,
    verify_energy_expansion,
    verify_energy_splitting,
)


@click.group()
def main():
    """Numerical laboratory for bulk log-gas point processes."""


@main.group()
def clt():
    """Run CLT verification experiments and render their reports."""


@clt.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="JSON experiment config.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path),
              help="Output directory.")
def clt_run(config_path, out_dir):
    """Execute one experiment and write report JSON plus CSV tables."""
    cfg = ExperimentConfig.from_json(config_path.read_text())
    report = run_clt_experiment(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json())

    with open(out_dir / "mgf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "log_mgf", "band_lo", "band_hi", "target"])
        m = report.mgf
        for row in zip(m["t"], m["log_mgf"], m["band_lo"], m["band_hi"],
                       m.get("target", [float("nan")] * len(m["t"]))):
            w.writerow(row)
    with open(out_dir / "discrepancy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["R", "var", "var_over_R", "jackknife_se"])
        for row in report.discrepancy["rows"]:
            w.writerow([row["R"], row["var"], row["var_over_R"],
                        row["jackknife_se"]])
    with open(out_dir / "fluctuations.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "fluctuation"])
        for i, v in enumerate(report.fluctuations):
            w.writerow([i, v])
    click.echo(f"report written to {out_dir}")
    click.echo(f"variance {report.variance:.6g} vs target "
               f"{report.target_variance:.6g}; KS p = {report.ks_pvalue:.3g}")


@clt.command("report")
@click.option("--in", "in_dir", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Directory holding report.json.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Figure directory (defaults to the input directory).")
def clt_report(in_dir, out_dir):
    """Render matplotlib figures for a saved report."""
    from .plots import render_report_figures

    payload = json.loads((in_dir / "report.json").read_text())
    target = out_dir if out_dir is not None else in_dir
    paths = render_report_figures(payload, target)
    for p in paths:
        click.echo(str(p))


def _phi_option(fn, amplitude, ell):
    return get_test_function(fn, amplitude).rescaled(ell)


@main.command("hilbert-tab")
@click.option("--lam", type=float, required=True)
@click.option("--ell", type=float, required=True)
@click.option("--function", "fn", default="bump", show_default=True)
@click.option("--amplitude", type=float, default=1.0, show_default=True)
@click.option("--x-min", type=float, default=None)
@click.option("--x-max", type=float, default=None)
@click.option("--num", type=int, default=200, show_default=True)
@click.option("--derivatives", default="0,1,2", show_default=True)
@click.option("--relaxed/--strict", default=True, show_default=True,
              help="Relax the scale separation to ell < lam/4.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def hilbert_tab(lam, ell, fn, amplitude, x_min, x_max, num, derivatives,
                relaxed, out_path):
    """Tabulate the weighted finite Hilbert transform to CSV (x, k, value)."""
    H = HilbertEvaluator(lam, _phi_option(fn, amplitude, ell), relaxed=relaxed)
    ks = [int(k) for k in derivatives.split(",")]
    lo = -lam if x_min is None else x_min
    hi = lam if x_max is None else x_max
    xs = np.linspace(lo, hi, num)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "k", "value"])
        for k in ks:
            for x in xs:
                w.writerow([repr(float(x)), k, repr(H.value(float(x), k))])
    click.echo(f"wrote {len(ks) * num} rows to {out_path}")


@main.command("perturb-dump")
@click.option("--lam", type=float, required=True)
@click.option("--ell", type=float, required=True)
@click.option("--function", "fn", default="bump", show_default=True)
@click.option("--amplitude", type=float, default=1.0, show_default=True)
@click.option("--num", type=int, default=400, show_default=True)
@click.option("--relaxed/--strict", default=True, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def perturb_dump(lam, ell, fn, amplitude, num, relaxed, out_path):
    """Dump (x, m, m_tilde, LP, ErrorLog) as CSV with a JSON parameter header."""
    B = build_approx_measure(lam, ell, _phi_option(fn, amplitude, ell),
                             relaxed=relaxed)
    xs = np.linspace(-lam * (1 - 1e-6), lam * (1 - 1e-6), num)
    header = {"lam": lam, "ell": ell, "function": fn, "amplitude": amplitude,
              "junctions": list(B.junctions)}
    with open(out_path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["x", "m", "m_tilde", "log_potential", "error_log"])
        for x in xs:
            w.writerow([repr(float(x)), repr(float(B.m(x))),
                        repr(float(B.m_tilde(x))),
                        repr(B.log_potential(float(x), "full_m")),
                        repr(B.log_potential(float(x), "error"))])
    click.echo(f"wrote {num} rows to {out_path}")


@main.command("transport-verify")
@click.option("--lam", type=float, required=True)
@click.option("--ell", type=float, required=True)
@click.option("--function", "fn", default="bump", show_default=True)
@click.option("--amplitude", type=float, default=1.0, show_default=True)
@click.option("--s-frac", type=float, default=0.5, show_default=True,
              help="s as a fraction of s_max.")
@click.option("--points", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--relaxed/--strict", default=True, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def transport_verify(lam, ell, fn, amplitude, s_frac, points, seed, relaxed,
                     out_path):
    """Verify the energy identities on one random configuration; emit JSON."""
    B = build_approx_measure(lam, ell, _phi_option(fn, amplitude, ell),
                             relaxed=relaxed)
    T = TransportBundle(B, s_frac * s_max(B))
    rng = np.random.default_rng(seed)
    eta = PointConfiguration(rng.uniform(-lam + 2, lam - 2, points), (-lam, lam))
    split = verify_energy_splitting(T, eta)
    expand = verify_energy_expansion(T, eta)
    dfield = difference_field(T, eta, 2.0 * lam)
    out = {
        "lam": lam, "ell": ell, "s": T.s, "s_max": T.smax, "points": points,
        "seed": seed,
        "splitting": split.to_json_dict(),
        "expansion": expand.to_json_dict(),
        "difference_field": {
            "x": 2.0 * lam, "df": dfield.df, "lp_part": dfield.lp_part,
            "errorlog_part": dfield.errorlog_part, "errordf": dfield.errordf,
            "residual": dfield.residual,
        },
        "tolerances": {"identity_relative": 1e-5, "difference_field": 1e-7},
    }
    Path(out_path).write_text(json.dumps(out, sort_keys=True, indent=1))
    click.echo(f"splitting residual {split.residual:.3e}; "
               f"expansion residual {expand.residual:.3e}; "
               f"field residual {dfield.residual:.3e}")


@main.command("gibbs-sample")
@click.option("--beta", type=float, required=True)
@click.option("--lam", type=float, required=True)
@click.option("--steps", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--exterior", "exterior_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Configuration file in the point-per-line format.")
@click.option("--thin", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def gibbs_sample(beta, lam, steps, seed, exterior_path, thin, out_dir):
    """Run the windowed Metropolis chain against a sampled exterior."""
    gamma = PointConfiguration.from_text(exterior_path.read_text())
    spec = GibbsSpec(beta=beta, lam=lam, gamma=gamma)
    out = gibbs_mcmc(spec, steps=steps, seed=seed, thin=thin)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, c in enumerate(out.configs):
        (out_dir / f"sample_{i:05d}.txt").write_text(c.to_text())
    meta = {"beta": beta, "lam": lam, "steps": steps, "seed": seed,
            "acceptance_rate": out.acceptance_rate,
            "n_samples": len(out.configs), "n_interior": spec.n_interior}
    (out_dir / "metadata.json").write_text(json.dumps(meta, sort_keys=True,
                                                      indent=1))
    click.echo(f"{len(out.configs)} samples, acceptance "
               f"{out.acceptance_rate:.3f}")


@main.command("sample")
@click.option("--n", type=int, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--replicas", type=int, default=1, show_default=True)
@click.option("--window-fraction", type=float, default=0.05, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def sample_cmd(n, beta, seed, replicas, window_fraction, out_dir):
    """Sample bulk-rescaled eigenvalue configurations to text files."""
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {"n": n, "beta": beta, "seed": seed, "replicas": replicas,
            "window_fraction": window_fraction, "samples": []}
    for i in range(replicas):
        b = sample_bulk(n, beta, seed, window_fraction, stream=i)
        name = f"config_{i:05d}.txt"
        (out_dir / name).write_text(b.config.to_text())
        meta["samples"].append({
            "file": name, "stream": i, "points": len(b.config),
            "density_estimate": b.density_estimate,
            "semicircle_density": b.semicircle_density,
            "spectral_radius": b.spectral_radius,
        })
    (out_dir / "metadata.json").write_text(json.dumps(meta, sort_keys=True,
                                                      indent=1))
    click.echo(f"wrote {replicas} configurations to {out_dir}")


if __name__ == "__main__":
    main()
