"""Command-line workflows: fit, compare, export-density and demos.

Every run is keyed to the single seed in its config: chain seeds, the
replicate run used for optimism estimation, and synthetic data all derive
from it, so rerunning a command reproduces its output files byte for byte.
Output files carry no timestamps for the same reason; provenance lives in
``manifest.json`` (package version, seed, config hash, dataset fingerprint).

Exit codes: 0 success, 2 validation, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import (
    aml_dataset,
    dataset_fingerprint,
    ingest,
    serialize,
    synthetic_ae_dataset,
)
from .exceptions import NumericError, ValidationError
from .likelihood import CensoredDataset, LikelihoodMode
from .mcmc import ChainConfig, PosteriorSamples, export_density, run, summarize
from .models import AE_VARIANTS, Model, NormalGlmModel, SurvivalExpModel, ae_model
from .selection import SelectionReport, compare, make_selection_report

__all__ = ["main", "cmd_fit", "cmd_compare", "cmd_export_density", "cmd_demo"]

OUTPUT_ROOT_ENV = "CENSDEV_OUTPUT_ROOT"

REPORT_COLUMNS = ("model", "Dbar", "pD", "DIC", "p_opt", "PED")

DEMO_SEEDS = {"survival": 20260810, "ae-synthetic": 20260801}


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


def _load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError:
        raise
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path}: invalid JSON ({exc})") from None
    if not isinstance(config, dict):
        raise ValidationError(f"config {path}: expected a JSON object")
    return config


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _resolve_output_dir(config_dir: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    path = Path(config_dir)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_dataset(spec: str, base_dir: Path) -> tuple[CensoredDataset, str]:
    if spec == "bundled:aml":
        return aml_dataset(), spec
    path = Path(spec)
    if not path.is_absolute():
        path = base_dir / path
    return ingest(path), str(path)


def _chain_config(section: dict) -> ChainConfig:
    known = {"n_chains", "burn_in", "n_keep", "thin", "seed", "adapt_window"}
    unknown = set(section) - known
    if unknown:
        raise ValidationError(f"unknown chain settings: {sorted(unknown)}")
    try:
        return ChainConfig(**section)
    except TypeError as exc:
        raise ValidationError(f"bad chain settings: {exc}") from None


def _column_index(data: CensoredDataset, name: str) -> int:
    if name not in data.covariate_names:
        raise ValidationError(
            f"dataset has no covariate column {name!r}; "
            f"available: {list(data.covariate_names)}"
        )
    return data.covariate_names.index(name)


def _build_model(section: dict, data: CensoredDataset) -> Model:
    family = section.get("family")
    hyper = dict(section.get("hyperparameters", {}))
    if family == "survival-exponential":
        return SurvivalExpModel(
            tau0=hyper.pop("tau0", 0.01),
            tau1=hyper.pop("tau1", 0.01),
            group_col=_column_index(data, section.get("group_column", "group")),
        )
    if family == "censored-binomial":
        variant = section.get("variant", "A").upper()
        if variant not in AE_VARIANTS:
            raise ValidationError(f"unknown variant {variant!r}, expected one of {AE_VARIANTS}")
        drugs = {int(o.covariates[_column_index(data, "drug")]) for o in data}
        model = ae_model(
            variant,
            n_drugs=max(drugs) + 1,
            n_studies=len(data),
            beta_shapes=tuple(hyper.pop("beta_shapes", (1.0, 1.0))),
            half_cauchy_scale=hyper.pop("half_cauchy_scale", 1.0),
            mean_precision=hyper.pop("mean_precision", 0.01),
        )
        # Re-point covariate columns by header name.
        if hasattr(model, "drug_col"):
            model.drug_col = _column_index(data, "drug")
        if hasattr(model, "class_col"):
            model.class_col = _column_index(data, "drug_class")
        if hasattr(model, "study_col"):
            model.study_col = _column_index(data, "study")
        return model
    if family == "censored-normal-glm":
        return NormalGlmModel(
            n_covariates=len(data.covariate_names),
            coef_precision=hyper.pop("coef_precision", 0.01),
            half_cauchy_scale=hyper.pop("half_cauchy_scale", 1.0),
        )
    raise ValidationError(f"unknown model family {family!r}")


def _derive_run_seeds(seed: int, n_pairs: int) -> list[tuple[int, int]]:
    """Deterministic (run A, run B) seed pairs flowing from the config seed."""
    states = np.random.SeedSequence(seed).generate_state(2 * n_pairs, dtype=np.uint64)
    return [(int(states[2 * i]), int(states[2 * i + 1])) for i in range(n_pairs)]


# ---------------------------------------------------------------------------
# Artifact writers
# ---------------------------------------------------------------------------


def _write_samples_csv(path: Path, samples: PosteriorSamples) -> None:
    header = ["chain", *samples.param_names, "deviance"]
    lines = [",".join(header)]
    for i in range(samples.draws.shape[0]):
        cells = [str(int(samples.chain_ids[i]))]
        cells += [_fmt(v) for v in samples.draws[i]]
        cells.append(_fmt(samples.deviance_trace[i]))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_samples_csv(path: Path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty samples file")
    names = lines[0].split(",")
    rows = [[float(c) for c in line.split(",")] for line in lines[1:] if line]
    return names, np.array(rows)


def _write_summary_csv(path: Path, samples: PosteriorSamples) -> None:
    lines = ["param,mean,sd,q2.5,q50,q97.5,rhat"]
    for s in summarize(samples):
        lines.append(
            ",".join(
                [s.name, _fmt(s.mean), _fmt(s.sd), _fmt(s.q025), _fmt(s.q500),
                 _fmt(s.q975), _fmt(s.rhat)]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_density_files(
    out_dir: Path, samples: PosteriorSamples, tag: str, grid_size: int = 512
) -> list[str]:
    names = []
    for param in samples.param_names:
        grid, density = export_density(samples.param(param), grid_size=grid_size)
        name = f"density_{tag}_{param}.csv"
        _write_density_csv(out_dir / name, grid, density)
        names.append(name)
    return names


def _write_density_csv(path: Path, grid: np.ndarray, density: np.ndarray) -> None:
    lines = ["grid,density"]
    lines += [f"{_fmt(g)},{_fmt(d)}" for g, d in zip(grid, density)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _report_row(report: SelectionReport) -> str:
    return ",".join(
        [report.label, _fmt(report.dbar), _fmt(report.pd), _fmt(report.dic),
         _fmt(report.p_opt), _fmt(report.ped)]
    )


def _report_json(report: SelectionReport) -> dict:
    return {
        "model": report.label,
        "Dbar": float(report.dbar),
        "pD": float(report.pd),
        "DIC": float(report.dic),
        "p_opt": float(report.p_opt),
        "PED": float(report.ped),
        "mode": report.mode.value,
        "dataset_id": report.dataset_id,
        "popt_method": report.popt_method,
        "overfit": bool(report.overfit),
        "warnings": list(report.warnings),
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


def _write_manifest(out_dir: Path, config: dict, dataset_src: str,
                    data: CensoredDataset, outputs: list[str]) -> None:
    _write_json(
        out_dir / "manifest.json",
        {
            "package": "censdev",
            "version": __version__,
            "seed": config.get("chains", {}).get("seed"),
            "config_sha256": _config_hash(config),
            "dataset": dataset_src,
            "dataset_fingerprint": dataset_fingerprint(data),
            "outputs": sorted(outputs),
        },
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _fit_one(
    model: Model,
    data: CensoredDataset,
    mode: LikelihoodMode,
    chains: ChainConfig,
    out_dir: Path,
    label: str,
    dataset_id: str,
) -> tuple[SelectionReport | None, list[str]]:
    """Run the sampler (twice in exact mode) and write fit artifacts."""
    (seed_a, seed_b) = _derive_run_seeds(chains.seed, 1)[0]
    cfg_a = dataclasses.replace(chains, seed=seed_a)
    samples_a = run(model, data, mode, cfg_a)
    outputs = []
    _write_samples_csv(out_dir / "samples_a.csv", samples_a)
    outputs.append("samples_a.csv")
    _write_summary_csv(out_dir / "summary.csv", samples_a)
    outputs.append("summary.csv")
    outputs += _write_density_files(out_dir, samples_a, mode.value)

    if mode is LikelihoodMode.EXACT:
        cfg_b = dataclasses.replace(chains, seed=seed_b)
        samples_b = run(model, data, mode, cfg_b)
        _write_samples_csv(out_dir / "samples_b.csv", samples_b)
        outputs.append("samples_b.csv")
        report = make_selection_report(
            label, model, data, samples_a, samples_b, dataset_id=dataset_id
        )
        _write_json(out_dir / "report.json", _report_json(report))
        (out_dir / "report.csv").write_text(
            ",".join(REPORT_COLUMNS) + "\n" + _report_row(report) + "\n", "utf-8"
        )
        outputs += ["report.json", "report.csv"]
        return report, outputs

    mean_monitored = float(samples_a.deviance_trace.mean())
    _write_json(
        out_dir / "report.json",
        {
            "mode": mode.value,
            "model": label,
            "mean_monitored_deviance": mean_monitored,
            "note": (
                "latent-imputation monitor: censored rows contribute log(1)=0; "
                "not usable for DIC/PED model selection"
            ),
        },
    )
    outputs.append("report.json")
    return None, outputs


def cmd_fit(config: dict, config_dir: Path) -> int:
    data, dataset_src = _load_dataset(config["dataset"], config_dir)
    model = _build_model(config.get("model", {}), data)
    mode = LikelihoodMode(config.get("mode", "exact"))
    chains = _chain_config(config.get("chains", {}))
    out_dir = _resolve_output_dir(config.get("output_dir", "censdev-out"))
    label = config.get("label", model.label)
    dataset_id = dataset_fingerprint(data)

    report, outputs = _fit_one(model, data, mode, chains, out_dir, label, dataset_id)
    _write_manifest(out_dir, config, dataset_src, data, outputs + ["manifest.json"])
    if report is not None:
        print(f"[{label}] Dbar={report.dbar:.3f} pD={report.pd:.3f} "
              f"DIC={report.dic:.3f} p_opt={report.p_opt:.3f} PED={report.ped:.3f}")
    else:
        payload = json.loads((out_dir / "report.json").read_text())
        print(f"[{label}] mean monitored deviance "
              f"{payload['mean_monitored_deviance']:.3f} ({mode.value} mode)")
    print(f"artifacts in {out_dir}")
    return 0


def cmd_compare(config: dict, config_dir: Path) -> int:
    data, dataset_src = _load_dataset(config["dataset"], config_dir)
    chains = _chain_config(config.get("chains", {}))
    out_dir = _resolve_output_dir(config.get("output_dir", "censdev-out"))
    dataset_id = dataset_fingerprint(data)

    model_sections = config.get("models")
    if not model_sections:
        variants = config.get("variants", list(AE_VARIANTS))
        model_sections = [
            {"label": v, "family": "censored-binomial", "variant": v}
            for v in variants
        ]
    if len(model_sections) < 2:
        raise ValidationError("compare needs at least two models")

    seed_pairs = _derive_run_seeds(chains.seed, len(model_sections))
    reports = []
    outputs = []
    for section, (seed_a, seed_b) in zip(model_sections, seed_pairs):
        model = _build_model(section, data)
        label = section.get("label", model.label)
        cfg_a = dataclasses.replace(chains, seed=seed_a)
        cfg_b = dataclasses.replace(chains, seed=seed_b)
        samples_a = run(model, data, LikelihoodMode.EXACT, cfg_a)
        samples_b = run(model, data, LikelihoodMode.EXACT, cfg_b)
        report = make_selection_report(
            label, model, data, samples_a, samples_b, dataset_id=dataset_id
        )
        reports.append(report)
        print(f"fitted {label}: DIC={report.dic:.2f} PED={report.ped:.2f}"
              + ("  [overfit]" if report.overfit else ""))

    ranked = compare(reports)
    table_lines = [",".join(REPORT_COLUMNS)] + [_report_row(r) for r in ranked]
    (out_dir / "comparison.csv").write_text("\n".join(table_lines) + "\n", "utf-8")
    _write_json(
        out_dir / "comparison.json", {"ranked": [_report_json(r) for r in ranked]}
    )
    outputs += ["comparison.csv", "comparison.json"]
    _write_manifest(out_dir, config, dataset_src, data, outputs + ["manifest.json"])

    print()
    print(_format_table(ranked))
    overfit = [r.label for r in ranked if r.overfit]
    if overfit:
        print(f"overfit flag (p_opt > 5*pD): {', '.join(overfit)}")
    print(f"artifacts in {out_dir}")
    return 0


def _format_table(reports: list[SelectionReport]) -> str:
    rows = [REPORT_COLUMNS] + [
        (r.label, f"{r.dbar:.2f}", f"{r.pd:.2f}", f"{r.dic:.2f}",
         f"{r.p_opt:.2f}", f"{r.ped:.2f}")
        for r in reports
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(len(REPORT_COLUMNS))]
    return "\n".join(
        "  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows
    )


def cmd_export_density(args) -> int:
    names, matrix = _read_samples_csv(Path(args.trace))
    if args.param not in names:
        raise ValidationError(
            f"trace has no column {args.param!r}; available: {names}"
        )
    trace = matrix[:, names.index(args.param)]
    bandwidth = args.bandwidth
    try:
        bandwidth = float(bandwidth)
    except ValueError:
        pass
    grid, density = export_density(trace, grid_size=args.grid_size,
                                   bandwidth_rule=bandwidth)
    out = Path(args.out) if args.out else Path(args.trace).with_name(
        f"density_{args.param}.csv"
    )
    _write_density_csv(out, grid, density)
    print(f"wrote {out}")
    return 0


def _demo_chains(quick: bool, seed: int, survival: bool) -> ChainConfig:
    if survival:
        if quick:
            return ChainConfig(n_chains=2, burn_in=500, n_keep=500, seed=seed)
        return ChainConfig(n_chains=3, burn_in=30000, n_keep=10000, seed=seed)
    if quick:
        return ChainConfig(n_chains=2, burn_in=400, n_keep=400, seed=seed)
    return ChainConfig(n_chains=2, burn_in=2000, n_keep=2000, seed=seed)


def cmd_demo(which: str, output_dir: str | None, quick: bool = False) -> int:
    seed = DEMO_SEEDS[which]
    out_root = _resolve_output_dir(output_dir or f"censdev-demo-{which}")
    if which == "survival":
        return _demo_survival(out_root, seed, quick)
    return _demo_ae(out_root, seed, quick)


def _demo_survival(out_root: Path, seed: int, quick: bool) -> int:
    data = aml_dataset()
    dataset_id = dataset_fingerprint(data)
    chains = _demo_chains(quick, seed, survival=True)
    headline = {}
    for mode in (LikelihoodMode.EXACT, LikelihoodMode.DINTERVAL):
        model = SurvivalExpModel()
        out_dir = out_root / f"survival-{mode.value}"
        out_dir.mkdir(parents=True, exist_ok=True)
        config = {
            "label": f"survival-{mode.value}",
            "dataset": "bundled:aml",
            "model": {"family": "survival-exponential"},
            "mode": mode.value,
            "chains": dataclasses.asdict(chains),
            "output_dir": str(out_dir),
        }
        _, outputs = _fit_one(
            model, data, mode, chains, out_dir, config["label"], dataset_id
        )
        _write_manifest(out_dir, config, "bundled:aml", data,
                        outputs + ["manifest.json"])
        payload = json.loads((out_dir / "report.json").read_text())
        headline[mode] = (
            payload["Dbar"] if "Dbar" in payload else payload["mean_monitored_deviance"]
        )
    gap = headline[LikelihoodMode.EXACT] - headline[LikelihoodMode.DINTERVAL]
    print()
    print(f"exact-mode mean deviance:              {headline[LikelihoodMode.EXACT]:.3f}")
    print(f"latent-imputation monitored deviance:  {headline[LikelihoodMode.DINTERVAL]:.3f}")
    print(f"deviance understated by the default monitor: {gap:.3f}")
    print(f"artifacts in {out_root}")
    return 0


def _demo_ae(out_root: Path, seed: int, quick: bool) -> int:
    data = synthetic_ae_dataset(seed=seed)
    dataset_path = (out_root / "ae_synthetic.csv").resolve()
    dataset_path.write_text(serialize(data), encoding="utf-8")
    chains = _demo_chains(quick, seed, survival=False)
    config = {
        "dataset": str(dataset_path),
        "variants": list(AE_VARIANTS),
        "chains": dataclasses.asdict(chains),
        "output_dir": str(out_root.resolve()),
    }
    return cmd_compare(config, out_root)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="censdev",
        description="Bayesian censored-data inference with exact deviance monitors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one model from a JSON config")
    p_fit.add_argument("--config", required=True)

    p_cmp = sub.add_parser("compare", help="fit several models and rank by DIC/PED")
    p_cmp.add_argument("--config", required=True)

    p_den = sub.add_parser("export-density", help="kernel density from a trace file")
    p_den.add_argument("--trace", required=True)
    p_den.add_argument("--param", required=True)
    p_den.add_argument("--grid-size", type=int, default=512)
    p_den.add_argument("--bandwidth", default="scott")
    p_den.add_argument("--out", default=None)

    p_demo = sub.add_parser("demo", help="run a bundled end-to-end example")
    p_demo.add_argument("which", choices=["survival", "ae-synthetic"])
    p_demo.add_argument("--output-dir", default=None)
    p_demo.add_argument("--quick", action="store_true",
                        help="small chains for a fast smoke run")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            config_path = Path(args.config)
            return cmd_fit(_load_config(config_path), config_path.parent)
        if args.command == "compare":
            config_path = Path(args.config)
            return cmd_compare(_load_config(config_path), config_path.parent)
        if args.command == "export-density":
            return cmd_export_density(args)
        return cmd_demo(args.which, args.output_dir, args.quick)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
