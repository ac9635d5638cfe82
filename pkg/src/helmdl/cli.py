"""Command-line workbench: data generation, training, sampling, evaluation,
sampler ablations, sensitivity studies, and summary reports.

Every command resolves its configuration up front (defaults <- config file
<- flags), echoes the resolved config and tool versions into the output
directory, and emits CSV tables Plus SVG plots.  Outputs are bit-identical
under re-runs with the same resolved config and seeds.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, diffusion, metrics, store, svg
from .config import RunConfig, load_config
from .fields import (
    CoefficientField,
    GrfHyperParams,
    build_conditioning,
    draw_hyperparams,
    sample_grf,
    source_mask,
)
from .nn import DenoiserConfig
from .sensitivity import HomotopyStudy, Probe, run_homotopy
from .solver1d import solve_helmholtz_1d

DATA_STREAM = 101  # spawn-key tag for per-record dataset draws
SENS_STREAM = 301

MODEL_NAMES = ("diffusion", "regressor")


# ---------------------------------------------------------------------------
# paths and small helpers


def dataset_path(out_dir, freq: float) -> Path:
    return Path(out_dir) / f"dataset_f{freq:g}.hdl"


def checkpoint_path(out_dir, freq: float, kind: str) -> Path:
    return Path(out_dir) / f"{kind}_f{freq:g}.hdck"


def write_csv(path, header: list[str], rows: list[tuple]) -> None:
    """Plain UTF-8 CSV with '.' decimals; floats use shortest round-trip repr."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _echo_run_info(cfg: RunConfig, out_dir: Path, stage: str, argv) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.dump(out_dir / "config_resolved.json")
    info = {
        "stage": stage,
        "argv": list(argv),
        "versions": {
            "helmdl": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "seeds": {
            "data": cfg.data.seed,
            "train": cfg.train.seed,
            "sample": cfg.sample.seed,
            "ablation": cfg.ablation.seed,
            "sensitivity": cfg.sensitivity.seed,
        },
    }
    with open(out_dir / f"run_{stage}.json", "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")


def base_hyperparams(cfg: RunConfig) -> GrfHyperParams:
    g = cfg.grf
    return GrfHyperParams(
        alpha=1.0,
        ell=0.5,
        c_bg=g.c_bg,
        sigma_c=g.sigma_c,
        c_min=g.c_min,
        c_max=g.c_max,
        alpha_range=tuple(g.alpha_range),
        ell_range=tuple(g.ell_range),
    )


# ---------------------------------------------------------------------------
# pipeline stages (importable; the commands below are thin wrappers)


def generate_dataset(cfg: RunConfig, freq: float, seed: int) -> store.Dataset:
    """Draw GRF media, solve the reference problem, and package the records."""
    n_total = sum(cfg.data.splits.values())
    shape = (cfg.grid.n,)
    dx = cfg.grid.dx
    base_hp = base_hyperparams(cfg)
    mask = source_mask(shape, (cfg.source.center,), cfg.source.radius)

    c_all = np.empty((n_total,) + shape)
    u_all = np.empty((n_total,) + shape, dtype=complex)
    for i in range(n_total):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(DATA_STREAM, i))
        hp_state, field_seed = (int(s) for s in ss.generate_state(2))
        hp = draw_hyperparams(base_hp, np.random.default_rng(hp_state))
        c = sample_grf(shape, hp, field_seed, dx=dx)
        c_all[i] = c.values
        u_all[i] = solve_helmholtz_1d(c, freq).values

    n_train = cfg.data.splits["train"]
    normalization = {
        "c_mean": float(c_all[:n_train].mean()),
        "c_std": float(c_all[:n_train].std()),
        "u_mean": float(u_all[:n_train].real.mean()),
        "u_std": float(u_all[:n_train].real.std()),
    }
    manifest = store.DatasetManifest(
        frequency_hz=float(freq),
        grid_shape=shape,
        dx=dx,
        grf={
            "c_bg": base_hp.c_bg,
            "sigma_c": base_hp.sigma_c,
            "c_min": base_hp.c_min,
            "c_max": base_hp.c_max,
            "alpha_range": list(base_hp.alpha_range),
            "ell_range": list(base_hp.ell_range),
        },
        normalization=normalization,
        splits=dict(cfg.data.splits),
        root_seed=int(seed),
        record_count=n_total,
        source={"center": cfg.source.center, "radius": cfg.source.radius},
        encoding_levels=cfg.source.encoding_levels,
    )
    return store.Dataset(
        c=c_all, mask=np.broadcast_to(mask, c_all.shape).copy(), u=u_all, manifest=manifest
    )


def conditioning_arrays(ds: store.Dataset) -> np.ndarray:
    """Stack per-record conditioning channels using the manifest statistics."""
    man = ds.manifest
    stats = (man.normalization["c_mean"], man.normalization["c_std"])
    out = []
    for i in range(ds.c.shape[0]):
        cf = CoefficientField(values=ds.c[i], dx=man.dx)
        z = build_conditioning(
            cf,
            (man.source["center"],),
            man.source["radius"],
            man.encoding_levels,
            stats=stats,
        )
        out.append(z.channels)
    return np.stack(out)


def normalized_targets(ds: store.Dataset) -> np.ndarray:
    norm = ds.manifest.normalization
    return (ds.u.real - norm["u_mean"]) / norm["u_std"]


def denormalize(fields: np.ndarray, manifest: store.DatasetManifest) -> np.ndarray:
    norm = manifest.normalization
    return fields * norm["u_std"] + norm["u_mean"]


def training_arrays(ds: store.Dataset):
    z = conditioning_arrays(ds)
    u = normalized_targets(ds)
    sl = store.split_slices(ds.manifest)
    return z[sl["train"]], u[sl["train"]], z[sl["val"]], u[sl["val"]]


def train_config(cfg: RunConfig) -> diffusion.TrainConfig:
    t = cfg.train
    return diffusion.TrainConfig(
        epochs=t.epochs,
        batch_size=t.batch_size,
        learning_rate=t.learning_rate,
        lr_decay_every=t.lr_decay_every,
        lr_decay_factor=t.lr_decay_factor,
        ema_decay=t.ema_decay,
        seed=t.seed,
        t_steps=t.t_steps,
        schedule_kind=t.schedule_kind,
    )


def net_config(cfg: RunConfig, cond_channels: int) -> DenoiserConfig:
    return DenoiserConfig(
        cond_channels=cond_channels,
        width=cfg.train.width,
        blocks=cfg.train.blocks,
        context_dim=cfg.train.context_dim,
    )


def _test_arrays(ds: store.Dataset):
    sl = store.split_slices(ds.manifest)["test"]
    return conditioning_arrays(ds)[sl], ds.u.real[sl], ds.c[sl]


def evaluate_models(cfg: RunConfig, out_dir: Path, freq: float) -> list[tuple]:
    """Per-frequency error rows: (frequency, model, metric, mean, std, n).

    The diffusion model draws ``num_samples`` fields per test input and the
    reported std is the mean over inputs of the per-input spread across
    samples; the regressor contributes one field per input.
    """
    ds = store.read_dataset(dataset_path(out_dir, freq))
    man = ds.manifest
    omega = 2.0 * np.pi * man.frequency_hz
    z_test, u_truth, c_test = _test_arrays(ds)
    rows = []
    for model_name in MODEL_NAMES:
        path = checkpoint_path(out_dir, freq, model_name)
        if not path.exists():
            continue
        ckpt = store.read_checkpoint(path)
        if model_name == "diffusion":
            fields = diffusion.sample_fields(
                diffusion.NetDenoiser(ckpt),
                z_test,
                diffusion.SampleConfig(
                    sampler=cfg.sample.sampler,
                    schedule=cfg.sample.schedule,
                    steps=cfg.sample.steps,
                    eta=cfg.sample.eta,
                    num_samples=cfg.sample.num_samples,
                    seed=cfg.sample.seed,
                ),
                trained_t_steps=ckpt.t_steps,
            )
        else:
            fields = diffusion.predict_regressor(ckpt, z_test)[:, None, :]
        fields = denormalize(fields, man)
        n_in, n_s = fields.shape[0], fields.shape[1]
        errs = {"rel_l2": [], "rel_h1": [], "rel_energy": []}
        for i in range(n_in):
            rep = metrics.ErrorReport()
            for s in range(n_s):
                rep.add(fields[i, s], u_truth[i], c_test[i], omega, man.dx)
            errs["rel_l2"].append(rep.rel_l2)
            errs["rel_h1"].append(rep.rel_h1)
            errs["rel_energy"].append(rep.rel_energy)
        for metric_name, values in errs.items():
            arr = np.asarray(values)  # (n_in, n_s)
            rows.append(
                (
                    float(freq),
                    model_name,
                    metric_name,
                    float(arr.mean()),
                    float(arr.std(axis=1).mean()),
                    arr.size,
                )
            )
    if not rows:
        raise FileNotFoundError(f"no trained checkpoints for f={freq:g} in {out_dir}")
    return rows


def run_ablation(cfg: RunConfig, out_dir: Path, freq: float) -> list[tuple]:
    """Sampler-by-step grid, one sample per test input per setting."""
    ds = store.read_dataset(dataset_path(out_dir, freq))
    man = ds.manifest
    omega = 2.0 * np.pi * man.frequency_hz
    ckpt = store.read_checkpoint(checkpoint_path(out_dir, freq, "diffusion"))
    z_test, u_truth, c_test = _test_arrays(ds)
    n = min(cfg.ablation.num_inputs, z_test.shape[0])
    z_test, u_truth, c_test = z_test[:n], u_truth[:n], c_test[:n]
    model = diffusion.NetDenoiser(ckpt)
    rows = []
    for sampler, schedule in cfg.ablation.samplers:
        for steps in cfg.ablation.step_budgets:
            fields = diffusion.sample_fields(
                model,
                z_test,
                diffusion.SampleConfig(
                    sampler=sampler,
                    schedule=schedule,
                    steps=steps,
                    num_samples=1,
                    seed=cfg.ablation.seed,
                ),
                trained_t_steps=ckpt.t_steps,
            )
            fields = denormalize(fields, man)
            rep = metrics.ErrorReport()
            for i in range(n):
                rep.add(fields[i, 0], u_truth[i], c_test[i], omega, man.dx)
            summary = rep.summary()
            rows.append(
                (
                    sampler,
                    schedule,
                    steps,
                    summary["rel_l2"][0],
                    summary["rel_h1"][0],
                    summary["rel_energy"][0],
                    n,
                )
            )
    return rows


def sensitivity_probes(cfg: RunConfig) -> list[Probe]:
    """Near probes sit within two source radii of the source; far probes
    within ``far_margin`` points of the right end."""
    n = cfg.grid.n
    c0, r = cfg.source.center, cfg.source.radius
    near_lo, near_hi = max(c0 - 2 * r, 1), min(c0 + 2 * r, n - 2)
    near = np.unique(np.linspace(near_lo, near_hi, cfg.sensitivity.near_probes).round().astype(int))
    far_lo = n - 1 - cfg.sensitivity.far_margin
    far = np.unique(np.linspace(far_lo, n - 2, cfg.sensitivity.far_probes).round().astype(int))
    return [Probe(index=(int(i),), tag="near") for i in near] + [
        Probe(index=(int(i),), tag="far") for i in far
    ]


def build_study(cfg: RunConfig) -> HomotopyStudy:
    shape = (cfg.grid.n,)
    base_hp = base_hyperparams(cfg)
    seeds = np.random.SeedSequence(entropy=cfg.sensitivity.seed, spawn_key=(SENS_STREAM,))
    states = seeds.generate_state(2 * (cfg.sensitivity.directions + 1))
    fields_out = []
    for d in range(cfg.sensitivity.directions + 1):
        hp = draw_hyperparams(base_hp, np.random.default_rng(int(states[2 * d])))
        fields_out.append(sample_grf(shape, hp, int(states[2 * d + 1]), dx=cfg.grid.dx))
    return HomotopyStudy(
        c0=fields_out[0],
        directions=fields_out[1:],
        s_grid=np.linspace(0.0, 1.0, cfg.sensitivity.s_steps),
        probes=sensitivity_probes(cfg),
    )


def _model_evaluator(cfg: RunConfig, out_dir: Path, freq: float, name: str):
    ckpt = store.read_checkpoint(checkpoint_path(out_dir, freq, name))
    ds_man = store.read_dataset(dataset_path(out_dir, freq)).manifest
    stats = (ds_man.normalization["c_mean"], ds_man.normalization["c_std"])

    def evaluator(c: CoefficientField) -> np.ndarray:
        z = build_conditioning(
            c,
            (ds_man.source["center"],),
            ds_man.source["radius"],
            ds_man.encoding_levels,
            stats=stats,
        ).channels[None]
        if name == "regressor":
            pred = diffusion.predict_regressor(ckpt, z)[0]
        else:
            seed = int.from_bytes(hashlib.sha256(c.values.tobytes()).digest()[:4], "little")
            pred = diffusion.sample_fields(
                diffusion.NetDenoiser(ckpt),
                z,
                diffusion.SampleConfig(
                    sampler="ddpm",
                    schedule=ckpt.schedule_kind,
                    steps=cfg.sensitivity.model_steps,
                    num_samples=1,
                    seed=seed,
                ),
                trained_t_steps=ckpt.t_steps,
            )[0, 0]
        return denormalize(pred, ds_man)

    return evaluator


def run_sensitivity(cfg: RunConfig, out_dir: Path, freq: float) -> dict:
    sens_dir = Path(out_dir) / "sensitivity"
    sens_dir.mkdir(parents=True, exist_ok=True)
    study = build_study(cfg)
    resp_rows, var_rows = [], []
    reports = {}
    for name in cfg.sensitivity.evaluators:
        if name == "solver":
            evaluator = lambda c: solve_helmholtz_1d(c, freq).values  # noqa: E731
        else:
            evaluator = _model_evaluator(cfg, out_dir, freq, name)
        report = run_homotopy(study, evaluator, threads=cfg.threads)
        reports[name] = report
        for di in range(report.responses.shape[0]):
            for si, s in enumerate(report.s_grid):
                for pi, probe in enumerate(report.probes):
                    resp_rows.append(
                        (
                            name,
                            di,
                            float(s),
                            probe.index[0],
                            probe.tag,
                            float(report.responses[di, si, pi]),
                        )
                    )
        for si, s in enumerate(report.s_grid):
            var_rows.append((name, float(s), float(report.variance_vs_s[si])))

        svg.plot_svg(
            sens_dir / f"variance_vs_s_{name}_f{freq:g}.svg",
            [svg.Series(x=report.s_grid, y=report.variance_vs_s, label=name)],
            title=f"Average directional variance vs s ({name}, f={freq:g} Hz)",
            xlabel="s",
            ylabel="variance",
        )
        s_picks = {0, int(np.argmin(np.abs(report.s_grid - 0.1))), len(report.s_grid) - 1}
        for si in sorted(s_picks):
            for pi, probe in enumerate(report.probes):
                k = report.kdes[si][pi]
                svg.plot_svg(
                    sens_dir / f"kde_{name}_f{freq:g}_s{report.s_grid[si]:.2f}_p{probe.index[0]}.svg",
                    [svg.Series(x=k.grid, y=k.density, label=f"{probe.tag} probe", fill=True)],
                    title=f"KDE across directions (s={report.s_grid[si]:.2f}, {name})",
                    xlabel="response amplitude",
                    ylabel="density",
                )
    write_csv(
        sens_dir / f"responses_f{freq:g}.csv",
        ["evaluator", "direction", "s", "probe_index", "probe_tag", "response"],
        resp_rows,
    )
    write_csv(
        sens_dir / f"variance_vs_s_f{freq:g}.csv",
        ["evaluator", "s", "variance"],
        var_rows,
    )
    return reports


def write_report(out_dir: Path) -> Path:
    """Summarize eval.csv into a per-frequency winner table (lower error wins)."""
    eval_path = Path(out_dir) / "eval.csv"
    if not eval_path.exists():
        raise FileNotFoundError(f"run `eval` first: missing {eval_path}")
    rows = [line.split(",") for line in eval_path.read_text().strip().splitlines()[1:]]
    table: dict[tuple[str, str], dict[str, tuple[float, float, int]]] = {}
    for freq, model, metric, mean, std, n in rows:
        table.setdefault((freq, metric), {})[model] = (float(mean), float(std), int(n))
    lines = [
        "# Diffusion vs deterministic regressor",
        "",
        "Mean relative errors on the held-out test split; the lower entry per",
        "row is bolded.  Diffusion entries aggregate all sampled fields.",
        "",
        "| frequency (Hz) | metric | diffusion | regressor |",
        "|---|---|---|---|",
    ]
    for (freq, metric), models in sorted(table.items(), key=lambda kv: (float(kv[0][0]), kv[0][1])):
        cells = {}
        best = min(models, key=lambda m: models[m][0])
        for model in MODEL_NAMES:
            if model not in models:
                cells[model] = "-"
                continue
            mean, std, _ = models[model]
            text = f"{mean:.4f} ± {std:.4f}" if model == "diffusion" else f"{mean:.4f}"
            cells[model] = f"**{text}**" if model == best else text
        lines.append(f"| {float(freq):g} | {metric} | {cells['diffusion']} | {cells['regressor']} |")
    report_path = Path(out_dir) / "report.md"
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report_path


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(cfg: RunConfig, args) -> None:
    freq = args.freq if args.freq else min(cfg.data.frequencies)
    ds = generate_dataset(cfg, freq, cfg.data.seed)
    path = dataset_path(args.out, freq)
    store.write_dataset(ds, path)
    print(f"gen-data: wrote {ds.manifest.record_count} records to {path}")


def _cmd_train(cfg: RunConfig, args, kind: str) -> None:
    freq = args.freq if args.freq else min(cfg.data.frequencies)
    ds = store.read_dataset(dataset_path(args.out, freq))
    arrays = training_arrays(ds)
    tc = train_config(cfg)
    ncfg = net_config(cfg, arrays[0].shape[1] )
    ckpt = (diffusion.train if kind == "diffusion" else diffusion.train_regressor)(
        arrays, tc, ncfg
    )
    path = checkpoint_path(args.out, freq, kind)
    store.write_checkpoint(ckpt, path)
    last = ckpt.train_log[-1]
    print(
        f"{kind}: {len(ckpt.train_log)} epochs, final train loss"
        f" {last['train_loss']:.5f}, val loss {last['val_loss']:.5f} -> {path}"
    )


def cmd_train(cfg: RunConfig, args) -> None:
    _cmd_train(cfg, args, "diffusion")


def cmd_train_baseline(cfg: RunConfig, args) -> None:
    _cmd_train(cfg, args, "regressor")


def cmd_sample(cfg: RunConfig, args) -> None:
    freq = args.freq if args.freq else min(cfg.data.frequencies)
    ds = store.read_dataset(dataset_path(args.out, freq))
    ckpt = store.read_checkpoint(checkpoint_path(args.out, freq, "diffusion"))
    z_test, _, _ = _test_arrays(ds)
    scfg = diffusion.SampleConfig(
        sampler=cfg.sample.sampler,
        schedule=cfg.sample.schedule,
        steps=cfg.sample.steps,
        eta=cfg.sample.eta,
        num_samples=cfg.sample.num_samples,
        seed=cfg.sample.seed,
    )
    fields = denormalize(
        diffusion.sample_fields(diffusion.NetDenoiser(ckpt), z_test, scfg, trained_t_steps=ckpt.t_steps),
        ds.manifest,
    )
    path = Path(args.out) / f"samples_f{freq:g}_{scfg.sampler}{scfg.steps}.npz"
    np.savez(path, fields=fields, sampler=scfg.sampler, steps=scfg.steps, seed=scfg.seed)
    print(f"sample: wrote {fields.shape} fields to {path}")


def cmd_eval(cfg: RunConfig, args) -> None:
    freqs = [args.freq] if args.freq else sorted(
        f for f in cfg.data.frequencies if dataset_path(args.out, f).exists()
    )
    if not freqs:
        raise FileNotFoundError(f"no datasets found under {args.out}")
    rows = []
    for freq in freqs:
        rows.extend(evaluate_models(cfg, Path(args.out), freq))
    write_csv(
        Path(args.out) / "eval.csv",
        ["frequency", "model", "metric", "mean", "std", "n"],
        rows,
    )
    print(f"eval: wrote {len(rows)} rows to {Path(args.out) / 'eval.csv'}")


def cmd_ablate(cfg: RunConfig, args) -> None:
    freq = args.freq if args.freq else min(cfg.data.frequencies)
    rows = run_ablation(cfg, Path(args.out), freq)
    path = Path(args.out) / "ablation.csv"
    write_csv(
        path,
        ["sampler", "schedule", "steps", "rel_l2", "rel_h1", "rel_energy", "n"],
        rows,
    )
    print(f"ablate-samplers: wrote {len(rows)} rows to {path}")


def cmd_sensitivity(cfg: RunConfig, args) -> None:
    freq = args.freq if args.freq else max(cfg.data.frequencies)
    run_sensitivity(cfg, Path(args.out), freq)
    print(f"sensitivity: wrote responses, variance curves, and KDEs under {args.out}/sensitivity")


def cmd_report(cfg: RunConfig, args) -> None:
    path = write_report(Path(args.out))
    print(f"report: wrote {path}")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "train-baseline": cmd_train_baseline,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "ablate-samplers": cmd_ablate,
    "sensitivity": cmd_sensitivity,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="helmdl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config overriding defaults")
        p.add_argument("--out", type=str, default=os.environ.get("HDL_OUT", "runs"))
        p.add_argument("--seed", type=int, default=None, help="root seed override")
        p.add_argument("--freq", type=float, default=None, help="frequency in Hz")
        p.add_argument("--sampler", type=str, default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--profile", choices=("desk", "full"), default="desk")
    return parser


def resolve(args) -> RunConfig:
    overrides: dict = {}
    if args.seed is not None:
        overrides["data"] = {"seed": args.seed}
        overrides["train"] = {"seed": args.seed}
        overrides["sample"] = {"seed": args.seed}
        overrides["ablation"] = {"seed": args.seed}
        overrides["sensitivity"] = {"seed": args.seed}
    if args.sampler is not None:
        overrides.setdefault("sample", {})["sampler"] = args.sampler
    if args.steps is not None:
        overrides.setdefault("sample", {})["steps"] = args.steps
    if args.samples is not None:
        overrides.setdefault("sample", {})["num_samples"] = args.samples
    if args.threads is not None:
        overrides["threads"] = args.threads
    return load_config(args.config, profile=args.profile, overrides=overrides)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        _echo_run_info(cfg, Path(args.out), args.command, argv)
        COMMANDS[args.command](cfg, args)
    except Exception as exc:  # noqa: BLE001 - single CLI failure funnel
        print(f"FAILED {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
