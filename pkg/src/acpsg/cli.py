"""Command-line entry point: ``acpsg {synth,run,evaluate,export-latent}``.

Exit codes: 0 success, 1 pipeline/runtime error, 2 usage or validation error.
Machine-readable JSON goes to stdout; human-readable progress to stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import zmat
from .dataset import SynthConfig, generate_synthetic, load_dataset, save_dataset
from .embedding import EmbeddingModel
from .evaluation import Mode, PredictionDirection, evaluate
from .exceptions import ZslError
from .latent import LatentSpace
from .pipeline import RunConfig, StageError, run_pipeline

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_synth_flags(p, prefix=""):
    d = SynthConfig()
    p.add_argument(f"--{prefix}num-seen", type=int, default=d.num_seen)
    p.add_argument(f"--{prefix}num-unseen", type=int, default=d.num_unseen)
    p.add_argument(f"--{prefix}num-attributes", type=int, default=d.num_attributes)
    p.add_argument(f"--{prefix}num-groups", type=int, default=d.num_attribute_groups)
    p.add_argument(f"--{prefix}feature-dim", type=int, default=d.feature_dim)
    p.add_argument(f"--{prefix}train-per-class", type=int, default=d.samples_per_class_train)
    p.add_argument(f"--{prefix}test-per-class", type=int, default=d.samples_per_class_test)
    p.add_argument(f"--{prefix}noise", type=float, default=d.noise_scale)


def _synth_config(args, seed, prefix="") -> SynthConfig:
    g = lambda name: getattr(args, (prefix + name).replace("-", "_"))  # noqa: E731
    try:
        return SynthConfig(
            num_seen=g("num-seen"),
            num_unseen=g("num-unseen"),
            num_attributes=g("num-attributes"),
            num_attribute_groups=g("num-groups"),
            feature_dim=g("feature-dim"),
            samples_per_class_train=g("train-per-class"),
            samples_per_class_test=g("test-per-class"),
            noise_scale=g("noise"),
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="acpsg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic dataset (manifest + ZMAT files)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    _add_synth_flags(p)

    p = sub.add_parser("run", help="build graph, learn latent space, train, evaluate")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="dataset manifest JSON")
    src.add_argument("--synth", action="store_true", help="generate a synthetic dataset in memory")
    _add_synth_flags(p, prefix="synth-")
    p.add_argument("--synth-seed", type=int, default=None, help="defaults to --seed")
    d = RunConfig()
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--p", type=int, default=d.p)
    p.add_argument("--latent-dim", type=int, default=None,
                   help="latent width; 0 disables the latent space (default: 40/40/20 for AwA2/CUB/aPY, else 40)")
    p.add_argument("--lambda", dest="lam", type=float, default=d.lam)
    p.add_argument("--lr-latent", type=float, default=d.lr_latent)
    p.add_argument("--lr-embed", type=float, default=d.lr_embed)
    p.add_argument("--epochs-latent", type=int, default=d.epochs_latent)
    p.add_argument("--epochs-embed", type=int, default=d.epochs_embed)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=d.mode)
    p.add_argument("--direction", choices=[x.value for x in PredictionDirection], default=d.direction)
    p.add_argument("--no-normalize-prototypes", action="store_true")
    p.add_argument("--normalize-features", action="store_true")
    p.add_argument("--no-rescale-covariance", action="store_true")
    p.add_argument("--averaging", choices=["per_class", "per_sample"], default=d.averaging)
    p.add_argument("--out", help="artifact directory (optional)")

    p = sub.add_parser("evaluate", help="re-evaluate a finished run from its artifacts")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    p.add_argument("--direction", choices=[x.value for x in PredictionDirection], default=None)

    p = sub.add_parser("export-latent", help="write the latent class table of a run as ZMAT")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out", default=None, help="destination file (default: <run-dir>/latent_export.zmat)")
    return parser


def _fail(stage: str, exc: BaseException) -> int:
    err = exc.error if isinstance(exc, StageError) else exc
    payload = {"stage": stage, "error": type(err).__name__, "message": str(err)}
    print(json.dumps(payload), file=sys.stderr)
    return EXIT_RUNTIME


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def cmd_synth(args) -> int:
    cfg = _synth_config(args, args.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        print(f"acpsg synth: cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        ds = generate_synthetic(cfg)
        manifest = save_dataset(ds, out)
    except ZslError as exc:
        return _fail("synth", exc)
    summary = ds.summary()
    summary["manifest"] = str(manifest)
    _emit(summary)
    return EXIT_OK


def _run_config(args, latent_dim) -> RunConfig:
    try:
        return RunConfig(
            alpha=args.alpha, p=args.p, latent_dim=latent_dim, lam=args.lam,
            lr_latent=args.lr_latent, lr_embed=args.lr_embed,
            epochs_latent=args.epochs_latent, epochs_embed=args.epochs_embed,
            seed=args.seed, mode=args.mode, direction=args.direction,
            normalize_prototypes=not args.no_normalize_prototypes,
            normalize_features=args.normalize_features,
            rescale_covariance=not args.no_rescale_covariance,
            averaging=args.averaging,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_source(source: dict):
    if source["kind"] == "manifest":
        return load_dataset(source["path"])
    return generate_synthetic(SynthConfig(**source["config"]))


def cmd_run(args) -> int:
    if args.manifest:
        source = {"kind": "manifest", "path": str(Path(args.manifest).resolve())}
    else:
        seed = args.seed if args.synth_seed is None else args.synth_seed
        source = {"kind": "synth", "config": asdict(_synth_config(args, seed, prefix="synth-"))}
    # validate flags before touching the dataset or the output directory
    _run_config(args, 0 if args.latent_dim is None else args.latent_dim)

    try:
        dataset = _load_source(source)
    except (ZslError, OSError) as exc:
        return _fail("load", exc)
    latent_dim = dataset.default_latent_dim() if args.latent_dim is None else args.latent_dim
    cfg = _run_config(args, latent_dim)

    print(f"acpsg run: {dataset.summary()}", file=sys.stderr)
    try:
        result = run_pipeline(dataset, cfg)
    except StageError as exc:
        return _fail(exc.stage, exc)

    report = result.report.to_dict()
    if args.out:
        try:
            _save_artifacts(Path(args.out), result, cfg, source)
        except OSError as exc:
            return _fail("save", exc)
    _emit(report)
    r = result.report
    line = f"acpsg run: {cfg.mode}/{cfg.direction} acc_unseen={100 * r.acc_unseen:.2f}"
    if r.harmonic_mean is not None:
        line += f" acc_seen={100 * r.acc_seen:.2f} H={100 * r.harmonic_mean:.2f}"
    print(line, file=sys.stderr)
    return EXIT_OK


def _save_artifacts(out: Path, result, cfg: RunConfig, source: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    g = result.graph
    zmat.write_matrix(result.prototype_matrix.C, out / "C.zmat")
    zmat.write_matrix(g.covariance_raw, out / "W_raw.zmat")
    zmat.write_matrix(g.covariance, out / "W.zmat")
    zmat.write_matrix(g.adjacency, out / "A.zmat")
    zmat.write_matrix(g.node_features, out / "F.zmat")
    zmat.write_matrix(g.normalized, out / "S.zmat")
    psi_file = out / "psi.zmat"
    if result.latent is not None:
        zmat.write_matrix(result.latent.psi, psi_file)
    elif psi_file.exists():
        psi_file.unlink()
    result.model.save(out)
    run_cfg = {"source": source, "config": asdict(cfg),
               "class_order": result.prototype_matrix.class_order.tolist()}
    if result.latent is not None:
        run_cfg["latent_loss"] = {"initial": result.latent.initial_reconstruction_loss,
                                  "final": result.latent.final_reconstruction_loss}
    (out / "run_config.json").write_text(json.dumps(run_cfg, indent=2) + "\n")
    (out / "report.json").write_text(result.report.to_json())


def _read_run(run_dir: Path) -> dict:
    path = run_dir / "run_config.json"
    if not path.is_file():
        raise FileNotFoundError(f"{run_dir} is not a run directory (no run_config.json)")
    return json.loads(path.read_text())


def cmd_evaluate(args) -> int:
    run_dir = Path(args.run_dir)
    try:
        meta = _read_run(run_dir)
        cfg = RunConfig(**meta["config"])
        dataset = _load_source(meta["source"])
        model = EmbeddingModel.load(run_dir)
        latent = None
        if cfg.latent_dim > 0:
            psi = zmat.read_matrix(run_dir / "psi.zmat")
            latent = LatentSpace(psi=psi, final_reconstruction_loss=float("nan"))
    except (ZslError, OSError, KeyError, ValueError) as exc:
        return _fail("load", exc)
    mode = args.mode or cfg.mode
    direction = args.direction or cfg.direction
    try:
        report = evaluate(model, latent, dataset, mode, direction,
                          normalize_prototypes=cfg.normalize_prototypes,
                          normalize_features=cfg.normalize_features,
                          averaging=cfg.averaging, config=cfg.echo())
    except ZslError as exc:
        return _fail("evaluate", exc)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_export_latent(args) -> int:
    run_dir = Path(args.run_dir)
    try:
        meta = _read_run(run_dir)
    except (OSError, ValueError) as exc:
        return _fail("export", exc)
    if meta["config"].get("latent_dim", 0) == 0:
        print(json.dumps({"stage": "export", "error": "NoLatentSpace",
                          "message": "no latent space in this run"}), file=sys.stderr)
        return EXIT_RUNTIME
    try:
        psi = zmat.read_matrix(run_dir / "psi.zmat")
        dest = Path(args.out) if args.out else run_dir / "latent_export.zmat"
        zmat.write_matrix(psi, dest)
    except (ZslError, OSError) as exc:
        return _fail("export", exc)
    print(dest)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "run": cmd_run, "evaluate": cmd_evaluate, "export-latent": cmd_export_latent}


def _thread_limit():
    n = os.environ.get("ACPSG_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        with _thread_limit():
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"acpsg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # only reached for malformed environment (e.g. ACPSG_THREADS)
        print(f"acpsg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        return _fail(args.command, exc)


if __name__ == "__main__":
    sys.exit(main())
