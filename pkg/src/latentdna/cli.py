"""Command-line pipeline: ingest, train, encode, generate, evaluate, plot.

Every artifact-producing command also writes ``<output>.manifest.json``
recording the config snapshot, seed, input digests and wall time. Outputs
are never overwritten without ``--force``. Failures print one JSON line on
stderr and exit with a code from :data:`EXIT_CODES`.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, datapipe
from . import evalmetrics as em
from . import latentdiff as ld
from . import nnkernel as nk
from . import vae as vaemod
from .config import ConfigError, RunConfig
from .nnkernel import checkpoint
from .seqcodec import FastaParseError, SequenceError, decode_argmax, format_fasta, read_fasta

log = logging.getLogger("latentdna")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_CONFIG = 4
EXIT_EXISTS = 5
EXIT_DATA = 6
EXIT_NUMERIC = 7

EXIT_CODES = {
    EXIT_OK: "success",
    EXIT_INTERNAL: "unexpected internal error",
    EXIT_USAGE: "usage error (unknown flag or subcommand, bad argument)",
    EXIT_MISSING: "input file not found",
    EXIT_CONFIG: "config or shape mismatch",
    EXIT_EXISTS: "output exists; pass --force to overwrite",
    EXIT_DATA: "malformed or invalid input data",
    EXIT_NUMERIC: "numerical failure (divergence or non-finite values)",
}


class CliError(Exception):
    def __init__(self, message: str, code: int, kind: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


class UsageError(CliError):
    def __init__(self, message: str):
        super().__init__(message, EXIT_USAGE, "usage")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _claim(path, force: bool) -> Path:
    p = Path(path)
    if p.exists() and not force:
        raise CliError(f"refusing to overwrite {p}", EXIT_EXISTS, "exists")
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def sidecar(path) -> Path:
    return Path(str(path) + ".config")


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest.json")


class Run:
    """Bookkeeping for one invocation: claimed outputs, inputs and the manifest."""

    def __init__(self, args, cfg: RunConfig):
        self.args = args
        self.cfg = cfg
        self.started = time.perf_counter()
        self.started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []

    def input(self, path) -> Path:
        p = _require(path)
        self.inputs.append(p)
        return p

    def output(self, path) -> Path:
        p = _claim(path, self.args.force)
        for extra in (manifest_path(p),):
            _claim(extra, self.args.force)
        self.outputs.append(p)
        return p

    def extra_output(self, path) -> Path:
        p = _claim(path, self.args.force)
        self.outputs.append(p)
        return p

    def write_manifest(self, primary: Path, extra: dict | None = None) -> None:
        doc = {
            "command": self.args.command,
            "argv": self.args.argv,
            "version": __version__,
            "seed": self.cfg["seed"],
            "threads": self.cfg["threads"],
            "config": self.cfg.to_dict(),
            "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in self.inputs],
            "outputs": [{"path": str(p), "sha256": sha256_file(p)} for p in self.outputs if p.is_file()],
            "started_at": self.started_at,
            "wall_time_s": round(time.perf_counter() - self.started, 3),
        }
        if extra:
            doc.update(extra)
        with open(manifest_path(primary), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _dtype(cfg: RunConfig):
    return np.float64 if cfg["precision"] == "float64" else np.float32


def save_model(path: Path, model: nk.Module, cfg: RunConfig, extra_arrays: dict | None = None) -> None:
    arrays = dict(model.state_dict())
    if extra_arrays:
        arrays.update(extra_arrays)
    checkpoint.save(path, arrays, precision=_dtype(cfg))
    with open(sidecar(path), "w", encoding="utf-8") as fh:
        fh.write(cfg.dumps())


def _load_sidecar(path: Path) -> RunConfig:
    side = sidecar(path)
    if not side.is_file():
        raise FileNotFoundError(f"config sidecar not found: {side}")
    return RunConfig.from_file(side, environ={})


def load_vae(path) -> tuple[vaemod.VAE, RunConfig]:
    path = _require(path)
    cfg = _load_sidecar(path)
    model = vaemod.VAE(cfg.vae)
    arrays = checkpoint.load(path)
    try:
        model.load_state_dict(arrays)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: checkpoint does not match its VAE config: {exc}") from exc
    model.astype(np.float32).eval()
    return model, cfg


def load_unet(path) -> tuple[ld.UNet, ld.LatentStats, RunConfig]:
    path = _require(path)
    cfg = _load_sidecar(path)
    arrays = checkpoint.load(path)
    try:
        stats = ld.LatentStats.from_arrays(arrays)
    except KeyError as exc:
        raise ConfigError(f"{path}: not a diffusion checkpoint (no latent statistics)") from exc
    model = ld.UNet(cfg.unet)
    try:
        model.load_state_dict({k: v for k, v in arrays.items() if not k.startswith("latent_stats.")})
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: checkpoint does not match its UNet config: {exc}") from exc
    model.astype(np.float32).eval()
    return model, stats, cfg


def _stamp_path(output: Path, epoch: int) -> Path:
    return output.with_name(f"{output.stem}.epoch{epoch:05d}{output.suffix}")


def _write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")


def _sequences(path) -> list[str]:
    return [seq for _, seq in read_fasta(path)]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(run: Run) -> None:
    a, cfg = run.args, run.cfg
    fastas = [run.input(p) for p in a.fasta]
    metas = [run.input(p) for p in a.metadata or []]
    out = run.output(a.output)
    table = datapipe.ingest(fastas, metas, window=cfg["data.window"], timestamp=a.timestamp)
    if a.species:
        table = datapipe.filter_species(table, set(a.species))
    table = datapipe.split(table, cfg["data.val_fraction"], cfg["seed"])
    datapipe.persist(table, out)
    summary = table.summary()
    run.write_manifest(out, {"summary": summary})
    if a.summary:
        _emit(summary)


def cmd_train_vae(run: Run) -> None:
    a, cfg = run.args, run.cfg
    table = datapipe.load(run.input(a.table))
    out = run.output(a.output)
    log_csv = run.extra_output(str(out) + ".log.csv")
    run.extra_output(sidecar(out))
    vcfg = cfg.vae
    if len(table) and len(table.records[0].sequence) != vcfg.sequence_length:
        raise ConfigError(
            f"table sequences have length {len(table.records[0].sequence)}, vae.length is {vcfg.sequence_length}"
        )
    epochs = cfg["vae.epochs"] if a.epochs is None else a.epochs
    stamps = set(cfg["vae.stamps"])
    for e in stamps:
        run.extra_output(_stamp_path(out, e))
    model = vaemod.VAE(vcfg, cfg["seed"]).astype(_dtype(cfg))
    if 0 in stamps:
        save_model(_stamp_path(out, 0), model, cfg)

    def on_epoch(epoch, m, row):
        if epoch in stamps:
            save_model(_stamp_path(out, epoch), m, cfg)

    result = vaemod.train_vae(table, vcfg, epochs, cfg["seed"], model=model, on_epoch_end=on_epoch)
    save_model(out, result.model, cfg)
    with open(log_csv, "w", encoding="utf-8") as fh:
        fh.write("epoch,split,total,recon,kl\n")
        for r in result.history:
            fh.write(f"{r['epoch']},{r['split']},{r['total']!r},{r['recon']!r},{r['kl']!r}\n")
    run.write_manifest(out, {"best_epoch": result.best_epoch, "best_total": result.best_total})


def cmd_encode(run: Run) -> None:
    a = run.args
    model, vcfg = load_vae(run.input(a.vae))
    run.inputs.append(sidecar(a.vae))
    table = datapipe.load(run.input(a.table))
    out = run.output(a.output)
    seqs = table.sequences(None if a.split == "all" else a.split)
    if seqs and len(seqs[0]) != vcfg.vae.sequence_length:
        raise ConfigError(f"table sequences have length {len(seqs[0])}; encoder expects {vcfg.vae.sequence_length}")
    latents = model.encode_means(seqs) if seqs else np.zeros((0, *vcfg.vae.latent_shape), np.float32)
    checkpoint.save(out, {"latents": latents})
    run.write_manifest(out, {"count": len(seqs), "split": a.split})


def cmd_train_diff(run: Run) -> None:
    a, cfg = run.args, run.cfg
    arrays = checkpoint.load(run.input(a.latents))
    if "latents" not in arrays:
        raise ConfigError(f"{a.latents}: no 'latents' array")
    latents = arrays["latents"]
    out = run.output(a.output)
    log_csv = run.extra_output(str(out) + ".log.csv")
    run.extra_output(sidecar(out))
    ucfg = cfg.unet
    if latents.ndim != 4 or latents.shape[1:] != ucfg.sample_shape:
        raise ConfigError(f"latents of shape {latents.shape[1:]} do not match configured {ucfg.sample_shape}")
    epochs = cfg["diff.epochs"] if a.epochs is None else a.epochs
    stamps = set(cfg["diff.stamps"])
    for e in stamps:
        run.extra_output(_stamp_path(out, e))
    stats = ld.LatentStats.fit(latents)
    model = ld.UNet(ucfg, cfg["seed"]).astype(_dtype(cfg))
    if 0 in stamps:
        save_model(_stamp_path(out, 0), model, cfg, stats.to_arrays())

    def on_epoch(epoch, m, row):
        if epoch in stamps:
            save_model(_stamp_path(out, epoch), m, cfg, stats.to_arrays())

    result = ld.train_diffusion(latents, ucfg, cfg.schedule, epochs, lr=cfg["diff.lr"],
                                batch_size=cfg["diff.batch"], warmup=cfg["diff.warmup"], seed=cfg["seed"],
                                stats=stats, model=model, on_epoch_end=on_epoch)
    save_model(out, result.model, cfg, stats.to_arrays())
    with open(log_csv, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss,lr\n")
        for r in result.history:
            fh.write(f"{r['epoch']},{r['loss']!r},{r['lr']!r}\n")
    run.write_manifest(out, {"final_loss": result.history[-1]["loss"] if result.history else None})


def cmd_generate(run: Run) -> None:
    a, cfg = run.args, run.cfg
    if a.count < 0:
        raise UsageError("--count must be non-negative")
    unet, stats, dcfg = load_unet(run.input(a.diffusion))
    run.inputs.append(sidecar(a.diffusion))
    vae, vcfg = load_vae(run.input(a.vae))
    run.inputs.append(sidecar(a.vae))
    if vcfg.vae.latent_shape != dcfg.unet.sample_shape:
        raise ConfigError(f"VAE latent {vcfg.vae.latent_shape} does not match UNet {dcfg.unet.sample_shape}")
    out = run.output(a.output)
    zout = run.extra_output(a.latents_output) if a.latents_output else None
    latents = ld.ddpm_sample(unet.predictor(), dcfg.schedule, a.count, cfg["seed"], stats=stats,
                             variance=cfg["diff.variance"], batch_size=cfg["gen.batch"])
    z = np.stack(latents) if latents else np.zeros((0, *vcfg.vae.latent_shape), np.float32)
    seqs = decode_argmax(vae.decode_probs(z)) if len(z) else []
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(format_fasta((f"gen_{i} seed={cfg['seed']}", s) for i, s in enumerate(seqs)))
    if zout is not None:
        checkpoint.save(zout, {"latents": z})
    run.write_manifest(out, {"count": a.count})


def _report(run: Run, doc: dict) -> None:
    if run.args.output:
        out = run.output(run.args.output)
        _write_json(out, doc)
        run.write_manifest(out)
    _emit(doc)


def cmd_eval_fred(run: Run) -> None:
    a = run.args
    encoder, _ = load_vae(run.input(a.encoder))
    seqs_a = _sequences(run.input(a.set_a))
    seqs_b = _sequences(run.input(a.set_b))
    r = em.fred(seqs_a, seqs_b, encoder)
    _report(run, {"metric": "fred", "fred": r.value, "count_a": r.count_a, "count_b": r.count_b,
                  "dim": r.dim, "warnings": list(r.warnings), "embedding": "flattened posterior mean"})


def cmd_eval_motif(run: Run) -> None:
    a, cfg = run.args, run.cfg
    pattern = a.pattern or cfg["eval.pattern"]
    width = a.bin_width or cfg["eval.bin_width"]
    sets = {}
    for spec in a.fasta:
        label, _, path = spec.rpartition("=")
        sets[label or Path(path).stem] = _sequences(run.input(path))
    lengths = {len(s) for seqs in sets.values() for s in seqs}
    if len(lengths) > 1:
        raise ConfigError(f"all sequences must share one length, got {sorted(lengths)}")
    length = lengths.pop() if lengths else cfg["vae.length"]
    hists = {k: em.motif_histogram(v, pattern, width, tss=a.tss, length=length) for k, v in sets.items()}
    names = list(hists)
    out = run.output(a.output)
    em.write_histogram_csv(out, hists)
    svg = run.extra_output(Path(out).with_suffix(".svg"))
    svg.write_text(em.histogram_svg(hists, f"{pattern} positional distribution", smooth=a.smooth))
    doc = {"metric": "motif", "pattern": pattern, "bin_width": width,
           "modal_bin": {k: h.modal_center() for k, h in hists.items()},
           "hits": {k: h.total for k, h in hists.items()},
           "sequences": {k: h.sequences for k, h in hists.items()}}
    if len(names) >= 2:
        doc["tv_distance"] = {f"{names[0]}|{n}": em.histogram_distance(hists[names[0]], hists[n])
                              for n in names[1:]}
    run.write_manifest(out, {"report": doc})
    _emit(doc)


def cmd_eval_sei_hits(run: Run) -> None:
    a = run.args
    m = em.load_matrix(run.input(a.predictions))
    labels = em.read_labels(run.input(a.labels)) if a.labels else None
    r = em.sei_hits(m, a.threshold, labels)
    out = run.output(a.output)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("profile,hits\n")
        for lab, c in r.ranking:
            fh.write(f"{lab},{c}\n")
    doc = {"metric": "sei_hits", "threshold": r.threshold, "sequences": r.sequences,
           "top": [{"profile": k, "hits": v} for k, v in r.top(a.top)]}
    run.write_manifest(out, {"report": doc})
    _emit(doc)


def cmd_eval_sei_dist(run: Run) -> None:
    a = run.args
    d = em.sei_embedding_distance(run.input(a.set_a), run.input(a.set_b))
    _report(run, {"metric": "sei_embedding_distance", "distance": d, "method": "frechet"})


def cmd_plot(run: Run) -> None:
    a = run.args
    src = run.input(a.input)
    out = run.output(a.output)
    if a.kind == "histogram":
        centers, cols = em.read_histogram_csv(src)
        series = {}
        for k, v in cols.items():
            y = v / v.sum() if v.sum() else v.astype(float)
            if a.smooth > 1:
                y = em.moving_average(y, a.smooth)
            series[k] = (centers.tolist(), np.asarray(y, float).tolist())
        svg = em.line_plot_svg(series, a.title, "position relative to TSS", "fraction of hits")
    elif a.kind == "series":
        svg = em.line_plot_svg(em.read_series_csv(src), a.title, a.xlabel, a.ylabel)
    else:
        import csv
        with open(src, newline="") as fh:
            rows = list(csv.DictReader(fh))
        col = a.column
        series: dict[str, tuple[list, list]] = {}
        for r in rows:
            if col not in r:
                raise ConfigError(f"{src}: no column {col!r}")
            name = r.get("split", "train")
            xs, ys = series.setdefault(name, ([], []))
            xs.append(float(r["epoch"]))
            ys.append(float(r[col]))
        svg = em.line_plot_svg(series, a.title or col, "epoch", col)
    out.write_text(svg)
    run.write_manifest(out)


COMMANDS = {
    "ingest": cmd_ingest,
    "train-vae": cmd_train_vae,
    "encode-latents": cmd_encode,
    "train-diff": cmd_train_diff,
    "generate": cmd_generate,
    "eval-fred": cmd_eval_fred,
    "eval-motif": cmd_eval_motif,
    "eval-sei-hits": cmd_eval_sei_hits,
    "eval-sei-dist": cmd_eval_sei_dist,
    "plot-data": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    codes = "\n".join(f"  {k}  {v}" for k, v in EXIT_CODES.items())
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="key = value config file")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="config override (repeatable); DDK_<KEY> environment variables also apply")
    g.add_argument("--seed", type=int, help="shorthand for --set seed=N")
    g.add_argument("--threads", type=int, help="BLAS thread count (1 gives bit-reproducible runs)")
    g.add_argument("--force", action="store_true", help="overwrite existing outputs")
    g.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    p = _Parser(prog="latentdna", description="Latent diffusion pipeline for DNA sequence generation.",
                epilog="exit codes:\n" + codes, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common], epilog="exit codes:\n" + codes,
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    s = add("ingest", "build a dataset table from FASTA and metadata files")
    s.add_argument("--fasta", nargs="+", required=True)
    s.add_argument("--metadata", nargs="*")
    s.add_argument("--species", nargs="*", help="keep only these species")
    s.add_argument("--timestamp", help="provenance timestamp (default: now)")
    s.add_argument("--summary", action="store_true", help="print the table summary as JSON")
    s.add_argument("--output", required=True)

    s = add("train-vae", "train the sequence autoencoder")
    s.add_argument("--table", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--output", required=True)

    s = add("encode-latents", "encode a table split to posterior-mean latents")
    s.add_argument("--table", required=True)
    s.add_argument("--vae", required=True)
    s.add_argument("--split", default="train", choices=["train", "validation", "all"])
    s.add_argument("--output", required=True)

    s = add("train-diff", "train the latent noise predictor")
    s.add_argument("--latents", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--output", required=True)

    s = add("generate", "sample latents and decode them to FASTA")
    s.add_argument("--diffusion", required=True)
    s.add_argument("--vae", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--latents-output")
    s.add_argument("--output", required=True)

    s = add("eval-fred", "Frechet distance between two FASTA sets under a reference encoder")
    s.add_argument("--set-a", required=True)
    s.add_argument("--set-b", required=True)
    s.add_argument("--encoder", required=True, help="reference VAE checkpoint trained on held-out data")
    s.add_argument("--output")

    s = add("eval-motif", "TSS-relative motif histograms (CSV + SVG)")
    s.add_argument("--fasta", nargs="+", required=True, metavar="[LABEL=]PATH",
                   help="the first set is the reference for total-variation distances")
    s.add_argument("--pattern", help="motif over A,C,G,T,W (default from eval.pattern)")
    s.add_argument("--bin-width", type=int)
    s.add_argument("--tss", type=int, help="TSS index (default: half the sequence length)")
    s.add_argument("--smooth", type=int, default=1, help="moving-average window for the SVG")
    s.add_argument("--output", required=True)

    s = add("eval-sei-hits", "count profile hits in an exported prediction matrix")
    s.add_argument("--predictions", required=True, help="N x P matrix (DDMX or CSV)")
    s.add_argument("--labels", help="one profile label per line")
    s.add_argument("--threshold", type=float, default=em.HIT_THRESHOLD)
    s.add_argument("--top", type=int, default=10)
    s.add_argument("--output", required=True)

    s = add("eval-sei-dist", "Frechet distance between two exported embedding matrices")
    s.add_argument("--set-a", required=True)
    s.add_argument("--set-b", required=True)
    s.add_argument("--output")

    s = add("plot-data", "render a histogram, series or training-log CSV to SVG")
    s.add_argument("--input", required=True)
    s.add_argument("--kind", choices=["histogram", "series", "log"], default="series")
    s.add_argument("--column", default="total", help="log column to plot")
    s.add_argument("--smooth", type=int, default=1)
    s.add_argument("--title", default="")
    s.add_argument("--xlabel", default="")
    s.add_argument("--ylabel", default="")
    s.add_argument("--output", required=True)
    return p


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if args.seed is not None:
        out["seed"] = str(args.seed)
    if args.threads is not None:
        out["threads"] = str(args.threads)
    return out


def _classify(exc: BaseException) -> tuple[int, str]:
    if isinstance(exc, CliError):
        return exc.code, exc.kind
    if isinstance(exc, FileNotFoundError):
        return EXIT_MISSING, "missing_file"
    if isinstance(exc, (ConfigError, nk.DimensionError)):
        return EXIT_CONFIG, "config"
    if isinstance(exc, FloatingPointError):
        return EXIT_NUMERIC, "numeric"
    if isinstance(exc, (ValueError, OSError, UnicodeDecodeError)):
        return EXIT_DATA, "data"
    return EXIT_INTERNAL, "internal"


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(json.dumps({"error": "usage", "exit_code": EXIT_USAGE, "message": str(exc)}) + "\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        overrides = _overrides(args)
        if args.config:
            cfg = RunConfig.from_file(_require(args.config), overrides)
        else:
            cfg = RunConfig.build(None, overrides)
        run = Run(args, cfg)
        if args.config:
            run.inputs.append(Path(args.config))
        with threadpool_limits(limits=cfg["threads"]):
            COMMANDS[args.command](run)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code
        code, kind = _classify(exc)
        if code == EXIT_INTERNAL:
            log.exception("unexpected failure")
        sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": str(exc),
                                     "type": type(exc).__name__}) + "\n")
        return code
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
