"""Command-line surface: inject, annotate, evaluate, faithfulness, render.

Manifests are line-delimited JSON; configuration comes from defaults, an
optional TOML file, and flags, in increasing priority.  All randomness
derives from one --seed through named per-utterance substreams, so reruns
are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .alignment import ParallelPair, apply_alignment, dtw_align
from .annotation import (
    AnnotationConfig,
    BinaryMask,
    GaussianKernel2D,
    Heatmap,
    MaskOrigin,
    binarize,
    ground_truth_mask,
)
from .errors import InvalidInputError, SpoofmapError
from .faithfulness import (
    merge_reports,
    run_faithfulness,
    write_faithfulness_csv,
    write_faithfulness_json,
)
from .formats import atomic_write_bytes, read_hmap, render_pgm, write_hmap
from .injector import ArtifactKind, ArtifactSpec, inject, synthesize_voice_like
from .metrics_seg import evaluate_dataset, write_segmentation_csv, write_segmentation_json
from .scorer_io import DummyBandEnergyScorer, ExternalScorerSession
from .spectral import StftConfig
from .wav_io import read_wav, write_wav

EXIT_OK = 0
EXIT_ENTRY_ERRORS = 1
EXIT_FATAL = 2


@dataclass
class ManifestEntry:
    utterance_id: str
    bona_fide_path: str
    spoof_path: str
    vocoder_id: str = ""
    needs_alignment: bool = False


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    dataset_name: str


def load_manifest(path: str | Path) -> Manifest:
    """Parse a JSONL pair manifest; an optional first header line may carry
    {"dataset_name": ...}."""
    path = Path(path)
    dataset_name = path.stem
    entries = []
    seen = set()
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        if "utterance_id" not in obj:
            if "dataset_name" in obj and not entries:
                dataset_name = str(obj["dataset_name"])
                continue
            raise SpoofmapError(f"{path}:{lineno}: manifest line without utterance_id")
        entry = ManifestEntry(
            utterance_id=str(obj["utterance_id"]),
            bona_fide_path=str(obj["bona_fide_path"]),
            spoof_path=str(obj["spoof_path"]),
            vocoder_id=str(obj.get("vocoder_id", "")),
            needs_alignment=bool(obj.get("needs_alignment", False)),
        )
        if entry.utterance_id in seen:
            raise SpoofmapError(f"{path}:{lineno}: duplicate utterance_id {entry.utterance_id!r}")
        seen.add(entry.utterance_id)
        entries.append(entry)
    return Manifest(entries=entries, dataset_name=dataset_name)


def _load_toml(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _stft_config(args: argparse.Namespace, file_cfg: dict) -> StftConfig:
    section = file_cfg.get("stft", {})
    return StftConfig(
        fft_size=args.fft_size if args.fft_size is not None else section.get("fft_size", 512),
        hop=args.hop if args.hop is not None else section.get("hop", 128),
        window=section.get("window", "hann"),
        center_pad=section.get("center_pad", True),
    )


def _annotation_config(args: argparse.Namespace, file_cfg: dict) -> AnnotationConfig:
    section = file_cfg.get("annotation", {})
    kcfg = section.get("kernel", {})
    kernel = GaussianKernel2D(
        size_time=kcfg.get("size_time", 3),
        size_freq=kcfg.get("size_freq", 11),
        var_time=kcfg.get("var_time", 3.0),
        var_freq=kcfg.get("var_freq", 5.0),
    )
    quantile = args.quantile if args.quantile is not None else section.get("quantile", 0.95)
    domain = (
        args.magnitude_domain
        if args.magnitude_domain is not None
        else section.get("magnitude_domain", "linear")
    )
    return AnnotationConfig(
        kernel=kernel,
        quantile=quantile,
        denom_epsilon=section.get("denom_epsilon", 1e-8),
        magnitude_domain=domain,
    )


def _substream_seed(seed: int, index: int, stream: int) -> int:
    """Derive a named per-utterance seed from the global one."""
    return int(np.random.SeedSequence([seed, index, stream]).generate_state(1)[0])


def _atomic_write_wav(path: Path, wave, fmt: str = "float32") -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp.wav")
    os.close(fd)
    try:
        write_wav(tmp, wave, fmt=fmt)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _report_entry_errors(errors: list[dict], n_ok: int, strict: bool) -> int:
    for err in errors:
        print(f"error: {err['utterance_id']}: {err['error']}", file=sys.stderr)
    if not errors:
        return EXIT_OK
    if strict or n_ok == 0:
        return EXIT_ENTRY_ERRORS
    return EXIT_OK


def cmd_inject(args: argparse.Namespace) -> int:
    spec_path = Path(args.specs)
    if spec_path.suffix == ".json":
        spec_doc = json.loads(spec_path.read_text("utf-8"))
    else:
        spec_doc = _load_toml(spec_path)
    utterances = spec_doc.get("utterances", [])
    if not utterances:
        print("error: no entries in injection spec", file=sys.stderr)
        return EXIT_FATAL
    file_cfg = _load_toml(args.config) if args.config else {}
    stft_cfg = _stft_config(args, file_cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(index_utt: tuple[int, dict]) -> tuple[str | None, dict | None]:
        index, utt = index_utt
        uid = str(utt.get("id", f"utt{index:04d}"))
        try:
            specs = [
                ArtifactSpec(
                    kind=ArtifactKind(a["kind"]),
                    t_start=int(a["t_start"]),
                    t_end=int(a["t_end"]),
                    f_low=int(a["f_low"]),
                    f_high=int(a["f_high"]),
                    strength_db=float(a.get("strength_db", 20.0)),
                )
                for a in utt.get("artifacts", [])
            ]
            wave = synthesize_voice_like(
                float(utt.get("duration_s", 1.0)),
                sample_rate=int(utt.get("sample_rate", 16000)),
                seed=_substream_seed(args.seed, index, 0),
            )
            record = inject(wave, specs, stft_cfg, seed=_substream_seed(args.seed, index, 1))
            bona_path = out_dir / f"{uid}.bona.wav"
            spoof_path = out_dir / f"{uid}.spoof.wav"
            _atomic_write_wav(bona_path, record.pair.bona_fide)
            _atomic_write_wav(spoof_path, record.pair.spoof)
            write_hmap(out_dir / f"{uid}.oracle.hmap", record.oracle_mask.data)
            line = json.dumps(
                {
                    "utterance_id": uid,
                    "bona_fide_path": str(bona_path),
                    "spoof_path": str(spoof_path),
                    "vocoder_id": "injected",
                    "needs_alignment": False,
                },
                sort_keys=True,
            )
            return line, None
        except (SpoofmapError, KeyError, ValueError) as exc:
            return None, {"utterance_id": uid, "error": str(exc)}

    items = list(enumerate(utterances))
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(item) for item in items]
    manifest_lines = [json.dumps({"dataset_name": spec_doc.get("dataset_name", "injected")})]
    manifest_lines += [line for line, _ in results if line is not None]
    errors = [err for _, err in results if err is not None]
    n_ok = len(results) - len(errors)
    manifest_path = out_dir / "pairs.jsonl"
    atomic_write_bytes(manifest_path, ("\n".join(manifest_lines) + "\n").encode("utf-8"))
    print(f"injected {n_ok}/{len(utterances)} utterances into {out_dir}")
    return _report_entry_errors(errors, n_ok, args.strict)


def _annotate_entry(entry: ManifestEntry, ann_cfg, stft_cfg, out_dir: Path, render: bool) -> None:
    bona = read_wav(entry.bona_fide_path)
    spoof = read_wav(entry.spoof_path)
    pair = ParallelPair(
        bona_fide=bona,
        spoof=spoof,
        utterance_id=entry.utterance_id,
        vocoder_id=entry.vocoder_id,
        aligned=not entry.needs_alignment and len(bona) == len(spoof),
    )
    if entry.needs_alignment:
        pair = apply_alignment(pair, dtw_align(pair))
    elif not pair.aligned:
        raise SpoofmapError(
            f"pair lengths differ ({len(bona)} vs {len(spoof)}) but needs_alignment is false"
        )
    mask, heatmap = ground_truth_mask(pair, ann_cfg, stft_cfg)
    write_hmap(out_dir / f"{entry.utterance_id}.mask.hmap", mask.data)
    write_hmap(out_dir / f"{entry.utterance_id}.heatmap.hmap", heatmap.data)
    if render:
        render_pgm(mask.data.astype(np.float64), out_dir / f"{entry.utterance_id}.mask.pgm")
        render_pgm(heatmap.data, out_dir / f"{entry.utterance_id}.heatmap.pgm")


def cmd_annotate(args: argparse.Namespace) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except (OSError, json.JSONDecodeError, SpoofmapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    if not manifest.entries:
        print("error: no entries", file=sys.stderr)
        return EXIT_FATAL
    file_cfg = _load_toml(args.config) if args.config else {}
    ann_cfg = _annotation_config(args, file_cfg)
    stft_cfg = _stft_config(args, file_cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(entry: ManifestEntry) -> dict | None:
        try:
            _annotate_entry(entry, ann_cfg, stft_cfg, out_dir, args.render_pgm)
            return None
        except (SpoofmapError, OSError, ValueError) as exc:
            return {"utterance_id": entry.utterance_id, "error": str(exc)}

    entries = sorted(manifest.entries, key=lambda e: e.utterance_id)
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(work, entries))
    else:
        results = [work(e) for e in entries]
    errors = [r for r in results if r is not None]
    n_ok = len(entries) - len(errors)
    summary = {
        "dataset_name": manifest.dataset_name,
        "n_entries": len(entries),
        "n_annotated": n_ok,
        "skipped": errors,
    }
    atomic_write_bytes(out_dir / "summary.json", (json.dumps(summary, indent=2) + "\n").encode("utf-8"))
    print(f"annotated {n_ok}/{len(entries)} pairs into {out_dir}")
    return _report_entry_errors(errors, n_ok, args.strict)


def _collect_hmaps(directory: Path, prefer: str) -> dict[str, Path]:
    """Map utterance_id (name up to the first dot) to its hmap file.

    When an id has several hmap files, prefer the requested kind.
    """
    groups: dict[str, list[Path]] = {}
    for path in sorted(directory.glob("*.hmap")):
        groups.setdefault(path.name.split(".")[0], []).append(path)
    chosen = {}
    for uid, paths in groups.items():
        if len(paths) == 1:
            chosen[uid] = paths[0]
            continue
        kinds = {p: read_hmap(p)[1] for p in paths}
        preferred = [p for p in paths if kinds[p] == prefer]
        if len(preferred) != 1:
            raise SpoofmapError(
                f"{directory}: ambiguous hmap files for id {uid!r}: "
                f"{[p.name for p in paths]}"
            )
        chosen[uid] = preferred[0]
    return chosen


def cmd_evaluate(args: argparse.Namespace) -> int:
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    try:
        preds = _collect_hmaps(pred_dir, prefer="heatmap")
        gts = _collect_hmaps(gt_dir, prefer="mask")
    except (SpoofmapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    missing = sorted(set(gts) - set(preds))
    extra = sorted(set(preds) - set(gts))
    if missing or extra:
        if missing:
            print(f"error: ids missing from predictions: {missing}", file=sys.stderr)
        if extra:
            print(f"error: ids missing from ground truth: {extra}", file=sys.stderr)
        return EXIT_FATAL
    if not preds:
        print("error: no hmap files found", file=sys.stderr)
        return EXIT_FATAL

    ids = sorted(preds)
    pred_items: list[Heatmap | BinaryMask] = []
    gt_items: list[BinaryMask] = []
    for uid in ids:
        arr, kind = read_hmap(preds[uid])
        if kind == "mask":
            pred_items.append(BinaryMask(arr, MaskOrigin.BINARIZED_PREDICTION))
        else:
            pred_items.append(Heatmap(np.clip(arr, 0.0, 1.0)))
        gt_arr, gt_kind = read_hmap(gts[uid])
        if gt_kind != "mask":
            print(f"error: ground-truth file {gts[uid]} is not a mask", file=sys.stderr)
            return EXIT_FATAL
        gt_items.append(BinaryMask(gt_arr, MaskOrigin.GROUND_TRUTH))

    report = evaluate_dataset(pred_items, gt_items, quantile=args.quantile, ids=ids)
    out = Path(args.out_report)
    write_segmentation_csv(report, out.with_suffix(".csv"))
    write_segmentation_json(report, out.with_suffix(".json"))
    print(
        f"evaluated {report.n_items} items: "
        + " ".join(f"{m}={getattr(report, m) * 100:.2f}" for m in ("gdice", "f1", "iou"))
    )
    return EXIT_OK


def _load_heatmap_for(uid: str, heatmap_dir: Path) -> Heatmap:
    candidates = [heatmap_dir / f"{uid}.heatmap.hmap", heatmap_dir / f"{uid}.hmap"]
    candidates += sorted(set(heatmap_dir.glob(f"{uid}.*.hmap")) - set(candidates))
    for path in candidates:
        if path.exists():
            arr, kind = read_hmap(path)
            if kind == "mask":
                return Heatmap(arr.astype(np.float64))
            return Heatmap(np.clip(arr, 0.0, 1.0))
    raise SpoofmapError(f"no heatmap file for id {uid!r} in {heatmap_dir}")


def cmd_faithfulness(args: argparse.Namespace) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except (OSError, json.JSONDecodeError, SpoofmapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    if not manifest.entries:
        print("error: no entries", file=sys.stderr)
        return EXIT_FATAL
    file_cfg = _load_toml(args.config) if args.config else {}
    stft_cfg = _stft_config(args, file_cfg)
    heatmap_dir = Path(args.heatmap_dir)

    entries = sorted(manifest.entries, key=lambda e: e.utterance_id)
    pairs, heatmaps, ids, errors = [], [], [], []
    for entry in entries:
        try:
            bona = read_wav(entry.bona_fide_path)
            spoof = read_wav(entry.spoof_path)
            pair = ParallelPair(
                bona_fide=bona,
                spoof=spoof,
                utterance_id=entry.utterance_id,
                vocoder_id=entry.vocoder_id,
                aligned=not entry.needs_alignment and len(bona) == len(spoof),
            )
            if entry.needs_alignment:
                pair = apply_alignment(pair, dtw_align(pair))
            heatmaps.append(_load_heatmap_for(entry.utterance_id, heatmap_dir))
            pairs.append(pair)
            ids.append(entry.utterance_id)
        except (SpoofmapError, OSError, ValueError) as exc:
            errors.append({"utterance_id": entry.utterance_id, "error": str(exc)})
    if not pairs:
        print("error: no loadable entries", file=sys.stderr)
        return EXIT_ENTRY_ERRORS

    def make_scorer():
        if args.scorer_cmd:
            return ExternalScorerSession(shlex.split(args.scorer_cmd))
        return DummyBandEnergyScorer(
            (args.dummy_band[0], args.dummy_band[1]), args.dummy_ref, stft_cfg
        )

    def run_chunk(chunk_indices: list[int]):
        # each worker owns its own scorer session
        scorer = make_scorer()
        try:
            return run_faithfulness(
                [pairs[i] for i in chunk_indices],
                [heatmaps[i] for i in chunk_indices],
                scorer,
                stft_cfg,
                binarize_quantile=args.binarize_quantile,
                ids=[ids[i] for i in chunk_indices],
            )
        except InvalidInputError:
            # the whole chunk failed scoring; report it as per-item errors
            return [{"utterance_id": ids[i], "error": "scoring failed"} for i in chunk_indices]
        finally:
            if isinstance(scorer, ExternalScorerSession):
                scorer.close()

    workers = max(1, min(args.workers, len(pairs)))
    chunks = [list(range(w, len(pairs), workers)) for w in range(workers)]
    try:
        if workers == 1:
            results = [run_chunk(chunks[0])]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run_chunk, chunks))
        reports = [r for r in results if not isinstance(r, list)]
        failed = [e for r in results if isinstance(r, list) for e in r]
        if not reports:
            print("error: no loadable entries produced a score", file=sys.stderr)
            return EXIT_ENTRY_ERRORS
        report = merge_reports(reports) if len(reports) > 1 else reports[0]
        report.errors = report.errors + failed
    except SpoofmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL

    report.errors = errors + report.errors
    out = Path(args.out_report)
    write_faithfulness_csv(report, out.with_suffix(".csv"))
    write_faithfulness_json(report, out.with_suffix(".json"))
    print(
        f"faithfulness over {report.n_items} items: "
        f"AI={report.ai:.2f} AD={report.ad:.2f} AG={report.ag:.2f} Fid-In={report.fid_in:.4f}"
    )
    return _report_entry_errors(report.errors, report.n_items, args.strict)


def cmd_render(args: argparse.Namespace) -> int:
    try:
        arr, kind = read_hmap(args.hmap)
    except (SpoofmapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    if kind == "mask":
        raster = arr.astype(np.float64)
    elif args.binarize:
        raster = binarize(Heatmap(np.clip(arr, 0.0, 1.0)), args.quantile).data.astype(np.float64)
    else:
        raster = arr
    try:
        render_pgm(raster, args.out_pgm)
    except OSError as exc:
        print(f"error: cannot write {args.out_pgm}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    print(f"rendered {args.hmap} -> {args.out_pgm}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="TOML config file")
    parser.add_argument("--fft-size", type=int, default=None)
    parser.add_argument("--hop", type=int, default=None)
    parser.add_argument("--strict", action="store_true", help="nonzero exit on any entry error")
    parser.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spoofmap",
        description="Ground-truth explanations for vocoded audio and heatmap evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inject", help="synthesize parallel pairs with known artifacts")
    p.add_argument("--specs", required=True, help="injection spec manifest (TOML or JSON)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("annotate", help="ground-truth masks and heatmaps for manifest pairs")
    p.add_argument("--manifest", required=True, help="JSONL pair manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--quantile", type=float, default=None)
    p.add_argument("--magnitude-domain", choices=("linear", "log"), default=None)
    p.add_argument("--render-pgm", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("evaluate", help="segmentation metrics of predictions vs ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--out-report", required=True, help="report path; .csv/.json are appended")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("faithfulness", help="AI/AD/AG/Fid-In under bona-fide replacement")
    p.add_argument("--manifest", required=True)
    p.add_argument("--heatmap-dir", required=True)
    p.add_argument("--scorer-cmd", default=None, help="external scorer command line")
    p.add_argument(
        "--dummy-band",
        type=float,
        nargs=2,
        metavar=("F_LOW_HZ", "F_HIGH_HZ"),
        default=(1000.0, 3000.0),
        help="band for the built-in dummy scorer (used when --scorer-cmd is absent)",
    )
    p.add_argument("--dummy-ref", type=float, default=1.0, help="dummy scorer reference energy")
    p.add_argument("--binarize-quantile", type=float, default=None)
    p.add_argument("--out-report", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_faithfulness)

    p = sub.add_parser("render", help="render an HMAP file to PGM")
    p.add_argument("hmap")
    p.add_argument("out_pgm")
    p.add_argument("--binarize", action="store_true")
    p.add_argument("--quantile", type=float, default=0.95)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
