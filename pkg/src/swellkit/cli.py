"""swellkit command line: segment, swell, stats, eval, align-demo.

Settings resolve as flags > environment > config file > built-in default,
and every effective value remembers where it came from. The config file is
TOML; keys at the top level apply to any command that knows them, keys
inside a [command] table apply to that command only. Unknown keys are
rejected outright.

Exit codes: 0 success, 1 fatal, 2 finished with per-item failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import tomli

from swellkit import align as align_mod
from swellkit import evaluation as eval_mod
from swellkit import masks as masks_mod
from swellkit import stats as stats_mod
from swellkit import swelling as swell_mod
from swellkit.crops import CropConfig

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


class CliError(Exception):
    """Fatal command-line problem; message goes to stderr, exit code 1."""


@dataclass(frozen=True)
class Opt:
    key: str
    flag: str
    type: type
    default: object
    help: str
    env: str | None = None
    choices: tuple | None = None


GLOBAL_OPTS = [
    Opt("config", "--config", str, None, "TOML config file"),
    Opt("jobs", "--jobs", int, 0, "worker threads; 0 means the available parallelism"),
]

COMMAND_OPTS: dict[str, list[Opt]] = {
    "segment": [
        Opt("backend", "--backend", str, "synthetic", "mask source", choices=("synthetic", "service")),
        Opt("endpoint", "--endpoint", str, None, "segmentation service base URL",
            env=masks_mod.ENDPOINT_ENV),
        Opt("images", "--images", str, None, "directory of input images"),
        Opt("out", "--out", str, None, "manifest JSONL to write"),
        Opt("luma_threshold", "--luma-threshold", int, 40, "synthetic backend: foreground luma cut"),
        Opt("min_area", "--min-area", int, 64, "synthetic backend: minimum component area, px^2"),
        Opt("timeout_ms", "--timeout-ms", int, 10000, "service backend: per-request timeout"),
        Opt("retries", "--retries", int, 2, "service backend: transport retries per image"),
    ],
    "swell": [
        Opt("manifest", "--manifest", str, None, "manifest JSONL"),
        Opt("images", "--images", str, None, "images root directory"),
        Opt("out", "--out", str, None, "sample store directory"),
        Opt("ratio", "--ratio", float, 1.0, "fraction of images to use, in (0, 1]"),
        Opt("seed", "--seed", int, 0, "subsampling seed"),
        Opt("min_area", "--min-area", int, 64, "minimum mask area, px^2"),
        Opt("max_per_image", "--max-per-image", int, 64, "sample cap per image"),
        Opt("template_size", "--template-size", int, 127, "template patch side, px"),
        Opt("search_size", "--search-size", int, 255, "search patch side, px"),
        Opt("context_amount", "--context-amount", float, 0.5, "crop context amount"),
    ],
    "stats": [
        Opt("index", "--index", str, None, "sample store index.jsonl"),
        Opt("csv", "--csv", str, None, "histogram CSV to write (bin,count)"),
        Opt("json", "--json", str, None, "summary JSON to write"),
        Opt("lai_threshold", "--lai-threshold", float, 20.0, "low ambient intensity cut (strict <)"),
    ],
    "eval": [
        Opt("gt", "--gt", str, None, "ground-truth directory (one .txt per sequence)"),
        Opt("attributes", "--attributes", str, None, "JSON file mapping sequence to tags"),
        Opt("report", "--report", str, None, "ranking CSV to write"),
        Opt("curves_dir", "--curves-dir", str, None, "curve CSV directory (default: <report dir>/curves)"),
    ],
    "align-demo": [
        Opt("steps", "--steps", int, 600, "training steps"),
        Opt("lr", "--lr", float, 0.05, "learning rate"),
        Opt("lambda", "--lambda", float, 1.0, "gradient reversal strength"),
        Opt("seed", "--seed", int, 7, "rng seed"),
        Opt("report", "--report", str, None, "demo report JSON to write"),
        Opt("trace", "--trace", str, None, "loss trace CSV to write"),
        Opt("src_mean", "--src-mean", str, "0,0", "source Gaussian mean, comma separated"),
        Opt("tgt_mean", "--tgt-mean", str, "3,0", "target Gaussian mean, comma separated"),
        Opt("cov", "--cov", float, 1.0, "isotropic variance of both domains"),
    ],
}


@dataclass
class RunConfig:
    values: dict[str, object]
    provenance: dict[str, str]

    def __getitem__(self, key):
        return self.values[key]


def _parse_config_file(path: str, command: str) -> dict[str, object]:
    """Flat keys apply when the command knows them; [command] tables are scoped."""
    known = {o.key for o in COMMAND_OPTS[command] + GLOBAL_OPTS}
    all_known = {o.key for opts in COMMAND_OPTS.values() for o in opts} | {o.key for o in GLOBAL_OPTS}
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as e:
        raise CliError(f"cannot read config {path}: {e}") from e
    out: dict[str, object] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in COMMAND_OPTS:
                raise CliError(f"config {path}: unknown command table [{key}]")
            if key != command:
                continue
            table_known = {o.key for o in COMMAND_OPTS[key]}
            for k, v in value.items():
                if k not in table_known:
                    raise CliError(f"config {path}: unknown key {k!r} in [{key}]")
                out[k] = v
        else:
            if key not in all_known:
                raise CliError(f"config {path}: unknown key {key!r}")
            if key in known:
                out[key] = value
    return out


def resolve_config(args: argparse.Namespace, command: str) -> RunConfig:
    opts = COMMAND_OPTS[command] + GLOBAL_OPTS
    values: dict[str, object] = {}
    provenance: dict[str, str] = {}
    file_values: dict[str, object] = {}
    config_path = getattr(args, "config", None)
    if config_path:
        file_values = _parse_config_file(config_path, command)
    for opt in opts:
        if opt.key == "config":
            continue
        flag_value = getattr(args, opt.key.replace("-", "_"), None)
        if flag_value is not None:
            values[opt.key], provenance[opt.key] = flag_value, "flag"
        elif opt.env and os.environ.get(opt.env):
            values[opt.key], provenance[opt.key] = os.environ[opt.env], f"env:{opt.env}"
        elif opt.key in file_values:
            values[opt.key] = opt.type(file_values[opt.key]) if file_values[opt.key] is not None else None
            provenance[opt.key] = f"config:{config_path}"
        else:
            values[opt.key], provenance[opt.key] = opt.default, "default"
        if opt.choices and values[opt.key] is not None and values[opt.key] not in opt.choices:
            raise CliError(f"{opt.flag} must be one of {', '.join(map(str, opt.choices))}")
    return RunConfig(values, provenance)


def _require(cfg: RunConfig, *keys: str):
    missing = [k for k in keys if cfg.values.get(k) in (None, "")]
    if missing:
        raise CliError("missing required option(s): " + ", ".join(f"--{k.replace('_', '-')}" for k in missing))


def _effective_jobs(cfg: RunConfig) -> int:
    jobs = int(cfg["jobs"] or 0)
    return jobs if jobs > 0 else (os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swellkit",
                                     description="training-sample swelling and tracking evaluation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "segment": "write a mask manifest for a directory of images",
        "swell": "generate template/search training samples from a manifest",
        "stats": "ambient-intensity histogram over a sample store index",
        "eval": "one-pass evaluation of tracker predictions",
        "align-demo": "adversarial day/night feature alignment demo",
    }
    for command, opts in COMMAND_OPTS.items():
        p = sub.add_parser(command, help=descriptions[command])
        for opt in opts + GLOBAL_OPTS:
            extra = {}
            if opt.choices:
                extra["choices"] = list(opt.choices)
            p.add_argument(opt.flag, dest=opt.key.replace("-", "_"), type=opt.type, default=None,
                           help=f"{opt.help} [default: {opt.default}]", **extra)
        if command == "eval":
            p.add_argument("--pred", dest="pred", action="append", default=None,
                           help="tracker prediction directory; repeatable [default: none]")
    return parser


def _iter_image_files(images_dir: Path):
    files = [p for p in sorted(images_dir.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES]
    if not files:
        raise CliError(f"no image files found in {images_dir}")
    return files


def cmd_segment(cfg: RunConfig) -> int:
    _require(cfg, "images", "out")
    backend = cfg["backend"]
    if backend == "service":
        _require(cfg, "endpoint")
    images_dir = Path(str(cfg["images"]))
    if not images_dir.is_dir():
        raise CliError(f"images directory not found: {images_dir}")
    files = _iter_image_files(images_dir)

    def work(path: Path):
        image_id = path.stem
        try:
            img = masks_mod.load_night_image(path)
            if backend == "synthetic":
                ms = masks_mod.synthetic_segment(img, int(cfg["luma_threshold"]),
                                                 int(cfg["min_area"]), image_id=image_id)
            else:
                ms = masks_mod.fetch_masks(str(cfg["endpoint"]), img,
                                           timeout_ms=int(cfg["timeout_ms"]),
                                           retries=int(cfg["retries"]), image_id=image_id)
            return path, masks_mod.ManifestRecord(image=path.name, mask_set=ms), None
        except Exception as e:  # per-image failure; the run continues
            return path, None, f"{type(e).__name__}: {e}"

    failures = 0
    out_path = Path(str(cfg["out"]))
    with out_path.open("w", encoding="utf-8", newline="\n") as fh:
        with ThreadPoolExecutor(max_workers=_effective_jobs(cfg)) as pool:
            for path, record, error in pool.map(work, files):
                if error is not None:
                    failures += 1
                    print(f"segment: {path.name}: {error}", file=sys.stderr)
                    continue
                fh.write(masks_mod.record_to_line(record) + "\n")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_swell(cfg: RunConfig) -> int:
    _require(cfg, "manifest", "images", "out")
    crop = CropConfig(template_size=int(cfg["template_size"]),
                      search_size=int(cfg["search_size"]),
                      context_amount=float(cfg["context_amount"]))
    swell_cfg = swell_mod.SwellConfig(crop=crop, min_area=int(cfg["min_area"]),
                                      max_samples_per_image=int(cfg["max_per_image"]),
                                      ratio=float(cfg["ratio"]), seed=int(cfg["seed"]))
    report = swell_mod.swell_dataset(str(cfg["manifest"]), str(cfg["images"]), swell_cfg,
                                     str(cfg["out"]), jobs=_effective_jobs(cfg))
    print(json.dumps(report.to_dict(), separators=(",", ":")))
    return EXIT_PARTIAL if report.errors else EXIT_OK


def cmd_stats(cfg: RunConfig) -> int:
    _require(cfg, "index")
    hist = stats_mod.histogram_from_index(str(cfg["index"]), float(cfg["lai_threshold"]))
    if cfg.values.get("csv"):
        stats_mod.write_histogram_csv(hist, str(cfg["csv"]))
    if cfg.values.get("json"):
        stats_mod.write_summary_json(hist, str(cfg["json"]))
    print(json.dumps(stats_mod.summary_dict(hist), separators=(",", ":")))
    return EXIT_OK


def cmd_eval(cfg: RunConfig, pred_dirs: list[str]) -> int:
    _require(cfg, "gt", "report")
    if not pred_dirs:
        raise CliError("at least one --pred directory is required")
    sequences = eval_mod.load_benchmark(str(cfg["gt"]), pred_dirs,
                                        cfg.values.get("attributes"))
    report = eval_mod.evaluate(sequences)
    report_path = Path(str(cfg["report"]))
    eval_mod.write_report_csv(report, report_path)
    curves_dir = cfg.values.get("curves_dir")
    curves_dir = Path(str(curves_dir)) if curves_dir else report_path.parent / "curves"
    eval_mod.write_curves(report, curves_dir)
    for rank, tracker in enumerate(report.ranking, start=1):
        r = report.results[tracker]
        print(f"{rank}. {tracker} auc={r.auc:.6f} p_norm={r.p_norm:.6f} p={r.p:.6f}")
    return EXIT_OK


def cmd_align_demo(cfg: RunConfig) -> int:
    def mean(text: str) -> tuple[float, ...]:
        try:
            return tuple(float(v) for v in str(text).split(","))
        except ValueError as e:
            raise CliError(f"bad mean vector {text!r}: {e}") from e

    try:
        demo_cfg = align_mod.DemoConfig(steps=int(cfg["steps"]), lr=float(cfg["lr"]),
                                        lambda_=float(cfg["lambda"]), seed=int(cfg["seed"]),
                                        src_mean=mean(cfg["src_mean"]), tgt_mean=mean(cfg["tgt_mean"]),
                                        cov=float(cfg["cov"]))
    except ValueError as e:
        raise CliError(str(e)) from e
    try:
        report = align_mod.run_demo(demo_cfg)
    except align_mod.DivergenceError as e:
        print(f"align-demo diverged: {e} (trace length {len(e.trace)})", file=sys.stderr)
        return EXIT_FATAL
    if cfg.values.get("report"):
        with Path(str(cfg["report"])).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_json() + "\n")
    if cfg.values.get("trace"):
        align_mod.write_trace_csv(report, str(cfg["trace"]))
    print(report.to_json())
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args, args.command)
        if args.command == "segment":
            return cmd_segment(cfg)
        if args.command == "swell":
            return cmd_swell(cfg)
        if args.command == "stats":
            return cmd_stats(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.pred or [])
        if args.command == "align-demo":
            return cmd_align_demo(cfg)
        raise CliError(f"unknown command {args.command!r}")
    except CliError as e:
        print(f"swellkit {args.command}: {e}", file=sys.stderr)
        return EXIT_FATAL
    except (masks_mod.ManifestError, masks_mod.MaskValidationError,
            eval_mod.EvaluationError, ValueError, OSError) as e:
        print(f"swellkit {args.command}: {e}", file=sys.stderr)
        return EXIT_FATAL


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
