"""Command-line entry points.

    recapaug augment  --manifest F --out D --seed N --epoch N [--banks D]
                      [--config F] [--strict] [--workers N]
    recapaug gen-banks --out D --seed N [--workers N]
    recapaug preview  --image F --out F [--banks D] [--seed N] [--config F]
    recapaug policy sample --seed N --epoch N

Exit codes: 0 ok, 1 usage, 2 data errors, 3 missing banks. The bank
directory may also come from $RECAPAUG_BANK_DIR.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assets import BANK_DIR_ENV, default_bank_dir, generate_banks, load_banks
from .errors import ConfigError, FormatError, RecapError
from .image import ImageBuffer
from .imageio import load_image, quantize_u8, save_image
from .policy import (
    Label,
    Sample,
    active_registry,
    augment_sample,
    magnitude_value,
    policy_to_json,
    sample_policy,
)
from .rng import derive_rng, stable_hash64

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BANKS = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


@dataclass
class ManifestRecord:
    path: Path
    label: str
    domain: str


def read_manifest(path: Path) -> list[ManifestRecord]:
    """Line-delimited JSON, or CSV with a path,label,domain header."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"manifest not found: {path}")
    records = []
    if path.suffix.lower() == ".csv":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = [dict(row) for row in reader]
    else:
        rows = []
        for line_no, line in enumerate(path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{line_no}: bad JSON record: {exc}") from exc
    for row in rows:
        missing = {"path", "label", "domain"} - set(row)
        if missing:
            raise FormatError(f"manifest record missing fields {sorted(missing)}: {row}")
        rec_path = Path(row["path"])
        if not rec_path.is_absolute():
            rec_path = path.parent / rec_path
        records.append(ManifestRecord(rec_path, str(row["label"]).lower(), str(row["domain"])))
    return records


def _validate_record(rec: ManifestRecord) -> str | None:
    if rec.label not in (Label.BONAFIDE.value, Label.SPOOF.value):
        return f"label {rec.label!r} is neither 'bonafide' nor 'spoof'"
    if not rec.domain:
        return "domain is empty"
    if not rec.path.exists():
        return f"input file not found: {rec.path}"
    return None


def _augment_record(index, rec, policy, banks, registry, seed, epoch, out_path):
    rng = derive_rng(seed, epoch, index)
    sample = Sample(
        image=load_image(rec.path),
        label=Label(rec.label),
        domain_id=stable_hash64(rec.domain),
    )
    out = augment_sample(sample, policy, banks, rng, registry)
    save_image(out.image, out_path)
    ops = [
        {
            "kind": r["kind"],
            "magnitude_index": r["magnitude_index"],
            "resolved_magnitude": r["resolved_magnitude"],
        }
        for r in out.provenance
    ]
    assets = [{"kind": r["kind"], "draws": r["assets"]} for r in out.provenance if r["assets"]]
    return {
        "record_index": index,
        "source_path": str(rec.path),
        "output_path": out_path.name,
        "input_label": rec.label,
        "output_label": out.label.value,
        "domain_in": rec.domain,
        "domain_out": out.domain_id,
        "sub_policy_index": out.provenance[0]["sub_policy_index"] if out.provenance else None,
        "sub_policy": ops,
        "asset_ids": assets,
        "rng_seed_components": [seed, epoch, index],
    }


def cmd_augment(args) -> int:
    bank_dir = Path(args.banks) if args.banks else default_bank_dir()
    if bank_dir is None:
        print(
            f"error: no bank directory; pass --banks or set {BANK_DIR_ENV} "
            "(generate one with `recapaug gen-banks`)",
            file=sys.stderr,
        )
        return EXIT_BANKS
    try:
        banks = load_banks(bank_dir, args.backgrounds)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BANKS

    config = json.loads(Path(args.config).read_text()) if args.config else None
    try:
        registry = active_registry(config)
        records = read_manifest(args.manifest)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    out_dir = Path(args.out)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    provenance_path = out_dir / "provenance.jsonl"

    # resume: trust provenance lines whose output file is already present
    existing = {}
    if provenance_path.exists():
        for line in provenance_path.read_text().splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            if "error" not in entry:
                existing[entry["record_index"]] = entry

    policy = sample_policy(args.seed, args.epoch, registry)
    lines: dict[int, dict] = {}
    errors: dict[int, dict] = {}

    def process(indexed):
        index, rec = indexed
        problem = _validate_record(rec)
        if problem is not None:
            return index, None, problem
        out_path = images_dir / f"{index:05d}_{rec.path.stem}.png"
        prior = existing.get(index)
        if (
            prior
            and prior["source_path"] == str(rec.path)
            and prior.get("rng_seed_components") == [args.seed, args.epoch, index]
            and out_path.exists()
        ):
            return index, prior, None
        try:
            line = _augment_record(
                index, rec, policy, banks, registry, args.seed, args.epoch, out_path
            )
            return index, line, None
        except RecapError as exc:
            return index, None, str(exc)

    workers = max(1, args.workers)
    if workers == 1:
        results = map(process, enumerate(records))
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(process, enumerate(records))
    aborted = False
    for index, line, problem in results:
        if problem is not None:
            errors[index] = {
                "record_index": index,
                "source_path": str(records[index].path),
                "error": problem,
            }
            if args.strict:
                aborted = True
                break
        else:
            lines[index] = line
    if workers > 1:
        pool.shutdown(wait=not aborted, cancel_futures=aborted)

    merged = dict(sorted({**lines, **errors}.items()))
    with open(provenance_path, "w") as fh:
        for entry in merged.values():
            fh.write(json.dumps(entry) + "\n")

    for entry in errors.values():
        print(f"error: record {entry['record_index']}: {entry['error']}", file=sys.stderr)
    if aborted:
        return EXIT_DATA
    rate = len(errors) / len(records) if records else 0.0
    if rate > args.error_threshold:
        print(
            f"error rate {rate:.1%} exceeds threshold {args.error_threshold:.1%}",
            file=sys.stderr,
        )
        return EXIT_DATA
    return EXIT_OK


def cmd_gen_banks(args) -> int:
    try:
        counts = generate_banks(args.out, args.seed, workers=args.workers, log=print)
    except OSError as exc:
        print(f"error writing banks: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(counts))
    return EXIT_OK


def cmd_preview(args) -> int:
    bank_dir = Path(args.banks) if args.banks else default_bank_dir()
    if bank_dir is None:
        print(
            f"error: no bank directory; pass --banks or set {BANK_DIR_ENV}",
            file=sys.stderr,
        )
        return EXIT_BANKS
    try:
        banks = load_banks(bank_dir, args.backgrounds)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BANKS
    try:
        img = load_image(args.image)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    config = json.loads(Path(args.config).read_text()) if args.config else None
    registry = active_registry(config)

    rows = []
    try:
        for kind, entry in registry.items():
            tiles = []
            for level in range(10):
                rng = derive_rng(args.seed, kind, level)
                mag = magnitude_value(kind, level, registry)
                tile = entry.apply(img, mag, banks, rng, [])
                tiles.append(quantize_u8(tile.data))
            rows.append(np.concatenate(tiles, axis=1))
    except RecapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    sheet = np.concatenate(rows, axis=0)
    save_image(ImageBuffer(sheet.astype(np.float64) / 255.0), args.out)
    print(f"wrote {args.out}: {len(registry)} ops × 10 magnitudes")
    return EXIT_OK


def cmd_policy_sample(args) -> int:
    policy = sample_policy(args.seed, args.epoch)
    print(json.dumps(policy_to_json(policy), indent=2))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="recapaug", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="augment a dataset manifest")
    p_aug.add_argument("--manifest", required=True)
    p_aug.add_argument("--out", required=True)
    p_aug.add_argument("--seed", type=int, required=True)
    p_aug.add_argument("--epoch", type=int, required=True)
    p_aug.add_argument("--banks", default=None)
    p_aug.add_argument("--backgrounds", default=None)
    p_aug.add_argument("--config", default=None)
    p_aug.add_argument("--strict", action="store_true")
    p_aug.add_argument("--workers", type=int, default=1)
    p_aug.add_argument("--error-threshold", type=float, default=0.0)
    p_aug.set_defaults(func=cmd_augment)

    p_gen = sub.add_parser("gen-banks", help="generate the asset banks")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--workers", type=int, default=None)
    p_gen.set_defaults(func=cmd_gen_banks)

    p_prev = sub.add_parser("preview", help="write an op × magnitude contact sheet")
    p_prev.add_argument("--image", required=True)
    p_prev.add_argument("--out", required=True)
    p_prev.add_argument("--banks", default=None)
    p_prev.add_argument("--backgrounds", default=None)
    p_prev.add_argument("--seed", type=int, default=0)
    p_prev.add_argument("--config", default=None)
    p_prev.set_defaults(func=cmd_preview)

    p_pol = sub.add_parser("policy", help="policy inspection")
    pol_sub = p_pol.add_subparsers(dest="policy_command", required=True)
    p_sample = pol_sub.add_parser("sample", help="print the policy for (seed, epoch)")
    p_sample.add_argument("--seed", type=int, required=True)
    p_sample.add_argument("--epoch", type=int, required=True)
    p_sample.set_defaults(func=cmd_policy_sample)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
