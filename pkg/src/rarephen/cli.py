"""Batch command-line frontend.

One subcommand per pipeline stage (extract, weaklabel, train, infer,
evaluate, compare-icd) so partial reruns after parameter changes stay cheap.
Every command that writes artifacts also writes a manifest with the config
snapshot, input/output content digests, seed, and counts; identical inputs
reproduce identical output bytes.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, evaluation, model as model_mod, pipeline as pl, weaklabel
from .errors import DataFormatError, PipelineError
from .nerl import MentionCandidate

log = logging.getLogger("rarephen")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); remap to usage error
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="rarephen", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rarephen {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run config JSON")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker cap for embedding")
    common.add_argument("--out-dir", default="out", help="artifact directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="extract mention candidates")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("weaklabel", parents=[common], help="weak-label extracted candidates")
    p.add_argument("--candidates", default=None, help="candidate JSONL (default OUT/candidates.jsonl)")
    p.add_argument("--grid", action="store_true", help="grid-search the rule thresholds")
    p.add_argument("--gold", default=None, help="gold CSV used to score grid cells")
    p.add_argument("--grid-metric", choices=("f1", "recall"), default="f1")
    p.set_defaults(func=cmd_weaklabel)

    p = sub.add_parser("train", parents=[common], help="train the phenotype confirmation model")
    p.add_argument("--kind", choices=("weak", "strong"), default="weak")
    p.add_argument("--weak", default=None, help="weak dataset JSONL (kind=weak)")
    p.add_argument("--gold", default=None, help="gold CSV (kind=strong)")
    p.add_argument("--candidates", default=None, help="candidate JSONL (kind=strong)")
    p.add_argument("--cap", type=int, default=None, help="use only the first N training rows")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common], help="run inference over the corpus")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--candidates", default=None, help="reuse an extracted candidate JSONL")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against gold labels")
    p.add_argument("--predictions", default=None, help="mention predictions JSONL")
    p.add_argument("--gold", required=True, help="gold mention CSV")
    p.add_argument("--split", choices=("seen-unseen",), default=None)
    p.add_argument("--weak", default=None, help="weak dataset JSONL holding the rule records")
    p.add_argument("--admissions", default=None, help="admission results JSONL")
    p.add_argument("--gold-admissions", default=None, help="admission gold CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare-icd", parents=[common], help="compare NLP output with coded data")
    p.add_argument("--admissions", required=True, help="admission results JSONL from infer")
    p.add_argument("--icd", required=True, help="admission_id,icd9_code CSV")
    p.set_defaults(func=cmd_compare_icd)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


# -- shared plumbing ------------------------------------------------------------


def _load_config(args) -> pl.PipelineConfig:
    config = pl.PipelineConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = args.seed
        config.train.seed = args.seed
    config.validate_files()
    return config


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, config: pl.PipelineConfig, inputs, outputs, counts) -> Path:
    manifest = {
        "tool": "rarephen",
        "version": __version__,
        "command": command,
        "seed": config.seed,
        "config": config.snapshot(),
        "inputs": {str(p): _digest(p) for p in inputs},
        # keyed by name so a rerun into another directory stays comparable
        "outputs": {Path(p).name: _digest(p) for p in outputs},
        "counts": counts,
    }
    path = out / f"{command}.manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _config_input_paths(config: pl.PipelineConfig) -> list[Path]:
    paths = [Path(config.corpus)] + [Path(v) for v in config.ontology.to_dict().values()]
    if config.triggers:
        paths.append(Path(config.triggers))
    return paths


def _read_candidates(path: str | Path) -> list[MentionCandidate]:
    return [MentionCandidate.from_dict(row) for row in pl.read_jsonl(path)]


def _candidates_path(args, out: Path) -> Path:
    path = Path(args.candidates) if args.candidates else out / "candidates.jsonl"
    if not path.is_file():
        raise DataFormatError(f"candidate file not found: {path} (run `rarephen extract` first)")
    return path


# -- commands ---------------------------------------------------------------------


def cmd_extract(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    docs = pl.load_corpus(config.corpus)
    pipe = pl.Pipeline(config)
    extraction = pipe.extract_corpus(docs)
    cand_path = out / "candidates.jsonl"
    pl.write_jsonl(cand_path, (c.to_dict() for c in extraction.candidates))
    counts = {
        "documents": len(docs),
        "candidates": len(extraction.candidates),
        "prefilter_candidates": len(extraction.prefilter_candidates),
    }
    _write_manifest(out, "extract", config, _config_input_paths(config), [cand_path], counts)
    log.info("extracted %d candidates from %d documents", counts["candidates"], counts["documents"])
    return 0


def cmd_weaklabel(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    cand_path = _candidates_path(args, out)
    candidates = _read_candidates(cand_path)
    if not candidates:
        raise DataFormatError(f"no candidates in {cand_path}")

    freq_candidates = None
    if config.freq_scope == pl.FREQ_SCOPE_PREFILTER:
        docs = pl.load_corpus(config.corpus)
        freq_candidates = pl.Pipeline(config).extract_corpus(docs).prefilter_candidates

    outputs = []
    counts: dict = {}
    if args.grid:
        if not args.gold:
            raise _UsageError("--grid needs --gold to score the cells")
        gold = evaluation.read_gold_csv(args.gold)
        metric = args.grid_metric

        def scorer(_params, dataset: weaklabel.WeakDataset) -> float:
            predictions = {
                key: bool(ev.lambda1 and ev.lambda2) for key, ev in dataset.evaluations.items()
            }
            report = evaluation.mention_metrics(predictions, gold)
            return report.f1 if metric == "f1" else report.recall

        best, table = weaklabel.grid_search(
            candidates, weaklabel.default_grid(), scorer, freq_candidates=freq_candidates
        )
        grid_path = out / "weaklabel_grid.json"
        grid_path.write_text(
            json.dumps(
                {
                    "metric": metric,
                    "best": {"p": best.p, "l": best.l},
                    "cells": [{"p": p.p, "l": p.l, "score": s} for p, s in table],
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        outputs.append(grid_path)
        counts["grid_cells"] = len(table)

    dataset = weaklabel.weak_label(candidates, config.rules, freq_candidates=freq_candidates)
    weak_path = out / "weak.jsonl"
    rows = []
    for cand in candidates:
        ev = dataset.evaluations[cand.key()]
        row = cand.to_dict()
        row["lambda1"] = ev.lambda1
        row["lambda2"] = ev.lambda2
        row["y_weak"] = ev.y_weak
        rows.append(row)
    pl.write_jsonl(weak_path, rows)
    outputs.insert(0, weak_path)
    counts.update(dataset.counts())
    inputs = [cand_path] + ([Path(args.gold)] if args.grid else [])
    _write_manifest(out, "weaklabel", config, inputs, outputs, counts)
    log.info("weak labels: %s", dataset.counts())
    return 0


def _weak_pairs_from_file(path: Path) -> list[tuple[MentionCandidate, int]]:
    pairs = []
    for row in pl.read_jsonl(path):
        if row.get("y_weak") is None:
            continue
        pairs.append((MentionCandidate.from_dict(row), int(row["y_weak"])))
    return pairs


def cmd_train(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    pipe = pl.Pipeline(config)
    if args.kind == "weak":
        weak_path = Path(args.weak) if args.weak else out / "weak.jsonl"
        if not weak_path.is_file():
            raise DataFormatError(f"weak dataset not found: {weak_path} (run `rarephen weaklabel` first)")
        pairs = _weak_pairs_from_file(weak_path)
        if args.cap:
            pairs = pairs[: args.cap]
        if not pairs:
            raise DataFormatError(f"no labelled pairs in {weak_path}")
        X = pipe.mention_vectors([c for c, _ in pairs], threads=args.threads)
        y = np.array([label for _, label in pairs], dtype=float)
        provenance = {
            "training_kind": "weak",
            "params_hash": config.params_hash(),
            "provider_id": pipe.provider.provider_id,
            "options": config.encoding.to_dict(),
        }
        mdl = model_mod.train(X, y, config.train, provenance=provenance)
        inputs = [weak_path]
        counts = {"training_pairs": len(pairs)}
    else:
        if not args.gold:
            raise _UsageError("--kind strong needs --gold")
        cand_path = _candidates_path(args, out)
        candidates = {c.key(): c for c in _read_candidates(cand_path)}
        gold = evaluation.read_gold_csv(args.gold)
        pairs = []
        for row in gold:
            cand = candidates.get(row.key)
            if cand is None:
                log.warning("gold key %s has no extracted candidate; skipped for training", row.key)
                continue
            pairs.append((cand, int(row.label_umls)))
        if args.cap:
            pairs = pairs[: args.cap]
        if not pairs:
            raise DataFormatError("no gold rows matched extracted candidates")
        mdl = pipe.train_strong_model(pairs, threads=args.threads)
        inputs = [cand_path, Path(args.gold)]
        counts = {"training_pairs": len(pairs)}

    model_path = out / "model.json"
    model_mod.save(mdl, model_path)
    _write_manifest(out, "train", config, inputs, [model_path], counts)
    log.info("trained %s model on %d pairs -> %s", args.kind, counts["training_pairs"], model_path)
    return 0


def cmd_infer(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    mdl = model_mod.load(args.model)
    pipe = pl.Pipeline(config)
    docs = pl.load_corpus(config.corpus)
    if args.candidates:
        candidates = _read_candidates(args.candidates)
        scored = pipe.score_candidates(candidates, mdl, threads=args.threads)
        admission_of = {d.doc_id: d.admission_id for d in docs}
        by_doc: dict[str, pl.DocInference] = {
            d.doc_id: pl.DocInference(d.doc_id, d.admission_id, frozenset(), []) for d in docs
        }
        for s in scored:
            if not s.accepted:
                continue
            inf = by_doc.setdefault(
                s.candidate.doc_id,
                pl.DocInference(s.candidate.doc_id, admission_of.get(s.candidate.doc_id), frozenset(), []),
            )
            inf.evidence.append(s.to_evidence())
            inf.ordo_ids = inf.ordo_ids | frozenset(s.ordo_ids)
        admissions = pl.aggregate_admissions(by_doc.values())
        inputs = [Path(args.model), Path(args.candidates)]
    else:
        scored, admissions = pipe.infer_corpus(docs, mdl, threads=args.threads)
        inputs = [Path(args.model), Path(config.corpus)]

    pred_path = out / "mention_predictions.jsonl"
    pl.write_jsonl(pred_path, (s.to_dict() for s in scored))
    adm_path = out / "admissions.jsonl"
    pl.write_jsonl(adm_path, (a.to_dict() for a in admissions))
    counts = {
        "scored": len(scored),
        "accepted": sum(1 for s in scored if s.accepted),
        "admissions": len(admissions),
        "admissions_with_ordo": sum(1 for a in admissions if a.ordo_ids),
    }
    _write_manifest(out, "infer", config, inputs, [pred_path, adm_path], counts)
    log.info("inference: %s", counts)
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    pred_path = Path(args.predictions) if args.predictions else out / "mention_predictions.jsonl"
    if not pred_path.is_file():
        raise DataFormatError(f"predictions not found: {pred_path} (run `rarephen infer` first)")
    rows = pl.read_jsonl(pred_path)
    predictions: dict[evaluation.MentionKey, bool] = {}
    ordo_by_key: dict[evaluation.MentionKey, set[str]] = {}
    for row in rows:
        cand = MentionCandidate.from_dict(row)
        predictions[cand.key()] = bool(row.get("accepted"))
        ordo_by_key[cand.key()] = set(row.get("ordo_ids", []))
    gold = evaluation.read_gold_csv(args.gold)

    report: dict = {"umls": evaluation.mention_metrics(predictions, gold).to_dict()}

    ordo_gold = [g for g in gold if g.ordo_id and g.label_ordo is not None]
    if ordo_gold:
        ordo_predictions = {
            g.key: predictions.get(g.key, False) and g.ordo_id in ordo_by_key.get(g.key, set())
            for g in ordo_gold
        }
        ordo_as_mention_gold = [
            evaluation.GoldMentionLabel(key=g.key, label_umls=bool(g.label_ordo)) for g in ordo_gold
        ]
        report["ordo"] = evaluation.mention_metrics(ordo_predictions, ordo_as_mention_gold).to_dict()

    inputs = [pred_path, Path(args.gold)]
    if args.split == "seen-unseen":
        if not args.weak:
            raise _UsageError("--split seen-unseen needs --weak (the rule records)")
        weak_rows = pl.read_jsonl(args.weak)
        evals = {
            MentionCandidate.from_dict(row).key(): weaklabel.RuleEvaluation(
                bool(row["lambda1"]), bool(row["lambda2"])
            )
            for row in weak_rows
        }
        gold_by_key = {g.key: g for g in gold}
        splits = evaluation.seen_unseen_split([g.key for g in gold if g.key in evals], evals)
        unsplit = [g.key for g in gold if g.key not in evals]
        if unsplit:
            log.warning("%d gold keys have no rule record and are left out of the split", len(unsplit))
        report["splits"] = {}
        for name, keys in splits.items():
            subset = [gold_by_key[k] for k in sorted(keys)]
            report["splits"][name] = evaluation.mention_metrics(predictions, subset).to_dict()
        inputs.append(Path(args.weak))

    if args.admissions or args.gold_admissions:
        if not (args.admissions and args.gold_admissions):
            raise _UsageError("admission metrics need both --admissions and --gold-admissions")
        adm_rows = pl.read_jsonl(args.admissions)
        predicted = {row["admission_id"]: set(row.get("ordo", [])) for row in adm_rows}
        gold_adm = _read_admission_gold(args.gold_admissions)
        universe = set().union(*predicted.values(), *gold_adm.values()) if (predicted or gold_adm) else set()
        report["admission"] = evaluation.micro_admission_metrics(predicted, gold_adm, universe).to_dict()
        inputs += [Path(args.admissions), Path(args.gold_admissions)]

    report_path = out / "evaluation.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(out, "evaluate", config, inputs, [report_path], {"gold_rows": len(gold)})
    print(json.dumps({k: v for k, v in report["umls"].items() if k in ("precision", "recall", "f1")}))
    return 0


def _read_admission_gold(path: str) -> dict[str, set[str]]:
    import csv

    table: dict[str, set[str]] = {}
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or not {"admission_id", "ordo_id"} <= set(reader.fieldnames):
                raise DataFormatError(f"{path}: expected columns admission_id,ordo_id")
            for row in reader:
                table.setdefault(row["admission_id"], set()).add(row["ordo_id"])
    except OSError as exc:
        raise DataFormatError(f"cannot read admission gold {path}: {exc}") from exc
    return table


def cmd_compare_icd(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    pipe_store = pl.Pipeline(config).store
    adm_rows = pl.read_jsonl(args.admissions)
    nlp = {row["admission_id"]: frozenset(row.get("ordo", [])) for row in adm_rows}
    codes = pl.read_admission_icd_csv(args.icd)
    icd = pl.icd_admission_baseline(codes, pipe_store)
    per_ordo = pl.compare_icd_nlp(nlp, icd)
    union = pl.merge_admission_ordo(nlp, icd)

    compare_path = out / "compare_icd.json"
    totals = {
        "nlp_only": sum(v["nlp_only"] for v in per_ordo.values()),
        "icd_only": sum(v["icd_only"] for v in per_ordo.values()),
        "both": sum(v["both"] for v in per_ordo.values()),
    }
    compare_path.write_text(
        json.dumps({"per_ordo": per_ordo, "totals": totals}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    union_path = out / "union_admissions.jsonl"
    pl.write_jsonl(
        union_path,
        ({"admission_id": adm, "ordo": sorted(union[adm])} for adm in sorted(union)),
    )
    _write_manifest(
        out,
        "compare-icd",
        config,
        [Path(args.admissions), Path(args.icd)],
        [compare_path, union_path],
        {"ordo_concepts": len(per_ordo), **totals},
    )
    log.info("ICD vs NLP totals: %s", totals)
    return 0


if __name__ == "__main__":
    sys.exit(main())
