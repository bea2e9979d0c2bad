"""Generate a runnable demo workspace: synthetic corpus, ontology tables,
synonyms, admission ICD codes, gold labels, and a run config.

Usage:  python3 scripts/make_demo_workspace.py [out_dir] [seed]

The resulting directory works directly with the CLI, e.g.:

    rarephen extract  --config demo_ws/config.json --out-dir demo_ws/out
    rarephen weaklabel --config demo_ws/config.json --out-dir demo_ws/out
"""

from __future__ import annotations

import sys
from pathlib import Path

from rarephen import pipeline as pl, synthetic


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_ws")
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 7
    ws = synthetic.build_workspace(seed=seed)
    paths = synthetic.write_workspace(ws, out_dir)

    # derive the gold mention file from an extraction pass over the corpus
    config = pl.PipelineConfig.from_json(paths["config"])
    pipe = pl.Pipeline(config)
    docs = pl.load_corpus(config.corpus)
    candidates = pipe.extract_corpus(docs).candidates
    gold_rows = synthetic.gold_rows_for_candidates(ws, candidates)
    gold_path = out_dir / "gold_mentions.csv"
    synthetic.write_gold_csv(gold_rows, gold_path)

    print(f"workspace under {out_dir}/")
    print(f"  documents:  {len(docs)}")
    print(f"  candidates: {len(candidates)} ({sum(r['label_umls'] for r in gold_rows)} true)")
    print(f"  gold file:  {gold_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
