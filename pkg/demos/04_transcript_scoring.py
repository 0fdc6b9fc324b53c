"""
Scoring transcripts and extracted entities
==========================================

Downstream of the signal work sits a speech system whose outputs arrive
as plain TSV files: reference/hypothesis transcript pairs plus the
entities each sentence should and does yield.  This script scores the
bundled 12-sentence fixture and prints the corpus report: word error
rate from a Levenshtein alignment, sentence error rate (a sentence is
wrong unless every reference entity was recovered), and single-entity
error rate (each missed entity counts individually).
"""

from pathlib import Path

from stag.ingest import read_entities, read_transcripts
from stag.metrics import corpus_report, format_report

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

pairs = read_transcripts(DATA / "vui_transcripts.tsv")
refs = read_entities(DATA / "vui_ref_entities.tsv")
hyps = read_entities(DATA / "vui_hyp_entities.tsv")

report = corpus_report(pairs, refs, hyps)
print(format_report(report), end="")

# per-sentence drill-down: which rows kept all their entities
print()
print(f"{'sentence':<8} {'entities':>8} {'missed':>7}  verdict")
for sentence in report.sentences:
    verdict = "ok" if sentence.entity_correct else "entity lost"
    print(f"{sentence.sentence_id:<8} {sentence.n_entities:>8} "
          f"{sentence.n_entity_misses:>7}  {verdict}")
