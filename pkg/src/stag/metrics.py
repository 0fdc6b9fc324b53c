"""Transcript accuracy metrics.

Word error rate follows the usual alignment definition: with D deletions,
S substitutions, and I insertions against an N-word reference,

    WER = (D + S + I) / N * 100

computed from a minimum-cost Levenshtein alignment (unit costs).  Sentence
error rate is the percentage of sentences whose entities are not all
reproduced; semantic entity error rate is the percentage of reference
entities missing from the hypothesis.  Both can only count a sentence or
entity as right or wrong, so WER remains the finer-grained signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class TranscriptPair:
    """Reference and hypothesis word sequences for one sentence."""

    sentence_id: str
    reference: tuple[str, ...]
    hypothesis: tuple[str, ...]


@dataclass(frozen=True)
class EntityRecord:
    """One typed entity attached to a sentence, normalized text."""

    sentence_id: str
    entity_type: str
    filler: str

    def __post_init__(self) -> None:
        if not self.sentence_id:
            raise ValueError("entity needs a sentence id")
        if not self.entity_type or not self.filler:
            raise ValueError("entity type and filler must be nonempty")

    @property
    def key(self) -> tuple[str, str]:
        return (self.entity_type, self.filler)


@dataclass(frozen=True)
class WerBreakdown:
    """Alignment error counts for one reference/hypothesis pair."""

    deletions: int
    substitutions: int
    insertions: int
    n_ref: int

    def __post_init__(self) -> None:
        if self.n_ref < 1:
            raise ValueError("reference must contain at least one word")
        if min(self.deletions, self.substitutions, self.insertions) < 0:
            raise ValueError("error counts must be >= 0")
        if self.deletions + self.substitutions > self.n_ref:
            raise ValueError("deletions + substitutions cannot exceed n_ref")

    @property
    def total_errors(self) -> int:
        return self.deletions + self.substitutions + self.insertions

    @property
    def wer_pct(self) -> float:
        return self.total_errors / self.n_ref * 100.0


def wer(reference: tuple[str, ...] | list[str],
        hypothesis: tuple[str, ...] | list[str]) -> WerBreakdown:
    """Minimum-edit alignment error counts between two token sequences.

    The distance table is filled bottom-up; the backtrack resolves cost
    ties preferring matches, then substitutions, then insertions, then
    deletions, so the returned split of an optimal distance is
    deterministic.  WER can exceed 100% when the hypothesis carries many
    insertions.  An empty reference raises ``ValueError``.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    if not ref:
        raise ValueError("reference must contain at least one word")
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        ri = ref[i - 1]
        row = dist[i]
        prev = dist[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ri != hyp[j - 1])
            ins = row[j - 1] + 1
            dele = prev[j] + 1
            row[j] = sub if sub <= ins and sub <= dele else min(ins, dele)
    deletions = substitutions = insertions = 0
    i, j = n, m
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] \
                and here == dist[i - 1][j - 1]:
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and here == dist[i - 1][j - 1] + 1:
            substitutions += 1
            i, j = i - 1, j - 1
        elif j > 0 and here == dist[i][j - 1] + 1:
            insertions += 1
            j -= 1
        else:
            deletions += 1
            i -= 1
    return WerBreakdown(deletions=deletions, substitutions=substitutions,
                        insertions=insertions, n_ref=n)


def sentence_correct(ref_entities: list[EntityRecord],
                     hyp_entities: list[EntityRecord]) -> bool:
    """True when every reference (type, filler) appears in the hypothesis.

    Extra hypothesis entities do not hurt.  An empty reference entity list
    raises ``ValueError``; sentences without entities are handled by
    :func:`corpus_report` directly.
    """
    if not ref_entities:
        raise ValueError("reference entity list is empty")
    hyp_keys = {e.key for e in hyp_entities}
    return all(e.key in hyp_keys for e in ref_entities)


@dataclass(frozen=True)
class SentenceResult:
    sentence_id: str
    breakdown: WerBreakdown
    n_entities: int
    n_entity_misses: int
    entity_correct: bool


@dataclass
class CorpusReport:
    """Aggregate WER / SER / SEER over a transcript corpus.

    WER pools error counts over sentences (total errors over total
    reference words); SER and SEER are sentence- and entity-level miss
    percentages.  Sentences with no reference entities count as correct.
    """

    wer_pct: float
    ser_pct: float
    seer_pct: float
    n_sentences: int
    n_incorrect_sentences: int
    n_entities: int
    n_incorrect_entities: int
    n_ref_words: int
    deletions: int
    substitutions: int
    insertions: int
    sentences: list[SentenceResult] = field(default_factory=list)


def corpus_report(transcripts: list[TranscriptPair],
                  ref_entities: list[EntityRecord],
                  hyp_entities: list[EntityRecord]) -> CorpusReport:
    """Score a corpus of transcripts with attached entities.

    Every entity must reference a transcript sentence id; an unknown id
    raises ``ValueError`` naming it.  Entity comparison uses set semantics
    on normalized (type, filler) pairs per sentence.
    """
    if not transcripts:
        raise ValueError("no transcripts to score")
    ids = [t.sentence_id for t in transcripts]
    id_set = set(ids)
    if len(id_set) != len(ids):
        dup = next(s for s in ids if ids.count(s) > 1)
        raise ValueError(f"duplicate sentence id {dup!r}")
    ref_by_id: dict[str, set] = {sid: set() for sid in ids}
    hyp_by_id: dict[str, set] = {sid: set() for sid in ids}
    for ent in ref_entities:
        if ent.sentence_id not in id_set:
            raise ValueError(
                f"entity sentence id {ent.sentence_id!r} has no transcript"
            )
        ref_by_id[ent.sentence_id].add(ent.key)
    for ent in hyp_entities:
        if ent.sentence_id not in id_set:
            raise ValueError(
                f"entity sentence id {ent.sentence_id!r} has no transcript"
            )
        hyp_by_id[ent.sentence_id].add(ent.key)
    sentences = []
    deletions = substitutions = insertions = n_ref_words = 0
    n_entities = n_entity_misses = n_incorrect_sentences = 0
    for pair in transcripts:
        breakdown = wer(pair.reference, pair.hypothesis)
        deletions += breakdown.deletions
        substitutions += breakdown.substitutions
        insertions += breakdown.insertions
        n_ref_words += breakdown.n_ref
        refs = ref_by_id[pair.sentence_id]
        hyps = hyp_by_id[pair.sentence_id]
        misses = len(refs - hyps)
        correct = misses == 0
        n_entities += len(refs)
        n_entity_misses += misses
        n_incorrect_sentences += not correct
        sentences.append(SentenceResult(
            sentence_id=pair.sentence_id, breakdown=breakdown,
            n_entities=len(refs), n_entity_misses=misses,
            entity_correct=correct,
        ))
    n_sentences = len(transcripts)
    return CorpusReport(
        wer_pct=(deletions + substitutions + insertions) / n_ref_words * 100.0,
        ser_pct=n_incorrect_sentences / n_sentences * 100.0,
        seer_pct=(n_entity_misses / n_entities * 100.0) if n_entities else 0.0,
        n_sentences=n_sentences,
        n_incorrect_sentences=n_incorrect_sentences,
        n_entities=n_entities,
        n_incorrect_entities=n_entity_misses,
        n_ref_words=n_ref_words,
        deletions=deletions,
        substitutions=substitutions,
        insertions=insertions,
        sentences=sentences,
    )


def format_report(report: CorpusReport) -> str:
    """Key-value text rendering of the corpus totals."""
    lines = [
        f"wer_pct={report.wer_pct:.2f}",
        f"ser_pct={report.ser_pct:.2f}",
        f"seer_pct={report.seer_pct:.2f}",
        f"n_sentences={report.n_sentences}",
        f"n_incorrect_sentences={report.n_incorrect_sentences}",
        f"n_entities={report.n_entities}",
        f"n_incorrect_entities={report.n_incorrect_entities}",
        f"n_ref_words={report.n_ref_words}",
        f"deletions={report.deletions}",
        f"substitutions={report.substitutions}",
        f"insertions={report.insertions}",
    ]
    return "\n".join(lines) + "\n"


def write_report(report: CorpusReport, kv_path: str | Path,
                 tsv_path: str | Path | None = None) -> None:
    """Write the totals as key-value text plus an optional per-sentence TSV."""
    Path(kv_path).write_text(format_report(report), encoding="utf-8")
    if tsv_path is None:
        return
    rows = ["\t".join(["sentence_id", "wer_pct", "deletions", "substitutions",
                       "insertions", "n_ref", "n_entities", "entity_correct"])]
    for s in report.sentences:
        b = s.breakdown
        rows.append("\t".join([
            s.sentence_id, f"{b.wer_pct:.2f}", str(b.deletions),
            str(b.substitutions), str(b.insertions), str(b.n_ref),
            str(s.n_entities), "yes" if s.entity_correct else "no",
        ]))
    Path(tsv_path).write_text("\n".join(rows) + "\n", encoding="utf-8")
