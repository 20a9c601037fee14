"""Keyword matching over N-best lists and CTC confidence scoring of hits.

Matching runs in three stages: exact character, exact syllable, and fuzzy
(phonetic edit distance over sliding windows of the character hypotheses).
Every candidate is then scored by the CTC forward algorithm over the frame
window its matched tokens align to, length-normalized in the log domain, and
overlapping hits for the same keyword are merged keeping the higher score.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentInfeasible, OutOfVocabulary
from .pgram import Posteriorgram, ctc_min_frames
from .phonetics import CostTable, Syllable, parse_syllable, phrase_distance
from .units import Lexicon, UnitSet


class Stage(enum.Enum):
    CHAR = "char"
    SYLLABLE = "syllable"
    FUZZY = "fuzzy"


@dataclass(frozen=True)
class Keyword:
    id: str
    text: str
    char_units: tuple[int, ...]
    syll_units: tuple[int, ...]

    def __post_init__(self):
        if not self.char_units:
            raise ValueError("keyword with no character units")


@dataclass
class Hit:
    utt_id: str
    kw_id: str
    stage: Stage
    start_frame: int
    end_frame: int
    start_s: float
    end_s: float
    raw_log_s: float
    norm_score: float
    hyp_rank: int
    decision: bool = False


@dataclass(frozen=True)
class KwsConfig:
    fuzzy_threshold: float = 0.5
    decision_threshold: float = -5.0  # natural log per unit
    # extra frames either side of the matched span; nonzero pads pull
    # neighboring speech into the exact-collapse forward sum, so default 0
    window_pad: int = 0
    stages_enabled: frozenset = frozenset({Stage.CHAR, Stage.SYLLABLE, Stage.FUZZY})
    nbest_matching: bool = True       # False: search only the top hypothesis
    length_norm: bool = True


def match_exact(nbest, kw_units: tuple[int, ...], max_rank: int | None = None):
    """All contiguous occurrences of kw_units in every hypothesis."""
    out = []
    kw = tuple(kw_units)
    k = len(kw)
    for rank, entry in enumerate(nbest):
        if max_rank is not None and rank >= max_rank:
            break
        toks = tuple(entry.tokens)
        for i in range(len(toks) - k + 1):
            if toks[i:i + k] == kw:
                out.append((rank, i, i + k))
    return out


def match_fuzzy(nbest, kw: Keyword, char_set: UnitSet, lexicon: Lexicon,
                costs: CostTable, threshold: float,
                max_rank: int | None = None):
    """Sliding windows of width |kw| whose syllabification is phonetically
    close to the keyword; exact character matches are excluded."""
    kw_sylls = _keyword_syllables(kw, lexicon)
    k = len(kw.char_units)
    out = []
    for rank, entry in enumerate(nbest):
        if max_rank is not None and rank >= max_rank:
            break
        toks = tuple(entry.tokens)
        for i in range(len(toks) - k + 1):
            window = toks[i:i + k]
            if window == tuple(kw.char_units):
                continue
            try:
                win_sylls = [parse_syllable(lexicon.primary(char_set.units[u]))
                             for u in window]
            except OutOfVocabulary:
                continue
            d = phrase_distance(win_sylls, kw_sylls, costs)
            if d < threshold:
                out.append((rank, i, i + k, d))
    return out


def _keyword_syllables(kw: Keyword, lexicon: Lexicon) -> list[Syllable]:
    return [parse_syllable(lexicon.primary(ch)) for ch in kw.text if not ch.isspace()]


def score_ctc(pg: Posteriorgram, units, window: tuple[int, int],
              blank: int = 0) -> float:
    """Natural log of the total mass of window paths collapsing to units.

    Standard CTC forward recursion over the blank-interleaved state sequence;
    both final states are summed.
    """
    ws, we = window
    units = list(units)
    if not 0 <= ws < we <= pg.num_frames:
        raise AlignmentInfeasible(f"bad window [{ws}, {we})")
    n = we - ws
    if n < ctc_min_frames(units):
        raise AlignmentInfeasible(f"window of {n} frames too short for {len(units)} units")
    lp = pg.logp[ws:we].astype(np.float64)
    states = [blank]
    for u in units:
        states.extend((u, blank))
    S = len(states)
    alpha = np.full(S, -np.inf)
    alpha[0] = lp[0, states[0]]
    if S > 1:
        alpha[1] = lp[0, states[1]]
    for t in range(1, n):
        prev = alpha
        alpha = np.full(S, -np.inf)
        for s in range(S):
            acc = prev[s]
            if s >= 1:
                acc = np.logaddexp(acc, prev[s - 1])
            if s >= 2 and states[s] != blank and states[s] != states[s - 2]:
                acc = np.logaddexp(acc, prev[s - 2])
            alpha[s] = acc + lp[t, states[s]]
    total = alpha[-1] if S == 1 else np.logaddexp(alpha[-1], alpha[-2])
    return float(total)


def locate_window(spans, tok_start: int, tok_end: int, pad: int,
                  num_frames: int) -> tuple[int, int]:
    """Frame window covering matched tokens tok_start..tok_end-1, padded."""
    ws = max(0, spans[tok_start].start_frame - pad)
    we = min(num_frames, spans[tok_end - 1].end_frame + pad)
    return ws, we


def normalize(raw_log_s: float, length: int) -> float:
    if length < 1:
        raise ValueError("length must be >= 1")
    return raw_log_s / length


def merge_stages(hits: list[Hit]) -> list[Hit]:
    """Within each (utt, kw), merge overlapping hits keeping the higher score."""
    by_key: dict[tuple[str, str], list[Hit]] = {}
    for h in hits:
        by_key.setdefault((h.utt_id, h.kw_id), []).append(h)
    out = []
    for key in sorted(by_key):
        group = sorted(by_key[key], key=lambda h: (-h.norm_score, h.start_frame,
                                                   h.end_frame, h.stage.value))
        kept: list[Hit] = []
        for h in group:
            if any(h.start_frame < k.end_frame and k.start_frame < h.end_frame
                   for k in kept):
                continue
            kept.append(h)
        out.extend(sorted(kept, key=lambda h: h.start_frame))
    return out


def detect(pg_char: Posteriorgram, pg_syll: Posteriorgram | None,
           nbest_char, nbest_syll,
           keywords: list[Keyword], char_set: UnitSet, syll_set: UnitSet | None,
           lexicon: Lexicon, costs: CostTable, cfg: KwsConfig) -> list[Hit]:
    """Full matching + scoring pipeline for one utterance."""
    hits: list[Hit] = []
    max_rank = None if cfg.nbest_matching else 1
    for kw in keywords:
        cands = []  # (stage, nbest, pg, units, rank, ti, tj)
        if Stage.CHAR in cfg.stages_enabled:
            for rank, i, j in match_exact(nbest_char, kw.char_units, max_rank):
                cands.append((Stage.CHAR, nbest_char, pg_char, kw.char_units, rank, i, j))
        if (Stage.SYLLABLE in cfg.stages_enabled and nbest_syll is not None
                and pg_syll is not None and kw.syll_units):
            for rank, i, j in match_exact(nbest_syll, kw.syll_units, max_rank):
                cands.append((Stage.SYLLABLE, nbest_syll, pg_syll, kw.syll_units, rank, i, j))
        if Stage.FUZZY in cfg.stages_enabled:
            for rank, i, j, _d in match_fuzzy(nbest_char, kw, char_set, lexicon,
                                              costs, cfg.fuzzy_threshold, max_rank):
                # scored with the true keyword's units, not the decoded variant
                cands.append((Stage.FUZZY, nbest_char, pg_char, kw.char_units, rank, i, j))
        for stage, nbest, pg, units, rank, ti, tj in cands:
            spans = nbest[rank].spans
            if not spans:
                continue
            ws, we = locate_window(spans, ti, tj, cfg.window_pad, pg.num_frames)
            if stage is Stage.FUZZY:
                # the window fits the decoded variant; the true keyword may
                # need more frames (repeated units require separating blanks)
                try:
                    raw = score_ctc(pg, units, (ws, we))
                except AlignmentInfeasible:
                    continue
            else:
                raw = score_ctc(pg, units, (ws, we))
            score = normalize(raw, len(units)) if cfg.length_norm else raw
            hits.append(Hit(utt_id=pg.utt_id, kw_id=kw.id, stage=stage,
                            start_frame=ws, end_frame=we,
                            start_s=ws * pg.frame_period_s,
                            end_s=we * pg.frame_period_s,
                            raw_log_s=raw, norm_score=score, hyp_rank=rank))
    merged = merge_stages(hits)
    for h in merged:
        h.decision = h.norm_score >= cfg.decision_threshold
    return merged


def write_hits(hits: list[Hit], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for h in hits:
            fh.write(f"{h.utt_id}\t{h.kw_id}\t{h.start_s:.6f}\t{h.end_s:.6f}\t"
                     f"{h.norm_score:.6f}\t{int(h.decision)}\t{h.stage.value}\n")


def read_hits(path) -> list[Hit]:
    hits = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            utt, kw, start_s, end_s, score, dec, stage = line.split("\t")
            hits.append(Hit(utt_id=utt, kw_id=kw, stage=Stage(stage),
                            start_frame=0, end_frame=0,
                            start_s=float(start_s), end_s=float(end_s),
                            raw_log_s=float(score), norm_score=float(score),
                            hyp_rank=0, decision=bool(int(dec))))
    return hits
