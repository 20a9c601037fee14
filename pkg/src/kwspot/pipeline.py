"""Batch operations tying the modules into a runnable pipeline.

Each step is deterministic given config + inputs: synthesis derives a
per-utterance seed from the run seed, decoding is seed-free, and all outputs
are ordered by utterance id so parallel runs produce identical files.
"""

from __future__ import annotations

import json
import multiprocessing
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import kws as kws_mod
from .decoder import (BeamConfig, BiasConfig, KeywordTrie, NBestEntry,
                      build_bias_trie, prefix_beam_search)
from .errors import OutOfVocabulary
from .kws import Hit, Keyword, KwsConfig, detect
from .lm import NGramLM
from .metrics import EvalConfig, RefOccurrence, align_hits, atwv, f1
from .pgram import (Posteriorgram, SynthConfig, TokenSpan, read_pgram,
                    synth_generate, token_layout, write_pgram)
from .phonetics import CostTable
from .units import Lexicon, UnitSet, syllabify, tokenize_chars


def load_transcripts(path) -> list[tuple[str, str]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            utt, _, text = line.partition("\t")
            out.append((utt, text))
    return out


def load_keyword_list(path) -> list[tuple[str, str]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            kw_id, _, text = line.partition("\t")
            out.append((kw_id, text))
    return out


def build_keywords(entries, char_set: UnitSet, lexicon: Lexicon,
                   syll_set: UnitSet) -> list[Keyword]:
    return [Keyword(id=kid, text=text,
                    char_units=tuple(tokenize_chars(text, char_set)),
                    syll_units=tuple(syllabify(text, lexicon, syll_set)))
            for kid, text in entries]


def utt_seed(base_seed: int, index: int) -> int:
    return (base_seed * 1_000_003 + index) & 0x7FFFFFFF


def synth_corpus(transcripts, keywords, char_set, syll_set, lexicon,
                 synth_cfg: SynthConfig, out_dir, seed: int,
                 frame_period_s: float,
                 char_confusion=None, syll_confusion=None):
    """Generate char+syllable posteriorgrams and the reference TSV.

    Returns (refs, skipped_utts).  Reference spans come from the generator's
    frame layout for each keyword occurrence found in the transcript text.
    """
    out_dir = Path(out_dir)
    (out_dir / "char").mkdir(parents=True, exist_ok=True)
    (out_dir / "syll").mkdir(parents=True, exist_ok=True)
    refs: list[RefOccurrence] = []
    skipped = []
    for idx, (utt_id, text) in enumerate(transcripts):
        try:
            tr_c = tokenize_chars(text, char_set)
            tr_s = syllabify(text, lexicon, syll_set)
        except OutOfVocabulary as exc:
            skipped.append((utt_id, str(exc)))
            continue
        s = utt_seed(seed, idx)
        cfg_c = replace(synth_cfg, seed=s, confusion=char_confusion)
        cfg_s = replace(synth_cfg, seed=s + 1, confusion=syll_confusion)
        pg_c = synth_generate(tr_c, char_set, cfg_c, utt_id=utt_id,
                              frame_period_s=frame_period_s)
        pg_s = synth_generate(tr_s, syll_set, cfg_s, utt_id=utt_id,
                              frame_period_s=frame_period_s)
        write_pgram(pg_c, out_dir / "char" / f"{utt_id}.pgram")
        write_pgram(pg_s, out_dir / "syll" / f"{utt_id}.pgram")
        layout = token_layout(tr_c, synth_cfg)
        compact = text.replace(" ", "")
        for kw_id, kw_text in keywords:
            start = compact.find(kw_text)
            while start != -1:
                end = start + len(kw_text)
                refs.append(RefOccurrence(
                    utt_id, kw_id,
                    layout[start][0] * frame_period_s,
                    layout[end - 1][1] * frame_period_s))
                start = compact.find(kw_text, start + 1)
    refs.sort(key=lambda r: (r.utt_id, r.kw_id, r.start_s))
    return refs, skipped


def _decode_one(args):
    path, us, lm, trie, beam_cfg = args
    pg = read_pgram(path)
    nbest = prefix_beam_search(pg, us, lm=lm, trie=trie, cfg=beam_cfg)
    return pg.utt_id, nbest


def decode_dir(pgram_dir, us: UnitSet, lm: NGramLM | None,
               trie: KeywordTrie | None, beam_cfg: BeamConfig,
               jobs: int = 1) -> dict[str, list[NBestEntry]]:
    paths = sorted(Path(pgram_dir).glob("*.pgram")) + \
        sorted(Path(pgram_dir).glob("*.json"))
    work = [(p, us, lm, trie, beam_cfg) for p in paths]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            results = pool.map(_decode_one, work)
    else:
        results = [_decode_one(w) for w in work]
    return dict(sorted(results))


def write_nbest(nbest_by_utt: dict[str, list[NBestEntry]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id in sorted(nbest_by_utt):
            hyps = []
            for e in nbest_by_utt[utt_id]:
                hyps.append({
                    "text": e.text,
                    "tokens": list(e.tokens),
                    "score_am": e.score_am,
                    "score_lm": e.score_lm,
                    "score_bias": e.score_bias,
                    "score_total": e.score_total,
                    "spans": [[s.start_frame, s.end_frame, s.peak_frame]
                              for s in e.spans],
                })
            fh.write(json.dumps({"utt_id": utt_id, "hyps": hyps},
                                ensure_ascii=False) + "\n")


def read_nbest(path) -> dict[str, list[NBestEntry]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            hyps = []
            for h in obj["hyps"]:
                entry = NBestEntry(tokens=tuple(h["tokens"]), text=h["text"],
                                   score_am=h["score_am"], score_lm=h["score_lm"],
                                   score_bias=h["score_bias"],
                                   score_total=h["score_total"])
                entry.spans = [TokenSpan(token=t, start_frame=s, end_frame=e,
                                         peak_frame=p, peak_logp=0.0)
                               for t, (s, e, p) in zip(h["tokens"], h["spans"])]
                hyps.append(entry)
            out[obj["utt_id"]] = hyps
    return out


def run_kws(pgram_dir, nbest_char, nbest_syll, keywords: list[Keyword],
            char_set: UnitSet, syll_set: UnitSet | None, lexicon: Lexicon,
            costs: CostTable, cfg: KwsConfig) -> list[Hit]:
    hits: list[Hit] = []
    pgram_dir = Path(pgram_dir)
    for utt_id in sorted(nbest_char):
        pg_c = read_pgram(pgram_dir / "char" / f"{utt_id}.pgram")
        pg_s = None
        nb_s = None
        if nbest_syll is not None and utt_id in nbest_syll:
            syll_path = pgram_dir / "syll" / f"{utt_id}.pgram"
            if syll_path.exists():
                pg_s = read_pgram(syll_path)
                nb_s = nbest_syll[utt_id]
        hits.extend(detect(pg_c, pg_s, nbest_char[utt_id], nb_s, keywords,
                           char_set, syll_set, lexicon, costs, cfg))
    return hits


def total_speech_seconds(pgram_dir) -> float:
    total = 0.0
    for p in sorted(Path(pgram_dir).glob("*.pgram")):
        pg = read_pgram(p)
        total += pg.num_frames * pg.frame_period_s
    return total


def evaluate(hits: list[Hit], refs: list[RefOccurrence], cfg: EvalConfig,
             sweep_points: int = 50) -> dict:
    """Global P/R/F1 + ATWV at the recorded decisions, plus a threshold sweep."""
    decided = [h for h in hits if h.decision]
    tp, fp, fn = align_hits(decided, refs, cfg)
    precision, recall, f1_score = f1(len(tp), len(fp), len(fn))
    try:
        atwv_score, per_kw = atwv(tp, fp, fn, refs, cfg)
    except Exception:
        atwv_score, per_kw = 0.0, {}

    scores = sorted(h.norm_score for h in hits)
    if scores:
        lo, hi = scores[0], scores[-1]
    else:
        lo, hi = -1.0, 0.0
    if hi <= lo:
        hi = lo + 1.0
    sweep = []
    for i in range(sweep_points):
        theta = lo + (hi - lo) * i / (sweep_points - 1)
        sel = [h for h in hits if h.norm_score >= theta]
        s_tp, s_fp, s_fn = align_hits(sel, refs, cfg)
        _, _, s_f1 = f1(len(s_tp), len(s_fp), len(s_fn))
        try:
            s_atwv, _ = atwv(s_tp, s_fp, s_fn, refs, cfg)
        except Exception:
            s_atwv = 0.0
        sweep.append({"threshold": theta, "f1": s_f1, "atwv": s_atwv})

    return {
        "precision": precision,
        "recall": recall,
        "f1": f1_score,
        "atwv": atwv_score,
        "tp": len(tp), "fp": len(fp), "fn": len(fn),
        "per_keyword_twv": per_kw,
        "threshold_sweep": sweep,
    }


# ---------------------------------------------------------------------------
# ablation ladder


LADDER = ["greedy", "+lm", "+length_norm", "+nbest", "+bias", "+fuzzy",
          "+syllable"]


def _ladder_settings(row: str):
    """Cumulative toggles for one ladder row."""
    idx = LADDER.index(row)
    return {
        "use_lm": idx >= 1,
        "length_norm": idx >= 2,
        "nbest_matching": idx >= 3,
        "bias": idx >= 4,
        "fuzzy": idx >= 5,
        "syllable": idx >= 6,
        "beam_size": 1 if idx == 0 else None,  # None: configured value
    }


def run_ablation(pgram_dir, refs, keywords: list[Keyword],
                 char_set: UnitSet, syll_set: UnitSet, lexicon: Lexicon,
                 char_lm: NGramLM, syll_lm: NGramLM, costs: CostTable,
                 beam_cfg: BeamConfig, bias_cfg: BiasConfig,
                 kws_cfg: KwsConfig, eval_cfg: EvalConfig,
                 jobs: int = 1,
                 ref_subsets: dict[str, list] | None = None) -> dict:
    """Run every ladder row and report F1/ATWV per row (recall included).

    ``ref_subsets`` maps a label to a subset of ``refs``; each row then also
    carries ``recall_all_<label>``, the threshold-free recall restricted to
    that subset (e.g. references of rarely-seen keywords).
    """
    char_trie = build_bias_trie([list(k.char_units) for k in keywords],
                                char_lm, bias_cfg, unit_names=char_set.units)
    syll_trie = build_bias_trie([list(k.syll_units) for k in keywords],
                                syll_lm, bias_cfg, unit_names=syll_set.units)
    decode_cache: dict[tuple, dict] = {}

    def decode(stage_dir, us, lm, trie, beam):
        key = (stage_dir, us.id, lm is not None, trie is not None,
               beam.beam_size, beam.lm_weight)
        if key not in decode_cache:
            decode_cache[key] = decode_dir(Path(pgram_dir) / stage_dir, us, lm,
                                           trie, beam, jobs=jobs)
        return decode_cache[key]

    rows = []
    for row in LADDER:
        s = _ladder_settings(row)
        beam = replace(beam_cfg,
                       beam_size=s["beam_size"] or beam_cfg.beam_size,
                       lm_weight=beam_cfg.lm_weight if s["use_lm"] else 0.0,
                       bias_enabled=s["bias"])
        nb_c = decode("char", char_set, char_lm if s["use_lm"] else None,
                      char_trie if s["bias"] else None, beam)
        nb_s = None
        if s["syllable"]:
            nb_s = decode("syll", syll_set, syll_lm if s["use_lm"] else None,
                          syll_trie if s["bias"] else None, beam)
        stages = {kws_mod.Stage.CHAR}
        if s["fuzzy"]:
            stages.add(kws_mod.Stage.FUZZY)
        if s["syllable"]:
            stages.add(kws_mod.Stage.SYLLABLE)
        kcfg = replace(kws_cfg, stages_enabled=frozenset(stages),
                       nbest_matching=s["nbest_matching"],
                       length_norm=s["length_norm"])
        hits = run_kws(pgram_dir, nb_c, nb_s, keywords, char_set, syll_set,
                       lexicon, costs, kcfg)
        report = evaluate(hits, refs, eval_cfg, sweep_points=50)
        # recall over all matches, before the decision threshold
        a_tp, _, a_fn = align_hits(hits, refs, eval_cfg)
        _, recall_all, _ = f1(len(a_tp), 0, len(a_fn))
        entry = {"method": row, "f1": report["f1"],
                 "atwv": report["atwv"],
                 "precision": report["precision"],
                 "recall": report["recall"],
                 "recall_all": recall_all}
        for label, subset in (ref_subsets or {}).items():
            s_tp, _, s_fn = align_hits(hits, subset, eval_cfg)
            _, subset_recall, _ = f1(len(s_tp), 0, len(s_fn))
            entry[f"recall_all_{label}"] = subset_recall
        rows.append(entry)
    return {"ladder": rows}
