#!/usr/bin/env python3
"""Write a toy-language corpus (units, lexicon, keywords, transcripts, LM
text, config) into a directory, ready for the kwspot CLI pipeline."""

import argparse
from pathlib import Path

from kwspot.corpus import make_corpus, make_language
from kwspot.units import write_lexicon, write_unit_set


def write_demo(out_dir: Path, num_utts=200, num_keywords=50, noise=0.0,
               seed=0) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    lang = make_language()
    corpus = make_corpus(lang, num_utts=num_utts, num_keywords=num_keywords,
                         seed=seed)
    write_unit_set(lang.char_set, out_dir / "char_units.txt")
    write_unit_set(lang.syll_set, out_dir / "syll_units.txt")
    write_lexicon(lang.lexicon, out_dir / "lexicon.tsv")
    (out_dir / "keywords.tsv").write_text(
        "".join(f"{kid}\t{text}\n" for kid, text in corpus.keywords),
        encoding="utf-8")
    (out_dir / "transcripts.tsv").write_text(
        "".join(f"{utt}\t{text}\n" for utt, text in corpus.transcripts),
        encoding="utf-8")
    (out_dir / "lm_corpus.txt").write_text(
        "".join(line + "\n" for line in corpus.lm_lines), encoding="utf-8")
    (out_dir / "rare_keywords.txt").write_text(
        "".join(kid + "\n" for kid in corpus.rare_kw_ids), encoding="utf-8")
    (out_dir / "config.ini").write_text(f"""\
[paths]
char_units = {out_dir / 'char_units.txt'}
syll_units = {out_dir / 'syll_units.txt'}
lexicon = {out_dir / 'lexicon.tsv'}
char_lm = {out_dir / 'char.arpa'}
syll_lm = {out_dir / 'syll.arpa'}
keywords = {out_dir / 'keywords.tsv'}

[synth]
frames_per_token = 4
blank_gap = 1
noise = {noise}

[run]
seed = {seed}
""", encoding="utf-8")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--num-utts", type=int, default=200)
    ap.add_argument("--num-keywords", type=int, default=50)
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    write_demo(args.out_dir, args.num_utts, args.num_keywords, args.noise,
               args.seed)
    print(f"demo corpus written to {args.out_dir}")


if __name__ == "__main__":
    main()
