import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwspot.errors import BadFormat, EmptyCorpus
from kwspot.lm import BOS, EOS, UNK, NGramLM, read_arpa, train, write_arpa


def all_contexts(lm):
    ctxs = {()}
    for gram in lm.probs:
        if len(gram) < lm.order:
            ctxs.add(gram)
    return ctxs


def context_mass(lm, ctx):
    total = 0.0
    for w in sorted(lm.vocab):
        s, _ = lm.score_token(ctx, w)
        total += 10.0 ** s
    return total


class TestTrain:
    def test_bigram_mle(self):
        lm = train(["a b", "a c"], order=2, discount=0.0)
        s, _ = lm.score_token(("a",), "b")
        assert 10 ** s == pytest.approx(0.5)
        s, _ = lm.score_token((BOS,), "a")
        assert 10 ** s == pytest.approx(1.0)

    def test_unigram_sentence_wrapping(self):
        # corpus ["a"]: unigram tokens are {a, </s>}, each count 1
        lm = train(["a"], order=1, discount=0.0)
        s, _ = lm.score_token((), "a")
        assert 10 ** s == pytest.approx(0.5)
        s, _ = lm.score_token((), EOS)
        assert 10 ** s == pytest.approx(0.5)

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            train([], order=2)
        with pytest.raises(EmptyCorpus):
            train(["   ", ""], order=2)

    def test_mass_sums_to_one_discounted(self):
        lm = train(["abc", "abd", "ca"], order=3, discount=0.75)
        for ctx in [(), ("a",), ("b",), ("a", "b"), (BOS,), ("zzz",)]:
            assert context_mass(lm, ctx) == pytest.approx(1.0, abs=1e-6)


class TestScore:
    def test_sequence_additivity(self):
        lm = train(["a b", "a c"], order=2, discount=0.0)
        expected = (lm.score_token((), "a")[0] + lm.score_token(("a",), "b")[0])
        assert lm.score_sequence(["a", "b"]) == pytest.approx(expected)

    def test_empty_sequence(self):
        lm = train(["a b"], order=2)
        assert lm.score_sequence([]) == 0.0

    def test_oov_goes_to_unk(self):
        lm = train(["a b"], order=2, discount=0.5)
        s, state = lm.score_token((), "zzz")
        assert math.isfinite(s)
        assert state == (UNK,)
        n = 3
        total = lm.score_sequence(["x1", "x2", "x3"])
        per_unk = lm.score_token((), UNK)[0]
        follow = lm.score_token((UNK,), UNK)[0]
        assert total == pytest.approx(per_unk + (n - 1) * follow)

    def test_with_boundaries(self):
        lm = train(["a b", "a c"], order=2, discount=0.0)
        got = lm.score_sequence(["a", "b"], with_boundaries=True)
        expected = (lm.score_token((BOS,), "a")[0]
                    + lm.score_token(("a",), "b")[0]
                    + lm.score_token(("b",), EOS)[0])
        assert got == pytest.approx(expected)


corpora = st.lists(
    st.text(alphabet="abcd", min_size=1, max_size=8), min_size=1, max_size=12
).filter(lambda ls: any(s.strip() for s in ls))


@settings(max_examples=40, deadline=None)
@given(corpora, st.integers(1, 3), st.sampled_from([0.0, 0.4, 0.75]))
def test_mass_property(lines, order, discount):
    lm = train(lines, order=order, discount=discount)
    for ctx in sorted(all_contexts(lm)):
        if ctx == (EOS,) or (ctx and ctx[-1] == EOS):
            continue  # </s> never occurs as a context
        assert context_mass(lm, ctx) == pytest.approx(1.0, abs=1e-6)


class TestArpa:
    def test_round_trip_scores(self, tmp_path):
        lm = train(["abc", "abd", "cab", "ddd"], order=3, discount=0.75)
        path = tmp_path / "toy.arpa"
        write_arpa(lm, path)
        back = read_arpa(path)
        seqs = [["a"], ["a", "b", "c"], ["d", "d", "d", "a"], ["z"], []]
        for seq in seqs:
            assert back.score_sequence(seq) == pytest.approx(
                lm.score_sequence(seq), abs=1e-9)

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.arpa"
        path.write_text("\\data\\\nngram 1=3\n\n\\1-grams:\n-0.5\ta\n\n\\end\\\n",
                        encoding="utf-8")
        with pytest.raises(BadFormat):
            read_arpa(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.arpa"
        path.write_text("not an arpa file\n", encoding="utf-8")
        with pytest.raises(BadFormat):
            read_arpa(path)

    def test_hand_written_unigram(self, tmp_path):
        path = tmp_path / "mini.arpa"
        path.write_text(
            "\\data\\\nngram 1=3\n\n\\1-grams:\n"
            "-0.3010299956639812\ta\n-0.6989700043360187\tb\n-99\t<unk>\n"
            "\n\\end\\\n", encoding="utf-8")
        lm = read_arpa(path)
        assert lm.order == 1
        assert 10 ** lm.score_sequence(["a"]) == pytest.approx(0.5)
        assert 10 ** lm.score_sequence(["b"]) == pytest.approx(0.2)
