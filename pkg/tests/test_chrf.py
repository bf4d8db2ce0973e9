import itertools
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kakugo.evaluation.chrf import (
    ChrfParams,
    chrf_pp,
    corpus_chrf_pp,
    pair_stats,
    score_from_stats,
    word_tokens,
)

# Sentence scores frozen from an independent reference implementation of
# chrF++ (char order 6, word order 2, beta 2). Three scripts covered.
PINNED_PAIRS = [
    ("the cat is on the mat", "there is a cat on the mat", 49.418509),
    ("the cat is on the mat", "a cat is on the mat", 86.404645),
    ("The quick brown fox jumps over the lazy dog.", "A quick brown fox jumped over a lazy dog.", 66.438627),
    ("She sells seashells by the seashore today.", "She sold seashells near the seashore yesterday.", 47.637969),
    ("I would like a cup of strong black coffee, please.", "Could I please have a cup of black coffee?", 53.49946),
    ("It rains heavily in the mountains during April.", "Heavy rain falls on the mountains in April.", 48.002905),
    ("Children play football in the park every evening.", "Every evening the children play soccer at the park.", 48.93744),
    ("completely unrelated gibberish wanders here aimlessly", "the committee approved the annual budget report.", 12.23539),
    ("This translation is nearly perfect, honestly!", "This translation is nearly perfect, honestly.", 94.647628),
    ("кошка сидит на ковре в комнате", "кошка сидела на ковре в комнате", 75.357342),
    ("я люблю читать книги по вечерам", "по вечерам я люблю читать книги", 89.078987),
    ("сегодня очень холодная и ветреная погода", "погода сегодня холодная и очень ветреная", 66.026664),
    ("он быстро бежал к железнодорожной станции", "она медленно шла к автобусной остановке", 16.091394),
    ("мы приготовили вкусный ужин для всей семьи", "мы приготовили вкусный ужин для всех друзей", 78.384584),
    ("студенты сдали экзамен по математике успешно", "студенты успешно сдали экзамен по математике", 84.373808),
    ("переводчик работает над новой книгой сейчас", "писатель работает над своей новой книгой", 55.7886),
    ("बिल्ली चटाई पर बैठी है आराम से", "बिल्ली चटाई पर आराम से बैठी हुई है", 65.429872),
    ("मुझे हिंदी में कविता पढ़ना बहुत पसंद है", "मुझे हिंदी की कविताएँ पढ़ना पसंद है", 53.629112),
    ("आज बाजार में बहुत भीड़ थी शाम को", "शाम को बाजार में बहुत भीड़ हो गई थी", 67.066467),
    ("विद्यार्थी परीक्षा की तैयारी कर रहे हैं", "छात्र परीक्षा की तैयारी में लगे हुए हैं", 46.229357),
    ("यह अनुवाद लगभग सही है, वाकई में!", "यह अनुवाद लगभग सही है, वाकई में!", 100.0),
    ("नदी के किनारे हरे पेड़ लहराते हैं", "समुद्र के किनारे ऊँचे पहाड़ दिखते हैं", 32.777464),
]


def brute_force_chrf_pp(hypothesis, reference, char_max=6, word_max=2, beta=2.0):
    """Independent from-first-principles chrF++ for tiny inputs."""

    def ngrams(units, n):
        return Counter(tuple(units[i : i + n]) for i in range(len(units) - n + 1))

    def split_words(text):
        punct = set("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")
        words = []
        for tok in text.split():
            if len(tok) > 1 and tok[-1] in punct:
                words += [tok[:-1], tok[-1]]
            elif len(tok) > 1 and tok[0] in punct:
                words += [tok[0], tok[1:]]
            else:
                words.append(tok)
        return words

    hyp_chars = [c for c in hypothesis if not c.isspace()]
    ref_chars = [c for c in reference if not c.isspace()]
    rows = []
    for n in range(1, char_max + 1):
        rows.append((ngrams(hyp_chars, n), ngrams(ref_chars, n)))
    for n in range(1, word_max + 1):
        rows.append((ngrams(split_words(hypothesis), n), ngrams(split_words(reference), n)))
    f_sum, orders = 0.0, 0
    for hyp_counter, ref_counter in rows:
        hyp_total = sum(hyp_counter.values())
        ref_total = sum(ref_counter.values())
        if hyp_total == 0 and ref_total == 0:
            continue
        orders += 1
        match = sum(min(c, ref_counter[g]) for g, c in hyp_counter.items())
        precision = match / hyp_total if hyp_total else 0.0
        recall = match / ref_total if ref_total else 0.0
        if beta * beta * precision + recall > 0:
            f_sum += (1 + beta * beta) * precision * recall / (beta * beta * precision + recall)
    return 100.0 * f_sum / orders if orders else 0.0


class TestPinnedOracle:
    @pytest.mark.parametrize("hypothesis,reference,expected", PINNED_PAIRS)
    def test_matches_reference_implementation(self, hypothesis, reference, expected):
        assert chrf_pp(hypothesis, [reference]) == pytest.approx(expected, abs=0.1)

    def test_coverage(self):
        assert len(PINNED_PAIRS) >= 20


class TestBruteForceOracle:
    def test_exhaustive_small_alphabet(self):
        rng = random.Random(77)
        alphabet = "ab "
        cases = []
        for length in range(0, 5):
            for hyp in itertools.product(alphabet, repeat=length):
                cases.append("".join(hyp))
        rng.shuffle(cases)
        refs = cases[:40] or [""]
        for hypothesis in cases[:40]:
            reference = rng.choice(refs)
            if not reference.strip() and not hypothesis.strip():
                continue
            assert chrf_pp(hypothesis, [reference]) == pytest.approx(
                brute_force_chrf_pp(hypothesis, reference), abs=1e-9
            ), (hypothesis, reference)

    def test_random_short_strings(self):
        rng = random.Random(5)
        for _ in range(200):
            hyp = "".join(rng.choice("abc x.") for _ in range(rng.randint(1, 12)))
            ref = "".join(rng.choice("abc x.") for _ in range(rng.randint(1, 12)))
            if not hyp.strip() or not ref.strip():
                continue
            assert chrf_pp(hyp, [ref]) == pytest.approx(brute_force_chrf_pp(hyp, ref), abs=1e-9)


class TestEdgeCases:
    @pytest.mark.parametrize(
        "text",
        ["a", "ab", "hello", "two words", "A full sentence, with punctuation!", "кошка на ковре"],
    )
    def test_identity_scores_100(self, text):
        assert chrf_pp(text, [text]) == pytest.approx(100.0)

    def test_empty_hypothesis_scores_0(self):
        assert chrf_pp("", ["some reference text"]) == 0.0

    def test_empty_reference_scores_0(self):
        assert chrf_pp("some hypothesis", [""]) == 0.0

    def test_no_references_rejected(self):
        with pytest.raises(ValueError):
            chrf_pp("x", [])

    def test_disjoint_strings_score_0(self):
        assert chrf_pp("aaaa", ["bbbb"]) == 0.0

    def test_multi_reference_takes_best(self):
        hyp = "the cat is on the mat"
        single_best = max(
            chrf_pp(hyp, ["a cat is on the mat"]), chrf_pp(hyp, ["dogs bark loudly"])
        )
        assert chrf_pp(hyp, ["dogs bark loudly", "a cat is on the mat"]) == single_best


class TestWordTokens:
    def test_punctuation_split_rules(self):
        assert word_tokens("hello, world!") == ["hello", ",", "world", "!"]
        assert word_tokens('"quoted"') == ['"quoted', '"']  # end punctuation wins
        assert word_tokens("(x)") == ["(x", ")"]
        assert word_tokens("!") == ["!"]
        assert word_tokens("!a") == ["!", "a"]


class TestCorpus:
    def test_aggregates_stats_not_scores(self):
        hyps = ["the cat sat", "completely different words here"]
        refs = [["the cat sat"], ["unrelated reference sentence entirely"]]
        params = ChrfParams()
        totals = [(0, 0, 0)] * params.total_orders
        for hyp, ref_list in zip(hyps, refs):
            stats = pair_stats(hyp, ref_list[0], params)
            totals = [
                (a[0] + b[0], a[1] + b[1], a[2] + b[2]) for a, b in zip(totals, stats)
            ]
        expected = score_from_stats(totals, params.beta)
        got = corpus_chrf_pp(hyps, refs)
        assert got == pytest.approx(expected)
        mean_of_sentences = sum(chrf_pp(h, r) for h, r in zip(hyps, refs)) / 2
        assert got != pytest.approx(mean_of_sentences)

    def test_perfect_corpus(self):
        texts = ["one sentence here", "another one there"]
        assert corpus_chrf_pp(texts, [[t] for t in texts]) == pytest.approx(100.0)

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            corpus_chrf_pp(["a"], [])
        with pytest.raises(ValueError):
            corpus_chrf_pp([], [])
        with pytest.raises(ValueError):
            corpus_chrf_pp(["a"], [[]])


class TestProperties:
    @given(st.text(max_size=30), st.text(min_size=1, max_size=30))
    @settings(max_examples=150, deadline=None)
    def test_bounds(self, hypothesis, reference):
        score = chrf_pp(hypothesis, [reference])
        assert 0.0 <= score <= 100.0

    @given(st.text(min_size=1, max_size=30).filter(lambda t: t.strip()))
    @settings(max_examples=150, deadline=None)
    def test_identity_property(self, text):
        assert chrf_pp(text, [text]) == pytest.approx(100.0)

    @given(st.text(max_size=25), st.text(max_size=25))
    @settings(max_examples=150, deadline=None)
    def test_agrees_with_brute_force(self, hypothesis, reference):
        assert chrf_pp(hypothesis, [reference]) == pytest.approx(
            brute_force_chrf_pp(hypothesis, reference), abs=1e-9
        )
