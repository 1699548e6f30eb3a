"""Independent sentence-level smoothed BLEU-4 used to freeze golden values.

Tokenization: lowercase, whitespace split, every ASCII punctuation character is
its own token. Unigram precision is unsmoothed; n >= 2 precisions get add-one
on both the clipped match count and the candidate n-gram count. Brevity
penalty exp(1 - r/c) when c < r. Scores are scaled to [0, 100].

Usage: python3 bleu_oracle.py OUT.json
"""
import json
import math
import random
import string
import sys
from collections import Counter


def tokens(text):
    out = []
    for chunk in text.lower().split():
        word = ""
        for ch in chunk:
            if ch in string.punctuation:
                if word:
                    out.append(word)
                    word = ""
                out.append(ch)
            else:
                word += ch
        if word:
            out.append(word)
    return out


def ngrams(seq, n):
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def bleu(candidate, reference):
    cand, ref = tokens(candidate), tokens(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        c_counts, r_counts = ngrams(cand, n), ngrams(ref, n)
        hits = sum(min(cnt, r_counts[g]) for g, cnt in c_counts.items())
        total = sum(c_counts.values())
        if n > 1:
            hits, total = hits + 1, total + 1
        if hits == 0:
            return 0.0
        log_sum += math.log(hits / total)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return 100.0 * bp * math.exp(log_sum / 4.0)


WORDS = ("return the a an of list value values file files name names open new add "
         "filter to from create shared variable given path string number count "
         "each all in for with by").split()
PUNCT = list(".,()':-")


def random_sentence(rng, lo, hi):
    out = []
    for _ in range(rng.randint(lo, hi)):
        out.append(rng.choice(WORDS) if rng.random() > 0.15 else rng.choice(PUNCT))
    if out and rng.random() < 0.5:
        out[0] = out[0].capitalize()
    return " ".join(out)


def mutate(rng, sentence):
    toks = sentence.split()
    out = []
    for tok in toks:
        r = rng.random()
        if r < 0.15:
            continue
        if r < 0.3:
            out.append(rng.choice(WORDS))
        else:
            out.append(tok)
        if rng.random() < 0.08:
            out.append(rng.choice(WORDS))
    return " ".join(out)


def main():
    rng = random.Random(20240917)
    pairs = []
    for i in range(50):
        ref = random_sentence(rng, 1, 14)
        cand = mutate(rng, ref) if i % 5 else random_sentence(rng, 1, 10)
        pairs.append({"candidate": cand, "reference": ref, "bleu": bleu(cand, ref)})
    named = {"candidate": "add a new filter", "reference": "add a new filter to the filter list"}
    named["bleu"] = bleu(named["candidate"], named["reference"])
    doc = {"named": [named], "random": pairs}
    with open(sys.argv[1], "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    nonzero = sum(1 for p in pairs if p["bleu"] > 0)
    print(f"named={named['bleu']!r} nonzero={nonzero}/50")


if __name__ == "__main__":
    main()
