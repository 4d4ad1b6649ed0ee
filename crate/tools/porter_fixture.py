"""Regenerate crates/core/tests/fixtures/porter_vocab.txt.

Stems a vocabulary with NLTK's PorterStemmer in ORIGINAL_ALGORITHM mode (the
1980 rules with none of the later departures) so the Rust stemmer can be
checked against an independent implementation.

    pip install nltk
    python3 tools/porter_fixture.py
"""
import pathlib
import re

from nltk.stem.porter import PorterStemmer

ROOT = pathlib.Path(__file__).resolve().parent.parent

# Worked examples from the rule tables of the original algorithm description.
RULE_WORDS = """
caresses ponies ties caress cats feed agreed plastered bled motoring sing
conflated troubled sized hopping tanned falling hissing fizzed failing filing
happy sky relational conditional rational valenci hesitanci digitizer
conformabli radicalli differentli vileli analogousli vietnamization
predication operator feudalism decisiveness hopefulness callousness formaliti
sensitiviti sensibiliti triplicate formative formalize electriciti electrical
hopeful goodness revival allowance inference airliner gyroscopic adjustable
defensible irritant replacement adjustment dependent adoption homologou
communism activate angulariti homologous effective bowdlerize probate rate
cease controll roll generalizations oscillators generalization oscillator
tree trouble troubles trees by bye y ys yy ayy
a is as at be do go he hi me no so to up us we
""".split()


def corpus_words():
    words = set(RULE_WORDS)
    for path in [ROOT / "paper.md", ROOT / "spec.md", *sorted((ROOT / "examples").rglob("*.rs"))]:
        text = path.read_text(encoding="utf-8", errors="ignore").lower()
        words.update(w for w in re.findall(r"[a-z]+", text) if len(w) <= 20)
    return sorted(words)


def main():
    stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)
    out = ROOT / "crates/core/tests/fixtures/porter_vocab.txt"
    lines = [f"{w} {stemmer.stem(w)}" for w in corpus_words()]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{len(lines)} words -> {out}")


if __name__ == "__main__":
    main()
