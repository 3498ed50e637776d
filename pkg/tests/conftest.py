"""Shared fixtures: synthetic corpora with frame-exact ground truth.

The main corpus is a 10-minute, 100-utterance file. Every utterance is
rendered at one character frame per posterior frame (fast, fully dense
speech separated by blank-dominated pauses), so a correct alignment is pure
peak-following and scores exactly ln(peak). Three utterance kinds are mixed
in: plain sentences, a few one-word shorts that trigger the
short-utterance penalty, and a tail block with damped peaks whose
acceptance flips with the corpus peak probability. Texts, layout, and noise
are all seeded, so scores and boundaries are reproducible to the bit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import pytest

from anchoralign import (
    PosteriorMatrix,
    SynthSpec,
    SynthUtterance,
    Utterance,
    Vocab,
    default_spanish_vocab,
    estimate_time_refs,
    synth_posteriors,
)

FRAME_S = 0.02
CORPUS_SEED = 90217
NOISE_SEED = 777
N_UTTS = 100
SHORT_INDICES = (20, 45, 65, 80)
HARD_INDICES = tuple(range(92, 100))
CORRUPT_INDICES = (3, 12, 18, 27, 33, 41, 52, 60, 71, 85)

SPAN_PER_CHAR_S = FRAME_S  # one character frame per posterior frame
HARD_PEAK_SCALE = 0.165

_SYLLABLES = [c + v for c in "bcdlmnprst" for v in "aeiou"]
_GARBAGE = "fghjkqvwxyz"  # disjoint from the syllable alphabet above


def _word(rng: np.random.Generator) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(rng.integers(2, 5)))


def _sentence(rng: np.random.Generator, n_words: int) -> str:
    return " ".join(_word(rng) for _ in range(n_words))


def _dense_sentence(rng: np.random.Generator, min_chars: int = 55, max_chars: int = 65) -> str:
    words = [_word(rng)]
    while len(" ".join(words)) < min_chars:
        words.append(_word(rng))
    text = " ".join(words)
    assert len(text) <= max_chars, f"dense sentence overflow: {len(text)}"
    return text


def garbage_text(rng: np.random.Generator, n_chars: int) -> str:
    """Unrelated replacement text: one word, alphabet-disjoint from the corpus.

    Slightly shorter than the text it replaces and without spaces, so not a
    single character of it can ride a scheduled peak.
    """
    length = max(4, n_chars - int(rng.integers(2, 7)))
    return "".join(rng.choice(list(_GARBAGE)) for _ in range(length))


@dataclass(frozen=True)
class Corpus:
    """A synthesized file plus everything needed to judge an alignment."""

    spec: SynthSpec
    vocab: Vocab
    pm: PosteriorMatrix
    truths: tuple[tuple[int, int, int], ...]
    texts: tuple[str, ...]
    utterances: tuple[Utterance, ...]

    def truth_seconds(self) -> dict[int, tuple[float, float]]:
        dur = self.spec.frame_duration_s
        return {i: (s * dur, (e + 1) * dur) for i, s, e in self.truths}


def corpus_texts() -> list[str]:
    """The fixed utterance texts: index decides the utterance kind."""
    rng = np.random.default_rng(CORPUS_SEED)
    texts = []
    for i in range(N_UTTS):
        if i in SHORT_INDICES:
            texts.append(_word(rng))
        elif i in HARD_INDICES:
            texts.append(_dense_sentence(rng))
        else:
            texts.append(_sentence(rng, int(rng.integers(7, 11))))
    return texts


def build_corpus(peak_prob: float = 0.9) -> Corpus:
    """Synthesize the standard corpus at a given peak probability.

    Only the peak changes between passes; texts, spans, and the noise seed
    stay fixed, so two passes are the same file heard through better and
    worse acoustic models.
    """
    vocab = default_spanish_vocab()
    texts = corpus_texts()
    rng = np.random.default_rng(CORPUS_SEED + 1)  # layout stream
    synth_utts = []
    frame = 50  # 1 s lead-in; spans stay on exact frame boundaries
    for i, text in enumerate(texts):
        span_frames = len(text)
        peak_scale = HARD_PEAK_SCALE if i in HARD_INDICES else 1.0
        synth_utts.append(
            SynthUtterance(
                text=text,
                start_s=frame * FRAME_S,
                end_s=(frame + span_frames) * FRAME_S,
                peak_scale=peak_scale,
            )
        )
        frame += span_frames + int(rng.integers(210, 271))  # 4.2-5.4 s pause
    spec = SynthSpec(
        utterances=tuple(synth_utts),
        frame_duration_s=FRAME_S,
        peak_prob=peak_prob,
        noise_seed=NOISE_SEED,
        gap_peak=0.98,  # sharper blank in silence than on speech frames
        total_s=600.0,
    )
    pm, truths = synth_posteriors(spec, vocab)
    utts = [
        Utterance(utt_index=i, text=text, word_count=len(text.split(" ")))
        for i, text in enumerate(texts)
    ]
    utts = estimate_time_refs(utts, pm.duration_s)
    return Corpus(
        spec=spec,
        vocab=vocab,
        pm=pm,
        truths=tuple(truths),
        texts=tuple(texts),
        utterances=tuple(utts),
    )


def corrupted_utterances(corpus: Corpus) -> tuple[Utterance, ...]:
    """The corpus utterance list with 10% of the texts replaced wholesale."""
    rng = np.random.default_rng(CORPUS_SEED + 2)
    utts = list(corpus.utterances)
    for i in CORRUPT_INDICES:
        text = garbage_text(rng, len(corpus.texts[i]))
        utts[i] = dataclasses.replace(
            utts[i], text=text, word_count=len(text.split(" "))
        )
    return tuple(estimate_time_refs(utts, corpus.pm.duration_s))


def boundary_errors(
    run_utts, truth_s: dict[int, tuple[float, float]]
) -> dict[int, tuple[float, float]]:
    """Per-utterance absolute (start, end) errors in seconds."""
    out = {}
    for aln in run_utts:
        true_start, true_end = truth_s[aln.utt_index]
        out[aln.utt_index] = (abs(aln.start_s - true_start), abs(aln.end_s - true_end))
    return out


@pytest.fixture(scope="session")
def spanish_vocab() -> Vocab:
    return default_spanish_vocab()


@pytest.fixture(scope="session")
def corpus09() -> Corpus:
    return build_corpus(peak_prob=0.9)


def small_file_spec(seed: int, n_utts: int = 8, peak_prob: float = 0.9) -> SynthSpec:
    """A compact file for CLI round trips: ~1 minute, plain utterances."""
    rng = np.random.default_rng(seed)
    synth_utts = []
    frame = 30
    for _ in range(n_utts):
        # 7+ words keep every utterance over one scoring fragment long
        text = _sentence(rng, int(rng.integers(7, 11)))
        span_frames = len(text)
        synth_utts.append(
            SynthUtterance(
                text=text,
                start_s=frame * FRAME_S,
                end_s=(frame + span_frames) * FRAME_S,
            )
        )
        frame += span_frames + int(rng.integers(100, 161))  # 2.0-3.2 s pause
    return SynthSpec(
        utterances=tuple(synth_utts),
        frame_duration_s=FRAME_S,
        peak_prob=peak_prob,
        noise_seed=seed,
        total_s=(frame + 50) * FRAME_S,
    )
