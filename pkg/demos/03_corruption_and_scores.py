"""Show how segment scores expose transcript defects.

The transcript here is wrong in two ways that real subtitle files are
wrong: one utterance's text is replaced wholesale with unrelated words,
and one tiny utterance is too short to score reliably. The aligner keeps
going either way; the confidence scores are what tell the two apart from
the clean majority.
"""

import math

import numpy as np

from anchoralign import (
    SynthSpec,
    SynthUtterance,
    Utterance,
    align_file,
    default_spanish_vocab,
    estimate_time_refs,
    score_histogram,
    synth_posteriors,
)

SPOKEN = [
    "la barca vuelve con la marea alta",
    "dos gaviotas siguen la estela blanca",
    "si",
    "el faro gira despacio toda la noche",
    "las redes secan colgadas del muro",
]
# what the transcript claims was said: utterance 1 is pure invention
CLAIMED = list(SPOKEN)
CLAIMED[1] = "fuego fatuo juega bajo kioscos vacios"


def main():
    vocab = default_spanish_vocab()
    frame = 75
    synth_utts = []
    for text in SPOKEN:
        start = frame * 0.02
        synth_utts.append(SynthUtterance(text=text, start_s=start, end_s=start + len(text) * 0.02))
        frame += len(text) + 60  # tight pauses: nowhere to hide a bad transcript
    spec = SynthSpec(
        utterances=tuple(synth_utts),
        frame_duration_s=0.02,
        peak_prob=0.9,
        noise_seed=23,
        gap_peak=0.98,
        total_s=12.0,
    )
    pm, _ = synth_posteriors(spec, vocab)

    utts = estimate_time_refs(
        [
            Utterance(utt_index=i, text=t, word_count=len(t.split()))
            for i, t in enumerate(CLAIMED)
        ],
        pm.duration_s,
    )
    run = align_file(pm, utts, vocab, file_id="demo")

    print(f"acceptance threshold ln(0.13) ~ {math.log(0.13):.2f}, rounded to -2.0\n")
    print(f"{'utt':>3} {'s_seg':>8} {'penalized':>9} verdict")
    for u in run.utterances:
        if u.penalized:
            verdict = "too short, score capped"
        elif u.s_seg < -2.0:
            verdict = "transcript does not match the audio"
        else:
            verdict = "clean"
        print(f"{u.utt_index:>3} {u.s_seg:>8.3f} {str(u.penalized):>9} {verdict}")
    if run.skipped:
        print(f"skipped outright: {run.skipped}")

    print("\nscore histogram (note the penalty spike at -4.0):")
    for bin_start, count in score_histogram(run.utterances, bin_width=0.5, floor=-6.0):
        if count:
            print(f"  [{bin_start:>5.1f}, {bin_start + 0.5:>5.1f}) {'#' * count}")


if __name__ == "__main__":
    main()
