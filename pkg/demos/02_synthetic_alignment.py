"""Synthesize a one-minute file and align it end to end through the API.

synth_posteriors renders a frame-wise character posterior matrix from a
list of timed utterances, exactly what a CTC acoustic model would emit.
align_file then recovers those timestamps from nothing but the posterior
matrix and the bare transcript text, window by window, anchoring after
each accepted batch.
"""

import numpy as np

from anchoralign import (
    SynthSpec,
    SynthUtterance,
    Utterance,
    align_file,
    default_spanish_vocab,
    estimate_time_refs,
    frames_to_seconds,
    identity_frame_map,
    synth_posteriors,
)

TEXTS = [
    "el tren de la tarde llega con retraso otra vez",
    "hay niebla espesa sobre el puente de hierro",
    "nadie espera ya en el anden numero dos",
    "la senal cambia de rojo a verde sin ruido",
    "un silbido corto y seco cierra la manana fria",
]


def main():
    vocab = default_spanish_vocab()

    # lay the utterances out with pauses in between, one char per frame
    rng = np.random.default_rng(7)
    frame = 100
    synth_utts = []
    for text in TEXTS:
        start = frame * 0.02
        synth_utts.append(SynthUtterance(text=text, start_s=start, end_s=start + len(text) * 0.02))
        frame += len(text) + int(rng.integers(150, 350))
    spec = SynthSpec(
        utterances=tuple(synth_utts),
        frame_duration_s=0.02,
        peak_prob=0.9,
        noise_seed=11,
        gap_peak=0.98,
        total_s=60.0,
    )
    pm, truths = synth_posteriors(spec, vocab)
    print(f"synthesized {pm.n_frames} frames x {pm.n_symbols} symbols ({pm.duration_s:.0f} s)\n")

    # the aligner only sees the text; duration estimates seed window packing
    utts = estimate_time_refs(
        [Utterance(utt_index=i, text=t, word_count=len(t.split())) for i, t in enumerate(TEXTS)],
        pm.duration_s,
    )
    run = align_file(pm, utts, vocab, file_id="demo")
    run = frames_to_seconds(run, identity_frame_map(pm.n_frames))

    print(f"{'utt':>3} {'found':>15} {'truth':>15} {'s_seg':>7} anchor")
    truth_s = {i: (s * 0.02, (e + 1) * 0.02) for i, s, e in truths}
    for u in run.utterances:
        ts, te = truth_s[u.utt_index]
        print(
            f"{u.utt_index:>3} {u.start_s:>7.2f}-{u.end_s:<7.2f} {ts:>7.2f}-{te:<7.2f}"
            f" {u.s_seg:>7.3f} {'yes' if u.anchor else ''}"
        )
    print(f"\nwindow iterations: {[entry[3] for entry in run.iterations_log]}")
    print(f"anchors at frames {[a.end_frame for a in run.anchors]}")


if __name__ == "__main__":
    main()
