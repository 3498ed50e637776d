"""Walk the alignment lattice by hand on a toy three-frame window.

The lattice k[t][j] holds the best log probability of having consumed the
first j tokens after t frames. The free-start column (all zeros) lets the
text begin at any frame, and a trailing blank column lets it end before
the window does. Backtracking recovers where each character was emitted
plus the frame-wise confidence rho used for scoring.
"""

import math

import numpy as np

from anchoralign import (
    Utterance,
    Vocab,
    backtrack,
    build_token_sequence,
    compute_trellis,
    fragment_scores,
    segment_score,
)


def main():
    vocab = Vocab(symbols=("*", " ", "a", "b"), blank_index=0, separator_index=1)
    ts = build_token_sequence([Utterance(utt_index=0, text="ab", word_count=1)], vocab)
    print(f"text 'ab' -> token indices {ts.tokens} plus a trailing blank column\n")

    # one clearly dominant symbol per frame: a, blank (held), b, blank
    probs = np.array(
        [
            [0.05, 0.05, 0.85, 0.05],
            [0.70, 0.10, 0.10, 0.10],
            [0.05, 0.05, 0.05, 0.85],
            [0.70, 0.10, 0.10, 0.10],
        ]
    )
    window = np.log(probs)

    tr = compute_trellis(window, ts, vocab.blank_index)
    print("lattice k (rows = frames consumed, columns = free start, 'a', 'b', blank):")
    with np.printoptions(precision=3, suppress=True):
        print(tr.k)
    print()

    best = tr.k[1:, -1].max()
    expect = 0.85 * 0.70 * 0.85 * 0.70
    print(f"best full-text log prob {best:.4f} = ln({expect:.4f}) as hand-multiplied\n")

    chars, rho = backtrack(tr, window, ts)
    for ca in chars:
        name = vocab.symbols[ca.symbol] if ca.symbol != vocab.blank_index else "(blank)"
        print(
            f"token {ca.token_pos}: {name!r} emitted at frame {ca.start_frame},"
            f" held through frame {ca.end_frame}"
        )
    print()

    span = rho[chars[0].start_frame : chars[-1].end_frame + 1]
    frags = fragment_scores(span)
    print(f"rho over the traced span: {np.round(span, 3)}")
    print(f"fragment scores {np.round(frags, 4)} -> segment score {segment_score(frags):.4f}")
    print(f"(a segment score of {math.log(0.13):.2f} ~ linear 0.13 is the acceptance floor)")


if __name__ == "__main__":
    main()
