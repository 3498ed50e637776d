"""Drive the whole command-line pipeline in a scratch directory.

synth renders a posterior file, caption transcript, speech regions, and
ground-truth timestamps from a manifest; align pairs posteriors with
transcripts and emits jsonl/CTM/segments; filter and stats consume the
jsonl. Everything here shells through the same main() the installed
`anchoralign` command uses.
"""

import os
import tempfile
from pathlib import Path

from anchoralign import SynthSpec, SynthUtterance, write_manifest
from anchoralign.cli import main

os.environ.setdefault("ANCHOR_ALIGN_LOG", "quiet")  # keep the story readable

UTTS = (
    ("la fuente seca guarda monedas viejas", 1.0),
    ("un gato cruza la plaza sin prisa", 6.0),
    ("las campanas doblan lentas a lo lejos", 11.0),
    ("cae la tarde sobre los tejados rojos", 16.0),
)


def run(argv):
    print(f"$ anchoralign {' '.join(argv)}")
    rc = main(argv)
    print(f"  -> exit {rc}\n")
    assert rc == 0


def main_demo():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        spec = SynthSpec(
            utterances=tuple(
                SynthUtterance(text=t, start_s=s, end_s=s + len(t) * 0.02) for t, s in UTTS
            ),
            frame_duration_s=0.02,
            peak_prob=0.9,
            noise_seed=5,
            gap_peak=0.98,
            total_s=22.0,
        )
        manifest = tmp / "plaza.manifest"
        write_manifest(manifest, spec)
        print(f"manifest {manifest.name}:")
        print(manifest.read_text(), end="\n")

        data, out = tmp / "data", tmp / "out"
        run(["synth", "--manifest", str(manifest), "--output-dir", str(data),
             "--write-vocab", str(tmp / "vocab.txt")])
        run(["align", "--posterior-dir", str(data), "--transcript-dir", str(data),
             "--vocab", str(tmp / "vocab.txt"), "--output-dir", str(out)])
        jsonl = str(out / "plaza.align.jsonl")
        run(["filter", jsonl, "--method", "chebyshev", "--output-dir", str(out)])
        run(["stats", jsonl, "--output-dir", str(out)])

        for name in sorted(p.name for p in out.iterdir()):
            print(f"--- {name} ---")
            body = (out / name).read_text().splitlines()
            for line in body[:5]:
                print(line)
            if len(body) > 5:
                print(f"... ({len(body)} lines)")
            print()


if __name__ == "__main__":
    main_demo()
