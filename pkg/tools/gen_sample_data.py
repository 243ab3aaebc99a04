"""Write a demo dataset plus a speech-like WAV and a reference portrait for trying out `infer`.

    python3 tools/gen_sample_data.py --videos 8 --frames 96

Output is located in the dist/ folder.
"""

import argparse
import shutil
import sys
from pathlib import Path

import numpy as np

REPO_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(REPO_ROOT))

from talking_clip.audio.track import tone  # noqa: E402
from talking_clip.audio.wav import write_wav  # noqa: E402
from talking_clip.harness.synth import synth_dataset  # noqa: E402


def speech_envelope(seconds: float, sample_rate: int, syllable_hz: float = 3.5) -> np.ndarray:
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    return 0.5 + 0.45 * np.sin(2.0 * np.pi * syllable_hz * t)


def generate(out: Path, videos: int, frames: int, seconds: float, image_size: int, seed: int) -> None:
    if out.exists():
        shutil.rmtree(out)
    data_dir = out / "data"
    manifest = synth_dataset(data_dir, videos, frames, seed=seed, image_size=image_size)

    sample_rate = manifest.sample_rate
    write_wav(out / "speech.wav", tone(seconds, 200.0, sample_rate, speech_envelope(seconds, sample_rate)))
    if len(manifest.videos) > 0:
        first_frame = data_dir / manifest.videos[0].frames / "frame_00000.png"
        shutil.copyfile(first_frame, out / "ref.png")
    print(f"Wrote {len(manifest.videos)} videos, speech.wav and ref.png to {out}")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(REPO_ROOT / "dist" / "sample-data"), help="output folder (replaced)")
    parser.add_argument("--videos", type=int, default=4)
    parser.add_argument("--frames", type=int, default=64, help="frames per video")
    parser.add_argument("--seconds", type=float, default=2.0, help="length of the driving audio")
    parser.add_argument("--image-size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    generate(Path(args.out), args.videos, args.frames, args.seconds, args.image_size, args.seed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
