"""Write every synthetic fixture as raw videos plus PNG frames for inspection.

    python scripts/make_fixtures.py out/fixtures
"""

import argparse
from pathlib import Path

from csrfbs.fixtures import FIXTURES, load_fixture
from csrfbs.video import save_frame_png, save_video


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("output", type=Path)
    ap.add_argument("--frames", action="store_true", help="also dump every clean frame as PNG")
    args = ap.parse_args()
    for name in sorted(FIXTURES):
        fx = load_fixture(name)
        d = args.output / name
        d.mkdir(parents=True, exist_ok=True)
        save_video(fx.clean, d / "clean.cfbs")
        save_video(fx.foreground, d / "foreground.cfbs")
        save_video(fx.background, d / "background.cfbs")
        if args.frames:
            for k in range(fx.shape[2]):
                save_frame_png(fx.clean[:, :, k], d / f"clean_{k + 1:03d}.png")
        print(f"{name}: {fx.shape}, eta_f hint {fx.eta_f}, filters {fx.n_filters}x{fx.filter_size}")


if __name__ == "__main__":
    main()
