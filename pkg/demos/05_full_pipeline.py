"""
The full pipeline at desk scale
===============================

Runs every stage of the ``streetcrop`` command line against a small
synthetic world: build the world, lay a sampling grid, fetch roadside
images, train and apply the image classifier, QC, generate and validate
reference points, select features, train the pixel mapper, predict the
crop map and evaluate it against the truth raster.

Takes a couple of minutes; artifacts land in a temp directory whose
path is printed at the end.
"""

import tempfile
from pathlib import Path

from streetcrop.cli import run_command

CONFIG = """\
region = illinois
seed = 42

synth.parcels_per_side = 8
synth.n_per_class = 60
synth.fixture_stride = 2
synth.cloud_fraction = 0.1

grid.spacing_m = 30
shift.road_width_y_m = 30
shift.pixel_size_x_m = 30

net.epochs = 15
qc.min_confidence = 0.5
refs.others_count = 150
features.candidates = EVI,ENDVI,SWIR1,SWIR2
"""

STAGES = (
    "synth",
    "grid",
    "fetch",
    "train-images",
    "classify-images",
    "qc",
    "make-refs",
    "validate-refs",
    "select-features",
    "train-mapper",
    "map",
    "evaluate",
)


def main():
    workdir = Path(tempfile.mkdtemp(prefix="streetcrop_demo_"))
    config = workdir / "run.cfg"
    config.write_text(CONFIG)
    out = workdir / "run"
    for stage in STAGES:
        print(f"\n=== {stage} " + "=" * (60 - len(stage)))
        code = run_command([stage, "--config", str(config), "--out", str(out)])
        if code != 0:
            raise SystemExit(f"{stage} failed with exit code {code}")
    print(f"\nall artifacts under: {out}")


if __name__ == "__main__":
    main()
