"""
Vegetation indices, QA masking and temporal gap filling
=======================================================

Pixel classification feeds on per-date band values and four indices
derived from them. This demo computes the indices on a toy grid, knocks
out cells with a QA mask, and shows how a per-pixel time series is
gap-filled before it reaches the model.
"""

import datetime
import tempfile
from pathlib import Path

import numpy as np

from streetcrop.rasterstack import (
    BAND_NAMES,
    FeatureName,
    RasterGrid,
    apply_qa_mask,
    compute_index,
    extract_feature_stack,
    write_grid,
    write_manifest,
    SceneManifest,
)
from streetcrop.geocore import GeoPoint


def grid(values):
    values = np.asarray(values, dtype=float)
    return RasterGrid(values.shape[1], values.shape[0], 0.0, 0.0, 0.001, -9999.0, values)


print("Index arithmetic")
print("----------------")
nir = grid([[0.5, 0.4], [0.3, 0.6]])
red = grid([[0.1, 0.1], [0.1, 0.1]])
blue = grid([[0.05, 0.05], [0.05, 0.05]])
ndvi = compute_index(FeatureName.NDVI, {"NIR": nir, "Red": red})
evi = compute_index(FeatureName.EVI, {"NIR": nir, "Red": red, "Blue": blue})
print("  NDVI:\n", ndvi.values)
print("  EVI:\n", evi.values)

print()
print("QA masking (0 = clear, anything else drops the cell)")
print("-----------------------------------------------------")
qa = grid([[0, 1], [0, 0]])
masked = apply_qa_mask(nir, qa)
print("  NIR after masking:\n", masked.values)

print()
print("Per-pixel temporal stacks with gap filling")
print("------------------------------------------")
# Three scenes; the middle one is fully cloudy, so its values are
# interpolated from the neighbors before the model sees them.
workdir = Path(tempfile.mkdtemp())
dates = [datetime.date(2013, 5, 1) + datetime.timedelta(days=30 * i) for i in range(3)]
nir_by_date = [0.2, 0.9, 0.4]  # the 0.9 is hidden behind clouds
manifests = []
for date, nir_value in zip(dates, nir_by_date):
    band_paths = {}
    for band in BAND_NAMES:
        value = nir_value if band == "NIR" else 0.1
        name = f"{date.isoformat()}_{band}.grid"
        write_grid(grid(np.full((2, 2), value)), workdir / name)
        band_paths[band] = name
    qa_values = np.full((2, 2), 1.0 if date == dates[1] else 0.0)
    write_grid(grid(qa_values), workdir / f"{date.isoformat()}_qa.grid")
    manifest = SceneManifest(date, band_paths, f"{date.isoformat()}_qa.grid")
    write_manifest(manifest, workdir / f"{date.isoformat()}.manifest")
    manifests.append(
        SceneManifest(
            date,
            {b: str(workdir / p) for b, p in band_paths.items()},
            str(workdir / f"{date.isoformat()}_qa.grid"),
        )
    )

stack = extract_feature_stack(manifests, [FeatureName.NIR, FeatureName.NDVI], GeoPoint(0.001, 0.001))
print("  dates:     ", [d.isoformat() for d in stack.dates])
print("  NIR series:", np.round(stack.matrix[:, 0], 3), "(middle value interpolated)")
print("  observed?  ", stack.valid_mask[:, 0])
