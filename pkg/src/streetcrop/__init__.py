"""streetcrop: roadside imagery to crop reference points to crop maps.

The pipeline in one breath: sample points over a study area, pull
roadside images facing the four cardinal directions, classify them with
a small CNN, shift the surviving crop images from the camera into the
parcel they photographed, and use those in-parcel points with
multi-date reflectance stacks to train a per-pixel crop classifier and
map the whole extent.

Subpackage map:

- ``geocore``        coordinates, sampling grids, the camera-to-parcel shift
- ``imagery``        request building, PPM codec, fixture/live retrieval
- ``rasterstack``    grid files, QA masking, vegetation indices, stacks
- ``neuralnet``      the CNN engine (layers, SGD, gradient check, model files)
- ``metrics``        confusion matrices, PA/UA/OA, agreement, area counts
- ``imageclassifier`` taxonomies, splits, image model training, QC
- ``refgen``         reference-point generation and validation
- ``cropmapper``     feature selection, pixel model, map prediction/evaluation
- ``synthworld``     deterministic synthetic worlds for verification
- ``cli``            the ``streetcrop`` command
"""

__version__ = "0.1.0"

from .geocore import BoundingBox, GeoPoint, Heading, ShiftParams  # noqa: F401
from .imageclassifier import CALIFORNIA, ILLINOIS, LabelTaxonomy  # noqa: F401
from .rasterstack import FeatureName, RasterGrid, SceneManifest  # noqa: F401
