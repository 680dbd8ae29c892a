"""Street-image dataset management, classifier training and QC.

Two regional taxonomies ship built in: a seven-class one for the
California-style mixed-perennial landscape and a three-class one for
the corn/soybean belt. Both end with an ``others`` catch-all; QC drops
it because an ``others`` image cannot source a crop reference point.

The human quality-control step is captured as data: a confidence
threshold plus an externally edited rejection-list file of image ids,
so a re-run reproduces the same decisions.
"""

from __future__ import annotations

import csv
import datetime
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import neuralnet
from .errors import DataValidationError
from .geocore import GeoPoint, Heading
from .imagery import ImageTensor, StreetImageRecord, decode_image
from .neuralnet import Network, NetworkSpec, TrainConfig


@dataclass(frozen=True)
class LabelTaxonomy:
    region: str
    class_names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.class_names)) != len(self.class_names):
            raise DataValidationError("class names must be unique")
        if "others" not in self.class_names:
            raise DataValidationError('taxonomy must include an "others" class')

    def __len__(self) -> int:
        return len(self.class_names)

    def index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise DataValidationError(f"unknown class {name!r}") from None

    @property
    def others_index(self) -> int:
        return self.class_names.index("others")


CALIFORNIA = LabelTaxonomy(
    "california", ("alfalfa", "almond", "corn", "cotton", "grape", "pistachio", "others")
)
ILLINOIS = LabelTaxonomy("illinois", ("corn", "soybean", "others"))

TAXONOMIES = {t.region: t for t in (CALIFORNIA, ILLINOIS)}


@dataclass(frozen=True)
class LabeledImage:
    record: StreetImageRecord
    label: int
    confidence: float | None = None


def split_dataset(items: Sequence, ratios: tuple[float, float, float], seed: int):
    """Stratified random (train, val, test) partition.

    Each class is shuffled and allocated by largest remainder, so every
    subset size stays within one item of ``ratio * class_size``. The
    same seed always produces the same membership. Items need a
    ``label`` attribute; classes with fewer than 3 items are an error.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise DataValidationError("ratios must be three positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataValidationError(f"ratios must sum to 1, got {sum(ratios)}")
    by_class: dict[int, list] = {}
    for item in items:
        by_class.setdefault(int(item.label), []).append(item)
    for label, members in sorted(by_class.items()):
        if len(members) < 3:
            raise DataValidationError(
                f"class {label} has {len(members)} items; at least 3 required to stratify"
            )
    rng = np.random.default_rng(seed)
    subsets: tuple[list, list, list] = ([], [], [])
    for label in sorted(by_class):
        members = by_class[label]
        order = rng.permutation(len(members))
        n = len(members)
        exact = [r * n for r in ratios]
        sizes = [int(e) for e in exact]
        remainders = sorted(range(3), key=lambda i: (-(exact[i] - sizes[i]), i))
        for i in remainders[: n - sum(sizes)]:
            sizes[i] += 1
        start = 0
        for subset, size in zip(subsets, sizes):
            subset.extend(members[i] for i in order[start : start + size])
            start += size
    return subsets


def images_to_arrays(images: Sequence[LabeledImage]):
    """Stack labeled images into (n, 3, h, w) inputs and a label vector."""
    if not images:
        raise DataValidationError("no images given")
    shape = images[0].record.image.values.shape
    for li in images:
        if li.record.image.values.shape != shape:
            raise DataValidationError(
                f"mixed image sizes: {li.record.image.values.shape} vs {shape}"
            )
    x = np.stack([np.transpose(li.record.image.values, (2, 0, 1)) for li in images])
    y = np.array([li.label for li in images], dtype=np.int64)
    return x, y


def train_image_classifier(
    train_images: Sequence[LabeledImage],
    val_images: Sequence[LabeledImage],
    taxonomy: LabelTaxonomy,
    net_spec: NetworkSpec | None = None,
    cfg: TrainConfig = TrainConfig(epochs=30),
):
    """Train the street-image network; returns (net, validation history)."""
    present = {li.label for li in train_images}
    missing = [n for i, n in enumerate(taxonomy.class_names) if i not in present]
    if missing:
        raise DataValidationError(f"training set lacks classes: {missing}")
    x_train, y_train = images_to_arrays(train_images)
    x_val, y_val = images_to_arrays(val_images)
    if net_spec is None:
        net_spec = neuralnet.default_image_spec(x_train.shape[1:], len(taxonomy))
    if net_spec.n_classes != len(taxonomy):
        raise DataValidationError("network class count does not match the taxonomy")
    net = neuralnet.build_network(net_spec, seed=cfg.seed)
    return neuralnet.train(net, (x_train, y_train), (x_val, y_val), cfg)


def classify_images(net: Network, images: Sequence[StreetImageRecord]) -> list[LabeledImage]:
    """One LabeledImage per input record, order preserved."""
    if not images:
        return []
    x = np.stack([np.transpose(rec.image.values, (2, 0, 1)) for rec in images])
    labels, confidences = neuralnet.predict_batch(net, x)
    return [
        LabeledImage(rec, int(label), float(conf))
        for rec, label, conf in zip(images, labels, confidences)
    ]


def qc_filter(
    labeled: Sequence[LabeledImage],
    taxonomy: LabelTaxonomy,
    min_confidence: float = 0.5,
    rejection_ids: set[str] | None = None,
):
    """Partition into (kept, dropped) for reference-point production.

    Dropped: anything labeled "others", anything under the confidence
    threshold, and any id on the human rejection list. Ids on the list
    that never appear produce a warning, not an error.
    """
    if not (0.0 <= min_confidence <= 1.0):
        raise DataValidationError("min_confidence must be in [0, 1]")
    rejection_ids = set(rejection_ids or ())
    seen = {li.record.id for li in labeled}
    for missing in sorted(rejection_ids - seen):
        warnings.warn(f"rejection list id {missing!r} not present in the input")
    kept, dropped = [], []
    for li in labeled:
        reject = (
            li.label == taxonomy.others_index
            or (li.confidence is not None and li.confidence < min_confidence)
            or li.record.id in rejection_ids
        )
        (dropped if reject else kept).append(li)
    return kept, dropped


# --------------------------------------------------------------------------
# Catalog files: one CSV row per image. Image paths are stored relative
# to the catalog so output directories stay relocatable.
# --------------------------------------------------------------------------

CATALOG_HEADER = ["id", "path", "label", "confidence", "lat", "lon", "heading", "date"]


def write_catalog(
    labeled: Sequence[LabeledImage],
    image_paths: Sequence[str],
    taxonomy: LabelTaxonomy,
    path: str | Path,
):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CATALOG_HEADER)
        for li, img_path in zip(labeled, image_paths):
            rec = li.record
            date = "" if rec.capture_date is None else f"{rec.capture_date:%Y-%m}"
            writer.writerow(
                [
                    rec.id,
                    img_path,
                    taxonomy.class_names[li.label],
                    "" if li.confidence is None else f"{li.confidence:.6f}",
                    repr(rec.capture_point.lat_deg),
                    repr(rec.capture_point.lon_deg),
                    int(rec.heading),
                    date,
                ]
            )


def read_catalog(path: str | Path, taxonomy: LabelTaxonomy) -> list[LabeledImage]:
    """Load a catalog, decoding each referenced image file."""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"catalog not found: {path}")
    base = path.parent
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CATALOG_HEADER:
            raise DataValidationError(f"{path}: unexpected catalog columns {reader.fieldnames}")
        for row in reader:
            image = decode_image((base / row["path"]).read_bytes())
            date = None
            if row["date"]:
                year, month = row["date"].split("-")
                date = datetime.date(int(year), int(month), 1)
            record = StreetImageRecord(
                id=row["id"],
                capture_point=GeoPoint(float(row["lat"]), float(row["lon"])),
                heading=Heading(int(row["heading"])),
                image=ImageTensor(image.values),
                capture_date=date,
            )
            confidence = float(row["confidence"]) if row["confidence"] else None
            out.append(LabeledImage(record, taxonomy.index(row["label"]), confidence))
    return out


def write_record_catalog(
    records: Sequence[StreetImageRecord], image_paths: Sequence[str], path: str | Path
):
    """Catalog of unlabeled records (label/confidence columns left empty)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CATALOG_HEADER)
        for rec, img_path in zip(records, image_paths):
            date = "" if rec.capture_date is None else f"{rec.capture_date:%Y-%m}"
            writer.writerow(
                [
                    rec.id,
                    img_path,
                    "",
                    "",
                    repr(rec.capture_point.lat_deg),
                    repr(rec.capture_point.lon_deg),
                    int(rec.heading),
                    date,
                ]
            )


def read_record_catalog(path: str | Path):
    """Load an unlabeled catalog; returns (records, image path strings)."""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"catalog not found: {path}")
    base = path.parent
    records, paths = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CATALOG_HEADER:
            raise DataValidationError(f"{path}: unexpected catalog columns {reader.fieldnames}")
        for row in reader:
            image = decode_image((base / row["path"]).read_bytes())
            date = None
            if row["date"]:
                year, month = row["date"].split("-")
                date = datetime.date(int(year), int(month), 1)
            records.append(
                StreetImageRecord(
                    id=row["id"],
                    capture_point=GeoPoint(float(row["lat"]), float(row["lon"])),
                    heading=Heading(int(row["heading"])),
                    image=image,
                    capture_date=date,
                )
            )
            paths.append(row["path"])
    return records, paths


def read_rejection_list(path: str | Path) -> set[str]:
    """One image id per line; blank lines and ``#`` comments ignored."""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"rejection list not found: {path}")
    ids = set()
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            ids.add(line)
    return ids
