"""Black-box face-model oracles: deterministic stubs and shared types.

The attack search only ever sees two capabilities: a detector that answers
"face present" (1) or "face absent" (0), and an embedder that maps an image
to a feature vector compared by Euclidean distance. The stubs here are
defined mathematically, with no training, so search results are exactly
reproducible; real models attach through the adapter bridge with the same
two methods.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_band, check_image, row_luminance_profile


@dataclass(frozen=True)
class DetectorVerdict:
    """Binary detector output: 1 = face present, 0 = face absent."""

    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class Embedding:
    """Fixed-length feature vector from a verification model."""

    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        if vec.size < 1:
            raise ValueError("embedding must have at least one dimension")
        if not np.all(np.isfinite(vec)):
            raise ValueError("embedding contains non-finite entries")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return int(self.vector.size)


@dataclass(frozen=True)
class VerifierConfig:
    """Match threshold for embedding distance; only Euclidean is supported."""

    threshold: float
    metric: str = "euclidean"

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError(f"threshold must be > 0, got {self.threshold}")
        if self.metric != "euclidean":
            raise ValueError(f"unsupported metric {self.metric!r}")


def feature_distance(a: Embedding, b: Embedding) -> float:
    """Euclidean distance between two embeddings."""
    if a.dim != b.dim:
        raise ValueError(f"embedding dimensions differ: {a.dim} vs {b.dim}")
    return float(np.linalg.norm(a.vector - b.vector))


def fringe_run_verdict(image, band, dark_thresh: float = 0.5, min_run: int = 15) -> DetectorVerdict:
    """Detector stub keyed on dark fringe runs.

    Answers "face absent" (0) iff some run of at least ``min_run``
    consecutive rows inside ``band`` has mean luminance below
    ``dark_thresh`` times the whole-image mean. Scale-invariant and
    deterministic.
    """
    img = check_image(image)
    lo, hi = check_band(band, img.shape[0])
    if min_run < 1:
        raise ValueError(f"min_run must be >= 1, got {min_run}")
    row_means = row_luminance_profile(img)[lo:hi]
    cutoff = dark_thresh * float(img.mean())
    dark = row_means < cutoff
    run = 0
    for flag in dark:
        run = run + 1 if flag else 0
        if run >= min_run:
            return DetectorVerdict(0)
    return DetectorVerdict(1)


def profile_embedding(image, dim: int = 16) -> Embedding:
    """Embedder stub: bucketed row-luminance profile, L2-normalized.

    The column-averaged row profile is split into ``dim`` contiguous
    buckets whose means form the vector. Normalization makes the embedding
    invariant to global intensity scale, mirroring how verification models
    normalize features.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    img = check_image(image)
    profile = row_luminance_profile(img)
    buckets = np.array([chunk.mean() for chunk in np.array_split(profile, dim)])
    norm = np.linalg.norm(buckets)
    if norm > 0:
        buckets = buckets / norm
    return Embedding(buckets)


def oracle_label(detector, image) -> int:
    """Ask any detector-shaped oracle for its binary verdict on one image."""
    if hasattr(detector, "predict"):
        out = detector.predict(image)
    elif callable(detector):
        out = detector(image)
    else:
        raise TypeError("detector must expose .predict(image) or be callable")
    if isinstance(out, DetectorVerdict):
        return out.label
    label = int(out)
    if label not in (0, 1):
        raise ValueError(f"detector returned {out!r}, expected 0 or 1")
    return label


def oracle_embedding(embedder, image) -> Embedding:
    """Ask any embedder-shaped oracle for its feature vector on one image."""
    if hasattr(embedder, "embed"):
        out = embedder.embed(image)
    elif callable(embedder):
        out = embedder(image)
    else:
        raise TypeError("embedder must expose .embed(image) or be callable")
    if isinstance(out, Embedding):
        return out
    return Embedding(np.asarray(out, dtype=np.float64))


def _is_single_image(X) -> bool:
    return isinstance(X, np.ndarray) and X.ndim in (2, 3) and (
        X.ndim == 2 or X.shape[2] in (1, 3)
    )


class FringeRunDetector(BaseEstimator):
    """Estimator wrapper of the dark-run detector stub.

    ``band`` entries may be ints (row indices) or floats (fractions of the
    image height).
    """

    def __init__(self, band=(0.4, 0.6), dark_thresh=0.5, min_run=15):
        self.band = band
        self.dark_thresh = dark_thresh
        self.min_run = min_run

    def fit(self, X=None, y=None):
        return self

    def verdict(self, image) -> DetectorVerdict:
        return fringe_run_verdict(
            image, self.band, dark_thresh=self.dark_thresh, min_run=self.min_run
        )

    def predict(self, X):
        if _is_single_image(X):
            return self.verdict(X).label
        return np.array([self.verdict(img).label for img in X])


class ProfileEmbedder(BaseEstimator, TransformerMixin):
    """Estimator wrapper of the profile embedder stub."""

    def __init__(self, dim=16):
        self.dim = dim

    def fit(self, X=None, y=None):
        return self

    def embed(self, image) -> Embedding:
        return profile_embedding(image, dim=self.dim)

    def transform(self, X):
        if _is_single_image(X):
            return np.asarray(self.embed(X).vector)
        return np.stack([self.embed(img).vector for img in X])
