"""Point clouds, CSV input/output and the synthetic Manifolds generator."""

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from adaptrix._random import substream
from adaptrix.errors import ArgumentError, DataError

MANIFOLD_KINDS = ("torus", "spiral", "sphere")

TORUS_MAJOR = 2.0
TORUS_MINOR = 0.7

# Shapes are defined at unit size and stretched by this factor so that
# noise_sigma=0.05 stays small against the local point spacing.
SIGNAL_SCALE = 10.0 / 3.0


@dataclass(frozen=True)
class PointCloud:
    """An ``n x D`` sample with optional integer class labels."""

    coords: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim != 2:
            raise ArgumentError(f"coords must be a 2-D matrix, got shape {coords.shape}")
        n, dim = coords.shape
        if n < 2:
            raise DataError(f"a point cloud needs at least 2 observations, got {n}")
        if dim < 1:
            raise DataError("a point cloud needs at least one feature column")
        if not np.all(np.isfinite(coords)):
            raise DataError("coordinates contain NaN or infinite values")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise DataError(f"expected {n} labels, got shape {labels.shape}")
            if labels.size and (
                not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0
            ):
                raise DataError("labels must be non-negative integers")
            labels = labels.astype(np.int64)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def dim(self):
        return self.coords.shape[1]

    def subset(self, index):
        index = np.asarray(index)
        labels = None if self.labels is None else self.labels[index]
        return PointCloud(self.coords[index], labels)


def _parse_rows(lines, has_labels, delimiter, skip_header, source):
    rows = []
    labels = []
    width = None
    for lineno, row in enumerate(csv.reader(lines, delimiter=delimiter), start=1):
        if skip_header and lineno == 1:
            continue
        if not row or all(not cell.strip() for cell in row):
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(
                f"{source}: line {lineno} has {len(row)} columns, expected {width}"
            )
        values = []
        for col, cell in enumerate(row, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise DataError(
                    f"{source}: cannot parse {cell.strip()!r} as a number "
                    f"at row {lineno}, column {col}"
                ) from None
            if not math.isfinite(value):
                raise DataError(f"{source}: non-finite value at row {lineno}, column {col}")
            values.append(value)
        if has_labels:
            label = values.pop()
            if label != int(label) or label < 0:
                raise DataError(
                    f"{source}: label {row[-1]!r} at row {lineno} is not a non-negative integer"
                )
            labels.append(int(label))
        rows.append(values)
    if len(rows) < 2:
        raise DataError(f"{source}: need at least 2 rows, found {len(rows)}")
    if has_labels and width < 2:
        raise DataError(f"{source}: labelled data needs at least one feature column")
    coords = np.array(rows, dtype=np.float64)
    return PointCloud(coords, np.array(labels, dtype=np.int64) if has_labels else None)


def load_csv(path, has_labels=False, delimiter=",", skip_header=False):
    """Read a delimited numeric table into a :class:`PointCloud`.

    When ``has_labels`` is set the last column holds integer class labels.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return _parse_rows(fh, has_labels, delimiter, skip_header, str(path))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc


def load_iris():
    """The bundled Iris table: 150 flowers, 4 features, 3 species."""
    text = resources.files("adaptrix").joinpath("data/iris.csv").read_text("utf-8")
    return _parse_rows(text.splitlines(), True, ",", False, "iris.csv")


def save_matrix(path, m, labels=None, delimiter=","):
    """Write ``m`` (and optionally a trailing label column) as CSV.

    Floats are written with ``repr`` so reading them back is exact.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.shape[0] == 0:
        raise ArgumentError(f"refusing to save a matrix with shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ArgumentError("matrix contains non-finite values")
    if labels is not None and len(labels) != m.shape[0]:
        raise ArgumentError("label count does not match row count")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for i, row in enumerate(m):
                cells = [repr(float(v)) for v in row]
                if labels is not None:
                    cells.append(str(int(labels[i])))
                fh.write(delimiter.join(cells) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _sample_sphere(rng, size):
    v = rng.standard_normal((size, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _sample_torus(rng, size):
    u = rng.uniform(0.0, 2 * np.pi, size)
    v = rng.uniform(0.0, 2 * np.pi, size)
    ring = TORUS_MAJOR + TORUS_MINOR * np.cos(v)
    return np.column_stack([ring * np.cos(u), ring * np.sin(u), TORUS_MINOR * np.sin(v)])


def _sample_spiral(rng, size):
    t = rng.uniform(0.0, 4 * np.pi, size)
    return np.column_stack([t * np.cos(t), t * np.sin(t), 0.5 * t]) / (4 * np.pi)


_SAMPLERS = {"torus": _sample_torus, "spiral": _sample_spiral, "sphere": _sample_sphere}


def torus_residual(points, signal_scale=1.0):
    """Residual of the implicit torus equation for centred signal coordinates."""
    points = np.asarray(points, dtype=np.float64) / signal_scale
    radial = np.hypot(points[:, 0], points[:, 1]) - TORUS_MAJOR
    return radial**2 + points[:, 2] ** 2 - TORUS_MINOR**2


def sample_manifolds(
    points_per_manifold, noise_sigma=0.05, n_noise_dims=17, seed=0, kinds=MANIFOLD_KINDS,
    signal_scale=SIGNAL_SCALE,
):
    """Array form of :func:`generate_manifolds`; returns ``(coords, labels)``.

    Unlike a :class:`PointCloud` the result may have a single row.
    """
    if int(points_per_manifold) != points_per_manifold or points_per_manifold < 1:
        raise ArgumentError("points_per_manifold must be a positive integer")
    if not noise_sigma >= 0 or not math.isfinite(noise_sigma):
        raise ArgumentError("noise_sigma must be a finite non-negative number")
    if int(n_noise_dims) != n_noise_dims or n_noise_dims < 0:
        raise ArgumentError("n_noise_dims must be a non-negative integer")
    if not signal_scale > 0 or not math.isfinite(signal_scale):
        raise ArgumentError("signal_scale must be a finite positive number")
    kinds = tuple(kinds)
    unknown = set(kinds) - set(MANIFOLD_KINDS)
    if not kinds or unknown:
        raise ArgumentError(f"unknown manifold kinds: {sorted(unknown) or kinds}")
    points_per_manifold = int(points_per_manifold)
    n_noise_dims = int(n_noise_dims)

    rng = substream(seed, "dataset")
    blocks = []
    labels = []
    for kind in kinds:
        blocks.append(signal_scale * _SAMPLERS[kind](rng, points_per_manifold))
        labels.append(np.full(points_per_manifold, MANIFOLD_KINDS.index(kind), dtype=np.int64))
    signal = np.vstack(blocks)
    n = signal.shape[0]
    if noise_sigma > 0:
        coords = rng.normal(0.0, noise_sigma, size=(n, 3 + n_noise_dims))
    else:
        coords = np.zeros((n, 3 + n_noise_dims))
    coords[:, :3] += signal
    order = rng.permutation(n)
    return coords[order], np.concatenate(labels)[order]


def generate_manifolds(
    points_per_manifold, noise_sigma=0.05, n_noise_dims=17, seed=0, kinds=MANIFOLD_KINDS,
    signal_scale=SIGNAL_SCALE,
):
    """Sample the torus / spiral / sphere benchmark.

    Each manifold contributes ``points_per_manifold`` rows: three signal
    coordinates plus isotropic Gaussian noise, followed by ``n_noise_dims``
    pure-noise coordinates. Labels follow ``MANIFOLD_KINDS`` (torus 0,
    spiral 1, sphere 2). Rows are shuffled with the same seed. The
    unit-size shapes are multiplied by ``signal_scale`` before noise is
    added; with ``signal_scale=1`` the noiseless sphere is exactly the
    unit sphere.
    """
    coords, labels = sample_manifolds(
        points_per_manifold, noise_sigma, n_noise_dims, seed, kinds, signal_scale
    )
    return PointCloud(coords, labels)
