"""Benchmark generation: tier presets, seeding, file formats, batch runs.

File formats (all UTF-8 text):

  clean cloud     one point per line, "x y z"; lines starting with '#' are
                  comments; blank lines are skipped
  annotated cloud header "# x y z sigma mu outlier", then one point per
                  line with six space-separated fields; outlier is 0 or 1;
                  floats use shortest round-trip decimals
  manifest        CSV with header sample_id,label,path; paths are resolved
                  relative to the manifest's directory
  sigma summary   CSV with header sample_id,label,mean_sigma,mean_mu,
                  outlier_count, sorted ascending by sample_id
  tier config     "key=value" lines overriding the zero-noise defaults;
                  keys: a b c k p_out sensor_x sensor_y sensor_z normal_k
                  global_seed
"""

import csv
import hashlib
import os
import struct
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._fileio import atomic_text, fmt
from .errors import EmptyCloud, GenerationError, ParseError, UnknownTier
from .noise import NoiseParams, corrupt_cloud

DEFAULT_SENSOR = (0.0, -2.0, 0.0)
DEFAULT_NORMAL_K = 16

# built-in corruption tiers, mildest to harshest
_PRESETS = {
    "none": NoiseParams(a=0.0, b=0.0, c=0.0, k=0.0, p_out=0.0),
    "light": NoiseParams(a=0.003, b=0.001, c=1.5, k=0.005, p_out=0.01),
    "moderate": NoiseParams(a=0.005, b=0.002, c=2.0, k=0.010, p_out=0.02),
    "heavy": NoiseParams(a=0.010, b=0.003, c=3.0, k=0.015, p_out=0.05),
}

TIER_NAMES = tuple(_PRESETS)

_SEED_MASK = (1 << 64) - 1


def tier_params(name):
    """Look up a preset NoiseParams by tier name."""
    try:
        return _PRESETS[name]
    except KeyError:
        raise UnknownTier(name, TIER_NAMES) from None


@dataclass
class TierConfig:
    """Everything needed to corrupt a dataset at one noise tier."""

    name: str
    params: NoiseParams
    sensor: tuple = DEFAULT_SENSOR
    normal_k: int = DEFAULT_NORMAL_K
    global_seed: int = 0

    def __post_init__(self):
        self.sensor = tuple(float(v) for v in self.sensor)
        if len(self.sensor) != 3:
            raise ValueError("sensor must be a 3-vector")
        if self.normal_k < 3:
            raise ValueError(f"normal_k must be >= 3, got {self.normal_k}")
        zero = NoiseParams(0.0, 0.0, 0.0, 0.0, 0.0)
        if self.name == "none" and self.params != zero:
            raise ValueError("tier 'none' must carry all-zero noise parameters")


def preset_config(name, sensor=DEFAULT_SENSOR, normal_k=DEFAULT_NORMAL_K, global_seed=0):
    """TierConfig for a built-in tier name."""
    return TierConfig(name=name, params=tier_params(name), sensor=sensor,
                      normal_k=normal_k, global_seed=global_seed)


def sample_seed(global_seed, sample_id):
    """Derive the per-sample 64-bit seed.

    Construction: SHA-256 over the global seed as 8 little-endian bytes
    followed by the UTF-8 bytes of the sample id; the first 8 digest bytes,
    read little-endian, are the seed. Platform- and run-independent.
    """
    payload = struct.pack("<Q", int(global_seed) & _SEED_MASK)
    payload += str(sample_id).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")


def read_cloud(path):
    """Parse a clean cloud file into an (n, 3) float64 array."""
    points = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"expected 3 fields, got {len(parts)}",
                                 path=path, line=lineno)
            try:
                points.append([float(p) for p in parts])
            except ValueError:
                raise ParseError(f"bad float in {parts!r}", path=path,
                                 line=lineno) from None
    if not points:
        raise EmptyCloud(f"{path}: no points")
    return np.asarray(points, dtype=np.float64)


def write_cloud(path, points):
    """Write a clean cloud with round-trip-exact coordinates."""
    pts = np.asarray(points, dtype=np.float64)
    with atomic_text(path) as fh:
        for row in pts:
            fh.write(f"{fmt(row[0])} {fmt(row[1])} {fmt(row[2])}\n")


_ANNOTATED_HEADER = "# x y z sigma mu outlier"


def write_annotated(path, ann):
    """Write an AnnotatedCloud's corrupted points and per-point annotations."""
    with atomic_text(path) as fh:
        fh.write(_ANNOTATED_HEADER + "\n")
        for i in range(len(ann)):
            x, y, z = ann.corrupted[i]
            fh.write(f"{fmt(x)} {fmt(y)} {fmt(z)} {fmt(ann.sigma[i])} "
                     f"{fmt(ann.mu[i])} {1 if ann.outlier[i] else 0}\n")


class AnnotatedColumns(NamedTuple):
    """Columns of an annotated cloud file, as parallel arrays."""

    points: np.ndarray   # (n, 3) corrupted coordinates
    sigma: np.ndarray    # (n,)
    mu: np.ndarray       # (n,)
    outlier: np.ndarray  # (n,) bool


def read_annotated(path):
    """Parse an annotated cloud file back into its columns."""
    points, sigma, mu, outlier = [], [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(f"expected 6 fields, got {len(parts)}",
                                 path=path, line=lineno)
            try:
                points.append([float(p) for p in parts[:3]])
                sigma.append(float(parts[3]))
                mu.append(float(parts[4]))
                flag = int(parts[5])
            except ValueError:
                raise ParseError(f"bad field in {parts!r}", path=path,
                                 line=lineno) from None
            if flag not in (0, 1):
                raise ParseError(f"outlier flag must be 0 or 1, got {parts[5]}",
                                 path=path, line=lineno)
            outlier.append(bool(flag))
    if not points:
        raise EmptyCloud(f"{path}: no points")
    return AnnotatedColumns(
        points=np.asarray(points, dtype=np.float64),
        sigma=np.asarray(sigma, dtype=np.float64),
        mu=np.asarray(mu, dtype=np.float64),
        outlier=np.asarray(outlier, dtype=bool),
    )


@dataclass(frozen=True)
class SampleEntry:
    sample_id: str
    label: int
    path: str


@dataclass
class Manifest:
    """Dataset manifest: sample entries plus the inferred class count."""

    entries: list
    class_count: int
    base_dir: Path = Path(".")

    def __len__(self):
        return len(self.entries)


def read_manifest(path):
    """Parse a manifest CSV; sample ids must be unique, labels non-negative."""
    path = Path(path)
    entries = []
    seen = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "label", "path"]:
            raise ParseError(f"bad manifest header {header!r}", path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 columns, got {len(row)}",
                                 path=path, line=lineno)
            sid, label_s, rel = row
            if sid in seen:
                raise ParseError(f"duplicate sample_id {sid!r}", path=path, line=lineno)
            seen.add(sid)
            try:
                label = int(label_s)
            except ValueError:
                raise ParseError(f"bad label {label_s!r}", path=path,
                                 line=lineno) from None
            if label < 0:
                raise ParseError(f"label must be >= 0, got {label}",
                                 path=path, line=lineno)
            entries.append(SampleEntry(sample_id=sid, label=label, path=rel))
    if not entries:
        raise ParseError("manifest has no samples", path=path)
    class_count = max(e.label for e in entries) + 1
    return Manifest(entries=entries, class_count=class_count, base_dir=path.parent)


_TIER_CONFIG_KEYS = ("a", "b", "c", "k", "p_out", "sensor_x", "sensor_y",
                     "sensor_z", "normal_k", "global_seed")


def read_tier_config(path, name="custom"):
    """Parse a key=value tier override file into a TierConfig.

    Missing keys keep their defaults: zero-noise parameters, sensor
    (0, -2, 0), normal_k 16, global_seed 0. Unknown keys are fatal.
    """
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected key=value", path=path, line=lineno)
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in _TIER_CONFIG_KEYS:
                raise ParseError(f"unknown key {key!r}", path=path, line=lineno)
            if key in values:
                raise ParseError(f"duplicate key {key!r}", path=path, line=lineno)
            try:
                values[key] = int(val) if key in ("normal_k", "global_seed") else float(val)
            except ValueError:
                raise ParseError(f"bad value for {key}: {val!r}", path=path,
                                 line=lineno) from None
    params = NoiseParams(
        a=values.get("a", 0.0),
        b=values.get("b", 0.0),
        c=values.get("c", 0.0),
        k=values.get("k", 0.0),
        p_out=values.get("p_out", 0.0),
    )
    sensor = (values.get("sensor_x", DEFAULT_SENSOR[0]),
              values.get("sensor_y", DEFAULT_SENSOR[1]),
              values.get("sensor_z", DEFAULT_SENSOR[2]))
    return TierConfig(name=name, params=params, sensor=sensor,
                      normal_k=values.get("normal_k", DEFAULT_NORMAL_K),
                      global_seed=values.get("global_seed", 0))


@dataclass
class GenerationSummary:
    """Outcome of one generate_benchmark run."""

    tier: str
    out_dir: Path
    sample_count: int            # samples successfully written
    failures: list = field(default_factory=list)  # (sample_id, message) pairs
    mean_sigma: float = 0.0      # mean over samples of per-sample mean sigma

    @property
    def failure_count(self):
        return len(self.failures)


def _corrupt_one(entry, config, scale, tier_dir, base_dir):
    cloud = read_cloud(base_dir / entry.path)
    if scale is not None and scale != 1.0:
        cloud = cloud * float(scale)
    ann = corrupt_cloud(cloud, config.sensor, config.params, k=config.normal_k,
                        seed=sample_seed(config.global_seed, entry.sample_id))
    write_annotated(tier_dir / f"{entry.sample_id}.xyzn", ann)
    return (entry.sample_id, entry.label, ann.mean_sigma(), ann.mean_mu(),
            ann.outlier_count())


def generate_benchmark(manifest, config, out_dir, threads=None, keep_going=False,
                       scale=None):
    """Corrupt every manifest sample at one tier and write the output tree.

    Layout: out_dir/<tier>/<sample_id>.xyzn plus out_dir/<tier>/summary.csv.
    Each sample is seeded by sample_seed(config.global_seed, sample_id), so
    output bytes do not depend on `threads` or scheduling order. By default
    the first failing sample raises GenerationError; with keep_going the
    remaining samples still run and failures are collected in the summary.
    """
    out_dir = Path(out_dir)
    tier_dir = out_dir / config.name
    tier_dir.mkdir(parents=True, exist_ok=True)
    if threads is None:
        threads = min(32, os.cpu_count() or 1)
    threads = max(1, int(threads))

    rows = []
    failures = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {
            pool.submit(_corrupt_one, entry, config, scale, tier_dir,
                        manifest.base_dir): entry
            for entry in manifest.entries
        }
        if keep_going:
            for fut, entry in futures.items():
                try:
                    rows.append(fut.result())
                except Exception as exc:
                    failures.append((entry.sample_id, str(exc)))
        else:
            done, not_done = wait(futures, return_when=FIRST_EXCEPTION)
            failed = next((f for f in done if f.exception() is not None), None)
            if failed is not None:
                for f in not_done:
                    f.cancel()
                raise GenerationError(futures[failed].sample_id, failed.exception())
            for fut in futures:
                rows.append(fut.result())

    rows.sort(key=lambda r: r[0])
    with atomic_text(tier_dir / "summary.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "label", "mean_sigma", "mean_mu",
                         "outlier_count"])
        for sid, label, ms, mm, oc in rows:
            writer.writerow([sid, label, fmt(ms), fmt(mm), oc])

    mean_sigma = float(np.mean([r[2] for r in rows])) if rows else 0.0
    failures.sort(key=lambda f: f[0])
    return GenerationSummary(tier=config.name, out_dir=out_dir,
                             sample_count=len(rows), failures=failures,
                             mean_sigma=mean_sigma)
