"""Shared test helpers plus the acceptance-criteria summary hook."""

import csv
import hashlib
from pathlib import Path

import numpy as np

from noisebench import write_cloud


def unit_sphere_cloud(n, seed):
    """n points uniformly distributed on the unit sphere."""
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, 3))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    return pts


def write_benchmark_manifest(root, n_samples, n_points, seed, labels=3):
    """Write clean sphere clouds plus a manifest CSV; returns the manifest path."""
    root = Path(root)
    (root / "clouds").mkdir(parents=True, exist_ok=True)
    manifest = root / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "label", "path"])
        for i in range(n_samples):
            sid = f"s{i:04d}"
            write_cloud(root / "clouds" / f"{sid}.xyz",
                        unit_sphere_cloud(n_points, seed + i))
            writer.writerow([sid, i % labels, f"clouds/{sid}.xyz"])
    return manifest


def tree_digest(root):
    """SHA-256 over every file (relative path + bytes) under root."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(b"\0")
        h.update(path.read_bytes())
        h.update(b"\0")
    return h.hexdigest()


# --- acceptance summary: one pass/fail line per criterion ------------------

_acceptance_outcomes = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(_acceptance_outcomes):
        name = nodeid.split("::")[-1]
        status = "PASS" if _acceptance_outcomes[nodeid] == "passed" else "FAIL"
        terminalreporter.write_line(f"{name}: {status}")
