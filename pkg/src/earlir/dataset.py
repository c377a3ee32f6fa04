"""Dataset manifests, gallery/probe protocol splits, and synthetic data."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .image import GrayImage, load_image, write_pgm

EAR_SIDES = ("left", "right")


@dataclass(frozen=True)
class SampleRecord:
    """One enrolled image: (subject_id, ear_side, sample_index) is unique."""

    subject_id: str
    ear_side: str
    sample_index: int
    image_path: Path

    def __post_init__(self) -> None:
        if self.ear_side not in EAR_SIDES:
            raise ValueError(f"unknown ear_side {self.ear_side!r} (expected left/right)")
        if self.sample_index < 0:
            raise ValueError(f"sample_index must be >= 0, got {self.sample_index}")

    @property
    def key(self) -> str:
        """Stable record id used on score matrix axes."""
        return f"{self.subject_id}:{self.ear_side}:{self.sample_index}"

    def load(self, target: Optional[Tuple[int, int]] = None) -> GrayImage:
        return load_image(self.image_path, target=target)


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered sample collection; record keys are unique."""

    samples: Tuple[SampleRecord, ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("empty manifest")
        seen = set()
        for rec in self.samples:
            if rec.key in seen:
                raise ValueError(f"duplicate sample {rec.key}")
            seen.add(rec.key)

    def subjects(self, ear_side: Optional[str] = None) -> List[str]:
        """Distinct subject ids, sorted, optionally restricted to one side."""
        ids = {r.subject_id for r in self.samples if ear_side is None or r.ear_side == ear_side}
        return sorted(ids)

    def by_subject(self, ear_side: str) -> Dict[str, List[SampleRecord]]:
        """Per-subject records on one side, each list sorted by sample_index."""
        groups: Dict[str, List[SampleRecord]] = {}
        for rec in self.samples:
            if rec.ear_side == ear_side:
                groups.setdefault(rec.subject_id, []).append(rec)
        for recs in groups.values():
            recs.sort(key=lambda r: r.sample_index)
        return groups


@dataclass(frozen=True)
class Protocol:
    """Train/gallery/probe split: one gallery record per subject, probes
    only reference gallery subjects, gallery and probes disjoint."""

    training: Tuple[SampleRecord, ...]
    gallery: Tuple[SampleRecord, ...]
    probes: Tuple[SampleRecord, ...]

    def __post_init__(self) -> None:
        gallery_subjects = [r.subject_id for r in self.gallery]
        if len(set(gallery_subjects)) != len(gallery_subjects):
            raise ValueError("gallery must hold exactly one record per subject")
        gallery_keys = {r.key for r in self.gallery}
        subject_set = set(gallery_subjects)
        for rec in self.probes:
            if rec.subject_id not in subject_set:
                raise ValueError(f"probe subject {rec.subject_id!r} missing from gallery")
            if rec.key in gallery_keys:
                raise ValueError(f"record {rec.key} appears in both gallery and probes")


MANIFEST_COLUMNS = ("path", "subject_id", "ear_side", "sample_index")


def load_manifest(path) -> DatasetManifest:
    """Read a manifest CSV (header: path,subject_id,ear_side,sample_index).

    Relative image paths are resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"{path}: manifest missing column(s) {', '.join(missing)}")
        records = []
        for row in reader:
            img = Path(row["path"])
            if not img.is_absolute():
                img = base / img
            try:
                index = int(row["sample_index"])
            except ValueError:
                raise ValueError(
                    f"{path}: bad sample_index {row['sample_index']!r}"
                ) from None
            records.append(
                SampleRecord(
                    subject_id=row["subject_id"],
                    ear_side=row["ear_side"],
                    sample_index=index,
                    image_path=img,
                )
            )
    if not records:
        raise ValueError(f"{path}: empty manifest")
    return DatasetManifest(samples=tuple(records))


def make_protocol(
    manifest: DatasetManifest,
    ear_side: str,
    n_train_subjects: int,
    n_train_samples: int,
    n_probe_samples: int,
    seed: int,
) -> Protocol:
    """Split a manifest into training, gallery and probe sets.

    Every subject on the chosen side enrolls its lowest-index sample in the
    gallery; the next ``n_probe_samples`` samples become probes. Training
    subjects are drawn uniformly without replacement (seeded) from the full
    subject pool; per training subject, training samples are taken from the
    leftover samples after the gallery+probe block first, wrapping back to
    the probe block and finally the gallery sample when the subject has no
    spare samples.
    """
    if ear_side not in EAR_SIDES:
        raise ValueError(f"unknown ear_side {ear_side!r}")
    if n_probe_samples < 1:
        raise ValueError("n_probe_samples must be >= 1")
    if n_train_subjects < 0 or n_train_samples < 0:
        raise ValueError("training counts must be >= 0")

    groups = manifest.by_subject(ear_side)
    subjects = sorted(groups)
    if not subjects:
        raise ValueError(f"manifest has no {ear_side}-ear samples")
    if len(subjects) < n_train_subjects:
        raise ValueError(
            f"insufficient subjects: need {n_train_subjects}, manifest has {len(subjects)}"
        )

    gallery: List[SampleRecord] = []
    probes: List[SampleRecord] = []
    for subject in subjects:
        recs = groups[subject]
        if len(recs) < 1 + n_probe_samples:
            raise ValueError(
                f"subject {subject!r} has {len(recs)} {ear_side}-ear samples, "
                f"needs {1 + n_probe_samples}"
            )
        gallery.append(recs[0])
        probes.extend(recs[1 : 1 + n_probe_samples])

    training: List[SampleRecord] = []
    if n_train_subjects > 0 and n_train_samples > 0:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        chosen_idx = rng.choice(len(subjects), size=n_train_subjects, replace=False)
        chosen = [subjects[i] for i in sorted(chosen_idx)]
        for subject in chosen:
            recs = groups[subject]
            # spare samples first, then probe block, then the gallery sample
            order = recs[1 + n_probe_samples :] + recs[1 : 1 + n_probe_samples] + recs[:1]
            if len(order) < n_train_samples:
                raise ValueError(
                    f"subject {subject!r} has {len(order)} samples, "
                    f"needs {n_train_samples} for training"
                )
            training.extend(order[:n_train_samples])

    return Protocol(training=tuple(training), gallery=tuple(gallery), probes=tuple(probes))


def _cosine_field(rng: np.random.Generator, height: int, width: int, n_terms: int = 8) -> np.ndarray:
    """Smooth random pattern: sum of low-frequency 2-D cosines, rescaled to [0, 1]."""
    ys = np.arange(height, dtype=np.float64)[:, None] / height
    xs = np.arange(width, dtype=np.float64)[None, :] / width
    field = np.zeros((height, width), dtype=np.float64)
    for _ in range(n_terms):
        amp = rng.uniform(0.5, 1.0)
        fx = rng.uniform(0.5, 3.0)
        fy = rng.uniform(0.5, 3.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        field += amp * np.cos(2.0 * np.pi * (fx * xs + fy * ys) + phase)
    lo, hi = float(field.min()), float(field.max())
    if hi <= lo:
        return np.full((height, width), 0.5)
    return (field - lo) / (hi - lo)


def synth_dataset(
    out_dir,
    n_subjects: int,
    n_samples: int,
    width: int = 60,
    height: int = 80,
    noise_sigma: float = 0.02,
    shift_max: int = 1,
    seed: int = 0,
) -> DatasetManifest:
    """Generate a deterministic synthetic ear dataset and its manifest CSV.

    Each subject gets a smooth random base pattern; each sample is a
    translated crop of it (integer shift uniform in [-shift_max, shift_max]
    per axis) plus additive Gaussian noise, clamped to [0, 1] and written as
    a 16-bit PGM. Identical arguments produce byte-identical files.
    """
    if n_subjects < 2 or n_samples < 2:
        raise ValueError("need at least 2 subjects and 2 samples per subject")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    if shift_max < 0:
        raise ValueError("shift_max must be >= 0")

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValueError(f"cannot create output directory {out_dir}: {exc}") from exc

    rows = []
    pad = shift_max
    for si in range(n_subjects):
        subject_id = f"s{si:03d}"
        base_rng = np.random.default_rng([seed, si])
        base = _cosine_field(base_rng, height + 2 * pad, width + 2 * pad)
        for ki in range(n_samples):
            rng = np.random.default_rng([seed, si, ki])
            dy, dx = (0, 0) if shift_max == 0 else rng.integers(-shift_max, shift_max + 1, size=2)
            crop = base[pad + dy : pad + dy + height, pad + dx : pad + dx + width]
            if noise_sigma > 0:
                crop = crop + rng.normal(0.0, noise_sigma, size=crop.shape)
            crop = np.clip(crop, 0.0, 1.0)
            name = f"{subject_id}_{ki:02d}.pgm"
            write_pgm(out_dir / name, crop, maxval=65535)
            rows.append((name, subject_id, "left", ki))

    manifest_path = out_dir / "manifest.csv"
    with manifest_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)
    return load_manifest(manifest_path)
