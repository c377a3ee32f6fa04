"""Experiment configuration: TOML parsing and validation."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .features import GridSpec
from .fusion import FusionSpec, NORMALIZATION_SCOPES

# the synthetic dataset seed is derived from the experiment seed unless set
SYNTH_SEED_OFFSET = 1


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for generating the synthetic dataset on the fly."""

    out_dir: Path
    subjects: int
    samples: int
    width: int = 60
    height: int = 80
    noise_sigma: float = 0.02
    shift_max: int = 1
    seed: Optional[int] = None  # derived from the experiment seed when None


@dataclass(frozen=True)
class ProtocolSpec:
    ear_side: str = "left"
    train_subjects: int = 10
    train_samples: int = 7
    probe_samples: int = 7
    seed: int = 0


@dataclass(frozen=True)
class FeatureParams:
    """Extractor settings shared by training, gallery and probe features."""

    image_width: int = 60
    image_height: int = 80
    ulbp_radius: float = 2.0
    ulbp_grid: GridSpec = field(default_factory=GridSpec)
    lpq_window: int = 7
    lpq_grid: GridSpec = field(default_factory=GridSpec)
    hog_cell: int = 10
    hog_block_cells: int = 2
    hog_bins: int = 9


@dataclass(frozen=True)
class SubspaceParams:
    pca_k: object = "max"
    lda_k: object = "max"


@dataclass(frozen=True)
class ExperimentConfig:
    output_dir: Path
    protocol: ProtocolSpec
    manifest_path: Optional[Path] = None
    synth: Optional[SynthSpec] = None
    methods: Tuple[str, ...] = ()
    fusions: Tuple[FusionSpec, ...] = ()
    features: FeatureParams = field(default_factory=FeatureParams)
    subspace: SubspaceParams = field(default_factory=SubspaceParams)
    normalization: str = "global"

    def synth_seed(self) -> int:
        if self.synth is not None and self.synth.seed is not None:
            return self.synth.seed
        return self.protocol.seed + SYNTH_SEED_OFFSET


def _require(table: Dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing {where}.{key}")
    return table[key]


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _as_grid(value, where: str) -> GridSpec:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, int) for v in value)):
        raise ConfigError(f"{where} must be [blocks_x, blocks_y]")
    try:
        return GridSpec(blocks_x=value[0], blocks_y=value[1])
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _as_k(value, where: str):
    if value == "max":
        return "max"
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{where} must be a positive integer or 'max'")
    return value


def _parse_fusions(raw, known_methods, where: str) -> Tuple[FusionSpec, ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"{where} must be an array of tables")
    fusions = []
    for i, entry in enumerate(raw):
        label = entry.get("name", f"{where}[{i}]") if isinstance(entry, dict) else f"{where}[{i}]"
        if not isinstance(entry, dict) or "components" not in entry:
            raise ConfigError(f"{label}: fusion needs a components array")
        comps = []
        for comp in entry["components"]:
            if not isinstance(comp, dict) or "method" not in comp or "weight" not in comp:
                raise ConfigError(f"{label}: each component needs method and weight")
            method = str(comp["method"])
            if method not in known_methods:
                raise ConfigError(
                    f"{label}: component {method!r} is not among the methods to run"
                )
            comps.append((method, float(comp["weight"])))
        try:
            fusions.append(FusionSpec(components=tuple(comps), name=str(entry.get("name", ""))))
        except ValueError as exc:
            raise ConfigError(f"{label}: {exc}") from exc
    return tuple(fusions)


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file.

    Relative paths inside the file resolve against the working directory at
    run time, so identical configs yield identical recorded path strings.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc

    def resolve(p) -> Path:
        return Path(str(p))

    dataset = raw.get("dataset", {})
    manifest_path = None
    synth = None
    if "manifest" in dataset:
        manifest_path = resolve(dataset["manifest"])
    if "synth" in dataset:
        st = dataset["synth"]
        synth = SynthSpec(
            out_dir=resolve(_require(st, "dir", "dataset.synth")),
            subjects=_as_int(_require(st, "subjects", "dataset.synth"), "dataset.synth.subjects"),
            samples=_as_int(_require(st, "samples", "dataset.synth"), "dataset.synth.samples"),
            width=_as_int(st.get("width", 60), "dataset.synth.width"),
            height=_as_int(st.get("height", 80), "dataset.synth.height"),
            noise_sigma=float(st.get("noise_sigma", 0.02)),
            shift_max=_as_int(st.get("shift_max", 1), "dataset.synth.shift_max"),
            seed=_as_int(st["seed"], "dataset.synth.seed") if "seed" in st else None,
        )
    if (manifest_path is None) == (synth is None):
        raise ConfigError("dataset must set exactly one of manifest or [dataset.synth]")

    pt = raw.get("protocol", {})
    protocol = ProtocolSpec(
        ear_side=str(pt.get("ear_side", "left")),
        train_subjects=_as_int(pt.get("train_subjects", 10), "protocol.train_subjects"),
        train_samples=_as_int(pt.get("train_samples", 7), "protocol.train_samples"),
        probe_samples=_as_int(pt.get("probe_samples", 7), "protocol.probe_samples"),
        seed=_as_int(pt.get("seed", 0), "protocol.seed"),
    )
    if protocol.ear_side not in ("left", "right"):
        raise ConfigError(f"protocol.ear_side must be left or right, got {protocol.ear_side!r}")

    ft = raw.get("features", {})
    features = FeatureParams(
        image_width=_as_int(ft.get("image_width", 60), "features.image_width"),
        image_height=_as_int(ft.get("image_height", 80), "features.image_height"),
        ulbp_radius=float(ft.get("ulbp_radius", 2.0)),
        ulbp_grid=_as_grid(ft.get("ulbp_grid", [4, 4]), "features.ulbp_grid"),
        lpq_window=_as_int(ft.get("lpq_window", 7), "features.lpq_window"),
        lpq_grid=_as_grid(ft.get("lpq_grid", [4, 4]), "features.lpq_grid"),
        hog_cell=_as_int(ft.get("hog_cell", 10), "features.hog_cell"),
        hog_block_cells=_as_int(ft.get("hog_block_cells", 2), "features.hog_block_cells"),
        hog_bins=_as_int(ft.get("hog_bins", 9), "features.hog_bins"),
    )

    st = raw.get("subspace", {})
    subspace = SubspaceParams(
        pca_k=_as_k(st.get("pca_k", "max"), "subspace.pca_k"),
        lda_k=_as_k(st.get("lda_k", "max"), "subspace.lda_k"),
    )

    run = raw.get("run", {})
    output_dir = resolve(_require(run, "output_dir", "run"))
    methods_raw = run.get("methods", "table1")
    from .pipeline import builtin_method_names  # local import avoids a cycle

    known = builtin_method_names()
    if methods_raw == "table1":
        methods = tuple(known)
    elif isinstance(methods_raw, list):
        methods = tuple(str(m) for m in methods_raw)
        unknown = [m for m in methods if m not in known]
        if unknown:
            raise ConfigError(f"unknown method(s): {', '.join(unknown)}")
        if len(set(methods)) != len(methods):
            raise ConfigError("run.methods contains duplicates")
        if not methods:
            raise ConfigError("run.methods is empty")
    else:
        raise ConfigError("run.methods must be 'table1' or an array of method names")

    normalization = str(run.get("normalization", "global"))
    if normalization not in NORMALIZATION_SCOPES:
        raise ConfigError(
            f"run.normalization must be one of {NORMALIZATION_SCOPES}, got {normalization!r}"
        )

    fusions = _parse_fusions(raw.get("fusion", []), set(methods), "fusion")
    names = [f.name for f in fusions]
    clashes = {n for n in names if names.count(n) > 1 or n in methods}
    if clashes:
        raise ConfigError(f"fusion name(s) not unique: {', '.join(sorted(clashes))}")

    return ExperimentConfig(
        output_dir=output_dir,
        protocol=protocol,
        manifest_path=manifest_path,
        synth=synth,
        methods=methods,
        fusions=fusions,
        features=features,
        subspace=subspace,
        normalization=normalization,
    )
