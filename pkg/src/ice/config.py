"""Campaign configuration: dataclasses with a lossless JSON file form.

A campaign is fully determined by its config (including the master seed), so
the SHA-256 of the canonical config JSON doubles as the provenance hash that
every persisted artifact embeds.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .proposer import MaskSpec

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class LandscapeSettings:
    length: int = 20
    alphabet_size: int = 8
    n_epistatic_pairs: int = 20
    additive_scale: float = 1.0
    epistatic_scale: float = 0.5


@dataclass(frozen=True)
class DataSettings:
    corpus_size: int = 50000
    sup_size: int = 5000
    heldout_size: int = 4000
    region_low_pct: float = 1.0
    region_high_pct: float = 80.0
    label_noise_std: float = 0.0
    immutable_start: int = 8
    immutable_stop: int = 12


@dataclass(frozen=True)
class ScorerSettings:
    ridge_lambda: float = 1.0


@dataclass(frozen=True)
class PairSettings:
    delta: float = 1.5
    n_pairs: int = 100000
    infill_smoothing: float = 1.0
    infill_order: int = 1


@dataclass(frozen=True)
class EditorSettings:
    smoothing: float = 0.5
    max_edits: int = 12
    score_bins: int = 8


@dataclass(frozen=True)
class InferenceSettings:
    iters: int = 10
    beam_width: int = 5
    top_k: int = 5
    temperature: float = 0.7
    n_starts: int = 2000
    direction: str = "above"  # campaign improvement direction

    def __post_init__(self) -> None:
        if self.direction not in ("above", "below"):
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class TargetSpec:
    """A target either absolute, or anchored at a region bound plus an offset
    in units of the corpus score standard deviation."""

    kind: str = "relative"  # "relative" | "absolute"
    direction: str = "above"  # "above" | "below"
    anchor: str = "alpha_plus"  # "alpha_plus" | "alpha_minus"
    std_offset: float = 0.0
    value: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("relative", "absolute"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.direction not in ("above", "below"):
            raise ValueError(f"unknown target direction {self.direction!r}")
        if self.anchor not in ("alpha_plus", "alpha_minus"):
            raise ValueError(f"unknown target anchor {self.anchor!r}")


@dataclass(frozen=True)
class SweepSettings:
    beam_widths: tuple[int, ...] = (3, 5)
    top_ks: tuple[int, ...] = (5, 10)
    iters: tuple[int, ...] = (10,)
    n_starts: int = 200


@dataclass(frozen=True)
class ReportSettings:
    hist_bin_width: float = 0.25
    topk: tuple[int, ...] = (100, 1000)


DEFAULT_TARGETS = (
    TargetSpec(kind="relative", direction="above", anchor="alpha_plus", std_offset=-0.5),
    TargetSpec(kind="relative", direction="above", anchor="alpha_plus", std_offset=0.5),
    TargetSpec(kind="relative", direction="above", anchor="alpha_plus", std_offset=1.0),
)


@dataclass(frozen=True)
class CampaignConfig:
    master_seed: int = 42
    out_dir: str = "campaign_out"
    landscape: LandscapeSettings = field(default_factory=LandscapeSettings)
    data: DataSettings = field(default_factory=DataSettings)
    scorer: ScorerSettings = field(default_factory=ScorerSettings)
    mask: MaskSpec = field(default_factory=MaskSpec)
    pairs: PairSettings = field(default_factory=PairSettings)
    editor: EditorSettings = field(default_factory=EditorSettings)
    inference: InferenceSettings = field(default_factory=InferenceSettings)
    targets: tuple[TargetSpec, ...] = DEFAULT_TARGETS
    sweep: SweepSettings = field(default_factory=SweepSettings)
    report: ReportSettings = field(default_factory=ReportSettings)

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("targets must be non-empty")
        for name, value in (
            ("corpus_size", self.data.corpus_size),
            ("sup_size", self.data.sup_size),
            ("n_pairs", self.pairs.n_pairs),
            ("iters", self.inference.iters),
            ("beam_width", self.inference.beam_width),
            ("top_k", self.inference.top_k),
            ("n_starts", self.inference.n_starts),
            ("max_edits", self.editor.max_edits),
        ):
            if value < 1:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.pairs.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.inference.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0 <= self.data.region_low_pct < self.data.region_high_pct <= 100:
            raise ValueError("region percentiles must satisfy 0 <= low < high <= 100")


def to_dict(cfg: CampaignConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["schema_version"] = SCHEMA_VERSION
    return doc


def _tupled(obj):
    if isinstance(obj, list):
        return tuple(_tupled(v) for v in obj)
    return obj


def from_dict(doc: dict) -> CampaignConfig:
    doc = dict(doc)
    version = doc.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported config schema version {version}")
    return CampaignConfig(
        master_seed=int(doc["master_seed"]),
        out_dir=str(doc["out_dir"]),
        landscape=LandscapeSettings(**doc["landscape"]),
        data=DataSettings(**doc["data"]),
        scorer=ScorerSettings(**doc.get("scorer", {})),
        mask=MaskSpec(**doc["mask"]),
        pairs=PairSettings(**doc["pairs"]),
        editor=EditorSettings(**doc["editor"]),
        inference=InferenceSettings(**doc["inference"]),
        targets=tuple(TargetSpec(**t) for t in doc["targets"]),
        sweep=SweepSettings(**{k: _tupled(v) for k, v in doc["sweep"].items()}),
        report=ReportSettings(**{k: _tupled(v) for k, v in doc["report"].items()}),
    )


def canonical_json(cfg: CampaignConfig) -> bytes:
    return json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":")).encode()


def config_hash(cfg: CampaignConfig) -> str:
    return hashlib.sha256(canonical_json(cfg)).hexdigest()


def save_config(cfg: CampaignConfig, path: str) -> None:
    with open(path, "w") as f:
        json.dump(to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def load_config(path: str) -> CampaignConfig:
    with open(path) as f:
        return from_dict(json.load(f))


def default_config(**overrides) -> CampaignConfig:
    return dataclasses.replace(CampaignConfig(), **overrides)


def tiny_config(out_dir: str = "tiny_out", master_seed: int = 42) -> CampaignConfig:
    """Fully enumerable campaign: length 4, alphabet 3, all positions mutable."""
    return CampaignConfig(
        master_seed=master_seed,
        out_dir=out_dir,
        landscape=LandscapeSettings(
            length=4, alphabet_size=3, n_epistatic_pairs=3, additive_scale=1.0, epistatic_scale=0.5
        ),
        data=DataSettings(
            corpus_size=1500,
            sup_size=400,
            heldout_size=300,
            region_low_pct=1.0,
            region_high_pct=80.0,
            immutable_start=0,
            immutable_stop=0,
        ),
        mask=MaskSpec(strategy="span", span_lambda=1.5, span_max=2, n_spans=1),
        pairs=PairSettings(delta=1.5, n_pairs=2000, infill_smoothing=1.0, infill_order=1),
        editor=EditorSettings(smoothing=0.5, max_edits=2, score_bins=4),
        inference=InferenceSettings(iters=4, beam_width=3, top_k=3, temperature=0.7, n_starts=40),
        targets=(
            TargetSpec(kind="relative", direction="above", anchor="alpha_plus", std_offset=-0.5),
            TargetSpec(kind="relative", direction="above", anchor="alpha_plus", std_offset=0.5),
        ),
        sweep=SweepSettings(beam_widths=(2, 3), top_ks=(2, 3), iters=(4,), n_starts=10),
        report=ReportSettings(hist_bin_width=0.25, topk=(5, 10)),
    )
