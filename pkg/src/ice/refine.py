"""Iterative refinement loops and the sampling/score-conditioned baselines.

Two inference modes drive the editor: scorer-free advances with the top beam
candidate by model likelihood alone (the loop never sees the surrogate
scorer, enforced by its signature), while scorer-guided samples k candidates
per step and keeps the one the surrogate likes best. The baselines reuse the
same loop shapes with undirected mask-and-infill proposals, plus a one-shot
generator conditioned on a binned target score instead of a direction tag.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence as PySequence

import numpy as np

from .editor import EditTables, EditorModel, accumulate_counts, beam_step, sample_one, sample_step
from .landscape import Region
from .pairs import ControlTag, EditPair
from .proposer import InfillModel, MaskSpec, infill, mask_positions
from .scorer import ScorerModel, predict_tokens
from .seqs import Alphabet, RegionMask, Sequence, seq_from_text, seq_to_text

SCORER_FREE = "scorer-free"
SCORER_GUIDED = "scorer-guided"


class Direction(Enum):
    ABOVE = "above"
    BELOW = "below"


class TargetRegion(Enum):
    TRAIN = "train"
    EXTRAPOLATION = "extrapolation"


@dataclass(frozen=True)
class EvalTarget:
    """Attribute threshold to beat strictly, with its region classification."""

    value: float
    direction: Direction
    region: TargetRegion

    def check_consistent(self, region: Region) -> None:
        inside = region.contains(self.value)
        if inside and self.region is not TargetRegion.TRAIN:
            raise ValueError(f"target {self.value} lies inside [{region.low}, {region.high}] but is tagged {self.region}")
        if not inside and self.region is not TargetRegion.EXTRAPOLATION:
            raise ValueError(f"target {self.value} lies outside [{region.low}, {region.high}] but is tagged {self.region}")

    def beats(self, z: float) -> bool:
        return z > self.value if self.direction is Direction.ABOVE else z < self.value


@dataclass(frozen=True)
class TrajectoryStep:
    k: int
    seq: Sequence
    score: float | None
    beam: tuple[Sequence, ...] = ()


@dataclass(frozen=True)
class Trajectory:
    start: Sequence
    tag: ControlTag
    mode: str
    steps: tuple[TrajectoryStep, ...]

    @property
    def final(self) -> Sequence:
        return self.steps[-1].seq

    @property
    def iterations(self) -> int:
        return len(self.steps) - 1


def run_scorer_free(
    editor: EditorModel,
    x0: Sequence,
    tag: ControlTag,
    iters: int,
    beam_width: int,
) -> Trajectory:
    """Advance with the top beam candidate each step; record the full beam.

    Surrogate scores are not available here by design; the persisted score
    column gets filled in afterwards for diagnostics.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    steps = [TrajectoryStep(0, x0, None)]
    x = x0
    for k in range(1, iters + 1):
        try:
            ranked = beam_step(editor, x, tag, beam_width)
        except ValueError:
            ranked = []
        if ranked:
            x = ranked[0][0]
            steps.append(TrajectoryStep(k, x, None, beam=tuple(s for s, _ in ranked)))
        else:
            steps.append(TrajectoryStep(k, x, None))
    return Trajectory(start=x0, tag=tag, mode=SCORER_FREE, steps=tuple(steps))


def _select(candidates: list[Sequence], scores: np.ndarray, tag: ControlTag) -> tuple[Sequence, float]:
    """Best candidate under the tag's direction; ties go to the
    lexicographically smallest sequence."""
    if tag is ControlTag.INC:
        best = min(range(len(candidates)), key=lambda i: (-scores[i], candidates[i].tokens))
    else:
        best = min(range(len(candidates)), key=lambda i: (scores[i], candidates[i].tokens))
    return candidates[best], float(scores[best])


def _guided_loop(
    propose: Callable[[Sequence], list[Sequence]],
    scorer: ScorerModel,
    x0: Sequence,
    tag: ControlTag,
    iters: int,
    mode: str,
) -> Trajectory:
    x = x0
    fx = float(predict_tokens(scorer, np.array([x0.tokens]))[0])
    steps = [TrajectoryStep(0, x0, fx)]
    for k in range(1, iters + 1):
        candidates = propose(x)
        scores = predict_tokens(scorer, np.array([c.tokens for c in candidates]))
        x, fx = _select(candidates, scores, tag)
        steps.append(TrajectoryStep(k, x, fx))
    return Trajectory(start=x0, tag=tag, mode=mode, steps=tuple(steps))


def run_scorer_guided(
    editor: EditorModel,
    scorer: ScorerModel,
    x0: Sequence,
    tag: ControlTag,
    iters: int,
    k: int,
    temperature: float,
    rng: np.random.Generator,
) -> Trajectory:
    """Sample k editor candidates per step and keep the surrogate's pick."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    return _guided_loop(
        lambda x: sample_step(editor, x, tag, k, temperature, rng),
        scorer,
        x0,
        tag,
        iters,
        SCORER_GUIDED,
    )


def baseline_sampling(
    infill_model: InfillModel,
    spec: MaskSpec,
    mask: RegionMask,
    x0: Sequence,
    rng: np.random.Generator,
    n: int,
) -> tuple[Sequence, ...]:
    """n independent one-shot mask-and-infill perturbations of x0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = []
    for _ in range(n):
        positions = mask_positions(x0, spec, mask, rng)
        out.append(infill(infill_model, x0, positions, rng, temperature=1.0))
    return tuple(out)


def baseline_iter_sampling(
    infill_model: InfillModel,
    spec: MaskSpec,
    mask: RegionMask,
    scorer: ScorerModel,
    x0: Sequence,
    tag: ControlTag,
    iters: int,
    k: int,
    rng: np.random.Generator,
) -> Trajectory:
    """Scorer-guided loop with undirected mask-and-infill proposals."""
    if iters < 1:
        raise ValueError("iters must be >= 1")

    def propose(x: Sequence) -> list[Sequence]:
        return [
            infill(infill_model, x, mask_positions(x, spec, mask, rng), rng, temperature=1.0)
            for _ in range(k)
        ]

    return _guided_loop(propose, scorer, x0, tag, iters, SCORER_GUIDED)


# ---------------------------------------------------------------------------
# score-conditioned baseline


@dataclass(frozen=True, eq=False)
class ScoreConditionedModel:
    """Edit tables keyed by equal-width bins of the training targets' scores.

    Conditioning on a requested score picks the bin containing it; requests
    outside the seen range clamp to the nearest bin, which is exactly the
    unseen-condition failure mode this baseline exists to demonstrate.
    """

    bin_edges: np.ndarray
    tables: tuple[EditTables, ...]
    mask: RegionMask
    smoothing: float
    max_edits: int

    def __post_init__(self) -> None:
        self.bin_edges.setflags(write=False)
        if len(self.tables) != len(self.bin_edges) - 1:
            raise ValueError("need one table per bin")
        if self.max_edits > len(self.mask.mutable_positions):
            raise ValueError("max_edits cannot exceed the number of mutable positions")

    @property
    def n_bins(self) -> int:
        return len(self.tables)


def fit_score_conditioned(
    pairs: PySequence[EditPair],
    n_bins: int,
    smoothing: float,
    max_edits: int,
    mask: RegionMask,
) -> ScoreConditionedModel:
    """Same factorized model as the editor, keyed by target-score bin.

    Bins are equal-width over the range of target scores in the pairs; empty
    bins fall back to pure smoothing (uniform tables).
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if not pairs:
        raise ValueError("no training pairs")
    length = len(pairs[0].source.tokens)
    size = max(max(max(p.source.tokens), max(p.target.tokens)) for p in pairs) + 1
    targets = np.array([p.target_score for p in pairs])
    lo, hi = float(targets.min()), float(targets.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = lo + (hi - lo) * np.arange(n_bins + 1) / n_bins
    idx = np.clip(((targets - lo) / (hi - lo) * n_bins).astype(int), 0, n_bins - 1)
    tables = []
    for b in range(n_bins):
        members = [p for p, i in zip(pairs, idx) if i == b]
        pc, sc, cc = accumulate_counts(
            [p.source for p in members],
            [p.target for p in members],
            length,
            size,
            max_edits,
            mask,
        )
        tables.append(EditTables(pc, sc, cc, mask=mask, smoothing=smoothing))
    return ScoreConditionedModel(
        bin_edges=edges,
        tables=tuple(tables),
        mask=mask,
        smoothing=smoothing,
        max_edits=max_edits,
    )


def target_bin(model: ScoreConditionedModel, value: float) -> int:
    """Bin containing the requested score, clamped to the seen range."""
    lo, hi = float(model.bin_edges[0]), float(model.bin_edges[-1])
    if value <= lo:
        return 0
    if value >= hi:
        return model.n_bins - 1
    return min(int((value - lo) / (hi - lo) * model.n_bins), model.n_bins - 1)


def score_conditioned_step(
    model: ScoreConditionedModel,
    x: Sequence,
    value: float,
    k: int,
    temperature: float,
    rng: np.random.Generator,
) -> list[Sequence]:
    """k one-shot candidates conditioned on the (clamped) requested score."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    tables = model.tables[target_bin(model, value)]
    return [sample_one(tables, x, temperature, rng) for _ in range(k)]


def save_score_conditioned(model: ScoreConditionedModel, path: str, meta: dict | None = None) -> None:
    import json

    doc = {
        "format": "ice-score-conditioned",
        "version": 1,
        "smoothing": model.smoothing,
        "max_edits": model.max_edits,
        "mutable": [bool(m) for m in model.mask.mutable],
        "bin_edges": model.bin_edges.tolist(),
        "bins": [
            {
                "position_counts": t.position_counts.tolist(),
                "subst_counts": t.subst_counts.tolist(),
                "edit_count_counts": t.edit_count_counts.tolist(),
            }
            for t in model.tables
        ],
    }
    if meta:
        doc.update(meta)
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_score_conditioned(path: str) -> ScoreConditionedModel:
    import json

    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != "ice-score-conditioned":
        raise ValueError(f"{path} is not a score-conditioned model file")
    mask = RegionMask(tuple(bool(m) for m in doc["mutable"]))
    smoothing = float(doc["smoothing"])
    tables = tuple(
        EditTables(
            position_counts=np.array(b["position_counts"], dtype=np.float64),
            subst_counts=np.array(b["subst_counts"], dtype=np.float64),
            edit_count_counts=np.array(b["edit_count_counts"], dtype=np.float64),
            mask=mask,
            smoothing=smoothing,
        )
        for b in doc["bins"]
    )
    return ScoreConditionedModel(
        bin_edges=np.array(doc["bin_edges"], dtype=np.float64),
        tables=tables,
        mask=mask,
        smoothing=smoothing,
        max_edits=int(doc["max_edits"]),
    )


# ---------------------------------------------------------------------------
# trajectory persistence
#
# Trajectory files are tab-separated with one line per step:
#   start_id  k  sequence  f_s  oracle_z
# Inference writes oracle_z as NA; the evaluation stage rewrites the file
# with oracle values filled in. Recorded beams go to a sibling file with
#   start_id  k  sequence
# lines so the main file keeps its fixed five-column layout.


def write_trajectories(
    path: str,
    trajectories: PySequence[Trajectory],
    alphabet: Alphabet,
    scorer: ScorerModel | None = None,
    oracle_fn: Callable[[Sequence], float] | None = None,
    comments: PySequence[str] = (),
) -> None:
    with open(path, "w") as f:
        for c in comments:
            f.write(f"# {c}\n")
        for sid, traj in enumerate(trajectories):
            for step in traj.steps:
                score = step.score
                if score is None and scorer is not None:
                    score = float(predict_tokens(scorer, np.array([step.seq.tokens]))[0])
                score_txt = "NA" if score is None else repr(score)
                z_txt = "NA" if oracle_fn is None else repr(oracle_fn(step.seq))
                f.write(f"{sid}\t{step.k}\t{seq_to_text(step.seq, alphabet)}\t{score_txt}\t{z_txt}\n")


def read_trajectories(
    path: str,
    alphabet: Alphabet,
    tag: ControlTag,
    mode: str,
    beams_path: str | None = None,
) -> tuple[Trajectory, ...]:
    beams: dict[tuple[int, int], list[Sequence]] = {}
    if beams_path is not None:
        with open(beams_path) as f:
            for line in f:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                sid, k, text = line.split("\t")
                beams.setdefault((int(sid), int(k)), []).append(seq_from_text(text, alphabet))
    rows: dict[int, list[TrajectoryStep]] = {}
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            sid_s, k_s, text, score_s, _z = line.split("\t")
            sid, k = int(sid_s), int(k_s)
            score = None if score_s == "NA" else float(score_s)
            beam = tuple(beams.get((sid, k), ()))
            rows.setdefault(sid, []).append(TrajectoryStep(k, seq_from_text(text, alphabet), score, beam))
    out = []
    for sid in sorted(rows):
        steps = sorted(rows[sid], key=lambda s: s.k)
        out.append(Trajectory(start=steps[0].seq, tag=tag, mode=mode, steps=tuple(steps)))
    return tuple(out)


def write_beams(path: str, trajectories: PySequence[Trajectory], alphabet: Alphabet, comments: PySequence[str] = ()) -> None:
    with open(path, "w") as f:
        for c in comments:
            f.write(f"# {c}\n")
        for sid, traj in enumerate(trajectories):
            for step in traj.steps:
                for member in step.beam:
                    f.write(f"{sid}\t{step.k}\t{seq_to_text(member, alphabet)}\n")


def fill_oracle_column(path: str, alphabet: Alphabet, oracle_fn: Callable[[Sequence], float]) -> None:
    """Rewrite a trajectory file with the oracle column computed."""
    lines_out = []
    with open(path) as f:
        for line in f:
            stripped = line.rstrip("\n")
            if not stripped or stripped.startswith("#"):
                lines_out.append(stripped)
                continue
            sid, k, text, score, _z = stripped.split("\t")
            z = oracle_fn(seq_from_text(text, alphabet))
            lines_out.append(f"{sid}\t{k}\t{text}\t{score}\t{z!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines_out))
        f.write("\n")
