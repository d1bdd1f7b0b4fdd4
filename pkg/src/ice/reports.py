"""Quantitative reports over generated candidates and trajectories.

Every report is a pure aggregation over persisted artifacts (candidates,
trajectories, landscape), so report numbers are recomputable bit-identically
from disk. Success is always strict: a candidate exactly at the target value
counts as a failure.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from typing import Sequence as PySequence

import numpy as np

from .landscape import Landscape, oracle_scores
from .refine import Direction, EvalTarget, Trajectory
from .scorer import ScorerModel, predict_tokens
from .seqs import Sequence, levenshtein


def _oracle_batch(landscape: Landscape, seqs: PySequence[Sequence]) -> np.ndarray:
    return oracle_scores(landscape, np.array([s.tokens for s in seqs]))


def success_rates(
    candidates: PySequence[Sequence],
    landscape: Landscape,
    targets: PySequence[EvalTarget],
) -> list[tuple[EvalTarget, float]]:
    """Per target: the fraction of candidates strictly beyond it."""
    if not candidates:
        raise ValueError("no candidates")
    z = _oracle_batch(landscape, candidates)
    out = []
    for t in targets:
        hits = (z > t.value) if t.direction is Direction.ABOVE else (z < t.value)
        out.append((t, float(hits.sum()) / len(candidates)))
    return out


def topk_average(
    candidates: PySequence[Sequence],
    landscape: Landscape,
    ks: PySequence[int],
    direction: Direction = Direction.ABOVE,
) -> dict[int, float]:
    """Mean oracle score of the k best candidates in the improvement
    direction; ties order by sequence lexicographically."""
    if not candidates:
        raise ValueError("no candidates")
    z = _oracle_batch(landscape, candidates)
    sign = -1.0 if direction is Direction.ABOVE else 1.0
    order = sorted(range(len(candidates)), key=lambda i: (sign * z[i], candidates[i].tokens))
    out = {}
    for k in ks:
        if not 1 <= k <= len(candidates):
            raise ValueError(f"k={k} out of range for {len(candidates)} candidates")
        out[k] = float(np.mean(z[order[:k]]))
    return out


def _uniform_iters(trajectories: PySequence[Trajectory]) -> int:
    if not trajectories:
        raise ValueError("no trajectories")
    iters = trajectories[0].iterations
    if any(t.iterations != iters for t in trajectories):
        raise ValueError("ragged trajectories: iteration counts differ")
    return iters


def iteration_histogram(
    trajectories: PySequence[Trajectory],
    landscape: Landscape,
    bin_width: float = 0.25,
) -> dict[int, Counter]:
    """Per iteration: histogram of oracle-score deltas from each start.

    Steps that recorded a beam contribute every beam member; steps without
    one contribute the chosen sequence. Bins are ``floor(delta / bin_width)``.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    iters = _uniform_iters(trajectories)
    base = _oracle_batch(landscape, [t.start for t in trajectories])
    hist: dict[int, Counter] = {k: Counter() for k in range(iters + 1)}
    for t, z0 in zip(trajectories, base):
        for step in t.steps:
            members = step.beam if step.beam else (step.seq,)
            deltas = _oracle_batch(landscape, members) - z0
            for d in deltas:
                hist[step.k][math.floor(d / bin_width)] += 1
    return hist


def diversity_profile(
    candidates: PySequence[Sequence],
    reference: Sequence,
    landscape: Landscape,
    threshold: EvalTarget,
) -> dict[int, tuple[float, float]]:
    """Bucket candidates by edit distance to the reference; per bucket report
    (population fraction, success rate against the threshold)."""
    if not candidates:
        raise ValueError("no candidates")
    z = _oracle_batch(landscape, candidates)
    buckets: dict[int, list[int]] = {}
    for i, c in enumerate(candidates):
        buckets.setdefault(levenshtein(c, reference), []).append(i)
    out = {}
    for dist in sorted(buckets):
        idx = buckets[dist]
        wins = sum(1 for i in idx if threshold.beats(float(z[i])))
        out[dist] = (len(idx) / len(candidates), wins / len(idx))
    return out


def plateau_table(trajectories: PySequence[Trajectory], scorer: ScorerModel) -> list[float]:
    """Mean surrogate score of the chosen sequence at each iteration."""
    iters = _uniform_iters(trajectories)
    means = []
    for k in range(iters + 1):
        toks = np.array([t.steps[k].seq.tokens for t in trajectories])
        means.append(float(predict_tokens(scorer, toks).mean()))
    return means


def hyperparam_sweep(
    editor,
    scorer: ScorerModel,
    landscape: Landscape,
    starts: PySequence[Sequence],
    targets: PySequence[EvalTarget],
    tag,
    beam_widths: PySequence[int],
    top_ks: PySequence[int],
    iters_list: PySequence[int],
    temperature: float,
    master_seed: int,
) -> tuple[list[str], list[list]]:
    """One inference run per grid cell with seeds derived from the cell, so
    rows are independent of execution order. Returns (header, rows)."""
    from .refine import run_scorer_free, run_scorer_guided
    from .seeds import derive_seed, make_rng

    if not (len(beam_widths) and len(top_ks) and len(iters_list)):
        raise ValueError("sweep grid must be non-empty")
    header = ["mode", "beam_width", "top_k", "iters"] + [
        f"rate_{t.direction.value}_{t.value!r}" for t in targets
    ]
    rows: list[list] = []
    for iters in iters_list:
        for bw in beam_widths:
            finals = [run_scorer_free(editor, x0, tag, iters, bw).final for x0 in starts]
            rates = success_rates(finals, landscape, targets)
            rows.append(["scorer-free", bw, "", iters] + [r for _, r in rates])
        for k in top_ks:
            finals = []
            for i, x0 in enumerate(starts):
                rng = make_rng(derive_seed(master_seed, f"sweep/{iters}/{k}", i))
                finals.append(run_scorer_guided(editor, scorer, x0, tag, iters, k, temperature, rng).final)
            rates = success_rates(finals, landscape, targets)
            rows.append(["scorer-guided", "", k, iters] + [r for _, r in rates])
    return header, rows


# ---------------------------------------------------------------------------
# CSV writers (deterministic: fixed orderings, repr-formatted floats)


def _write_csv(path: str, header: list[str], rows: list[list], comments: PySequence[str] = ()) -> None:
    with open(path, "w", newline="") as f:
        for c in comments:
            f.write(f"# {c}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_success_csv(
    path: str,
    per_method: dict[str, list[tuple[EvalTarget, float]]],
    comments: PySequence[str] = (),
) -> None:
    rows = []
    for method, entries in per_method.items():
        for target, rate in entries:
            rows.append([method, target.value, target.direction.value, target.region.value, rate])
    _write_csv(path, ["method", "target", "direction", "region", "success_rate"], rows, comments)


def write_topk_csv(path: str, per_method: dict[str, dict[int, float]], comments: PySequence[str] = ()) -> None:
    rows = []
    for method, table in per_method.items():
        for k in sorted(table, reverse=True):
            rows.append([method, k, table[k]])
    _write_csv(path, ["method", "k", "mean_oracle_score"], rows, comments)


def write_histogram_csv(
    path: str,
    per_method: dict[str, dict[int, Counter]],
    bin_width: float,
    comments: PySequence[str] = (),
) -> None:
    rows = []
    for method, hist in per_method.items():
        for k in sorted(hist):
            for b in sorted(hist[k]):
                rows.append([method, k, b * bin_width, (b + 1) * bin_width, hist[k][b]])
    _write_csv(path, ["method", "iteration", "bin_lo", "bin_hi", "count"], rows, comments)


def write_diversity_csv(
    path: str,
    per_method: dict[str, dict[int, tuple[float, float]]],
    comments: PySequence[str] = (),
) -> None:
    rows = []
    for method, prof in per_method.items():
        for dist in sorted(prof):
            frac, rate = prof[dist]
            rows.append([method, dist, frac, rate])
    _write_csv(path, ["method", "levenshtein", "fraction", "success_rate"], rows, comments)


def write_plateau_csv(path: str, per_method: dict[str, list[float]], comments: PySequence[str] = ()) -> None:
    rows = []
    for method, means in per_method.items():
        for k, v in enumerate(means):
            rows.append([method, k, v])
    _write_csv(path, ["method", "iteration", "mean_scorer_value"], rows, comments)


def write_sweep_csv(path: str, rows: list[list], header: list[str], comments: PySequence[str] = ()) -> None:
    _write_csv(path, header, rows, comments)
