"""Campaign orchestration: stage pipeline over an on-disk artifact tree.

Each stage reads its inputs from the output directory and persists its
results, so the per-stage CLI subcommands and ``run-all`` follow the same
code path. Every artifact embeds the campaign config hash (JSON field or
leading ``# config_hash=...`` comment), and evaluation refuses to aggregate
artifacts with mixed hashes. Rerunning any stage with the same config
reproduces its artifacts byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import reports
from .config import CampaignConfig, config_hash, save_config, to_dict
from .editor import EditorModel, fit_editor, load_editor, save_editor
from .landscape import (
    DatasetSplit,
    LabeledExample,
    Landscape,
    Region,
    build_supervised_split,
    landscape_checksum,
    load_landscape,
    make_landscape,
    oracle_score,
    oracle_scores,
    read_labeled,
    read_sequences,
    sample_corpus,
    save_landscape,
    spearman,
    write_labeled,
    write_sequences,
)
from .pairs import ControlTag, make_pairs, read_pairs, write_pairs
from .proposer import MaskSpec, fit_infill, load_infill, save_infill
from .refine import (
    Direction,
    EvalTarget,
    TargetRegion,
    Trajectory,
    baseline_iter_sampling,
    baseline_sampling,
    fill_oracle_column,
    fit_score_conditioned,
    load_score_conditioned,
    read_trajectories,
    run_scorer_free,
    run_scorer_guided,
    save_score_conditioned,
    score_conditioned_step,
    write_beams,
    write_trajectories,
)
from .scorer import correlation_report, fit_ridge, load_scorer, predict_tokens, save_scorer
from .seeds import derive_seed, make_rng
from .seqs import Alphabet, RegionMask, Sequence, seq_from_text, seq_to_text

METHODS = ("ice-scorer-free", "ice-scorer-guided", "sampling", "iter-sampling", "score-cond")
TRAJECTORY_METHODS = ("ice-scorer-free", "ice-scorer-guided", "iter-sampling")

STAGES = (
    "gen-landscape",
    "gen-data",
    "train-scorer",
    "gen-pairs",
    "train-editor",
    "infer",
    "evaluate",
)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _staged(name: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass(frozen=True)
class Paths:
    out: Path

    @property
    def config(self) -> Path:
        return self.out / "config.json"

    @property
    def landscape(self) -> Path:
        return self.out / "landscape.json"

    @property
    def reference(self) -> Path:
        return self.out / "reference.txt"

    @property
    def corpus(self) -> Path:
        return self.out / "corpus.txt"

    @property
    def sup_train(self) -> Path:
        return self.out / "sup_train.tsv"

    @property
    def heldout(self) -> Path:
        return self.out / "heldout.tsv"

    @property
    def split_meta(self) -> Path:
        return self.out / "split_meta.json"

    @property
    def targets(self) -> Path:
        return self.out / "targets.json"

    @property
    def starts(self) -> Path:
        return self.out / "starts.txt"

    @property
    def scorer(self) -> Path:
        return self.out / "scorer.json"

    @property
    def scorer_report(self) -> Path:
        return self.out / "scorer_report.csv"

    @property
    def infill(self) -> Path:
        return self.out / "infill.json"

    @property
    def pairs(self) -> Path:
        return self.out / "pairs.tsv"

    @property
    def pairgen_meta(self) -> Path:
        return self.out / "pairgen_meta.json"

    @property
    def editor(self) -> Path:
        return self.out / "editor.json"

    @property
    def score_cond(self) -> Path:
        return self.out / "score_cond.json"

    @property
    def summary(self) -> Path:
        return self.out / "summary.json"

    @property
    def sweep(self) -> Path:
        return self.out / "sweep.csv"

    def candidates(self, method: str) -> Path:
        return self.out / f"candidates_{method}.txt"

    def trajectories(self, method: str) -> Path:
        return self.out / f"trajectories_{method}.tsv"

    def beams(self, method: str) -> Path:
        return self.out / f"beams_{method}.tsv"

    def report(self, name: str) -> Path:
        return self.out / "reports" / name


def _ensure_out(cfg: CampaignConfig, out: Path) -> None:
    """Create the tree and pin the config; refuse a mismatched existing one."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "reports").mkdir(exist_ok=True)
    p = Paths(out)
    if p.config.exists():
        from .config import load_config

        existing = load_config(str(p.config))
        if config_hash(existing) != config_hash(cfg):
            raise ValueError(
                f"output directory {out} was produced with a different config "
                f"(hash {config_hash(existing)[:12]} != {config_hash(cfg)[:12]})"
            )
    else:
        save_config(cfg, str(p.config))


def _alphabet(cfg: CampaignConfig) -> Alphabet:
    return Alphabet.of_size(cfg.landscape.alphabet_size)


def _mask(cfg: CampaignConfig) -> RegionMask:
    return RegionMask.with_immutable_span(
        cfg.landscape.length, cfg.data.immutable_start, cfg.data.immutable_stop
    )


def _tag(cfg: CampaignConfig) -> ControlTag:
    return ControlTag.INC if cfg.inference.direction == "above" else ControlTag.DEC


def _hash_comment(cfg: CampaignConfig) -> list[str]:
    return [f"config_hash={config_hash(cfg)}"]


def _read_hash_comment(path: Path) -> str | None:
    with open(path) as f:
        for line in f:
            if line.startswith("# config_hash="):
                return line.strip().split("=", 1)[1]
            if not line.startswith("#"):
                break
    return None


def _json_hash(path: Path) -> str | None:
    with open(path) as f:
        return json.load(f).get("config_hash")


# ---------------------------------------------------------------------------
# stages


def stage_gen_landscape(cfg: CampaignConfig, out: Path) -> Landscape:
    _ensure_out(cfg, out)
    ls_cfg = cfg.landscape
    ls = make_landscape(
        length=ls_cfg.length,
        alphabet_size=ls_cfg.alphabet_size,
        n_pairs=ls_cfg.n_epistatic_pairs,
        additive_scale=ls_cfg.additive_scale,
        epistatic_scale=ls_cfg.epistatic_scale,
        seed=derive_seed(cfg.master_seed, "landscape"),
    )
    save_landscape(
        ls,
        str(Paths(out).landscape),
        meta={"config_hash": config_hash(cfg), "checksum": landscape_checksum(ls)},
    )
    return ls


def _resolve_targets(cfg: CampaignConfig, region: Region, corpus_std: float) -> list[EvalTarget]:
    out = []
    for spec in cfg.targets:
        if spec.kind == "absolute":
            value = spec.value
        else:
            anchor = region.high if spec.anchor == "alpha_plus" else region.low
            value = anchor + spec.std_offset * corpus_std
        direction = Direction(spec.direction)
        kind = TargetRegion.TRAIN if region.contains(value) else TargetRegion.EXTRAPOLATION
        target = EvalTarget(value=value, direction=direction, region=kind)
        target.check_consistent(region)
        out.append(target)
    return out


def stage_gen_data(cfg: CampaignConfig, out: Path) -> None:
    _ensure_out(cfg, out)
    p = Paths(out)
    ls = load_landscape(str(p.landscape))
    alphabet = _alphabet(cfg)
    mask = _mask(cfg)
    comments = _hash_comment(cfg)

    ref_rng = make_rng(derive_seed(cfg.master_seed, "reference"))
    reference = Sequence(tuple(int(t) for t in ref_rng.integers(0, ls.alphabet_size, size=ls.length)))
    write_sequences(str(p.reference), [reference], alphabet, comments)

    corpus = sample_corpus(ls, cfg.data.corpus_size, derive_seed(cfg.master_seed, "corpus"), mask, reference)
    write_sequences(str(p.corpus), corpus, alphabet, comments)

    scores = oracle_scores(ls, np.array([s.tokens for s in corpus]))
    corpus_std = float(scores.std())
    region = Region(
        low=float(np.percentile(scores, cfg.data.region_low_pct)),
        high=float(np.percentile(scores, cfg.data.region_high_pct)),
    )
    split = build_supervised_split(
        corpus,
        ls,
        region,
        cfg.data.sup_size,
        label_noise_std=cfg.data.label_noise_std,
        noise_seed=derive_seed(cfg.master_seed, "label-noise"),
    )
    write_labeled(str(p.sup_train), split.sup_train, alphabet, comments)

    heldout_seqs = sample_corpus(ls, cfg.data.heldout_size, derive_seed(cfg.master_seed, "heldout"), mask, reference)
    heldout_scores = oracle_scores(ls, np.array([s.tokens for s in heldout_seqs]))
    heldout = [LabeledExample(s, float(z)) for s, z in zip(heldout_seqs, heldout_scores)]
    write_labeled(str(p.heldout), heldout, alphabet, comments)

    start_rng = make_rng(derive_seed(cfg.master_seed, "starts"))
    if cfg.inference.n_starts > len(split.sup_train):
        raise ValueError("n_starts exceeds supervised split size")
    picks = start_rng.choice(len(split.sup_train), size=cfg.inference.n_starts, replace=False)
    starts = [split.sup_train[int(i)].seq for i in picks]
    write_sequences(str(p.starts), starts, alphabet, comments)

    targets = _resolve_targets(cfg, region, corpus_std)
    with open(p.targets, "w") as f:
        json.dump(
            {
                "config_hash": config_hash(cfg),
                "targets": [
                    {"value": t.value, "direction": t.direction.value, "region": t.region.value}
                    for t in targets
                ],
            },
            f,
            indent=2,
        )
        f.write("\n")

    with open(p.split_meta, "w") as f:
        json.dump(
            {
                "config_hash": config_hash(cfg),
                "region_low": region.low,
                "region_high": region.high,
                "corpus_std": corpus_std,
                "corpus_mean": float(scores.mean()),
                "corpus_size": len(corpus),
                "sup_size": len(split.sup_train),
            },
            f,
            indent=2,
        )
        f.write("\n")


def _load_split(cfg: CampaignConfig, p: Paths) -> tuple[DatasetSplit, dict]:
    alphabet = _alphabet(cfg)
    with open(p.split_meta) as f:
        meta = json.load(f)
    region = Region(meta["region_low"], meta["region_high"])
    corpus = read_sequences(str(p.corpus), alphabet)
    sup = read_labeled(str(p.sup_train), alphabet)
    return DatasetSplit(unsup=corpus, sup_train=sup, region=region), meta


def _load_targets(p: Paths) -> list[EvalTarget]:
    with open(p.targets) as f:
        doc = json.load(f)
    return [
        EvalTarget(
            value=float(t["value"]),
            direction=Direction(t["direction"]),
            region=TargetRegion(t["region"]),
        )
        for t in doc["targets"]
    ]


def stage_train_scorer(cfg: CampaignConfig, out: Path) -> None:
    _ensure_out(cfg, out)
    p = Paths(out)
    alphabet = _alphabet(cfg)
    split, _ = _load_split(cfg, p)
    model = fit_ridge(split.sup_train, cfg.scorer.ridge_lambda, alphabet.size)
    save_scorer(model, str(p.scorer), meta={"config_hash": config_hash(cfg)})

    heldout = read_labeled(str(p.heldout), alphabet)
    held_in = [ex for ex in heldout if split.region.contains(ex.z)]
    held_ext = [ex for ex in heldout if not split.region.contains(ex.z)]
    train_corr, held_in_corr = correlation_report(model, split, held_in)
    _, held_ext_corr = correlation_report(model, split, held_ext)
    rows = [
        ["train", "NA" if train_corr is None else repr(train_corr)],
        ["heldout_in_region", "NA" if held_in_corr is None else repr(held_in_corr)],
        ["heldout_extrapolation", "NA" if held_ext_corr is None else repr(held_ext_corr)],
    ]
    with open(p.scorer_report, "w") as f:
        for c in _hash_comment(cfg):
            f.write(f"# {c}\n")
        f.write("dataset,spearman\n")
        for name, value in rows:
            f.write(f"{name},{value}\n")


def stage_gen_pairs(cfg: CampaignConfig, out: Path) -> None:
    _ensure_out(cfg, out)
    p = Paths(out)
    alphabet = _alphabet(cfg)
    mask = _mask(cfg)
    split, _ = _load_split(cfg, p)
    scorer = load_scorer(str(p.scorer))

    infill_model = fit_infill(
        split.unsup,
        smoothing=cfg.pairs.infill_smoothing,
        order=cfg.pairs.infill_order,
        alphabet_size=alphabet.size,
    )
    save_infill(infill_model, str(p.infill), meta={"config_hash": config_hash(cfg)})

    rng = make_rng(derive_seed(cfg.master_seed, "pairgen"))
    result = make_pairs(
        split,
        infill_model,
        cfg.mask,
        scorer,
        delta=cfg.pairs.delta,
        n_pairs=cfg.pairs.n_pairs,
        rng=rng,
        mask=mask,
    )
    write_pairs(str(p.pairs), result.pairs, alphabet, _hash_comment(cfg))
    with open(p.pairgen_meta, "w") as f:
        json.dump(
            {
                "config_hash": config_hash(cfg),
                "attempts": result.attempts,
                "accepted": result.accepted,
                "acceptance_rate": result.acceptance_rate,
            },
            f,
            indent=2,
        )
        f.write("\n")


def stage_train_editor(cfg: CampaignConfig, out: Path) -> None:
    _ensure_out(cfg, out)
    p = Paths(out)
    alphabet = _alphabet(cfg)
    mask = _mask(cfg)
    pairs = read_pairs(str(p.pairs), alphabet)
    editor = fit_editor(pairs, cfg.editor.smoothing, cfg.editor.max_edits, mask)
    save_editor(editor, str(p.editor), meta={"config_hash": config_hash(cfg)})
    score_cond = fit_score_conditioned(
        pairs, cfg.editor.score_bins, cfg.editor.smoothing, cfg.editor.max_edits, mask
    )
    save_score_conditioned(score_cond, str(p.score_cond), meta={"config_hash": config_hash(cfg)})


def _primary_target(targets: list[EvalTarget]) -> EvalTarget:
    for t in targets:
        if t.region is TargetRegion.EXTRAPOLATION:
            return t
    return targets[-1]


def stage_infer(
    cfg: CampaignConfig,
    out: Path,
    method: str,
    iters: int | None = None,
    beam_width: int | None = None,
    top_k: int | None = None,
    temperature: float | None = None,
    seed: int | None = None,
) -> None:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    _ensure_out(cfg, out)
    p = Paths(out)
    alphabet = _alphabet(cfg)
    mask = _mask(cfg)
    tag = _tag(cfg)
    iters = cfg.inference.iters if iters is None else iters
    beam_width = cfg.inference.beam_width if beam_width is None else beam_width
    top_k = cfg.inference.top_k if top_k is None else top_k
    temperature = cfg.inference.temperature if temperature is None else temperature
    master = cfg.master_seed if seed is None else seed

    starts = read_sequences(str(p.starts), alphabet)
    scorer = load_scorer(str(p.scorer))
    comments = _hash_comment(cfg) + [f"method={method}"]

    trajectories: list[Trajectory] = []
    candidates: list[Sequence] = []

    if method == "ice-scorer-free":
        editor = load_editor(str(p.editor))
        for x0 in starts:
            traj = run_scorer_free(editor, x0, tag, iters, beam_width)
            trajectories.append(traj)
            candidates.append(traj.final)
        write_beams(str(p.beams(method)), trajectories, alphabet, comments)
    elif method == "ice-scorer-guided":
        editor = load_editor(str(p.editor))
        for i, x0 in enumerate(starts):
            rng = make_rng(derive_seed(master, f"infer/{method}", i))
            traj = run_scorer_guided(editor, scorer, x0, tag, iters, top_k, temperature, rng)
            trajectories.append(traj)
            candidates.append(traj.final)
    elif method == "sampling":
        infill_model = load_infill(str(p.infill))
        for i, x0 in enumerate(starts):
            rng = make_rng(derive_seed(master, f"infer/{method}", i))
            candidates.append(baseline_sampling(infill_model, cfg.mask, mask, x0, rng, 1)[0])
    elif method == "iter-sampling":
        infill_model = load_infill(str(p.infill))
        for i, x0 in enumerate(starts):
            rng = make_rng(derive_seed(master, f"infer/{method}", i))
            traj = baseline_iter_sampling(
                infill_model, cfg.mask, mask, scorer, x0, tag, iters, top_k, rng
            )
            trajectories.append(traj)
            candidates.append(traj.final)
    else:  # score-cond
        model = load_score_conditioned(str(p.score_cond))
        z_star = _primary_target(_load_targets(p)).value
        for i, x0 in enumerate(starts):
            rng = make_rng(derive_seed(master, f"infer/{method}", i))
            candidates.append(score_conditioned_step(model, x0, z_star, 1, temperature, rng)[0])

    write_sequences(str(p.candidates(method)), candidates, alphabet, comments)
    if trajectories:
        write_trajectories(str(p.trajectories(method)), trajectories, alphabet, scorer=scorer, comments=comments)


def stage_evaluate(cfg: CampaignConfig, out: Path) -> dict:
    _ensure_out(cfg, out)
    p = Paths(out)
    alphabet = _alphabet(cfg)
    tag = _tag(cfg)
    expected_hash = config_hash(cfg)

    ls = load_landscape(str(p.landscape))
    targets = _load_targets(p)
    scorer = load_scorer(str(p.scorer))
    reference = read_sequences(str(p.reference), alphabet)[0]
    mask = _mask(cfg)

    # provenance check before touching any numbers
    artifact_files = [p.landscape, p.scorer, p.infill, p.editor, p.score_cond]
    hashes = {str(f): _json_hash(f) for f in artifact_files}
    for f in (
        [p.corpus, p.sup_train, p.heldout, p.starts, p.reference, p.pairs]
        + [p.candidates(m) for m in METHODS]
        + [p.trajectories(m) for m in TRAJECTORY_METHODS]
    ):
        hashes[str(f)] = _read_hash_comment(Path(f))
    bad = {f: h for f, h in hashes.items() if h != expected_hash}
    if bad:
        raise ValueError(f"mixed config hashes, refusing to aggregate: {sorted(bad)}")

    oracle_fn = lambda s: oracle_score(ls, s)
    for method in TRAJECTORY_METHODS:
        fill_oracle_column(str(p.trajectories(method)), alphabet, oracle_fn)

    method_candidates = {m: read_sequences(str(p.candidates(m)), alphabet) for m in METHODS}
    method_trajectories = {
        m: read_trajectories(
            str(p.trajectories(m)),
            alphabet,
            tag,
            "scorer-free" if m == "ice-scorer-free" else "scorer-guided",
            beams_path=str(p.beams(m)) if m == "ice-scorer-free" else None,
        )
        for m in TRAJECTORY_METHODS
    }

    # immutable-span conservation audit over every generated sequence
    violations = 0
    for seqs in method_candidates.values():
        for s in seqs:
            violations += any(s.tokens[i] != reference.tokens[i] for i in mask.immutable_positions)
    for trajs in method_trajectories.values():
        for t in trajs:
            for step in t.steps:
                for s in (step.seq,) + step.beam:
                    violations += any(
                        s.tokens[i] != t.start.tokens[i] for i in mask.immutable_positions
                    )

    comments = _hash_comment(cfg)
    success = {m: reports.success_rates(list(seqs), ls, targets) for m, seqs in method_candidates.items()}
    reports.write_success_csv(str(p.report("success_rates.csv")), success, comments)

    direction = Direction(cfg.inference.direction)
    topk = {}
    for m, seqs in method_candidates.items():
        ks = [len(seqs)] + [k for k in cfg.report.topk if k <= len(seqs)]
        topk[m] = reports.topk_average(list(seqs), ls, ks, direction)
    reports.write_topk_csv(str(p.report("topk.csv")), topk, comments)

    hists = {
        m: reports.iteration_histogram(list(trajs), ls, cfg.report.hist_bin_width)
        for m, trajs in method_trajectories.items()
    }
    reports.write_histogram_csv(str(p.report("iteration_hist.csv")), hists, cfg.report.hist_bin_width, comments)

    primary = _primary_target(targets)
    diversity = {
        m: reports.diversity_profile(list(seqs), reference, ls, primary)
        for m, seqs in method_candidates.items()
    }
    reports.write_diversity_csv(str(p.report("diversity.csv")), diversity, comments)

    plateau = {m: reports.plateau_table(list(trajs), scorer) for m, trajs in method_trajectories.items()}
    reports.write_plateau_csv(str(p.report("plateau.csv")), plateau, comments)

    result_sets = [
        {
            "name": m,
            "candidates": p.candidates(m).name,
            **({"trajectories": p.trajectories(m).name} if m in TRAJECTORY_METHODS else {}),
            **({"beams": p.beams(m).name} if m == "ice-scorer-free" else {}),
        }
        for m in METHODS
    ] + [{"name": "trajectories", "files": [p.trajectories(m).name for m in TRAJECTORY_METHODS]}]

    summary = {
        "schema_version": 1,
        "config_hash": expected_hash,
        "result_sets": result_sets,
        "reports": {
            "success_rates": "reports/success_rates.csv",
            "topk": "reports/topk.csv",
            "iteration_hist": "reports/iteration_hist.csv",
            "diversity": "reports/diversity.csv",
            "plateau": "reports/plateau.csv",
        },
        "immutable_violations": int(violations),
    }
    summary["summary_hash"] = _tree_hash(out, exclude={p.summary.name})
    with open(p.summary, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return summary


def _tree_hash(out: Path, exclude: set[str]) -> str:
    """SHA-256 over (relative path, file hash) pairs, sorted by path."""
    h = hashlib.sha256()
    for path in sorted(q for q in out.rglob("*") if q.is_file() and q.name not in exclude):
        h.update(str(path.relative_to(out)).encode())
        h.update(hashlib.sha256(path.read_bytes()).digest())
    return h.hexdigest()


def stage_sweep(cfg: CampaignConfig, out: Path) -> None:
    _ensure_out(cfg, out)
    p = Paths(out)
    alphabet = _alphabet(cfg)
    ls = load_landscape(str(p.landscape))
    editor = load_editor(str(p.editor))
    scorer = load_scorer(str(p.scorer))
    targets = _load_targets(p)
    starts = read_sequences(str(p.starts), alphabet)[: cfg.sweep.n_starts]
    header, rows = reports.hyperparam_sweep(
        editor,
        scorer,
        ls,
        starts,
        targets,
        _tag(cfg),
        cfg.sweep.beam_widths,
        cfg.sweep.top_ks,
        cfg.sweep.iters,
        cfg.inference.temperature,
        cfg.master_seed,
    )
    reports.write_sweep_csv(str(p.sweep), rows, header, _hash_comment(cfg))


def run_all(cfg: CampaignConfig, out: Path | str | None = None, workers: int = 1) -> dict:
    """Run every stage in order; returns the summary dict.

    ``workers`` is validated but execution is sequential: all per-start work
    uses seeds derived from (method, start index), so outputs are identical
    for any worker count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    out = Path(out if out is not None else cfg.out_dir)
    _staged("gen-landscape", stage_gen_landscape, cfg, out)
    _staged("gen-data", stage_gen_data, cfg, out)
    _staged("train-scorer", stage_train_scorer, cfg, out)
    _staged("gen-pairs", stage_gen_pairs, cfg, out)
    _staged("train-editor", stage_train_editor, cfg, out)
    for method in METHODS:
        _staged("infer", stage_infer, cfg, out, method)
    return _staged("evaluate", stage_evaluate, cfg, out)
