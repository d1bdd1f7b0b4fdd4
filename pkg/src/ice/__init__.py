"""Iterative controlled extrapolation over fixed-length token sequences.

A local edit model is trained on scorer-labeled masked perturbations of
training-region sequences and then applied iteratively to push an attribute
value beyond the range any component was trained on. Exact synthetic
landscapes serve as the evaluation oracle, so every reported number can be
checked against brute force at small scale.
"""

from .config import CampaignConfig, default_config, load_config, save_config, tiny_config
from .landscape import (
    DatasetSplit,
    LabeledExample,
    Landscape,
    Region,
    build_supervised_split,
    make_landscape,
    oracle_score,
    sample_corpus,
    spearman,
)
from .pairs import ControlTag, EditPair, label, make_pairs
from .proposer import InfillModel, MaskSpec, fit_infill, infill, mask_positions
from .editor import EditorModel, beam_step, candidate_logprob, fit_editor, sample_step
from .refine import (
    Direction,
    EvalTarget,
    TargetRegion,
    Trajectory,
    baseline_iter_sampling,
    baseline_sampling,
    fit_score_conditioned,
    run_scorer_free,
    run_scorer_guided,
)
from .scorer import ScorerModel, correlation_report, featurize, fit_ridge, predict
from .seeds import derive_seed, make_rng
from .seqs import Alphabet, Edit, RegionMask, Sequence, apply_edits, levenshtein, validate_sequence

__version__ = "0.1.0"
