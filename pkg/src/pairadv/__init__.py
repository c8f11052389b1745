"""Pairwise-preference policy optimization on toy sequence tasks.

Rule-based judge rewards, group-relative advantages, the pairwise
preference-strength advantage estimator, warm-up data curation, and
simulated or remote preference judges.
"""

from .advantage import (
    AdvConfig,
    PreferenceMatrix,
    build_preference_matrix,
    equivalence_oracle,
    grpo_advantage,
    pairwise_advantage,
)
from .curation import CurationConfig, Strategy, build_warmup_dataset, select_warmup_trajectory
from .judge import SimJudgeConfig, SimulatedJudge, VoteConfig, majority_vote, sim_judge
from .model import (
    Judgment,
    LabelKind,
    PairAdvError,
    PreferenceExample,
    PreferenceLabel,
    TrajectoryRecord,
    label_sign,
    validate_example,
)
from .rewards import binary_reward, multiclass_reward
from .template import format_answer, parse_judgment, render_prompt

__all__ = [
    "AdvConfig", "PreferenceMatrix", "build_preference_matrix", "equivalence_oracle",
    "grpo_advantage", "pairwise_advantage", "CurationConfig", "Strategy",
    "build_warmup_dataset", "select_warmup_trajectory", "SimJudgeConfig", "SimulatedJudge",
    "VoteConfig", "majority_vote", "sim_judge", "Judgment", "LabelKind", "PairAdvError",
    "PreferenceExample", "PreferenceLabel", "TrajectoryRecord", "label_sign",
    "validate_example", "binary_reward", "multiclass_reward", "format_answer",
    "parse_judgment", "render_prompt",
]

__version__ = "0.1.0"
