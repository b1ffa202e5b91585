"""procrew: structured lab-procedure DSL, step-wise verifiable rewards,
evaluation metrics, and supporting tooling."""

__version__ = "0.1.0"

from .schema import (  # noqa: F401
    ActionType,
    ParamSchema,
    SchemaConfig,
    classify_param,
    load_schema_config,
    schema_lookup,
)
from .grammar import (  # noqa: F401
    Action,
    AnswerFormatConfig,
    AnswerFormatError,
    ChemicalLiteral,
    MixtureRef,
    Procedure,
    ProcedureSyntaxError,
    QuantityLiteral,
    RawModelOutput,
    extract_answer,
    parse_procedure,
    render_procedure,
    split_actions,
)
from .validation import ExecutionTrace, ValidationReport, execute, validate, validate_text  # noqa: F401
from .rewards import (  # noqa: F401
    BatchRewardResult,
    RewardConfig,
    StepRewardBreakdown,
    batch_reward,
    distribution_modifiers,
    exceeding_penalties,
    grpo_advantages,
    score_action,
)
from .metrics import MetricReport, bleu, evaluate_corpus, lev_similarity, lev_threshold_fraction, meteor, rouge, seq_o  # noqa: F401
from .skeleton import FactualSkeleton, assign_roles, build_skeleton, split_phases  # noqa: F401
from .retrieval import BitFingerprint, FingerprintIndex, build_index, fingerprint, nearest, tanimoto  # noqa: F401
from .dataset import Dataset, DatasetRecord, QualityScores, load_jsonl, quality_gate, time_split  # noqa: F401
from .judge import JudgeScores, RubricConfig, build_judge_prompt, call_judge, corrupt, parse_judge_scores  # noqa: F401
