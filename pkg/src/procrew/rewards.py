"""Step-wise verifiable rewards over batches of model outputs.

Per predicted action: a format reward (-1 on malformed or schema-breaking
text, short-circuiting the rest), a type reward (1 when the action type
matches the reference, else 0 and short-circuit), and necessary/optional
parameter rewards (mean per-parameter match quality within each group,
each in [0, 1]). The per-step accuracy maximum is 3.0.

Two batch-level adjustments follow: an adaptive penalty for steps predicted
beyond the reference length (sized so the batch-average reward at that step
is zero), and a distribution modifier rewarding under-predicted action types
past a threshold theta. Group-relative advantages for outcome-based policy
optimization are provided as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .grammar import (
    Action,
    AnswerFormatConfig,
    AnswerFormatError,
    ChemicalLiteral,
    DEFAULT_ANSWER_FORMAT,
    MixtureRef,
    Procedure,
    ProcedureSyntaxError,
    QuantityLiteral,
    RawModelOutput,
    extract_answer,
    parse_action_text,
    split_actions,
)
from .schema import DEFAULT_SCHEMA, ParamKind, SchemaConfig
from .validation import kind_ok

TAG_INVALID = "invalid"
TAG_EXCEEDING = "exceeding"

GRPO_EPS = 1e-8

MODE_MAIN_TEXT = "main_text"
MODE_ALGORITHM1 = "algorithm1"

AGG_MEAN = "mean_over_gt_length"
AGG_SUM = "sum"


class LengthMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class RewardConfig:
    theta: float = 0.2
    exceeding_mode: str = MODE_MAIN_TEXT
    quantity_rel_tol: float = 0.01
    whole_response_format_penalty: float = -2.0
    sequence_aggregation: str = AGG_MEAN
    answer_format: AnswerFormatConfig = DEFAULT_ANSWER_FORMAT

    def __post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise ValueError("theta must be in [0, 1)")
        if self.quantity_rel_tol <= 0:
            raise ValueError("quantity_rel_tol must be positive")
        if self.exceeding_mode not in (MODE_MAIN_TEXT, MODE_ALGORITHM1):
            raise ValueError(f"unknown exceeding_mode {self.exceeding_mode!r}")
        if self.sequence_aggregation not in (AGG_MEAN, AGG_SUM):
            raise ValueError(f"unknown sequence_aggregation {self.sequence_aggregation!r}")

    @classmethod
    def from_schema_config(cls, schema_config: SchemaConfig, **overrides) -> "RewardConfig":
        raw = dict(schema_config.reward_defaults)
        raw.setdefault("quantity_rel_tol", schema_config.quantity_rel_tol)
        raw.update(overrides)
        return cls(**raw)


DEFAULT_REWARD = RewardConfig()


@dataclass
class StepRewardBreakdown:
    format: float = 0.0  # -1 malformed step; whole-response penalty reuses this slot
    type: float = 0.0
    necessary: float = 0.0
    optional: float = 0.0
    exceeding: float = 0.0
    distribution: float = 0.0
    tag: str = TAG_INVALID  # action-type name, "invalid", or "exceeding"

    @property
    def accuracy(self) -> float:
        return self.format + self.type + self.necessary + self.optional

    @property
    def total(self) -> float:
        return self.accuracy + self.exceeding + self.distribution

    def to_json_dict(self) -> dict:
        return {
            "format": self.format,
            "type": self.type,
            "necessary": self.necessary,
            "optional": self.optional,
            "exceeding": self.exceeding,
            "distribution": self.distribution,
            "total": self.total,
            "tag": self.tag,
        }


@dataclass
class BatchRewardResult:
    per_sample: list[list[StepRewardBreakdown]]
    sequence_rewards: list[float]
    gt_distribution: dict[str, float]
    pred_distribution: dict[str, float]

    @property
    def type_tags(self) -> list[list[str]]:
        return [[step.tag for step in steps] for steps in self.per_sample]

    def to_json_dict(self) -> dict:
        return {
            "results": [
                {
                    "steps": [step.to_json_dict() for step in steps],
                    "sequence_reward": seq,
                }
                for steps, seq in zip(self.per_sample, self.sequence_rewards)
            ],
            "gt_distribution": {k: self.gt_distribution[k] for k in sorted(self.gt_distribution)},
            "pred_distribution": {k: self.pred_distribution[k] for k in sorted(self.pred_distribution)},
        }


# --- canonical mixture renumbering (cosmetic index choices must not matter) ---


def canonical_index_map(actions: Sequence[Optional[Action]]) -> dict[int, int]:
    """Map mixture indices to 1, 2, ... in first-production order."""
    mapping: dict[int, int] = {}
    for action in actions:
        if action is None:
            continue
        for out in action.outputs:
            if out not in mapping:
                mapping[out] = len(mapping) + 1
    return mapping


def _canon_ref(index: int, mapping: Optional[dict[int, int]]):
    if mapping is None:
        return index
    mapped = mapping.get(index)
    return mapped if mapped is not None else ("unbound", index)


# --- per-parameter matching ----------------------------------------------------


def _norm_text(s: str) -> str:
    return " ".join(s.lower().split())


def _close(a: float, b: float, rel_tol: float) -> bool:
    return a == b or abs(a - b) <= rel_tol * max(abs(a), abs(b))


def _quantity_match(a: QuantityLiteral, b: QuantityLiteral, config: SchemaConfig, rel_tol: float) -> bool:
    if a.nonstandard or b.nonstandard:
        if a.unit != b.unit:
            return False
    elif config.dimension_of_unit(a.unit) != config.dimension_of_unit(b.unit):
        return False
    if (a.hi is None) != (b.hi is None):
        return False
    if not _close(a.value, b.value, rel_tol):
        return False
    return a.hi is None or _close(a.hi, b.hi, rel_tol)


def _quantity_key(q: QuantityLiteral, config: SchemaConfig) -> str:
    if q.nonstandard:
        return f"unit:{q.unit}"
    return config.dimension_of_unit(q.unit) or f"unit:{q.unit}"


def _chem_quantities_agree(gt: ChemicalLiteral, pred: ChemicalLiteral, config: SchemaConfig, rel_tol: float) -> bool:
    gt_groups: dict[str, list[QuantityLiteral]] = {}
    pred_groups: dict[str, list[QuantityLiteral]] = {}
    for q in gt.quantities.values():
        gt_groups.setdefault(_quantity_key(q, config), []).append(q)
    for q in pred.quantities.values():
        pred_groups.setdefault(_quantity_key(q, config), []).append(q)
    if set(gt_groups) != set(pred_groups):
        return False
    for key, gt_list in gt_groups.items():
        pred_list = pred_groups[key]
        if len(gt_list) != len(pred_list):
            return False
        for a, b in zip(sorted(gt_list, key=lambda q: q.value), sorted(pred_list, key=lambda q: q.value)):
            if not _quantity_match(a, b, config, rel_tol):
                return False
    return True


def _chem_item_match(gt_item, pred_item, config, rel_tol, gt_map, pred_map) -> bool:
    if isinstance(gt_item, ChemicalLiteral) and isinstance(pred_item, ChemicalLiteral):
        return _norm_text(gt_item.name) == _norm_text(pred_item.name) and _chem_quantities_agree(
            gt_item, pred_item, config, rel_tol
        )
    if isinstance(gt_item, MixtureRef) and isinstance(pred_item, MixtureRef):
        return _canon_ref(gt_item.index, gt_map) == _canon_ref(pred_item.index, pred_map)
    return False


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


def _match_param(
    kind: ParamKind,
    gt_val,
    pred_val,
    config: SchemaConfig,
    rel_tol: float,
    gt_map,
    pred_map,
) -> float:
    k = kind.kind
    if k == "chemical_list":
        gt_items = _as_list(gt_val)
        pred_items = _as_list(pred_val)
        if not gt_items:
            return 1.0 if not pred_items else 0.0
        used = [False] * len(pred_items)
        matched = 0
        for gt_item in gt_items:
            for idx, pred_item in enumerate(pred_items):
                if used[idx]:
                    continue
                if _chem_item_match(gt_item, pred_item, config, rel_tol, gt_map, pred_map):
                    used[idx] = True
                    matched += 1
                    break
        return matched / len(gt_items)
    if k == "quantity":
        gt_list = isinstance(gt_val, list)
        pred_list = isinstance(pred_val, list)
        if gt_list != pred_list:
            return 0.0
        if not gt_list:
            return 1.0 if _quantity_match(gt_val, pred_val, config, rel_tol) else 0.0
        if len(gt_val) != len(pred_val):
            return 0.0
        used = [False] * len(pred_val)
        for q in gt_val:
            hit = False
            for idx, p in enumerate(pred_val):
                if not used[idx] and _quantity_match(q, p, config, rel_tol):
                    used[idx] = True
                    hit = True
                    break
            if not hit:
                return 0.0
        return 1.0
    if k == "mixture_ref":
        return 1.0 if _canon_ref(gt_val.index, gt_map) == _canon_ref(pred_val.index, pred_map) else 0.0
    if k == "free_text":
        return 1.0 if _norm_text(gt_val) == _norm_text(pred_val) else 0.0
    if k == "flag":
        return 1.0 if gt_val is pred_val else 0.0
    return 0.0


# --- per-step accuracy scoring --------------------------------------------------


def _format_ok(action: Action, config: SchemaConfig) -> bool:
    schema = config.schema_for(action.action_type)
    known = set(schema.param_names())
    for name, value in action.args.items():
        if name not in known or not kind_ok(value, schema.kind_of(name), config):
            return False
    return len(action.outputs) <= schema.outputs


def _score_parsed(
    gt: Action,
    pred: Optional[Action],
    config: SchemaConfig,
    cfg: RewardConfig,
    gt_map=None,
    pred_map=None,
) -> StepRewardBreakdown:
    if pred is None or not _format_ok(pred, config):
        return StepRewardBreakdown(format=-1.0, tag=TAG_INVALID)
    if pred.action_type is not gt.action_type:
        return StepRewardBreakdown(format=0.0, type=0.0, tag=pred.action_type.value)
    schema = config.schema_for(gt.action_type)
    scores = {"necessary": 1.0, "optional": 1.0}
    for group in ("necessary", "optional"):
        names = schema.group(group)
        if not names:
            continue
        total = 0.0
        for name in names:
            gt_has = name in gt.args
            pred_has = name in pred.args
            if not gt_has and not pred_has:
                total += 1.0
            elif gt_has and pred_has:
                total += _match_param(
                    schema.kind_of(name), gt.args[name], pred.args[name], config, cfg.quantity_rel_tol, gt_map, pred_map
                )
            # one-sided: contributes 0
        scores[group] = total / len(names)
    return StepRewardBreakdown(
        format=0.0,
        type=1.0,
        necessary=scores["necessary"],
        optional=scores["optional"],
        tag=gt.action_type.value,
    )


def _parse_segment(segment: str, config: SchemaConfig) -> Optional[Action]:
    try:
        return parse_action_text(segment, config)
    except ProcedureSyntaxError:
        return None


def score_action(
    gt: Action,
    pred_segment: str,
    config: SchemaConfig = DEFAULT_SCHEMA,
    cfg: RewardConfig = DEFAULT_REWARD,
    gt_index_map: Optional[dict[int, int]] = None,
    pred_index_map: Optional[dict[int, int]] = None,
) -> StepRewardBreakdown:
    """Accuracy part of the step reward: format, type, necessary, optional.

    All failure modes are reward outcomes; this never raises on bad segments.
    """
    return _score_parsed(gt, _parse_segment(pred_segment, config), config, cfg, gt_index_map, pred_index_map)


# --- batch-level adjustments ----------------------------------------------------


def exceeding_penalties(
    batch_acc: Sequence[Sequence[float]],
    gt_lengths: Sequence[int],
    pred_lengths: Sequence[int],
    cfg: RewardConfig = DEFAULT_REWARD,
    tags: Optional[Sequence[Sequence[str]]] = None,
) -> list[float]:
    """Per-step penalty applied to every exceeding prediction at that step.

    ``batch_acc[i]`` holds one accuracy total per predicted step of sample i
    (zeros at exceeding positions). In the default mode the summed accuracy of
    in-range samples is divided by the number of exceeding samples, making the
    batch-average reward at the step zero; the alternate mode negates the mean
    over in-range samples instead. Steps tagged invalid contribute nothing.
    """
    if not batch_acc:
        raise ValueError("batch must be non-empty")
    n_max = max((len(row) for row in batch_acc), default=0)
    penalties: list[float] = []
    for t in range(n_max):
        contributors: list[float] = []
        n_exc = 0
        for i, row in enumerate(batch_acc):
            if t >= len(row):
                continue
            tag = tags[i][t] if tags is not None else None
            if tag == TAG_INVALID:
                continue
            if t >= gt_lengths[i]:
                n_exc += 1
            else:
                contributors.append(row[t])
        if n_exc == 0:
            penalties.append(0.0)
        elif cfg.exceeding_mode == MODE_MAIN_TEXT:
            penalties.append(-sum(contributors) / n_exc)
        else:
            penalties.append(-sum(contributors) / len(contributors) if contributors else 0.0)
    return penalties


def compute_type_distributions(
    gt_types: Sequence[Sequence[str]], pred_tags: Sequence[Sequence[str]]
) -> tuple[dict[str, float], dict[str, float]]:
    """Proportion of each action type among all reference steps and among all
    valid predicted steps (invalid and exceeding tags are dropped first)."""
    gt_counts: dict[str, int] = {}
    pred_counts: dict[str, int] = {}
    for row in gt_types:
        for t in row:
            gt_counts[t] = gt_counts.get(t, 0) + 1
    for row in pred_tags:
        for t in row:
            if t in (TAG_INVALID, TAG_EXCEEDING):
                continue
            pred_counts[t] = pred_counts.get(t, 0) + 1
    gt_total = sum(gt_counts.values())
    pred_total = sum(pred_counts.values())
    p_gt = {k: v / gt_total for k, v in gt_counts.items()} if gt_total else {}
    p_pred = {k: v / pred_total for k, v in pred_counts.items()} if pred_total else {}
    return p_gt, p_pred


def modifier_value(p_gt: float, p_pred: float, theta: float) -> float:
    """(p_gt - p_pred) / max(p_gt, p_pred) when that ratio exceeds theta, else 0."""
    denom = max(p_gt, p_pred)
    if denom <= 0.0:
        return 0.0
    ratio = (p_gt - p_pred) / denom
    return ratio if ratio > theta else 0.0


def distribution_modifiers(
    gt_types: Sequence[Sequence[str]],
    pred_tags: Sequence[Sequence[str]],
    theta: float = 0.2,
) -> list[list[float]]:
    """Per-step modifiers; invalid and exceeding steps get 0."""
    p_gt, p_pred = compute_type_distributions(gt_types, pred_tags)
    out: list[list[float]] = []
    for row in pred_tags:
        mods = []
        for tag in row:
            if tag in (TAG_INVALID, TAG_EXCEEDING):
                mods.append(0.0)
            else:
                mods.append(modifier_value(p_gt.get(tag, 0.0), p_pred.get(tag, 0.0), theta))
        out.append(mods)
    return out


# --- full batch ------------------------------------------------------------------


def batch_reward(
    refs: Sequence[Procedure],
    preds: Sequence[Union[RawModelOutput, str]],
    config: SchemaConfig = DEFAULT_SCHEMA,
    cfg: RewardConfig = DEFAULT_REWARD,
) -> BatchRewardResult:
    """Score a batch of raw model outputs against reference procedures.

    A response that breaks the reasoning format collapses to a single step
    carrying the whole-response penalty (no further adjustments). Otherwise
    predicted actions are zipped with the reference, exceeding steps start at
    zero accuracy and receive the batch-adaptive penalty, and every valid step
    receives its distribution modifier. Deterministic for fixed inputs.
    """
    if len(refs) != len(preds):
        raise LengthMismatchError(f"{len(refs)} references vs {len(preds)} predictions")
    if not refs:
        raise LengthMismatchError("batch must be non-empty")

    per_sample: list[list[StepRewardBreakdown]] = []
    gt_types: list[list[str]] = []
    whole_fail: list[bool] = []

    for ref, pred in zip(refs, preds):
        gt_actions = ref.actions
        gt_types.append([a.action_type.value for a in gt_actions])
        try:
            _, answer = extract_answer(pred, cfg.answer_format)
        except AnswerFormatError:
            per_sample.append(
                [StepRewardBreakdown(format=cfg.whole_response_format_penalty, tag=TAG_INVALID)]
            )
            whole_fail.append(True)
            continue
        whole_fail.append(False)
        segments = split_actions(answer)
        parsed = [_parse_segment(seg, config) for seg in segments]
        gt_map = canonical_index_map(gt_actions)
        pred_map = canonical_index_map(parsed)
        steps: list[StepRewardBreakdown] = []
        for j in range(min(len(gt_actions), len(parsed))):
            steps.append(_score_parsed(gt_actions[j], parsed[j], config, cfg, gt_map, pred_map))
        for _ in range(max(0, len(parsed) - len(gt_actions))):
            steps.append(StepRewardBreakdown(tag=TAG_EXCEEDING))
        per_sample.append(steps)

    tags = [[s.tag for s in steps] for steps in per_sample]
    acc_rows = [[s.accuracy for s in steps] for steps in per_sample]
    gt_lengths = [len(row) for row in gt_types]
    pred_lengths = [len(row) for row in acc_rows]
    # whole-response failures are excluded from the batch passes by their
    # invalid tag; their single entry never counts as exceeding
    penalties = exceeding_penalties(acc_rows, gt_lengths, pred_lengths, cfg, tags)
    for steps in per_sample:
        for t, step in enumerate(steps):
            if step.tag == TAG_EXCEEDING:
                step.exceeding = penalties[t]

    mods = distribution_modifiers(gt_types, tags, cfg.theta)
    for i, steps in enumerate(per_sample):
        if whole_fail[i]:
            continue
        for t, step in enumerate(steps):
            step.distribution = mods[i][t]

    p_gt, p_pred = compute_type_distributions(gt_types, tags)

    sequence_rewards: list[float] = []
    for i, steps in enumerate(per_sample):
        total = sum(s.total for s in steps)
        if cfg.sequence_aggregation == AGG_MEAN:
            sequence_rewards.append(total / gt_lengths[i])
        else:
            sequence_rewards.append(total)

    return BatchRewardResult(
        per_sample=per_sample,
        sequence_rewards=sequence_rewards,
        gt_distribution=p_gt,
        pred_distribution=p_pred,
    )


# --- group-relative advantages -----------------------------------------------------


def is_degenerate_group(rewards: Sequence[float]) -> bool:
    return len(set(float(r) for r in rewards)) <= 1


def grpo_advantages(group_rewards: Sequence[float]) -> list[float]:
    """(r_i - mean) / (population std + 1e-8) over one rollout group.

    Output is mean-zero and unit-std for non-degenerate groups; an all-equal
    group yields all-zero advantages (flagged via is_degenerate_group).
    """
    if len(group_rewards) < 2:
        raise ValueError("group size must be at least 2")
    arr = np.asarray(group_rewards, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std())
    return [float(x) for x in (arr - mean) / (std + GRPO_EPS)]
