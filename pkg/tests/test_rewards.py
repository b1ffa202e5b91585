import random

import pytest

from conftest import random_valid_procedure, wrap_think
from procrew import (
    batch_reward,
    distribution_modifiers,
    exceeding_penalties,
    grpo_advantages,
    parse_procedure,
    render_procedure,
    score_action,
)
from procrew.grammar import parse_action_text
from procrew.rewards import (
    MODE_ALGORITHM1,
    LengthMismatchError,
    RewardConfig,
    compute_type_distributions,
    is_degenerate_group,
    modifier_value,
)

WAIT = parse_action_text("wait(time_period=1 h)")
ADD_GT = parse_action_text('add(source=[chem("a")], target=mix(1), time_period=1 h, method="dropwise")')


def acc(b):
    return (b.format, b.type, b.necessary, b.optional)


# --- score_action ----------------------------------------------------------------


def test_exact_match_scores_three():
    b = score_action(WAIT, "wait(time_period=1 h)")
    assert acc(b) == (0.0, 1.0, 1.0, 1.0)
    assert b.accuracy == 3.0


def test_type_mismatch_short_circuits():
    b = score_action(WAIT, 'add(source=[chem("a")], target=mix(1))')
    assert acc(b) == (0.0, 0.0, 0.0, 0.0)


def test_malformed_scores_minus_one():
    b = score_action(WAIT, "wa it(((")
    assert acc(b) == (-1.0, 0.0, 0.0, 0.0)
    assert b.tag == "invalid"


def test_unknown_action_is_format_failure():
    assert acc(score_action(WAIT, "frobnicate(x=1 h)")) == (-1.0, 0.0, 0.0, 0.0)


def test_unknown_param_is_format_failure():
    assert score_action(WAIT, 'wait(time_period=1 h, apparatus="x")').format == -1.0


def test_kind_mismatch_is_format_failure():
    assert score_action(WAIT, 'wait(time_period="soon")').format == -1.0


def test_output_arity_is_format_failure():
    assert score_action(WAIT, "wait(time_period=1 h) -> mix(1)").format == -1.0


def test_unit_converted_match():
    gt = parse_action_text("wait(time_period=2 h)")
    b = score_action(gt, "wait(time_period=120 min)")
    assert b.necessary == 1.0


def test_quantity_tolerance():
    gt = parse_action_text("wait(time_period=1 h)")
    assert score_action(gt, "wait(time_period=1.005 h)").necessary == 1.0
    assert score_action(gt, "wait(time_period=1.02 h)").necessary == 0.0


def test_missing_necessary_param_scores_zero_in_group():
    b = score_action(ADD_GT, "add(target=mix(1), time_period=1 h)")
    assert b.necessary == 0.5  # source missing, target matches
    assert b.optional == 0.5  # method one-sided, time_period matches


def test_both_absent_param_counts_full():
    gt = parse_action_text('add(source=[chem("a")], target=mix(1))')
    b = score_action(gt, 'add(source=[chem("a")], target=mix(1))')
    assert b.optional == 1.0  # neither side gives time_period/method


def test_extra_optional_param_scores_zero_for_that_param():
    gt = parse_action_text('add(source=[chem("a")], target=mix(1))')
    b = score_action(gt, 'add(source=[chem("a")], target=mix(1), method="dropwise")')
    assert b.optional == 0.5


def test_chemical_list_fractional_match():
    gt = parse_action_text('add(source=[chem("a"), chem("b")], target=mix(1))')
    b = score_action(gt, 'add(source=[chem("a"), chem("c")], target=mix(1))')
    assert b.necessary == pytest.approx((0.5 + 1.0) / 2)


def test_chemical_name_normalization():
    gt = parse_action_text('add(source=[chem("Sodium  Chloride")], target=mix(1))')
    b = score_action(gt, 'add(source=[chem("sodium chloride")], target=mix(1))')
    assert b.necessary == 1.0


def test_chemical_quantities_must_agree():
    gt = parse_action_text('add(source=[chem("a", mass=5 g)], target=mix(1))')
    assert score_action(gt, 'add(source=[chem("a", mass=5000 mg)], target=mix(1))').necessary == 1.0
    assert score_action(gt, 'add(source=[chem("a", mass=6 g)], target=mix(1))').necessary == 0.5
    assert score_action(gt, 'add(source=[chem("a")], target=mix(1))').necessary == 0.5


def test_free_text_normalized_match():
    gt = parse_action_text('add(source=[chem("a")], target=mix(1), method="Drop  Wise")')
    b = score_action(gt, 'add(source=[chem("a")], target=mix(1), method="drop wise")')
    assert b.optional == 1.0


def test_canonical_renumbering_in_batch():
    ref = parse_procedure(
        'make_solution(solute=[chem("a")], solvent=chem("water")) -> mix(5);\n'
        'yield_statement(product=chem("a"), target=mix(5));'
    )
    pred = (
        'make_solution(solute=[chem("a")], solvent=chem("water")) -> mix(1);\n'
        'yield_statement(product=chem("a"), target=mix(1));'
    )
    result = batch_reward([ref], [wrap_think(pred)])
    assert [s.total for s in result.per_sample[0]] == [3.0, 3.0]


# --- exceeding penalties -------------------------------------------------------


def test_exceeding_penalties_hand_case():
    # three samples at step 2: in-range accuracies {3, 1}, one exceeding
    batch_acc = [[3.0, 3.0], [3.0, 1.0], [3.0, 0.0]]
    gt_lengths = [2, 2, 1]
    pred_lengths = [2, 2, 2]
    main = exceeding_penalties(batch_acc, gt_lengths, pred_lengths, RewardConfig())
    assert main == [0.0, -4.0]
    alg1 = exceeding_penalties(batch_acc, gt_lengths, pred_lengths, RewardConfig(exceeding_mode=MODE_ALGORITHM1))
    assert alg1 == [0.0, -2.0]


def test_no_exceeding_no_penalty():
    assert exceeding_penalties([[3.0], [1.0]], [1, 1], [1, 1], RewardConfig()) == [0.0]


def test_invalid_steps_excluded_from_sum():
    batch_acc = [[3.0], [-1.0], [0.0]]
    tags = [["wait"], ["invalid"], ["exceeding"]]
    main = exceeding_penalties(batch_acc, [1, 1, 0], [1, 1, 1], RewardConfig(), tags)
    assert main == [-3.0]


def test_zero_batch_average_property(rng):
    for _ in range(20):
        n = rng.randint(2, 6)
        batch_acc, gt_lengths, pred_lengths = [], [], []
        for _ in range(n):
            gt_len = rng.randint(1, 5)
            pred_len = rng.randint(1, 7)
            gt_lengths.append(gt_len)
            pred_lengths.append(pred_len)
            batch_acc.append(
                [rng.choice([3.0, 2.0, 1.0, 0.0]) if t < gt_len else 0.0 for t in range(pred_len)]
            )
        penalties = exceeding_penalties(batch_acc, gt_lengths, pred_lengths, RewardConfig())
        for t, penalty in enumerate(penalties):
            n_exc = sum(1 for i in range(n) if t < pred_lengths[i] and t >= gt_lengths[i])
            if n_exc == 0:
                assert penalty == 0.0
                continue
            in_range = sum(batch_acc[i][t] for i in range(n) if t < pred_lengths[i] and t < gt_lengths[i])
            assert abs(in_range + n_exc * penalty) < 1e-9


# --- distribution modifiers -----------------------------------------------------


def test_modifier_hand_value():
    assert modifier_value(0.8, 0.5, 0.2) == pytest.approx(0.375, abs=1e-12)


def test_modifier_gates():
    assert modifier_value(0.5, 0.5, 0.2) == 0.0
    assert modifier_value(0.5, 0.8, 0.2) == 0.0  # negative ratio fails the gate
    assert modifier_value(0.0, 0.0, 0.2) == 0.0


def test_distribution_modifiers_identical_distributions_zero():
    gt_types = [["wait", "add"], ["wait", "add"]]
    pred_tags = [["wait", "add"], ["wait", "add"]]
    mods = distribution_modifiers(gt_types, pred_tags, 0.2)
    assert all(m == 0.0 for row in mods for m in row)


def test_distribution_modifiers_skip_invalid_and_exceeding():
    gt_types = [["wait", "wait", "wait", "wait", "add"]]
    pred_tags = [["wait", "invalid", "exceeding", "wait", "wait"]]
    mods = distribution_modifiers(gt_types, pred_tags, 0.2)
    assert mods[0][1] == 0.0 and mods[0][2] == 0.0
    # p_gt(wait)=0.8, p_pred(wait)=1.0 -> negative, gated to 0
    assert mods[0][0] == 0.0


def test_distribution_modifier_rewards_underpredicted_type():
    gt_types = [["wait"], ["wait"], ["wait"], ["wait"], ["add"]]
    pred_tags = [["wait"], ["add"], ["add"], ["add"], ["add"]]
    p_gt, p_pred = compute_type_distributions(gt_types, pred_tags)
    assert p_gt == {"wait": 0.8, "add": 0.2}
    assert p_pred == {"wait": 0.2, "add": 0.8}
    mods = distribution_modifiers(gt_types, pred_tags, 0.2)
    assert mods[0][0] == pytest.approx((0.8 - 0.2) / 0.8)
    assert mods[1][0] == 0.0


def test_modifiers_always_in_unit_interval(rng):
    for _ in range(200):
        p_gt, p_pred = rng.random(), rng.random()
        v = modifier_value(p_gt, p_pred, 0.2)
        assert 0.0 <= v <= 1.0


# --- batch_reward ----------------------------------------------------------------


def test_identity_batch_scores_three(rng):
    refs = [random_valid_procedure(rng) for _ in range(4)]
    preds = [wrap_think(render_procedure(p)) for p in refs]
    result = batch_reward(refs, preds)
    for steps in result.per_sample:
        assert all(s.total == 3.0 for s in steps)
    assert result.sequence_rewards == [3.0 * len(p.actions) / len(p.actions) for p in refs]


def test_whole_response_format_failure():
    ref = parse_procedure("wait(time_period=1 h);")
    result = batch_reward([ref], ["no delimiters at all"])
    steps = result.per_sample[0]
    assert len(steps) == 1
    assert steps[0].total == -2.0
    assert steps[0].tag == "invalid"
    assert result.sequence_rewards == [-2.0]


def test_batch_composition_with_exceeding():
    wait_line = "wait(time_period=1 h);"
    add_a = 'add(source=[chem("a")], target=mix(1), time_period=1 h, method="fast");'
    add_b = 'add(source=[chem("b")], target=mix(9), time_period=2 h, method="slow");'
    refs = [
        parse_procedure(wait_line + "\n" + add_a),
        parse_procedure(wait_line + "\n" + add_a),
        parse_procedure(wait_line),
    ]
    preds = [
        wrap_think(wait_line + "\n" + add_a),  # step-2 accuracy 3
        wrap_think(wait_line + "\n" + add_b),  # step-2 accuracy 1 (type only)
        wrap_think(wait_line + "\n" + add_a),  # step 2 exceeds gt length 1
    ]
    result = batch_reward(refs, preds)
    steps = result.per_sample
    assert steps[0][1].accuracy == 3.0
    assert steps[1][1].accuracy == 1.0
    assert steps[2][1].tag == "exceeding"
    assert steps[2][1].exceeding == -4.0
    cfg = RewardConfig(exceeding_mode=MODE_ALGORITHM1)
    result2 = batch_reward(refs, preds, cfg=cfg)
    assert result2.per_sample[2][1].exceeding == -2.0


def test_truncated_prediction_earns_nothing_extra():
    ref = parse_procedure("wait(time_period=1 h);\nwait(time_period=2 h);\nwait(time_period=3 h);")
    result = batch_reward([ref], [wrap_think("wait(time_period=1 h);")])
    steps = result.per_sample[0]
    assert len(steps) == 1
    assert steps[0].total == 3.0
    assert result.sequence_rewards == [1.0]  # 3.0 over gt length 3


def test_sequence_sum_aggregation():
    ref = parse_procedure("wait(time_period=1 h);\nwait(time_period=2 h);")
    pred = wrap_think(render_procedure(ref))
    result = batch_reward([ref], [pred], cfg=RewardConfig(sequence_aggregation="sum"))
    assert result.sequence_rewards == [6.0]


def test_length_mismatch_raises():
    ref = parse_procedure("wait(time_period=1 h);")
    with pytest.raises(LengthMismatchError):
        batch_reward([ref], [])


OPTIONAL_CORRUPTIONS = [
    ('method="dropwise"', 'method="backwards"'),
    ("times=2 x", "times=9 x"),
    ("times=3 x", "times=9 x"),
    ("in_vacuum=true", "in_vacuum=false"),
    ('speed="slowly"', 'speed="violently"'),
]


def test_monotonicity_optional_corruption(rng):
    checked = 0
    for _ in range(40):
        ref = random_valid_procedure(rng)
        good = wrap_think(render_procedure(ref))
        bad = good
        for old, new in OPTIONAL_CORRUPTIONS:
            if old in good:
                bad = good.replace(old, new, 1)
                break
        if bad == good:
            continue  # this draw carries no optional parameter to corrupt
        checked += 1
        base = batch_reward([ref], [good]).per_sample[0]
        worse = batch_reward([ref], [bad]).per_sample[0]
        for b, w in zip(base, worse):
            assert w.format <= b.format
            assert w.type <= b.type
            assert w.necessary <= b.necessary + 1e-12
            assert w.optional <= b.optional + 1e-12
    assert checked >= 10


def test_short_circuit_invariants(rng):
    refs = [random_valid_procedure(rng) for _ in range(8)]
    preds = []
    for i, ref in enumerate(refs):
        text = render_procedure(ref)
        if i % 3 == 0:
            text = "garbage(((\n" + text
        preds.append(wrap_think(text))
    result = batch_reward(refs, preds)
    for steps in result.per_sample:
        for s in steps:
            if s.format == -1.0:
                assert s.type == 0.0 and s.necessary == 0.0 and s.optional == 0.0
            if s.type == 0.0:
                assert s.necessary == 0.0 and s.optional == 0.0


# --- GRPO -----------------------------------------------------------------------


def test_grpo_hand_case():
    adv = grpo_advantages([1.0, 2.0, 3.0])
    assert adv[0] == pytest.approx(-1.2247, abs=1e-4)
    assert adv[1] == pytest.approx(0.0, abs=1e-12)
    assert adv[2] == pytest.approx(1.2247, abs=1e-4)


def test_grpo_degenerate_group():
    assert grpo_advantages([5.0, 5.0, 5.0]) == [0.0, 0.0, 0.0]
    assert is_degenerate_group([5.0, 5.0])
    assert not is_degenerate_group([5.0, 5.1])


def test_grpo_centering(rng):
    for _ in range(50):
        group = [rng.uniform(-5, 5) for _ in range(rng.randint(2, 16))]
        adv = grpo_advantages(group)
        assert abs(sum(adv) / len(adv)) < 1e-9


def test_grpo_shift_invariant_and_scale_equivariant(rng):
    group = [rng.uniform(0, 10) for _ in range(8)]
    shifted = grpo_advantages([g + 123.0 for g in group])
    base = grpo_advantages(group)
    assert all(abs(a - b) < 1e-6 for a, b in zip(base, shifted))
    scaled = grpo_advantages([g * 7.0 for g in group])
    assert all((a > 0) == (b > 0) or abs(a) < 1e-9 for a, b in zip(base, scaled))


def test_grpo_group_size_precondition():
    with pytest.raises(ValueError):
        grpo_advantages([1.0])
