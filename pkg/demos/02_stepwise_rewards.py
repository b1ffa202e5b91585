"""Walkthrough: step-wise verifiable rewards over a batch of model outputs,
including the adaptive exceeding penalty, distribution modifiers, and
group-relative advantages.

Run: python demos/02_stepwise_rewards.py
"""

from procrew import batch_reward, grpo_advantages, parse_procedure
from procrew.rewards import MODE_ALGORITHM1, RewardConfig

REFERENCE = """\
make_solution(solute=[chem("aniline", mass=2 g)], solvent=chem("ethanol", volume=20 mL)) -> mix(1);
wait(time_period=1 h);
yield_statement(product=chem("product"), target=mix(1));
"""

SHORT_REFERENCE = """\
make_solution(solute=[chem("aniline", mass=2 g)], solvent=chem("ethanol", volume=20 mL)) -> mix(1);
yield_statement(product=chem("product"), target=mix(1));
"""

refs = [parse_procedure(REFERENCE)] * 3 + [parse_procedure(SHORT_REFERENCE)]

# four generations of varying quality; a response must carry a reasoning
# block ahead of the machine-readable answer
preds = [
    # perfect reproduction
    "<think>straightforward</think>" + REFERENCE,
    # wrong wait duration (necessary parameter of step 2 misses)
    "<think>guessing the time</think>" + REFERENCE.replace("1 h", "5 h"),
    # no reasoning block at all: the whole response is penalized
    REFERENCE,
    # one action beyond its own (shorter) reference: an "exceeding" step at a
    # position where the other samples still score
    "<think>padding</think>" + SHORT_REFERENCE + "wait(time_period=1 h);",
]

result = batch_reward(refs, preds)
for i, steps in enumerate(result.per_sample):
    print(f"sample {i}: sequence reward {result.sequence_rewards[i]:+.3f}")
    for t, s in enumerate(steps):
        print(
            f"  step {t + 1}: format={s.format:+.0f} type={s.type:.0f} nec={s.necessary:.2f} "
            f"opt={s.optional:.2f} exceeding={s.exceeding:+.3f} dist={s.distribution:.3f} "
            f"total={s.total:+.3f} [{s.tag}]"
        )

print("\nreference action-type distribution:", result.gt_distribution)
print("predicted action-type distribution:", result.pred_distribution)

# the exceeding penalty is sized so the batch-average reward at that step is
# zero; the alternate mode negates the mean over in-range samples instead
alt = batch_reward(refs, preds, cfg=RewardConfig(exceeding_mode=MODE_ALGORITHM1))
main_pen = result.per_sample[3][-1].exceeding
alt_pen = alt.per_sample[3][-1].exceeding
print(f"\nexceeding penalty, adaptive mode: {main_pen:+.3f}; mean mode: {alt_pen:+.3f}")

# sequence rewards feed straight into group-relative advantages
advantages = grpo_advantages(result.sequence_rewards)
print("\ngroup-relative advantages:", [f"{a:+.3f}" for a in advantages])
