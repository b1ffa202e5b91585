"""Corruption baselines for calibrating a judge, judge prompt construction
with the 40/30/20/10 rubric, response score parsing, and an OpenAI-compatible
chat-completion client with retry/backoff.
"""

from __future__ import annotations

import logging
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import requests

from .grammar import ChemicalLiteral, Procedure, render_procedure
from .schema import DEFAULT_SCHEMA, ActionType, SchemaConfig
from .skeleton import DEFAULT_WORKUP_ACTIONS, split_phases

log = logging.getLogger(__name__)

MODE_REAGENT = "reagent"
MODE_SWAP_ACTIONS = "swap_actions"
MODE_BOTH = "both"
MODE_ORACLE = "oracle"
CORRUPTION_MODES = (MODE_REAGENT, MODE_SWAP_ACTIONS, MODE_BOTH, MODE_ORACLE)

# Deliberately absurd replacements for the negative reagent baseline.
NONSENSE_REAGENTS = (
    "powdered granite",
    "molten candle wax",
    "crushed seashells",
    "instant coffee granules",
    "liquid soap",
    "motor oil",
    "maple syrup",
    "chalk dust",
    "rust flakes",
    "melted snow",
    "pencil shavings",
    "dried leaves",
    "fabric softener",
    "toothpaste",
    "glitter",
)

# Common solvent/reagent aliases; applied name -> synonym, case-insensitive.
SYNONYM_TABLE = {
    "methanol": "MeOH",
    "ethanol": "EtOH",
    "isopropanol": "IPA",
    "diethyl ether": "Et2O",
    "dichloromethane": "DCM",
    "chloroform": "CHCl3",
    "tetrahydrofuran": "THF",
    "2-methyltetrahydrofuran": "2-MeTHF",
    "dimethylformamide": "DMF",
    "dimethyl sulfoxide": "DMSO",
    "dimethylacetamide": "DMA",
    "acetonitrile": "MeCN",
    "ethyl acetate": "EtOAc",
    "methyl tert-butyl ether": "MTBE",
    "1,4-dioxane": "dioxane",
    "n-methylpyrrolidone": "NMP",
    "toluene": "PhMe",
    "benzene": "PhH",
    "acetic acid": "AcOH",
    "trifluoroacetic acid": "TFA",
    "triethylamine": "NEt3",
    "diisopropylethylamine": "DIPEA",
    "pyridine": "py",
    "water": "H2O",
    "hydrochloric acid": "HCl",
    "sulfuric acid": "H2SO4",
    "nitric acid": "HNO3",
    "phosphoric acid": "H3PO4",
    "sodium hydroxide": "NaOH",
    "potassium hydroxide": "KOH",
    "sodium bicarbonate": "NaHCO3",
    "sodium carbonate": "Na2CO3",
    "potassium carbonate": "K2CO3",
    "cesium carbonate": "Cs2CO3",
    "sodium chloride": "NaCl",
    "brine": "saturated NaCl solution",
    "sodium sulfate": "Na2SO4",
    "magnesium sulfate": "MgSO4",
    "sodium borohydride": "NaBH4",
    "lithium aluminum hydride": "LiAlH4",
    "sodium hydride": "NaH",
    "n-butyllithium": "n-BuLi",
    "palladium on carbon": "Pd/C",
    "manganese dioxide": "MnO2",
    "ammonium chloride": "NH4Cl",
    "hydrogen peroxide": "H2O2",
    "nitrogen": "N2",
    "argon": "Ar",
    "hydrogen": "H2",
    "carbon dioxide": "CO2",
}


class NotEnoughActionsError(ValueError):
    pass


class UnparseableResponseError(ValueError):
    pass


class JudgeNetworkError(ConnectionError):
    pass


class JudgeHttpError(RuntimeError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"judge endpoint returned HTTP {status}")
        self.status = status
        self.body = body


class JudgeTimeoutError(TimeoutError):
    pass


# --- corruption baselines ------------------------------------------------------


def _deep_copy_procedure(p: Procedure) -> Procedure:
    actions = []
    for action in p.actions:
        args = {}
        for name, value in action.args.items():
            if isinstance(value, ChemicalLiteral):
                args[name] = ChemicalLiteral(value.name, dict(value.quantities))
            elif isinstance(value, list):
                args[name] = [
                    ChemicalLiteral(v.name, dict(v.quantities)) if isinstance(v, ChemicalLiteral) else v
                    for v in value
                ]
            else:
                args[name] = value
        actions.append(type(action)(action_type=action.action_type, args=args, outputs=list(action.outputs)))
    return Procedure(actions=actions)


def _reaction_phase_ordinals(p: Procedure) -> list[int]:
    reaction, _ = split_phases(p, DEFAULT_WORKUP_ACTIONS)
    if reaction is None:
        return []
    lo, hi = reaction
    return [o for o in range(lo, hi + 1) if p.actions[o - 1].action_type is not ActionType.YIELD_STATEMENT]


def _chem_slots(p: Procedure, ordinals: Sequence[int]) -> list[ChemicalLiteral]:
    slots = []
    for ordinal in ordinals:
        for value in p.actions[ordinal - 1].args.values():
            items = value if isinstance(value, list) else [value]
            slots.extend(item for item in items if isinstance(item, ChemicalLiteral))
    return slots


def _corrupt_reagent(p: Procedure, rng: random.Random) -> None:
    slots = _chem_slots(p, _reaction_phase_ordinals(p))
    if not slots:
        raise NotEnoughActionsError("no reaction-phase chemical to corrupt")
    slot = rng.choice(slots)
    slot.name = rng.choice([n for n in NONSENSE_REAGENTS if n != slot.name.lower()])


def _corrupt_swap(p: Procedure, rng: random.Random) -> None:
    ordinals = _reaction_phase_ordinals(p)
    pairs = [
        (a, b)
        for i, a in enumerate(ordinals)
        for b in ordinals[i + 1 :]
        if p.actions[a - 1].action_type is not p.actions[b - 1].action_type
    ]
    if not pairs:
        raise NotEnoughActionsError("need two reaction-phase actions of differing types to swap")
    a, b = rng.choice(pairs)
    p.actions[a - 1], p.actions[b - 1] = p.actions[b - 1], p.actions[a - 1]


def _apply_synonyms(p: Procedure, table: dict[str, str]) -> None:
    for action in p.actions:
        for value in action.args.values():
            items = value if isinstance(value, list) else [value]
            for item in items:
                if isinstance(item, ChemicalLiteral):
                    alias = table.get(item.name.lower())
                    if alias is not None:
                        item.name = alias


def corrupt(
    p: Procedure,
    mode: str,
    rng_seed: int = 0,
    synonym_table: Optional[dict[str, str]] = None,
) -> Procedure:
    """Deterministically corrupt a procedure for judge calibration.

    reagent: one reaction-phase chemical becomes a nonsense substance.
    swap_actions: two differing-type reaction-phase actions trade places.
    both: reagent then swap. oracle: synonym renames only, structure intact.
    """
    if mode not in CORRUPTION_MODES:
        raise ValueError(f"unknown corruption mode {mode!r}")
    rng = random.Random(rng_seed)
    out = _deep_copy_procedure(p)
    if mode == MODE_ORACLE:
        _apply_synonyms(out, synonym_table or SYNONYM_TABLE)
    elif mode == MODE_REAGENT:
        _corrupt_reagent(out, rng)
    elif mode == MODE_SWAP_ACTIONS:
        _corrupt_swap(out, rng)
    else:
        _corrupt_reagent(out, rng)
        _corrupt_swap(out, rng)
    return out


# --- judge prompt and scores -----------------------------------------------------


@dataclass(frozen=True)
class RubricConfig:
    reaction_cap: int = 40
    workup_cap: int = 30
    conditions_cap: int = 20
    safety_cap: int = 10
    extra_instructions: str = ""


DEFAULT_RUBRIC = RubricConfig()

_PROMPT_TEMPLATE = """You are an expert synthetic chemist reviewing a machine-generated \
experimental procedure against a trusted reference.

Reference procedure (gold standard):
```
{reference}
```

Candidate procedure to evaluate:
```
{candidate}
```

Score the candidate against the reference in four categories:
1. Reaction Score (0-{reaction_cap} points): the core transformation, required \
components, and stoichiometry.
2. Workup and Purification Score (0-{workup_cap} points): the separation and \
purification sequence.
3. Conditions Score (0-{conditions_cap} points): solvents, reagents, temperatures, \
times, and atmosphere.
4. Safety and Modern Practice Score (0-{safety_cap} points): penalize outdated or \
hazardous components and practices.

Chemically equivalent synonyms (e.g. MeOH for methanol) must not be penalized. \
Deviations from the required machine-readable syntax must be penalized in the \
relevant categories.
{extra}
After a brief justification, finish your reply with exactly one line of the form:
SCORES: reaction=<int> workup=<int> conditions=<int> safety=<int>"""


@dataclass(frozen=True)
class JudgeScores:
    reaction: float
    workup: float
    conditions: float
    safety: float

    @property
    def total(self) -> float:
        return self.reaction + self.workup + self.conditions + self.safety

    def to_json_dict(self) -> dict:
        return {
            "reaction": self.reaction,
            "workup": self.workup,
            "conditions": self.conditions,
            "safety": self.safety,
            "total": self.total,
        }


def build_judge_prompt(
    ref: Procedure,
    pred: Procedure,
    rubric: RubricConfig = DEFAULT_RUBRIC,
    config: SchemaConfig = DEFAULT_SCHEMA,
) -> str:
    """Deterministic composite prompt: reference, candidate, rubric, format
    penalty instructions, and the required trailing score block."""
    return _PROMPT_TEMPLATE.format(
        reference=render_procedure(ref, config),
        candidate=render_procedure(pred, config),
        reaction_cap=rubric.reaction_cap,
        workup_cap=rubric.workup_cap,
        conditions_cap=rubric.conditions_cap,
        safety_cap=rubric.safety_cap,
        extra=rubric.extra_instructions + "\n" if rubric.extra_instructions else "",
    )


_SCORES_RE = re.compile(
    r"SCORES:\s*reaction\s*=\s*(-?\d+(?:\.\d+)?)\s+workup\s*=\s*(-?\d+(?:\.\d+)?)"
    r"\s+conditions\s*=\s*(-?\d+(?:\.\d+)?)\s+safety\s*=\s*(-?\d+(?:\.\d+)?)"
)


def parse_judge_scores(response: str, rubric: RubricConfig = DEFAULT_RUBRIC) -> JudgeScores:
    """Extract the trailing score block; values beyond a category cap are
    clamped with a warning."""
    matches = list(_SCORES_RE.finditer(response))
    if not matches:
        raise UnparseableResponseError("no SCORES block in judge response")
    raw = [float(g) for g in matches[-1].groups()]
    caps = (rubric.reaction_cap, rubric.workup_cap, rubric.conditions_cap, rubric.safety_cap)
    clamped = []
    for name, value, cap in zip(("reaction", "workup", "conditions", "safety"), raw, caps):
        clipped = min(max(value, 0.0), float(cap))
        if clipped != value:
            log.warning("judge %s score %s outside [0, %s]; clamped", name, value, cap)
        clamped.append(clipped)
    return JudgeScores(*clamped)


# --- endpoint client ----------------------------------------------------------------


def call_judge(
    endpoint: str,
    model_name: str,
    prompt: str,
    timeout: float = 60.0,
    api_key: Optional[str] = None,
    max_retries: int = 3,
    backoff: float = 0.5,
) -> str:
    """POST an OpenAI-compatible chat-completion request (temperature 0) and
    return the assistant text. Retries 429/5xx with exponential backoff up to
    max_retries."""
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    }
    attempt = 0
    while True:
        try:
            resp = requests.post(endpoint, json=body, headers=headers, timeout=timeout)
        except requests.Timeout as exc:
            raise JudgeTimeoutError(f"judge call timed out after {timeout}s") from exc
        except requests.ConnectionError as exc:
            raise JudgeNetworkError(f"cannot reach judge endpoint {endpoint}") from exc
        if resp.status_code == 200:
            payload = resp.json()
            try:
                return payload["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise UnparseableResponseError(f"malformed completion payload: {exc}")
        if resp.status_code == 429 or resp.status_code >= 500:
            if attempt >= max_retries:
                raise JudgeHttpError(resp.status_code, resp.text)
            time.sleep(backoff * (2**attempt))
            attempt += 1
            continue
        raise JudgeHttpError(resp.status_code, resp.text)


def judge_many(
    endpoint: str,
    model_name: str,
    prompts: Sequence[str],
    timeout: float = 60.0,
    api_key: Optional[str] = None,
    max_in_flight: int = 4,
    max_retries: int = 3,
    backoff: float = 0.5,
) -> list[str]:
    """Bounded-concurrency fan-out of call_judge; results keep prompt order."""
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [
            pool.submit(call_judge, endpoint, model_name, prompt, timeout, api_key, max_retries, backoff)
            for prompt in prompts
        ]
        return [f.result() for f in futures]
