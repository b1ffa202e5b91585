"""Shared fixtures: a seeded random generator of valid procedures used by the
property, corruption, and acceptance suites."""

from __future__ import annotations

import random

import pytest

from procrew import Action, ActionType, ChemicalLiteral, MixtureRef, Procedure, QuantityLiteral

SOLVENTS = ["water", "methanol", "ethanol", "toluene", "THF", "DCM", "ethyl acetate", "acetonitrile"]
SOLUTES = [
    "sodium chloride",
    "potassium carbonate",
    "benzaldehyde",
    "aniline",
    "4-bromotoluene",
    "sodium hydroxide",
    "ammonium chloride",
    "phenol",
]
AGENTS = ["brine", "sodium sulfate", "magnesium sulfate", "ammonium chloride", "sodium bicarbonate"]
GASES = ["nitrogen", "argon"]
APPARATUS = ["rotary evaporator", "round-bottom flask", "separatory funnel", "Buchner funnel"]

THINK_WRAP = "<think></think>"


def wrap_think(answer: str, reasoning: str = "considering the transformation") -> str:
    return f"<think>{reasoning}</think>\n{answer}"


def sig_float(rng: random.Random, lo_exp: int = -2, hi_exp: int = 2) -> float:
    # <= 5 significant digits, so canonical rendering round-trips exactly
    return float(f"{rng.randint(1, 99999)}e{rng.randint(lo_exp, hi_exp)}")


def quantity(rng: random.Random, dimension: str) -> QuantityLiteral:
    units = {
        "mass": "g",
        "volume": "mL",
        "amount": "mol",
        "time": "h",
        "temperature": "°C",
        "pressure": "bar",
        "wavelength": "nm",
        "count": "x",
        "fraction": "%",
        "ph": "pH",
    }
    unit = units[dimension]
    if dimension == "temperature":
        value = float(rng.randint(-78, 200))
        if rng.random() < 0.2:
            return QuantityLiteral(value=value, unit=unit, hi=value + rng.randint(1, 10))
        return QuantityLiteral(value=value, unit=unit)
    if dimension == "count":
        return QuantityLiteral(value=float(rng.randint(1, 5)), unit=unit)
    if dimension == "ph":
        return QuantityLiteral(value=float(rng.randint(1, 13)), unit=unit)
    if dimension == "fraction":
        return QuantityLiteral(value=float(rng.randint(1, 99)), unit=unit)
    return QuantityLiteral(value=sig_float(rng), unit=unit)


def chem(rng: random.Random, pool: list[str]) -> ChemicalLiteral:
    quantities = {}
    if rng.random() < 0.8:
        quantities["mass"] = quantity(rng, "mass")
    if rng.random() < 0.4:
        quantities["volume"] = quantity(rng, "volume")
    return ChemicalLiteral(name=rng.choice(pool), quantities=quantities)


def random_valid_procedure(
    rng: random.Random,
    n_reaction: int | None = None,
    n_workup: int | None = None,
) -> Procedure:
    """A procedure that parses, validates cleanly, and starts with at least two
    reaction-phase actions of differing types."""
    if n_reaction is None:
        n_reaction = rng.randint(1, 3)
    if n_workup is None:
        n_workup = rng.randint(0, 3)
    actions: list[Action] = []
    mixtures: list[int] = []
    next_mix = 1

    def produce() -> int:
        nonlocal next_mix
        idx = next_mix
        next_mix += 1
        mixtures.append(idx)
        return idx

    actions.append(
        Action(
            action_type=ActionType.MAKE_SOLUTION,
            args={
                "solute": [chem(rng, SOLUTES) for _ in range(rng.randint(1, 2))],
                "solvent": chem(rng, SOLVENTS),
            },
            outputs=[produce()],
        )
    )
    reaction_choices = [
        ActionType.ADD,
        ActionType.WAIT,
        ActionType.CHANGE_TEMPERATURE,
        ActionType.CHANGE_ATMOSPHERE,
        ActionType.SONICATE,
    ]
    for _ in range(n_reaction):
        kind = rng.choice(reaction_choices)
        target = MixtureRef(rng.choice(mixtures))
        if kind is ActionType.ADD:
            args = {"source": [chem(rng, SOLUTES)], "target": target}
            if rng.random() < 0.5:
                args["time_period"] = quantity(rng, "time")
            if rng.random() < 0.3:
                args["method"] = "dropwise"
            actions.append(Action(kind, args, [produce()]))
        elif kind is ActionType.WAIT:
            actions.append(Action(kind, {"time_period": quantity(rng, "time")}, []))
        elif kind is ActionType.CHANGE_TEMPERATURE:
            args = {"target": target, "temperature": quantity(rng, "temperature"), "agent": chem(rng, AGENTS)}
            if rng.random() < 0.3:
                args["speed"] = "slowly"
            actions.append(Action(kind, args, []))
        elif kind is ActionType.CHANGE_ATMOSPHERE:
            actions.append(Action(kind, {"target": target, "atmosphere": rng.choice(GASES)}, []))
        else:
            actions.append(Action(kind, {"target": target, "time_period": quantity(rng, "time")}, []))
    workup_choices = [
        ActionType.QUENCH,
        ActionType.EXTRACT,
        ActionType.WASH,
        ActionType.DRY,
        ActionType.CONCENTRATE,
        ActionType.FILTER_SOLUTION,
    ]
    for _ in range(n_workup):
        kind = rng.choice(workup_choices)
        target = MixtureRef(rng.choice(mixtures))
        if kind is ActionType.QUENCH:
            actions.append(Action(kind, {"target": target, "agent": chem(rng, AGENTS)}, [produce()]))
        elif kind is ActionType.EXTRACT:
            args = {"target": target, "agent": chem(rng, SOLVENTS)}
            if rng.random() < 0.5:
                args["times"] = quantity(rng, "count")
            actions.append(Action(kind, args, [produce()]))
        elif kind is ActionType.WASH:
            actions.append(Action(kind, {"target": target, "solvent": chem(rng, SOLVENTS)}, [produce()]))
        elif kind is ActionType.DRY:
            args = {"target": target, "agent": chem(rng, AGENTS)}
            if rng.random() < 0.4:
                args["in_vacuum"] = rng.random() < 0.5
            actions.append(Action(kind, args, [produce()]))
        elif kind is ActionType.CONCENTRATE:
            args = {"target": target}
            if rng.random() < 0.5:
                args["in_vacuum"] = True
            actions.append(Action(kind, args, [produce()]))
        else:
            actions.append(Action(kind, {"target": target, "apparatus": rng.choice(APPARATUS)}, [produce(), produce()]))
    actions.append(
        Action(
            ActionType.YIELD_STATEMENT,
            {
                "product": chem(rng, SOLUTES),
                "target": MixtureRef(mixtures[-1]),
                "yield": quantity(rng, "fraction"),
            },
            [],
        )
    )
    return Procedure(actions=actions)


@pytest.fixture
def rng():
    return random.Random(20240811)
