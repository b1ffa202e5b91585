"""Structural deconstruction of a procedure into a factual skeleton: reaction
vs workup phase split, entity roles, addition order, atmosphere, and a fixed
sentence rendering of the record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .grammar import Action, ChemicalLiteral, Procedure
from .schema import ActionType

# Actions whose first appearance starts the workup phase. Configurable;
# chemistry-specific judgment calls belong in data, not logic.
DEFAULT_WORKUP_ACTIONS = frozenset(
    {
        ActionType.QUENCH,
        ActionType.EXTRACT,
        ActionType.FILTER_SOLUTION,
        ActionType.WASH,
        ActionType.PARTITION,
        ActionType.CONCENTRATE,
        ActionType.DRY,
        ActionType.CHROMATOGRAPH,
        ActionType.RECRYSTALLIZE,
        ActionType.DISTILL,
        ActionType.TRITURATE,
        ActionType.OTHER_PURIFICATION,
    }
)

ROLE_REACTANT = "reactant"
ROLE_CATALYST = "catalyst"
ROLE_REAGENT = "reagent"
ROLE_SOLVENT = "solvent"
ROLE_PRODUCT = "product"
ROLE_UNKNOWN = "unknown"

# (action, param) positions that imply a role when no annotation is given
_ROLE_RULES: dict[tuple[ActionType, str], str] = {
    (ActionType.MAKE_SOLUTION, "solvent"): ROLE_SOLVENT,
    (ActionType.EXTRACT, "agent"): ROLE_SOLVENT,
    (ActionType.WASH, "solvent"): ROLE_SOLVENT,
    (ActionType.QUENCH, "agent"): ROLE_REAGENT,
    (ActionType.YIELD_STATEMENT, "product"): ROLE_PRODUCT,
}


@dataclass
class FactualSkeleton:
    reaction_phase: Optional[tuple[int, int]]  # 1-based inclusive ordinal range
    workup_phase: Optional[tuple[int, int]]
    entities: list[tuple[str, str]]  # (name, role)
    addition_order: list[str]
    atmosphere: Optional[tuple[str, int]]  # (gas, ordinal)
    reaction_name: Optional[str]
    reaction: str = ""
    text: str = ""

    def to_json_dict(self) -> dict:
        return {
            "reaction_phase": list(self.reaction_phase) if self.reaction_phase else None,
            "workup_phase": list(self.workup_phase) if self.workup_phase else None,
            "entities": [{"name": n, "role": r} for n, r in self.entities],
            "addition_order": list(self.addition_order),
            "atmosphere": {"gas": self.atmosphere[0], "ordinal": self.atmosphere[1]} if self.atmosphere else None,
            "reaction_name": self.reaction_name,
            "reaction": self.reaction,
            "text": self.text,
        }


def split_phases(
    p: Procedure, workup_actions: frozenset[ActionType] = DEFAULT_WORKUP_ACTIONS
) -> tuple[Optional[tuple[int, int]], Optional[tuple[int, int]]]:
    """Workup starts at the first action of a workup type; depends only on
    action types. Either phase may be empty (None)."""
    n = len(p.actions)
    boundary = None
    for ordinal, action in enumerate(p.actions, start=1):
        if action.action_type in workup_actions:
            boundary = ordinal
            break
    if boundary is None:
        return (1, n) if n else None, None
    reaction = (1, boundary - 1) if boundary > 1 else None
    return reaction, (boundary, n)


def _chem_names(action: Action, param: str) -> list[str]:
    value = action.args.get(param)
    items = value if isinstance(value, list) else [value]
    return [item.name for item in items if isinstance(item, ChemicalLiteral)]


def _all_chem_names(action: Action) -> list[str]:
    names = []
    for param in action.args:
        names.extend(_chem_names(action, param))
    return names


def assign_roles(p: Procedure, annotations: Optional[dict[str, str]] = None) -> dict[str, str]:
    """Role per entity: explicit annotations win, positional heuristics fill
    in, everything else stays unknown (never guessed)."""
    annotations = annotations or {}
    roles: dict[str, str] = {}
    for action in p.actions:
        for param in action.args:
            rule = _ROLE_RULES.get((action.action_type, param))
            for name in _chem_names(action, param):
                if name in annotations:
                    roles[name] = annotations[name]
                elif rule is not None and roles.get(name, ROLE_UNKNOWN) == ROLE_UNKNOWN:
                    roles[name] = rule
                else:
                    roles.setdefault(name, ROLE_UNKNOWN)
    return roles


def _addition_order(p: Procedure) -> list[str]:
    order: list[str] = []
    seen = set()
    for action in p.actions:
        if action.action_type is ActionType.ADD:
            params = ("source",)
        elif action.action_type is ActionType.MAKE_SOLUTION:
            params = ("solute", "solvent")
        else:
            continue
        for param in params:
            for name in _chem_names(action, param):
                if name not in seen:
                    seen.add(name)
                    order.append(name)
    return order


def _find_atmosphere(p: Procedure) -> Optional[tuple[str, int]]:
    for ordinal, action in enumerate(p.actions, start=1):
        if action.action_type is ActionType.CHANGE_ATMOSPHERE:
            gas = action.args.get("atmosphere")
            if isinstance(gas, str):
                return gas, ordinal
    return None


def _render_text(s: FactualSkeleton) -> str:
    lines = []
    if s.reaction:
        lines.append(f"The reaction under study is {s.reaction}.")
    if s.reaction_name:
        lines.append(f"The transformation is known as the {s.reaction_name}.")
    if s.reaction_phase:
        lines.append(f"The reaction phase spans steps {s.reaction_phase[0]} through {s.reaction_phase[1]}.")
    else:
        lines.append("The procedure has no distinct reaction phase.")
    if s.workup_phase:
        lines.append(f"The workup phase spans steps {s.workup_phase[0]} through {s.workup_phase[1]}.")
    else:
        lines.append("The procedure has no workup phase.")
    for name, role in s.entities:
        lines.append(f"The entity {name} acts as {role}.")
    if s.addition_order:
        lines.append("Components are introduced in the order: " + ", ".join(s.addition_order) + ".")
    if s.atmosphere:
        lines.append(f"The procedure is run under a {s.atmosphere[0]} atmosphere from step {s.atmosphere[1]}.")
    return "\n".join(lines)


def build_skeleton(
    reaction: str,
    p: Procedure,
    annotations: Optional[dict[str, str]] = None,
    reaction_name: Optional[str] = None,
    workup_actions: frozenset[ActionType] = DEFAULT_WORKUP_ACTIONS,
) -> FactualSkeleton:
    """Assemble the full record plus its deterministic text rendering."""
    reaction_phase, workup_phase = split_phases(p, workup_actions)
    roles = assign_roles(p, annotations)
    entities = sorted(roles.items())
    skeleton = FactualSkeleton(
        reaction_phase=reaction_phase,
        workup_phase=workup_phase,
        entities=entities,
        addition_order=_addition_order(p),
        atmosphere=_find_atmosphere(p),
        reaction_name=reaction_name,
        reaction=reaction,
    )
    skeleton.text = _render_text(skeleton)
    return skeleton
