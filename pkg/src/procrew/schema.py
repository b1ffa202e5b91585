"""Action schema: the closed set of laboratory actions, their parameters, and
the necessary/optional grouping used by the reward engine.

The set of action types and the kind of each parameter are fixed in code; the
necessary/optional grouping, output arities, unit table, and match tolerances
are data, loaded from a JSON config (a default ships with the package and can
be overridden with ``--schema PATH``).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional


class ActionType(enum.Enum):
    """One variant per action row, plus the free-form escape variant."""

    ADD = "add"
    CHANGE_ATMOSPHERE = "change_atmosphere"
    CHANGE_PH = "change_ph"
    CHANGE_PRESSURE = "change_pressure"
    CHANGE_TEMPERATURE = "change_temperature"
    CHROMATOGRAPH = "chromatograph"
    CONCENTRATE = "concentrate"
    DEGAS = "degas"
    DISTILL = "distill"
    DRY = "dry"
    EXTRACT = "extract"
    FILTER_SOLUTION = "filter_solution"
    IRRADIATE = "irradiate"
    MAKE_SOLUTION = "make_solution"
    MICROWAVE = "microwave"
    OTHER_PURIFICATION = "other_purification"
    PARTITION = "partition"
    QUENCH = "quench"
    RECRYSTALLIZE = "recrystallize"
    SAMPLE = "sample"
    SONICATE = "sonicate"
    TRITURATE = "triturate"
    WAIT = "wait"
    WASH = "wash"
    YIELD_STATEMENT = "yield_statement"
    SUPPLEMENT_INFORMATION = "supplement_information"


ACTION_BY_NAME = {a.value: a for a in ActionType}


@dataclass(frozen=True)
class ParamKind:
    """Value kind of a parameter; ``dimension`` applies to quantities only
    (None means any dimension is accepted)."""

    kind: str  # chemical_list | mixture_ref | quantity | free_text | flag
    dimension: Optional[str] = None


CHEMS = ParamKind("chemical_list")
MIX = ParamKind("mixture_ref")
TEXT = ParamKind("free_text")
FLAG = ParamKind("flag")


def QTY(dimension: Optional[str] = None) -> ParamKind:
    return ParamKind("quantity", dimension)


# Parameter names and kinds per action, in canonical (rendering) order.
# Grouping into necessary/optional lives in the JSON config, not here.
PARAM_KINDS: dict[ActionType, tuple[tuple[str, ParamKind], ...]] = {
    ActionType.ADD: (("source", CHEMS), ("target", MIX), ("time_period", QTY("time")), ("method", TEXT)),
    ActionType.CHANGE_ATMOSPHERE: (("target", MIX), ("atmosphere", TEXT)),
    ActionType.CHANGE_PH: (("target", MIX), ("ph", QTY("ph")), ("agent", CHEMS)),
    ActionType.CHANGE_PRESSURE: (("target", MIX), ("pressure", QTY("pressure")), ("apparatus", TEXT)),
    ActionType.CHANGE_TEMPERATURE: (
        ("target", MIX),
        ("temperature", QTY("temperature")),
        ("speed", TEXT),
        ("apparatus", TEXT),
        ("agent", CHEMS),
    ),
    ActionType.CHROMATOGRAPH: (("target", MIX), ("column", TEXT), ("eluent", CHEMS)),
    ActionType.CONCENTRATE: (("target", MIX), ("in_vacuum", FLAG), ("apparatus", TEXT)),
    ActionType.DEGAS: (("target", MIX), ("agent", CHEMS), ("time_period", QTY("time"))),
    ActionType.DISTILL: (("target", MIX), ("agent_to_remove", CHEMS), ("apparatus", TEXT)),
    ActionType.DRY: (("target", MIX), ("in_vacuum", FLAG), ("agent", CHEMS), ("apparatus", TEXT)),
    ActionType.EXTRACT: (("target", MIX), ("agent", CHEMS), ("times", QTY("count"))),
    ActionType.FILTER_SOLUTION: (("target", MIX), ("apparatus", TEXT)),
    ActionType.IRRADIATE: (
        ("target", MIX),
        ("time_period", QTY("time")),
        ("apparatus", TEXT),
        ("wavelength", QTY("wavelength")),
    ),
    ActionType.MAKE_SOLUTION: (("solute", CHEMS), ("solvent", CHEMS), ("container", TEXT)),
    ActionType.MICROWAVE: (("target", MIX), ("time_period", QTY("time")), ("apparatus", TEXT)),
    ActionType.OTHER_PURIFICATION: (("target", MIX), ("method", TEXT), ("agent", CHEMS), ("apparatus", TEXT)),
    ActionType.PARTITION: (("target", MIX), ("solvents_1", CHEMS), ("solvents_2", CHEMS)),
    ActionType.QUENCH: (("target", MIX), ("agent", CHEMS)),
    ActionType.RECRYSTALLIZE: (("target", MIX), ("solvent", CHEMS), ("times", QTY("count"))),
    ActionType.SAMPLE: (("source", CHEMS), ("quantity", QTY(None))),
    ActionType.SONICATE: (("target", MIX), ("time_period", QTY("time")), ("apparatus", TEXT)),
    ActionType.TRITURATE: (("target", MIX), ("condition", TEXT), ("apparatus", TEXT)),
    ActionType.WAIT: (("time_period", QTY("time")),),
    ActionType.WASH: (("target", MIX), ("solvent", CHEMS), ("times", QTY("count"))),
    ActionType.YIELD_STATEMENT: (
        ("product", CHEMS),
        ("target", MIX),
        ("yield", QTY("fraction")),
        ("quantities", QTY(None)),
        ("purity", QTY("fraction")),
    ),
    ActionType.SUPPLEMENT_INFORMATION: (("info", TEXT),),
}

NECESSARY = "necessary"
OPTIONAL = "optional"


class UnknownParamError(KeyError):
    """Raised when a parameter name is not part of an action's schema."""


@dataclass(frozen=True)
class ParamSchema:
    """Full schema of one action: ordered params with kinds and grouping."""

    action: ActionType
    params: tuple[tuple[str, ParamKind, str], ...]  # (name, kind, group)
    outputs: int

    def param_names(self) -> tuple[str, ...]:
        return tuple(name for name, _, _ in self.params)

    def kind_of(self, name: str) -> ParamKind:
        for pname, kind, _ in self.params:
            if pname == name:
                return kind
        raise UnknownParamError(name)

    def group_of(self, name: str) -> str:
        for pname, _, group in self.params:
            if pname == name:
                return group
        raise UnknownParamError(name)

    def group(self, group: str) -> tuple[str, ...]:
        return tuple(name for name, _, g in self.params if g == group)


@dataclass(frozen=True)
class UnitDef:
    dimension: str
    scale: float  # units per canonical unit
    offset: float = 0.0  # canonical = (value - offset) / scale


@dataclass(frozen=True)
class SchemaConfig:
    """Immutable, loaded once; reloading produces a new instance."""

    schemas: dict[ActionType, ParamSchema] = field(repr=False)
    units: dict[str, UnitDef] = field(repr=False)
    canonical_units: dict[str, str] = field(repr=False)
    quantity_rel_tol: float = 0.01
    reward_defaults: dict = field(default_factory=dict, repr=False)

    def schema_for(self, action: ActionType) -> ParamSchema:
        return self.schemas[action]

    def canonicalize(self, value: float, unit: str) -> tuple[float, str, bool]:
        """Convert to the canonical unit of the unit's dimension.

        Returns (value, unit, is_standard); unknown units pass through
        unchanged with is_standard=False.
        """
        udef = self.units.get(unit)
        if udef is None:
            return value, unit, False
        canon = self.canonical_units[udef.dimension]
        if unit == canon:
            return value, unit, True
        return (value - udef.offset) / udef.scale, canon, True

    def dimension_of_unit(self, unit: str) -> Optional[str]:
        udef = self.units.get(unit)
        return udef.dimension if udef is not None else None


def _build_config(raw: dict) -> SchemaConfig:
    schemas: dict[ActionType, ParamSchema] = {}
    for action, kinds in PARAM_KINDS.items():
        entry = raw["actions"][action.value]
        nec = set(entry["necessary"])
        opt = set(entry["optional"])
        declared = {name for name, _ in kinds}
        unknown = (nec | opt) - declared
        if unknown:
            raise ValueError(f"config lists unknown params for {action.value}: {sorted(unknown)}")
        if nec & opt:
            raise ValueError(f"params both necessary and optional for {action.value}: {sorted(nec & opt)}")
        missing = declared - (nec | opt)
        if missing:
            raise ValueError(f"config misses params for {action.value}: {sorted(missing)}")
        params = tuple((name, kind, NECESSARY if name in nec else OPTIONAL) for name, kind in kinds)
        schemas[action] = ParamSchema(action=action, params=params, outputs=int(entry["outputs"]))
    units = {
        name: UnitDef(dimension=u["dimension"], scale=float(u["scale"]), offset=float(u.get("offset", 0.0)))
        for name, u in raw["units"].items()
    }
    return SchemaConfig(
        schemas=schemas,
        units=units,
        canonical_units=dict(raw["canonical_units"]),
        quantity_rel_tol=float(raw.get("tolerances", {}).get("quantity_rel", 0.01)),
        reward_defaults=dict(raw.get("reward", {})),
    )


def _load_default_raw() -> dict:
    data = resources.files("procrew.data").joinpath("default_schema.json").read_text(encoding="utf-8")
    return json.loads(data)


def load_schema_config(path: Optional[str] = None) -> SchemaConfig:
    """Load the default config, optionally overlaid with a JSON file.

    Overrides merge section by section; the action-type set itself never
    changes (extra action names in the file are rejected).
    """
    raw = _load_default_raw()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            override = json.load(fh)
        extra = set(override.get("actions", {})) - set(raw["actions"])
        if extra:
            raise ValueError(f"schema override names unknown actions: {sorted(extra)}")
        for name, entry in override.get("actions", {}).items():
            merged = dict(raw["actions"][name])
            merged.update(entry)
            raw["actions"][name] = merged
        raw["units"].update(override.get("units", {}))
        raw["canonical_units"].update(override.get("canonical_units", {}))
        raw.setdefault("tolerances", {}).update(override.get("tolerances", {}))
        raw.setdefault("reward", {}).update(override.get("reward", {}))
    return _build_config(raw)


DEFAULT_SCHEMA = load_schema_config()


def schema_lookup(action: ActionType, config: SchemaConfig = DEFAULT_SCHEMA) -> ParamSchema:
    """Total over all variants; pure."""
    return config.schema_for(action)


def classify_param(action: ActionType, param_name: str, config: SchemaConfig = DEFAULT_SCHEMA) -> str:
    """Return 'necessary' or 'optional'; raises UnknownParamError otherwise."""
    return config.schema_for(action).group_of(param_name)
