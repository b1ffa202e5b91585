"""Symbolic execution of procedures (mixture registry) and well-formedness
checks: terminal yield statement, defined mixture references, parameter kinds,
necessary parameters, output arity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .grammar import ChemicalLiteral, MixtureRef, Procedure, ProcedureSyntaxError, QuantityLiteral
from .schema import DEFAULT_SCHEMA, ActionType, ParamKind, SchemaConfig

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    ordinal: int  # 1-based action position; 0 for whole-procedure findings


@dataclass
class ValidationReport:
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity == ERROR for d in self.diagnostics)

    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == ERROR]

    def to_json_dict(self) -> dict:
        return {
            "ok": self.ok,
            "diagnostics": [
                {"severity": d.severity, "code": d.code, "message": d.message, "ordinal": d.ordinal}
                for d in self.diagnostics
            ],
        }


@dataclass
class MixtureProvenance:
    created_by: int  # action ordinal that produced it
    consumed_by: list[int] = field(default_factory=list)


@dataclass
class ExecutionTrace:
    mixtures: dict[int, MixtureProvenance]
    final_products: list[str]


class PreconditionViolated(ValueError):
    pass


def kind_ok(value, kind: ParamKind, config: SchemaConfig) -> bool:
    """Pure kind check; quantities with nonstandard units pass (they are
    warned about separately, not rejected)."""
    k = kind.kind
    if k == "mixture_ref":
        return isinstance(value, MixtureRef)
    if k == "flag":
        return isinstance(value, bool)
    if k == "free_text":
        return isinstance(value, str)
    if k == "chemical_list":
        items = value if isinstance(value, list) else [value]
        return all(isinstance(item, (ChemicalLiteral, MixtureRef)) for item in items)
    if k == "quantity":
        items = value if isinstance(value, list) else [value]
        for item in items:
            if not isinstance(item, QuantityLiteral):
                return False
            if (
                not item.nonstandard
                and kind.dimension is not None
                and config.dimension_of_unit(item.unit) != kind.dimension
            ):
                return False
        return True
    return False


def _iter_nonstandard_units(value):
    if isinstance(value, QuantityLiteral):
        if value.nonstandard:
            yield value.unit
    elif isinstance(value, ChemicalLiteral):
        for q in value.quantities.values():
            yield from _iter_nonstandard_units(q)
    elif isinstance(value, list):
        for item in value:
            yield from _iter_nonstandard_units(item)


def _iter_mixture_refs(value):
    if isinstance(value, MixtureRef):
        yield value
    elif isinstance(value, ChemicalLiteral):
        return
    elif isinstance(value, list):
        for item in value:
            yield from _iter_mixture_refs(item)


def validate(p: Procedure, config: SchemaConfig = DEFAULT_SCHEMA) -> ValidationReport:
    """Check a parsed procedure; the report carries all findings (never raises)."""
    report = ValidationReport()
    produced: dict[int, int] = {}  # mixture index -> producing ordinal
    consumed: set[int] = set()

    if not p.actions:
        report.diagnostics.append(Diagnostic(ERROR, "EmptyProcedure", "procedure has no actions", 0))
        return report

    for ordinal, action in enumerate(p.actions, start=1):
        schema = config.schema_for(action.action_type)
        if action.action_type is ActionType.SUPPLEMENT_INFORMATION:
            report.diagnostics.append(
                Diagnostic(WARNING, "SupplementInformation", "supplement_information is not schema-conformant", ordinal)
            )
        known = set(schema.param_names())
        for name, value in action.args.items():
            if name not in known:
                report.diagnostics.append(
                    Diagnostic(ERROR, "UnknownParam", f"{action.action_type.value} has no parameter {name!r}", ordinal)
                )
                continue
            if not kind_ok(value, schema.kind_of(name), config):
                report.diagnostics.append(
                    Diagnostic(
                        ERROR,
                        "ParamKindMismatch",
                        f"parameter {name!r} of {action.action_type.value} has the wrong kind of value",
                        ordinal,
                    )
                )
            for unit in _iter_nonstandard_units(value):
                report.diagnostics.append(
                    Diagnostic(WARNING, "NonstandardUnit", f"unit {unit!r} for {name!r} is not in the unit table", ordinal)
                )
            for ref in _iter_mixture_refs(value):
                if ref.index not in produced:
                    report.diagnostics.append(
                        Diagnostic(ERROR, "UndefinedMixture", f"mix({ref.index}) used before being produced", ordinal)
                    )
                else:
                    consumed.add(ref.index)
        for name in schema.group("necessary"):
            if name not in action.args:
                report.diagnostics.append(
                    Diagnostic(
                        ERROR,
                        "MissingNecessaryParam",
                        f"{action.action_type.value} is missing necessary parameter {name!r}",
                        ordinal,
                    )
                )
        if len(action.outputs) > schema.outputs:
            report.diagnostics.append(
                Diagnostic(
                    ERROR,
                    "OutputArity",
                    f"{action.action_type.value} declares {len(action.outputs)} outputs, schema allows {schema.outputs}",
                    ordinal,
                )
            )
        for out in action.outputs:
            if out in produced:
                report.diagnostics.append(
                    Diagnostic(ERROR, "DuplicateMixture", f"mix({out}) produced more than once", ordinal)
                )
            else:
                produced[out] = ordinal

    if p.actions[-1].action_type is not ActionType.YIELD_STATEMENT:
        report.diagnostics.append(
            Diagnostic(ERROR, "MissingYield", "the final action must be yield_statement", len(p.actions))
        )

    for index, ordinal in produced.items():
        if index not in consumed:
            report.diagnostics.append(
                Diagnostic(WARNING, "UnusedMixture", f"mix({index}) is produced but never used", ordinal)
            )
    return report


def validate_text(text: str, config: SchemaConfig = DEFAULT_SCHEMA) -> ValidationReport:
    """Parse then validate; parse failures become error diagnostics instead of
    exceptions (ordinal 0, code SyntaxError)."""
    from .grammar import parse_procedure

    try:
        procedure = parse_procedure(text, config)
    except ProcedureSyntaxError as exc:
        report = ValidationReport()
        report.diagnostics.append(Diagnostic(ERROR, "SyntaxError", str(exc), 0))
        return report
    return validate(procedure, config)


def execute(p: Procedure, config: SchemaConfig = DEFAULT_SCHEMA) -> ExecutionTrace:
    """Run the mixture dataflow of a valid procedure; deterministic.

    Raises PreconditionViolated when called on a procedure that does not
    validate cleanly.
    """
    report = validate(p, config)
    if not report.ok:
        raise PreconditionViolated(f"procedure does not validate: {report.errors()[0].message}")
    mixtures: dict[int, MixtureProvenance] = {}
    final_products: list[str] = []
    for ordinal, action in enumerate(p.actions, start=1):
        for value in action.args.values():
            for ref in _iter_mixture_refs(value):
                mixtures[ref.index].consumed_by.append(ordinal)
        for out in action.outputs:
            mixtures[out] = MixtureProvenance(created_by=ordinal)
        if action.action_type is ActionType.YIELD_STATEMENT:
            product = action.args.get("product")
            items = product if isinstance(product, list) else [product]
            final_products.extend(item.name for item in items if isinstance(item, ChemicalLiteral))
    return ExecutionTrace(mixtures=mixtures, final_products=final_products)
