"""Plain-text model files.

A model file consists of sections, each introduced by a ``[name]`` line::

    # comments start with a hash
    [base]
    t, x
    [fields]
    phi, psi
    [parameters]
    mu_1, mu_2
    [lagrangian]
    1/2*phi_t*phi_x + phi_x^3 + phi_x*psi_x + 1/2*psi^2
    [symmetry]
    phi
    [momentum]
    phi.t = mu_1(t, x)
    phi.x = mu_2(t, x)

``[base]``, ``[fields]``, ``[parameters]`` and ``[symmetry]`` list names. ``[lagrangian]``
holds one expression that may span several lines. The remaining sections hold
``key = expression`` entries:

- ``[force]``: ``psi = F`` for ``F_psi`` and ``phi.psi.t = F`` for ``F^t_phi,psi``
- ``[connection]``: ``phi.t = Γ`` for ``Γ^phi_t`` and ``phi.psi = Γ`` for ``Γ^phi_psi``
- ``[momentum]``: ``phi.t = μ`` for the ``dt`` coefficient of ``μ_phi`` (two base coordinates
  only) or ``phi.eta.t = μ̂`` for its ``η_t`` component
- ``[reduced-names]``: ``sigma_phi_t = sigma`` renames a reduced field
"""
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from importlib.resources import files
from logging import getLogger
from re import fullmatch

from fieldrouth.base_types import Chart, ChartError, Expr, JetOrderError
from fieldrouth.expr import ExprSyntaxError, UnknownIdentifierError, parse_expr
from fieldrouth.forms import DifferentialForm, coordinate_form
from fieldrouth.model import FieldModel, Force, ForceKey, ModelValidationError
from fieldrouth.routh import ConnectionData, ConnectionValidationError
from fieldrouth.symmetry import (CyclicAction, InvarianceError, MomentumNotClosedError,
                                 MomentumValue, MomentumValueError, check_invariance,
                                 check_momentum_closed)

logger = getLogger(__name__)

SECTIONS = ("base", "fields", "parameters", "lagrangian", "force", "symmetry", "connection",
            "momentum", "reduced-names")


@dataclass(frozen=True)
class ModelLocation:
    """The position of an entry in a model file, rendered like ``line 7 [connection]``."""

    line: int
    section: str | None = None

    def __str__(self) -> str:
        return f"line {self.line}" + (f" [{self.section}]" if self.section else "")


class ModelFileError(ValueError):
    def __init__(self, location: ModelLocation, reason: str) -> None:
        self._location = location
        super().__init__(f"Invalid model file at {location}: {reason}", location, reason)

    @property
    def location(self) -> ModelLocation:
        return self._location


@dataclass(frozen=True)
class RawEntry:
    location: ModelLocation
    key: str | None
    value: str


@dataclass(frozen=True)
class RawSection:
    name: str
    location: ModelLocation
    entries: tuple[RawEntry, ...]


def _read_sections(text: str) -> Mapping[str, RawSection]:
    sections: dict[str, RawSection] = {}
    current: tuple[str, ModelLocation, list[RawEntry]] | None = None

    def close() -> None:
        if current:
            name, location, entries = current
            sections[name] = RawSection(name, location, tuple(entries))

    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if header := fullmatch(r"\[\s*([A-Za-z-]+)\s*\]", content):
            close()
            name = header.group(1)
            location = ModelLocation(number, name)
            if name not in SECTIONS:
                raise ModelFileError(location, f"unknown section, expected one of {SECTIONS}")
            if name in sections or (current and current[0] == name):
                raise ModelFileError(location, "duplicate section")
            current = (name, location, [])
            continue
        if current is None:
            raise ModelFileError(ModelLocation(number), "entry outside of a section")
        location = ModelLocation(number, current[0])
        key, separator, value = content.partition("=")
        current[2].append(RawEntry(location, key.strip(), value.strip()) if separator
                          else RawEntry(location, None, content))
    close()
    return sections


@dataclass
class ModelDraft:
    """The state collected from the sections handled so far."""

    base: tuple[str, ...] = ()
    fields: tuple[str, ...] = ()
    parameters: tuple[str, ...] = ()
    cyclic: tuple[str, ...] = ()
    locations: dict[str, ModelLocation] = field(default_factory=dict)
    lagrangian: Expr | None = None
    linear_force: dict[str, Expr] = field(default_factory=dict)
    pair_force: dict[ForceKey, Expr] = field(default_factory=dict)
    gamma: dict[tuple[str, str], Expr] = field(default_factory=dict)
    covector: dict[str, dict[str, Expr]] = field(default_factory=dict)
    eta: dict[str, dict[str, Expr]] = field(default_factory=dict)
    aliases: dict[str, str] = field(default_factory=dict)
    _chart: Chart | None = None

    @property
    def chart(self) -> Chart:
        assert self._chart, "chart is built after the declaration sections"
        return self._chart

    def build_chart(self, location: ModelLocation) -> None:
        try:
            self._chart = Chart(self.base, self.fields, self.parameters)
        except ChartError as e:
            raise ModelFileError(location, str(e)) from e

    def location(self, section: str) -> ModelLocation:
        return self.locations.get(section, ModelLocation(1))


def _parse(entry: RawEntry, draft: ModelDraft) -> Expr:
    try:
        return parse_expr(entry.value, draft.chart)
    except (ExprSyntaxError, UnknownIdentifierError, JetOrderError) as e:
        raise ModelFileError(entry.location, str(e)) from e


def _names(entries: Iterable[RawEntry]) -> tuple[str, ...]:
    names = []
    for entry in entries:
        if entry.key is not None:
            raise ModelFileError(entry.location, "expected a comma separated list of names")
        names.extend(n.strip() for n in entry.value.split(",") if n.strip())
    return tuple(names)


def _split_key(entry: RawEntry, parts: Sequence[int]) -> list[str]:
    assert entry.key is not None
    split = entry.key.split(".")
    if len(split) not in parts or not all(split):
        raise ModelFileError(entry.location, f"malformed key '{entry.key}'")
    return split


def _require(entry: RawEntry, ok: bool, reason: str) -> None:
    if not ok:
        raise ModelFileError(entry.location, reason)


def _keyed(entries: Iterable[RawEntry]) -> Iterable[RawEntry]:
    for entry in entries:
        _require(entry, entry.key is not None and bool(entry.value),
                 "expected an entry of the form key = expression")
        yield entry


class SectionHandler(ABC):
    """Turns the entries of the sections it can handle into state of a :class:`ModelDraft`.

    Handlers run in a fixed order, the handlers of the declaration sections first, so later
    handlers can rely on the chart.
    """

    @abstractmethod
    def can_handle(self, section: str) -> bool:
        """Return if this handles the section of the given name."""

    @abstractmethod
    def handle(self, section: RawSection, draft: ModelDraft) -> None:
        """Record the entries of ``section`` in ``draft``.

        Raises:
            ModelFileError: if an entry is malformed or references undeclared names.
        """


class DeclarationHandler(SectionHandler):
    _targets: Mapping[str, str] = {"base": "base", "fields": "fields",
                                   "parameters": "parameters", "symmetry": "cyclic"}

    def can_handle(self, section: str) -> bool:
        return section in self._targets

    def handle(self, section: RawSection, draft: ModelDraft) -> None:
        setattr(draft, self._targets[section.name], _names(section.entries))


class ChartHandler(SectionHandler):
    """Builds the chart once all declarations are known. Handles no section of its own."""

    def can_handle(self, section: str) -> bool:
        return section == "base"

    def handle(self, section: RawSection, draft: ModelDraft) -> None:
        draft.build_chart(section.location)
        if unknown := [a for a in draft.cyclic if a not in draft.fields]:
            raise ModelFileError(draft.location("symmetry"),
                                 f"cyclic fields {unknown} are not declared fields")


class LagrangianHandler(SectionHandler):
    def can_handle(self, section: str) -> bool:
        return section == "lagrangian"

    def handle(self, section: RawSection, draft: ModelDraft) -> None:
        if not section.entries:
            raise ModelFileError(section.location, "missing Lagrangian expression")
        if keyed := [e for e in section.entries if e.key is not None]:
            raise ModelFileError(keyed[0].location, "the Lagrangian is a single expression")
        text = " ".join(e.value for e in section.entries)
        draft.lagrangian = _parse(RawEntry(section.entries[0].location, None, text), draft)


class ForceHandler(SectionHandler):
    def can_handle(self, section: str) -> bool:
        return section == "force"

    def handle(self, section: RawSection, draft: ModelDraft) -> None:
        chart = draft.chart
        for entry in _keyed(section.entries):
            key = _split_key(entry, (1, 3))
            _require(entry, all(k in chart.fields for k in key[:2]) and len(set(key[:2])) ==
                     min(len(key), 2), f"'{entry.key}' must reference distinct declared fields")
            if len(key) == 1:
                draft.linear_force[key[0]] = _parse(entry, draft)
            else:
                _require(entry, key[2] in chart.base, f"{key[2]} is not a base coordinate")
                draft.pair_force[key[0], key[1], key[2]] = _parse(entry, draft)


class ConnectionHandler(SectionHandler):
    def can_handle(self, section: str) -> bool:
        return section == "connection"

    def handle(self, section: RawSection, draft: ModelDraft) -> None:
        chart = draft.chart
        for entry in _keyed(section.entries):
            a, target = _split_key(entry, (2,))
            _require(entry, a in draft.cyclic, f"{a} is not a cyclic field")
            _require(entry, target in chart.base or target in chart.fields,
                     f"{target} is neither a base coordinate nor a field")
            draft.gamma[a, target] = _parse(entry, draft)


class MomentumHandler(SectionHandler):
    def can_handle(self, section: str) -> bool:
        return section == "momentum"

    def handle(self, section: RawSection, draft: ModelDraft) -> None:
        chart = draft.chart
        for entry in _keyed(section.entries):
            key = _split_key(entry, (2, 3))
            a, coordinate = key[0], key[-1]
            _require(entry, a in draft.cyclic, f"{a} is not a cyclic field")
            _require(entry, coordinate in chart.base, f"{coordinate} is not a base coordinate")
            if len(key) == 3:
                _require(entry, key[1] == "eta", f"malformed key '{entry.key}'")
                _require(entry, a not in draft.covector, f"mixed bases for the momentum of {a}")
                draft.eta.setdefault(a, {})[coordinate] = _parse(entry, draft)
            else:
                _require(entry, chart.m == 2,
                         "covector entries need two base coordinates, use <field>.eta.<coord>")
                _require(entry, a not in draft.eta, f"mixed bases for the momentum of {a}")
                draft.covector.setdefault(a, {})[coordinate] = _parse(entry, draft)


class ReducedNamesHandler(SectionHandler):
    def can_handle(self, section: str) -> bool:
        return section == "reduced-names"

    def handle(self, section: RawSection, draft: ModelDraft) -> None:
        expected = {f"sigma_{a}_{x}" for a in draft.cyclic for x in draft.chart.base}
        for entry in _keyed(section.entries):
            assert entry.key is not None
            _require(entry, entry.key in expected, f"{entry.key} is not one of {sorted(expected)}")
            _require(entry, bool(fullmatch(r"[A-Za-z][A-Za-z0-9_]*", entry.value)),
                     f"{entry.value} is not a name")
            draft.aliases[entry.key] = entry.value


HANDLERS: tuple[SectionHandler, ...] = (DeclarationHandler(), ChartHandler(), LagrangianHandler(),
                                        ForceHandler(), ConnectionHandler(), MomentumHandler(),
                                        ReducedNamesHandler())


@dataclass(frozen=True)
class ModelFile:
    """The validated content of a model file."""

    model: FieldModel
    action: CyclicAction
    connection: ConnectionData
    momentum: MomentumValue
    aliases: Mapping[str, str]
    covector_momentum: bool

    @property
    def chart(self) -> Chart:
        return self.model.chart

    def flat(self) -> "ModelFile":
        return ModelFile(self.model, self.action, ConnectionData.flat(self.chart, self.action),
                         self.momentum, self.aliases, self.covector_momentum)


def _wrapped(location: ModelLocation, build: Callable[[], object]) -> object:
    try:
        return build()
    except (ModelValidationError, ConnectionValidationError, InvarianceError,
            MomentumNotClosedError, MomentumValueError, ChartError) as e:
        raise ModelFileError(location, str(e)) from e


def parse_model_file(text: str) -> ModelFile:
    """Parse and validate a model file.

    Defaults: no force, the flat connection and zero momentum.

    Raises:
        ModelFileError: with the location of the offending entry or section if the file is
            malformed, references undeclared names, or the model is not invariant under the
            declared symmetry or the momentum value is not closed.
    """
    sections = _read_sections(text)
    for required in ("base", "fields", "lagrangian"):
        if required not in sections:
            raise ModelFileError(ModelLocation(1), f"missing section [{required}]")
    draft = ModelDraft(locations={name: s.location for name, s in sections.items()})
    for handler in HANDLERS:
        for name, section in sections.items():
            if handler.can_handle(name):
                handler.handle(section, draft)
    chart = draft.chart
    assert draft.lagrangian is not None
    lagrangian = draft.lagrangian
    action = CyclicAction(draft.cyclic)
    force = _wrapped(draft.location("force"), lambda: Force.of(draft.linear_force,
                                                               draft.pair_force))
    assert isinstance(force, Force)
    _wrapped(draft.location("force"), lambda: force.validate(chart))
    model = _wrapped(draft.location("lagrangian"), lambda: FieldModel(chart, lagrangian, force))
    assert isinstance(model, FieldModel)
    if action.cyclic_fields:
        _wrapped(draft.location("symmetry"), lambda: check_invariance(model, action))
    connection = _wrapped(draft.location("connection"),
                          lambda: ConnectionData(chart, action, draft.gamma))
    assert isinstance(connection, ConnectionData)
    momentum = _wrapped(draft.location("momentum"), lambda: _momentum(draft, chart, action))
    assert isinstance(momentum, MomentumValue)
    _wrapped(draft.location("momentum"), lambda: check_momentum_closed(momentum))
    logger.debug("Parsed model over %s with fields %s", chart.base, chart.fields)
    return ModelFile(model, action, connection, momentum, dict(draft.aliases),
                     bool(draft.covector))


def _momentum(draft: ModelDraft, chart: Chart, action: CyclicAction) -> MomentumValue:
    covectors: dict[str, DifferentialForm] = {a: coordinate_form(chart, entries)
                                              for a, entries in draft.covector.items()}
    from_covector = MomentumValue.from_covector(chart, covectors)
    zero = MomentumValue.zero(chart, action.cyclic_fields)
    components = {a: tuple(draft.eta[a].get(x, zero.component(a, x)) for x in chart.base)
                  for a in draft.eta}
    return MomentumValue(chart, {**zero.components, **from_covector.components, **components})


def shipped_model(name: str) -> str:
    """Return the text of a model file shipped with this package, e.g. ``kdv``."""
    resource = files("fieldrouth.models").joinpath(f"{name}.model")
    if not resource.is_file():
        raise FileNotFoundError(f"no shipped model named {name}")
    return resource.read_text(encoding="utf-8")


def shipped_models() -> tuple[str, ...]:
    return tuple(sorted(r.name.removesuffix(".model") for r in files("fieldrouth.models").iterdir()
                        if r.name.endswith(".model")))
