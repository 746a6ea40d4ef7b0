"""
Static network data model.

This module provides the immutable records describing a transmission test
network: buses, pi-model branches, constant-impedance loads and generators,
plus the control/output label vocabulary shared by the plant and the
controllers.

Label grammar:
    P_<KIND><bus>   generator active power, machine-base per unit
    Q_<KIND><bus>   generator reactive power, machine-base per unit
    V<bus>          bus voltage magnitude, per unit
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
import re
from typing import Dict, List, Optional, Tuple

from .base_models import BaseModel, ValidationResult
from .dynamic_params import DynamicComponentParams


class NetworkDataError(Exception):
    """Exception raised for malformed or inconsistent network data."""
    pass


class BusKind(str, Enum):
    """Power-flow bus typing."""

    SLACK = 'Slack'
    PV = 'PV'
    PQ = 'PQ'


class GeneratorKind(str, Enum):
    """Generator technology; INF is an ideal source used by test networks."""

    GFM = 'GFM'
    GFL = 'GFL'
    SG = 'SG'
    INF = 'INF'


_LABEL_RE = re.compile(r'^(?:(P|Q)_(GFM|GFL|SG|INF)(\d+)|V(\d+))$')


@dataclass(frozen=True)
class QuantityLabel:
    """Parsed control/output label."""

    quantity: str          # 'P', 'Q' or 'V'
    bus: int
    kind: Optional[GeneratorKind] = None

    @classmethod
    def parse(cls, label: str) -> 'QuantityLabel':
        match = _LABEL_RE.match(label)
        if match is None:
            raise NetworkDataError(f"Unrecognized quantity label: {label!r}")
        if match.group(4) is not None:
            return cls(quantity='V', bus=int(match.group(4)))
        return cls(
            quantity=match.group(1),
            bus=int(match.group(3)),
            kind=GeneratorKind(match.group(2)),
        )


@dataclass(frozen=True)
class Bus(BaseModel):
    id: int
    kind: BusKind
    base_kv: float
    v_min: float = 0.9
    v_max: float = 1.1

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if not 0 < self.v_min < self.v_max:
            result.add_error(f"Bus {self.id}: voltage limits must satisfy 0 < v_min < v_max")
        if self.base_kv <= 0:
            result.add_error(f"Bus {self.id}: base voltage must be positive")
        return result


@dataclass(frozen=True)
class Branch(BaseModel):
    """Pi-model branch; transformers carry an off-nominal tap on the from side."""

    from_bus: int
    to_bus: int
    r: float
    x: float
    b_shunt: float = 0.0
    tap: float = 1.0
    kind: str = 'line'

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        name = f"Branch {self.from_bus}-{self.to_bus}"
        if self.x == 0:
            result.add_error(f"{name}: series reactance must be non-zero")
        if self.b_shunt < 0:
            result.add_error(f"{name}: charging susceptance cannot be negative")
        if self.tap <= 0:
            result.add_error(f"{name}: tap ratio must be positive")
        if self.from_bus == self.to_bus:
            result.add_error(f"{name}: branch endpoints must differ")
        if self.kind not in ('line', 'transformer'):
            result.add_error(f"{name}: unknown branch kind {self.kind!r}")
        return result


@dataclass(frozen=True)
class LoadSpec(BaseModel):
    bus: int
    participation: float
    power_factor: float = 1.0

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if not 0 < self.power_factor <= 1:
            result.add_error(f"Load at bus {self.bus}: power factor must lie in (0, 1]")
        if self.participation < 0:
            result.add_error(f"Load at bus {self.bus}: participation cannot be negative")
        return result


@dataclass(frozen=True)
class GeneratorSpec(BaseModel):
    bus: int
    kind: GeneratorKind
    rated_mva: float
    rated_kv: float
    p_min_frac: float = 0.2
    p_max_frac: float = 0.95
    dynamic_params: Optional[DynamicComponentParams] = None

    @property
    def label(self) -> str:
        return f"{self.kind.value}{self.bus}"

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if not 0 <= self.p_min_frac < self.p_max_frac <= 1:
            result.add_error(
                f"Generator {self.label}: operating range must satisfy 0 <= p_min < p_max <= 1"
            )
        if self.rated_mva <= 0:
            result.add_error(f"Generator {self.label}: rated power must be positive")
        if self.dynamic_params is not None:
            result = result.combine(self.dynamic_params.validate())
        return result


@dataclass(frozen=True)
class NetworkModel(BaseModel):
    """
    Immutable description of a test network.

    Buses are kept in file order; that order defines matrix indexing
    everywhere downstream (admittance matrix, power-flow vectors).
    """

    name: str
    buses: Tuple[Bus, ...]
    branches: Tuple[Branch, ...]
    loads: Tuple[LoadSpec, ...]
    generators: Tuple[GeneratorSpec, ...]
    system_mva_base: float = 100.0
    frequency_hz: float = 60.0
    demand_range: Tuple[float, float] = (0.0, 0.0)
    controls: Tuple[str, ...] = ()
    outputs: Tuple[str, ...] = ()
    _index: Dict[int, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, '_index', {bus.id: i for i, bus in enumerate(self.buses)})

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def bus_ids(self) -> List[int]:
        return [bus.id for bus in self.buses]

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise NetworkDataError(f"Unknown bus id: {bus_id}") from None

    @property
    def slack_bus(self) -> Bus:
        slack = [bus for bus in self.buses if bus.kind == BusKind.SLACK]
        if len(slack) != 1:
            raise NetworkDataError(f"Expected exactly one slack bus, found {len(slack)}")
        return slack[0]

    def generator_at(self, bus_id: int) -> Optional[GeneratorSpec]:
        for gen in self.generators:
            if gen.bus == bus_id:
                return gen
        return None

    def generator_by_label(self, label: QuantityLabel) -> GeneratorSpec:
        gen = self.generator_at(label.bus)
        if gen is None or gen.kind != label.kind:
            raise NetworkDataError(
                f"No {label.kind.value if label.kind else ''} generator at bus {label.bus}"
            )
        return gen

    def machine_scale(self, gen: GeneratorSpec) -> float:
        """Ratio converting machine-base per unit to system-base per unit."""
        return gen.rated_mva / self.system_mva_base

    def control_labels(self) -> List[QuantityLabel]:
        return [QuantityLabel.parse(label) for label in self.controls]

    def output_labels(self) -> List[QuantityLabel]:
        return [QuantityLabel.parse(label) for label in self.outputs]

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)

        for item in (*self.buses, *self.branches, *self.loads, *self.generators):
            result = result.combine(item.validate())

        n_slack = sum(1 for bus in self.buses if bus.kind == BusKind.SLACK)
        if n_slack != 1:
            result.add_error(f"Network must have exactly one slack bus, found {n_slack}")

        if len(self._index) != len(self.buses):
            result.add_error("Duplicate bus ids")

        for branch in self.branches:
            for end in (branch.from_bus, branch.to_bus):
                if end not in self._index:
                    result.add_error(f"Branch references unknown bus {end}")
        for load in self.loads:
            if load.bus not in self._index:
                result.add_error(f"Load references unknown bus {load.bus}")
        for gen in self.generators:
            if gen.bus not in self._index:
                result.add_error(f"Generator references unknown bus {gen.bus}")

        if self.loads:
            total = sum(load.participation for load in self.loads)
            if abs(total - 1.0) > 1e-9:
                result.add_error(f"Load participations sum to {total:.6f}, expected 1")

        lo, hi = self.demand_range
        if lo < 0 or hi < lo:
            result.add_error(f"Invalid demand range: {self.demand_range}")

        if result.is_valid and not self._is_connected():
            result.add_error("Network graph is not connected")

        if result.is_valid:
            result = result.combine(self._validate_labels())

        return result

    def _is_connected(self) -> bool:
        if not self.buses:
            return False
        adjacency: Dict[int, List[int]] = {bus.id: [] for bus in self.buses}
        for branch in self.branches:
            adjacency[branch.from_bus].append(branch.to_bus)
            adjacency[branch.to_bus].append(branch.from_bus)

        start = self.buses[0].id
        seen = {start}
        queue = deque([start])
        while queue:
            for neighbour in adjacency[queue.popleft()]:
                if neighbour not in seen:
                    seen.add(neighbour)
                    queue.append(neighbour)
        return len(seen) == len(self.buses)

    def _validate_labels(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        controls: List[QuantityLabel] = []
        for label in (*self.controls, *self.outputs):
            try:
                parsed = QuantityLabel.parse(label)
                if parsed.quantity == 'V':
                    self.bus_index(parsed.bus)
                else:
                    self.generator_by_label(parsed)
            except NetworkDataError as e:
                result.add_error(str(e))
                continue
            if label in self.controls:
                controls.append(parsed)
        if not result.is_valid:
            return result

        if len(set(self.controls)) != len(self.controls):
            result.add_error("Duplicate control labels")

        for parsed in controls:
            kind = self.buses[self.bus_index(parsed.bus)].kind
            if parsed.quantity == 'Q':
                result.add_error(f"Reactive power cannot be a control ({parsed})")
            elif parsed.quantity == 'P' and kind != BusKind.PV:
                result.add_error(f"Active-power control at bus {parsed.bus} requires a PV bus")
            elif parsed.quantity == 'V' and kind == BusKind.PQ:
                result.add_error(f"Voltage control at PQ bus {parsed.bus}")

        controlled = {(c.quantity, c.bus) for c in controls}
        for bus in self.buses:
            if bus.kind == BusKind.PQ:
                continue
            if ('V', bus.id) not in controlled:
                result.add_error(f"Voltage at {bus.kind.value} bus {bus.id} is not a control")
            if bus.kind == BusKind.PV:
                if self.generator_at(bus.id) is None:
                    result.add_error(f"PV bus {bus.id} hosts no generator")
                if ('P', bus.id) not in controlled:
                    result.add_error(f"Active power at PV bus {bus.id} is not a control")
        return result
