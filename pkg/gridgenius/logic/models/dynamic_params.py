"""
Dynamic component parameter records.

This module provides the per-machine control parameters consumed by the
small-signal linearizer. All quantities are on the machine base; time
constants are in seconds, frequencies in Hz.
"""

from dataclasses import dataclass, fields
from typing import Any, Dict, Type

from .base_models import BaseModel, ValidationResult


@dataclass(frozen=True)
class DynamicComponentParams(BaseModel):
    """Common base for generator dynamic parameter records."""

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                continue
            if f.name.endswith(('_tc', '_hz', '_l', '_kp')) and value <= 0:
                result.add_error(f"{type(self).__name__}.{f.name} must be positive, got {value}")
        return result


@dataclass(frozen=True)
class SGParams(DynamicComponentParams):
    """Synchronous machine: classical swing model with governor and AVR."""

    inertia_h: float = 3.0
    damping_d: float = 25.0
    xd_prime: float = 0.25
    ra: float = 0.0
    governor_droop: float = 0.05
    governor_tc: float = 0.5
    avr_gain: float = 5.0
    avr_tc: float = 0.5
    governor_enabled: bool = True
    avr_enabled: bool = True

    def validate(self) -> ValidationResult:
        result = super().validate()
        if self.inertia_h <= 0:
            result.add_error(f"SG inertia must be positive, got {self.inertia_h}")
        if self.xd_prime <= 0:
            result.add_error(f"SG transient reactance must be positive, got {self.xd_prime}")
        if self.governor_droop <= 0:
            result.add_error("SG governor droop must be positive")
        return result


@dataclass(frozen=True)
class GFMParams(DynamicComponentParams):
    """
    Grid-forming converter with droop outer loops.

    The voltage loop regulates the terminal magnitude through a PI stage
    feeding the internal EMF; the current loop is represented by its
    closed-loop lag. The loop also carries a resonance with a small
    negative intrinsic damping; it is driven by the terminal-voltage error
    and feeds the applied EMF, and that loop gain shrinks with modulation
    headroom.
    """

    p_droop: float = 0.05
    q_droop: float = 0.05
    power_filter_hz: float = 2.0
    voltage_kp: float = 1.0
    voltage_ki: float = 50.0
    current_kp: float = 0.1
    filter_l: float = 0.15
    filter_r: float = 0.003
    resonance_hz: float = 20.0
    coupling_gain: float = 16.0
    modulation_limit: float = 1.15
    negative_damping: float = 1.875
    ripple_gain: float = 0.01

    def validate(self) -> ValidationResult:
        result = super().validate()
        if self.p_droop <= 0 or self.q_droop < 0:
            result.add_error("GFM droop gains must be positive")
        if self.voltage_ki <= 0:
            result.add_error("GFM voltage-loop integral gain must be positive")
        if self.coupling_gain < 0 or self.negative_damping < 0:
            result.add_error("GFM resonance coupling gain and negative damping cannot be negative")
        if self.modulation_limit <= 1.0:
            result.add_error("GFM modulation limit must exceed 1 p.u.")
        return result


@dataclass(frozen=True)
class GFLParams(DynamicComponentParams):
    """Grid-following converter: PLL, P/Q outer PI loops and current lags."""

    pll_kp: float = 0.12
    pll_ki: float = 2.6
    current_kp: float = 0.1
    filter_l: float = 0.10
    p_kp: float = 0.5
    p_ki: float = 30.0
    q_kp: float = 0.5
    q_ki: float = 30.0
    f_droop_gain: float = 5.0
    qv_droop_gain: float = 2.0

    def validate(self) -> ValidationResult:
        result = super().validate()
        if self.pll_ki <= 0 or self.p_ki <= 0 or self.q_ki <= 0:
            result.add_error("GFL integral gains must be positive")
        return result


@dataclass(frozen=True)
class InfiniteSourceParams(DynamicComponentParams):
    """Stiff voltage source behind a reactance (single-machine test networks)."""

    source_reactance: float = 0.0

    def validate(self) -> ValidationResult:
        result = super().validate()
        if self.source_reactance < 0:
            result.add_error("Infinite source reactance cannot be negative")
        return result


PARAMS_BY_KIND: Dict[str, Type[DynamicComponentParams]] = {
    'SG': SGParams,
    'GFM': GFMParams,
    'GFL': GFLParams,
    'INF': InfiniteSourceParams,
}


def params_from_dict(kind: str, data: Dict[str, Any]) -> DynamicComponentParams:
    """
    Build the parameter record for a generator kind.

    Args:
        kind: Generator kind token (SG, GFM, GFL, INF)
        data: Field values; missing fields take their defaults

    Returns:
        Parameter record instance
    """
    params_class = PARAMS_BY_KIND.get(kind)
    if params_class is None:
        raise ValueError(f"No dynamic parameter record for generator kind: {kind}")

    known = {f.name for f in fields(params_class)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"Unknown {kind} parameter(s): {', '.join(sorted(unknown))}")
    return params_class(**data)
