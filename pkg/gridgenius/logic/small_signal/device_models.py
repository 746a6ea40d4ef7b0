"""
Reduced-order generator models for small-signal analysis.

This module provides the differential equations and current injections of
each generator technology. Every model works on its own machine base and
in the network reference frame, which rotates with the grid-forming source
at the slack bus. Equations are written against plain arithmetic so they
evaluate on floats (residuals) and on dual numbers (exact Jacobians).
"""

from abc import ABC, abstractmethod
import cmath
import math
from typing import List, Sequence, Tuple

import numpy as np

from ..models.dynamic_params import (
    DynamicComponentParams, GFLParams, GFMParams, InfiniteSourceParams, SGParams,
)
from .dual_numbers import Number, cos, sin, sqrt


class LinearizationError(Exception):
    """Exception raised when a dynamic model cannot be assembled or linearized."""
    pass


class DeviceModel(ABC):
    """
    Base class for a current-injecting dynamic device at one bus.

    ``equations`` returns the state derivatives and the injected current
    (real, imaginary) on the machine base.
    """

    state_names: Tuple[str, ...] = ()
    is_reference = False

    def __init__(self, name: str, bus_index: int, scale: float, omega_base: float):
        self.name = name
        self.bus_index = bus_index
        self.scale = scale
        self.omega_base = omega_base

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def state_labels(self) -> List[str]:
        return [f"{self.name}.{s}" for s in self.state_names]

    @abstractmethod
    def initialize(self, voltage: complex, current: complex) -> np.ndarray:
        """Fix setpoints and return the equilibrium state (rotated frame)."""

    @abstractmethod
    def equations(
        self, x: Sequence[Number], vr: Number, vi: Number, omega_ref: Number,
    ) -> Tuple[List[Number], Number, Number]:
        """State derivatives and injected current at (x, V)."""

    def frame_frequency(self, x: Sequence[Number]) -> Number:
        raise LinearizationError(f"{self.name} cannot define the network reference frame")

    def reference_angle(self, voltage: complex, current: complex) -> float:
        raise LinearizationError(f"{self.name} cannot define the network reference frame")


def _series_current(er: Number, ei: Number, vr: Number, vi: Number, r: float, x: float):
    """Current through r + jx from an internal EMF to the terminal."""
    denom = r * r + x * x
    g, b = r / denom, -x / denom
    dr, di = er - vr, ei - vi
    return g * dr - b * di, g * di + b * dr


class GridFormingConverter(DeviceModel):
    """
    Droop-controlled grid-forming converter.

    States: filtered P and Q, voltage-loop integrator, internal EMF (closed
    current loop lag) and a two-state voltage-control resonance. The
    resonance is excited by the terminal-voltage error and rides on the
    applied EMF, so it closes a loop through the network; its gain shrinks
    with modulation headroom. The EMF is aligned with the reference frame,
    so the device's frame frequency is its P-droop output.
    """

    state_names = ('p_f', 'q_f', 'x_v', 'e', 'psi1', 'psi2')
    is_reference = True

    def __init__(self, name: str, bus_index: int, scale: float, omega_base: float, params: GFMParams):
        super().__init__(name, bus_index, scale, omega_base)
        self.params = params
        self.omega_f = 2.0 * math.pi * params.power_filter_hz
        self.omega_r = 2.0 * math.pi * params.resonance_hz
        self.tau_c = params.filter_l / (omega_base * params.current_kp)
        self.p_set = self.q_set = 0.0
        self.v_set = 1.0

    def reference_angle(self, voltage: complex, current: complex) -> float:
        emf = voltage + complex(self.params.filter_r, self.params.filter_l) * current
        return cmath.phase(emf)

    def initialize(self, voltage: complex, current: complex) -> np.ndarray:
        p = self.params
        emf = voltage + complex(p.filter_r, p.filter_l) * current
        s = voltage * current.conjugate()
        self.p_set, self.q_set = s.real, s.imag
        self.v_set = abs(voltage)
        e0 = abs(emf)
        return np.array([s.real, s.imag, e0, e0, 0.0, 0.0])

    def resonance_gain(self, e: Number) -> Number:
        """Voltage-error gain into the resonance; vanishes at the modulation limit."""
        p = self.params
        return self.omega_r * p.coupling_gain * (p.modulation_limit - e)

    def frame_frequency(self, x: Sequence[Number]) -> Number:
        return 1.0 + self.params.p_droop * (self.p_set - x[0])

    def equations(self, x, vr, vi, omega_ref):
        p = self.params
        p_f, q_f, x_v, e, psi1, psi2 = x
        e_t = e + p.ripple_gain * psi2
        ir, ii = _series_current(e_t, 0.0, vr, vi, p.filter_r, p.filter_l)

        p_e = vr * ir + vi * ii
        q_e = vi * ir - vr * ii
        v_mag = sqrt(vr * vr + vi * vi)

        v_ref = self.v_set + p.q_droop * (self.q_set - q_f)
        e_v = v_ref - v_mag

        derivs = [
            self.omega_f * (p_e - p_f),
            self.omega_f * (q_e - q_f),
            p.voltage_ki * e_v,
            (x_v + p.voltage_kp * e_v - e) / self.tau_c,
            self.omega_r * psi2,
            -self.omega_r * psi1 + p.negative_damping * psi2 + self.resonance_gain(e) * e_v,
        ]
        return derivs, ir, ii


class SynchronousMachine(DeviceModel):
    """Classical machine (EMF behind transient reactance) with governor and AVR."""

    def __init__(self, name: str, bus_index: int, scale: float, omega_base: float, params: SGParams):
        super().__init__(name, bus_index, scale, omega_base)
        self.params = params
        names = ['delta', 'omega']
        if params.governor_enabled:
            names.append('p_m')
        if params.avr_enabled:
            names.append('e_q')
        self.state_names = tuple(names)
        self.p_set = 0.0
        self.e_ref = 1.0
        self.v_set = 1.0

    def initialize(self, voltage: complex, current: complex) -> np.ndarray:
        p = self.params
        emf = voltage + complex(p.ra, p.xd_prime) * current
        self.p_set = (emf * current.conjugate()).real
        self.e_ref = abs(emf)
        self.v_set = abs(voltage)
        x0 = [cmath.phase(emf), 1.0]
        if p.governor_enabled:
            x0.append(self.p_set)
        if p.avr_enabled:
            x0.append(self.e_ref)
        return np.array(x0)

    def equations(self, x, vr, vi, omega_ref):
        p = self.params
        delta, omega = x[0], x[1]
        k = 2
        if p.governor_enabled:
            p_m = x[k]
            k += 1
        else:
            p_m = self.p_set
        e_q = x[k] if p.avr_enabled else self.e_ref

        er, ei = e_q * cos(delta), e_q * sin(delta)
        ir, ii = _series_current(er, ei, vr, vi, p.ra, p.xd_prime)
        p_e = er * ir + ei * ii

        derivs = [
            self.omega_base * (omega - omega_ref),
            (p_m - p_e - p.damping_d * (omega - 1.0)) / (2.0 * p.inertia_h),
        ]
        if p.governor_enabled:
            derivs.append((self.p_set - (omega - 1.0) / p.governor_droop - p_m) / p.governor_tc)
        if p.avr_enabled:
            v_mag = sqrt(vr * vr + vi * vi)
            derivs.append((self.e_ref + p.avr_gain * (self.v_set - v_mag) - e_q) / p.avr_tc)
        return derivs, ir, ii


class GridFollowingConverter(DeviceModel):
    """PLL-synchronized current source with P/f and Q/V droop outer loops."""

    state_names = ('theta', 'x_pll', 'x_p', 'x_q', 'i_d', 'i_q')

    def __init__(self, name: str, bus_index: int, scale: float, omega_base: float, params: GFLParams):
        super().__init__(name, bus_index, scale, omega_base)
        self.params = params
        self.tau_i = params.filter_l / (omega_base * params.current_kp)
        self.p_set = self.q_set = 0.0
        self.v_set = 1.0

    def initialize(self, voltage: complex, current: complex) -> np.ndarray:
        s = voltage * current.conjugate()
        v_mag = abs(voltage)
        self.p_set, self.q_set = s.real, s.imag
        self.v_set = v_mag
        i_d, i_q = s.real / v_mag, s.imag / v_mag
        return np.array([cmath.phase(voltage), 0.0, i_d, i_q, i_d, i_q])

    def equations(self, x, vr, vi, omega_ref):
        p = self.params
        theta, x_pll, x_p, x_q, i_d, i_q = x
        c, s = cos(theta), sin(theta)
        v_d = vr * c + vi * s
        v_q = -vr * s + vi * c
        v_mag = sqrt(vr * vr + vi * vi)

        omega_pll = 1.0 + p.pll_kp * v_q + x_pll
        p_meas = v_d * i_d - v_q * i_q
        q_meas = v_d * i_q + v_q * i_d

        p_err = self.p_set - p.f_droop_gain * (omega_pll - 1.0) - p_meas
        q_err = self.q_set + p.qv_droop_gain * (self.v_set - v_mag) - q_meas
        i_d_ref = x_p + p.p_kp * p_err
        i_q_ref = x_q + p.q_kp * q_err

        derivs = [
            self.omega_base * (omega_pll - omega_ref),
            p.pll_ki * v_q,
            p.p_ki * p_err,
            p.q_ki * q_err,
            (i_d_ref - i_d) / self.tau_i,
            (i_q_ref - i_q) / self.tau_i,
        ]
        ir = i_d * c + i_q * s
        ii = i_d * s - i_q * c
        return derivs, ir, ii


class InfiniteSource(DeviceModel):
    """Constant EMF behind a reactance at nominal frequency."""

    is_reference = True

    def __init__(self, name: str, bus_index: int, scale: float, omega_base: float,
                 params: InfiniteSourceParams):
        super().__init__(name, bus_index, scale, omega_base)
        if params.source_reactance <= 0:
            raise LinearizationError(f"{name}: source reactance must be positive")
        self.params = params
        self.emf = complex(1.0, 0.0)

    def reference_angle(self, voltage: complex, current: complex) -> float:
        return cmath.phase(voltage + 1j * self.params.source_reactance * current)

    def initialize(self, voltage: complex, current: complex) -> np.ndarray:
        self.emf = voltage + 1j * self.params.source_reactance * current
        return np.zeros(0)

    def frame_frequency(self, x):
        return 1.0

    def equations(self, x, vr, vi, omega_ref):
        ir, ii = _series_current(self.emf.real, self.emf.imag, vr, vi, 0.0, self.params.source_reactance)
        return [], ir, ii


class ConstantPowerInjection(DeviceModel):
    """Stateless constant-power injection (system base, scale 1)."""

    def __init__(self, name: str, bus_index: int, power: complex, omega_base: float):
        super().__init__(name, bus_index, 1.0, omega_base)
        self.power = power

    def initialize(self, voltage: complex, current: complex) -> np.ndarray:
        return np.zeros(0)

    def equations(self, x, vr, vi, omega_ref):
        p, q = self.power.real, self.power.imag
        v2 = vr * vr + vi * vi
        return [], (p * vr + q * vi) / v2, (p * vi - q * vr) / v2


DEVICE_CLASSES = {
    SGParams: SynchronousMachine,
    GFMParams: GridFormingConverter,
    GFLParams: GridFollowingConverter,
    InfiniteSourceParams: InfiniteSource,
}


def build_device(
    name: str,
    bus_index: int,
    scale: float,
    omega_base: float,
    params: DynamicComponentParams,
) -> DeviceModel:
    """Instantiate the device model matching a parameter record."""
    device_class = DEVICE_CLASSES.get(type(params))
    if device_class is None:
        raise LinearizationError(f"No device model for parameters {type(params).__name__}")
    return device_class(name, bus_index, scale, omega_base, params)
