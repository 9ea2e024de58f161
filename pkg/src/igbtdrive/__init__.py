"""Behavioral IGBT switching-transient simulator with current-step (CSP) and
CATS gate drives, switching-loss, spectrum and time-frequency FOM analysis."""

__version__ = "0.1.0"

from .analysis import (
    EdgeSignature,
    LossReport,
    Spectrum,
    edge_signature,
    fom,
    spectrum_envelope,
    switching_energy,
)
from .device_model import (
    CircuitParams,
    DeviceParams,
    GateChargeCurve,
    collector_current,
    default_gate_charge_curve,
    gate_collector_capacitance,
    miller_plateau_voltage,
    vge_from_charge,
)
from .experiments import (
    ComparisonReport,
    TradeoffRecord,
    calibrate_to_loss,
    compare_at_equal_loss,
    sweep_i3,
)
from .gate_drive import (
    TURN_OFF,
    TURN_ON,
    CatsProfile,
    CspDesignInputs,
    CspProfile,
    ResistorDrive,
    cats_drive_voltage,
    design_csp,
    drive_current,
    mirror_for_turn_off,
)
from .transient_sim import SimConfig, Waveforms, build_pwm_cycle, simulate_edge
