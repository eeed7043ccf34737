"""Forward model and parameter estimation for light-induced surface charging
probed by the axial position of a trapped-ion string."""
from .constants import CA40, CODATA2018, IonSpecies, PhysicalConstants, photon_rate, unit_convert
from .crystal import (
    CrystalState, TrapConfig, com_displacement, equilibrium_positions,
    field_from_displacement, force_from_displacement)
from .electrostatics import (
    ElectrodeDipoleSource, GlassMonopoleSource, axial_field_electrode, axial_field_glass,
    dipole_axial_kernel, monopole_axial_kernel)
from .errors import (
    ConditioningError, ConfigError, ConvergenceError, DomainError, IonProbeError, UnitError)
from .kinetics import (
    ChargingParams, IlluminationSchedule, MultiProcessParams, Segment, charge_at,
    charge_trajectory, initial_production_rate)
from .forward import (
    ExperimentSetup, TimeSeries, VelocityMap, dipole_efficiency_from_rate,
    efficiency_from_rate, initial_velocity_electrode, initial_velocity_glass,
    synthesize_timeseries, synthesize_velocity_map)

__version__ = "0.1.0"
