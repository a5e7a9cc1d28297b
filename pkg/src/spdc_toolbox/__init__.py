"""Biphoton state engineering and HOM-based Wigner tomography for transversely pumped SPDC."""

from .core import (
    SPEED_OF_LIGHT,
    DeviceParams,
    PhaseSpacePoint,
    angle_to_detuning,
    angle_to_detuning_exact,
    arcmin_to_rad,
    detuning_to_lambda,
    k_deg,
    lambda_to_detuning,
    position_to_delay,
)
from .pump import BeamSpec, PumpPulse, SampledComplexFunction, beam_field, pump_envelope, pump_spectrum
from .biphoton import (
    JsaGrid,
    assemble_jsa,
    component_overlap,
    f_minus_finite,
    f_minus_gaussian,
    f_minus_infinite,
)
from .wigner import (
    RealGrid2D,
    WignerMetrics,
    wigner_gaussian_oracle,
    wigner_metrics,
    wigner_multibeam_oracle,
    wigner_transform,
)
from .hom import HomSetting, TomographyResult, coincidence_from_wigner, hom_coincidence, tomography_scan
from .configio import GridSpec, Scenario, parse_scenario

__version__ = "0.1.0"
