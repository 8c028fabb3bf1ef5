"""Delayed-choice quantum eraser simulations: exact state algebra and Monte Carlo trials."""

from .qcore import (
    DensityMatrix,
    HilbertSpace,
    MeasurementBasis,
    Outcome,
    StateVector,
    SubsystemUnitary,
    ZeroProbabilityOutcome,
    apply_unitary,
    collapse,
    outcome_distribution,
    reduced_density,
    sample_outcome,
    tensor,
    x_basis,
    z_basis,
)
from .models import (
    MziModel,
    PredictionRule,
    SpinPairModel,
    TwoSlitModel,
    UnknownDetectorLabel,
    detector_basis,
    mzi_couple_wwd,
    mzi_final_state,
    mzi_state_after_bs1,
    predict_x_state_from_click,
    predict_x_state_from_position,
    screen_basis,
    spin_pair_state,
    twoslit_pdf,
)
from .runner import MeasurementSchedule, RngSpec, TrialBatch, TrialRecord, run_batch, run_trial

__version__ = "0.1.0"
