"""Physical models of the eraser: Mach-Zehnder, two-slit screen and spin pair.

Every model hands out its final quanton/which-way-detector state as a
:class:`~qeraser.qcore.StateVector` with the quanton on subsystem 0 and the
detector (or the second spin) on subsystem 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.special import wofz

from .qcore import (
    HilbertSpace,
    MeasurementBasis,
    StateVector,
    SubsystemUnitary,
    apply_unitary,
    tensor,
    x_basis,
    z_basis,
)

SQRT_HALF = 1 / np.sqrt(2)

Condition = Literal["none", "z_up", "z_down", "x_plus", "x_minus"]


class UnknownDetectorLabel(KeyError):
    pass


def detector_basis(target: int = 0) -> MeasurementBasis:
    """Output ports of the second beam splitter."""
    return MeasurementBasis(target, np.eye(2), ("D1", "D2"), "detector")


# Mach-Zehnder ---------------------------------------------------------------

# Raw optics: reflection picks up a sign, path order is (T, R).
BS1_RAW = SQRT_HALF * np.array([[1, 1], [-1, 1]])
BS2_RAW = SQRT_HALF * np.array([[-1, 1], [-1, -1]])
# Path kets rephased so that psi1 = -T and psi2 = R.
BS1_REDEFINED = SQRT_HALF * np.array([[1, -1], [1, 1]])
BS2_REDEFINED = SQRT_HALF * np.array([[1, 1], [1, -1]])

# Path-controlled flip of the detector: |k>|up> -> |k>|up xor k>.
_CONTROLLED_FLIP = np.array(
    [[1, 0, 0, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1],
     [0, 0, 1, 0]], dtype=complex)


@dataclass(frozen=True)
class MziModel:
    phase_convention: Literal["raw", "redefined"] = "redefined"
    wwd_enabled: bool = True

    def __post_init__(self):
        if self.phase_convention not in ("raw", "redefined"):
            raise ValueError(f"unknown phase convention {self.phase_convention!r}")

    @property
    def bs1(self) -> SubsystemUnitary:
        m = BS1_RAW if self.phase_convention == "raw" else BS1_REDEFINED
        return SubsystemUnitary(0, m)

    @property
    def bs2(self) -> SubsystemUnitary:
        m = BS2_RAW if self.phase_convention == "raw" else BS2_REDEFINED
        return SubsystemUnitary(0, m)

    def final_state(self) -> StateVector:
        return mzi_final_state(self)

    def quanton_basis(self) -> MeasurementBasis:
        return detector_basis()


def mzi_state_after_bs1(model: MziModel) -> StateVector:
    source = StateVector.basis(0, [2])
    return apply_unitary(source, model.bs1)


def mzi_couple_wwd(state: StateVector) -> StateVector:
    if state.dims != (2,):
        raise ValueError(f"expected a two-path quanton state, got dims {state.dims}")
    joint = tensor(state, StateVector.basis(0, [2]))
    return StateVector(joint.space, _CONTROLLED_FLIP @ joint.amps)


def mzi_final_state(model: MziModel) -> StateVector:
    state = mzi_state_after_bs1(model)
    if model.wwd_enabled:
        state = mzi_couple_wwd(state)
    return apply_unitary(state, model.bs2)


# Two-slit screen ------------------------------------------------------------

def _upper_tail(a: float, k: float, sigma: float) -> complex:
    """Integral of g(x) exp(ikx) over [a, inf) for a unit-mass Gaussian g.

    Written with the Faddeeva function so the huge exp(+k^2 sigma^2 / 2)
    inside erfc never materializes; only valid for a >= 0.
    """
    s2 = np.sqrt(2) * sigma
    z = (k * sigma**2 + 1j * a) / s2
    return 0.5 * np.exp(-(a / s2) ** 2 + 1j * k * a) * wofz(z)


def _tail_integral(a: float, k: float, sigma: float) -> complex:
    """Integral of g(x) exp(ikx) over [a, inf), any real or infinite a."""
    if a == np.inf:
        return 0.0j
    full = np.exp(-0.5 * (k * sigma) ** 2)
    if a == -np.inf:
        return complex(full)
    if a >= 0:
        return _upper_tail(a, k, sigma)
    return full - np.conj(_upper_tail(-a, k, sigma))


def gaussian_fourier_bins(edges: np.ndarray, k: float, sigma: float) -> np.ndarray:
    """Per-bin integrals of g(x) exp(ikx); bins are consecutive ``edges`` pairs."""
    tails = np.array([_tail_integral(float(e), k, sigma) for e in edges])
    return tails[:-1] - tails[1:]


@dataclass(frozen=True, eq=False)
class TwoSlitModel:
    """Far-field two-slit screen with a Gaussian intensity envelope.

    ``width`` is the standard deviation of the screen intensity envelope.
    The screen is binned by ``edges``.  Landing positions outside the grid
    are kept as two extra outcomes, ``below`` and ``above``, placed after
    the grid bins, so the screen measurement is complete.
    """

    d: float = 1.0
    wavelength: float = 0.1
    distance: float = 100.0
    width: float = 30.0
    edges: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("d", "wavelength", "distance", "width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        edges = self.edges
        if edges is None:
            edges = default_edges(self.width)
        edges = np.array(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 3 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing with at least two bins")
        if not np.all(np.isfinite(edges)):
            raise ValueError("bin edges must be finite")
        if edges[-1] - edges[0] < 3 * self.period:
            raise ValueError(
                f"screen grid spans {edges[-1] - edges[0]:g}, "
                f"less than three fringe periods ({3 * self.period:g})"
            )
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def uniform(cls, n_bins: int = 201, half_span: float | None = None, **geometry) -> "TwoSlitModel":
        width = geometry.get("width", cls.width)
        half = 2 * width if half_span is None else half_span
        return cls(edges=np.linspace(-half, half, n_bins + 1), **geometry)

    @property
    def period(self) -> float:
        return self.wavelength * self.distance / self.d

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.period

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    @property
    def n_outcomes(self) -> int:
        return self.n_bins + 2

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def _outcome_integrals(self, k: float) -> np.ndarray:
        edges = np.concatenate([[-np.inf], self.edges, [np.inf]])
        vals = gaussian_fourier_bins(edges, k, self.width)
        return np.concatenate([vals[1:-1], vals[:1], vals[-1:]])

    @cached_property
    def outcome_mass(self) -> np.ndarray:
        """Envelope probability of every screen outcome (grid bins, below, above)."""
        return self._outcome_integrals(0.0).real

    @cached_property
    def _outcome_cross(self) -> np.ndarray:
        return self._outcome_integrals(self.wavenumber)

    @property
    def outcome_cross(self) -> np.ndarray:
        """Per-outcome integrals of Re(psi1* psi2), the envelope times cos(kx)."""
        return self._outcome_cross.real

    @property
    def envelope_mass(self) -> np.ndarray:
        return self.outcome_mass[: self.n_bins]

    @property
    def cross_term(self) -> np.ndarray:
        return self.outcome_cross[: self.n_bins]

    @cached_property
    def overlap(self) -> float:
        """Re <psi1|psi2> over the whole screen; zero up to exp(-k^2 w^2 / 2)."""
        return float(np.exp(-0.5 * (self.wavenumber * self.width) ** 2))

    def final_state(self) -> StateVector:
        """Screen-outcome / detector state (sum_b a1|b>|up> + a2|b>|down>)/sqrt(2).

        Each outcome carries two equal-modulus path amplitudes whose relative
        phase reproduces the bin-integrated interference term exactly, so
        every z- and x-basis joint probability matches the continuum model.
        """
        mass = self.outcome_mass
        cos_phi = np.clip(np.divide(self.outcome_cross, mass, out=np.zeros_like(mass),
                                    where=mass > 0), -1.0, 1.0)
        sign = np.where(self._outcome_cross.imag > 0, -1.0, 1.0)
        phi = sign * np.arccos(cos_phi)
        root = np.sqrt(mass)
        amps = np.empty((self.n_outcomes, 2), dtype=complex)
        amps[:, 0] = root * np.exp(-0.5j * phi)
        amps[:, 1] = root * np.exp(0.5j * phi)
        amps /= np.linalg.norm(amps)
        return StateVector(HilbertSpace((self.n_outcomes, 2)), amps.ravel())

    def quanton_basis(self) -> MeasurementBasis:
        return screen_basis(self)


def default_edges(width: float = 30.0, n_bins: int = 201) -> np.ndarray:
    return np.linspace(-2 * width, 2 * width, n_bins + 1)


def screen_basis(model: TwoSlitModel) -> MeasurementBasis:
    labels = tuple(str(i) for i in range(model.n_bins)) + ("below", "above")
    return MeasurementBasis.computational(0, labels, "screen")


def twoslit_pdf(model: TwoSlitModel, condition: Condition = "none") -> np.ndarray:
    """Landing probability per grid bin, optionally in coincidence with a detector outcome.

    The vector covers the grid only; the remaining probability of the
    condition falls outside the grid.
    """
    return _outcome_pdf(model, condition)[: model.n_bins]


def _outcome_pdf(model: TwoSlitModel, condition: Condition) -> np.ndarray:
    mass = model.outcome_mass
    if condition in ("none", "z_up", "z_down"):
        # both paths share the envelope, so z conditioning leaves it unchanged
        return mass.copy()
    if condition == "x_plus":
        return (mass + model.outcome_cross) / (1 + model.overlap)
    if condition == "x_minus":
        return (mass - model.outcome_cross) / (1 - model.overlap)
    raise ValueError(f"unknown condition {condition!r}")


def normalized_fringe(model: TwoSlitModel, condition: Condition) -> np.ndarray:
    """Conditional landing probability divided by the envelope, per grid bin."""
    return twoslit_pdf(model, condition) / model.envelope_mass


def local_extrema(values: np.ndarray, kind: Literal["max", "min"]) -> np.ndarray:
    """Indices of interior bins that beat both neighbours."""
    v = values if kind == "max" else -values
    mid = v[1:-1]
    return np.flatnonzero((mid > v[:-2]) & (mid > v[2:])) + 1


# Predictions -----------------------------------------------------------------

_CLICK_TO_X = {"D1": "plus", "D2": "minus"}


def predict_x_state_from_click(outcome: str) -> str:
    try:
        return _CLICK_TO_X[outcome]
    except KeyError:
        raise UnknownDetectorLabel(f"not a detector label: {outcome!r}") from None


@dataclass(frozen=True)
class PredictionRule:
    eta: float = 1e-6

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie strictly between 0 and 1")


def position_predictions(model: TwoSlitModel, rule: PredictionRule) -> np.ndarray:
    """Predicted x-basis label for every screen bin."""
    p_plus = twoslit_pdf(model, "x_plus")
    p_minus = twoslit_pdf(model, "x_minus")
    out = np.full(model.n_bins, "undetermined", dtype=object)
    out[p_minus < rule.eta * p_plus] = "plus"
    out[p_plus < rule.eta * p_minus] = "minus"
    return out


def predict_x_state_from_position(model: TwoSlitModel, rule: PredictionRule, bin: int) -> str:
    if not 0 <= bin < model.n_bins:
        raise IndexError(f"bin {bin} outside screen grid of {model.n_bins} bins")
    return position_predictions(model, rule)[bin]


def bin_of(model: TwoSlitModel, x: float) -> int:
    """Index of the bin whose nominal interval contains ``x``."""
    if not model.edges[0] <= x <= model.edges[-1]:
        raise ValueError(f"x={x} lies outside the screen grid")
    return int(min(np.searchsorted(model.edges, x, side="right") - 1, model.n_bins - 1))


# Spin pair -------------------------------------------------------------------

@dataclass(frozen=True)
class SpinPairModel:
    def final_state(self) -> StateVector:
        return spin_pair_state()

    def quanton_basis(self, kind: str = "z") -> MeasurementBasis:
        return spin_basis(kind, 0)


def spin_basis(kind: str, target: int) -> MeasurementBasis:
    if kind == "z":
        return z_basis(target)
    if kind == "x":
        return x_basis(target)
    raise ValueError(f"unknown spin basis {kind!r}")


def spin_pair_state() -> StateVector:
    return StateVector.from_amplitudes([SQRT_HALF, 0, 0, SQRT_HALF], dims=(2, 2))
