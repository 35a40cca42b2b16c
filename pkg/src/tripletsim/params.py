"""Source configuration: the experimental parameter set and its derived quantities.

Defaults reproduce the reference configuration of a titanium-diffused
lithium-niobate cascaded source pumped at 10 MHz. Config documents are
JSON-compatible trees; keys may be nested or dotted::

    {"mean_photon_primary": 0.25,
     "i1_arm": {"detector": 0.45},
     "s2_arm.noise_rate": 7500}

Derived efficiencies are always computed from the raw fields on demand.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .cascade import SpectralArm, SpectralCurve, integrate_arm_efficiency

CONFIG_ENV_VAR = "TRIPLETSIM_CONFIG"

# Printed "overall channel efficiency" rows of the reference configuration.
REFERENCE_OVERALL_I1 = 0.117
REFERENCE_OVERALL_S2 = 0.103
REFERENCE_OVERALL_I2 = 0.190
REFERENCE_INTERNAL_CONVERSION = 2.52e-7


class ConfigError(ValueError):
    """Invalid configuration document or out-of-range parameter."""


@dataclass(frozen=True)
class IdlerArm:
    """Primary idler (i1) path: on-chip coupler and waveguide, optics, detector."""

    coupler: float = 0.94
    waveguide: float = 0.92
    optics: float = 0.3
    detector: float = 0.45
    noise_rate: float = 7000.0  # dark + blackbody, counts/s
    overall: Optional[float] = REFERENCE_OVERALL_I1


@dataclass(frozen=True)
class SignalPath:
    """Primary signal (s1) path into the second conversion stage."""

    coupler: float = 0.995
    waveguide: float = 0.93
    nominal_conversion: float = 2.7e-7
    conversion_override: Optional[float] = None


@dataclass(frozen=True)
class SecondaryArm:
    """Secondary measurement arm (s2 reflected / i2 transmitted at the long-pass filter).

    With ``curve`` unset the arm efficiency is the scalar product
    ``splitter * optics * detector * endface``. A curve (CSV path) holds the
    full product versus wavelength and is band-averaged over
    ``[lambda_min, lambda_max]``. ``overall`` short-circuits both.
    """

    optics: float
    detector: float
    noise_rate: float
    lambda_min: float
    lambda_max: float
    splitter: float = 1.0
    curve: Optional[str] = None
    overall: Optional[float] = None


def _s2_default() -> SecondaryArm:
    return SecondaryArm(optics=0.411, detector=0.25, noise_rate=7500.0,
                        lambda_min=1541.0, lambda_max=1561.0,
                        overall=REFERENCE_OVERALL_S2)


def _i2_default() -> SecondaryArm:
    return SecondaryArm(optics=0.292, detector=0.65, noise_rate=18000.0,
                        lambda_min=1601.0, lambda_max=1621.0,
                        overall=REFERENCE_OVERALL_I2)


@dataclass(frozen=True)
class Leakage:
    """Higher-order-mode idler photons (i1') leaking into the secondary arms."""

    coupler_leak: float = 0.0
    waveguide: float = 0.92


@dataclass(frozen=True)
class SourceParameters:
    pulse_width: float = 4.4e-11
    rep_rate: float = 1e7
    mean_photon_primary: float = 0.25
    mean_photon_higher_order: Optional[float] = None  # None: follow mean_photon_primary
    endface_transmittance: float = 0.995
    i1_arm: IdlerArm = field(default_factory=IdlerArm)
    s1_path: SignalPath = field(default_factory=SignalPath)
    s2_arm: SecondaryArm = field(default_factory=_s2_default)
    i2_arm: SecondaryArm = field(default_factory=_i2_default)
    leakage: Leakage = field(default_factory=Leakage)
    coincidence_window: float = 1e-9

    def __post_init__(self):
        validate(self)

    # effective values ---------------------------------------------------

    @property
    def eta_i1(self) -> float:
        o = self.i1_arm.overall
        return derive_eta_i1(self) if o is None else o

    @property
    def eta_s2(self) -> float:
        return arm_efficiency(self, "s2")

    @property
    def eta_i2(self) -> float:
        return arm_efficiency(self, "i2")

    @property
    def conversion(self) -> float:
        o = self.s1_path.conversion_override
        return derive_internal_conversion(self) if o is None else o

    @property
    def mean_photon_leak(self) -> float:
        m = self.mean_photon_higher_order
        return self.mean_photon_primary if m is None else m

    @property
    def p_noise_i1(self) -> float:
        return noise_probability(self.i1_arm.noise_rate, self.coincidence_window)

    @property
    def p_noise_s2(self) -> float:
        return noise_probability(self.s2_arm.noise_rate, self.coincidence_window)

    @property
    def p_noise_i2(self) -> float:
        return noise_probability(self.i2_arm.noise_rate, self.coincidence_window)

    def replace(self, **changes) -> "SourceParameters":
        return dataclasses.replace(self, **changes)

    def with_path(self, path: str, value: Any) -> "SourceParameters":
        """Copy with one (possibly dotted) field replaced, e.g. ``"i1_arm.overall"``."""
        head, _, rest = path.partition(".")
        names = {f.name for f in dataclasses.fields(self)}
        if head not in names:
            raise ConfigError(f"unknown parameter path {path!r}")
        if not rest:
            return dataclasses.replace(self, **{head: value})
        sub = getattr(self, head)
        if not dataclasses.is_dataclass(sub) or rest not in {f.name for f in dataclasses.fields(sub)}:
            raise ConfigError(f"unknown parameter path {path!r}")
        return dataclasses.replace(self, **{head: dataclasses.replace(sub, **{rest: value})})

    def get_path(self, path: str) -> Any:
        obj: Any = self
        for part in path.split("."):
            if not dataclasses.is_dataclass(obj) or not hasattr(obj, part):
                raise ConfigError(f"unknown parameter path {path!r}")
            obj = getattr(obj, part)
        return obj


# -- derivations -------------------------------------------------------------

def derive_eta_i1(p: SourceParameters) -> float:
    """Idler-1 channel efficiency from its component chain."""
    a = p.i1_arm
    eta_int = a.coupler * a.waveguide
    return eta_int * p.endface_transmittance * a.optics * a.detector


def derive_internal_conversion(p: SourceParameters) -> float:
    """Conversion probability per signal-1 photon entering the second stage."""
    s = p.s1_path
    return s.coupler * s.waveguide * s.nominal_conversion


def spectral_arm(p: SourceParameters, which: str, *, derived: bool = False) -> SpectralArm:
    """Build the :class:`SpectralArm` for ``"s2"`` or ``"i2"``.

    ``derived=True`` ignores the ``overall`` shortcut and uses the components.
    """
    arm = _secondary(p, which)
    pn = noise_probability(arm.noise_rate, p.coincidence_window)
    if arm.overall is not None and not derived:
        eff: Union[float, SpectralCurve] = arm.overall
    elif arm.curve is not None:
        eff = SpectralCurve.from_csv(arm.curve)
    else:
        eff = arm.splitter * arm.optics * arm.detector * p.endface_transmittance
    return SpectralArm(eff, arm.lambda_min, arm.lambda_max, pn)


def derive_arm_efficiency(p: SourceParameters, which: str) -> float:
    return integrate_arm_efficiency(spectral_arm(p, which, derived=True))


def arm_efficiency(p: SourceParameters, which: str) -> float:
    return integrate_arm_efficiency(spectral_arm(p, which))


def _secondary(p: SourceParameters, which: str) -> SecondaryArm:
    if which == "s2":
        return p.s2_arm
    if which == "i2":
        return p.i2_arm
    raise ValueError(f"secondary arm must be 's2' or 'i2', got {which!r}")


def noise_probability(rate: float, window: float = 1e-9) -> float:
    """Linearised per-window noise probability ``rate * window``."""
    if rate < 0:
        raise ConfigError("noise rate must be >= 0")
    if window <= 0:
        raise ConfigError("noise window must be > 0")
    prob = rate * window
    if prob > 1.0:
        raise ConfigError(
            f"noise rate {rate} /s over a {window} s window gives probability {prob} > 1")
    return prob


# -- validation --------------------------------------------------------------

_PROBABILITY_FIELDS = {
    "endface_transmittance",
    "i1_arm.coupler", "i1_arm.waveguide", "i1_arm.optics", "i1_arm.detector",
    "i1_arm.overall",
    "s1_path.coupler", "s1_path.waveguide", "s1_path.nominal_conversion",
    "s1_path.conversion_override",
    "s2_arm.optics", "s2_arm.detector", "s2_arm.splitter", "s2_arm.overall",
    "i2_arm.optics", "i2_arm.detector", "i2_arm.splitter", "i2_arm.overall",
    "leakage.coupler_leak", "leakage.waveguide",
}
_NONNEGATIVE_FIELDS = {
    "mean_photon_primary", "mean_photon_higher_order",
    "i1_arm.noise_rate", "s2_arm.noise_rate", "i2_arm.noise_rate",
}
_POSITIVE_FIELDS = {"pulse_width", "rep_rate", "coincidence_window"}


def _check_number(key: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite, got {v!r}")
    return float(v)


def validate(p: SourceParameters) -> None:
    for key in sorted(_PROBABILITY_FIELDS | _NONNEGATIVE_FIELDS | _POSITIVE_FIELDS):
        v = p.get_path(key)
        if v is None:
            continue
        v = _check_number(key, v)
        if key in _PROBABILITY_FIELDS and not 0.0 <= v <= 1.0:
            raise ConfigError(f"{key} = {v} outside [0, 1]")
        if key in _NONNEGATIVE_FIELDS and v < 0:
            raise ConfigError(f"{key} = {v} must be >= 0")
        if key in _POSITIVE_FIELDS and v <= 0:
            raise ConfigError(f"{key} = {v} must be > 0")
    for which in ("s2", "i2"):
        arm = _secondary(p, which)
        lo = _check_number(f"{which}_arm.lambda_min", arm.lambda_min)
        hi = _check_number(f"{which}_arm.lambda_max", arm.lambda_max)
        if not lo < hi:
            raise ConfigError(f"{which}_arm.lambda_min ({lo}) must be < lambda_max ({hi})")
    for key in ("i1_arm.noise_rate", "s2_arm.noise_rate", "i2_arm.noise_rate"):
        if p.get_path(key) * p.coincidence_window > 1.0:
            raise ConfigError(f"{key} * coincidence_window exceeds 1")


# -- documents ---------------------------------------------------------------

def _flatten(doc: Mapping[str, Any], prefix: str = "") -> dict:
    flat = {}
    for key, value in doc.items():
        full = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, full + "."))
        else:
            flat[full] = value
    return flat


def load_config(document: Optional[Mapping[str, Any]] = None) -> SourceParameters:
    """Build validated parameters from a config tree; missing keys keep their defaults.

    Unknown keys produce a warning and are ignored.
    """
    if document is None:
        document = {}
    if not isinstance(document, Mapping):
        raise ConfigError("config document must be a mapping at the top level")
    p = SourceParameters()
    groups: dict = {}
    top: dict = {}
    for key, value in _flatten(document).items():
        head, _, rest = key.partition(".")
        try:
            current = p.get_path(key)
        except ConfigError:
            warnings.warn(f"ignoring unknown config key {key!r}", UserWarning, stacklevel=2)
            continue
        if dataclasses.is_dataclass(current):
            warnings.warn(f"ignoring non-mapping value for group {key!r}", UserWarning,
                          stacklevel=2)
            continue
        if rest:
            groups.setdefault(head, {})[rest] = value
        else:
            top[head] = value
    changes = dict(top)
    for head, sub in groups.items():
        changes[head] = dataclasses.replace(getattr(p, head), **sub)
    try:
        return dataclasses.replace(p, **changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path: Union[str, Path, None] = None) -> SourceParameters:
    """Load a JSON config file; with no path, fall back to ``$TRIPLETSIM_CONFIG`` or defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return SourceParameters()
    text = Path(path).read_text()
    try:
        document = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return load_config(document)


def to_document(p: SourceParameters) -> dict:
    """Nested config tree that :func:`load_config` maps back to ``p``."""
    return dataclasses.asdict(p)


def derived_summary(p: SourceParameters) -> dict:
    """Derived and effective efficiencies side by side."""
    return {
        "eta_i1": {"derived": derive_eta_i1(p), "effective": p.eta_i1},
        "eta_s2_tot": {"derived": derive_arm_efficiency(p, "s2"), "effective": p.eta_s2},
        "eta_i2_tot": {"derived": derive_arm_efficiency(p, "i2"), "effective": p.eta_i2},
        "internal_conversion": {"derived": derive_internal_conversion(p),
                                "effective": p.conversion,
                                "reference_printed": REFERENCE_INTERNAL_CONVERSION},
        "p_noise_i1": p.p_noise_i1,
        "p_noise_s2": p.p_noise_s2,
        "p_noise_i2": p.p_noise_i2,
        "mean_photon_higher_order": p.mean_photon_leak,
    }
