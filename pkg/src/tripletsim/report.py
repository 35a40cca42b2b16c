"""Assembly of analytic reports, parameter sweeps and MC comparison documents."""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .coincidence import (REFERENCE_CAR_3FOLD, CoincidenceFigures, compute_figures,
                          pattern_probabilities)
from .counter import ACCIDENTAL_KEYS, PAIRS, TRIPLE, count, estimate_higher_order_ratio
from .mc import SimulationConfig, simulate_batch_parallel
from .params import (REFERENCE_INTERNAL_CONVERSION, ConfigError, SourceParameters,
                     derived_summary, to_document)

SCHEMA_VERSION = 1
FIGURE_FIELDS = tuple(f.name for f in dataclasses.fields(CoincidenceFigures))
MIN_PULSES_FOR_Z = 100

# short names accepted wherever a parameter path is expected
PATH_ALIASES = {
    "mean_photon": "mean_photon_primary",
    "m": "mean_photon_primary",
    "eta_i1": "i1_arm.overall",
    "conversion": "s1_path.conversion_override",
}


def resolve_path(path: str) -> str:
    return PATH_ALIASES.get(path, path)


def _clean(x):
    """JSON has no inf/nan; encode them as strings."""
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _clean_tree(obj):
    if isinstance(obj, dict):
        return {str(k): _clean_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_tree(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return _clean(obj)


# -- report --------------------------------------------------------------------

def footnotes(p: SourceParameters, fig: CoincidenceFigures) -> list:
    notes = [
        {
            "id": "higher_order_ratio",
            "quantities": ["r_printed", "r_consistent", "car_3fold_printed",
                           "car_3fold_consistent"],
            "text": ("Two readings of the multi-pair ratio are reported. r_printed weights "
                     "m >= 2 terms by the idler-1 detection probability relative to rho_1 "
                     "alone; r_consistent also divides the single-pair term by eta_i1 so "
                     "numerator and denominator are both detection probabilities. "
                     "CAR_3fold = 1/(r - 1) for each."),
        },
        {
            "id": "car_3fold_reference",
            "quantities": ["car_3fold_printed", "car_3fold_consistent"],
            "reference_value": REFERENCE_CAR_3FOLD,
            "computed": {"car_3fold_printed": fig.car_3fold_printed,
                         "car_3fold_consistent": fig.car_3fold_consistent},
            "text": (f"The published three-fold CAR of {REFERENCE_CAR_3FOLD} is reproduced by "
                     "neither r variant at the same parameters; no reading of the closed-form "
                     "ratio found gives it. All three values are shown."),
        },
    ]
    if p.s1_path.conversion_override is None:
        notes.append({
            "id": "internal_conversion",
            "quantities": ["rate_triplet_detected", "rate_triplet_generated"],
            "reference_value": REFERENCE_INTERNAL_CONVERSION,
            "effective": p.conversion,
            "text": ("The internal conversion probability is derived from the nominal value "
                     "and the coupler and waveguide losses; the published table rounds it "
                     "to 2.52e-7. Rates scale linearly with it (about 0.9%)."),
        })
    if p.leakage.coupler_leak > 0:
        notes.append({
            "id": "leakage_endface",
            "quantities": ["p_acc_leak_s2", "p_acc_leak_i2", "p_acc_coinc", "car_2fold"],
            "text": ("Leaked photons are attenuated by the end-face transmittance and then by "
                     "the full secondary-arm efficiency, which already contains one end-face "
                     "pass; the end-face factor may be counted twice."),
        })
    return notes


def build_report(p: SourceParameters) -> dict:
    fig = compute_figures(p)
    return _clean_tree({
        "schema_version": SCHEMA_VERSION,
        "kind": "report",
        "parameters": to_document(p),
        "derived": derived_summary(p),
        "figures": fig.to_dict(),
        "reference": {"car_3fold": REFERENCE_CAR_3FOLD},
        "footnotes": footnotes(p, fig),
    })


# -- sweep ---------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    path: str
    lo: float
    hi: float
    steps: int
    log: bool = False

    def __post_init__(self):
        if self.steps < 2:
            raise ConfigError(f"axis {self.path}: steps must be >= 2, got {self.steps}")
        if not self.lo < self.hi:
            raise ConfigError(f"axis {self.path}: min must be < max")
        if self.log and self.lo <= 0:
            raise ConfigError(f"axis {self.path}: log spacing needs min > 0")

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """``PATH:MIN:MAX:STEPS[:log|lin]``"""
        parts = text.split(":")
        if len(parts) not in (4, 5) or (len(parts) == 5 and parts[4] not in ("log", "lin")):
            raise ConfigError(f"axis must be PATH:MIN:MAX:STEPS[:log], got {text!r}")
        try:
            lo, hi, steps = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ConfigError(f"bad axis {text!r}: {exc}") from None
        return cls(resolve_path(parts[0]), lo, hi, steps, len(parts) == 5 and parts[4] == "log")

    def values(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.lo, self.hi, self.steps)
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass(frozen=True)
class SweepSpec:
    axis1: Axis
    axis2: Axis
    quantities: tuple = ("r_printed", "r_consistent")

    def __post_init__(self):
        bad = [q for q in self.quantities if q not in FIGURE_FIELDS]
        if bad:
            raise ConfigError(f"unknown quantities {bad}; choose from {list(FIGURE_FIELDS)}")
        if not self.quantities:
            raise ConfigError("at least one quantity is required")


def _point(args):
    p, path1, v1, path2, v2, quantities = args
    q = p.with_path(path1, float(v1)).with_path(path2, float(v2))
    fig = compute_figures(q)
    return [getattr(fig, name) for name in quantities]


def sweep(p: SourceParameters, spec: SweepSpec, workers: int = 1) -> list:
    """Row-major grid: axis1 outer, axis2 inner. Each row is
    ``[v1, v2, *quantities]``."""
    for ax in (spec.axis1, spec.axis2):
        p.get_path(ax.path)  # raises ConfigError on a bad path
    jobs = [(p, spec.axis1.path, v1, spec.axis2.path, v2, spec.quantities)
            for v1 in spec.axis1.values() for v2 in spec.axis2.values()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_point(j) for j in jobs]
    return [[float(j[2]), float(j[4]), *res] for j, res in zip(jobs, results)]


def sweep_document(p: SourceParameters, spec: SweepSpec, rows: list) -> dict:
    return _clean_tree({
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "axis1": dataclasses.asdict(spec.axis1),
        "axis2": dataclasses.asdict(spec.axis2),
        "columns": ["axis1", "axis2", *spec.quantities],
        "rows": rows,
    })


def sweep_csv(spec: SweepSpec, rows: list) -> str:
    head = ",".join([spec.axis1.path, spec.axis2.path, *spec.quantities])
    return "\n".join([head] + [",".join(repr(float(x)) for x in r) for r in rows]) + "\n"


# -- MC comparison ---------------------------------------------------------------

def _z(observed: int, trials: int, predicted: float) -> Optional[float]:
    if trials <= 0 or not 0.0 < predicted < 1.0:
        return None
    return (observed / trials - predicted) / math.sqrt(predicted * (1.0 - predicted) / trials)


def _accidental_prediction(pat: dict, key: str) -> float:
    first, later = key.split(">")
    return pat[first] * pat[later]


def simulate_comparison(p: SourceParameters, pulses: int, seed: int = 0,
                        offsets: Sequence[int] = (1,), partitions: int = 1,
                        jitter_sigma: float = 0.0, backend: Optional[str] = None) -> dict:
    """Run the MC, count coincidences and set them against analytic values."""
    cfg = SimulationConfig(pulses=pulses, seed=seed, jitter_sigma=jitter_sigma,
                           physics=p, backend=backend)
    stream = simulate_batch_parallel(cfg, partitions)
    rep = count(stream, offsets, p.coincidence_window if stream.has_offsets else None)
    fig = compute_figures(p)
    pat = pattern_probabilities(p)
    formula = {
        "i1": fig.p_i1,
        "s2": fig.p_s2 + fig.p_acc_leak_s2,
        "i2": fig.p_i2 + fig.p_acc_leak_i2,
        "s2&i2": fig.p_corr_2fold + fig.p_noise_2fold + fig.p_acc_coinc,
        TRIPLE: fig.p_3fold_total + fig.p_noise_3fold,
    }
    enough = pulses >= MIN_PULSES_FOR_Z
    flags = [] if enough else ["insufficient_n"]

    quantities = {}
    for key in ("i1", "s2", "i2", *PAIRS, TRIPLE):
        obs = rep.count(key)
        entry = {"count": obs, "fraction": obs / pulses, "error": rep.error(key),
                 "model": pat[key]}
        if key in formula:
            entry["formula"] = formula[key]
        if enough:
            entry["z_model"] = _z(obs, pulses, pat[key])
            if key in formula:
                entry["z_formula"] = _z(obs, pulses, formula[key])
        quantities[key] = entry

    accidentals = {}
    for d in sorted(rep.accidentals):
        trials = rep.accidental_trials(d)
        block = {}
        for key in ACCIDENTAL_KEYS:
            obs = rep.accidentals[d][key]
            pred = _accidental_prediction(pat, key)
            entry = {"count": obs, "trials": trials,
                     "fraction": obs / trials if trials else None, "model": pred}
            if enough:
                entry["z_model"] = _z(obs, trials, pred)
            block[key] = entry
        accidentals[str(d)] = block

    higher = None
    if 1 in rep.accidentals:
        est = estimate_higher_order_ratio(rep, p.eta_i1)
        higher = {"estimate": est.value, "error": est.error, "flags": list(est.flags),
                  "mean_photon_inferred": est.mean_photon,
                  "r_consistent": fig.r_consistent, "r_printed": fig.r_printed}

    return _clean_tree({
        "schema_version": SCHEMA_VERSION,
        "kind": "simulate",
        "pulses": pulses,
        "seed": seed,
        "offsets": list(sorted(rep.accidentals)),
        "jitter_sigma": jitter_sigma,
        "timestamp_mode": rep.timestamp_mode,
        "flags": flags,
        "parameters": to_document(p),
        "quantities": quantities,
        "accidentals": accidentals,
        "higher_order_ratio": higher,
    })


def max_abs_z(doc: dict, field: str = "z_model") -> float:
    zs = [e[field] for e in doc["quantities"].values() if e.get(field) is not None]
    return max((abs(z) for z in zs), default=math.nan)
