"""True-demand scenarios and their feature-aware misspecified proxies.

Nine deterministic demand curves are assembled from smooth shape primitives
(Gaussian peaks, boxcar plateaus, logistic ramps, exponential decays and
linear final ramps).  Each scenario also defines five proxies, built by
perturbing exactly one structural component (shifting a peak, scaling its
height, omitting late growth, ...) and renormalising the curve back to the
true scenario's total mass, so a proxy distorts the *shape* of demand while
preserving its overall scale.

Component times are stored in absolute periods; the default library lays
them out as fractions of the horizon so the same nine shapes exist at any T.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, replace, asdict

import numpy as np

from .demand import DemandProfile, DEFAULT_PRICE_LEVELS

MISSPEC_TYPES = (
    "peak_timing",
    "peak_height",
    "omitted_peak",
    "oversmoothing",
    "plateau_level",
    "slope_error",
    "late_growth_timing",
    "late_growth_magnitude",
    "omitted_late_growth",
)

# Default perturbation sizes: a one-width timing shift, 1.5x (or 1/1.5x)
# height/level/slope scaling, and 2x widening of narrow spikes.  Visible
# distortions that keep the curve plausible.
SCALE_UP = 1.5
SCALE_DOWN = 1.0 / 1.5
SHIFT_ONE = 1.0
WIDEN_TWO = 2.0

# Total-mass calibration: expected unconstrained sales at the median grid
# price under flat phi come out at ~1.1x the middle inventory level, which
# makes the low inventory binding and the high one slack.
DEFAULT_MASS_RATIO = 1.1


@dataclass(frozen=True)
class Peak:
    """Gaussian bump: height * exp(-(t-center)^2 / (2*width^2))."""
    center: float
    width: float
    height: float


@dataclass(frozen=True)
class Plateau:
    """Boxcar: level on [start, end], zero outside."""
    start: float
    end: float
    level: float


@dataclass(frozen=True)
class LogisticRamp:
    """Sigmoid growth: asymptote / (1 + exp(-steepness*(t-midpoint)))."""
    midpoint: float
    steepness: float
    asymptote: float


@dataclass(frozen=True)
class ExpDecay:
    """initial * exp(-rate*(t-start)) for t >= start, zero before."""
    start: float
    rate: float
    initial: float


@dataclass(frozen=True)
class FinalRamp:
    """Linear rise from 0 at ``start`` to ``end_height`` at the horizon."""
    start: float
    end_height: float


ShapeComponent = Peak | Plateau | LogisticRamp | ExpDecay | FinalRamp

_KIND_NAMES = {Peak: "peak", Plateau: "plateau", LogisticRamp: "logistic_ramp",
               ExpDecay: "exp_decay", FinalRamp: "final_ramp"}
_NAME_KINDS = {v: k for k, v in _KIND_NAMES.items()}

# Which component kinds each error type may target.
_APPLICABLE = {
    "peak_timing": (Peak,),
    "peak_height": (Peak,),
    "omitted_peak": (Peak,),
    "oversmoothing": (Peak,),
    "plateau_level": (Plateau,),
    "slope_error": (LogisticRamp, ExpDecay),
    "late_growth_timing": (FinalRamp, LogisticRamp),
    "late_growth_magnitude": (FinalRamp, LogisticRamp),
    "omitted_late_growth": (FinalRamp, LogisticRamp),
}


def component_kind(c: ShapeComponent) -> str:
    return _KIND_NAMES[type(c)]


def _validate_component(c: ShapeComponent) -> None:
    if isinstance(c, Peak):
        if c.width <= 0:
            raise ValueError(f"peak width must be > 0, got {c.width}")
        if c.height < 0:
            raise ValueError(f"peak height must be >= 0, got {c.height}")
    elif isinstance(c, Plateau):
        if c.level < 0:
            raise ValueError(f"plateau level must be >= 0, got {c.level}")
        if c.end < c.start:
            raise ValueError("plateau end must be >= start")
    elif isinstance(c, LogisticRamp):
        if c.steepness <= 0:
            raise ValueError(f"logistic steepness must be > 0, got {c.steepness}")
        if c.asymptote < 0:
            raise ValueError(f"logistic asymptote must be >= 0, got {c.asymptote}")
    elif isinstance(c, ExpDecay):
        if c.rate <= 0:
            raise ValueError(f"decay rate must be > 0, got {c.rate}")
        if c.initial < 0:
            raise ValueError(f"decay initial must be >= 0, got {c.initial}")
    elif isinstance(c, FinalRamp):
        if c.end_height < 0:
            raise ValueError(f"final ramp end_height must be >= 0, got {c.end_height}")
    else:
        raise TypeError(f"unknown component {c!r}")


def eval_component(c: ShapeComponent, t: float, horizon_t: int) -> float:
    """Arrivals/period contributed by one component at period t."""
    _validate_component(c)
    if isinstance(c, Peak):
        z = (t - c.center) / c.width
        return c.height * math.exp(-0.5 * z * z)
    if isinstance(c, Plateau):
        return c.level if c.start <= t <= c.end else 0.0
    if isinstance(c, LogisticRamp):
        return c.asymptote / (1.0 + math.exp(-c.steepness * (t - c.midpoint)))
    if isinstance(c, ExpDecay):
        if t < c.start:
            return 0.0
        return c.initial * math.exp(-c.rate * (t - c.start))
    # FinalRamp
    if t <= c.start:
        return 0.0
    if c.start >= horizon_t:
        return 0.0
    return c.end_height * (t - c.start) / (horizon_t - c.start)


@dataclass(frozen=True)
class MisspecSpec:
    """One structured error: which component is wrong, and how."""
    error_type: str
    target_component: int
    magnitude: float = 1.0

    def __post_init__(self):
        if self.error_type not in MISSPEC_TYPES:
            raise ValueError(f"unknown error type {self.error_type!r}")


@dataclass(frozen=True)
class ScenarioSpec:
    """A scenario id, its component list, base level and five misspecs."""
    scenario_id: str
    name: str
    base_level: float
    components: tuple[ShapeComponent, ...]
    misspecs: tuple[MisspecSpec, ...] = ()

    def __post_init__(self):
        for c in self.components:
            _validate_component(c)
        for m in self.misspecs:
            check_applicable(self, m)


def check_applicable(spec: ScenarioSpec, m: MisspecSpec) -> None:
    """Raise unless the error type can act on the targeted component."""
    if not 0 <= m.target_component < len(spec.components):
        raise ValueError(
            f"{spec.scenario_id}: misspec targets component {m.target_component}, "
            f"but the scenario has {len(spec.components)}")
    target = spec.components[m.target_component]
    if not isinstance(target, _APPLICABLE[m.error_type]):
        raise ValueError(
            f"{spec.scenario_id}: {m.error_type} cannot target a "
            f"{component_kind(target)} component")


def misspec_label(spec: ScenarioSpec, m: MisspecSpec) -> str:
    return f"{spec.scenario_id}:{m.error_type}:c{m.target_component}:m{m.magnitude:g}"


def raw_profile_values(spec: ScenarioSpec, horizon_t: int) -> np.ndarray:
    """Unnormalised curve: base level plus the sum of all components."""
    ts = range(horizon_t + 1)
    vals = np.array(
        [spec.base_level + sum(eval_component(c, t, horizon_t) for c in spec.components)
         for t in ts])
    return vals


def total_mass(profile: DemandProfile) -> float:
    """Expected total arrivals over the horizon, sum of L(t)."""
    return float(np.sum(profile.values))


def normalize_to_mass(profile: DemandProfile, target: float) -> DemandProfile:
    """Rescale so the profile's total mass equals ``target``."""
    mass = total_mass(profile)
    if mass <= 0:
        raise ValueError(f"profile {profile.label!r} has zero mass, cannot normalize")
    if target <= 0:
        raise ValueError(f"target mass must be positive, got {target}")
    return DemandProfile(profile.values * (target / mass), profile.label, profile.is_oracle)


def build_scenario(spec: ScenarioSpec, horizon_t: int,
                   target_mass: float | None = None) -> DemandProfile:
    """Materialise the true (oracle) demand curve for one scenario."""
    vals = raw_profile_values(spec, horizon_t)
    if not np.any(vals > 0):
        raise ValueError(f"{spec.scenario_id}: built profile is identically zero")
    profile = DemandProfile(vals, spec.scenario_id, is_oracle=True)
    if target_mass is not None:
        profile = normalize_to_mass(profile, target_mass)
    return profile


def _component_timescale(c: ShapeComponent, horizon_t: int) -> float:
    """Natural time unit used by timing shifts, per component kind."""
    if isinstance(c, Peak):
        return c.width
    if isinstance(c, FinalRamp):
        return (horizon_t - c.start) / 2.0
    if isinstance(c, LogisticRamp):
        return 2.0 / c.steepness
    if isinstance(c, ExpDecay):
        return 1.0 / c.rate
    return (c.end - c.start) / 2.0


def perturb_component(c: ShapeComponent, m: MisspecSpec, horizon_t: int) -> ShapeComponent | None:
    """Apply one error to one component; None means the component is dropped."""
    if m.error_type in ("omitted_peak", "omitted_late_growth"):
        return None
    if m.error_type == "peak_timing":
        return replace(c, center=c.center + m.magnitude * c.width)
    if m.error_type == "peak_height":
        return replace(c, height=c.height * m.magnitude)
    if m.error_type == "oversmoothing":
        return replace(c, width=c.width * m.magnitude)
    if m.error_type == "plateau_level":
        return replace(c, level=c.level * m.magnitude)
    if m.error_type == "slope_error":
        if isinstance(c, LogisticRamp):
            return replace(c, steepness=c.steepness * m.magnitude)
        return replace(c, rate=c.rate * m.magnitude)
    if m.error_type == "late_growth_timing":
        shift = m.magnitude * _component_timescale(c, horizon_t)
        if isinstance(c, FinalRamp):
            # Keep a non-degenerate ramp (onset before the horizon) without
            # moving a ramp that was not shifted.
            return replace(c, start=min(c.start + shift, max(c.start, horizon_t - 1.0)))
        return replace(c, midpoint=c.midpoint + shift)
    if m.error_type == "late_growth_magnitude":
        if isinstance(c, FinalRamp):
            return replace(c, end_height=c.end_height * m.magnitude)
        return replace(c, asymptote=c.asymptote * m.magnitude)
    raise ValueError(f"unknown error type {m.error_type!r}")


def apply_misspecification(spec: ScenarioSpec, m: MisspecSpec, horizon_t: int,
                           target_mass: float | None = None) -> DemandProfile:
    """Build the misspecified proxy curve for one scenario and one error.

    Only the targeted component is touched; the rebuilt curve is then
    renormalised to the true scenario's total mass.  When ``target_mass`` is
    given it is used directly (the oracle curve is normalised to the same
    constant), so a null perturbation reproduces the oracle bit for bit.
    """
    check_applicable(spec, m)
    new_components = []
    for idx, c in enumerate(spec.components):
        if idx == m.target_component:
            perturbed = perturb_component(c, m, horizon_t)
            if perturbed is not None:
                new_components.append(perturbed)
        else:
            new_components.append(c)
    proxy_spec = ScenarioSpec(spec.scenario_id, spec.name, spec.base_level,
                              tuple(new_components))
    vals = raw_profile_values(proxy_spec, horizon_t)
    if not np.any(vals > 0):
        raise ValueError(f"{misspec_label(spec, m)}: proxy profile is identically zero")
    if target_mass is not None:
        true_mass = target_mass
    else:
        true_mass = total_mass(build_scenario(spec, horizon_t))
    proxy = DemandProfile(vals, misspec_label(spec, m), is_oracle=False)
    return normalize_to_mass(proxy, true_mass)


def default_target_mass(price_levels=DEFAULT_PRICE_LEVELS,
                        eta_levels=(0.0075, 0.0100, 0.0130),
                        q_levels=(500, 700, 900),
                        ratio: float = DEFAULT_MASS_RATIO) -> float:
    """Total mass making median-price unconstrained sales ~ ratio * mid Q."""
    p_med = statistics.median(price_levels)
    eta_med = statistics.median(eta_levels)
    q_med = statistics.median(q_levels)
    return ratio * q_med * math.exp(eta_med * p_med)


def default_scenarios(horizon_t: int) -> list[ScenarioSpec]:
    """The nine-scenario library, laid out as fractions of the horizon.

    Heights are relative (every curve is renormalised to a common mass), so
    only the shape matters.  SC1/SC3/SC6/SC7/SC9 carry their descriptive
    names; the remaining four cover post-peak decay, narrow late spikes,
    sustained level shifts and broad peaks.
    """
    T = float(horizon_t)
    up, dn = SCALE_UP, SCALE_DOWN
    return [
        ScenarioSpec(
            "SC1", "peak_plus_late_growth", 8.0,
            (Peak(0.42 * T, 0.10 * T, 30.0), FinalRamp(0.80 * T, 35.0)),
            (MisspecSpec("peak_timing", 0, SHIFT_ONE),
             MisspecSpec("peak_height", 0, up),
             MisspecSpec("omitted_late_growth", 1),
             MisspecSpec("late_growth_magnitude", 1, dn),
             MisspecSpec("late_growth_timing", 1, SHIFT_ONE))),
        ScenarioSpec(
            "SC2", "peak_plus_decay", 5.0,
            (Peak(0.23 * T, 0.08 * T, 35.0), ExpDecay(0.33 * T, 4.2 / T, 22.0)),
            (MisspecSpec("peak_timing", 0, SHIFT_ONE),
             MisspecSpec("peak_height", 0, dn),
             MisspecSpec("omitted_peak", 0),
             MisspecSpec("oversmoothing", 0, WIDEN_TWO),
             MisspecSpec("slope_error", 1, up))),
        ScenarioSpec(
            "SC3", "peak_plus_peak", 8.0,
            (Peak(0.30 * T, 0.08 * T, 28.0), Peak(0.67 * T, 0.08 * T, 28.0)),
            (MisspecSpec("peak_timing", 0, SHIFT_ONE),
             MisspecSpec("peak_height", 1, up),
             MisspecSpec("omitted_peak", 1),
             MisspecSpec("oversmoothing", 0, WIDEN_TWO),
             MisspecSpec("peak_height", 0, dn))),
        ScenarioSpec(
            "SC4", "plateau_plus_late_spike", 6.0,
            (Plateau(0.17 * T, 0.57 * T, 18.0), Peak(0.73 * T, 0.042 * T, 45.0)),
            (MisspecSpec("peak_timing", 1, SHIFT_ONE),
             MisspecSpec("peak_height", 1, dn),
             MisspecSpec("oversmoothing", 1, WIDEN_TWO),
             MisspecSpec("plateau_level", 0, up),
             MisspecSpec("omitted_peak", 1))),
        ScenarioSpec(
            "SC5", "sustained_level_shift", 9.0,
            (Peak(0.17 * T, 0.067 * T, 18.0), Plateau(0.43 * T, T, 16.0)),
            (MisspecSpec("peak_timing", 0, SHIFT_ONE),
             MisspecSpec("peak_height", 0, up),
             MisspecSpec("plateau_level", 1, up),
             MisspecSpec("plateau_level", 1, dn),
             MisspecSpec("omitted_peak", 0))),
        ScenarioSpec(
            "SC6", "double_peak_plus_late_growth", 7.0,
            (Peak(0.25 * T, 0.083 * T, 24.0), Peak(0.53 * T, 0.083 * T, 24.0),
             FinalRamp(0.83 * T, 30.0)),
            (MisspecSpec("peak_timing", 0, SHIFT_ONE),
             MisspecSpec("peak_height", 1, up),
             MisspecSpec("omitted_peak", 0),
             MisspecSpec("omitted_late_growth", 2),
             MisspecSpec("late_growth_magnitude", 2, up))),
        ScenarioSpec(
            "SC7", "monotone_growth_plus_local_peak", 6.0,
            (LogisticRamp(0.50 * T, 9.0 / T, 28.0), Peak(0.33 * T, 0.067 * T, 16.0)),
            (MisspecSpec("peak_timing", 1, SHIFT_ONE),
             MisspecSpec("peak_height", 1, up),
             MisspecSpec("omitted_peak", 1),
             MisspecSpec("slope_error", 0, up),
             MisspecSpec("oversmoothing", 1, WIDEN_TWO))),
        ScenarioSpec(
            "SC8", "broad_peak_plus_late_spike", 6.0,
            (Peak(0.40 * T, 0.167 * T, 22.0), Peak(0.87 * T, 0.042 * T, 40.0)),
            (MisspecSpec("peak_timing", 1, SHIFT_ONE),
             MisspecSpec("peak_height", 0, up),
             MisspecSpec("omitted_peak", 1),
             MisspecSpec("oversmoothing", 1, WIDEN_TWO),
             MisspecSpec("peak_height", 1, dn))),
        ScenarioSpec(
            "SC9", "level_shift_plus_peak_plus_final_ramp", 8.0,
            (Plateau(0.37 * T, T, 14.0), Peak(0.63 * T, 0.083 * T, 26.0),
             FinalRamp(0.83 * T, 32.0)),
            (MisspecSpec("peak_timing", 1, SHIFT_ONE),
             MisspecSpec("plateau_level", 0, dn),
             MisspecSpec("omitted_late_growth", 2),
             MisspecSpec("late_growth_magnitude", 2, dn),
             MisspecSpec("late_growth_timing", 2, SHIFT_ONE))),
    ]


def build_library(specs: list[ScenarioSpec], horizon_t: int,
                  target_mass: float) -> tuple[dict[str, DemandProfile],
                                               dict[str, dict[str, DemandProfile]]]:
    """All oracle curves plus, per scenario, the labelled proxy curves."""
    oracles = {}
    proxies = {}
    for spec in specs:
        oracles[spec.scenario_id] = build_scenario(spec, horizon_t, target_mass)
        proxies[spec.scenario_id] = {
            misspec_label(spec, m): apply_misspecification(spec, m, horizon_t, target_mass)
            for m in spec.misspecs}
    return oracles, proxies


# ----------------------------------------------------------------------
# Manifest serialisation: the component parameters and misspec specs are
# written next to the results so every run is reproducible from its files.
# ----------------------------------------------------------------------

def _component_to_dict(c: ShapeComponent) -> dict:
    d = {"kind": component_kind(c)}
    d.update(asdict(c))
    return d


def _component_from_dict(d: dict) -> ShapeComponent:
    d = dict(d)
    kind = _NAME_KINDS[d.pop("kind")]
    return kind(**d)


def manifest_dict(specs: list[ScenarioSpec], horizon_t: int, target_mass: float) -> dict:
    return {
        "horizon_t": horizon_t,
        "target_mass": target_mass,
        "scenarios": [
            {
                "scenario_id": s.scenario_id,
                "name": s.name,
                "base_level": s.base_level,
                "components": [_component_to_dict(c) for c in s.components],
                "misspecifications": [
                    {"error_type": m.error_type,
                     "target_component": m.target_component,
                     "magnitude": m.magnitude,
                     "label": misspec_label(s, m)}
                    for m in s.misspecs],
            }
            for s in specs],
    }


def specs_from_manifest(doc: dict) -> list[ScenarioSpec]:
    specs = []
    for s in doc["scenarios"]:
        specs.append(ScenarioSpec(
            s["scenario_id"], s["name"], s["base_level"],
            tuple(_component_from_dict(c) for c in s["components"]),
            tuple(MisspecSpec(m["error_type"], m["target_component"], m["magnitude"])
                  for m in s["misspecifications"])))
    return specs


def write_manifest(path, specs: list[ScenarioSpec], horizon_t: int, target_mass: float) -> None:
    with open(path, "w") as fh:
        json.dump(manifest_dict(specs, horizon_t, target_mass), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> tuple[list[ScenarioSpec], int, float]:
    with open(path) as fh:
        doc = json.load(fh)
    return specs_from_manifest(doc), doc["horizon_t"], doc["target_mass"]
