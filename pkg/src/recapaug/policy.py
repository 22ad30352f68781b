"""Operation registry, magnitude grid, and policy sampling.

A policy holds five sub-policies of two (operation, magnitude index)
pairs; each image gets one uniformly drawn sub-policy whose two ops run
in order. Magnitudes are a 10-level uniform grid over each operation's
range, oriented so index 0 is the weakest effect. Recapture-specific
operations force the Spoof label; nothing can restore Bonafide.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

from .capture import BlurDirection, BlurSpec, ResolutionSpec, hand_trembling, low_resolution
from .errors import ConfigError, RangeError, ValidationError
from .icc import color_diversity
from .image import ImageBuffer
from .press import color_distortion
from .printsim import bn_halftone, sfc_halftone
from .replay import moire, specular_reflection
from .rng import derive_rng, stable_hash64

MAGNITUDE_LEVELS = 10
SUB_POLICY_OPS = 2
POLICY_SUB_POLICIES = 5


class Label(Enum):
    BONAFIDE = "bonafide"
    SPOOF = "spoof"


class AugOpKind(Enum):
    COLOR_DIVERSITY = "ColorDiversity"
    LOW_RESOLUTION = "LowResolution"
    HAND_TREMBLING = "HandTrembling"
    SPECULAR_REFLECTION = "SpecularReflection"
    MOIRE_PATTERN = "MoirePattern"
    SFC_HALFTONE = "SFCHalftone"
    BN_HALFTONE = "BNHalftone"
    COLOR_DISTORTION = "ColorDistortion"


@dataclass
class AssetBanks:
    """Immutable asset collections the operations draw from."""

    profiles: list = None
    presets: list = None
    moire_textures: object = None  # sequence of MoireTexture
    bluenoise: list = None
    backgrounds: object = None
    cluster_table: object = None

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise ConfigError(
                f"asset bank '{name}' is not loaded; run `recapaug gen-banks` "
                "or point --banks/RECAPAUG_BANK_DIR at a generated bank directory"
            )
        return value


def _run_color_diversity(img, mag, banks, rng, trace):
    return color_diversity(img, rng, banks.require("profiles"), trace=trace)


def _run_low_resolution(img, mag, banks, rng, trace):
    return low_resolution(img, ResolutionSpec(mag))


def _run_hand_trembling(img, mag, banks, rng, trace):
    direction = list(BlurDirection)[int(rng.integers(len(BlurDirection)))]
    trace.append({"direction": direction.value})
    return hand_trembling(img, BlurSpec(mag, direction))


def _run_specular_reflection(img, mag, banks, rng, trace):
    return specular_reflection(img, rng, banks.require("backgrounds"), mag, trace=trace)


def _run_moire(img, mag, banks, rng, trace):
    return moire(img, rng, banks.require("moire_textures"), mag, trace=trace)


def _run_sfc_halftone(img, mag, banks, rng, trace):
    return sfc_halftone(img, mag, banks.cluster_table)


def _run_bn_halftone(img, mag, banks, rng, trace):
    return bn_halftone(img, rng, banks.require("bluenoise"), mag, trace=trace)


def _run_color_distortion(img, mag, banks, rng, trace):
    return color_distortion(
        img, rng, banks.require("presets"), banks.require("profiles"), trace=trace
    )


@dataclass(frozen=True)
class OpEntry:
    """Registry row: magnitude range (oriented weak -> strong) + semantics."""

    name: str
    spoof_forcing: bool
    apply: Callable
    lo: Optional[float] = None  # grid value at index 0
    hi: Optional[float] = None  # grid value at index 9
    integer: bool = False

    @property
    def categorical(self) -> bool:
        return self.lo is None

    @property
    def range_endpoints(self):
        if self.categorical:
            return None
        return (min(self.lo, self.hi), max(self.lo, self.hi))


BUILTIN_OPS: dict[str, OpEntry] = {
    e.name: e
    for e in [
        OpEntry("ColorDiversity", False, _run_color_diversity),
        OpEntry("LowResolution", False, _run_low_resolution, lo=1.0, hi=0.01),
        OpEntry("HandTrembling", False, _run_hand_trembling, lo=1, hi=16, integer=True),
        OpEntry("SpecularReflection", True, _run_specular_reflection, lo=0.03, hi=0.2),
        OpEntry("MoirePattern", True, _run_moire, lo=0.01, hi=0.3),
        OpEntry("SFCHalftone", True, _run_sfc_halftone, lo=0.01, hi=0.2),
        OpEntry("BNHalftone", True, _run_bn_halftone, lo=0.01, hi=0.4),
        OpEntry("ColorDistortion", True, _run_color_distortion),
    ]
}

# ops registered at runtime (e.g. traditional geometric augmentations);
# inactive unless a config enables them by name
EXTRA_OPS: dict[str, OpEntry] = {}


def register_op(entry: OpEntry) -> None:
    if entry.name in BUILTIN_OPS:
        raise ConfigError(f"cannot shadow built-in op {entry.name}")
    EXTRA_OPS[entry.name] = entry


def active_registry(config: dict | None = None) -> dict[str, OpEntry]:
    """Built-in ops with optional range overrides, plus enabled extras."""
    registry = dict(BUILTIN_OPS)
    config = config or {}
    for name, override in config.get("ops", {}).items():
        if name not in registry:
            raise ConfigError(f"config overrides unknown op {name}")
        entry = registry[name]
        if entry.categorical:
            raise ConfigError(f"op {name} is categorical; it has no range to override")
        registry[name] = replace(
            entry, lo=override.get("lo", entry.lo), hi=override.get("hi", entry.hi)
        )
    for name in config.get("extra_ops", []):
        if name not in EXTRA_OPS:
            raise ConfigError(f"extra op {name} is not registered")
        registry[name] = EXTRA_OPS[name]
    return registry


def magnitude_value(kind, index: int, registry: dict[str, OpEntry] | None = None):
    """Grid value lo + index*(hi-lo)/9; categorical kinds return None."""
    if not 0 <= index < MAGNITUDE_LEVELS:
        raise RangeError(f"magnitude index must be in [0, 9], got {index}")
    name = kind.value if isinstance(kind, AugOpKind) else kind
    registry = registry if registry is not None else BUILTIN_OPS
    if name not in registry:
        raise ConfigError(f"unknown op kind {name}")
    entry = registry[name]
    if entry.categorical:
        return None
    # convex form hits both range endpoints exactly
    t = index / (MAGNITUDE_LEVELS - 1)
    value = entry.lo * (1.0 - t) + entry.hi * t
    return int(round(value)) if entry.integer else value


@dataclass(frozen=True)
class SubPolicy:
    ops: tuple  # exactly two (kind name, magnitude index) pairs

    def __post_init__(self):
        if len(self.ops) != SUB_POLICY_OPS:
            raise ValidationError(f"sub-policy needs exactly 2 ops, got {len(self.ops)}")


@dataclass(frozen=True)
class Policy:
    sub_policies: tuple
    epoch_seed: int

    def __post_init__(self):
        if len(self.sub_policies) != POLICY_SUB_POLICIES:
            raise ValidationError(
                f"policy needs exactly 5 sub-policies, got {len(self.sub_policies)}"
            )


def sample_policy(seed: int, epoch: int, registry: dict[str, OpEntry] | None = None) -> Policy:
    """Epoch policy: 5 sub-policies × 2 uniform (op, magnitude) draws."""
    registry = registry if registry is not None else BUILTIN_OPS
    names = list(registry)
    rng = derive_rng(seed, epoch, "policy")
    subs = []
    for _ in range(POLICY_SUB_POLICIES):
        ops = tuple(
            (names[int(rng.integers(len(names)))], int(rng.integers(MAGNITUDE_LEVELS)))
            for _ in range(SUB_POLICY_OPS)
        )
        subs.append(SubPolicy(ops))
    return Policy(tuple(subs), epoch_seed=stable_hash64(seed, epoch))


def policy_to_json(policy: Policy) -> dict:
    return {
        "epoch_seed": policy.epoch_seed,
        "sub_policies": [
            [{"kind": kind, "magnitude_index": idx} for kind, idx in sub.ops]
            for sub in policy.sub_policies
        ],
    }


def policy_from_json(doc: dict) -> Policy:
    subs = tuple(
        SubPolicy(tuple((op["kind"], int(op["magnitude_index"])) for op in sub))
        for sub in doc["sub_policies"]
    )
    return Policy(subs, epoch_seed=int(doc.get("epoch_seed", 0)))


@dataclass
class Sample:
    image: ImageBuffer
    label: Label
    domain_id: int
    provenance: list = field(default_factory=list)


def apply_subpolicy(
    sample: Sample,
    sub: SubPolicy,
    banks: AssetBanks,
    rng,
    registry: dict[str, OpEntry] | None = None,
) -> Sample:
    """Run both ops in order; labels only ever move Bonafide -> Spoof."""
    registry = registry if registry is not None else BUILTIN_OPS
    img = sample.image
    label = sample.label
    records = []
    for kind, mag_index in sub.ops:
        if kind not in registry:
            raise ConfigError(f"sub-policy references unknown op {kind}")
        entry = registry[kind]
        mag = magnitude_value(kind, mag_index, registry)
        asset_trace: list = []
        img = entry.apply(img, mag, banks, rng, asset_trace)
        if entry.spoof_forcing:
            label = Label.SPOOF
        records.append(
            {
                "kind": kind,
                "magnitude_index": mag_index,
                "resolved_magnitude": mag,
                "assets": asset_trace,
            }
        )
    # augmented data forms a fresh synthetic domain keyed by the op chain
    new_domain = stable_hash64(sample.domain_id, *(kind for kind, _ in sub.ops))
    return Sample(
        image=img,
        label=label,
        domain_id=new_domain,
        provenance=sample.provenance + records,
    )


def augment_sample(
    sample: Sample,
    policy: Policy,
    banks: AssetBanks,
    rng,
    registry: dict[str, OpEntry] | None = None,
) -> Sample:
    """Draw one of the five sub-policies uniformly and apply it."""
    idx = int(rng.integers(POLICY_SUB_POLICIES))
    out = apply_subpolicy(sample, policy.sub_policies[idx], banks, rng, registry)
    for record in out.provenance[len(sample.provenance) :]:
        record["sub_policy_index"] = idx
    return out
