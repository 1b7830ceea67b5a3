"""Run configuration: one JSON document with every tunable and its default."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from . import engine, msdata, pipeline, synth
from .potentials import PotentialParams
from .schedule import GuidanceSchedules

CONFIG_FORMAT = "ms-steer/config/1"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DeriveConfig:
    state_a: str = "bound"
    state_b: str = "unbound"
    enrich_ratio: float = 3.0
    # overrides each row's linker_max when set
    linker_max: float | None = None
    hdx_complex_state: str = "complex"
    hdx_reference_state: str = "apo"
    weighting: str = "inverse_length"
    peptide_sd_factor: float = msdata.PEPTIDE_SD_FACTOR
    protection_threshold: float = msdata.PROTECTION_THRESHOLD


@dataclass(frozen=True)
class DenoiserConfig:
    tau_sq: float = 0.01
    # mixture weights per reference state; None means uniform
    component_weights: tuple | None = None


@dataclass
class RunConfig:
    sampler: engine.SamplerConfig = field(default_factory=engine.SamplerConfig)
    schedules: GuidanceSchedules = field(default_factory=GuidanceSchedules)
    potentials: PotentialParams = field(default_factory=PotentialParams)
    synth: synth.SynthConfig = field(default_factory=synth.SynthConfig)
    subset: msdata.SubsetConfig = field(default_factory=msdata.SubsetConfig)
    subset_callbacks: pipeline.SubsetCallbackConfig = field(default_factory=pipeline.SubsetCallbackConfig)
    derive: DeriveConfig = field(default_factory=DeriveConfig)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    max_workers: int = 1

    def to_dict(self) -> dict:
        return {
            "format": CONFIG_FORMAT,
            "sampler": self.sampler.to_dict(),
            "schedules": self.schedules.to_dict(),
            "potentials": self.potentials.to_dict(),
            "synth": self.synth.to_dict(),
            "subset": self.subset.to_dict(),
            "subset_callbacks": dataclasses.asdict(self.subset_callbacks),
            "derive": dataclasses.asdict(self.derive),
            "denoiser": {"tau_sq": self.denoiser.tau_sq,
                         "component_weights": None if self.denoiser.component_weights is None
                         else list(self.denoiser.component_weights)},
            "max_workers": self.max_workers,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        """Overlay ``doc`` on the defaults; any key the defaults lack is an error."""
        if not isinstance(doc, dict):
            raise ConfigError("$: expected an object")
        defaults = cls().to_dict()
        _check_keys(doc, defaults, "$")
        fmt = doc.get("format", CONFIG_FORMAT)
        if fmt != CONFIG_FORMAT:
            raise ConfigError(f"$.format: expected {CONFIG_FORMAT!r}, got {fmt!r}")
        merged = _merge(defaults, doc)
        try:
            sampler = dict(merged["sampler"])
            sampler["family_weights"] = dict(sampler["family_weights"])
            cw = merged["denoiser"]["component_weights"]
            cfg = cls(
                sampler=engine.SamplerConfig(**sampler),
                schedules=GuidanceSchedules.from_dict(merged["schedules"]),
                potentials=PotentialParams(**merged["potentials"]),
                synth=synth.SynthConfig(**{**merged["synth"],
                                           "xl_residue_types": tuple(merged["synth"]["xl_residue_types"])}),
                subset=msdata.SubsetConfig(**merged["subset"]),
                subset_callbacks=pipeline.SubsetCallbackConfig(**merged["subset_callbacks"]),
                derive=DeriveConfig(**merged["derive"]),
                denoiser=DenoiserConfig(merged["denoiser"]["tau_sq"], None if cw is None else tuple(cw)),
                max_workers=int(merged["max_workers"]),
            )
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"invalid configuration: {e}") from None
        if cfg.max_workers < 1:
            raise ConfigError("$.max_workers: must be >= 1")
        return cfg

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"$: invalid JSON ({e})") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.loads(fh.read())


# sub-documents whose keys are data rather than fixed fields
_OPEN_KEYS = {"$.sampler.family_weights"}


def _check_keys(doc, defaults, path):
    if not isinstance(doc, dict) or not isinstance(defaults, dict) or path in _OPEN_KEYS:
        return
    for k, v in doc.items():
        if k not in defaults:
            raise ConfigError(f"{path}.{k}: unknown key")
        _check_keys(v, defaults[k], f"{path}.{k}")


def _merge(base, over):
    if isinstance(base, dict) and isinstance(over, dict):
        out = dict(base)
        for k, v in over.items():
            out[k] = _merge(base.get(k), v) if k in base else v
        return out
    return over
