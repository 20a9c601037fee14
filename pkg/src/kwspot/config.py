"""Sectioned key-value configuration for the pipeline CLI.

One static file holds paths plus the per-module parameter blocks; any field
can be overridden from the command line.  Defaults follow the documented
operating point (beam 10, bias alpha=1 beta=4, fuzzy threshold 0.5).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .decoder import BeamConfig, BiasConfig
from .kws import KwsConfig, Stage
from .metrics import EvalConfig
from .pgram import DEFAULT_FRAME_PERIOD_S, SynthConfig


@dataclass
class Paths:
    char_units: str = ""
    syll_units: str = ""
    lexicon: str = ""
    char_lm: str = ""
    syll_lm: str = ""
    keywords: str = ""
    cost_table: str = ""


@dataclass
class PipelineConfig:
    paths: Paths = field(default_factory=Paths)
    beam: BeamConfig = field(default_factory=BeamConfig)
    bias: BiasConfig = field(default_factory=BiasConfig)
    kws: KwsConfig = field(default_factory=KwsConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    frame_period_s: float = DEFAULT_FRAME_PERIOD_S
    seed: int = 0
    jobs: int = 1


_SECTIONS = {"paths": Paths, "beam": BeamConfig, "bias": BiasConfig,
             "kws": KwsConfig, "eval": EvalConfig, "synth": SynthConfig}


def _coerce(raw: str, target_type):
    if target_type is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def load_config(path) -> PipelineConfig:
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    cfg = PipelineConfig()
    for section, cls in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        kwargs = {}
        by_name = {f.name: f for f in fields(cls)}
        for key, raw in parser.items(section):
            if key not in by_name:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            f = by_name[key]
            if key == "stages_enabled":
                kwargs[key] = frozenset(Stage(s) for s in raw.split())
            elif key == "confusion":
                continue  # confusion tables are built programmatically
            else:
                base = getattr(cls(), f.name) if section != "paths" else ""
                kwargs[key] = _coerce(raw, type(base) if base is not None else float)
        setattr(cfg, section, cls(**{**_defaults(cls), **kwargs}))
    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            if key == "seed":
                cfg.seed = int(raw)
            elif key == "jobs":
                cfg.jobs = int(raw)
            elif key == "frame_period_s":
                cfg.frame_period_s = float(raw)
            else:
                raise ValueError(f"unknown key {key!r} in [run]")
    return cfg


def _defaults(cls) -> dict:
    inst = cls()
    return {f.name: getattr(inst, f.name) for f in fields(cls)}
