"""Configuration, manifests, checkpoints, training workflows and the CLI."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import PRESETS, Config, config_from_dict, load_config, preset
from .manifest import ManifestEntry, load_manifest, write_manifest
from .workflows import (
    Bundle,
    SynthResult,
    build_bundle,
    entry_seed,
    load_bundle,
    save_bundle,
    seed_streams,
    synthesize,
)

__all__ = [
    "PRESETS", "Bundle", "Config", "ManifestEntry", "SynthResult", "build_bundle", "config_from_dict", "entry_seed",
    "load_bundle", "load_checkpoint", "load_config", "load_manifest", "preset", "save_bundle", "save_checkpoint",
    "seed_streams", "synthesize", "write_manifest",
]
