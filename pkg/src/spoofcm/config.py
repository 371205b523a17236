"""Flat INI experiment configuration.

All hyperparameters are surfaced here; nothing the pipeline uses is
hard-coded. Seeds carry no implicit defaults: a config driving a training
run must state them.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .features import FeatureRecipe
from .gmm import EmConfig
from .metrics import CostModel


class ConfigError(ValueError):
    """Missing or ill-typed configuration value."""


DEFAULT_CONFIG = """\
[experiment]
task = PA
# seeds are mandatory; there are no entropy defaults
seed = 0

[paths]
audio_root =
train_protocol =
test_protocol =
work_dir =

[features]
kind = lfcc
window_ms = 25.0
hop_ms = 10.0
fft_size = 512
n_filters = 20
n_ceps = 20
delta_width = 2
with_deltas = true
cmvn = none
cqcc_bins_per_octave = 96
cqcc_octaves = 9
cqcc_uniform_bins = 1024

[gmm]
mixtures = 128
max_iters = 50
rel_tol = 1e-5
variance_floor = 1e-3
seed = 0

[ivector]
rank = 100
iters = 10
extractors = mfcc,imfcc,scmc
seed = 0

[svm]
c = 1.0
epochs = 200
seed = 0

[fusion]
prior = 0.5

[cost]
pi_tar = 0.9405
pi_non = 0.0095
pi_spoof = 0.05
c_miss_asv = 1.0
c_fa_asv = 10.0
c_miss_cm = 1.0
c_fa_cm = 10.0
p_miss_asv = 0.05
p_fa_asv = 0.05
p_miss_spoof_asv = 0.05

[silence]
epsilon = 0.0
trim_mode = trailing

[partition]
heldout_attacks =
speaker_fraction = 0.5
seed = 0
"""


def default_config_text() -> str:
    return DEFAULT_CONFIG


def _parser_with_defaults(extra_path=None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string(DEFAULT_CONFIG)
    if extra_path is not None:
        read = parser.read(str(extra_path))
        if not read:
            raise ConfigError(f"cannot read config file {extra_path}")
    return parser


def recipe_from_section(sec) -> FeatureRecipe:
    return FeatureRecipe(
        kind=sec.get("kind"),
        window_ms=sec.getfloat("window_ms"),
        hop_ms=sec.getfloat("hop_ms"),
        fft_size=sec.getint("fft_size"),
        n_filters=sec.getint("n_filters"),
        n_ceps=sec.getint("n_ceps"),
        delta_width=sec.getint("delta_width"),
        with_deltas=sec.getboolean("with_deltas"),
        cmvn_mode=sec.get("cmvn"),
        cqcc_bins_per_octave=sec.getint("cqcc_bins_per_octave"),
        cqcc_octaves=sec.getint("cqcc_octaves"),
        cqcc_uniform_bins=sec.getint("cqcc_uniform_bins"),
    )


def cost_from_section(sec) -> CostModel:
    return CostModel(**{name: sec.getfloat(name) for name in (
        "pi_tar", "pi_non", "pi_spoof", "c_miss_asv", "c_fa_asv",
        "c_miss_cm", "c_fa_cm", "p_miss_asv", "p_fa_asv", "p_miss_spoof_asv")})


def _require_seed(parser: configparser.ConfigParser, raw_text: str,
                  section: str) -> int:
    # the seed must appear in the user's file, not just in the defaults
    user = configparser.ConfigParser(inline_comment_prefixes=("#",))
    user.read_string(raw_text)
    if not user.has_option(section, "seed"):
        raise ConfigError(
            f"config must state an explicit [{section}] seed (reproducibility "
            "is not optional)"
        )
    return parser.getint(section, "seed")


@dataclass
class ExperimentConfig:
    task: str
    seed: int
    audio_root: Path
    train_protocol: Path
    test_protocol: Path
    work_dir: Path
    recipe: FeatureRecipe
    mixtures: int
    em: EmConfig
    cost: CostModel
    trim_mode: str
    epsilon: float
    fusion_prior: float = 0.5


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    raw_text = path.read_text()
    parser = _parser_with_defaults(path)

    task = parser.get("experiment", "task").upper()
    if task not in ("LA", "PA"):
        raise ConfigError(f"unknown task '{task}' (expected LA or PA)")
    seed = _require_seed(parser, raw_text, "experiment")
    gmm_seed = _require_seed(parser, raw_text, "gmm")

    paths = {}
    for name in ("audio_root", "train_protocol", "test_protocol", "work_dir"):
        # env overrides apply to paths only (SPOOFCM_AUDIO_ROOT etc.)
        value = os.environ.get(f"SPOOFCM_{name.upper()}",
                               parser.get("paths", name))
        if not value:
            raise ConfigError(f"[paths] {name} is required")
        paths[name] = Path(value)
    for name in ("audio_root", "train_protocol", "test_protocol"):
        if not paths[name].exists():
            raise ConfigError(f"[paths] {name} = {paths[name]} does not exist")

    em = EmConfig(max_iters=parser.getint("gmm", "max_iters"),
                  rel_tol=parser.getfloat("gmm", "rel_tol"),
                  variance_floor=parser.getfloat("gmm", "variance_floor"),
                  seed=gmm_seed)
    return ExperimentConfig(
        task=task,
        seed=seed,
        audio_root=paths["audio_root"],
        train_protocol=paths["train_protocol"],
        test_protocol=paths["test_protocol"],
        work_dir=paths["work_dir"],
        recipe=recipe_from_section(parser["features"]),
        mixtures=parser.getint("gmm", "mixtures"),
        em=em,
        cost=cost_from_section(parser["cost"]),
        trim_mode=parser.get("silence", "trim_mode"),
        epsilon=parser.getfloat("silence", "epsilon"),
        fusion_prior=parser.getfloat("fusion", "prior"),
    )


def load_cost_config(path) -> CostModel:
    parser = _parser_with_defaults(path)
    return cost_from_section(parser["cost"])
