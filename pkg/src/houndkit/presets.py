"""Flat experiment configuration and named presets.

One :class:`ExperimentConfig` carries every stage's knobs so a run manifest
can record the complete provenance as a flat, diffable key/value mapping.
``desk-default`` is sized to finish on a laptop in minutes; the ``*-paper``
presets record the published parameter sets for the four studied ciphers
(the interleaved-applications variants) at full scale.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError
from .nn.model import ModelConfig
from .nn.optim import TrainConfig
from .locator import ScreenConfig
from .synth import (
    CpTemplate,
    FrequencyPool,
    SynthConfig,
    make_cp_template,
    make_freq_pool,
    single_freq_pool,
)


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "desk-default"
    seed: int = 7
    # trace synthesis
    n_cps: int = 50
    interleave_noise: bool = True
    gap_min: int = 3000
    gap_max: int = 15000
    freq_min_hz: float = 5e6
    freq_max_hz: float = 100e6
    freq_step_hz: float = 125e3
    nominal_hz: float = 52.5e6
    dfs_enabled: bool = True
    mean_reconfigs: float = 8.0
    awgn_sigma: float = 0.05
    round_count: int = 10
    round_length: int = 352
    prologue_len: int = 384
    epilogue_len: int = 192
    # windowing
    n: int = 256
    # classifier architecture
    conv_kernel: int = 16
    channels_stem: int = 16
    channels_res1: int = 16
    channels_res2: int = 32
    fc_hidden: int = 64
    dropout_p: float = 0.2
    # training
    epochs: int = 25
    batch_size: int = 64
    lr_max: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    warmup_frac: float = 0.3
    div_start: float = 25.0
    div_final: float = 1e4
    # locating
    stride: int = 32
    k0: int = 5
    avg_cp: int = 6800
    # scoring / baseline
    tolerance: float = 0.0  # 0 means avg_cp / 2
    mf_quantile: float = 0.9995

    def freq_pool(self) -> FrequencyPool:
        if not self.dfs_enabled:
            return single_freq_pool(self.nominal_hz)
        return make_freq_pool(self.freq_min_hz, self.freq_max_hz, self.freq_step_hz,
                              nominal_hz=self.nominal_hz)

    def template(self) -> CpTemplate:
        return make_cp_template(self.round_count, self.round_length,
                                self.prologue_len, self.epilogue_len)

    def synth_config(self, n_cps: int | None = None, interleave: bool | None = None,
                     seed: int | None = None) -> SynthConfig:
        return SynthConfig(
            n_cps=self.n_cps if n_cps is None else n_cps,
            interleave_noise=self.interleave_noise if interleave is None else interleave,
            noise_gap_range=(self.gap_min, self.gap_max),
            dfs=self.freq_pool(),
            mean_reconfigs_per_cp=self.mean_reconfigs,
            awgn_sigma=self.awgn_sigma,
            seed=self.seed if seed is None else seed,
        )

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            input_len=self.n,
            conv_kernel=self.conv_kernel,
            channels_stem=self.channels_stem,
            channels_res1=self.channels_res1,
            channels_res2=self.channels_res2,
            fc_hidden=self.fc_hidden,
            n_classes=3,
            dropout_p=self.dropout_p,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr_max=self.lr_max,
            dropout_p=self.dropout_p,
            seed=self.seed,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            warmup_frac=self.warmup_frac,
            div_start=self.div_start,
            div_final=self.div_final,
        )

    def screen_config(self) -> ScreenConfig:
        # the majority window needs a center element, so even kernels round up
        k0 = self.k0 if self.k0 % 2 == 1 else self.k0 + 1
        return ScreenConfig(k0=k0, avg_cp=self.avg_cp, s=self.stride)

    def score_tolerance(self) -> float:
        return self.tolerance if self.tolerance > 0 else self.avg_cp / 2.0

    def as_flat_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_overrides(self, overrides: dict[str, str]) -> "ExperimentConfig":
        """Apply string-valued overrides (config file or CLI), coercing each
        value to the field's declared type."""
        types = {f.name: f.type for f in dataclasses.fields(self)}
        converted: dict = {}
        for key, raw in overrides.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            ftype = types[key]
            try:
                if ftype in ("int", int):
                    converted[key] = int(raw)
                elif ftype in ("float", float):
                    converted[key] = float(raw)
                elif ftype in ("bool", bool):
                    if isinstance(raw, bool):
                        converted[key] = raw
                    elif str(raw).lower() in ("1", "true", "yes", "on"):
                        converted[key] = True
                    elif str(raw).lower() in ("0", "false", "no", "off"):
                        converted[key] = False
                    else:
                        raise ValueError(raw)
                else:
                    converted[key] = str(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
        return dataclasses.replace(self, **converted)


def read_config_file(path) -> dict[str, str]:
    """Parse the flat ``key = value`` config format ('#' starts a comment)."""
    overrides: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, value = line.split("=", 1)
            else:
                parts = line.split(None, 1)
                if len(parts) != 2:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = parts
            overrides[key.strip()] = value.strip()
    return overrides


_DESK = ExperimentConfig()

_AES = dataclasses.replace(
    _DESK, preset="aes-paper",
    n=10_000, stride=62, k0=150, avg_cp=145_000,
    conv_kernel=64, batch_size=256, lr_max=0.01, dropout_p=0.2,
    mean_reconfigs=41.0,
    round_count=10, round_length=8000, prologue_len=5000, epilogue_len=2600,
    gap_min=100_000, gap_max=400_000,
)

_AES_MASKED = dataclasses.replace(
    _DESK, preset="aes-masked-paper",
    n=5_000, stride=50, k0=10, avg_cp=50_000,
    conv_kernel=64, batch_size=256, lr_max=0.007, dropout_p=0.35,
    mean_reconfigs=14.0,
    round_count=10, round_length=2700, prologue_len=2400, epilogue_len=800,
    gap_min=50_000, gap_max=200_000,
)

_CLEFIA = dataclasses.replace(
    _DESK, preset="clefia-paper",
    n=3_000, stride=80, k0=150, avg_cp=80_000,
    conv_kernel=64, batch_size=256, lr_max=0.007, dropout_p=0.3,
    mean_reconfigs=23.0,
    round_count=18, round_length=2600, prologue_len=1000, epilogue_len=500,
    gap_min=50_000, gap_max=200_000,
)

_CAMELLIA = dataclasses.replace(
    _DESK, preset="camellia-paper",
    n=1_100, stride=50, k0=80, avg_cp=4_400,
    conv_kernel=64, batch_size=128, lr_max=0.007, dropout_p=0.4,
    mean_reconfigs=2.0,
    round_count=18, round_length=130, prologue_len=220, epilogue_len=100,
    gap_min=5_000, gap_max=30_000,
)

PRESETS: dict[str, ExperimentConfig] = {
    "desk-default": _DESK,
    "aes-paper": _AES,
    "aes-masked-paper": _AES_MASKED,
    "clefia-paper": _CLEFIA,
    "camellia-paper": _CAMELLIA,
}


def get_preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None
