"""Model configuration and the named parameter set."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .ingest import MAX_FRAMES, N_COVERS

BRANCHES = ("vtmab", "fcab", "fqab", "tqab")


class ConfigurationError(ValueError):
    """Inputs do not match the model's dimensions or settings."""


@dataclass
class ModelConfig:
    d: int = 32
    n_heads: int = 4
    n_layers: int = 2
    ff_mult: int = 4
    max_len: int = MAX_FRAMES + N_COVERS  # position table has max_len + 1 rows (CLS first)
    mlp_hidden: int | None = None  # defaults to d // 2
    normalize_vt: bool = False  # L2-normalize before the video-text dot products
    branches: tuple[str, ...] = BRANCHES
    d_t: int = 64
    d_f: int = 64

    def __post_init__(self):
        self.branches = tuple(self.branches)
        if self.d % self.n_heads:
            raise ConfigurationError(f"d={self.d} not divisible by n_heads={self.n_heads}")
        if self.max_len < MAX_FRAMES + N_COVERS:
            raise ConfigurationError(f"max_len must be at least {MAX_FRAMES + N_COVERS}")
        unknown = set(self.branches) - set(BRANCHES)
        if unknown or not self.branches:
            raise ConfigurationError(f"invalid branch set {self.branches}")
        if self.mlp_hidden is None:
            self.mlp_hidden = max(1, self.d // 2)

    @property
    def branch_mask(self) -> tuple[bool, ...]:
        return tuple(b in self.branches for b in BRANCHES)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["branches"] = list(self.branches)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, ff, h = cfg.d, cfg.d * cfg.ff_mult, cfg.mlp_hidden
    shapes = {
        "encoder.in_proj.w": (cfg.d_f, d),
        "encoder.in_proj.b": (d,),
        "encoder.cls": (d,),
        "encoder.pos": (cfg.max_len + 1, d),
    }
    for i in range(cfg.n_layers):
        pre = f"encoder.layer{i}."
        for name in ("q", "k", "v", "o"):
            shapes[pre + f"w{name}"] = (d, d)
            shapes[pre + f"b{name}"] = (d,)
        shapes.update(
            {
                pre + "ln1.g": (d,),
                pre + "ln1.b": (d,),
                pre + "ff1.w": (d, ff),
                pre + "ff1.b": (ff,),
                pre + "ff2.w": (ff, d),
                pre + "ff2.b": (d,),
                pre + "ln2.g": (d,),
                pre + "ln2.b": (d,),
            }
        )
    shapes.update(
        {
            "text_proj.w": (cfg.d_t, d),
            "text_proj.b": (d,),
            "branches.w_c": (d, 1),
            "branches.mlp_f.w1": (d, h),
            "branches.mlp_f.b1": (h,),
            "branches.mlp_f.w2": (h, 1),
            "branches.mlp_f.b2": (1,),
            "branches.mlp_t.w1": (d, h),
            "branches.mlp_t.b1": (h,),
            "branches.mlp_t.w2": (h, 1),
            "branches.mlp_t.b2": (1,),
            "se.w_s": (d, 1),
            "se.w_e": (2, len(BRANCHES)),
        }
    )
    return shapes


@dataclass(eq=False)
class ModelParameters:
    config: ModelConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        expected = parameter_shapes(self.config)
        if set(expected) != set(self.tensors):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise ConfigurationError(f"parameter names differ: missing {missing}, unexpected {extra}")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ConfigurationError(f"{name}: shape {self.tensors[name].shape}, expected {shape}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def astype(self, dtype) -> "ModelParameters":
        return ModelParameters(self.config, {k: v.astype(dtype) for k, v in self.tensors.items()})

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def group(self, prefix: str) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith(prefix)}

    def same_as(self, other: "ModelParameters") -> bool:
        return (
            self.config == other.config
            and list(self.tensors) == list(other.tensors)
            and all(
                self.tensors[k].dtype == other.tensors[k].dtype
                and self.tensors[k].tobytes() == other.tensors[k].tobytes()
                for k in self.tensors
            )
        )


def init_parameters(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> ModelParameters:
    tensors = {}
    for name, shape in parameter_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if name in ("encoder.cls", "encoder.pos"):
            value = 0.02 * rng.standard_normal(shape)
        elif leaf == "g":
            value = np.ones(shape)
        elif len(shape) == 1:
            value = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            value = rng.uniform(-bound, bound, size=shape)
        tensors[name] = value.astype(dtype)
    return ModelParameters(cfg, tensors)


def zero_parameters(cfg: ModelConfig, dtype=np.float32) -> ModelParameters:
    return ModelParameters(cfg, {k: np.zeros(s, dtype=dtype) for k, s in parameter_shapes(cfg).items()})
