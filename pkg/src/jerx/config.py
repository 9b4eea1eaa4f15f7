"""Run configuration: hyperparameters, ablation switches and the flat
key=value config-file format."""

from dataclasses import dataclass, fields

from .errors import ParseError

ABLATION_FLAGS = (
    "no_pretraining",
    "no_entity_embeddings",
    "single_ffnn",
    "no_head_tail",
    "no_bilinear",
)


@dataclass
class Config:
    # architecture
    dropout: float = 0.1
    entity_emb_dim: int = 128
    head_tail_dim: int = 512
    ner_ffnn_layers: int = 1
    re_ffnn_layers: int = 2
    # optimization
    grad_clip: float = 1.0
    weight_decay: float = 0.1
    batch_size: int = 16
    learning_rate: float = 2e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 10
    seed: int = 13
    precision: int = 32  # 64 for verification runs
    # encoder
    encoder: str = "toy"  # "toy" or "file"
    emb_path: str = ""
    toy_emb_dim: int = 32
    hidden_size: int = 64
    window: int = 2
    # ablations and evaluation mode
    no_pretraining: bool = False
    no_entity_embeddings: bool = False
    single_ffnn: bool = False
    no_head_tail: bool = False
    no_bilinear: bool = False
    gold_re_mode: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = (
            "entity_emb_dim", "head_tail_dim", "grad_clip", "batch_size",
            "toy_emb_dim", "hidden_size",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"config field {name} must be positive")
        # zero is allowed so a frozen-parameter sanity run is expressible
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.ner_ffnn_layers != 1:
            raise ValueError("the NER head uses exactly one dense layer")
        if self.re_ffnn_layers != 2:
            raise ValueError("head/tail projections use exactly two layers")
        if self.precision not in (32, 64):
            raise ValueError("precision must be 32 or 64")
        if self.epochs < 0 or self.weight_decay < 0:
            raise ValueError("epochs and weight_decay must be >= 0")
        if self.encoder not in ("toy", "file"):
            raise ValueError("encoder must be 'toy' or 'file'")

    @property
    def dtype(self):
        import numpy as np

        return np.float64 if self.precision == 64 else np.float32

    def ablations(self):
        return {f: getattr(self, f) for f in ABLATION_FLAGS}

    def replace(self, **kwargs):
        d = self.to_dict()
        d.update(kwargs)
        return Config(**d)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        values = {}
        types = {f.name: f.type for f in fields(cls)}
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as e:
            raise ParseError(str(e), location=str(path)) from e
        for lineno, line in enumerate(lines, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", location=f"{path}:{lineno}")
            key, raw = (p.strip() for p in line.split("=", 1))
            if key not in types:
                raise ParseError(f"unknown config key {key!r}", location=f"{path}:{lineno}")
            values[key] = _parse_value(raw, types[key], f"{path}:{lineno}")
        try:
            return cls(**values)
        except ValueError as e:
            raise ParseError(str(e), location=str(path)) from e

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for f in fields(self):
                fh.write(f"{f.name} = {getattr(self, f.name)}\n")


def _parse_value(raw, typ, where):
    raw = raw.strip().strip('"').strip("'")
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return raw
    except ValueError as e:
        raise ParseError(str(e), location=where) from e
