"""The dual-satellite transformer: tokenizers, fusion encoder, broadcast
decoders, and the classification head.

Each satellite stream is tokenized and encoded on its own (pre-fusion),
then the token sequences are concatenated and encoded jointly
(post-fusion). Invalid tokens are excluded from attention and pooling, so
padding can never influence the embedding. Decoders broadcast the pooled
embedding back over every time step and decode steps independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ..crops import NUM_CLASSES
from ..errors import ConfigError, EmptyInput
from ..rsd import PAD_LENGTH
from ..satellites import DEFAULT_SATELLITES, SatelliteSpec
from . import autodiff as ad
from .autodiff import Tensor
from .layers import MLP, EncoderBlock, Linear, ResidualFF

TOKEN_STEPS_DOMAIN = (4, 8)


@dataclass
class ModelConfig:
    token_dim: int = 64
    steps_per_token: int = 8
    pre_fusion_layers: int = 2
    post_fusion_layers: int = 2
    decoder_layers: dict[str, int] = dc_field(default_factory=lambda: {"S2": 2, "S1": 2})
    attention_heads: int = 4
    attention_size: int = 32
    classifier_depth: int = 2
    classifier_width: int = 64
    classifier_dropout: float = 0.1
    mask_prob: dict[str, float] = dc_field(default_factory=lambda: {"S2": 0.75, "S1": 0.75})
    focal_gamma: float = 2.0
    learning_rate: float = 0.0002
    seed: int = 0
    pad_length: int = PAD_LENGTH
    num_classes: int = NUM_CLASSES
    satellites: tuple[SatelliteSpec, ...] = DEFAULT_SATELLITES

    def __post_init__(self):
        if self.steps_per_token not in TOKEN_STEPS_DOMAIN:
            raise ConfigError(
                f"steps_per_token={self.steps_per_token} out of domain {TOKEN_STEPS_DOMAIN}"
            )
        if self.pad_length % self.steps_per_token != 0:
            raise ConfigError(
                f"pad_length {self.pad_length} not divisible by steps_per_token {self.steps_per_token}"
            )
        for sat, p in self.mask_prob.items():
            if not (0.0 <= p < 1.0):
                raise ConfigError(f"mask_prob[{sat}]={p} must be in [0, 1)")
        if self.focal_gamma < 0:
            raise ConfigError(f"focal_gamma={self.focal_gamma} must be >= 0")
        if not (0.0 <= self.classifier_dropout < 1.0):
            raise ConfigError(f"classifier_dropout={self.classifier_dropout} must be in [0, 1)")
        for name, v in (
            ("token_dim", self.token_dim),
            ("pre_fusion_layers", self.pre_fusion_layers),
            ("post_fusion_layers", self.post_fusion_layers),
            ("attention_heads", self.attention_heads),
            ("attention_size", self.attention_size),
            ("classifier_depth", self.classifier_depth),
            ("classifier_width", self.classifier_width),
        ):
            if v < 1:
                raise ConfigError(f"{name}={v} must be >= 1")

    @property
    def tokens_per_satellite(self) -> int:
        return self.pad_length // self.steps_per_token

    def to_json(self) -> dict:
        return {
            "token_dim": self.token_dim,
            "steps_per_token": self.steps_per_token,
            "pre_fusion_layers": self.pre_fusion_layers,
            "post_fusion_layers": self.post_fusion_layers,
            "decoder_layers": dict(self.decoder_layers),
            "attention_heads": self.attention_heads,
            "attention_size": self.attention_size,
            "classifier_depth": self.classifier_depth,
            "classifier_width": self.classifier_width,
            "classifier_dropout": self.classifier_dropout,
            "mask_prob": dict(self.mask_prob),
            "focal_gamma": self.focal_gamma,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "pad_length": self.pad_length,
            "num_classes": self.num_classes,
            "satellites": [[s.name, list(s.bands), s.has_cloud_score] for s in self.satellites],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        obj = dict(obj)
        obj["satellites"] = tuple(
            SatelliteSpec(name=n, bands=tuple(b), has_cloud_score=c) for n, b, c in obj["satellites"]
        )
        obj["decoder_layers"] = dict(obj["decoder_layers"])
        obj["mask_prob"] = dict(obj["mask_prob"])
        return cls(**obj)


@dataclass
class TokenSequence:
    """Per-satellite token batch with validity and MAE mask flags."""

    tokens: Tensor  # (B, S, token_dim)
    valid: np.ndarray  # (B, S) bool: any constituent step is real
    masked: np.ndarray  # (B, S) bool: token hidden from the encoder (MAE)


# Batch: satellite -> (values (B, L, bands), mask (B, L) bool)
Batch = dict[str, tuple[np.ndarray, np.ndarray]]


class CropModel:
    """Encoder, per-satellite decoders, and classifier over padded batches."""

    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        d = config.token_dim
        s_tokens = config.tokens_per_satellite

        self.tokenizers: dict[str, Linear] = {}
        self.mask_vectors: dict[str, Tensor] = {}
        self.pre_pos: dict[str, Tensor] = {}
        self.post_pos: dict[str, Tensor] = {}
        self.pre_blocks: dict[str, list[EncoderBlock]] = {}
        self.dec_pos: dict[str, Tensor] = {}
        self.dec_blocks: dict[str, list[ResidualFF]] = {}
        self.dec_out: dict[str, Linear] = {}

        for spec in config.satellites:
            sat = spec.name
            self.tokenizers[sat] = Linear(
                rng, config.steps_per_token * spec.band_count, d, f"tokenizer.{sat}"
            )
            self.mask_vectors[sat] = Tensor(rng.normal(0, 0.02, (d,)), requires_grad=True)
            self.pre_pos[sat] = Tensor(rng.normal(0, 0.02, (s_tokens, d)), requires_grad=True)
            self.post_pos[sat] = Tensor(rng.normal(0, 0.02, (s_tokens, d)), requires_grad=True)
            self.pre_blocks[sat] = [
                EncoderBlock(rng, d, config.attention_heads, config.attention_size, f"pre.{sat}.{i}")
                for i in range(config.pre_fusion_layers)
            ]
            n_dec = config.decoder_layers.get(sat, 2)
            self.dec_pos[sat] = Tensor(
                rng.normal(0, 0.02, (config.pad_length, d)), requires_grad=True
            )
            self.dec_blocks[sat] = [
                ResidualFF(rng, d, f"dec.{sat}.{i}") for i in range(n_dec)
            ]
            self.dec_out[sat] = Linear(rng, d, spec.band_count, f"dec.{sat}.out")

        self.post_blocks = [
            EncoderBlock(rng, d, config.attention_heads, config.attention_size, f"post.{i}")
            for i in range(config.post_fusion_layers)
        ]
        self.classifier = MLP(
            rng,
            d,
            config.classifier_width,
            config.classifier_depth,
            config.num_classes,
            config.classifier_dropout,
            "classifier",
        )

    # -- parameters --------------------------------------------------------
    def params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for spec in self.config.satellites:
            sat = spec.name
            out.update(self.tokenizers[sat].params())
            out[f"mask_vector.{sat}"] = self.mask_vectors[sat]
            out[f"pre_pos.{sat}"] = self.pre_pos[sat]
            out[f"post_pos.{sat}"] = self.post_pos[sat]
            for block in self.pre_blocks[sat]:
                out.update(block.params())
            out[f"dec_pos.{sat}"] = self.dec_pos[sat]
            for block in self.dec_blocks[sat]:
                out.update(block.params())
            out.update(self.dec_out[sat].params())
        for block in self.post_blocks:
            out.update(block.params())
        out.update(self.classifier.params())
        return out

    def encoder_params(self) -> dict[str, Tensor]:
        """Parameters trained during pre-training (everything but the classifier)."""
        clf = set(self.classifier.params().keys())
        return {k: v for k, v in self.params().items() if k not in clf}

    def load_params(self, blobs: dict[str, np.ndarray], subset: bool = False) -> None:
        params = self.params()
        names = blobs.keys() if subset else params.keys()
        for name in names:
            if name not in params:
                raise ConfigError(f"checkpoint parameter {name!r} not in model")
            if not subset and name not in blobs:
                raise ConfigError(f"model parameter {name!r} missing from checkpoint")
            if params[name].data.shape != blobs[name].shape:
                raise ConfigError(
                    f"shape mismatch for {name!r}: {params[name].data.shape} vs {blobs[name].shape}"
                )
            params[name].data = blobs[name].astype(ad.get_default_dtype()).copy()

    # -- forward pieces ------------------------------------------------------
    def tokenize(self, values: np.ndarray, mask: np.ndarray, sat: str) -> TokenSequence:
        """Group steps_per_token steps across bands and project to token_dim.

        Padded steps are zeroed before projection (masked-out values can
        never leak), and a token is valid iff any of its steps is real.
        """
        cfg = self.config
        b, length, bands = values.shape
        if length != cfg.pad_length:
            raise ConfigError(f"series length {length} != configured pad length {cfg.pad_length}")
        spt = cfg.steps_per_token
        clean = values * mask[:, :, None]
        grouped = clean.reshape(b, length // spt, spt * bands)
        valid = mask.reshape(b, length // spt, spt).any(axis=2)
        tokens = self.tokenizers[sat](Tensor(grouped))
        return TokenSequence(tokens=tokens, valid=valid, masked=np.zeros_like(valid))

    def mae_mask(self, seq: TokenSequence, prob: float, rng: np.random.Generator) -> TokenSequence:
        """Flag each valid token masked independently with the given probability."""
        draw = rng.random(seq.valid.shape) < prob
        return TokenSequence(tokens=seq.tokens, valid=seq.valid, masked=draw & seq.valid)

    def encode(self, seqs: dict[str, TokenSequence]) -> Tensor:
        """Fuse per-satellite token sequences into one pooled embedding."""
        streams = []
        valids = []
        for spec in self.config.satellites:
            sat = spec.name
            seq = seqs[sat]
            x = seq.tokens
            if seq.masked.any():
                m = seq.masked[:, :, None].astype(np.float64)
                x = ad.add(ad.mul(x, 1.0 - m), ad.mul(self.mask_vectors[sat], m))
            x = ad.add(x, self.pre_pos[sat])
            for block in self.pre_blocks[sat]:
                x = block(x, seq.valid)
            x = ad.add(x, self.post_pos[sat])
            streams.append(x)
            valids.append(seq.valid)
        fused = ad.concat(streams, axis=1)
        valid_all = np.concatenate(valids, axis=1)
        counts = valid_all.sum(axis=1)
        if (counts == 0).any():
            raise EmptyInput("an example has zero valid tokens across all satellites")
        for block in self.post_blocks:
            fused = block(fused, valid_all)
        pooled = ad.tsum(ad.mul(fused, valid_all[:, :, None].astype(np.float64)), axis=1)
        return ad.mul(pooled, (1.0 / counts)[:, None])

    def decode(self, embedding: Tensor) -> dict[str, Tensor]:
        """Broadcast the embedding over all steps and decode each independently."""
        out: dict[str, Tensor] = {}
        b = embedding.data.shape[0]
        for spec in self.config.satellites:
            sat = spec.name
            x = ad.reshape(embedding, (b, 1, self.config.token_dim))
            x = ad.add(x, self.dec_pos[sat])  # broadcast to (B, L, D)
            for block in self.dec_blocks[sat]:
                x = block(x)
            out[sat] = self.dec_out[sat](x)
        return out

    def classify(
        self, embedding: Tensor, rng: np.random.Generator | None = None, training: bool = False
    ) -> Tensor:
        """Class probabilities over the crop vocabulary."""
        logits = self.classifier(embedding, rng=rng, training=training)
        return ad.softmax(logits, axis=-1)

    # -- convenience -----------------------------------------------------------
    def tokenize_batch(self, batch: Batch) -> dict[str, TokenSequence]:
        return {
            spec.name: self.tokenize(batch[spec.name][0], batch[spec.name][1], spec.name)
            for spec in self.config.satellites
        }

    def embed(self, batch: Batch) -> Tensor:
        return self.encode(self.tokenize_batch(batch))

    def predict_probs(self, batch: Batch) -> np.ndarray:
        return self.classify(self.embed(batch)).data
