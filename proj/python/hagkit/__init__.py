"""Hyperparameter-aware generation toolkit: decoding transforms, config-space
utilities, task scorers, text metrics, and the toy generation backend."""

from ._core import (
    HagError,
    HyperparamConfig,
    ToyModel,
    apply_repetition_penalty,
    apply_temperature,
    apply_top_k,
    apply_top_p,
    bleu,
    default_config,
    default_space_size,
    enumerate_default_space,
    parse_config_text,
    pig_latin_translate,
    random_config,
    render_config_text,
    sample_token,
    score_response,
    self_bleu,
    softmax,
    toy_generate,
    toy_train,
    transform_pipeline,
)

__all__ = [
    "HagError",
    "HyperparamConfig",
    "ToyModel",
    "apply_repetition_penalty",
    "apply_temperature",
    "apply_top_k",
    "apply_top_p",
    "bleu",
    "default_config",
    "default_space_size",
    "enumerate_default_space",
    "parse_config_text",
    "pig_latin_translate",
    "random_config",
    "render_config_text",
    "sample_token",
    "score_response",
    "self_bleu",
    "softmax",
    "toy_generate",
    "toy_train",
    "transform_pipeline",
]
