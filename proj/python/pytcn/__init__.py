"""Python bindings for the tcn C++ core."""

from ._core import (
    ArgumentError,
    CapacityError,
    ConfigError,
    IoError,
    Model,
    ParseError,
    SchemaError,
    ShapeError,
    StateError,
    TcnError,
    TrainConfig,
    binomial,
    combine,
    enumerate_subsets,
    global_interaction,
    load_csv,
    synth_interaction,
    transform,
)

__all__ = [
    "ArgumentError",
    "CapacityError",
    "ConfigError",
    "IoError",
    "Model",
    "ParseError",
    "SchemaError",
    "ShapeError",
    "StateError",
    "TcnError",
    "TrainConfig",
    "binomial",
    "combine",
    "enumerate_subsets",
    "global_interaction",
    "load_csv",
    "synth_interaction",
    "transform",
]
