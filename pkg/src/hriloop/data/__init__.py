from .interchange import (
    InteractionPair,
    convert_dataset,
    load_pairs,
    read_pair,
    register_converter,
    write_pair,
    write_pairs,
)
from .interhri import (
    BuildResult,
    HriSample,
    affordance_consistency,
    assert_split_disjoint,
    build_interhri,
    load_benchmark,
    make_negatives,
    save_benchmark,
)
from .synth import CATALOG, GestureTemplate, generate_pair, synth_interactions

__all__ = [
    "BuildResult",
    "CATALOG",
    "GestureTemplate",
    "HriSample",
    "InteractionPair",
    "affordance_consistency",
    "assert_split_disjoint",
    "build_interhri",
    "convert_dataset",
    "generate_pair",
    "load_benchmark",
    "load_pairs",
    "make_negatives",
    "read_pair",
    "register_converter",
    "save_benchmark",
    "synth_interactions",
    "write_pair",
    "write_pairs",
]
