"""Edge-map semantic image transmission with retrieval-augmented reconstruction."""

from ._core import (
    KnowledgeBase,
    RagscError,
    apply_bsc,
    canny,
    compress_text,
    crc32,
    decode_edges,
    decompress_text,
    encode_edges,
    measured_ber,
    ms_ssim,
    parse_config,
    read_image,
    run_experiment,
    to_grayscale,
    write_image,
)

__all__ = [
    "KnowledgeBase",
    "RagscError",
    "apply_bsc",
    "canny",
    "compress_text",
    "crc32",
    "decode_edges",
    "decompress_text",
    "encode_edges",
    "measured_ber",
    "ms_ssim",
    "parse_config",
    "read_image",
    "run_experiment",
    "to_grayscale",
    "write_image",
]
