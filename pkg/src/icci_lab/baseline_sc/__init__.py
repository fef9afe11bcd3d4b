"""Straightforward-combination baseline: transform codec, FEC, modulation,
equalization and classical reconstruction, chained into one pipeline."""

from .bits import BitStream, load_bitstream, save_bitstream
from .codec import CodecConfig, CodecError, codec_decode, codec_encode
from .fec import FecConfig, fec_decode, fec_encode
from .modulation import ModConfig, demodulate, dump_constellations, modulate
from .equalize import CdanConfig, cdan_equalize, ffe_equalize
from .gaptv import adjoint_baseline, gaptv_reconstruct
from .pipeline import ScStages, calibrate_quality, sc_pipeline

__all__ = [
    "BitStream", "load_bitstream", "save_bitstream",
    "CodecConfig", "CodecError", "codec_decode", "codec_encode",
    "FecConfig", "fec_decode", "fec_encode",
    "ModConfig", "demodulate", "dump_constellations", "modulate",
    "CdanConfig", "cdan_equalize", "ffe_equalize",
    "adjoint_baseline", "gaptv_reconstruct",
    "ScStages", "calibrate_quality", "sc_pipeline",
]
