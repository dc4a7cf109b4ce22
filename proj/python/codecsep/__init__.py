"""Codec-space speech separation toolkit.

Thin python surface over the C++ core: synthetic mixture datasets, SI-SDR /
codec SI-SDR metrics, the toy neural audio codec, the embedding-space
separator, and the MAC profiler.
"""

from codecsep._core import (  # noqa: F401
    Codec,
    Separator,
    SynthSpec,
    checkpoint_info,
    codec_si_sdr,
    macs_attention,
    macs_conv1d,
    macs_conv1d_transposed,
    macs_linear,
    mix,
    profile,
    profile_separator_at,
    read_wav,
    sdr,
    si_sdr,
    synth_dataset,
    synth_example,
    synth_source,
    train_codec,
    train_separator,
    write_wav,
)

__all__ = [
    "Codec",
    "Separator",
    "SynthSpec",
    "checkpoint_info",
    "codec_si_sdr",
    "macs_attention",
    "macs_conv1d",
    "macs_conv1d_transposed",
    "macs_linear",
    "mix",
    "profile",
    "profile_separator_at",
    "read_wav",
    "sdr",
    "si_sdr",
    "synth_dataset",
    "synth_example",
    "synth_source",
    "train_codec",
    "train_separator",
    "write_wav",
]
