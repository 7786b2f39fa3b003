"""Python interface to the spiking frame-event tracking core.

The heavy lifting lives in the compiled extension `_spikefet`; this package
re-exports its operations under stable names.
"""

from ._spikefet import (  # noqa: F401
    PatchLayout,
    Rect,
    estimate_energy,
    events_to_frames,
    firing_rate,
    fuse_responses,
    hann_window,
    iou,
    plan_patchwork,
    sn_count,
    sn_forward,
    type_map,
    unroll_to_binary,
)

__all__ = [
    "PatchLayout",
    "Rect",
    "estimate_energy",
    "events_to_frames",
    "firing_rate",
    "fuse_responses",
    "hann_window",
    "iou",
    "plan_patchwork",
    "sn_count",
    "sn_forward",
    "type_map",
    "unroll_to_binary",
]
