"""Deterministic random-stream management.

Every random draw in the library flows from a single 64-bit seed. Substreams
are derived by hashing string labels into a SeedSequence spawn path, so
independent consumers (samplers, network init, evaluation sets, per-epoch
resampling) get decorrelated counter-based Philox streams that do not depend
on call order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_key(label: str | int) -> int:
    if isinstance(label, int):
        return label
    return zlib.crc32(label.encode("utf-8"))


def substream(seed: int, *labels: str | int) -> np.random.Generator:
    """Independent generator for ``(seed, labels...)``.

    The same (seed, labels) always yields the same stream; distinct label
    paths yield statistically independent streams.
    """
    path = tuple(_label_key(lab) for lab in labels)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=path)
    return np.random.Generator(np.random.Philox(ss))
