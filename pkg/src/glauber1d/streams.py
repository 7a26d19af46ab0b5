"""Deterministic random-stream allocation.

Every stochastic routine in the package draws from a Philox counter-based
generator keyed by (master seed, domain, index).  Streams are independent by
construction, so work items can be farmed out to any number of workers and
recombined in index order with bit-identical results.  Domains keep the
coupling-field streams and the trajectory-chunk streams from colliding when
both are derived from the same master seed.
"""

from __future__ import annotations

import numpy as np

DOMAIN_COUPLINGS = 0
DOMAIN_KMC = 1

_INDEX_BITS = 48
_MAX_INDEX = 1 << _INDEX_BITS
_MAX_DOMAIN = 1 << 16


def stream(seed: int, index: int, domain: int = DOMAIN_COUPLINGS) -> np.random.Generator:
    """Return the Generator for substream `index` of `domain` under `seed`."""
    if not 0 <= index < _MAX_INDEX:
        raise ValueError(f"stream index {index} outside [0, 2^{_INDEX_BITS})")
    if not 0 <= domain < _MAX_DOMAIN:
        raise ValueError(f"stream domain {domain} outside [0, {_MAX_DOMAIN})")
    key = np.array([seed % (1 << 64), (domain << _INDEX_BITS) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
