"""Derivation of independent random streams from a single master seed.

Every stochastic component asks for a stream keyed by its name and
indices. Keys are hashed together with the master seed, so the stream a
component receives does not depend on how many other streams were drawn
before it or on which worker process runs it.
"""

import hashlib

import numpy as np


def derive_seed(master, *keys):
    """Return a 63-bit integer seed for ``(master, *keys)``.

    Keys may be any objects with a stable ``str``.
    """
    h = hashlib.sha256(str(int(master)).encode())
    for key in keys:
        h.update(b"\x1f")
        h.update(str(key).encode())
    return int.from_bytes(h.digest()[:8], "little") >> 1


def derive_rng(master, *keys):
    return np.random.default_rng(derive_seed(master, *keys))
