"""Deterministic derivation of per-component seeds from one master seed.

Scheme: a child seed is the first 8 bytes (little-endian) of
SHA-256(repr((master, *labels))). Labels are short strings or ints naming
the consumer, e.g. ``child_seed(master, "stack", 2)``. The scheme is
platform-independent and stable across runs, so every stochastic component
of a pipeline can be re-derived from the single master seed recorded in the
output artifacts.
"""

import hashlib

import numpy as np


def child_seed(master_seed, *labels):
    """Derive a 64-bit child seed for the component named by ``labels``."""
    material = repr((int(master_seed),) + tuple(labels)).encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master_seed, *labels):
    """A numpy Generator seeded for the component named by ``labels``."""
    return np.random.default_rng(child_seed(master_seed, *labels))
