"""Writers for the EMBD/LBLS/PRED binary formats.

All formats are little-endian:

- EMBD: ``b"EMBD" | version u32=1 | n u64 | D u64 | dtype u8=0 | n*D f32``
- LBLS: ``b"LBLS" | version u32=1 | n u64 | n i32``
- PRED: ``b"PRED" | version u32=1 | n u64 | Z u64 | n*Z f32``

This is an independent implementation of the wire format; the reader
lives in the transfermetrics package and the round-trip between the two
is covered by this package's tests.
"""

import struct

import numpy as np

_VERSION = 1
_DTYPE_F32 = 0


def write_embeddings(path, features):
    """Write an n x D float32 matrix as an EMBD file."""
    feats = np.ascontiguousarray(features, dtype="<f4")
    if feats.ndim != 2:
        raise ValueError("features must be a 2-D array")
    n, dim = feats.shape
    with open(path, "wb") as fh:
        fh.write(b"EMBD")
        fh.write(struct.pack("<IQQB", _VERSION, n, dim, _DTYPE_F32))
        fh.write(feats.tobytes())


def write_labels(path, labels):
    """Write a length-n int32 label vector as an LBLS file."""
    labs = np.ascontiguousarray(labels, dtype="<i4")
    if labs.ndim != 1:
        raise ValueError("labels must be a 1-D array")
    with open(path, "wb") as fh:
        fh.write(b"LBLS")
        fh.write(struct.pack("<IQ", _VERSION, labs.shape[0]))
        fh.write(labs.tobytes())


def write_predictions(path, probabilities):
    """Write an n x Z float32 probability matrix as a PRED file.

    Rows must sum to 1 within 1e-5; this is validated before writing so
    a bad softmax is caught at the producer, not at the consumer.
    """
    probs = np.ascontiguousarray(probabilities, dtype="<f4")
    if probs.ndim != 2:
        raise ValueError("probabilities must be a 2-D array")
    sums = probs.sum(axis=1, dtype=np.float64)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-5)
    if bad.size:
        raise ValueError(
            "probability row %d sums to %.8f, expected 1" % (bad[0], sums[bad[0]])
        )
    n, z = probs.shape
    with open(path, "wb") as fh:
        fh.write(b"PRED")
        fh.write(struct.pack("<IQQ", _VERSION, n, z))
        fh.write(probs.tobytes())
