"""Synthetic raw 31-IMU recordings for ingestion tests."""

import numpy as np

N_IMUS = 31


def fake_samples(T, rng, level=0.0):
    x = rng.normal(level, 1.0, size=(T, N_IMUS, 10))
    q = rng.normal(size=(T, N_IMUS, 4))
    x[:, :, 6:10] = q / np.linalg.norm(q, axis=2, keepdims=True)
    return x.reshape(T, N_IMUS * 10)


def write_recording(path, samples, header=None):
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        np.savetxt(fh, samples, delimiter=",", fmt="%.6f")
