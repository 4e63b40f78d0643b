import numpy as np
import pytest

from volsr import ScalarVolume, TransferFunction


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_volume(rng, dims=(6, 5, 4), spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    data = rng.random(dims).astype(np.float32)
    return ScalarVolume(dims, spacing, origin, data)


def random_tf(rng, n_nodes=4, max_alpha=1.0):
    xs = np.sort(rng.random(n_nodes - 2)) if n_nodes > 2 else []
    xs = [0.0] + [float(x) for x in xs] + [1.0]
    # keep intensities strictly increasing
    for i in range(1, len(xs)):
        if xs[i] <= xs[i - 1]:
            xs[i] = xs[i - 1] + 1e-3
    xs[-1] = 1.0
    entries = []
    for x in xs:
        rgba = rng.random(4)
        rgba[3] *= max_alpha
        entries.append((x, tuple(rgba.tolist())))
    return TransferFunction(tuple(entries))


def constant_packet(w, h, rgb=(0.5, 0.5, 0.5), coverage=1.0):
    from volsr.render import FramePacket
    return FramePacket(
        color=np.full((h, w, 3), 0.0, np.float32) + np.asarray(rgb, np.float32),
        quasi_depth=np.full((h, w, 1), 0.5, np.float32),
        max_alpha_rgba=np.zeros((h, w, 4), np.float32),
        max_alpha_worldpos=np.zeros((h, w, 3), np.float32),
        coverage=np.full((h, w, 1), coverage, np.float32),
    )
