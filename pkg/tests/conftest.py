import gzip
import struct
import sys

import numpy as np
import pytest

from advtransport.numerics import SpdMatrix


def random_spd(rng, d, lo=0.5, hi=2.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return SpdMatrix(q @ np.diag(rng.uniform(lo, hi, d)) @ q.T)


def idx_bytes(magic, dims, payload):
    return struct.pack(">I", magic) + struct.pack(f">{len(dims)}I", *dims) + bytes(payload)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def idx_pair(tmp_path):
    """Two 2x3 images with labels 3 and 7; the image file is gzipped."""
    pixels = [0, 51, 102, 153, 204, 255, 255, 0, 10, 20, 30, 40]
    img = tmp_path / "img.idx.gz"
    img.write_bytes(gzip.compress(idx_bytes(0x803, [2, 2, 3], pixels)))
    lab = tmp_path / "lab.idx"
    lab.write_bytes(idx_bytes(0x801, [2], [3, 7]))
    return img, lab, np.array(pixels, dtype=float).reshape(2, 6) / 255.0


@pytest.fixture
def two_point_csv(tmp_path):
    """Two points per class on a line: cross-class distances 1, 2, 3, 4."""
    path = tmp_path / "pts.csv"
    path.write_text("label,x,y\n1,0.0,0.0\n1,1.0,0.0\n-1,2.0,0.0\n-1,4.0,0.0\n")
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
