import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from rcbkit.config.schema import DeviceConfig

DATA_DIR = Path(__file__).parent / "data"

# 2x2 correlation kernel of the reference CNN, weight file 1
CNN_KERNEL = np.array([[0.5, -1.0], [0.25, 1.0]], dtype=np.float32)


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def device_config():
    return DeviceConfig()


@pytest.fixture
def stale_config():
    return DeviceConfig(cache_model="stale_until_flush")


@pytest.fixture
def small_config():
    """A 2x2 grid with 1 MiB of global memory."""
    return DeviceConfig(cols=2, rows=2, global_mem_size=1024 * 1024)


@pytest.fixture
def xgemm_path():
    return DATA_DIR / "xgemm64.json"


@pytest.fixture
def cnn_doc():
    return json.loads((DATA_DIR / "cnn.json").read_text())


@pytest.fixture
def cnn_path(tmp_path):
    """The CNN graph copied next to a ``weights/`` directory holding its kernel."""
    shutil.copy(DATA_DIR / "cnn.json", tmp_path / "cnn.json")
    weights = tmp_path / "weights"
    weights.mkdir()
    (weights / "1.bin").write_bytes(CNN_KERNEL.tobytes())
    return tmp_path / "cnn.json"


def matmul_oracle(a, b):
    """Row-by-column int8 x int8 -> int32 matrix product in 64-bit integers."""
    m = a.shape[0]
    n = b.shape[1]
    wide_a = a.astype(np.int64)
    wide_b = b.astype(np.int64)
    c = np.zeros((m, n), dtype=np.int64)
    for i in range(m):
        for j in range(n):
            c[i, j] = int((wide_a[i] * wide_b[:, j]).sum())
    return c.astype(np.int32)


def cnn_oracle(image, kernel):
    """Scalar valid correlation, ReLU and softmax."""
    h, w = image.shape
    kh, kw = kernel.shape
    conv = []
    for i in range(h - kh + 1):
        for j in range(w - kw + 1):
            acc = 0.0
            for u in range(kh):
                for v in range(kw):
                    acc += float(image[i + u, j + v]) * float(kernel[u, v])
            conv.append(acc)
    relu = [max(v, 0.0) for v in conv]
    top = max(relu)
    exps = [np.exp(v - top) for v in relu]
    total = sum(exps)
    return np.array([e / total for e in exps])


@pytest.fixture
def matmul_ref():
    return matmul_oracle


@pytest.fixture
def cnn_ref():
    return cnn_oracle


@pytest.fixture
def cnn_kernel():
    return CNN_KERNEL
