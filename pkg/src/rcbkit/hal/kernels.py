"""
Compute kernels of the simulated tiles.

The registry is shared by the simulator (to execute a launched kernel) and by
the compiler (to check shapes and lay out tile-local buffers), so both sides
agree on port order, dtypes and local-memory offsets.

Classes
-------
KernelId: Numeric IDs written to the KERNEL_ID register.
KernelSpec: Ports, dtypes, shape rule and reference computation of a kernel.

Functions
---------
get_kernel: Look a kernel up by ID or name.
kernel_layout: Tile-local offsets of every port for given parameters.
"""

from collections.abc import Callable
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy import signal

LOCAL_ALIGN = 64

DTYPES = {"u8": np.uint8, "i8": np.int8, "i32": np.int32, "f32": np.float32}
# "*" marks a byte-transparent port
ANY_DTYPE = "*"


class KernelId(IntEnum):
    PASSTHROUGH = 1
    MATMUL_I8 = 2
    CONV2D_F32 = 3
    RELU_F32 = 4
    SOFTMAX_F32 = 5


def _align(n: int, a: int = LOCAL_ALIGN) -> int:
    return (n + a - 1) // a * a


def _passthrough_shapes(p):
    (n,) = p
    return {"in": (n,), "out": (n,)}


def _matmul_shapes(p):
    m, k, n = p
    return {"a": (m, k), "b": (k, n), "c": (m, n)}


def _conv_shapes(p):
    h, w, kh, kw = p
    if kh > h or kw > w:
        raise ValueError(f"kernel {kh}x{kw} larger than input {h}x{w}")
    return {"x": (h, w), "k": (kh, kw), "y": (h - kh + 1, w - kw + 1)}


def _vector_shapes(p):
    (n,) = p
    return {"x": (n,), "y": (n,)}


def _passthrough(a):
    return a.copy()


def _matmul(a, b):
    return np.matmul(a.astype(np.int32), b.astype(np.int32))


def _conv(x, k):
    out = signal.correlate2d(x.astype(np.float64), k.astype(np.float64), mode="valid")
    return out.astype(np.float32)


def _relu(x):
    return np.maximum(x, np.float32(0))


def _softmax(x):
    z = x.astype(np.float64)
    e = np.exp(z - z.max())
    return (e / e.sum()).astype(np.float32)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel the tiles can run.

    Parameters
    ----------
    kernel_id : KernelId
        Value programmed into KERNEL_ID.
    inputs : tuple[str, ...]
        Input port names in local-memory order.
    output : str
        Output port name.
    dtypes : dict[str, str]
        Element type per port, ``"*"`` for byte-transparent ports.
    nparams : int
        Number of PARAM registers consumed.
    work : int
        Ticks per output element relative to the device rate; 0 means no arithmetic.
    shape_fn : callable
        Maps the PARAM values to a ``{port: shape}`` dict.
    compute : callable
        Reference computation over numpy arrays in input port order.
    """

    kernel_id: KernelId
    inputs: tuple
    output: str
    dtypes: dict
    nparams: int
    work: int
    shape_fn: Callable
    compute: Callable

    @property
    def name(self) -> str:
        return self.kernel_id.name

    @property
    def ports(self) -> tuple:
        return (*self.inputs, self.output)

    def __repr__(self) -> str:
        return f"KernelSpec({self.name}, inputs={list(self.inputs)}, output={self.output})"

    def storage_dtype(self, port: str):
        dtype = self.dtypes[port]
        return np.uint8 if dtype == ANY_DTYPE else DTYPES[dtype]

    def shapes(self, params) -> dict:
        """Element shape of every port.

        Raises
        ------
        ValueError
            If the parameter count is wrong or a shape is empty or inconsistent.
        """
        params = [int(v) for v in params]
        if len(params) != self.nparams:
            raise ValueError(f"{self.name} takes {self.nparams} params, got {len(params)}")
        if any(v <= 0 for v in params):
            raise ValueError(f"{self.name} params must be positive: {params}")
        return self.shape_fn(params)

    def nbytes(self, params) -> dict:
        return {
            port: int(np.prod(shape)) * np.dtype(self.storage_dtype(port)).itemsize
            for port, shape in self.shapes(params).items()
        }

    def run(self, params, inputs: dict) -> bytes:
        """Execute the kernel on raw port bytes and return the output bytes."""
        shapes = self.shapes(params)
        arrays = [
            np.frombuffer(inputs[port], dtype=self.storage_dtype(port)).reshape(shapes[port])
            for port in self.inputs
        ]
        out = self.compute(*arrays)
        return np.ascontiguousarray(out, dtype=self.storage_dtype(self.output)).tobytes()


KERNELS = {
    spec.kernel_id: spec
    for spec in (
        KernelSpec(
            KernelId.PASSTHROUGH, ("in",), "out", {"in": ANY_DTYPE, "out": ANY_DTYPE},
            1, 0, _passthrough_shapes, _passthrough,
        ),
        KernelSpec(
            KernelId.MATMUL_I8, ("a", "b"), "c", {"a": "i8", "b": "i8", "c": "i32"},
            3, 1, _matmul_shapes, _matmul,
        ),
        KernelSpec(
            KernelId.CONV2D_F32, ("x", "k"), "y", {"x": "f32", "k": "f32", "y": "f32"},
            4, 1, _conv_shapes, _conv,
        ),
        KernelSpec(
            KernelId.RELU_F32, ("x",), "y", {"x": "f32", "y": "f32"},
            1, 1, _vector_shapes, _relu,
        ),
        KernelSpec(
            KernelId.SOFTMAX_F32, ("x",), "y", {"x": "f32", "y": "f32"},
            1, 1, _vector_shapes, _softmax,
        ),
    )
}


def get_kernel(key) -> KernelSpec:
    """Return the kernel registered under an ID (int) or a name (str).

    Raises
    ------
    KeyError
        If no kernel matches.
    """
    if isinstance(key, str):
        try:
            return KERNELS[KernelId[key.upper()]]
        except KeyError:
            raise KeyError(f"unknown kernel {key!r}") from None
    try:
        return KERNELS[KernelId(key)]
    except ValueError:
        raise KeyError(f"unknown kernel id {key}") from None


def kernel_layout(spec: KernelSpec, params) -> dict:
    """
    Tile-local placement of every port: inputs in port order, then the output,
    each starting on a ``LOCAL_ALIGN`` boundary.

    Returns
    -------
    dict[str, tuple[int, int]]
        ``{port: (offset, nbytes)}``; offsets are relative to local memory start.
    """
    sizes = spec.nbytes(params)
    layout = {}
    offset = 0
    for port in spec.ports:
        layout[port] = (offset, sizes[port])
        offset = _align(offset + sizes[port])
    return layout


def layout_end(layout: dict) -> int:
    return max((off + size for off, size in layout.values()), default=0)
