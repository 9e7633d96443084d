"""Unrolled cascade of convolutional denoising blocks with interleaved
data consistency, plus its losses, analytic gradients and Adam updates.

Complex images pass through each block as two real channels; every block
ends in a zero-initialised convolution and a residual skip, so a fresh
network is the identity. The DC step is linear (its Jacobian is
F^H P_unsampled F), which makes full reverse-mode differentiation through
the cascade straightforward. Everything is float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Optional

import numpy as np

from csmri import backend
from csmri.masks import SamplingMask

PARAMS_MAGIC = b"CSNN-V1\x00"


class TrainingDiverged(RuntimeError):
    """Raised on non-finite gradients or parameters; the trainer attaches
    epoch context and history."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class NetworkArch:
    """Shape of the unrolled network."""

    cascades: int = 7
    conv_layers: int = 5
    channels: int = 64
    kernel: int = 3
    residual: bool = True

    def __post_init__(self):
        if min(self.cascades, self.conv_layers, self.channels) < 1:
            raise ValueError("cascades, conv_layers and channels must be >= 1")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd, got {self.kernel}")


@dataclass
class NetworkParams:
    """Per-cascade convolution weights/biases; no sharing across cascades."""

    blocks: list  # [cascade][layer] -> (weight (Co,Ci,k,k), bias (Co,))
    residual: bool = True

    def tensors(self):
        """Yield tensors in (cascade asc, layer asc, weight-then-bias) order."""
        for layers in self.blocks:
            for w, b in layers:
                yield w
                yield b

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            [[(w.copy(), b.copy()) for w, b in layers] for layers in self.blocks],
            residual=self.residual)

    def count(self) -> int:
        return sum(t.size for t in self.tensors())


def init_params(arch: NetworkArch, seed: int) -> NetworkParams:
    """He fan-in initialisation; the last convolution of every block is
    zeroed so each block starts as the identity."""
    rng = np.random.default_rng(seed)
    k = arch.kernel
    blocks = []
    for _ in range(arch.cascades):
        layers = []
        for li in range(arch.conv_layers):
            c_in = 2 if li == 0 else arch.channels
            c_out = 2 if li == arch.conv_layers - 1 else arch.channels
            if li == arch.conv_layers - 1:
                w = np.zeros((c_out, c_in, k, k))
            else:
                std = np.sqrt(2.0 / (c_in * k * k))
                w = rng.normal(0.0, std, size=(c_out, c_in, k, k))
            layers.append((w, np.zeros(c_out)))
        blocks.append(layers)
    return NetworkParams(blocks, residual=arch.residual)


# -- centered orthonormal FFT, unvalidated (hot path) -----------------------

def _fft(x):
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(x), norm="ortho"))


def _ifft(x):
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(x), norm="ortho"))


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    return np.pad(x, ((0, 0), (p, p), (p, p)))


def _block_forward(x2, layers, residual):
    conv = backend.kernels().conv2d
    p = layers[0][0].shape[2] // 2
    inputs = []
    h = x2
    for li, (w, b) in enumerate(layers):
        inputs.append(h)
        h = conv(_pad(h, p), w) + b[:, None, None]
        if li < len(layers) - 1:
            h = np.maximum(h, 0.0)
    out = h + x2 if residual else h
    return out, inputs


def _block_backward(g_out, inputs, layers, residual):
    kern = backend.kernels()
    p = layers[0][0].shape[2] // 2
    grads = [None] * len(layers)
    g = g_out
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        x_in = inputs[li]
        gb = g.sum(axis=(1, 2))
        gw = kern.conv2d_wgrad(_pad(x_in, p), g)
        grads[li] = (gw, gb)
        w_t = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
        gx = kern.conv2d(_pad(g, p), w_t)
        if li > 0:
            g = gx * (x_in > 0)  # inputs[li] is the post-ReLU activation
        else:
            g = gx
    if residual:
        g = g + g_out
    return grads, g


def _forward(zf, y_sub, mask_sub, params):
    sampled = mask_sub.sampled
    y = np.where(sampled, y_sub, 0.0 + 0.0j)
    x = np.asarray(zf, dtype=np.complex128)
    caches = []
    for layers in params.blocks:
        x2 = np.stack([x.real, x.imag])
        out2, inputs = _block_forward(x2, layers, params.residual)
        xb = out2[0] + 1j * out2[1]
        x = _ifft(np.where(sampled, y, _fft(xb)))
        caches.append(inputs)
    return x, caches


def cascade_forward(zf: np.ndarray, y_sub: np.ndarray, mask_sub: SamplingMask,
                    params: NetworkParams) -> np.ndarray:
    """Run the unrolled network: per cascade a CNN block followed by data
    consistency against (y_sub, mask_sub). The output's k-space equals
    y_sub on the sampled set exactly."""
    zf = np.asarray(zf, dtype=np.complex128)
    if zf.shape != mask_sub.shape or np.shape(y_sub) != mask_sub.shape:
        raise ValueError(
            f"shape mismatch: zf {zf.shape}, y {np.shape(y_sub)}, "
            f"mask {mask_sub.shape}")
    return _forward(zf, y_sub, mask_sub, params)[0]


def _backward(g, caches, params, mask_sub):
    unsampled = ~mask_sub.sampled
    grads = [None] * len(params.blocks)
    for t in range(len(params.blocks) - 1, -1, -1):
        g = _ifft(np.where(unsampled, _fft(g), 0.0 + 0.0j))
        g2 = np.stack([g.real, g.imag])
        grads[t], g2 = _block_backward(g2, caches[t], params.blocks[t],
                                       params.residual)
        g = g2[0] + 1j * g2[1]
    return grads


def ss_loss(x_out: np.ndarray, y_loss: np.ndarray,
            loss_mask: SamplingMask) -> float:
    """Squared l2 k-space mismatch on the held-out subset."""
    r = np.where(loss_mask.sampled, np.asarray(y_loss) - _fft(np.asarray(x_out)), 0)
    return float(np.sum(np.abs(r) ** 2))


def combined_loss(x_out: np.ndarray, y_loss: np.ndarray,
                  loss_mask: SamplingMask, x_k: np.ndarray, q_k: np.ndarray,
                  mu: float) -> float:
    """0.5 * ss_loss + (mu/2) * || x_k - x_out - q_k ||^2."""
    val = 0.5 * ss_loss(x_out, y_loss, loss_mask)
    if mu != 0.0:
        val += 0.5 * mu * float(np.sum(np.abs(x_k - x_out - q_k) ** 2))
    return val


def loss_and_grads(params: NetworkParams, zf: np.ndarray, y_fit: np.ndarray,
                   fit_mask: SamplingMask, y_loss: np.ndarray,
                   loss_mask: SamplingMask,
                   x_k: Optional[np.ndarray] = None,
                   q_k: Optional[np.ndarray] = None, mu: float = 0.0):
    """Forward pass plus analytic gradients of the training loss
    0.5 * L_kdc + (mu/2) || x_k - x_out - q_k ||^2 w.r.t. every parameter.

    Returns (loss, l_kdc, l_cs, grads, x_out); grads mirror the params
    structure.
    """
    x_out, caches = _forward(zf, y_fit, fit_mask, params)
    r = np.where(loss_mask.sampled, np.asarray(y_loss) - _fft(x_out), 0)
    l_kdc = float(np.sum(np.abs(r) ** 2))
    g = -_ifft(r)
    l_cs = 0.0
    if mu != 0.0:
        e = x_k - x_out - q_k
        l_cs = 0.5 * mu * float(np.sum(np.abs(e) ** 2))
        g = g - mu * e
    grads = _backward(g, caches, params, fit_mask)
    return 0.5 * l_kdc + l_cs, l_kdc, l_cs, grads, x_out


@dataclass
class AdamState:
    step: int
    m: list
    v: list

    @classmethod
    def for_params(cls, params: NetworkParams) -> "AdamState":
        return cls(0, [np.zeros_like(t) for t in params.tensors()],
                   [np.zeros_like(t) for t in params.tensors()])


def adam_step(params: NetworkParams, state: AdamState, grads,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[NetworkParams, AdamState]:
    """One Adam update; raises TrainingDiverged on non-finite gradients."""
    flat = []
    for layers in grads:
        for gw, gb in layers:
            flat.append(gw)
            flat.append(gb)
    for g in flat:
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged("non-finite gradient")

    t = state.step + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new_m, new_v, new_t = [], [], []
    for p, m, v, g in zip(params.tensors(), state.m, state.v, flat):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        new_m.append(m)
        new_v.append(v)
        new_t.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps))

    blocks, it = [], iter(new_t)
    for layers in params.blocks:
        blocks.append([(next(it), next(it)) for _ in layers])
    return (NetworkParams(blocks, residual=params.residual),
            AdamState(t, new_m, new_v))


def train_step(params: NetworkParams, state: AdamState, zf, y_fit, fit_mask,
               y_loss, loss_mask, x_k=None, q_k=None, mu: float = 0.0,
               lr: float = 1e-3):
    """Gradient computation and Adam update in one call.

    Returns (params', state', loss, x_out).
    """
    loss, _, _, grads, x_out = loss_and_grads(
        params, zf, y_fit, fit_mask, y_loss, loss_mask, x_k, q_k, mu)
    params, state = adam_step(params, state, grads, lr=lr)
    return params, state, loss, x_out


# -- checkpoint format -------------------------------------------------------

def save_params(path, params: NetworkParams) -> None:
    """Write the checkpoint: magic, u32 cascade count, then per tensor
    u32 rank, u32 dims..., float32 payload (little-endian, row-major)."""
    with open(path, "wb") as f:
        f.write(PARAMS_MAGIC)
        f.write(struct.pack("<I", len(params.blocks)))
        for t in params.tensors():
            f.write(struct.pack("<I", t.ndim))
            f.write(struct.pack(f"<{t.ndim}I", *t.shape))
            f.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def _read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise ValueError(
            f"truncated checkpoint: wanted {n} bytes for {what} at offset "
            f"{f.tell() - len(data)}, got {len(data)}")
    return data


def load_params(path, residual: bool = True) -> NetworkParams:
    with open(path, "rb") as f:
        magic = f.read(len(PARAMS_MAGIC))
        if magic != PARAMS_MAGIC:
            raise ValueError(
                f"bad checkpoint magic {magic!r} at byte 0, expected {PARAMS_MAGIC!r}")
        (n_casc,) = struct.unpack("<I", _read_exact(f, 4, "cascade count"))
        tensors = []
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise ValueError(f"truncated tensor header at offset {f.tell() - len(head)}")
            (rank,) = struct.unpack("<I", head)
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "dims"))
            n = int(np.prod(dims)) if dims else 1
            payload = _read_exact(f, 4 * n, "tensor payload")
            tensors.append(np.frombuffer(payload, dtype="<f4").reshape(dims)
                           .astype(np.float64))
    if n_casc == 0 or len(tensors) % 2:
        raise ValueError("checkpoint tensor stream is not weight/bias pairs")
    pairs = [(tensors[i], tensors[i + 1]) for i in range(0, len(tensors), 2)]
    if len(pairs) % n_casc:
        raise ValueError(
            f"{len(pairs)} layers do not divide into {n_casc} cascades")
    per = len(pairs) // n_casc
    blocks = [pairs[c * per:(c + 1) * per] for c in range(n_casc)]
    return NetworkParams(blocks, residual=residual)
