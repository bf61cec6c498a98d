"""Neural ODE right-hand side.

A small dense network maps the flattened expansion parameters, the time, and
optional per-problem constants to the time derivative of every parameter:

    input  = [coeffs, centers, raw scales, t, extra...]   width N(2d+m)+1+p
    output = [d/dt of coeffs, centers, raw scales]        width N(2d+m)

Hidden layers use the exact erf-based GELU; the skip-augmented variant adds a
learnable linear bypass ``S_k y`` to each hidden layer's activation output
(rectangular where the width changes, square elsewhere).  Forward, reverse
(gradients of <output, cotangent> w.r.t. every weight and the input) and
forward-tangent products are all hand-rolled and exact.

The network sees the raw (unconstrained) scale variables, matching the ODE
state it drives.  It is not permutation-equivariant in the basis index:
dense layers treat the flattened parameter vector as a fixed-order feature
vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .rbf import RbfState

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x):
    """x * Phi(x) with Phi the standard normal CDF (exact erf form)."""
    x = np.asarray(x, dtype=float)
    return x * 0.5 * (1.0 + erf(x / _SQRT2))


def gelu_deriv(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


@dataclass
class Mlp:
    """Dense network; ``widths = [in, hidden..., out]``.

    ``params`` is the canonical flat list: per hidden layer W (out, in),
    b (out,), and S (out, in) when ``resnet``; then the output layer W, b.
    """

    widths: list[int]
    resnet: bool
    params: list[np.ndarray]

    @classmethod
    def initialize(cls, widths, resnet: bool, sigma: float, rng: np.random.Generator) -> "Mlp":
        """Every weight and bias i.i.d. normal with standard deviation sigma."""
        widths = [int(w) for w in widths]
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError(f"bad layer widths {widths}")
        params: list[np.ndarray] = []
        for k in range(len(widths) - 2):
            n_in, n_out = widths[k], widths[k + 1]
            params.append(sigma * rng.standard_normal((n_out, n_in)))
            params.append(sigma * rng.standard_normal(n_out))
            if resnet:
                params.append(sigma * rng.standard_normal((n_out, n_in)))
        params.append(sigma * rng.standard_normal((widths[-1], widths[-2])))
        params.append(sigma * rng.standard_normal(widths[-1]))
        return cls(widths, bool(resnet), params)

    # -- structure helpers -------------------------------------------------

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]

    @property
    def n_hidden(self) -> int:
        return len(self.widths) - 2

    def _hidden(self, k: int):
        step = 3 if self.resnet else 2
        base = step * k
        w = self.params[base]
        b = self.params[base + 1]
        s = self.params[base + 2] if self.resnet else None
        return w, b, s

    def _output(self):
        return self.params[-2], self.params[-1]

    def zero_grads(self) -> list[np.ndarray]:
        return [np.zeros_like(p) for p in self.params]

    def copy(self) -> "Mlp":
        return Mlp(list(self.widths), self.resnet, [p.copy() for p in self.params])

    # -- forward / reverse / tangent ---------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_in:
            raise ValueError(f"input width {x.shape[-1]} != {self.n_in}")
        y = x
        for k in range(self.n_hidden):
            w, b, s = self._hidden(k)
            z = y @ w.T + b
            y = gelu(z) + (y @ s.T if s is not None else 0.0)
        wo, bo = self._output()
        return y @ wo.T + bo

    def _forward_cached(self, x: np.ndarray):
        ys = [x]
        zs = []
        y = x
        for k in range(self.n_hidden):
            w, b, s = self._hidden(k)
            z = w @ y + b
            zs.append(z)
            y = gelu(z) + (s @ y if s is not None else 0.0)
            ys.append(y)
        wo, bo = self._output()
        return wo @ y + bo, ys, zs

    def backward(self, x: np.ndarray, cotangent: np.ndarray):
        """Exact gradient of <output, cotangent>.

        Returns (grads aligned with ``params``, input cotangent).
        """
        x = np.asarray(x, dtype=float)
        g = np.asarray(cotangent, dtype=float)
        _, ys, zs = self._forward_cached(x)
        grads: list[np.ndarray | None] = [None] * len(self.params)
        wo, _ = self._output()
        grads[-2] = np.outer(g, ys[-1])
        grads[-1] = g.copy()
        g = wo.T @ g
        step = 3 if self.resnet else 2
        for k in range(self.n_hidden - 1, -1, -1):
            w, _, s = self._hidden(k)
            gz = g * gelu_deriv(zs[k])
            base = step * k
            grads[base] = np.outer(gz, ys[k])
            grads[base + 1] = gz
            g_in = w.T @ gz
            if s is not None:
                grads[base + 2] = np.outer(g, ys[k])
                g_in = g_in + s.T @ g
            g = g_in
        return grads, g

    def jvp(self, x: np.ndarray, dx: np.ndarray | None = None,
            dparams: list[np.ndarray] | None = None) -> np.ndarray:
        """Exact forward-tangent product w.r.t. input and/or parameters."""
        x = np.asarray(x, dtype=float)
        y = x
        dy = np.zeros_like(x) if dx is None else np.asarray(dx, dtype=float)
        step = 3 if self.resnet else 2
        for k in range(self.n_hidden):
            w, b, s = self._hidden(k)
            z = w @ y + b
            dz = w @ dy
            if dparams is not None:
                base = step * k
                dz = dz + dparams[base] @ y + dparams[base + 1]
            skip = s @ y if s is not None else 0.0
            dskip = s @ dy if s is not None else 0.0
            if dparams is not None and s is not None:
                dskip = dskip + dparams[step * k + 2] @ y
            dy = gelu_deriv(z) * dz + dskip
            y = gelu(z) + skip
        wo, bo = self._output()
        dout = wo @ dy
        if dparams is not None:
            dout = dout + dparams[-2] @ y + dparams[-1]
        return dout


# ---------------------------------------------------------------------------
# state-level wrappers
# ---------------------------------------------------------------------------

def dynamics_input(theta: np.ndarray, t: float, extra: np.ndarray | None = None) -> np.ndarray:
    parts = [np.asarray(theta, dtype=float), np.array([float(t)])]
    if extra is not None and len(extra):
        parts.append(np.asarray(extra, dtype=float))
    return np.concatenate(parts)


def net_widths(n_state: int, hidden_layers: int, hidden_width: int, n_extra: int = 0) -> list[int]:
    return [n_state + 1 + n_extra] + [hidden_width] * hidden_layers + [n_state]


def forward(net: Mlp, state: RbfState, t: float, extra: np.ndarray | None = None) -> RbfState:
    """Parameter velocities for ``state`` at time ``t``, as a state-shaped record."""
    dot = net.forward(dynamics_input(state.flatten(), t, extra))
    return state.like(dot)


def backward(net: Mlp, state: RbfState, t: float, extra: np.ndarray | None,
             out_cotangent: np.ndarray):
    """Gradients of <velocities, cotangent> w.r.t. net parameters and inputs."""
    x = dynamics_input(state.flatten(), t, extra)
    return net.backward(x, np.ravel(out_cotangent))


# ---------------------------------------------------------------------------
# checkpoint format: one ASCII header line, then raw little-endian float64
# ---------------------------------------------------------------------------

_MAGIC = "rbflow-net"
_VERSION = 1


def save_checkpoint(path, net: Mlp, rbf_shape: tuple[int, int, int, int]):
    """rbf_shape is (n_basis, dim, n_fields, n_extra_inputs)."""
    n, d, m, p = (int(v) for v in rbf_shape)
    header = (f"{_MAGIC} {_VERSION} widths={','.join(str(w) for w in net.widths)} "
              f"resnet={int(net.resnet)} rbf={n},{d},{m},{p}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for arr in net.params:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (net, (n_basis, dim, n_fields, n_extra_inputs))."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        blob = fh.read()
    tokens = header.split()
    if len(tokens) != 5 or tokens[0] != _MAGIC or int(tokens[1]) != _VERSION:
        raise ValueError(f"unrecognized checkpoint header: {header!r}")
    fields = dict(tok.split("=", 1) for tok in tokens[2:])
    widths = [int(w) for w in fields["widths"].split(",")]
    resnet = bool(int(fields["resnet"]))
    shape = tuple(int(v) for v in fields["rbf"].split(","))
    flat = np.frombuffer(blob, dtype="<f8").astype(float)
    net = Mlp(widths, resnet, [])
    params = []
    pos = 0
    for k in range(len(widths) - 2):
        n_in, n_out = widths[k], widths[k + 1]
        shapes = [(n_out, n_in), (n_out,)] + ([(n_out, n_in)] if resnet else [])
        for sh in shapes:
            size = int(np.prod(sh))
            params.append(flat[pos:pos + size].reshape(sh).copy())
            pos += size
    for sh in [(widths[-1], widths[-2]), (widths[-1],)]:
        size = int(np.prod(sh))
        params.append(flat[pos:pos + size].reshape(sh).copy())
        pos += size
    if pos != flat.size:
        raise ValueError("checkpoint payload size does not match header")
    net.params = params
    return net, shape
