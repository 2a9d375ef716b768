"""Named parameter storage, Adam updates and checkpoint files.

Checkpoint layout
-----------------
A checkpoint is a numpy ``.npz`` archive (zip of ``.npy`` arrays) with keys

* ``param/<name>``  parameter array
* ``m/<name>``      Adam first-moment estimate, same shape
* ``v/<name>``      Adam second-moment estimate, same shape
* ``step``          0-d int64 array, number of Adam steps taken

Each ``.npy`` member stores dtype, shape and C-order data, so the file is
self-describing.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from pathlib import Path

import numpy as np

from .tensor import Tensor

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


class ParameterStore(Mapping):
    """Ordered mapping of name -> trainable :class:`Tensor` plus Adam state."""

    def __init__(self, arrays: Mapping[str, np.ndarray] | None = None):
        self._params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0
        for name, value in (arrays or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def group(self, prefix: str) -> dict[str, Tensor]:
        """Parameters whose name starts with ``prefix + '.'``, keyed by the remainder."""
        cut = len(prefix) + 1
        return {k[cut:]: t for k, t in self._params.items() if k.startswith(prefix + ".")}

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Current gradients; parameters the last backward did not reach get zeros."""
        return {
            k: (np.zeros_like(t.data) if t.grad is None else t.grad) for k, t in self._params.items()
        }

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._params.items()}

    def copy(self) -> "ParameterStore":
        other = ParameterStore(self.arrays())
        other.m = {k: a.copy() for k, a in self.m.items()}
        other.v = {k: a.copy() for k, a in self.v.items()}
        other.step = self.step
        return other

    def num_values(self) -> int:
        return sum(t.size for t in self._params.values())

    def save(self, path: str | Path) -> None:
        payload = {"step": np.array(self.step, dtype=np.int64)}
        for k, t in self._params.items():
            payload[f"param/{k}"] = t.data
            payload[f"m/{k}"] = self.m[k]
            payload[f"v/{k}"] = self.v[k]
        with open(path, "wb") as fh:
            np.savez(fh, **payload)

    @classmethod
    def load(cls, path: str | Path) -> "ParameterStore":
        with np.load(path) as data:
            names = [k[len("param/"):] for k in data.files if k.startswith("param/")]
            store = cls({k: data[f"param/{k}"] for k in names})
            for k in names:
                store.m[k] = data[f"m/{k}"].copy()
                store.v[k] = data[f"v/{k}"].copy()
            store.step = int(data["step"])
        return store


def adam_step(
    store: ParameterStore,
    grads: Mapping[str, np.ndarray],
    lr: float,
    weight_decay: float = 0.0,
) -> None:
    """One Adam update with L2 weight decay added to the gradient (``g + wd * theta``)."""
    missing = [k for k in store if k not in grads]
    if missing:
        raise KeyError(f"adam_step: no gradient for parameters {missing}")
    store.step += 1
    t = store.step
    c1 = 1.0 - BETA1**t
    c2 = 1.0 - BETA2**t
    for name, param in store.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != param.shape:
            raise ValueError(f"adam_step: gradient for {name!r} has shape {g.shape}, expected {param.shape}")
        if weight_decay:
            g = g + weight_decay * param.data
        m = store.m[name] = BETA1 * store.m[name] + (1.0 - BETA1) * g
        v = store.v[name] = BETA2 * store.v[name] + (1.0 - BETA2) * g * g
        param.data = param.data - lr * (m / c1) / (np.sqrt(v / c2) + EPS)
