"""Shared numeric conventions: dtype, seeding, and array/tensor conversion."""

import hashlib

import numpy as np
import torch

# All geometry runs in float64. On this class of CPU the float64 BLAS path
# is at least as fast as float32, and the finite-difference checks in the
# test-suite need the headroom.
DTYPE = torch.float64
NP_DTYPE = np.float64


def substream_seed(seed: int, name: str) -> int:
    """Derive a per-stage seed from a master seed and a stream name.

    The derivation is a stable hash so adding a new stream never perturbs
    existing ones.
    """
    h = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(h[:8], "little") % (2**63 - 1)


def rng_for(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(substream_seed(seed, name))


def torch_gen_for(seed: int, name: str) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(substream_seed(seed, name))
    return g


def as_tensor(x, dtype=DTYPE) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.to(dtype)
    a = np.asarray(x)
    if not a.flags.writeable:
        a = a.copy()
    return torch.as_tensor(a, dtype=dtype)


def as_array(x, dtype=NP_DTYPE) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().numpy().astype(dtype, copy=False)
    return np.asarray(x, dtype=dtype)


def freeze(a: np.ndarray) -> np.ndarray:
    """Return a read-only copy so dataclass holders stay immutable.

    Always copies so the caller's array is never locked in place.
    """
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a
