"""Downlink precoders designed from the BS's reciprocal channel assumption.

All functions accept the uplink estimate ``h_up`` (``M x K``, optionally with
leading batch axes) and build ``W`` (``M x K``) for the assumed downlink
``H_down = h_up^T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import dbm_to_watts

MAX_CONDITION = 1e12


class SingularChannelError(np.linalg.LinAlgError):
    """Assumed downlink channel is too ill-conditioned for zero-forcing."""


@dataclass(frozen=True)
class Precoder:
    matrix: np.ndarray
    power_alloc: np.ndarray
    kind: str


def equal_power_alloc(k: int, p_dbm: float) -> np.ndarray:
    """``k`` equal per-user powers in watts."""
    if k < 1:
        raise ValueError("need at least one user")
    return np.full(k, float(dbm_to_watts(p_dbm)))


def _power(h_up, power_alloc):
    K = h_up.shape[-1]
    if power_alloc is None:
        return np.ones(K)
    p = np.asarray(power_alloc, dtype=float)
    if p.shape != (K,) or np.any(p <= 0):
        raise ValueError(f"power allocation must be {K} positive values")
    return p


def mrt(h_up: np.ndarray, power_alloc=None) -> Precoder:
    """Maximum ratio transmission, ``W = (h_up^T)^H = conj(h_up)``.

    Columns are deliberately left unnormalized: the rate expressions treat
    ``P_k`` as the symbol power and keep the beam gain in the channel.
    """
    h_up = np.asarray(h_up)
    return Precoder(h_up.conj(), _power(h_up, power_alloc), "mrt")


def zf(h_up: np.ndarray, power_alloc=None, normalize: bool = True,
       max_condition: float = MAX_CONDITION) -> Precoder:
    """Zero-forcing ``W = H^H (H H^H)^-1`` for ``H = h_up^T``.

    With ``normalize`` every column is scaled to unit norm afterwards, so
    ``P_k`` keeps its meaning as per-user transmit power.

    Raises
    ------
    SingularChannelError
        If any assumed channel has condition number above ``max_condition``.
    """
    h_up = np.asarray(h_up)
    H = np.swapaxes(h_up, -1, -2)
    cond = np.linalg.cond(H)
    if np.any(~np.isfinite(cond)) or np.any(cond > max_condition):
        raise SingularChannelError(
            f"assumed downlink channel is rank deficient (condition {np.max(cond):.3g})")
    Hh = np.conj(h_up)
    W = Hh @ np.linalg.inv(H @ Hh)
    if normalize:
        W = W / np.linalg.norm(W, axis=-2, keepdims=True)
    return Precoder(W, _power(h_up, power_alloc), "zf")


def build_precoder(kind: str, h_up: np.ndarray, power_alloc=None) -> Precoder:
    kind = kind.lower()
    if kind == "mrt":
        return mrt(h_up, power_alloc)
    if kind == "zf":
        return zf(h_up, power_alloc)
    raise ValueError(f"unknown precoder kind {kind!r} (expected 'mrt' or 'zf')")


def leakage(h_down: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Worst off-diagonal to diagonal power ratio of ``h_down @ w`` (per batch entry)."""
    G = np.abs(h_down @ w) ** 2
    diag = np.diagonal(G, axis1=-2, axis2=-1)
    off = G - np.einsum("...i,ij->...ij", diag, np.eye(G.shape[-1]))
    return np.max(off / diag[..., :, None], axis=(-2, -1))


__all__ = ["Precoder", "SingularChannelError", "equal_power_alloc", "mrt", "zf",
           "build_precoder", "leakage"]
