"""Small-scale channel sampling and the composite uplink/downlink channels.

Shapes follow the system model: the direct BS-user matrix is ``M x K``, the
user-RIS matrix ``N x K`` and the BS-RIS matrix ``M x N`` (uplink direction).
Every sampler can also draw a batch, in which case a leading trial axis is
prepended and all matrix operations broadcast over it.

The line-of-sight BS-RIS link is ``H_rb = sqrt(alpha_rb) * (a_N a_M^H)^T``:
the rank-one product ``a_N a_M^H`` is the RIS-to-BS (``N x M``) orientation
used in the rate expressions, and the uplink matrix is its transpose.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .ndris import NdRis
from .scenario import Scenario


def array_response(n_elems: int, spatial_frequency: float) -> np.ndarray:
    """Uniform linear array response ``exp(1j * i * spatial_frequency)``, i = 0..n-1."""
    if n_elems < 1:
        raise ValueError("array needs at least one element")
    return np.exp(1j * spatial_frequency * np.arange(n_elems))


def spatial_frequency(src, dst, axis=(1.0, 0.0, 0.0)) -> float:
    """Phase step of a half-wavelength ULA at ``src`` (oriented along ``axis``) toward ``dst``."""
    d = np.asarray(dst, float) - np.asarray(src, float)
    u = np.asarray(axis, float)
    return float(np.pi * (d @ u) / (np.linalg.norm(d) * np.linalg.norm(u)))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples (variance 1/2 per real dimension)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


@dataclass(frozen=True)
class LosSet:
    """Deterministic line-of-sight data of a scenario.

    Attributes
    ----------
    a_n, a_m : steering vectors of the RIS (toward the BS) and BS (toward the RIS).
    los_user_ris : ``N x K``; column k is the unit-amplitude LoS vector of user k.
    c : ``alpha_rb * alpha_kr / (1 + kappa_kr)`` per user.
    """

    a_n: np.ndarray
    a_m: np.ndarray
    los_user_ris: np.ndarray
    c: np.ndarray

    @property
    def los_bs_ris(self) -> np.ndarray:
        """Unscaled LoS BS-RIS matrix in uplink orientation (``M x N``)."""
        return np.outer(self.a_n, self.a_m.conj()).T


def los_set(scenario: Scenario) -> LosSet:
    s = scenario
    axis = s.array_axis
    mu_bs = s.bs_spatial_freq
    if mu_bs is None:
        mu_bs = spatial_frequency(s.bs_position, s.ris_position, axis)
    mu_ris = s.ris_spatial_freq
    if mu_ris is None:
        mu_ris = spatial_frequency(s.ris_position, s.bs_position, axis)
    mu_users = s.user_spatial_freqs
    if mu_users is None:
        mu_users = [spatial_frequency(s.ris_position, u, axis) for u in s.user_positions]
    los_users = np.column_stack([array_response(s.N, mu) for mu in mu_users])
    c = s.alpha_bs_ris * s.alpha_ris_user / (1.0 + s.rician_user_ris)
    return LosSet(array_response(s.N, mu_ris), array_response(s.M, mu_bs), los_users, c)


@dataclass(frozen=True)
class ChannelSet:
    """One realization (or a batch) of all small-scale channels, path loss included.

    ``user_ris_los`` / ``user_ris_nlos`` and ``bs_ris_los`` keep the unscaled
    components so that individual terms of the rate expectations can be
    isolated. ``bs_ris_los`` is ``None`` when the cascade is disabled.
    """

    direct: np.ndarray
    user_ris: np.ndarray
    bs_ris: np.ndarray
    user_ris_los: np.ndarray
    user_ris_nlos: np.ndarray
    bs_ris_los: Optional[np.ndarray] = None

    def save(self, path, binary: bool = True) -> None:
        """Dump the three composite matrices for cross-implementation checks.

        Binary: little-endian float64 (re, im) pairs in row-major order,
        direct then user_ris then bs_ris. Text: the same numbers, one
        ``re im`` pair per line.
        """
        arrays = [np.asarray(a, dtype="<c16") for a in (self.direct, self.user_ris, self.bs_ris)]
        flat = np.concatenate([a.ravel(order="C") for a in arrays])
        pairs = np.column_stack([flat.real, flat.imag]).astype("<f8")
        path = Path(path)
        if binary:
            path.write_bytes(pairs.tobytes())
        else:
            np.savetxt(path, pairs, fmt="%.17g")

    @staticmethod
    def load_matrices(path, m: int, n: int, k: int, binary: bool = True):
        """Inverse of :meth:`save`; returns ``(direct, user_ris, bs_ris)``."""
        if binary:
            pairs = np.frombuffer(Path(path).read_bytes(), dtype="<f8").reshape(-1, 2)
        else:
            pairs = np.loadtxt(path).reshape(-1, 2)
        flat = pairs[:, 0] + 1j * pairs[:, 1]
        sizes = [m * k, n * k, m * n]
        if flat.size != sum(sizes):
            raise ValueError(f"{path}: expected {sum(sizes)} entries, found {flat.size}")
        a, b = sizes[0], sizes[0] + sizes[1]
        return flat[:a].reshape(m, k), flat[a:b].reshape(n, k), flat[b:].reshape(m, n)


def sample_channels(scenario: Scenario, rng: np.random.Generator, trials: Optional[int] = None,
                    los: Optional[LosSet] = None, cascade: bool = True) -> ChannelSet:
    """Draw channel realizations; ``trials=None`` returns a single unbatched set.

    The direct channel is drawn first, so scenarios sharing a seed share their
    direct-link fading whether or not the cascade is enabled.
    ``cascade=False`` zeroes the BS-RIS link (no surface present).

    A deterministic BS-RIS matrix (pure LoS or no cascade) is returned
    unbatched as ``M x N``; it broadcasts against the batched matrices.
    """
    s = scenario
    los = los if los is not None else los_set(s)
    M, N, K = s.M, s.N, s.K
    lead = () if trials is None else (int(trials),)

    direct = np.sqrt(s.alpha_bs_user) * complex_gaussian(rng, lead + (M, K))

    kap = s.rician_user_ris
    nlos = complex_gaussian(rng, lead + (N, K))
    user_ris = np.sqrt(s.alpha_ris_user) * (
        np.sqrt(kap / (1.0 + kap)) * los.los_user_ris + np.sqrt(1.0 / (1.0 + kap)) * nlos)

    bar = los.los_bs_ris
    if not cascade:
        bs_ris = np.zeros((M, N), dtype=complex)
        bar = None
    elif s.los_bs_ris:
        bs_ris = np.sqrt(s.alpha_bs_ris) * bar
    else:
        kb = s.rician_bs_ris
        bs_ris = np.sqrt(s.alpha_bs_ris) * (
            np.sqrt(kb / (1.0 + kb)) * bar
            + np.sqrt(1.0 / (1.0 + kb)) * complex_gaussian(rng, lead + (M, N)))
    return ChannelSet(direct, user_ris, bs_ris,
                      np.broadcast_to(los.los_user_ris, lead + (N, K)), nlos, bar)


def sample_channel_set(scenario: Scenario, rng: np.random.Generator) -> ChannelSet:
    return sample_channels(scenario, rng)


def _check_dims(ch: ChannelSet, ris: NdRis) -> None:
    if ch.user_ris.shape[-2] != ris.n or ch.bs_ris.shape[-1] != ris.n:
        raise ValueError(
            f"surface has {ris.n} elements but channels expect {ch.user_ris.shape[-2]}")


def _t(a):
    return np.swapaxes(a, -1, -2)


def effective_uplink(ch: ChannelSet, ris: NdRis) -> np.ndarray:
    """``H_up = H_rb Phi* H_ru + H_bu`` (``M x K``), the channel the BS estimates."""
    _check_dims(ch, ris)
    return ch.bs_ris @ ris.apply(ch.user_ris) + ch.direct


def effective_downlink_actual(ch: ChannelSet, ris: NdRis) -> np.ndarray:
    """Actual downlink ``H_ru^T Phi* H_rb^T + H_bu^T`` (``K x M``).

    The same ``Phi*`` appears as in the uplink (not its transpose), so this
    differs from ``effective_uplink(...)^T`` whenever ``Phi*`` is asymmetric.
    """
    _check_dims(ch, ris)
    return _t(ch.user_ris) @ ris.apply(_t(ch.bs_ris)) + _t(ch.direct)
