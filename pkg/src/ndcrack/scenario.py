"""Experiment configuration: node geometry, large-scale fading, power and noise.

All powers are configured in dBm and exposed in watts through derived
properties; path gains are linear (``alpha = rho * d ** -exponent``).
"""
from __future__ import annotations

import json
import math
from dataclasses import MISSING, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

REFERENCE_DISTANCE = 1.0  # meters

# Geometry and parameters of the reference deployment.
REFERENCE_BS_POSITION = (5.0, 35.0, 20.0)
REFERENCE_RIS_POSITION = (0.0, 30.0, 15.0)
REFERENCE_USER_CENTER = (5.0, 0.0, 1.5)
REFERENCE_USER_RADIUS = 10.0
REFERENCE_BANDWIDTH_HZ = 10e6
REFERENCE_CARRIER_HZ = 28e9


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    """Convert dBm to watts (scalar or array)."""
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def thermal_noise_dbm(bandwidth_hz: float) -> float:
    """Noise floor used by the reference setup: -170 dBm/Hz over the band."""
    return -170.0 + 10.0 * math.log10(bandwidth_hz)


def path_gain(distance, ref_path_loss_db: float, exponent: float):
    """Large-scale gain ``rho * d**-exponent`` with ``rho`` given in dB.

    Distances below the 1 m reference distance are rejected.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d < REFERENCE_DISTANCE):
        raise ValueError(
            f"distance {d.min():.4g} m is below the {REFERENCE_DISTANCE} m reference distance")
    return db_to_linear(ref_path_loss_db) * d ** (-float(exponent))


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated, immutable simulation scenario.

    Per-user quantities (``rician_user_ris``, ``tx_power_per_user_dbm``) may
    be given as scalars and are broadcast to ``num_users`` entries.
    ``rician_bs_ris = inf`` selects the rank-one line-of-sight BS-RIS model.

    The ``*_spatial_freq`` fields override the geometry-derived phase
    progression (radians per element) of the corresponding steering vector.
    """

    num_bs_antennas: int
    num_ris_elements: int
    num_users: int
    bs_position: Sequence[float]
    ris_position: Sequence[float]
    user_positions: Sequence[Sequence[float]]
    ref_path_loss_db: float = -20.0
    exponent_bs_user: float = 3.5
    exponent_ris_user: float = 2.5
    exponent_bs_ris: float = 2.0
    rician_user_ris: Any = 1.995
    rician_bs_ris: float = math.inf
    tx_power_per_user_dbm: Any = 20.0
    noise_power_dbm: Optional[float] = None
    bandwidth_hz: float = REFERENCE_BANDWIDTH_HZ
    carrier_hz: float = REFERENCE_CARRIER_HZ
    array_axis: Sequence[float] = (1.0, 0.0, 0.0)
    bs_spatial_freq: Optional[float] = None
    ris_spatial_freq: Optional[float] = None
    user_spatial_freqs: Optional[Sequence[float]] = None

    def __post_init__(self):
        M, N, K = self.num_bs_antennas, self.num_ris_elements, self.num_users
        for name, v in (("num_bs_antennas", M), ("num_ris_elements", N), ("num_users", K)):
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if K >= M:
            raise ValueError(f"need fewer users than BS antennas (K={K}, M={M})")

        set_ = object.__setattr__
        set_(self, "bs_position", _frozen(self.bs_position))
        set_(self, "ris_position", _frozen(self.ris_position))
        set_(self, "user_positions", _frozen(np.reshape(self.user_positions, (-1, 3))))
        if self.bs_position.shape != (3,) or self.ris_position.shape != (3,):
            raise ValueError("positions must be 3D coordinates")
        if self.user_positions.shape[0] != K:
            raise ValueError(f"expected {K} user positions, got {self.user_positions.shape[0]}")
        pos = np.vstack([self.bs_position, self.ris_position, self.user_positions])
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")

        set_(self, "rician_user_ris", _frozen(np.broadcast_to(self.rician_user_ris, (K,))))
        set_(self, "tx_power_per_user_dbm",
             _frozen(np.broadcast_to(self.tx_power_per_user_dbm, (K,))))
        if np.any(self.rician_user_ris < 0) or self.rician_bs_ris < 0:
            raise ValueError("Rician factors must be nonnegative")
        if np.any(np.isinf(self.rician_user_ris)):
            raise ValueError("user-RIS Rician factors must be finite")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.noise_power_dbm is None:
            set_(self, "noise_power_dbm", thermal_noise_dbm(self.bandwidth_hz))
        set_(self, "array_axis", _frozen(self.array_axis))
        if self.user_spatial_freqs is not None:
            set_(self, "user_spatial_freqs",
                 _frozen(np.broadcast_to(self.user_spatial_freqs, (K,))))

        # Evaluating the gains validates every distance against the 1 m floor.
        self.alpha_bs_user, self.alpha_ris_user, self.alpha_bs_ris  # noqa: B018

    # Derived scalars -------------------------------------------------------

    @property
    def M(self) -> int:
        return self.num_bs_antennas

    @property
    def N(self) -> int:
        return self.num_ris_elements

    @property
    def K(self) -> int:
        return self.num_users

    @property
    def dist_bs_user(self) -> np.ndarray:
        return np.linalg.norm(self.user_positions - self.bs_position, axis=1)

    @property
    def dist_ris_user(self) -> np.ndarray:
        return np.linalg.norm(self.user_positions - self.ris_position, axis=1)

    @property
    def dist_bs_ris(self) -> float:
        return float(np.linalg.norm(self.ris_position - self.bs_position))

    @property
    def alpha_bs_user(self) -> np.ndarray:
        return path_gain(self.dist_bs_user, self.ref_path_loss_db, self.exponent_bs_user)

    @property
    def alpha_ris_user(self) -> np.ndarray:
        return path_gain(self.dist_ris_user, self.ref_path_loss_db, self.exponent_ris_user)

    @property
    def alpha_bs_ris(self) -> float:
        return float(path_gain(self.dist_bs_ris, self.ref_path_loss_db, self.exponent_bs_ris))

    @property
    def tx_power_w(self) -> np.ndarray:
        return dbm_to_watts(self.tx_power_per_user_dbm)

    @property
    def noise_power_w(self) -> float:
        return float(dbm_to_watts(self.noise_power_dbm))

    @property
    def los_bs_ris(self) -> bool:
        return math.isinf(self.rician_bs_ris)

    def with_updates(self, **changes) -> "Scenario":
        """Copy with fields replaced; the result is revalidated.

        A derived noise floor is recomputed when only the bandwidth changes.
        """
        if "bandwidth_hz" in changes and "noise_power_dbm" not in changes:
            if self.noise_power_dbm == thermal_noise_dbm(self.bandwidth_hz):
                changes["noise_power_dbm"] = None
        return replace(self, **changes)

    def to_config(self) -> dict:
        """Plain JSON-compatible mapping that ``build_scenario`` accepts."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = v.tolist()
            if isinstance(v, float) and math.isinf(v):
                v = "inf"
            out[f.name] = v
        return out


_FIELD_NAMES = {f.name for f in fields(Scenario)}
_REQUIRED = {f.name for f in fields(Scenario) if f.default is MISSING}


def build_scenario(config: Mapping[str, Any]) -> Scenario:
    """Validate a raw parameter mapping and return a :class:`Scenario`.

    Unknown keys are rejected so that typos in configuration files surface.
    The string ``"inf"`` is accepted for ``rician_bs_ris``.
    """
    unknown = set(config) - _FIELD_NAMES
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    missing = _REQUIRED - set(config)
    if missing:
        raise ValueError(f"missing scenario keys: {sorted(missing)}")
    cfg = dict(config)
    if isinstance(cfg.get("rician_bs_ris"), str):
        cfg["rician_bs_ris"] = float(cfg["rician_bs_ris"])
    return Scenario(**cfg)


def sample_users_in_disc(rng: np.random.Generator, k: int, center=REFERENCE_USER_CENTER,
                         radius: float = REFERENCE_USER_RADIUS) -> np.ndarray:
    """Draw ``k`` points uniformly over a horizontal disc (fixed height)."""
    r = radius * np.sqrt(rng.random(k))
    t = 2.0 * np.pi * rng.random(k)
    cx, cy, cz = center
    return np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t), np.full(k, float(cz))])


def reference_preset(m: int, n: int, seed: int = 0, **overrides) -> Scenario:
    """Reference deployment with ``m`` BS antennas and ``n`` RIS elements.

    Four users are placed uniformly in a 10 m disc centred at (5, 0, 1.5);
    placement depends only on ``seed``. Any Scenario field can be overridden.
    """
    cfg = dict(
        num_bs_antennas=m,
        num_ris_elements=n,
        num_users=4,
        bs_position=REFERENCE_BS_POSITION,
        ris_position=REFERENCE_RIS_POSITION,
        ref_path_loss_db=-20.0,
        exponent_bs_user=3.5,
        exponent_ris_user=2.5,
        exponent_bs_ris=2.0,
        rician_user_ris=1.995,
        rician_bs_ris=math.inf,
        tx_power_per_user_dbm=20.0,
        bandwidth_hz=REFERENCE_BANDWIDTH_HZ,
        carrier_hz=REFERENCE_CARRIER_HZ,
    )
    cfg.update(overrides)
    if "user_positions" not in overrides:
        rng = np.random.default_rng(seed)
        cfg["user_positions"] = sample_users_in_disc(rng, cfg["num_users"])
    return build_scenario(cfg)


def load_config(path) -> dict:
    """Read a JSON scenario configuration file."""
    p = Path(path)
    try:
        with p.open() as fh:
            return json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read scenario config {p}: {exc}") from exc
