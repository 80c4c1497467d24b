"""Non-diagonal RIS phase-shift matrices ``Phi* = J @ Phi``.

``J`` is kept as a 0-based index map ``perm`` with the convention that a row
vector ``x`` is scrambled as ``(x @ J)[n] = x[perm[n]]``; equivalently
``J[perm[n], n] = 1``. ``Phi = diag(exp(1j * phases))``. Dense matrices are
only built on request.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

TWO_PI = 2.0 * np.pi


def canonical_phases(phases) -> np.ndarray:
    """Wrap angles into ``[0, 2*pi)``."""
    p = np.mod(np.asarray(phases, dtype=float), TWO_PI)
    # np.mod can round tiny negatives up to exactly 2*pi
    p[p >= TWO_PI] = 0.0
    return p


def phase_grid(bits: int) -> np.ndarray:
    """The ``2**bits`` admissible phases of a ``bits``-bit element."""
    return TWO_PI * np.arange(2 ** bits) / 2 ** bits


@dataclass(frozen=True, eq=False)
class NdRis:
    """Permutation plus unit-modulus phase vector.

    ``resolution_bits`` is ``None`` for continuous phase control.
    """

    perm: np.ndarray
    phases: np.ndarray
    resolution_bits: Optional[int] = None

    @property
    def n(self) -> int:
        return self.perm.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    def permutation_matrix(self) -> np.ndarray:
        J = np.zeros((self.n, self.n))
        J[self.perm, np.arange(self.n)] = 1.0
        return J

    def matrix(self) -> np.ndarray:
        """Dense ``Phi* = J Phi``."""
        P = np.zeros((self.n, self.n), dtype=complex)
        P[self.perm, np.arange(self.n)] = self.theta
        return P

    def conj_matrix(self) -> np.ndarray:
        """Dense ``J Phi^H``, the entrywise conjugate of ``Phi*``."""
        return self.matrix().conj()

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``Phi* @ x`` along axis -2 (works for vectors and stacked matrices)."""
        x = np.asarray(x)
        if x.ndim == 1:
            out = np.empty(x.shape, dtype=np.result_type(x, complex))
            out[self.perm] = self.theta * x
            return out
        out = np.empty(x.shape, dtype=np.result_type(x, complex))
        out[..., self.perm, :] = self.theta[:, None] * x
        return out

    def apply_conj(self, x: np.ndarray) -> np.ndarray:
        """``(J Phi^H) @ x`` along axis -2."""
        return self.conj().apply(x)

    def conj(self) -> "NdRis":
        return NdRis(self.perm, canonical_phases(-self.phases), self.resolution_bits)

    def __eq__(self, other):
        if not isinstance(other, NdRis):
            return NotImplemented
        return (np.array_equal(self.perm, other.perm)
                and np.array_equal(self.phases, other.phases)
                and self.resolution_bits == other.resolution_bits)

    __hash__ = None

    def to_text(self) -> str:
        """Two lines: 1-based permutation, then phases in radians."""
        perm = " ".join(str(int(i) + 1) for i in self.perm)
        ph = " ".join(repr(float(p)) for p in self.phases)
        return f"{perm}\n{ph}\n"

    @classmethod
    def from_text(cls, text: str, resolution_bits: Optional[int] = None) -> "NdRis":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if len(lines) != 2:
            raise ValueError("ND-RIS text must have exactly two lines")
        perm = [int(t) - 1 for t in lines[0].split()]
        phases = [float(t) for t in lines[1].split()]
        return make_ndris(perm, phases, resolution_bits)


def validate_permutation(perm) -> np.ndarray:
    p = np.asarray(perm)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("permutation must be a nonempty 1-D index list")
    if not np.issubdtype(p.dtype, np.integer):
        if not np.all(np.equal(np.mod(p, 1), 0)):
            raise ValueError("permutation entries must be integers")
        p = p.astype(np.int64)
    if not np.array_equal(np.sort(p), np.arange(p.size)):
        raise ValueError(f"not a permutation of 0..{p.size - 1}: {p.tolist()}")
    return p.astype(np.int64)


def make_ndris(perm, phases, resolution_bits: Optional[int] = None) -> NdRis:
    """Build a validated :class:`NdRis` from a 0-based permutation and angles.

    Angles are wrapped into ``[0, 2*pi)``. When ``resolution_bits`` is set,
    every phase must already lie on the corresponding grid.
    """
    p = validate_permutation(perm)
    ph = np.asarray(phases, dtype=float)
    if ph.shape != p.shape:
        raise ValueError(f"length mismatch: {p.size} permutation entries, {ph.size} phases")
    if not np.all(np.isfinite(ph)):
        raise ValueError("phases must be finite")
    ph = canonical_phases(ph)
    if resolution_bits is not None:
        if int(resolution_bits) != resolution_bits or resolution_bits < 1:
            raise ValueError("resolution_bits must be a positive integer or None")
        if not np.array_equal(_snap(ph, resolution_bits), ph):
            raise ValueError(f"phases are not on the {resolution_bits}-bit grid")
    p.setflags(write=False)
    ph.setflags(write=False)
    return NdRis(p, ph, resolution_bits)


def identity_ndris(n: int) -> NdRis:
    return make_ndris(np.arange(n), np.zeros(n))


def is_reciprocal(r: NdRis) -> bool:
    """True iff ``Phi*`` is symmetric, i.e. the surface does not break reciprocity.

    Entry ``(perm[n], n)`` holds ``theta[n]``, so symmetry needs ``perm`` to be
    an involution with equal phases on every swapped pair.
    """
    involution = np.array_equal(r.perm[r.perm], np.arange(r.n))
    return bool(involution and np.array_equal(r.phases[r.perm], r.phases))


def _snap(phases: np.ndarray, bits: int) -> np.ndarray:
    step = TWO_PI / 2 ** bits
    # ceil(x - 0.5) rounds half down: ties go to the smaller angle
    k = np.ceil(np.asarray(phases) / step - 0.5).astype(np.int64) % (2 ** bits)
    return k * step


def quantize(r: NdRis, bits: int) -> NdRis:
    """Snap every phase to the nearest point of ``{2*pi*k / 2**bits}``."""
    return make_ndris(r.perm, _snap(r.phases, bits), bits)


def random_phases(n: int, rng: np.random.Generator, resolution_bits: Optional[int] = None):
    if resolution_bits is None:
        return rng.uniform(0.0, TWO_PI, n)
    return phase_grid(resolution_bits)[rng.integers(0, 2 ** resolution_bits, n)]


def random_ndris(n: int, rng: np.random.Generator,
                 resolution_bits: Optional[int] = None) -> NdRis:
    """Uniform permutation (Fisher-Yates via ``Generator.permutation``) and phases."""
    perm = rng.permutation(n)
    return make_ndris(perm, random_phases(n, rng, resolution_bits), resolution_bits)


def random_symmetric_ndris(n: int, rng: np.random.Generator,
                           resolution_bits: Optional[int] = None) -> NdRis:
    """Random involution with matched phases on each 2-cycle (reciprocal surface)."""
    order = rng.permutation(n)
    n_pairs = rng.integers(0, n // 2 + 1)
    perm = np.arange(n)
    phases = random_phases(n, rng, resolution_bits)
    for a, b in order[: 2 * n_pairs].reshape(-1, 2):
        perm[a], perm[b] = b, a
        phases[b] = phases[a]
    return make_ndris(perm, phases, resolution_bits)
