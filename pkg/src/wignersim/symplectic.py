"""Symplectic transforms of linear optical elements.

Phase-space vectors are ordered (x1, p1, ..., xN, pN) with hbar = 1, so mode k
occupies rows 2k-2 and 2k-1 (0-based).  Every element is a 2Nx2N real matrix f
satisfying f @ Omega @ f.T = Omega; displacement additionally carries an affine
shift, which is the only way a linear-optics element can move the mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SYMPLECTIC_TOL = 1e-10


def omega(modes: int) -> np.ndarray:
    """Block-diagonal symplectic form, one ((0,1),(-1,0)) block per mode."""
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = np.zeros((2 * modes, 2 * modes))
    for k in range(modes):
        out[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = w
    return out


@dataclass(frozen=True)
class SymplecticTransform:
    """A linear optical element: X -> matrix @ X + shift."""

    matrix: np.ndarray
    shift: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 0 or m.shape[0] == 0:
            raise ValueError(f"matrix must be square with even dimension, got {m.shape}")
        s = self.shift
        s = np.zeros(m.shape[0]) if s is None else np.asarray(s, dtype=float)
        if s.shape != (m.shape[0],):
            raise ValueError(f"shift length {s.shape} does not match matrix dimension {m.shape[0]}")
        om = omega(m.shape[0] // 2)
        defect = np.max(np.abs(m @ om @ m.T - om))
        if defect > SYMPLECTIC_TOL:
            raise ValueError(f"matrix is not symplectic (defect {defect:.3e})")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "shift", s)
        self.matrix.setflags(write=False)
        self.shift.setflags(write=False)

    @property
    def modes(self) -> int:
        return self.matrix.shape[0] // 2


def identity_transform(modes: int) -> SymplecticTransform:
    return SymplecticTransform(np.eye(2 * modes))


def make_beam_splitter(T: float) -> SymplecticTransform:
    """Two-mode beam splitter of transmissivity T in [0, 1]."""
    if not 0.0 <= T <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {T}")
    t, rfl = math.sqrt(T), math.sqrt(1.0 - T)
    m = np.array(
        [
            [t, 0.0, rfl, 0.0],
            [0.0, t, 0.0, rfl],
            [rfl, 0.0, -t, 0.0],
            [0.0, rfl, 0.0, -t],
        ]
    )
    return SymplecticTransform(m)


def make_phase_shifter(phi: float) -> SymplecticTransform:
    """Single-mode phase rotation by phi radians."""
    if not math.isfinite(phi):
        raise ValueError("phase must be finite")
    c, s = math.cos(phi), math.sin(phi)
    return SymplecticTransform(np.array([[c, -s], [s, c]]))


def make_symmetric_phase_shifter(phi: float) -> SymplecticTransform:
    """Two-mode balanced phase: +phi/2 rotation on mode 1, -phi/2 on mode 2."""
    if not math.isfinite(phi):
        raise ValueError("phase must be finite")
    c, s = math.cos(phi / 2.0), math.sin(phi / 2.0)
    m = np.array(
        [
            [c, -s, 0.0, 0.0],
            [s, c, 0.0, 0.0],
            [0.0, 0.0, c, s],
            [0.0, 0.0, -s, c],
        ]
    )
    return SymplecticTransform(m)


def make_squeezer(r: float, theta: float = 0.0) -> SymplecticTransform:
    """Single-mode squeezer; theta = 0 stretches x by e^r and shrinks p by e^-r."""
    if r < 0.0:
        raise ValueError(f"squeezing parameter must be >= 0, got {r}")
    ch, sh = math.cosh(r), math.sinh(r)
    c, s = math.cos(theta), math.sin(theta)
    m = np.array([[ch + c * sh, s * sh], [s * sh, ch - c * sh]])
    return SymplecticTransform(m)


def make_squeezer_from_gain(G: float) -> SymplecticTransform:
    """Squeezer parameterized by gain G = cosh^2 r >= 1 (theta fixed to 0)."""
    if G < 1.0:
        raise ValueError(f"gain must be >= 1, got {G}")
    return make_squeezer(math.acosh(math.sqrt(G)), 0.0)


def make_two_mode_squeezer(r: float, theta: float = 0.0) -> SymplecticTransform:
    """Two-mode squeezer coupling modes 1 and 2."""
    if r < 0.0:
        raise ValueError(f"squeezing parameter must be >= 0, got {r}")
    ch = math.cosh(r)
    g = math.sinh(r) * math.cos(theta)
    d = math.sinh(r) * math.sin(theta)
    m = np.array(
        [
            [ch, 0.0, g, d],
            [0.0, ch, d, -g],
            [g, d, ch, 0.0],
            [d, -g, 0.0, ch],
        ]
    )
    return SymplecticTransform(m)


def make_displacement(alpha_mag: float, theta: float = 0.0) -> SymplecticTransform:
    """Displacement by amplitude |alpha| at phase angle theta (affine shift only)."""
    if alpha_mag < 0.0:
        raise ValueError(f"displacement magnitude must be >= 0, got {alpha_mag}")
    shift = math.sqrt(2.0) * np.array([alpha_mag * math.cos(theta), alpha_mag * math.sin(theta)])
    return SymplecticTransform(np.eye(2), shift)


def direct_sum(parts: list[SymplecticTransform]) -> SymplecticTransform:
    """Block-diagonal combination; the first listed part acts on mode 1."""
    if not parts:
        raise ValueError("direct_sum requires at least one transform")
    dim = sum(2 * p.modes for p in parts)
    m = np.zeros((dim, dim))
    s = np.zeros(dim)
    at = 0
    for p in parts:
        d = 2 * p.modes
        m[at : at + d, at : at + d] = p.matrix
        s[at : at + d] = p.shift
        at += d
    return SymplecticTransform(m, s)


def embed(part: SymplecticTransform, modes_acted: list[int], total_modes: int) -> SymplecticTransform:
    """Embed a transform acting on the given 1-based modes into an N-mode identity."""
    if len(modes_acted) != part.modes:
        raise ValueError("mode list length does not match transform size")
    if len(set(modes_acted)) != len(modes_acted):
        raise ValueError("mode list contains duplicates")
    for k in modes_acted:
        if not 1 <= k <= total_modes:
            raise ValueError(f"mode index {k} out of range 1..{total_modes}")
    rows = np.concatenate([[2 * (k - 1), 2 * k - 1] for k in modes_acted]).astype(int)
    m = np.eye(2 * total_modes)
    s = np.zeros(2 * total_modes)
    m[np.ix_(rows, rows)] = part.matrix
    s[rows] = part.shift
    return SymplecticTransform(m, s)


def compose(outer: SymplecticTransform, inner: SymplecticTransform) -> SymplecticTransform:
    """Transform applying `inner` first, then `outer` (matrix product plus shift propagation)."""
    if outer.modes != inner.modes:
        raise ValueError(f"dimension mismatch: {outer.modes} vs {inner.modes} modes")
    return SymplecticTransform(outer.matrix @ inner.matrix, outer.matrix @ inner.shift + outer.shift)


def chain(*transforms: SymplecticTransform) -> SymplecticTransform:
    """Compose transforms listed in application order (first listed acts first)."""
    if not transforms:
        raise ValueError("chain requires at least one transform")
    total = transforms[0]
    for t in transforms[1:]:
        total = compose(t, total)
    return total


def make_mzi(phi: float) -> SymplecticTransform:
    """Balanced Mach-Zehnder: 50/50 splitter, symmetric phase phi, 50/50 splitter."""
    bs = make_beam_splitter(0.5)
    return chain(bs, make_symmetric_phase_shifter(phi), bs)
