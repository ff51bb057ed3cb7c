"""Physical-layer generators for the bistatic sensing / communication downlink.

A base station with ``m_t`` transmit antennas sends, in each of ``n`` time
slots, the same block of ``p`` symbol vectors weighted by one row of a
column-orthonormal space-time code.  Two receivers observe the frame:

* a sensing array with ``m_r`` antennas collecting echoes from ``k`` point
  scatterers, each described by a departure angle, an arrival angle and one
  complex reflection coefficient per slot, and
* a user terminal with ``m_u`` antennas behind a flat-fading multipath
  channel.

Both observations are third-order tensors (antennas x symbols x slots); the
builders below produce them slice by slice.  Arrays are uniform linear with
half-wavelength spacing, so a steering vector has entries
``exp(1j * pi * i * sin(angle))`` and its first entry is always one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import isqrt

import numpy as np

from .exceptions import IdentifiabilityError
from .tensor_ops import row_diag

__all__ = [
    "SensingScene",
    "CommLink",
    "TransmitFrame",
    "steering_vector",
    "build_steering_matrix",
    "krst_code",
    "qam_constellation",
    "qam_modulate",
    "qam_demodulate",
    "sample_scene",
    "sample_frame",
    "build_comm_link",
    "sensing_forward",
    "comm_forward",
    "add_noise",
]


# ----------------------------- array geometry ----------------------------- #

def steering_vector(angle_deg: float, m: int) -> np.ndarray:
    """Steering vector of a half-wavelength uniform linear array.

    Parameters
    ----------
    angle_deg : float
        Angle in degrees, strictly inside (-90, 90).
    m : int
        Number of array elements, at least 1.

    Returns
    -------
    ndarray
        Length-``m`` complex vector with entries
        ``exp(1j * pi * i * sin(angle))``; the first entry is 1.
    """
    if not -90.0 < angle_deg < 90.0:
        raise ValueError(f"angle {angle_deg} deg outside the open interval (-90, 90)")
    if m < 1:
        raise ValueError(f"array needs at least one element, got {m}")
    return np.exp(1j * np.pi * np.arange(m) * np.sin(np.deg2rad(angle_deg)))


def build_steering_matrix(angles_deg, m: int) -> np.ndarray:
    """Stack steering vectors for a list of angles into an ``m x len(angles)`` matrix."""
    angles = np.atleast_1d(np.asarray(angles_deg, dtype=float))
    if angles.size == 0:
        raise ValueError("need at least one angle")
    return np.column_stack([steering_vector(a, m) for a in angles])


# ------------------------------ code matrix ------------------------------- #

def krst_code(n: int, m_t: int) -> np.ndarray:
    """Column-orthonormal space-time code: first ``m_t`` columns of the
    ``n x n`` DFT matrix scaled by ``1/sqrt(n)``, so ``c.T @ c.conj() == I``.
    """
    if n < m_t:
        raise IdentifiabilityError(
            f"code needs at least as many slots as transmit antennas: n={n} < m_t={m_t}"
        )
    idx = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(idx, idx) / n)
    return w[:, :m_t] / np.sqrt(n)


# ------------------------------ constellation ------------------------------ #

@lru_cache(maxsize=None)
def _constellation_cached(order: int) -> np.ndarray:
    side = isqrt(order)
    if order < 4 or side * side != order:
        raise ValueError(f"QAM order must be a square (4, 16, 64, ...), got {order}")
    levels = 2.0 * np.arange(side) - (side - 1)
    scale = np.sqrt(2.0 * (order - 1) / 3.0)
    idx = np.arange(order)
    points = (levels[idx // side] + 1j * levels[idx % side]) / scale
    points.setflags(write=False)
    return points


def qam_constellation(order: int) -> np.ndarray:
    """Unit-average-energy square QAM constellation indexed 0..order-1."""
    return _constellation_cached(order)


def qam_modulate(indices, order: int) -> np.ndarray:
    """Map integer constellation indices to unit-average-energy QAM symbols."""
    points = qam_constellation(order)
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ValueError("indices must be integers")
    if idx.size and (idx.min() < 0 or idx.max() >= order):
        raise ValueError(f"indices outside 0..{order - 1}")
    return points[idx]


def qam_demodulate(symbols, order: int) -> np.ndarray:
    """Nearest-neighbour hard decision back to constellation indices.

    Distance ties resolve to the smallest index, so the decision is
    deterministic even exactly on the decision boundary.
    """
    points = qam_constellation(order)
    sym = np.asarray(symbols, dtype=complex)
    dist = np.abs(sym.reshape(-1)[None, :] - points[:, None])
    return np.argmin(dist, axis=0).reshape(sym.shape)


# -------------------------------- key data -------------------------------- #

@dataclass
class SensingScene:
    """Scatterer geometry and per-slot reflections seen by the sensing array.

    ``theta`` are arrival angles at the sensing receiver, ``phi`` departure
    angles at the transmitter, both in degrees; ``gamma`` is the
    ``n_slots x k`` complex reflection matrix.
    """

    theta: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray
    m_r: int
    m_t: int

    def __post_init__(self) -> None:
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=complex))
        k = self.theta.size
        if self.phi.size != k:
            raise ValueError("theta and phi must list one angle per scatterer")
        if self.gamma.shape[1] != k:
            raise ValueError(
                f"gamma has {self.gamma.shape[1]} columns but the scene has {k} scatterers"
            )
        for a in np.concatenate([self.theta, self.phi]):
            if not -90.0 < a < 90.0:
                raise ValueError(f"angle {a} deg outside the open interval (-90, 90)")
        if self.m_r < 1 or self.m_t < 1:
            raise ValueError("antenna counts must be positive")

    @property
    def num_targets(self) -> int:
        return self.theta.size

    @property
    def num_slots(self) -> int:
        return self.gamma.shape[0]

    def rx_steering(self) -> np.ndarray:
        return build_steering_matrix(self.theta, self.m_r)

    def tx_steering(self) -> np.ndarray:
        return build_steering_matrix(self.phi, self.m_t)


@dataclass
class CommLink:
    """Flat-fading multipath channel between base station and user terminal."""

    theta_ue: np.ndarray
    phi_ue: np.ndarray
    gains: np.ndarray
    m_u: int
    m_t: int
    h: np.ndarray

    def __post_init__(self) -> None:
        self.theta_ue = np.atleast_1d(np.asarray(self.theta_ue, dtype=float))
        self.phi_ue = np.atleast_1d(np.asarray(self.phi_ue, dtype=float))
        self.gains = np.atleast_1d(np.asarray(self.gains, dtype=complex))
        self.h = np.asarray(self.h, dtype=complex)
        n_paths = self.theta_ue.size
        if self.phi_ue.size != n_paths or self.gains.size != n_paths:
            raise ValueError("theta_ue, phi_ue and gains must list one value per path")
        if self.h.shape != (self.m_u, self.m_t):
            raise ValueError(f"h must be {self.m_u}x{self.m_t}, got {self.h.shape}")
        rebuilt = (
            build_steering_matrix(self.theta_ue, self.m_u)
            @ np.diag(self.gains)
            @ build_steering_matrix(self.phi_ue, self.m_t).T
        )
        if self.h.size and np.max(np.abs(rebuilt - self.h)) > 1e-12:
            raise ValueError("h is inconsistent with the path angles and gains")

    @property
    def num_paths(self) -> int:
        return self.theta_ue.size


def build_comm_link(theta_ue, phi_ue, gains, m_u: int, m_t: int) -> CommLink:
    """Assemble a :class:`CommLink`, computing ``h`` from angles and gains."""
    theta_ue = np.atleast_1d(np.asarray(theta_ue, dtype=float))
    phi_ue = np.atleast_1d(np.asarray(phi_ue, dtype=float))
    gains = np.atleast_1d(np.asarray(gains, dtype=complex))
    h = (
        build_steering_matrix(theta_ue, m_u)
        @ np.diag(gains)
        @ build_steering_matrix(phi_ue, m_t).T
    )
    return CommLink(theta_ue=theta_ue, phi_ue=phi_ue, gains=gains, m_u=m_u, m_t=m_t, h=h)


@dataclass
class TransmitFrame:
    """One transmitted frame: pilot block, data block and the slot code.

    ``s_pilot`` and ``s_data`` are ``p x m_t`` symbol matrices on the
    unit-average-energy QAM grid; ``c`` is the ``n x m_t`` code matrix with
    ``c.T @ c.conj() == I``.
    """

    s_pilot: np.ndarray
    s_data: np.ndarray
    c: np.ndarray
    constellation: int

    def __post_init__(self) -> None:
        self.s_pilot = np.atleast_2d(np.asarray(self.s_pilot, dtype=complex))
        self.s_data = np.atleast_2d(np.asarray(self.s_data, dtype=complex))
        self.c = np.atleast_2d(np.asarray(self.c, dtype=complex))
        if self.s_pilot.shape != self.s_data.shape:
            raise ValueError("pilot and data blocks must have the same shape")
        m_t = self.s_pilot.shape[1]
        if self.c.shape[1] != m_t:
            raise ValueError("code and symbol blocks disagree on antenna count")
        gram = self.c.T @ self.c.conj()
        if np.max(np.abs(gram - np.eye(m_t))) > 1e-12:
            raise ValueError("code matrix is not column orthonormal")
        points = qam_constellation(self.constellation)
        for name, block in (("s_pilot", self.s_pilot), ("s_data", self.s_data)):
            off = np.min(np.abs(block.reshape(-1, 1) - points[None, :]), axis=1)
            if off.size and off.max() > 1e-9:
                raise ValueError(f"{name} contains symbols off the QAM grid")

    @property
    def num_slots(self) -> int:
        return self.c.shape[0]

    @property
    def num_symbols(self) -> int:
        return self.s_pilot.shape[0]


# -------------------------------- samplers -------------------------------- #

def sample_scene(
    k: int,
    n: int,
    sigma: float,
    m_r: int,
    m_t: int,
    theta=None,
    phi=None,
    sector: tuple[float, float] = (-80.0, 80.0),
    seed=None,
) -> SensingScene:
    """Draw a random scene: fixed angle lists if given, otherwise uniform in
    ``sector``; reflections i.i.d. circular complex Gaussian with std ``sigma``.
    """
    if k < 1 or n < 1:
        raise ValueError("need at least one scatterer and one slot")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = sector
    theta = rng.uniform(lo, hi, k) if theta is None else np.asarray(theta, dtype=float)
    phi = rng.uniform(lo, hi, k) if phi is None else np.asarray(phi, dtype=float)
    gamma = sigma / np.sqrt(2.0) * (
        rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    )
    return SensingScene(theta=theta, phi=phi, gamma=gamma, m_r=m_r, m_t=m_t)


def sample_frame(p: int, m_t: int, n: int, order: int = 4, seed=None) -> TransmitFrame:
    """Draw a random frame: uniform QAM pilot and data blocks plus the code."""
    if p < 1:
        raise ValueError("need at least one symbol per block")
    rng = np.random.default_rng(seed)
    s_pilot = qam_modulate(rng.integers(0, order, (p, m_t)), order)
    s_data = qam_modulate(rng.integers(0, order, (p, m_t)), order)
    return TransmitFrame(
        s_pilot=s_pilot, s_data=s_data, c=krst_code(n, m_t), constellation=order
    )


# ------------------------------ forward model ------------------------------ #

def sensing_forward(scene: SensingScene, frame: TransmitFrame) -> np.ndarray:
    """Noise-free sensing tensor of shape ``(m_r, p, n)``.

    Slice ``n`` is ``A_rx @ diag(gamma[n]) @ A_tx.T @ diag(c[n]) @ s_pilot.T``:
    every scatterer scales the pilot block by its slot reflection, seen
    through the transmit and receive array responses.
    """
    if scene.num_slots != frame.num_slots:
        raise ValueError("scene and frame disagree on the number of slots")
    if scene.m_t != frame.c.shape[1]:
        raise ValueError("scene and frame disagree on the transmit antenna count")
    a_rx = scene.rx_steering()
    a_tx = scene.tx_steering()
    slices = [
        a_rx
        @ row_diag(scene.gamma, n)
        @ a_tx.T
        @ row_diag(frame.c, n)
        @ frame.s_pilot.T
        for n in range(scene.num_slots)
    ]
    return np.stack(slices, axis=2)


def comm_forward(link: CommLink, frame: TransmitFrame) -> np.ndarray:
    """Noise-free user-terminal tensor of shape ``(m_u, p, n)``.

    Slice ``n`` is ``h @ diag(c[n]) @ s_data.T``.
    """
    if link.m_t != frame.c.shape[1]:
        raise ValueError("link and frame disagree on the transmit antenna count")
    slices = [
        link.h @ row_diag(frame.c, n) @ frame.s_data.T
        for n in range(frame.num_slots)
    ]
    return np.stack(slices, axis=2)


def add_noise(tensor: np.ndarray, es_n0_db: float, seed=None) -> np.ndarray:
    """Add i.i.d. circular complex Gaussian noise at the given Es/N0.

    Symbol energy is 1 by construction, so the per-entry noise variance is
    ``10 ** (-es_n0_db / 10)``.  ``es_n0_db = inf`` is the noiseless
    sentinel and returns the tensor unchanged.
    """
    t = np.asarray(tensor, dtype=complex)
    if np.isinf(es_n0_db):
        if es_n0_db < 0:
            raise ValueError("es_n0_db = -inf is not a valid noise level")
        return t.copy()
    n0 = 10.0 ** (-es_n0_db / 10.0)
    rng = np.random.default_rng(seed)
    noise = np.sqrt(n0 / 2.0) * (
        rng.standard_normal(t.shape) + 1j * rng.standard_normal(t.shape)
    )
    return t + noise
