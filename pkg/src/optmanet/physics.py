"""Differentiable partial-physics heads and their plain-numpy twins.

The acoustic head superposes monopole point sources: per source,
p = (U / r) * cos(k r + phase) with k = 2*pi*f/c, summed over sources, then
SPL = 20*log10(max(|P|, P_FLOOR) / p_ref). The floor is expressed as
relu(|P| - floor) + floor so the clamped region has exactly zero slope
instead of a singular log.

The function-problem head is a damped-oscillation-plus-quartic curve; the
two benchmark targets compose it with an affine or sinusoidal inner map.
The tape version feeds model heads; the numpy twins generate data. Both are
kept and cross-checked against each other deliberately.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, DomainError
from .tape import Tensor, constant

SOUND_SPEED = 343.0
P_REF = 20e-6
P_FLOOR = 1e-12
R_MIN = 0.05


def _frozen_array(values, shape_tail=None):
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PhysicsConfig:
    """Source layout of a monopole superposition field."""

    positions: np.ndarray  # (N, 3)
    frequencies: np.ndarray  # (N,) Hz
    phases: np.ndarray  # (N,) radians, consumed by cos() verbatim
    sound_speed: float = SOUND_SPEED
    p_ref: float = P_REF

    def __post_init__(self):
        pos = _frozen_array(self.positions)
        freq = _frozen_array(self.frequencies)
        ph = _frozen_array(self.phases)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ConfigError(f"positions must be (N, 3), got {pos.shape}")
        n = pos.shape[0]
        if freq.shape != (n,) or ph.shape != (n,):
            raise ConfigError("frequencies and phases must be (N,)")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(freq))
                and np.all(np.isfinite(ph))):
            raise ConfigError("non-finite source configuration")
        if np.any(freq <= 0.0):
            raise ConfigError("frequencies must be positive")
        if self.sound_speed <= 0.0 or self.p_ref <= 0.0:
            raise ConfigError("sound_speed and p_ref must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "frequencies", freq)
        object.__setattr__(self, "phases", ph)

    @property
    def n_sources(self):
        return self.positions.shape[0]

    @property
    def wavenumbers(self):
        return 2.0 * np.pi * self.frequencies / self.sound_speed

    def to_json_dict(self):
        return {
            "sources": [
                {
                    "x": float(self.positions[i, 0]),
                    "y": float(self.positions[i, 1]),
                    "z": float(self.positions[i, 2]),
                    "freq_hz": float(self.frequencies[i]),
                    "phase": float(self.phases[i]),
                }
                for i in range(self.n_sources)
            ],
            "sound_speed": self.sound_speed,
            "p_ref": self.p_ref,
        }

    @classmethod
    def from_json_dict(cls, doc):
        try:
            sources = doc["sources"]
            positions = [[s["x"], s["y"], s["z"]] for s in sources]
            frequencies = [s["freq_hz"] for s in sources]
            phases = [s["phase"] for s in sources]
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed physics config: {e}") from None
        return cls(
            positions=np.asarray(positions, dtype=np.float64).reshape(-1, 3),
            frequencies=np.asarray(frequencies, dtype=np.float64),
            phases=np.asarray(phases, dtype=np.float64),
            sound_speed=float(doc.get("sound_speed", SOUND_SPEED)),
            p_ref=float(doc.get("p_ref", P_REF)),
        )

    @classmethod
    def from_json_file(cls, path):
        with open(path) as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"invalid physics config JSON: {e}") from None
        return cls.from_json_dict(doc)


def default_partial_config():
    """Four in-plane sources on the corners of a square, one frequency,
    one shared phase."""
    a = 0.176
    return PhysicsConfig(
        positions=np.array(
            [[a, a, 0.0], [-a, a, 0.0], [-a, -a, 0.0], [a, -a, 0.0]]
        ),
        frequencies=np.full(4, 175.0),
        phases=np.full(4, 45.0),
    )


def _coerce_points(points):
    if isinstance(points, Tensor):
        return points
    return constant(points)


def monopole_spl(tape, points, amplitudes, config):
    """SPL in dB at each point (n, 3) from per-point source amplitudes
    (n, N). Differentiable with respect to both arguments.

    Every point must keep distance >= R_MIN from every source; violations
    raise DomainError rather than returning near-singular values.
    """
    points = _coerce_points(points)
    amplitudes = _coerce_points(amplitudes)
    n = points.values.shape[0]
    nsrc = config.n_sources
    if points.values.shape != (n, 3):
        raise ContractError(f"points must be (n, 3), got {points.values.shape}")
    if amplitudes.values.shape != (n, nsrc):
        raise ContractError(
            f"amplitudes must be (n, {nsrc}), got {amplitudes.values.shape}"
        )
    deltas = points.values[:, None, :] - config.positions[None, :, :]
    if np.any(np.sqrt((deltas ** 2).sum(axis=2)) < R_MIN):
        raise DomainError(
            f"evaluation point within {R_MIN} m of a source"
        )

    x = tape.slice_col(points, 0)
    y = tape.slice_col(points, 1)
    z = tape.slice_col(points, 2)
    k = config.wavenumbers
    total = None
    for i in range(nsrc):
        sx, sy, sz = config.positions[i]
        dx = tape.sub(x, float(sx))
        dy = tape.sub(y, float(sy))
        dz = tape.sub(z, float(sz))
        r = tape.sqrt(
            tape.add(tape.add(tape.pow(dx, 2.0), tape.pow(dy, 2.0)),
                     tape.pow(dz, 2.0))
        )
        u = tape.slice_col(amplitudes, i)
        wave = tape.cos(tape.add(tape.mul(r, float(k[i])), float(config.phases[i])))
        p = tape.mul(tape.div(u, r), wave)
        total = p if total is None else tape.add(total, p)
    mag = tape.abs(total)
    floored = tape.add(tape.relu(tape.sub(mag, P_FLOOR)), P_FLOOR)
    return tape.mul(tape.log10(tape.div(floored, config.p_ref)), 20.0)


def monopole_spl_np(points, amplitudes, config):
    """Numpy twin of monopole_spl for fixed inputs; same formula, same floor."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    if amplitudes.ndim == 1:
        amplitudes = np.broadcast_to(
            amplitudes[None, :], (points.shape[0], amplitudes.size)
        )
    deltas = points[:, None, :] - config.positions[None, :, :]
    r = np.sqrt((deltas ** 2).sum(axis=2))
    if np.any(r < R_MIN):
        raise DomainError(f"evaluation point within {R_MIN} m of a source")
    k = config.wavenumbers
    p = (amplitudes / r) * np.cos(k[None, :] * r + config.phases[None, :])
    total = p.sum(axis=1, keepdims=True)
    mag = np.maximum(np.abs(total), P_FLOOR)
    return 20.0 * np.log10(mag / config.p_ref)


# ---- function-problem head and benchmark target curves ----


def gramacy_pp(tape, x):
    """sin(10*pi*x)/(2x) + (x-1)^4, elementwise, differentiable. x must not
    contain exact zeros."""
    x = _coerce_points(x)
    if np.any(x.values == 0.0):
        raise DomainError("head input contains an exact zero")
    osc = tape.div(tape.sin(tape.mul(x, 10.0 * np.pi)), tape.mul(x, 2.0))
    return tape.add(osc, tape.pow(tape.sub(x, 1.0), 4.0))


def gramacy_pp_np(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(x == 0.0):
        raise DomainError("input contains an exact zero")
    return np.sin(10.0 * np.pi * x) / (2.0 * x) + (x - 1.0) ** 4


def fp1_oracle(x):
    """First benchmark target: the curve under the reflection 3 - x."""
    return gramacy_pp_np(3.0 - np.asarray(x, dtype=np.float64))


def fp2_inner(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 + 2.0 * np.sin(np.pi * (x - 2.0) / 2.0)


def fp2_oracle(x):
    """Second benchmark target: the curve under a sinusoidal warp. An inner
    value of exactly zero propagates as DomainError."""
    return gramacy_pp_np(fp2_inner(x))
