"""Benchmark data: synthetic acoustic fields and the two function targets,
plus a CSV interchange format that round-trips float64 exactly.

The acoustic ground truth comes from an 8-source monopole field: the four
in-plane sources of the partial config at unit amplitude, plus four weaker
higher-frequency sources offset below the plane (amplitude 0.6, 350 Hz,
zero phase). The offset breaks the z symmetry, so extrapolating across the
plane is genuinely hard, while the field stays invariant under a 180-degree
rotation about z. Targets are evaluated through the same SPL kernel the
differentiable head uses; no second formula exists to drift from.
"""

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, ParseError
from .physics import PhysicsConfig, R_MIN, fp1_oracle, fp2_oracle, monopole_spl
from .tape import Tape

# sampling box for the acoustic problem
BOX_LO = np.array([-1.15, -1.15, -0.6])
BOX_HI = np.array([1.15, 1.15, 0.6])
DEFAULT_NOISE_DB = 0.25
DEFAULT_N_ACOUSTIC = 1728

GRAMACY_LO = 0.5
GRAMACY_HI = 2.5


def canonical_hash(obj):
    """sha256 over a canonical JSON encoding; stable across runs and key order."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


class Dataset:
    """Immutable-ish bundle of inputs (n, d), targets (n, 1), and meta."""

    def __init__(self, inputs, targets, meta=None):
        inputs = np.ascontiguousarray(np.asarray(inputs, dtype=np.float64))
        targets = np.ascontiguousarray(np.asarray(targets, dtype=np.float64))
        if inputs.ndim != 2 or inputs.shape[0] < 1:
            raise ContractError(f"inputs must be (n, d) with n >= 1, got {inputs.shape}")
        if targets.shape != (inputs.shape[0], 1):
            raise ContractError(
                f"targets must be ({inputs.shape[0]}, 1), got {targets.shape}"
            )
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise ContractError("non-finite values in dataset")
        self.inputs = inputs
        self.targets = targets
        self.meta = dict(meta or {})

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def n_features(self):
        return self.inputs.shape[1]

    def subset(self, indices, **extra_meta):
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            self.inputs[idx], self.targets[idx], {**self.meta, **extra_meta}
        )


@dataclass(frozen=True)
class FieldOracle:
    """A monopole field with frozen amplitudes; the data-generating truth."""

    config: PhysicsConfig
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(np.asarray(self.amplitudes, dtype=np.float64))
        if amps.shape != (self.config.n_sources,):
            raise ConfigError(
                f"amplitudes must be ({self.config.n_sources},), got {amps.shape}"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def spl(self, points):
        points = np.asarray(points, dtype=np.float64)
        amps = np.ascontiguousarray(
            np.tile(self.amplitudes, (points.shape[0], 1))
        )
        return monopole_spl(Tape(), points, amps, self.config).values

    def describe(self):
        return {
            "config": self.config.to_json_dict(),
            "amplitudes": self.amplitudes.tolist(),
        }


def default_full_physics_oracle():
    a = 0.176
    z_off = -0.08
    positions = np.array(
        [
            [a, a, 0.0], [-a, a, 0.0], [-a, -a, 0.0], [a, -a, 0.0],
            [a, a, z_off], [-a, a, z_off], [-a, -a, z_off], [a, -a, z_off],
        ]
    )
    cfg = PhysicsConfig(
        positions=positions,
        frequencies=np.array([175.0] * 4 + [350.0] * 4),
        phases=np.array([45.0] * 4 + [0.0] * 4),
    )
    return FieldOracle(cfg, np.array([1.0] * 4 + [0.6] * 4))


def gen_acoustic(n=DEFAULT_N_ACOUSTIC, seed=0, noise_db=DEFAULT_NOISE_DB,
                 oracle=None):
    """Uniform box samples kept at distance >= R_MIN from every source,
    labeled by the oracle field, optionally with additive Gaussian dB noise.
    Point draws come first, then one noise vector: the stream layout is part
    of the determinism contract."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if noise_db < 0.0:
        raise ConfigError("noise_db must be >= 0")
    oracle = oracle or default_full_physics_oracle()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    points = np.empty((0, 3))
    drawn = 0
    while points.shape[0] < n:
        need = n - points.shape[0]
        cand = rng.uniform(BOX_LO, BOX_HI, size=(need, 3))
        drawn += need
        deltas = cand[:, None, :] - oracle.config.positions[None, :, :]
        dist = np.sqrt((deltas ** 2).sum(axis=2))
        keep = cand[np.all(dist >= R_MIN, axis=1)]
        points = np.vstack([points, keep])
        if drawn > 2 * n:
            raise ConfigError(
                "rejection rate above 50%: sources crowd the sampling box"
            )
    targets = oracle.spl(points)
    if noise_db > 0.0:
        targets = targets + rng.normal(0.0, noise_db, size=(n, 1))
    meta = {
        "problem": "acoustic",
        "n": n,
        "seed": seed,
        "noise_db": noise_db,
        "config_hash": canonical_hash(
            {"kind": "acoustic", "n": n, "seed": seed, "noise_db": noise_db,
             "oracle": oracle.describe(),
             "box": [BOX_LO.tolist(), BOX_HI.tolist()]}
        ),
    }
    return Dataset(points, targets, meta)


def gen_gramacy(problem, n, seed, lo=GRAMACY_LO, hi=GRAMACY_HI):
    """Uniform samples of a function target over [lo, hi]."""
    if problem not in ("fp1", "fp2"):
        raise ConfigError(f"unknown function problem {problem!r}")
    if n < 1:
        raise ConfigError("n must be >= 1")
    if not lo < hi:
        raise ConfigError("need lo < hi")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    x = rng.uniform(lo, hi, size=(n, 1))
    oracle = fp1_oracle if problem == "fp1" else fp2_oracle
    y = oracle(x[:, 0]).reshape(-1, 1)
    meta = {
        "problem": problem,
        "n": n,
        "seed": seed,
        "config_hash": canonical_hash(
            {"kind": problem, "n": n, "seed": seed, "lo": lo, "hi": hi}
        ),
    }
    return Dataset(x, y, meta)


# ---- CSV interchange ----

HEADERS = {3: "x,y,z,spl", 1: "x,target"}


def save_csv(path, dataset):
    """17-significant-digit decimals: enough for float64 to round-trip
    exactly. Atomic write."""
    if dataset.n_features not in HEADERS:
        raise ContractError(
            f"no CSV layout for {dataset.n_features}-feature datasets"
        )
    lines = []
    if "config_hash" in dataset.meta:
        lines.append(f"# config_hash={dataset.meta['config_hash']}")
    if "problem" in dataset.meta:
        lines.append(f"# problem={dataset.meta['problem']}")
    lines.append(HEADERS[dataset.n_features])
    for row, target in zip(dataset.inputs, dataset.targets[:, 0]):
        fields = [f"{v:.17g}" for v in row] + [f"{target:.17g}"]
        lines.append(",".join(fields))
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_csv(path):
    """Parse failures carry 1-based line numbers. The header must match one
    of the shipped layouts exactly."""
    meta = {"source_path": str(path)}
    header = None
    n_cols = None
    inputs = []
    targets = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = line
                matches = [d for d, h in HEADERS.items() if h == line]
                if not matches:
                    raise ParseError(f"unrecognized header {line!r}", line=lineno)
                n_cols = matches[0] + 1
                continue
            fields = line.split(",")
            if len(fields) != n_cols:
                raise ParseError(
                    f"expected {n_cols} fields, got {len(fields)}", line=lineno
                )
            try:
                values = [float(v) for v in fields]
            except ValueError as e:
                raise ParseError(str(e), line=lineno) from None
            inputs.append(values[:-1])
            targets.append([values[-1]])
    if header is None:
        raise ParseError("file has no header line")
    if not inputs:
        raise ParseError("file has a header but no data rows")
    return Dataset(np.asarray(inputs), np.asarray(targets), meta)
