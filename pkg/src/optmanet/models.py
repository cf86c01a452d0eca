"""The three model families over a shared MLP core.

pure_dd      raw inputs -> MLP -> target
seq_hybrid   raw inputs + one precomputed physics feature column -> MLP -> target
optma_net    raw inputs -> transfer MLP -> latent physics inputs -> frozen
             differentiable physics head -> target

The physics head owns no trainable parameters; for the acoustic problem it
is the monopole SPL field over the partial source set, for the function
problems it is the oscillation-plus-quartic curve. Gradients reach the
transfer MLP through the head.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, ContractError
from .network import MlpSpec, init_params, mlp_forward, param_count, wrap_params
from .physics import PhysicsConfig, gramacy_pp, gramacy_pp_np, monopole_spl
from .tape import Tape, constant

FAMILIES = ("pure_dd", "seq_hybrid", "optma_net")
PROBLEMS = ("fp1", "fp2", "acoustic")

RAW_DIM = {"fp1": 1, "fp2": 1, "acoustic": 3}


@dataclass(frozen=True)
class ModelSpec:
    family: str
    problem: str
    mlp: MlpSpec
    physics: Optional[PhysicsConfig] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        raw = RAW_DIM[self.problem]
        if self.problem == "acoustic" and self.family in ("seq_hybrid", "optma_net"):
            if self.physics is None:
                raise ConfigError(
                    f"{self.family} on the acoustic problem requires a physics config"
                )
        if self.family == "pure_dd":
            want_in, want_out = raw, 1
        elif self.family == "seq_hybrid":
            want_in, want_out = raw + 1, 1
        else:  # optma_net
            want_in = raw
            want_out = self.physics.n_sources if self.problem == "acoustic" else 1
        if self.mlp.n_inputs != want_in or self.mlp.n_outputs != want_out:
            raise ConfigError(
                f"{self.family}/{self.problem} needs an MLP of width "
                f"{want_in}->{want_out}, got {self.mlp.n_inputs}->{self.mlp.n_outputs}"
            )


class Model:
    """A family spec plus its mutable parameter state."""

    def __init__(self, spec, params, buffers):
        self.spec = spec
        self.params = params
        self.buffers = buffers

    @property
    def n_params(self):
        return param_count(self.params)


def build_model(spec, seed):
    params, buffers = init_params(spec.mlp, seed)
    return Model(spec, params, buffers)


def physics_feature(spec, x):
    """The precomputed feature column a sequential hybrid appends to its
    inputs: the partial-physics response at the raw inputs (unit amplitudes
    for the acoustic field)."""
    x = np.asarray(x, dtype=np.float64)
    if spec.problem == "acoustic":
        t = Tape()
        amps = np.ones((x.shape[0], spec.physics.n_sources))
        return monopole_spl(t, x, amps, spec.physics).values
    return gramacy_pp_np(x).reshape(-1, 1)


def forward(tape, model, x, mode, rng=None, track=True):
    """Model output for a batch of raw inputs. Returns (prediction tensor,
    name -> parameter tensor map) so trainers can pull gradients by name."""
    spec = model.spec
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != RAW_DIM[spec.problem]:
        raise ContractError(
            f"{spec.problem} inputs must be (n, {RAW_DIM[spec.problem]}), got {x.shape}"
        )
    if spec.family == "seq_hybrid":
        x_in = np.ascontiguousarray(
            np.concatenate([x, physics_feature(spec, x)], axis=1)
        )
    else:
        x_in = x
    ptensors = wrap_params(tape, model.params, track=track)
    out = mlp_forward(tape, spec.mlp, ptensors, model.buffers, x_in, mode, rng)
    if spec.family == "optma_net":
        if spec.problem == "acoustic":
            out = monopole_spl(tape, constant(x), out, spec.physics)
        else:
            out = gramacy_pp(tape, out)
    return out, ptensors


def predict(model, x):
    """Eval-mode prediction with untracked parameters (records nothing)."""
    t = Tape()
    out, _ = forward(t, model, x, "eval", track=False)
    return out.values


def extract_transfer_features(model, x):
    """Latent physics inputs of an optma_net model, eval mode. Feeding these
    back through the physics head reproduces predict() exactly."""
    if model.spec.family != "optma_net":
        raise ContractError("transfer features exist only for optma_net models")
    t = Tape()
    ptensors = wrap_params(t, model.params, track=False)
    out = mlp_forward(t, model.spec.mlp, ptensors, model.buffers,
                      np.asarray(x, dtype=np.float64), "eval")
    return out.values
