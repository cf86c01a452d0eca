"""Training loop, error metrics, and the repeated-seed experiment runner.

Targets and predictions are compared after min-max normalization whose
bounds come from the training targets only; test ranges never leak into
the metric. Every run is a pure function of the experiment config: all
stream seeds are derived from labeled config fields by hashing, so a
rerun of the same config reproduces the report byte for byte.
"""

import hashlib
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import BACKEND_NAME
from .data import Dataset, canonical_hash, gen_acoustic, gen_gramacy, load_csv
from .errors import ConfigError, ContractError, GradientError, OptmanetError
from .models import FAMILIES, PROBLEMS, RAW_DIM, ModelSpec, build_model, forward, predict
from .network import AdamState, MlpSpec, PlateauScheduler, adam_step, mse_loss, snapshot
from .physics import PhysicsConfig, default_partial_config
from .split import split_percentage, split_quadrant, split_radial
from .tape import Tape

REPORT_FORMAT = "experiment-report@1"

# Training-knob defaults per problem. Widths are derived per model family.
GRAMACY_HYPER = {
    "n_hidden_layers": 3,
    "nodes_per_layer": 50,
    "dropout_p": 0.1,
    "learning_rate": 1e-5,
    "batch_size": 10,
    "max_epochs": 1500,
}
ACOUSTIC_HYPER = {
    "n_hidden_layers": 3,
    "nodes_per_layer": 50,
    "dropout_p": 0.1,
    "learning_rate": 1e-4,
    "batch_size": 25,
    "max_epochs": 100,
}

# Spatial splits hold out this share of the training rows for validation;
# percentage splits and the function problems validate on the test set.
VAL_FRACTION = 0.1


def derive_seed(*parts):
    """Stable 63-bit seed from labeled parts. Hash based, so independent
    streams (data, init, train, ...) never collide and never depend on
    platform hash randomization."""
    text = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class NormStats:
    """Min-max bounds of the training targets; maps them onto [0, 1]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ConfigError("normalization bounds must be finite")
        if self.hi <= self.lo:
            raise ConfigError(
                f"degenerate target range [{self.lo}, {self.hi}]: "
                "cannot normalize constant targets"
            )

    @classmethod
    def fit(cls, targets):
        arr = np.asarray(targets, dtype=np.float64).ravel()
        if arr.size < 1:
            raise ContractError("cannot fit normalization bounds to no targets")
        return cls(float(arr.min()), float(arr.max()))

    def apply(self, values):
        values = np.asarray(values, dtype=np.float64)
        return (values - self.lo) / (self.hi - self.lo)


def _paired(pred, truth):
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.size != t.size or p.size < 1:
        raise ContractError(
            f"need equally many predictions and truths (>= 1), got {p.size} and {t.size}"
        )
    return p, t


def mse_normalized(pred, truth, stats):
    """Mean squared error after min-max normalizing both sides with stats."""
    p, t = _paired(pred, truth)
    d = stats.apply(p) - stats.apply(t)
    return float(np.mean(d * d))


def rmse_normalized(pred, truth, stats):
    return float(math.sqrt(mse_normalized(pred, truth, stats)))


def relative_error(pred, truth):
    """Signed percent deviation (truth - pred) / truth * 100 per point.

    Returns (re, included): points with exactly zero truth cannot be scored,
    get re 0.0, and are flagged False in the mask.
    """
    p, t = _paired(pred, truth)
    included = t != 0.0
    re = np.zeros(t.size)
    re[included] = (t[included] - p[included]) / t[included] * 100.0
    return re, included


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainResult:
    history: dict  # per-epoch lists: train_loss, val_loss, lr
    best_epoch: int  # -1 when no epoch ran
    best_val_loss: float
    final_train_loss: float  # None when no epoch ran


def _batches(perm, batch_size):
    chunks = [perm[i:i + batch_size] for i in range(0, len(perm), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        # a single leftover row has no batch statistics; fold it back
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def train_model(model, train_set, val_set, seed, spec=None):
    """Minibatch Adam training with a plateau scheduler stepped on the
    validation loss once per epoch. The parameters with the best validation
    loss are restored at the end. One seed drives both the shuffles and the
    dropout masks."""
    if spec is None:
        spec = model.spec.mlp
    else:
        own = model.spec.mlp
        structural = ("n_inputs", "n_outputs", "n_hidden_layers", "nodes_per_layer")
        if any(getattr(spec, f) != getattr(own, f) for f in structural):
            raise ContractError("training spec structure does not match the model")
    n = len(train_set)
    if n < 2:
        raise ConfigError(f"need at least 2 training rows, got {n}")
    x_tr, y_tr = train_set.inputs, train_set.targets
    x_val, y_val = val_set.inputs, val_set.targets

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    adam = AdamState(model.params)
    sched = PlateauScheduler(spec.learning_rate)
    best = snapshot(model.params, model.buffers)
    best_val = math.inf
    best_epoch = -1
    hist_train, hist_val, hist_lr = [], [], []

    for epoch in range(spec.max_epochs):
        perm = rng.permutation(n)
        lr_used = sched.lr
        batch_losses = []
        for bi, idx in enumerate(_batches(perm, spec.batch_size)):
            tape = Tape()
            pred, ptensors = forward(tape, model, x_tr[idx], "train", rng)
            loss = mse_loss(tape, pred, y_tr[idx])
            lval = float(loss.values[0, 0])
            if not np.isfinite(lval):
                raise GradientError(
                    f"non-finite training loss at epoch {epoch}, batch {bi}; "
                    "lower the learning rate or check the data"
                )
            grads = tape.backward(loss)
            adam_step(
                model.params,
                {k: grads.wrt(t) for k, t in ptensors.items()},
                adam,
                lr_used,
            )
            batch_losses.append(lval)
        val_loss = float(np.mean((predict(model, x_val) - y_val) ** 2))
        if not np.isfinite(val_loss):
            raise GradientError(f"non-finite validation loss at epoch {epoch}")
        hist_train.append(float(np.mean(batch_losses)))
        hist_val.append(val_loss)
        hist_lr.append(lr_used)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best = snapshot(model.params, model.buffers)
        sched.step(val_loss)

    model.params, model.buffers = best
    return TrainResult(
        history={"train_loss": hist_train, "val_loss": hist_val, "lr": hist_lr},
        best_epoch=best_epoch,
        best_val_loss=best_val if best_epoch >= 0 else None,
        final_train_loss=hist_train[-1] if hist_train else None,
    )


# ---------------------------------------------------------------------------
# experiment config

_TOP_KEYS = {"problem", "families", "mlp", "physics", "split", "data", "seeds", "n_repeats"}
_HYPER_KEYS = set(GRAMACY_HYPER)
_SPLIT_KINDS = ("percentage", "quadrant", "radial")


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    families: tuple
    hyper: dict
    physics: PhysicsConfig  # None for the function problems
    split: dict  # None for the function problems
    data: dict
    seeds: tuple

    @property
    def n_repeats(self):
        return len(self.seeds)

    def to_json_dict(self):
        """Normalized config with every default materialized; its canonical
        hash identifies the experiment."""
        return {
            "problem": self.problem,
            "families": list(self.families),
            "mlp": dict(self.hyper),
            "physics": self.physics.to_json_dict() if self.physics else None,
            "split": dict(self.split) if self.split else None,
            "data": dict(self.data),
            "seeds": list(self.seeds),
            "n_repeats": self.n_repeats,
        }


def parse_experiment_config(doc):
    """Validate and normalize a config document. Everything random downstream
    is derived from the fields checked here."""
    if not isinstance(doc, dict):
        raise ConfigError("experiment config must be a JSON object")
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    problem = doc.get("problem")
    if problem not in PROBLEMS:
        raise ConfigError(f"problem must be one of {PROBLEMS}, got {problem!r}")

    families = doc.get("families")
    if not isinstance(families, list) or not families:
        raise ConfigError("families must be a nonempty list")
    if len(set(families)) != len(families):
        raise ConfigError("families must not repeat")
    for f in families:
        if f not in FAMILIES:
            raise ConfigError(f"unknown family {f!r}; choose from {FAMILIES}")

    seeds = doc.get("seeds", [0, 1, 2, 3, 4])
    if not isinstance(seeds, list) or not seeds or not all(_is_int(s) for s in seeds):
        raise ConfigError("seeds must be a nonempty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must not repeat")
    if "n_repeats" in doc and doc["n_repeats"] != len(seeds):
        raise ConfigError(
            f"n_repeats={doc['n_repeats']} disagrees with {len(seeds)} seeds"
        )

    hyper = dict(GRAMACY_HYPER if problem in ("fp1", "fp2") else ACOUSTIC_HYPER)
    mlp_doc = doc.get("mlp") or {}
    if not isinstance(mlp_doc, dict):
        raise ConfigError("mlp section must be an object")
    bad = sorted(set(mlp_doc) - _HYPER_KEYS)
    if bad:
        raise ConfigError(f"unknown mlp keys: {', '.join(bad)}")
    hyper.update(mlp_doc)
    MlpSpec(1, 1, **hyper)  # value validation with throwaway widths

    needs_physics = problem == "acoustic" and any(
        f in ("seq_hybrid", "optma_net") for f in families
    )
    phys_doc = doc.get("physics")
    physics = None
    if phys_doc is not None and problem != "acoustic":
        raise ConfigError("physics section applies only to the acoustic problem")
    if phys_doc is not None:
        if phys_doc == "default":
            physics = default_partial_config()
        elif isinstance(phys_doc, dict):
            physics = PhysicsConfig.from_json_dict(phys_doc)
        else:
            raise ConfigError("physics must be 'default' or an inline source table")
    elif needs_physics:
        raise ConfigError(
            "hybrid families on the acoustic problem need a physics section "
            "('default' or an inline source table)"
        )

    split_doc = doc.get("split")
    split = None
    if problem == "acoustic":
        if not isinstance(split_doc, dict):
            raise ConfigError("acoustic experiments need a split section")
        kind = split_doc.get("kind")
        if kind not in _SPLIT_KINDS:
            raise ConfigError(f"split kind must be one of {_SPLIT_KINDS}, got {kind!r}")
        if kind == "percentage":
            extra = sorted(set(split_doc) - {"kind", "fraction", "seed"})
            if extra:
                raise ConfigError(f"unknown percentage split keys: {', '.join(extra)}")
            fraction = split_doc.get("fraction")
            if not _is_num(fraction) or not 0.0 < fraction < 1.0:
                raise ConfigError(f"fraction must lie in (0, 1), got {fraction!r}")
            seed = split_doc.get("seed", 0)
            if not _is_int(seed):
                raise ConfigError("split seed must be an integer")
            split = {"kind": kind, "fraction": float(fraction), "seed": seed}
        else:
            extra = sorted(set(split_doc) - {"kind"})
            if extra:
                raise ConfigError(f"{kind} split takes no extra keys: {', '.join(extra)}")
            split = {"kind": kind}
    elif split_doc is not None:
        raise ConfigError(
            "function problems test on a fixed fresh sample; no split section"
        )

    data_doc = doc.get("data")
    if data_doc is None:
        data_doc = {}
    if not isinstance(data_doc, dict):
        raise ConfigError("data section must be an object")
    if problem == "acoustic":
        if "path" in data_doc:
            extra = sorted(set(data_doc) - {"path"})
            if extra:
                raise ConfigError(
                    f"data path excludes generator keys: {', '.join(extra)}"
                )
            if not isinstance(data_doc["path"], str) or not data_doc["path"]:
                raise ConfigError("data path must be a nonempty string")
            data = {"path": data_doc["path"]}
        else:
            extra = sorted(set(data_doc) - {"n", "seed", "noise_db"})
            if extra:
                raise ConfigError(f"unknown data keys: {', '.join(extra)}")
            data = {"n": 1728, "seed": 0, "noise_db": 0.25}
            data.update(data_doc)
            if not _is_int(data["n"]) or data["n"] < 2:
                raise ConfigError(f"data n must be an integer >= 2, got {data['n']!r}")
            if not _is_int(data["seed"]):
                raise ConfigError("data seed must be an integer")
            if not _is_num(data["noise_db"]) or data["noise_db"] < 0:
                raise ConfigError("noise_db must be a number >= 0")
            data["noise_db"] = float(data["noise_db"])
    else:
        extra = sorted(set(data_doc) - {"n_train", "n_test", "seed"})
        if extra:
            raise ConfigError(f"unknown data keys: {', '.join(extra)}")
        data = {"n_train": 200, "n_test": 200, "seed": 0}
        data.update(data_doc)
        for key in ("n_train", "n_test"):
            if not _is_int(data[key]) or data[key] < 2:
                raise ConfigError(f"data {key} must be an integer >= 2")
        if not _is_int(data["seed"]):
            raise ConfigError("data seed must be an integer")

    return ExperimentConfig(
        problem=problem,
        families=tuple(families),
        hyper=hyper,
        physics=physics,
        split=split,
        data=data,
        seeds=tuple(seeds),
    )


def load_experiment_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path} is not valid JSON: line {exc.lineno}, column {exc.colno}"
        ) from exc
    return parse_experiment_config(doc)


# ---------------------------------------------------------------------------
# experiment runner

def _family_mlp(cfg, family):
    raw = RAW_DIM[cfg.problem]
    if family == "pure_dd":
        n_in, n_out = raw, 1
    elif family == "seq_hybrid":
        n_in, n_out = raw + 1, 1
    elif cfg.problem == "acoustic":
        n_in, n_out = raw, cfg.physics.n_sources
    else:
        n_in, n_out = raw, 1
    return MlpSpec(n_in, n_out, **cfg.hyper)


def _seed_datasets(cfg, run_seed):
    """Build (train_fit, train_used, val, test, extras) for one run seed.

    train_fit is the full training split and defines the normalization;
    train_used is what the optimizer sees (minus any validation carve-out).
    """
    extras = {}
    if cfg.problem == "acoustic":
        if "path" in cfg.data:
            ds = load_csv(cfg.data["path"])
            if ds.n_features != 3:
                raise ConfigError(
                    f"{cfg.data['path']} holds {ds.n_features}-D inputs, "
                    "acoustic experiments need (x, y, z)"
                )
        else:
            ds = gen_acoustic(
                n=cfg.data["n"],
                seed=derive_seed("data", cfg.data["seed"], run_seed),
                noise_db=cfg.data["noise_db"],
            )
        kind = cfg.split["kind"]
        if kind == "percentage":
            train_all, test = split_percentage(
                ds,
                cfg.split["fraction"],
                derive_seed("split", cfg.split["seed"], run_seed),
            )
            train_used, val = train_all, test
        else:
            if kind == "quadrant":
                train_all, test = split_quadrant(ds)
            else:
                train_all, test, radius = split_radial(ds)
                extras["radius"] = radius
            # validation comes from inside the training region, never from
            # the extrapolation side
            train_used, val = split_percentage(
                train_all, 1.0 - VAL_FRACTION, derive_seed("val", run_seed)
            )
    else:
        train_all = gen_gramacy(
            cfg.problem, cfg.data["n_train"], derive_seed("data", cfg.data["seed"], run_seed)
        )
        test = gen_gramacy(
            cfg.problem, cfg.data["n_test"], derive_seed("data", cfg.data["seed"], "test")
        )
        train_used, val = train_all, test
    return train_all, train_used, val, test, extras


def _family_record(cfg, family, train_fit, train_used, val, test, run_seed):
    stats = NormStats.fit(train_fit.targets)
    mspec = ModelSpec(
        family=family,
        problem=cfg.problem,
        mlp=_family_mlp(cfg, family),
        physics=cfg.physics if cfg.problem == "acoustic" else None,
    )
    model = build_model(mspec, derive_seed("init", run_seed, family))
    result = train_model(model, train_used, val, derive_seed("train", run_seed, family))
    pred = predict(model, test.inputs)
    re, included = relative_error(pred, test.targets)
    return {
        "failure": None,
        "n_params": model.n_params,
        "final_train_loss": result.final_train_loss,
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
        "mse_raw": float(np.mean((pred - test.targets) ** 2)),
        "mse_normalized": mse_normalized(pred, test.targets, stats),
        "rmse_normalized": rmse_normalized(pred, test.targets, stats),
        "re_percent": [float(v) for v in re],
        "re_included": [bool(b) for b in included],
        "re_excluded": int(np.count_nonzero(~included)),
    }


def _seed_record(cfg, run_index):
    run_seed = cfg.seeds[run_index]
    train_all, train_used, val, test, extras = _seed_datasets(cfg, run_seed)
    record = {
        "seed": run_seed,
        "sizes": {
            "n_train": len(train_all),
            "n_train_used": len(train_used),
            "n_val": len(val),
            "n_test": len(test),
        },
        "families": {},
    }
    record.update(extras)
    if cfg.problem == "acoustic":
        record["test_inputs"] = [[float(v) for v in row] for row in test.inputs]
    for family in cfg.families:
        try:
            record["families"][family] = _family_record(
                cfg, family, train_all, train_used, val, test, run_seed
            )
        except OptmanetError as exc:
            # a diverged run is a result, not a crash; the report notes it
            record["families"][family] = {"failure": f"{type(exc).__name__}: {exc}"}
    return record


def _run_one_seed(norm_doc, run_index):
    return _seed_record(parse_experiment_config(norm_doc), run_index)


_AGG_KEYS = ("mse_raw", "mse_normalized", "rmse_normalized")


def aggregate_runs(records, families):
    """Mean and median per family over the successful runs. Kept separate so
    a report's aggregates can be recomputed from its per-run rows."""
    out = {}
    for family in families:
        rows = [r["families"][family] for r in records]
        good = [row for row in rows if row["failure"] is None]
        entry = {"n_runs": len(rows), "n_failed": len(rows) - len(good)}
        for key in _AGG_KEYS:
            if good:
                vals = [row[key] for row in good]
                entry[key] = {
                    "mean": float(np.mean(vals)),
                    "median": float(np.median(vals)),
                }
            else:
                entry[key] = None
        out[family] = entry
    return out


def run_experiment(cfg, jobs=1, log=None):
    """Train every requested family on identical per-seed data and collect
    metrics. Runs are independent, so seeds may fan out across processes;
    the reduction order is fixed by seed index either way."""
    norm = cfg.to_json_dict()
    indices = range(len(cfg.seeds))
    if jobs is None or jobs < 1:
        jobs = 1
    if jobs == 1 or len(cfg.seeds) == 1:
        records = []
        for i in indices:
            records.append(_seed_record(cfg, i))
            if log:
                log(f"seed {cfg.seeds[i]}: done ({i + 1}/{len(cfg.seeds)})")
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cfg.seeds))) as pool:
            records = list(pool.map(_run_one_seed, [norm] * len(cfg.seeds), indices))
        if log:
            log(f"{len(records)} seeds done across {min(jobs, len(cfg.seeds))} workers")
    return {
        "format": REPORT_FORMAT,
        "backend": BACKEND_NAME,
        "config": norm,
        "config_hash": canonical_hash(norm),
        "runs": records,
        "aggregate": aggregate_runs(records, cfg.families),
    }


# ---------------------------------------------------------------------------
# report io and scatter extraction

def _write_text_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_report(path, report):
    _write_text_atomic(path, json.dumps(report, sort_keys=True, indent=2) + "\n")


def load_report(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            report = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"report {path} is not valid JSON: line {exc.lineno}, column {exc.colno}"
        ) from exc
    if not isinstance(report, dict) or report.get("format") != REPORT_FORMAT:
        raise ConfigError(f"{path} is not a {REPORT_FORMAT} file")
    return report


SCATTER_PLANES = {"yz": (1, 2), "xz": (0, 2)}


def emit_scatter(report, plane, family, run_index=0):
    """Rows of (coord1, coord2, re_percent) for one family and run, one row
    per scorable test point. Values are exactly the report's."""
    if plane not in SCATTER_PLANES:
        raise ConfigError(f"plane must be one of {sorted(SCATTER_PLANES)}, got {plane!r}")
    runs = report.get("runs", [])
    if not 0 <= run_index < len(runs):
        raise ConfigError(f"run index {run_index} outside 0..{len(runs) - 1}")
    run = runs[run_index]
    if "test_inputs" not in run:
        raise ContractError("scatter data exists only for acoustic reports")
    fam = run["families"].get(family)
    if fam is None:
        raise ConfigError(f"report has no runs for family {family!r}")
    if fam["failure"] is not None:
        raise ConfigError(f"run {run_index} of {family} failed: {fam['failure']}")
    c1, c2 = SCATTER_PLANES[plane]
    pts = run["test_inputs"]
    return [
        (pts[i][c1], pts[i][c2], fam["re_percent"][i])
        for i in range(len(pts))
        if fam["re_included"][i]
    ]


def save_scatter_csv(path, report, plane, family, run_index=0):
    rows = emit_scatter(report, plane, family, run_index)
    lines = [f"{plane[0]},{plane[1]},re_percent"]
    lines += ["%.17g,%.17g,%.17g" % row for row in rows]
    _write_text_atomic(path, "\n".join(lines) + "\n")
    return len(rows)


def format_report(report):
    """Plain-text summary of a report: provenance, sizes, and the per-family
    aggregate table."""
    cfg = report["config"]
    lines = [
        f"problem {cfg['problem']}  backend {report['backend']}  "
        f"config {report['config_hash'][:12]}",
    ]
    if cfg["split"]:
        desc = "  ".join(f"{k} {v}" for k, v in sorted(cfg["split"].items()))
        lines.append(f"split: {desc}")
    runs = report["runs"]
    if runs:
        sizes = runs[0]["sizes"]
        size_txt = (
            f"sizes: train {sizes['n_train']} (used {sizes['n_train_used']}) "
            f"val {sizes['n_val']} test {sizes['n_test']}"
        )
        if "radius" in runs[0]:
            size_txt += f"  radius {runs[0]['radius']:.4f}"
        lines.append(size_txt)
    lines.append(f"seeds: {', '.join(str(r['seed']) for r in runs)}")
    lines.append("")
    header = (
        f"{'family':<12} {'runs':>4} {'fail':>4} "
        f"{'nMSE med':>10} {'nMSE mean':>10} {'nRMSE med':>10} {'raw med':>10}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for family, entry in sorted(report["aggregate"].items()):
        if entry["mse_normalized"] is None:
            lines.append(
                f"{family:<12} {entry['n_runs']:>4} {entry['n_failed']:>4} "
                f"{'-':>10} {'-':>10} {'-':>10} {'-':>10}"
            )
            continue
        lines.append(
            f"{family:<12} {entry['n_runs']:>4} {entry['n_failed']:>4} "
            f"{entry['mse_normalized']['median']:>10.4g} "
            f"{entry['mse_normalized']['mean']:>10.4g} "
            f"{entry['rmse_normalized']['median']:>10.4g} "
            f"{entry['mse_raw']['median']:>10.4g}"
        )
    failures = [
        (r["seed"], fam, row["failure"])
        for r in runs
        for fam, row in r["families"].items()
        if row["failure"] is not None
    ]
    for seed, fam, msg in failures:
        lines.append(f"FAILED seed {seed} {fam}: {msg}")
    return "\n".join(lines) + "\n"
