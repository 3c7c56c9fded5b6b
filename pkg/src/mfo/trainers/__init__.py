from .base import (
    ConfigMismatchError,
    EpochReport,
    RestoreError,
    Trainer,
    TrainerState,
    decode_state,
    encode_state,
)
from .surrogate import SurrogateTask, SurrogateTrainer, progress_rate
from .toy_sgd import ToySGDTrainer, make_blobs, sgd_momentum_step


def build_trainer(spec, r, task_seed=0):
    """Construct a trainer from its config-file spec.

    Surrogate specs may pin ``task_seed``; otherwise the caller's seed picks the task.
    """
    spec = dict(spec)
    kind = spec.pop("kind", "surrogate")
    if kind == "surrogate":
        spe = spec.pop("steps_per_epoch", 10)
        spec.pop("r", None)
        seed = spec.pop("task_seed", task_seed)
        hidden = {k: spec.pop(k) for k in ("log_l_opt", "log_w_opt") if k in spec}
        spec.pop("seed", None)
        if len(hidden) == 2:
            task = SurrogateTask(hidden["log_l_opt"], hidden["log_w_opt"], seed=int(seed), **spec)
        else:
            task = SurrogateTask.from_seed(seed, **spec)
        return SurrogateTrainer(task, r, steps_per_epoch=spe)
    if kind == "toy_sgd":
        return ToySGDTrainer(**spec)
    raise ValueError(f"unknown trainer kind {kind!r}")


__all__ = [
    "ConfigMismatchError", "EpochReport", "RestoreError", "SurrogateTask", "SurrogateTrainer",
    "ToySGDTrainer", "Trainer", "TrainerState", "build_trainer", "decode_state", "encode_state",
    "make_blobs", "progress_rate", "sgd_momentum_step",
]
