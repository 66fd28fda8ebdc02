"""Experiment orchestration: source training, parameter-based transfer,
unsupervised fine-tuning, the cross-class generalization matrix and the
inverse (parameter-estimation) mode.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fourier, mlp
from .circuits import (CircuitClass, CircuitParams, PresetKind, SourceWaveform,
                       ode_coefficient_partials, ode_for_class, preset)
from .fitting import FitResult, TrainerConfig, fit
from .fourier import FourierNet
from .losses import InitialConditions, LossConfig, total_loss
from .mlp import Mlp, mlp_init
from .optimize import AdamState, Schedule, TrainingRole, adam_step, schedule_for
from .simulate import Dataset, simulate_circuit, split_dataset
from .stats import mse


class ArchitectureMismatch(ValueError):
    pass


FINETUNE_TRAIN_SPAN = (0.0, 0.5)   # fine-tuning interval
EVAL_SPAN = (0.5, 1.0)             # evaluation interval for analysis runs
FINETUNE_COLLOCATION = 1000


@dataclass
class RunRecord:
    family: str
    source_class: int | None
    target_class: int
    tl: bool | None
    seed: int | None
    n_units: int
    train_loss: float
    train_mse: float | None
    test_mse: float
    duration_s: float
    checkpoint_path: str | None = None
    log_path: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)

    def add(self, row: RunRecord) -> None:
        self.rows.append(row)

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump([r.to_dict() for r in self.rows], fh, indent=1)

    def to_csv(self, path: str) -> None:
        cols = ["family", "source_class", "target_class", "tl", "seed", "n_units",
                "train_loss", "train_mse", "test_mse", "duration_s",
                "checkpoint_path", "log_path"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.rows:
                d = r.to_dict()
                fh.write(",".join("" if d[c] is None else str(d[c]) for c in cols) + "\n")


def write_epoch_log(path: str, result: FitResult) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,lr,total,l_data,l_pde,l_ic\n")
        for row in result.history_rows():
            fh.write(",".join(repr(float(v)) if i else str(v)
                              for i, v in enumerate(row)) + "\n")


def _init_model(family: str, n_units: int, seed):
    if family == "fourier":
        return FourierNet.init(n_units, seed)
    if family == "baseline":
        return mlp_init(n_units, seed)
    raise ValueError(f"unknown model family {family!r}")


def _save_model(model, path: str, meta: dict) -> None:
    if isinstance(model, FourierNet):
        fourier.save_checkpoint(model, path, meta)
    else:
        mlp.save_checkpoint(model, path, meta)


def make_source_dataset(klass: CircuitClass, phi: CircuitParams | None = None,
                        dt: float = 1e-4, seed=None) -> Dataset:
    phi = phi or preset(klass, PresetKind.INITIAL)
    return simulate_circuit(klass, phi, 0.0, 1.0, dt=dt, seed=seed)


def _subsample(times: np.ndarray, values: np.ndarray, n: int):
    if n >= len(times):
        return times, values
    idx = np.unique(np.linspace(0, len(times) - 1, n).round().astype(int))
    return times[idx], values[idx]


def train_source(klass: CircuitClass, dataset: Dataset, n_units: int, seed,
                 family: str = "fourier", split_fraction: float = 0.5,
                 schedule: Schedule | None = None, grid_points: int | None = None,
                 trainer: TrainerConfig | None = None, checkpoint_path: str | None = None,
                 log_path: str | None = None):
    """Source-model training on simulated data (supervised + physics loss).

    grid_points subsamples the training split to a near-uniform grid for both
    the data and collocation terms (used to keep the baseline runs tractable).
    Returns (model, RunRecord, FitResult).
    """
    phi = CircuitParams.from_dict(dataset.meta["phi"])
    ode = ode_for_class(klass, phi)
    source = SourceWaveform.from_params(phi)
    train, test = split_dataset(dataset, split_fraction, seed=seed, mode="random")
    t_tr, y_tr = train.times, train.values
    if grid_points is not None:
        t_tr, y_tr = _subsample(t_tr, y_tr, grid_points)
    ic = dataset.initial_state()
    ics = InitialConditions(t0=dataset.times[0],
                            values=ic if ic is not None else np.zeros(ode.order))
    config = LossConfig(collocation_times=t_tr, ics=ics, data_times=t_tr, data_values=y_tr)
    if schedule is None:
        role = TrainingRole.SOURCE_FOURIER if family == "fourier" else TrainingRole.SOURCE_BASELINE
        schedule = schedule_for(role)
    model = _init_model(family, n_units, seed)
    if family == "baseline" and trainer is None:
        trainer = TrainerConfig(batch_size=len(t_tr))  # full batch for the baseline
    result = fit(model, ode, source, config, schedule, seed=seed, trainer=trainer)
    model = result.model
    pred = model.derivative_stack(test.times, 0)[0]
    test_mse = mse(pred, test.values)
    train_pred = model.derivative_stack(t_tr, 0)[0]
    record = RunRecord(
        family=family, source_class=klass.value, target_class=klass.value, tl=None,
        seed=seed, n_units=n_units, train_loss=result.best_loss,
        train_mse=mse(train_pred, y_tr), test_mse=test_mse,
        duration_s=result.duration, checkpoint_path=checkpoint_path, log_path=log_path,
    )
    meta = {"class": klass.value, "phi": phi.to_dict(), "seed": seed,
            "family": family, "schedule": list(schedule.segments),
            "role": "source", "test_mse": test_mse}
    if checkpoint_path:
        _save_model(model, checkpoint_path, meta)
    if log_path:
        write_epoch_log(log_path, result)
    return model, record, result


def transfer(source_model, target_klass: CircuitClass, phi_analysis: CircuitParams,
             expected_units: int | None = None):
    """Parameter-based transfer: the target model starts as an exact copy of
    the source parameters. Architectures must agree."""
    if isinstance(source_model, FourierNet):
        units = source_model.n_neurons
    elif isinstance(source_model, Mlp):
        units = source_model.n_hidden_layers
    else:
        raise TypeError("unsupported model type")
    if expected_units is not None and expected_units != units:
        raise ArchitectureMismatch(
            f"source has {units} units, target expects {expected_units}")
    ode_for_class(target_klass, phi_analysis)  # validates phi for the class
    return source_model.copy()


def _finetune_truth(target_klass: CircuitClass, phi: CircuitParams, dt: float = 1e-4):
    truth = simulate_circuit(target_klass, phi, 0.0, EVAL_SPAN[1], dt=dt)
    return truth


def fine_tune(model, target_klass: CircuitClass, phi_analysis: CircuitParams,
              tl: bool = True, seed=None, family: str = "fourier",
              schedule: Schedule | None = None, trainer: TrainerConfig | None = None,
              checkpoint_path: str | None = None, log_path: str | None = None,
              source_class: int | None = None):
    """Unsupervised fine-tuning: physics + initial-condition terms only.

    With tl=False the model is re-initialized from scratch (the ablation);
    ground-truth labels are used exclusively for the reported test MSE.
    Returns (model, RunRecord, FitResult).
    """
    ode = ode_for_class(target_klass, phi_analysis)
    source = SourceWaveform.from_params(phi_analysis)
    if not tl:
        n_units = model.n_neurons if isinstance(model, FourierNet) else model.n_hidden_layers
        model = _init_model(family, n_units, seed)
    else:
        model = model.copy()
    truth = _finetune_truth(target_klass, phi_analysis)
    ics = InitialConditions(t0=truth.times[0], values=truth.initial_state())
    tcol = np.linspace(FINETUNE_TRAIN_SPAN[0], FINETUNE_TRAIN_SPAN[1], FINETUNE_COLLOCATION)
    config = LossConfig(collocation_times=tcol, ics=ics)
    if schedule is None:
        role = (TrainingRole.FINETUNE_FOURIER if family == "fourier"
                else TrainingRole.FINETUNE_BASELINE)
        schedule = schedule_for(role)
    if family == "baseline" and trainer is None:
        trainer = TrainerConfig(batch_size=len(tcol))
    result = fit(model, ode, source, config, schedule, seed=seed, trainer=trainer)
    model = result.model
    eval_ds = truth.restrict(*EVAL_SPAN)
    pred = model.derivative_stack(eval_ds.times, 0)[0]
    test_mse = mse(pred, eval_ds.values)
    n_units = model.n_neurons if isinstance(model, FourierNet) else model.n_hidden_layers
    record = RunRecord(
        family=family, source_class=source_class, target_class=target_klass.value,
        tl=tl, seed=seed, n_units=n_units, train_loss=result.best_loss,
        train_mse=None, test_mse=test_mse, duration_s=result.duration,
        checkpoint_path=checkpoint_path, log_path=log_path,
    )
    meta = {"class": target_klass.value, "phi": phi_analysis.to_dict(), "seed": seed,
            "family": family, "schedule": list(schedule.segments),
            "role": "finetune", "tl": tl, "test_mse": test_mse}
    if checkpoint_path:
        _save_model(model, checkpoint_path, meta)
    if log_path:
        write_epoch_log(log_path, result)
    return model, record, result


def run_generalization_matrix(sources: dict, seed: int = 0,
                              workdir: str | None = None) -> ExperimentReport:
    """Fine-tune every source model on both other classes (6 off-diagonal
    cells); diagonal cells belong to the intra-class experiment."""
    for klass in (CircuitClass.CLASS1, CircuitClass.CLASS2, CircuitClass.CLASS3):
        if klass not in sources:
            raise ValueError(f"missing source checkpoint for {klass}")
    report = ExperimentReport()
    for src_klass, src_model in sorted(sources.items(), key=lambda kv: kv[0].value):
        for tgt_klass in (CircuitClass.CLASS1, CircuitClass.CLASS2, CircuitClass.CLASS3):
            if tgt_klass is src_klass:
                continue
            phi = preset(tgt_klass, PresetKind.ANALYSIS)
            target = transfer(src_model, tgt_klass, phi)
            ckpt = None
            if workdir:
                ckpt = os.path.join(workdir, f"t{tgt_klass.value}_s{src_klass.value}.ckpt")
            cell_seed = seed + 10 * src_klass.value + tgt_klass.value
            _, record, _ = fine_tune(target, tgt_klass, phi, tl=True, seed=cell_seed,
                                     checkpoint_path=ckpt,
                                     source_class=src_klass.value)
            report.add(record)
    return report


INVERSE_ROUNDS = 4
INVERSE_PHI_STEPS = 4000
INVERSE_PHI_LR = 0.005  # multiplicative step scale in log-parameter space
INVERSE_NEURONS = 20


def inverse_fit(dataset: Dataset, klass: CircuitClass, free, phi_init: CircuitParams,
                seed=None, rounds: int = INVERSE_ROUNDS, n_units: int = INVERSE_NEURONS,
                trainer: TrainerConfig | None = None):
    """Estimate circuit parameters from measured current (inverse mode).

    Alternates a surrogate fit of the current (data-anchored: the physics term
    is nondimensionalized by the forcing power so it regularizes derivatives
    without locking the wrong parameters in) with an ADAM descent of the
    physics residual over the free parameters. Free parameters are optimized
    in log space, which keeps them positive by construction.

    Returns (phi_estimate, model, trajectory) where trajectory holds the phi
    estimate after every round.
    """
    free = tuple(free)
    if not free:
        raise ValueError("free parameter set must be nonempty; "
                         "use train_source for forward problems")
    for p in free:
        if p not in ("R", "L", "C"):
            raise ValueError(f"cannot estimate {p!r}; free must be within R, L, C")
    phi = phi_init
    train, _ = split_dataset(dataset, 0.5, seed=seed, mode="random")
    ics_vals = dataset.initial_state()
    order = ode_for_class(klass, phi).order
    ics = InitialConditions(t0=dataset.times[0],
                            values=ics_vals if ics_vals is not None else np.zeros(order))
    source = SourceWaveform.from_params(phi)
    forcing = ode_for_class(klass, phi).forcing_signal(source, train.times)
    w_pde = 1.0 / float(np.mean(forcing ** 2))
    model = FourierNet.init(n_units, seed)
    trajectory = []
    for rnd in range(rounds):
        ode = ode_for_class(klass, phi)
        config = LossConfig(collocation_times=train.times, ics=ics,
                            data_times=train.times, data_values=train.values,
                            w_pde=w_pde)
        if rnd == 0:
            schedule = schedule_for(TrainingRole.SOURCE_FOURIER)
        else:
            schedule = Schedule(((150, 1e-3),))
        result = fit(model, ode, source, config, schedule, seed=seed, trainer=trainer)
        model = result.model
        phi = _phi_descent(model, klass, phi, free, train.times)
        trajectory.append(phi.to_dict())
    return phi, model, trajectory


def _phi_descent(model, klass: CircuitClass, phi: CircuitParams, free, tcol: np.ndarray):
    """ADAM over log(free parameters) minimizing the physics residual with the
    surrogate frozen."""
    source = SourceWaveform.from_params(phi)
    order = ode_for_class(klass, phi).order
    stack = model.derivative_stack(tcol, order)
    forcing = ode_for_class(klass, phi).forcing_signal(source, tcol)
    u = np.log([getattr(phi, p) for p in free])
    state = AdamState.for_params(u)
    for _ in range(INVERSE_PHI_STEPS):
        vals = dict(zip(free, np.exp(u)))
        cur = phi.replace(**vals)
        ode = ode_for_class(klass, cur)
        r = ode.lhs_array() @ stack - forcing
        partials = ode_coefficient_partials(klass, cur)
        grad = np.array([2.0 * np.mean(r * (partials[p] @ stack)) * vals[p] for p in free])
        u = adam_step(state, u, grad, INVERSE_PHI_LR)
    return phi.replace(**dict(zip(free, np.exp(u))))


def evaluate_model(model, dataset: Dataset, t_min: float = -np.inf,
                   t_max: float = np.inf) -> float:
    ds = dataset.restrict(t_min, t_max)
    pred = model.derivative_stack(ds.times, 0)[0]
    return mse(pred, ds.values)
