"""Physics-informed learning lab for linear RLC circuits: ground-truth ODE
simulation, a shallow Fourier network with exact derivatives, a tanh-MLP
baseline with Taylor-jet autodiff, physics losses, ADAM training and
transfer-learning experiment drivers."""

from .circuits import (CircuitClass, CircuitParams, LinearOde, PresetKind,
                       SourceWaveform, ode_for_class, preset, source_derivative)
from .fourier import FourierNet
from .losses import InitialConditions, LossConfig, residual, total_loss
from .mlp import Mlp, TaylorJet, jet_eval, mlp_init
from .optimize import AdamState, Schedule, TrainingRole, adam_step, schedule_for
from .simulate import (CompanionSystem, Dataset, integrate_rk4, read_csv,
                       simulate_circuit, split_dataset, to_companion, write_csv)
from .stats import RankSumResult, mse, wilcoxon_rank_sum

__version__ = "0.1.0"
