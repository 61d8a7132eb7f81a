"""Multi-catch scaling environments, the Nibbler agent, baselines, and a
scaling-benchmark harness."""

from .agent import NibblerAgent, NibblerConfig, default_config
from .baselines import BaselineAgent, BaselineConfig
from .gvf import (
    GvfQuestion,
    LinearVQ,
    QuestionSlot,
    answer_update,
    discounted_return,
    epsilon_greedy,
    linear_reward_model_update,
    linear_td0,
    main_qv_update,
)
from .harness import (
    AlgorithmSpec,
    EnvSpec,
    ExperimentConfig,
    run_experiment,
    run_single,
    run_sweep,
)
from .metrics import (
    RewardTracker,
    RunLog,
    doubling_ratio,
    smoothed_average,
    timesteps_to_threshold,
)
from .multicatch import (
    Action,
    BoardConfig,
    BoardState,
    MultiCatchEnv,
    Phase,
    board_observe,
    board_step,
    make_heterogeneous,
    make_multicatch,
)
from .nets import DenseNet, co_opt, init_dense, reinit_input_column
from .selection import SelectionState, incremental_top

__all__ = [
    "Action",
    "AlgorithmSpec",
    "BaselineAgent",
    "BaselineConfig",
    "BoardConfig",
    "BoardState",
    "DenseNet",
    "EnvSpec",
    "ExperimentConfig",
    "GvfQuestion",
    "LinearVQ",
    "MultiCatchEnv",
    "NibblerAgent",
    "NibblerConfig",
    "Phase",
    "QuestionSlot",
    "RewardTracker",
    "RunLog",
    "SelectionState",
    "answer_update",
    "board_observe",
    "board_step",
    "co_opt",
    "default_config",
    "discounted_return",
    "doubling_ratio",
    "epsilon_greedy",
    "incremental_top",
    "init_dense",
    "linear_reward_model_update",
    "linear_td0",
    "main_qv_update",
    "make_heterogeneous",
    "make_multicatch",
    "reinit_input_column",
    "run_experiment",
    "run_single",
    "run_sweep",
    "smoothed_average",
    "timesteps_to_threshold",
]
