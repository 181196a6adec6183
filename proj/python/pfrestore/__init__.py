"""Power-flow restoration with learned measurement weights."""

from ._core import (
    Error,
    Network,
    ScenarioRecord,
    accumulate_gradient,
    canonical_layout,
    default_initial_weights,
    eval_H,
    eval_h,
    evaluate,
    gen_load_scenarios,
    load_case,
    lpac_dataset,
    newton_pf,
    parse_case,
    restoration_loss,
    solution_sensitivity,
    solve_lpac,
    split_indices,
    synth_dataset,
    train_weights,
    wls_restore,
    write_case,
)

__all__ = [
    "Error",
    "Network",
    "ScenarioRecord",
    "accumulate_gradient",
    "canonical_layout",
    "default_initial_weights",
    "eval_H",
    "eval_h",
    "evaluate",
    "gen_load_scenarios",
    "load_case",
    "lpac_dataset",
    "newton_pf",
    "parse_case",
    "restoration_loss",
    "solution_sensitivity",
    "solve_lpac",
    "split_indices",
    "synth_dataset",
    "train_weights",
    "wls_restore",
    "write_case",
]
