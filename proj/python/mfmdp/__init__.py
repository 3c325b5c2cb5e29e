"""Solvers and benchmarks for finite-space mean-field control.

The heavy lifting lives in the compiled extension; this package only
re-exports it. Installed wheels carry the extension inside the package,
in-tree builds put it next to the build directory, hence the fallback.
"""

try:
    from ._mfmdp import (
        CapError,
        JointSolution,
        MeanFieldSolution,
        Model,
        ValidationError,
        estimate_mn,
        exact_mn,
        kantorovich_dual,
        lift_gap,
        load_model,
        model_from_json,
        run_chaos_suite,
        solve_joint,
        solve_mean_field,
        wasserstein1,
    )
except ImportError:
    from _mfmdp import (
        CapError,
        JointSolution,
        MeanFieldSolution,
        Model,
        ValidationError,
        estimate_mn,
        exact_mn,
        kantorovich_dual,
        lift_gap,
        load_model,
        model_from_json,
        run_chaos_suite,
        solve_joint,
        solve_mean_field,
        wasserstein1,
    )

__all__ = [
    "CapError",
    "JointSolution",
    "MeanFieldSolution",
    "Model",
    "ValidationError",
    "estimate_mn",
    "exact_mn",
    "kantorovich_dual",
    "lift_gap",
    "load_model",
    "model_from_json",
    "run_chaos_suite",
    "solve_joint",
    "solve_mean_field",
    "wasserstein1",
]
