from .pools import CouplingError, CoupledRun, PoolSpec, gap_supremum, mdsp_paths_identical, run_coupled

__all__ = ["CouplingError", "CoupledRun", "PoolSpec", "gap_supremum", "mdsp_paths_identical", "run_coupled"]
