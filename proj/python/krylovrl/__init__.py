"""Python interface to the krylovrl solver core."""

from _krylovrl import (  # noqa: F401
    ActionSpace,
    BSParams,
    CycleRecord,
    LinearSystem,
    PolicyParameters,
    PortfolioProblem,
    PpoConfig,
    SolveOutcome,
    SolveResult,
    SolveTrace,
    SolverConfig,
    SparseMatrix,
    analytic_bs_call,
    assemble_kkt,
    bs_grid_price,
    csr_from_triplets,
    generate_covariance,
    init_policy,
    load_policy,
    policy_forward,
    read_matrix_market,
    read_vector_file,
    save_policy,
    solve,
    solve_with_policy,
    split_kkt_solution,
    spmv,
    train_on_kkt_family,
    write_matrix_market,
    write_vector_file,
)

__all__ = [name for name in dir() if not name.startswith("_")]
