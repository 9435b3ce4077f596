from ._twostage import (
    BprParams,
    Error,
    SyntheticProblem,
    TransportProblem,
    dual_value,
    evaluate_dual,
    inverse_link_time,
    link_time,
    primal_value,
    run_synthetic,
    run_transport,
    sigma,
    sigma_star,
    sinkhorn,
    smooth_trace,
)

__all__ = [
    "BprParams",
    "Error",
    "SyntheticProblem",
    "TransportProblem",
    "dual_value",
    "evaluate_dual",
    "inverse_link_time",
    "link_time",
    "primal_value",
    "run_synthetic",
    "run_transport",
    "sigma",
    "sigma_star",
    "sinkhorn",
    "smooth_trace",
]
