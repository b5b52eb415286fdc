//! Random Curie-Weiss model: Glauber dynamics and its deterministic limit.

pub mod analysis;
pub mod dynamics;

pub use analysis::{
    critical_beta, criticality_function, cw_clt_parameters, cw_stationary_states,
    linearized_cw, mckean_vlasov_cw, CwCltParameters, CwMvTrajectory, CwProfile,
    CwStationaryState, SpectralDecompositionCw, Stability, StationaryScan,
};
pub use dynamics::{
    cell_rates, cw_order_parameters, initial_cw_state, simulate_cw, AggregatedCwState,
    CwEvent, CwSimOptions, CwSnapshot, CwTrajectory,
};
