//! Random Kuramoto rotators: finite-`N` diffusion and its deterministic limit.

pub mod analysis;
pub mod dynamics;

pub use analysis::{
    euler_kernel_rate, kuramoto_clt_system, kuramoto_stationary, linearized_kuramoto, mckean_vlasov_kuramoto,
    solve_r_star, theta_critical, CriticalBranch, KuramotoCltSystem, KuramotoDensity,
    KuramotoStationaryState, SpectralDecompositionK, ThetaCritical,
};
pub use dynamics::{
    initial_kuramoto_state, kuramoto_order_parameters, order_parameter, simulate_kuramoto,
    step_kuramoto, step_pairwise, KuramotoSeries, KuramotoStepper, OrderParameterSample, RotatorState,
};
