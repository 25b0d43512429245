//! Numerical construction of multi-spike standing waves for
//! `ε^{2s}(-Δ)^s u + V(x) u - u^p = 0` on a periodic box.
//!
//! The pipeline follows a Lyapunov–Schmidt reduction: a ground state `w`
//! is solved once, rescaled and translated into a spike ansatz `W_q`, corrected
//! by a projected fixed point `Φ(q)`, and the spike centers are finally chosen
//! so that the projection multipliers `c_ij` vanish.

pub mod ansatz;
pub mod degree;
pub mod error;
pub mod grid;
pub mod ground_state;
pub mod kernel;
pub mod krylov;
pub mod newton;
pub mod norms;
pub mod params;
pub mod potential;
pub mod rates;
pub mod reduced;
pub mod reduction;
pub mod spectral;
pub mod spectrum;

pub use ansatz::{build_ansatz, config_valid, AnsatzBundle, AnsatzOptions, ConfigCheck, SpikeConfig};
pub use degree::brouwer_degree;
pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use ground_state::{
    decay_fit, energy, energy_with_potential, rescale, solve_ground_state, spike_profile, DecayFit,
    GroundState, SolverOptions,
};
pub use kernel::{kernel_profile, KernelProfile};
pub use norms::{weighted_sup_norm, WeightedNorm};
pub use params::FracParams;
pub use potential::{Bump, Potential, PotentialSpec};
pub use rates::{fit_rate, RateFit};
pub use reduced::{
    asymptotic_energy, cluster_search, critical_point_search, reduced_energy, AsymptoticModel, BoxRegion,
    PairConstant, ReducedOptions, ReducedReport, Region, SearchMode, SearchOptions, SearchOutcome, SearchStep,
};
pub use reduction::{
    full_newton_solve, multiplier_estimate, nonlinear_correction, nonlinear_correction_from, projected_solve, CorrectionOptions,
    CorrectionResult, HistoryRow, MultiplierEstimate, Multipliers, NewtonResult,
};
pub use newton::NewtonOptions;
pub use spectral::{fractional_laplacian, resolvent, SpectralOps};
pub use spectrum::{linearization_spectrum, SpectrumSummary};
