//! Exact numerics for the distortion-perception tradeoff of fixed-rate
//! lossy compression on finite discrete sources.
//!
//! Everything here is computed without sampling: decoders are probability
//! tables, expectations are finite sums, and Wasserstein distances come
//! from exact transport and linear programs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augmented;
pub mod codec;
pub mod dist;
pub mod error;
pub mod format;
pub mod lp;
pub mod tradeoff;
pub mod transport;
pub mod verify;

pub use augmented::{
    augmented_objective, augmented_support, beta_to_lambda, conditioning_equivalence, phase_csv,
    phase_sweep, solve_augmented, AugmentedSolution, PhaseFlag,
};
pub use codec::{
    check_zd_xd_bijective, codebook_size, decoder_output_dist, distortion,
    exhaustive_optimal_encoder, lloyd_train, mmse_decoder_for, optimal_1d_quantizer,
    optimal_encoder, perceptual_decoder_for, Certificate, Codec, Decoder, DeterministicDecoder,
    Encoder, LloydOptions, LloydOutcome, OptimalPair, StochasticDecoder,
};
pub use dist::{
    builtin_source, conditional_x_given_z, expectation, joint_from_encoder, make_distribution,
    DiscreteDistribution, JointXZ, Point, SourceSpec,
};
pub use error::{Error, Result};
pub use tradeoff::{
    alpha_for_perception, constrained_oracle, dp_derivatives, evaluate_point, interpolate,
    mmse_endpoint, oracle_support, predicted_distortion, predicted_perception, sweep, sweep_csv,
    universal_encoder_check, Endpoint, InterpolatedDecoder, OracleSolution, TradeoffPoint,
    UniversalityReport,
};
pub use transport::{
    solve_transport_lp, w1_exact, w2sq_exact, w_1d_closed_form, Coupling, Order, Transport,
    TransportPlan,
};
pub use verify::{fit_pair, verify, Check, FittedPair, Method, VerifyOptions, VerifyReport};
