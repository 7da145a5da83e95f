//! Numerical stochastic calculus around semimartingale local time.
//!
//! The crate has five subsystems:
//!
//! * [`bv2d`] - two-parameter bounded-variation calculus: rectangle-increment
//!   measures, Vitali-type variation over refined partitions, Jordan
//!   decomposition, and one/two-parameter Lebesgue-Stieltjes integrals.
//! * [`pathsim`] - simulation of continuous semimartingales (Brownian motion
//!   and Euler-Maruyama Ito processes) on uniform grids, with stochastic
//!   integrals, realized quadratic variation, curve shifts and exit times.
//! * [`localtime`] - occupation-density estimation of the local-time field
//!   on a (time x level) grid, Tanaka-style estimators, time-Stieltjes
//!   integrals against local time, and the occupation-times identity.
//! * [`mollifier`] - the compactly supported bump kernel, directional
//!   two-parameter mollification, and pointwise convergence reports.
//! * [`itoformula`] - term-by-term evaluation of generalized Ito-type
//!   identities (smooth, bounded-variation-gradient, curve-jump and Ito
//!   process variants) with residual and convergence-rate reporting.
//!
//! All simulation is deterministic given `(seed, stream)`; the generator is
//! ChaCha12 and its identifier is exported as [`pathsim::RNG_ALGORITHM`].

pub mod bv2d;
pub mod itoformula;
pub mod localtime;
pub mod mollifier;
pub mod pathsim;
pub mod quad;

pub use bv2d::{
    jordan_decompose, ls_integral_1d, ls_integral_2d, rect_increment, sectional_variation,
    variation, Bv2dError, Function1D, JordanPair, JumpSet, Partition2D, Rect, RefinementPolicy,
    Surface2D, VariationResult,
};
pub use itoformula::{
    eval_curve, eval_ito_process, eval_semimartingale, krylov_check, residual_convergence,
    BvPart, Driver, EvalOptions, FormulaVariant, FunctionSpec, ItoFormulaError, KrylovReport,
    RateTable, SmoothPart, TermBreakdown, VariantFlags,
};
pub use localtime::{
    curve_local_time, dt_stieltjes, local_time_occupation, local_time_tanaka, occupation_check,
    FieldOptions, LevelGrid, LocalTimeConvention, LocalTimeField, OccupationCheck,
};
pub use mollifier::{
    bump, bump_deriv, bump_normalization, convergence_report, mollify, ConvergenceRow,
    DerivativeTargets, Direction, MollifierError, MollifierSpec, SmoothedSurface,
};
pub use pathsim::{
    first_exit, ito_integral, ito_integral_dm, ito_integral_dv, ito_integral_prefix,
    shift_by_curve, simulate_bm, simulate_bm_stream, simulate_ito, Curve, ItoProcessSpec,
    PathError, SemimartingalePath, TimeGrid,
};
