//! Numerical certification of the quantitative estimates: the Lorentz-ball
//! gradient inequality, the small-data threshold constants, the regularized
//! flux's structure conditions, and the scaling identities.

pub mod estimate;
pub mod lorentz;
pub mod opreg;
pub mod scaling;
pub mod small_data;

pub use estimate::{
    calibrate_hessian_constant, evaluate_estimate_grid, evaluate_estimate_radial, Calibration,
    EstimateReport, RadialEstimateInput,
};
pub use lorentz::{euclidean_ball_mask, lorentz_ball_mask, lorentz_ball_mask_fn};
pub use opreg::{RegularizedOperator, StructureReport};
pub use scaling::{scaling_check, ScalingReport};
pub use small_data::{small_data_report, small_data_threshold, SmallDataInput, SmallDataReport};
