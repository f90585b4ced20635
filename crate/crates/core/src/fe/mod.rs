//! Fixed-effects least squares: alternating-projection absorption, (weighted)
//! OLS on the absorbed design, cluster-robust covariance, inverse
//! inclusion-probability weights and two-sample balance tests.

mod absorb;
mod balance;
mod fit;
mod ipw;

pub use absorb::{absorb, singleton_mask, AbsorbOptions, Absorbed, Absorber, Convergence};
pub use balance::{balance_test, render_balance_table, BalanceRow};
pub use fit::{fit, FitOptions, FitResult, RegressionSpec, SmallSampleCorrection};
pub use ipw::{ipw_weights, IpwCell, IpwResult};
