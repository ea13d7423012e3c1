mod assumptions;
mod costs;
mod derived;
mod params;

pub use assumptions::{check_initial_wealth, validate_assumptions, AssumptionCheck, AssumptionId, AssumptionReport};
pub use costs::{CostFn, CostSchedule, CubicSpline};
pub use derived::{solve_t1, DerivedSchedule};
pub use params::{Job, ModelParams};
