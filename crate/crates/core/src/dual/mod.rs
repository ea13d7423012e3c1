pub mod interp;
mod policy;
mod recover;

pub use policy::{Controls, PolicyState, PolicyTable, Quality, SwitchEvent, SwitchingPolicy};
pub use recover::{recover_p, ConsistencyReport, ConvexityScan, DualSolution, ViReport, WealthInversion};
