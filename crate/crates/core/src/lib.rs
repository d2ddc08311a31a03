//! One fast machine, many slow machines: exact-arithmetic simulation of online
//! scheduling policies, the offline optimum, and a lower-bound adversary.

pub mod adversary;
pub mod analysis;
pub mod campaign;
pub mod engine;
pub mod exactnum;
pub mod model;
pub mod offline;
pub mod scalar;
pub mod schedulers;
pub mod tapgen;

pub use engine::{simulate, Command, CommitmentModel, SchedulerPolicy, Simulation};
pub use exactnum::QNum;
pub use model::{Tap, Task, Trace};
pub use offline::{opt, OptResult};
pub use scalar::{Approx, NumericMode, Scalar};
pub use schedulers::{BailToSlow, HPolicy, KeepFast, PolicyKind};
