//! Empty container repositioning with fleet deployment: a seeded
//! discrete-event simulator, repositioning policies, a min-cost-flow
//! planner, a learned fleet configurator, search baselines and the
//! configure-then-conquer pipeline that ties them together.

pub mod cc;
pub mod configurator;
pub mod domain;
pub mod error;
pub mod eval;
pub mod gen;
pub mod planner;
pub mod policy;
pub mod search;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
