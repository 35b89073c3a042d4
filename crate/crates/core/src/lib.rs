//! Classical correlations generated from shared quantum states under
//! depolarizing noise: reachability, PSD factorizations and cost bounds.

pub mod bounds;
pub mod checks;
pub mod cli;
pub mod corrmat;
pub mod error;
pub mod factorize;
pub mod io;
pub mod linalg;
pub mod quantum;
pub mod reach;

pub use corrmat::Correlation;
pub use error::{Error, Result};
