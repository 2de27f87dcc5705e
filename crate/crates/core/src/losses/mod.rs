//! Training losses and their weighted total.

mod robust;
mod terms;
mod total;

pub use robust::*;
pub use terms::*;
pub use total::*;
