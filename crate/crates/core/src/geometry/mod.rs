//! Camera rays, poses and the composition of factored quantities into
//! local, world-frame and metric pointmaps.

mod camera;
mod pointmap;
mod pose;

pub use camera::*;
pub use pointmap::*;
pub use pose::*;
