//! Discretized tangency geometry for plane curve families: tangency
//! rectangles and prisms, incidence counting, rasterized curve
//! neighborhoods, maximal operators, (δ,α)-sets and numerical lemma checks.

pub mod ad;
pub mod cinematic;
pub mod curve;
pub mod error;
pub mod gmt;
pub mod incidence;
pub mod maximal;
pub mod oracles;
pub mod runner;
pub mod poly;
pub mod raster;
pub mod rect;

pub use error::{Error, Result};
