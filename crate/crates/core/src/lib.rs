//! Joint 3D placement and user association for a fleet of edge-computing
//! UAVs.
//!
//! The crate minimizes the completion time of the slowest UAV (upload plus
//! compute time of every task it serves) by alternating between an
//! association linear program, a horizontal-position convex subproblem and
//! an altitude convex subproblem. The non-convex rate and elevation
//! constraints are replaced by first-order global under-estimators that are
//! re-expanded every outer iteration.
//!
//! Module map:
//!
//! * [`channel`]: distance/elevation geometry and the logistic outage-rate model.
//! * [`scenario`]: UE layouts, fleet limits, file round-trip, seeded generation.
//! * [`convex`]: dense two-phase simplex and a log-barrier Newton solver.
//! * [`association`]: relaxed association LP and 0.5-threshold rounding.
//! * [`placement`]: rate/elevation lower bounds and the per-UAV subproblems.
//! * [`optimizer`]: the block-coordinate outer loop and the HPO/VPO/CLBO baselines.
//! * [`oracle`]: brute-force and numerical checks used to validate the above.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod association;
pub mod channel;
pub mod convex;
mod error;
pub mod optimizer;
pub mod oracle;
pub mod placement;
pub mod scenario;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// A point on the horizontal plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Squared Euclidean distance to `other`.
    #[inline]
    pub fn dist_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}
