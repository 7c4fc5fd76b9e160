//! UE-to-UAV association for a fixed deployment: the relaxed min-max load
//! LP and its 0.5-threshold rounding.

use serde::{Deserialize, Serialize};

use crate::channel::{Geometry, RateModel};
use crate::convex::{solve_lp, LinearProgram};
use crate::optimizer::Deployment;
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Dense `N x M` matrix of per-pair service times (seconds), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TimeMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("times", "need a non-empty rectangular matrix"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn num_ues(&self) -> usize {
        self.rows
    }

    pub fn num_uavs(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, ue: usize, uav: usize) -> f64 {
        self.data[ue * self.cols + uav]
    }

    pub fn row(&self, ue: usize) -> &[f64] {
        &self.data[ue * self.cols..(ue + 1) * self.cols]
    }

    /// Per-UAV load of `assoc` and its maximum.
    pub fn evaluate(&self, assoc: &Association) -> (f64, Vec<f64>) {
        let mut loads = vec![0.0; self.cols];
        for (i, &j) in assoc.assignment().iter().enumerate() {
            loads[j] += self.get(i, j);
        }
        (loads.iter().copied().fold(0.0, f64::max), loads)
    }
}

/// Binary association stored as one UAV index per UE, so every row of the
/// equivalent 0/1 matrix holds exactly one 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Association {
    assignment: Vec<usize>,
    num_uavs: usize,
}

impl Association {
    pub fn new(assignment: Vec<usize>, num_uavs: usize) -> Result<Self> {
        if let Some(i) = assignment.iter().position(|&j| j >= num_uavs) {
            return Err(Error::invalid(
                format!("association[{i}]"),
                format!("UAV index out of range (M = {num_uavs})"),
            ));
        }
        Ok(Self { assignment, num_uavs })
    }

    pub fn from_matrix(matrix: &[Vec<u8>]) -> Result<Self> {
        let m = matrix.first().map_or(0, Vec::len);
        let mut assignment = Vec::with_capacity(matrix.len());
        for (i, row) in matrix.iter().enumerate() {
            let ones: Vec<usize> = row.iter().enumerate().filter(|(_, &v)| v == 1).map(|(j, _)| j).collect();
            if row.len() != m || ones.len() != 1 || row.iter().any(|&v| v > 1) {
                return Err(Error::invalid(format!("association[{i}]"), "row must hold exactly one 1"));
            }
            assignment.push(ones[0]);
        }
        Self::new(assignment, m)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn uav_of(&self, ue: usize) -> usize {
        self.assignment[ue]
    }

    pub fn num_ues(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }

    /// UE indices served by `uav`, ascending.
    pub fn served_by(&self, uav: usize) -> Vec<usize> {
        self.assignment.iter().enumerate().filter(|(_, &j)| j == uav).map(|(i, _)| i).collect()
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        self.assignment
            .iter()
            .map(|&j| {
                let mut row = vec![0u8; self.num_uavs];
                row[j] = 1;
                row
            })
            .collect()
    }
}

/// Row-stochastic fractional association from the LP relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAssociation {
    pub values: Vec<Vec<f64>>,
    /// LP objective: the relaxed min-max load.
    pub mu: f64,
}

impl FractionalAssociation {
    pub fn new(values: Vec<Vec<f64>>, mu: f64) -> Result<Self> {
        for (i, row) in values.iter().enumerate() {
            if row.iter().any(|v| !(-1e-9..=1.0 + 1e-9).contains(v)) {
                return Err(Error::invalid(format!("fractional[{i}]"), "entries must lie in [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-8 {
                return Err(Error::invalid(format!("fractional[{i}]"), format!("row sums to {sum}")));
            }
        }
        Ok(Self { values, mu })
    }
}

/// Service time `D_i / r_ij + F_i / f_max` of every UE at every UAV of the
/// deployment, using `model` for the rate.
pub fn service_time_matrix_with(scenario: &Scenario, deployment: &Deployment, model: RateModel) -> TimeMatrix {
    let n = scenario.num_ues();
    let m = deployment.len();
    let f_max = scenario.fleet.cpu_hz;
    let mut data = Vec::with_capacity(n * m);
    for ue in &scenario.ues {
        let gamma = scenario.channel.snr_scale(ue.tx_power_w);
        let compute = ue.cycles / f_max;
        for uav in deployment.uavs() {
            let g = Geometry::new(uav.q, uav.h, ue.position());
            let rate = model.rate(&scenario.channel, g.dist_sq(), g.elev_sine, gamma);
            data.push(ue.data_bits / rate + compute);
        }
    }
    TimeMatrix { rows: n, cols: m, data }
}

/// Service-time matrix under the elevation-dependent outage rate.
pub fn service_time_matrix(scenario: &Scenario, deployment: &Deployment) -> TimeMatrix {
    service_time_matrix_with(scenario, deployment, RateModel::Rician)
}

/// Solve `min mu  s.t.  mu >= sum_i a_ij t_ij (all j),  sum_j a_ij = 1,
/// 0 <= a_ij <= 1`.
///
/// The upper bound `a_ij <= 1` is implied by the row sums and non-negativity
/// and is left out of the LP.
pub fn solve_relaxed(times: &TimeMatrix) -> Result<FractionalAssociation> {
    let (n, m) = (times.num_ues(), times.num_uavs());
    if times.data.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid("times", "service times must be finite and positive"));
    }
    let var = |i: usize, j: usize| 1 + i * m + j;
    let mut c = vec![0.0; 1 + n * m];
    c[0] = 1.0;
    let mut lp = LinearProgram::new(c);
    for j in 0..m {
        let mut row = vec![0.0; 1 + n * m];
        row[0] = -1.0;
        for i in 0..n {
            row[var(i, j)] = times.get(i, j);
        }
        lp.add_le(row, 0.0);
    }
    for i in 0..n {
        let mut row = vec![0.0; 1 + n * m];
        for j in 0..m {
            row[var(i, j)] = 1.0;
        }
        lp.add_eq(row, 1.0);
    }
    let sol = solve_lp(&lp, 1e-9);
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("association LP ended with {:?}", sol.status)));
    }
    let values = (0..n)
        .map(|i| (0..m).map(|j| sol.x[var(i, j)].clamp(0.0, 1.0)).collect())
        .collect();
    FractionalAssociation::new(values, sol.x[0])
}

/// Threshold rounding: the first entry `>= 0.5` of each row becomes 1. Rows
/// without such an entry (possible when the LP basis splits a UE three or
/// more ways) fall back to the row argmax, lowest index on ties.
pub fn round(frac: &FractionalAssociation) -> Association {
    let m = frac.values.first().map_or(0, Vec::len);
    let assignment = frac
        .values
        .iter()
        .map(|row| {
            row.iter().position(|&v| v >= 0.5).unwrap_or_else(|| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                    .0
            })
        })
        .collect();
    Association { assignment, num_uavs: m }
}
