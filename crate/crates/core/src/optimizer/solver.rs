//! Levenberg-Marquardt over right-retracted pose increments.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

use super::graph::{FactorGraph, VarKey};
use super::OptimizerError;
use crate::geometry::Pose;
use crate::sim::{NoiseSpec, Sigma, SIGMA_FLOOR};

/// Largest system solved densely; bigger ones use sparse Cholesky.
pub const DENSE_LIMIT: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub lambda_init: f64,
    /// Stop once an accepted step lowers the cost by less than this
    /// fraction.
    pub tolerance: f64,
    /// Contact distance weight (1/m^2).
    pub w_p: f64,
    /// Contact direction weight.
    pub w_q: f64,
    /// Odometry covariance over `[rot, trans]`.
    pub odom_cov: Matrix6<f64>,
    /// Measurement covariance over `[rot, trans]`.
    pub meas_cov: Matrix6<f64>,
    /// Object priors in Stage II use `meas_cov / prior_scale`.
    pub prior_scale: f64,
    /// Square-root weight of the gauge prior on the first robot pose.
    pub gauge_weight: f64,
    pub stage1_every: usize,
    pub stage2_every: usize,
}

fn diag_cov(s: Sigma) -> Matrix6<f64> {
    let (r, t) = (s.rot * s.rot, s.trans * s.trans);
    Matrix6::from_diagonal(&Vector6::new(r, r, r, t, t, t))
}

impl SolverConfig {
    /// Covariances taken from the simulator's noise model, floored so that
    /// zero noise still gives finite information.
    pub fn from_noise(noise: &NoiseSpec) -> Self {
        Self {
            odom_cov: diag_cov(noise.odom_sigma.at_least(SIGMA_FLOOR)),
            meas_cov: diag_cov(noise.meas_sigma.at_least(SIGMA_FLOOR)),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let ok = self.max_iterations >= 1
            && self.lambda_init > 0.0
            && self.tolerance > 0.0
            && self.w_p > 0.0
            && self.w_q > 0.0
            && self.prior_scale > 0.0
            && self.gauge_weight > 0.0
            && self.stage1_every >= 1
            && self.stage2_every >= 1
            && self.odom_cov.cholesky().is_some()
            && self.meas_cov.cholesky().is_some();
        if ok {
            Ok(())
        } else {
            Err(OptimizerError::Config(format!("invalid solver config {self:?}")))
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        let noise = NoiseSpec::default();
        Self {
            max_iterations: 50,
            lambda_init: 1e-4,
            tolerance: 1e-10,
            w_p: 1e6,
            w_q: 1e4,
            odom_cov: diag_cov(noise.odom_sigma),
            meas_cov: diag_cov(noise.meas_sigma),
            prior_scale: 1.0,
            gauge_weight: 1e6,
            stage1_every: 10,
            stage2_every: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Number of linearizations.
    pub iterations: usize,
    /// False when the iteration limit was hit first; the estimates are then
    /// the best found so far.
    pub converged: bool,
}

struct Normal {
    n: usize,
    blocks: HashMap<(usize, usize), Matrix6<f64>>,
    g: DVector<f64>,
}

fn assemble(graph: &FactorGraph, index: &BTreeMap<VarKey, usize>) -> Normal {
    let n = index.len();
    let mut blocks: HashMap<(usize, usize), Matrix6<f64>> = HashMap::new();
    let mut g = DVector::zeros(6 * n);
    for f in &graph.factors {
        let lin = graph.linearize(f);
        let members = f.members();
        let m = lin.dim;
        let jac = |k: usize| -> nalgebra::DMatrix<f64> { DMatrix::from_fn(m, 6, |r, c| lin.jac[k][r][c]) };
        let r = DVector::from_column_slice(&lin.residual[..m]);
        let slots: Vec<(usize, DMatrix<f64>)> = members
            .iter()
            .enumerate()
            .filter_map(|(k, key)| key.map(|key| (index[&key], jac(k))))
            .collect();
        for (i, ji) in &slots {
            let gi = ji.transpose() * &r;
            for c in 0..6 {
                g[6 * i + c] += gi[c];
            }
            for (j, jj) in &slots {
                if i <= j {
                    let h = ji.transpose() * jj;
                    let e = blocks.entry((*i, *j)).or_insert_with(Matrix6::zeros);
                    *e += h.fixed_view::<6, 6>(0, 0);
                }
            }
        }
    }
    Normal { n, blocks, g }
}

fn diag(normal: &Normal) -> DVector<f64> {
    let mut d = DVector::zeros(6 * normal.n);
    for i in 0..normal.n {
        if let Some(b) = normal.blocks.get(&(i, i)) {
            for c in 0..6 {
                d[6 * i + c] = b[(c, c)];
            }
        }
    }
    d
}

/// Solves `(H + damping) x = rhs`; `None` when the system is not
/// positive definite.
fn solve_damped(normal: &Normal, damping: &DVector<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let dim = 6 * normal.n;
    if dim <= DENSE_LIMIT {
        let mut h = DMatrix::zeros(dim, dim);
        for (&(i, j), b) in &normal.blocks {
            h.view_mut((6 * i, 6 * j), (6, 6)).copy_from(b);
            if i != j {
                h.view_mut((6 * j, 6 * i), (6, 6)).copy_from(&b.transpose());
            }
        }
        for k in 0..dim {
            h[(k, k)] += damping[k];
        }
        let chol = h.cholesky()?;
        Some(chol.solve(rhs))
    } else {
        let mut coo = CooMatrix::new(dim, dim);
        for (&(i, j), b) in &normal.blocks {
            for r in 0..6 {
                for c in 0..6 {
                    let v = b[(r, c)];
                    if v == 0.0 && !(i == j && r == c) {
                        continue;
                    }
                    coo.push(6 * i + r, 6 * j + c, v);
                    if i != j {
                        coo.push(6 * j + c, 6 * i + r, v);
                    }
                }
            }
        }
        for k in 0..dim {
            coo.push(k, k, damping[k]);
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc).ok()?;
        let x = chol.solve(rhs);
        let out = DVector::from_column_slice(x.as_slice());
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

fn apply_step(graph: &FactorGraph, index: &BTreeMap<VarKey, usize>, delta: &DVector<f64>) -> BTreeMap<VarKey, Pose> {
    graph
        .variables
        .iter()
        .map(|(k, p)| {
            let i = index[k];
            let d = Vector6::from_iterator((0..6).map(|c| delta[6 * i + c]));
            (*k, p.retract(&d))
        })
        .collect()
}

/// Minimizes the graph's cost in place.
pub fn solve(graph: &mut FactorGraph, cfg: &SolverConfig) -> Result<SolveReport, OptimizerError> {
    let index: BTreeMap<VarKey, usize> = graph.variables.keys().enumerate().map(|(i, k)| (*k, i)).collect();
    let initial_cost = graph.cost();
    let mut cost = initial_cost;
    let mut lambda = cfg.lambda_init;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let normal = assemble(graph, &index);
        if normal.g.amax() <= 1e-15 || cost <= 1e-30 {
            converged = true;
            break;
        }
        let d = diag(&normal);
        let floor = d.amax() * 1e-12 + 1e-12;
        let rhs = -&normal.g;
        let mut accepted = false;
        let mut factored = false;
        while lambda <= 1e16 {
            let damping = d.map(|v| lambda * v.max(floor));
            let Some(delta) = solve_damped(&normal, &damping, &rhs) else {
                lambda *= 10.0;
                continue;
            };
            factored = true;
            let candidate = apply_step(graph, &index, &delta);
            let previous = std::mem::replace(&mut graph.variables, candidate);
            let new_cost = graph.cost();
            if new_cost < cost {
                let decrease = (cost - new_cost) / cost.max(1e-300);
                cost = new_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if decrease < cfg.tolerance || delta.amax() < 1e-12 {
                    converged = true;
                }
                break;
            }
            graph.variables = previous;
            lambda *= 10.0;
        }
        if !factored {
            return Err(OptimizerError::SingularSystem);
        }
        if !accepted {
            // no damping level lowers the cost: a numerical minimum
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(SolveReport {
        initial_cost,
        final_cost: cost,
        iterations,
        converged,
    })
}
