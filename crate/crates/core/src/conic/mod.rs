//! Canonical conic-programming layer.
//!
//! Problems are stated in one canonical form:
//!
//! ```text
//!   minimize    c . x
//!   subject to  A x = b
//!               x in K1 x K2 x ... (nonneg / second-order / PSD blocks)
//! ```
//!
//! Every variable lives in some cone block; inequalities are expressed by
//! the builders with explicit slack variables. PSD blocks are stored in
//! symmetric-vectorized form (`side*(side+1)/2` entries, sqrt(2)-scaled
//! off-diagonals, see [`linalg::svec`]).
//!
//! [`solve`] runs a dense Nesterov-Todd primal-dual interior-point method
//! (see [`ipm`]); second-order blocks are lowered internally to their PSD
//! arrow representation so the solver core only handles nonnegative and PSD
//! cones. Solutions are verified after the fact against the original
//! problem data: a returned `Optimal` status always means the primal
//! residual, cone violation and duality gap passed the requested tolerance.

pub mod ipm;
pub mod linalg;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use linalg::{
    embed_unchecked, extract_hermitian, herm_inner, hermitian_eig, hermitian_embed, kron, smat,
    svec, svec_index, svec_len, vec_cm,
};

/// One cone block over a contiguous slice of the variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeSpec {
    /// Componentwise nonnegative block of the given length.
    NonNeg(usize),
    /// Second-order cone `x0 >= ||x1..||` of the given total dimension.
    Soc(usize),
    /// PSD cone of the given matrix side; occupies `side*(side+1)/2` slots.
    Psd(usize),
}

impl ConeSpec {
    /// Number of variable slots the block occupies.
    pub fn storage_len(&self) -> usize {
        match *self {
            ConeSpec::NonNeg(d) | ConeSpec::Soc(d) => d,
            ConeSpec::Psd(side) => svec_len(side),
        }
    }
}

/// A sparse equality row `sum_j coeff_j * x[idx_j] = rhs`.
pub type SparseRow = Vec<(usize, f64)>;

/// Conic problem in canonical form. Serializable so instances can be dumped
/// and replayed through external checkers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicProblem {
    /// Total number of scalar variables.
    pub num_vars: usize,
    /// Minimization objective coefficients, dense, length `num_vars`.
    pub objective: Vec<f64>,
    /// Sparse equality rows.
    pub eq_rows: Vec<SparseRow>,
    /// Right-hand sides, one per equality row.
    pub eq_rhs: Vec<f64>,
    /// Ordered cone blocks partitioning `[0, num_vars)`.
    pub cones: Vec<ConeSpec>,
}

impl ConicProblem {
    /// Checks the structural invariants: cones tile the variable range,
    /// row indices are in bounds, rhs length matches.
    pub fn validate(&self) -> Result<()> {
        let total: usize = self.cones.iter().map(|c| c.storage_len()).sum();
        if total != self.num_vars {
            return Err(Error::Dimension(format!(
                "cone blocks cover {} slots but num_vars = {}",
                total, self.num_vars
            )));
        }
        if self.objective.len() != self.num_vars {
            return Err(Error::Dimension(format!(
                "objective length {} != num_vars {}",
                self.objective.len(),
                self.num_vars
            )));
        }
        if self.eq_rows.len() != self.eq_rhs.len() {
            return Err(Error::Dimension(format!(
                "{} rows but {} rhs entries",
                self.eq_rows.len(),
                self.eq_rhs.len()
            )));
        }
        for (r, row) in self.eq_rows.iter().enumerate() {
            for &(j, v) in row {
                if j >= self.num_vars {
                    return Err(Error::Dimension(format!(
                        "row {} references variable {} out of {}",
                        r, j, self.num_vars
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Config(format!("row {} has non-finite coefficient", r)));
                }
            }
        }
        Ok(())
    }

    /// Serializes to the JSON round-trip format.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses the JSON round-trip format.
    pub fn from_json(s: &str) -> Result<Self> {
        let p: ConicProblem = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// Handle to a variable block allocated through [`ProblemBuilder`].
#[derive(Debug, Clone, Copy)]
pub struct VarBlock {
    /// First variable index of the block.
    pub start: usize,
    /// Number of storage slots.
    pub len: usize,
    /// Matrix side for PSD blocks, 0 otherwise.
    pub side: usize,
}

impl VarBlock {
    /// Index of svec entry `(i, j)`, `i <= j`, inside a PSD block.
    pub fn psd_entry(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.side > 0 && i <= j && j < self.side);
        self.start + svec_index(i, j)
    }
}

/// Incremental construction of a [`ConicProblem`].
#[derive(Debug, Default)]
pub struct ProblemBuilder {
    cones: Vec<ConeSpec>,
    num_vars: usize,
    objective: Vec<(usize, f64)>,
    eq_rows: Vec<SparseRow>,
    eq_rhs: Vec<f64>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_block(&mut self, cone: ConeSpec) -> VarBlock {
        let start = self.num_vars;
        let len = cone.storage_len();
        let side = match cone {
            ConeSpec::Psd(s) => s,
            _ => 0,
        };
        self.num_vars += len;
        self.cones.push(cone);
        VarBlock { start, len, side }
    }

    /// Allocates a nonnegative block.
    pub fn add_nonneg(&mut self, len: usize) -> VarBlock {
        self.push_block(ConeSpec::NonNeg(len))
    }

    /// Allocates a second-order cone block of total dimension `dim >= 2`.
    pub fn add_soc(&mut self, dim: usize) -> VarBlock {
        assert!(dim >= 2, "second-order cone needs dimension >= 2");
        self.push_block(ConeSpec::Soc(dim))
    }

    /// Allocates a PSD block of the given matrix side (svec storage).
    pub fn add_psd(&mut self, side: usize) -> VarBlock {
        assert!(side >= 1);
        self.push_block(ConeSpec::Psd(side))
    }

    /// Adds `coeff * x[idx]` to the minimization objective.
    pub fn obj(&mut self, idx: usize, coeff: f64) {
        if coeff != 0.0 {
            self.objective.push((idx, coeff));
        }
    }

    /// Adds an equality row; near-zero coefficients are dropped.
    pub fn row(&mut self, entries: &[(usize, f64)], rhs: f64) {
        let filtered: SparseRow = entries
            .iter()
            .copied()
            .filter(|&(_, v)| v != 0.0)
            .collect();
        self.eq_rows.push(filtered);
        self.eq_rhs.push(rhs);
    }

    pub fn finish(self) -> ConicProblem {
        let mut objective = vec![0.0; self.num_vars];
        for (idx, v) in self.objective {
            objective[idx] += v;
        }
        ConicProblem {
            num_vars: self.num_vars,
            objective,
            eq_rows: self.eq_rows,
            eq_rhs: self.eq_rhs,
            cones: self.cones,
        }
    }
}

/// Solver outcome classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// All optimality measures at or below the requested tolerance.
    Optimal,
    /// Best iterate returned; tolerance not certified.
    AccuracyLimit,
    /// Primal infeasibility certificate found.
    Infeasible,
    /// Dual infeasibility certificate found (primal unbounded).
    Unbounded,
}

/// Solution report. `x` always holds the best iterate found, in the
/// original problem's variable layout.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Array1<f64>,
    /// Objective `c . x` of the returned iterate (minimization convention).
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Relative equality residual of the returned iterate.
    pub primal_residual: f64,
    /// Relative dual residual at termination.
    pub dual_residual: f64,
    /// Relative duality gap at termination.
    pub rel_gap: f64,
}

/// Solves the problem to accuracy `eps_solver` (capped internally at 1e-8,
/// i.e. the solver never runs looser than 1e-8 even when the caller would
/// accept less).
pub fn solve(problem: &ConicProblem, eps_solver: f64) -> Result<ConicSolution> {
    problem.validate()?;
    let tol = eps_solver.min(1e-8).max(1e-12);
    let lowered = ipm::lower(problem);
    let raw = ipm::run(&lowered, tol, 100);
    let x = ipm::recover(problem, &lowered, &raw.x);

    // independent post-check on the original data, so a status of Optimal
    // never leans on solver-internal bookkeeping
    let (pres, cone_viol) = primal_violation(problem, &x);
    let objective = problem
        .objective
        .iter()
        .zip(x.iter())
        .map(|(c, v)| c * v)
        .sum::<f64>();
    let status = match raw.status {
        SolveStatus::Optimal => {
            if pres <= 10.0 * eps_solver && cone_viol <= 10.0 * eps_solver {
                SolveStatus::Optimal
            } else {
                SolveStatus::AccuracyLimit
            }
        }
        other => other,
    };
    Ok(ConicSolution {
        x,
        objective,
        status,
        iterations: raw.iterations,
        primal_residual: pres.max(cone_viol),
        dual_residual: raw.dual_residual,
        rel_gap: raw.rel_gap,
    })
}

/// Relative equality residual and cone violation of a candidate point.
pub fn primal_violation(problem: &ConicProblem, x: &Array1<f64>) -> (f64, f64) {
    let mut pres = 0.0_f64;
    for (row, &rhs) in problem.eq_rows.iter().zip(problem.eq_rhs.iter()) {
        let ax: f64 = row.iter().map(|&(j, v)| v * x[j]).sum();
        pres = pres.max((ax - rhs).abs() / (1.0 + rhs.abs()));
    }
    let mut viol = 0.0_f64;
    let mut off = 0;
    for cone in &problem.cones {
        let len = cone.storage_len();
        let xs = x.slice(ndarray::s![off..off + len]);
        match *cone {
            ConeSpec::NonNeg(_) => {
                for &v in xs.iter() {
                    viol = viol.max(-v);
                }
            }
            ConeSpec::Soc(_) => {
                let norm: f64 = xs.iter().skip(1).map(|v| v * v).sum::<f64>().sqrt();
                viol = viol.max((norm - xs[0]) / (1.0 + norm));
            }
            ConeSpec::Psd(side) => {
                let m = smat(&xs.to_owned(), side);
                let scale = 1.0 + m.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                let lam = ipm::min_eig_sym(&m);
                viol = viol.max(-lam / scale);
            }
        }
        off += len;
    }
    (pres, viol)
}
