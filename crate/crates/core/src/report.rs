use crate::derivatives::{DiagVar, PhaseMat};
use crate::numkernel::CMat;

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    /// True when `new` is at least as good as `old` up to `slack`.
    pub fn not_worse(self, new: f64, old: f64, slack: f64) -> bool {
        match self {
            Sense::Max => new >= old - slack,
            Sense::Min => new <= old + slack,
        }
    }

    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Max => a > b,
            Sense::Min => a < b,
        }
    }
}

/// What a solver produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    /// Real non-negative powers (MU-SIMO allocations).
    Power(Vec<f64>),
    /// Complex diagonal (amplitude-adjustable IRS).
    Diag(DiagVar),
    /// Phase matrix (constant-modulus problems).
    Phase(PhaseMat),
    /// Per-user covariance blocks.
    Blocks(Vec<CMat>),
}

/// Non-fatal conditions a solver hit along the way.
#[derive(Debug, Clone, PartialEq)]
pub enum Flag {
    MaxIterReached,
    InnerNotConverged,
    BoundaryFallback { coord: usize },
    DegenerateSites(usize),
    NoImprovement,
    DegenerateSelection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub solution: Solution,
    pub objective: f64,
    /// Objective after initialization and after every outer iteration.
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    pub seconds: f64,
    pub converged: bool,
    pub kkt_residual: Option<f64>,
    pub slackness_residual: Option<f64>,
    pub flags: Vec<Flag>,
    pub seed: Option<u64>,
}

impl SolverReport {
    pub fn new(solution: Solution, objective: f64) -> Self {
        Self {
            solution,
            objective,
            trajectory: vec![objective],
            iterations: 0,
            seconds: 0.0,
            converged: true,
            kkt_residual: None,
            slackness_residual: None,
            flags: Vec::new(),
            seed: None,
        }
    }

    pub fn phases(&self) -> Option<&PhaseMat> {
        match &self.solution {
            Solution::Phase(p) => Some(p),
            _ => None,
        }
    }

    pub fn powers(&self) -> Option<&[f64]> {
        match &self.solution {
            Solution::Power(p) => Some(p),
            _ => None,
        }
    }

    pub fn diag(&self) -> Option<&DiagVar> {
        match &self.solution {
            Solution::Diag(d) => Some(d),
            _ => None,
        }
    }

    pub fn blocks(&self) -> Option<&[CMat]> {
        match &self.solution {
            Solution::Blocks(b) => Some(b),
            _ => None,
        }
    }

    /// Largest step against `sense` along the trajectory (0 when monotone).
    pub fn worst_monotonicity_violation(&self, sense: Sense) -> f64 {
        self.trajectory
            .windows(2)
            .map(|w| match sense {
                Sense::Max => w[0] - w[1],
                Sense::Min => w[1] - w[0],
            })
            .fold(0.0, f64::max)
    }

    pub fn degenerate_sites(&self) -> usize {
        self.flags.iter().map(|f| if let Flag::DegenerateSites(n) = f { *n } else { 0 }).sum()
    }
}

/// Relative change test shared by the iterative solvers.
pub fn rel_change_below(new: f64, old: f64, eps: f64) -> bool {
    (new - old).abs() <= eps * new.abs().max(1.0)
}
