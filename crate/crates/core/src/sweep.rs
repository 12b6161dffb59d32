//! Randomized checks of the divergence identities, one reproducible case per
//! seed.

use serde::Serialize;

use crate::channels::{seeded_rng, unit_uniform};
use crate::error::Result;
use crate::experiments::{random_estimator, random_joint};
use crate::prob::{EstimatorTable, Simplex};
use crate::strategy::{
    check_theorem1, check_theorem2, direct_solution, role_model_exact, sufficiency_check, BoundCheck,
    TheoremCheck,
};

/// Inclusive range of alphabet sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Sizes {
    pub min: usize,
    pub max: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes { min: 2, max: 5 }
    }
}

/// Everything computed for one seed.
#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub seed: u64,
    pub dims: (usize, usize, usize),
    /// Identity on a chain-built joint with a random full-support estimator.
    pub theorem1: TheoremCheck,
    /// TV between the role-model and direct solutions on the chain-built joint.
    pub markov_solution_tv: f64,
    /// Bound on an unconstrained joint with a random estimator.
    pub theorem2_random: BoundCheck,
    /// Bound with the direct solution, where equality is expected.
    pub theorem2_direct: BoundCheck,
    /// Bound with the direct solution pushed off by 0.1 on one entry.
    pub theorem2_perturbed: BoundCheck,
    pub sufficiency_markov: TheoremCheck,
    pub sufficiency_general: TheoremCheck,
}

/// Threshold for the perturbed estimator's gap.
pub const STRICT_GAP: f64 = 1e-6;

/// TV allowed between role-model and direct solutions on a Markov joint.
pub const MARKOV_SOLUTION_TOLERANCE: f64 = 1e-12;

impl CaseReport {
    /// Names of the checks that failed.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.theorem1.passed {
            out.push("theorem1");
        }
        if self.markov_solution_tv > MARKOV_SOLUTION_TOLERANCE {
            out.push("markov_solution");
        }
        if !self.theorem2_random.check.passed || !self.theorem2_random.equality_consistent() {
            out.push("theorem2_random");
        }
        if !(self.theorem2_direct.check.passed && self.theorem2_direct.equality) {
            out.push("theorem2_direct");
        }
        if !(self.theorem2_perturbed.check.passed && self.theorem2_perturbed.check.gap > STRICT_GAP) {
            out.push("theorem2_perturbed");
        }
        if !self.sufficiency_markov.passed {
            out.push("sufficiency_markov");
        }
        if !self.sufficiency_general.passed {
            out.push("sufficiency_general");
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

/// Adds `amount` to entry `x` of row `z` and renormalizes that row.
pub fn perturbed(est: &EstimatorTable, z: usize, x: usize, amount: f64) -> Result<EstimatorTable> {
    let rows = est
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| match row {
            Some(r) if i == z => {
                let mut v = r.probs().to_vec();
                v[x] += amount;
                let s: f64 = v.iter().sum();
                Ok(Some(Simplex::new(v.into_iter().map(|p| p / s).collect())?))
            }
            other => Ok(other.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    EstimatorTable::with_undefined(rows)
}

pub fn run_case(seed: u64, sizes: Sizes) -> Result<CaseReport> {
    let mut rng = seeded_rng(seed ^ 0x5eed_5eed_5eed_5eed);
    let span = (sizes.max - sizes.min + 1) as f64;
    let mut pick = || sizes.min + ((unit_uniform(&mut rng) * span) as usize).min(sizes.max - sizes.min);
    let (nx, ny, nz) = (pick(), pick(), pick());

    let markov = random_joint(seed, nx, ny, nz, true)?;
    let est = random_estimator(seed.wrapping_add(1), nx, nz)?;
    let theorem1 = check_theorem1(&markov, &est)?;
    let markov_solution_tv = role_model_exact(&markov).max_tv(&direct_solution(&markov), |_| true)?;

    let general = random_joint(seed, nx, ny, nz, false)?;
    let theorem2_random = check_theorem2(&general, &est)?;
    let direct = direct_solution(&general);
    let theorem2_direct = check_theorem2(&general, &direct)?;
    let pz = general.marginal_z();
    let heaviest = (0..nz)
        .max_by(|&a, &b| pz.get(a).total_cmp(&pz.get(b)))
        .expect("nz >= 2");
    let theorem2_perturbed = check_theorem2(&general, &perturbed(&direct, heaviest, 0, 0.1)?)?;

    Ok(CaseReport {
        seed,
        dims: (nx, ny, nz),
        theorem1,
        markov_solution_tv,
        theorem2_random,
        theorem2_direct,
        theorem2_perturbed,
        sufficiency_markov: sufficiency_check(&markov)?,
        sufficiency_general: sufficiency_check(&general)?,
    })
}
