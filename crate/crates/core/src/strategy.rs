//! The role-model strategy and the identities that say when it is optimal.
//!
//! Given a joint `P(x, y, z)` the *direct* estimator is the posterior
//! `P(x | z)`. The *role-model* estimator instead picks, for every `z`, the
//! distribution `Q(. | z)` minimizing the expected divergence
//!
//! ```text
//! ED_z(Q) = sum_y P(y | z) D(P(. | y) || Q(. | z)).
//! ```
//!
//! Expanding the divergence, `ED_z(Q) = C_z - sum_x m_z(x) log2 Q(x | z)` with
//! `m_z = sum_y P(y | z) P(. | y)` and `C_z` independent of `Q`. Gibbs'
//! inequality then makes `Q(. | z) = m_z` the unique minimizer, which is what
//! [`role_model_exact`] returns. [`role_model_numeric`] reaches the same point
//! by descent on `ED_z` without using that closed form, and the two are
//! cross-checked in the tests.
//!
//! When `X - Y - Z` is a Markov chain, `m_z(x) = sum_y P(x | y, z) P(y | z) =
//! P(x | z)`, so both estimators coincide. [`check_theorem1`] and
//! [`check_theorem2`] verify the underlying divergence identities numerically.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{kl_divergence, Axis, EstimatorTable, Joint3, Simplex};

/// Tolerance for theorem identities and estimator equality (total variation).
pub const CHECK_TOLERANCE: f64 = 1e-9;

/// A joint counts as Markov `X - Y - Z` when `I(X; Z | Y)` is below this.
pub const MARKOV_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZTerm {
    pub z: usize,
    /// `P(z)`
    pub weight: f64,
    /// `ED_z` in bits
    pub divergence: f64,
}

/// Expected divergence averaged jointly over `(y, z)`, with its per-z parts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub total: f64,
    pub per_z: Vec<ZTerm>,
}

/// Outcome of checking `lhs == rhs` (or `lhs >= rhs`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; zero when both sides are infinite.
    pub gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl TheoremCheck {
    fn gap_of(lhs: f64, rhs: f64) -> f64 {
        if lhs.is_infinite() && rhs.is_infinite() && lhs.signum() == rhs.signum() {
            0.0
        } else {
            lhs - rhs
        }
    }

    fn equality(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let gap = TheoremCheck::gap_of(lhs, rhs);
        TheoremCheck {
            lhs,
            rhs,
            gap,
            tolerance,
            passed: gap.abs() <= tolerance,
        }
    }
}

/// Bound check for the general (non-Markov) case together with the equality
/// diagnosis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub check: TheoremCheck,
    /// `|gap| <= tolerance`
    pub equality: bool,
    /// The estimator equals the direct solution on every `z` with `P(z) > 0`.
    pub estimator_is_direct: bool,
}

impl BoundCheck {
    /// Equality holds exactly when the estimator is the direct solution.
    pub fn equality_consistent(&self) -> bool {
        self.equality == self.estimator_is_direct
    }
}

fn check_shape(joint: &Joint3, est: &EstimatorTable) -> Result<()> {
    if est.nz() != joint.nz() {
        return Err(Error::dimension("estimator rows", joint.nz(), est.nz()));
    }
    if est.nx() != joint.nx() {
        return Err(Error::dimension("estimator alphabet", joint.nx(), est.nx()));
    }
    Ok(())
}

fn defined_row(est: &EstimatorTable, z: usize) -> Result<&Simplex> {
    est.row(z).ok_or_else(|| {
        Error::Precondition(format!("estimator row {z} is undefined but P(z) > 0"))
    })
}

/// The direct solution `P(x | z)`; rows for zero-probability `z` are
/// undefined.
pub fn direct_solution(joint: &Joint3) -> EstimatorTable {
    joint
        .conditional(Axis::X, Axis::Z)
        .expect("distinct axes")
        .into_estimator()
}

/// `ED_z(q) = sum_y P(y | z) D(P(. | y) || q)`.
pub fn expected_divergence_given_z(joint: &Joint3, q: &Simplex, z: usize) -> Result<f64> {
    if z >= joint.nz() {
        return Err(Error::dimension("z symbol", joint.nz(), z));
    }
    if q.len() != joint.nx() {
        return Err(Error::dimension("estimator alphabet", joint.nx(), q.len()));
    }
    let y_given_z = joint.conditional(Axis::Y, Axis::Z)?;
    let Some(weights) = y_given_z.row(z) else {
        return Err(Error::UndefinedConditioning { axis: "Z", symbol: z });
    };
    let x_given_y = joint.conditional(Axis::X, Axis::Y)?;
    let mut total = 0.0;
    for (y, &w) in weights.probs().iter().enumerate() {
        if w > 0.0 {
            let role = x_given_y.row(y).expect("P(y) >= P(y, z) > 0");
            total += w * kl_divergence(role, q)?;
        }
    }
    Ok(total)
}

/// `ED = sum_{y,z} P(y, z) D(P(. | y) || Q(. | z))`.
pub fn expected_divergence(joint: &Joint3, est: &EstimatorTable) -> Result<DivergenceReport> {
    check_shape(joint, est)?;
    let pz = joint.marginal_z();
    let mut per_z = Vec::new();
    let mut total = 0.0;
    for (z, &weight) in pz.probs().iter().enumerate() {
        if weight > 0.0 {
            let divergence = expected_divergence_given_z(joint, defined_row(est, z)?, z)?;
            total += weight * divergence;
            per_z.push(ZTerm {
                z,
                weight,
                divergence,
            });
        }
    }
    Ok(DivergenceReport { total, per_z })
}

/// `sum_z P(z) D(P(. | z) || Q(. | z))`.
pub fn expected_divergence_from_direct(joint: &Joint3, est: &EstimatorTable) -> Result<f64> {
    check_shape(joint, est)?;
    let direct = direct_solution(joint);
    let pz = joint.marginal_z();
    let mut total = 0.0;
    for (z, &w) in pz.probs().iter().enumerate() {
        if w > 0.0 {
            let p = direct.row(z).expect("P(z) > 0");
            total += w * kl_divergence(p, defined_row(est, z)?)?;
        }
    }
    Ok(total)
}

/// The mixture `sum_y P(y | z) P(. | y)` for every `z` with `P(z) > 0`: the
/// exact minimizer of the per-z expected divergence.
pub fn role_model_exact(joint: &Joint3) -> EstimatorTable {
    let y_given_z = joint.conditional(Axis::Y, Axis::Z).expect("distinct axes");
    let x_given_y = joint.conditional(Axis::X, Axis::Y).expect("distinct axes");
    let rows = y_given_z
        .rows()
        .iter()
        .map(|weights| {
            let weights = weights.as_ref()?;
            let mut mix = vec![0.0; joint.nx()];
            for (y, &w) in weights.probs().iter().enumerate() {
                if w > 0.0 {
                    let role = x_given_y.row(y).expect("P(y) > 0");
                    for (m, &p) in mix.iter_mut().zip(role.probs()) {
                        *m += w * p;
                    }
                }
            }
            Some(Simplex::new(mix).expect("mixture of distributions"))
        })
        .collect();
    EstimatorTable::with_undefined(rows).expect("nx >= 2 and at least one z with P(z) > 0")
}

#[derive(Clone, Debug)]
pub struct NumericOptions {
    /// Stop once one step improves the objective by less than this (bits).
    pub tol: f64,
    pub max_iters: usize,
    /// Starting point; uniform rows when absent. Entries are pulled off the
    /// boundary before the first step.
    pub warm_start: Option<EstimatorTable>,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            tol: 1e-12,
            max_iters: 10_000,
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NumericSolution {
    pub est: EstimatorTable,
    /// Objective value before the first step and after each accepted step,
    /// per z (empty for zero-probability z).
    pub objective_history: Vec<Vec<f64>>,
}

impl NumericSolution {
    /// Number of improving steps taken for `z`.
    pub fn steps(&self, z: usize) -> usize {
        self.objective_history[z].len().saturating_sub(1)
    }
}

/// Per-z minimization of the expected divergence by exponentiated-gradient
/// (entropic mirror) descent with backtracking.
///
/// Iterates stay strictly inside the simplex, where the objective is finite.
/// Each step multiplies `q(x)` by `exp(-eta g(x) ln 2)` where `g` is the
/// gradient in bits, then renormalizes. The step `eta` starts at 1 and is
/// halved until the objective does not increase, so the recorded objective
/// sequence is non-increasing.
pub fn role_model_numeric(joint: &Joint3, opts: &NumericOptions) -> Result<NumericSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if let Some(w) = &opts.warm_start {
        check_shape(joint, w)?;
    }
    let y_given_z = joint.conditional(Axis::Y, Axis::Z)?;
    let x_given_y = joint.conditional(Axis::X, Axis::Y)?;
    let nx = joint.nx();

    let mut rows = Vec::with_capacity(joint.nz());
    let mut history = Vec::with_capacity(joint.nz());
    let mut exhausted = false;

    for z in 0..joint.nz() {
        let Some(weights) = y_given_z.row(z) else {
            rows.push(None);
            history.push(Vec::new());
            continue;
        };
        // (P(y | z), P(. | y)) pairs that carry mass
        let terms: Vec<(f64, &[f64])> = weights
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(y, &w)| (w, x_given_y.row(y).expect("P(y) > 0").probs()))
            .collect();
        let objective = |q: &[f64]| -> f64 {
            terms
                .iter()
                .map(|&(w, p)| w * crate::prob::kl_divergence_raw(p, q))
                .sum()
        };

        let mut q = match opts.warm_start.as_ref().and_then(|w| w.row(z)) {
            Some(start) => interior(start.probs()),
            None => vec![1.0 / nx as f64; nx],
        };
        let mut f = objective(&q);
        let mut trace = vec![f];
        let mut converged = false;

        for _ in 0..opts.max_iters {
            // d/dq(x) of the objective, in bits
            let mut grad = vec![0.0; nx];
            for &(w, p) in &terms {
                for x in 0..nx {
                    if p[x] > 0.0 {
                        grad[x] -= w * p[x] / (q[x] * std::f64::consts::LN_2);
                    }
                }
            }
            let mut eta = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let candidate = exponentiated_step(&q, &grad, eta);
                let fc = objective(&candidate);
                if fc <= f {
                    accepted = Some((candidate, fc));
                    break;
                }
                eta *= 0.5;
            }
            let Some((next, fn_)) = accepted else {
                // no descent direction left at machine precision
                converged = true;
                break;
            };
            let improvement = f - fn_;
            q = next;
            f = fn_;
            trace.push(f);
            if improvement < opts.tol {
                converged = true;
                break;
            }
        }
        exhausted |= !converged;
        rows.push(Some(Simplex::new(q)?));
        history.push(trace);
    }

    let est = EstimatorTable::with_undefined(rows)?;
    if exhausted {
        return Err(Error::Convergence {
            iterations: opts.max_iters,
            last: Box::new(est),
        });
    }
    Ok(NumericSolution {
        est,
        objective_history: history,
    })
}

/// Mixes a hair of the uniform distribution in so that every entry is
/// positive.
fn interior(p: &[f64]) -> Vec<f64> {
    const MIX: f64 = 1e-12;
    let u = 1.0 / p.len() as f64;
    p.iter().map(|&v| (1.0 - MIX) * v + MIX * u).collect()
}

fn exponentiated_step(q: &[f64], grad: &[f64], eta: f64) -> Vec<f64> {
    // work in the log domain so huge gradients near the boundary cannot
    // overflow
    let logs: Vec<f64> = q
        .iter()
        .zip(grad)
        .map(|(&qi, &g)| qi.ln() - eta * g * std::f64::consts::LN_2)
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut next: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = next.iter().sum();
    for v in &mut next {
        *v = (*v / sum).max(f64::MIN_POSITIVE);
    }
    let sum: f64 = next.iter().sum();
    next.iter_mut().for_each(|v| *v /= sum);
    next
}

/// Checks `ED(P_{X|Y} || Q) = H(X|Z) - H(X|Y) + ED(P_{X|Z} || Q)` on a Markov
/// joint.
pub fn check_theorem1(joint: &Joint3, est: &EstimatorTable) -> Result<TheoremCheck> {
    let cmi = joint.conditional_mutual_information();
    if cmi > MARKOV_TOLERANCE {
        return Err(Error::Precondition(format!(
            "joint is not Markov X - Y - Z: I(X;Z|Y) = {cmi:e}"
        )));
    }
    let lhs = expected_divergence(joint, est)?.total;
    let hxz = joint.conditional_entropy(Axis::X, Axis::Z)?;
    let hxy = joint.conditional_entropy(Axis::X, Axis::Y)?;
    let rhs = hxz - hxy + expected_divergence_from_direct(joint, est)?;
    Ok(TheoremCheck::equality(lhs, rhs, CHECK_TOLERANCE))
}

/// Checks `ED(P_{X|YZ} || Q) >= H(X|Z) - H(X|YZ)` on any joint, and whether
/// equality coincides with `Q` being the direct solution.
pub fn check_theorem2(joint: &Joint3, est: &EstimatorTable) -> Result<BoundCheck> {
    check_shape(joint, est)?;
    let pz = joint.marginal_z();
    for z in (0..joint.nz()).filter(|&z| pz.get(z) > 0.0) {
        defined_row(est, z)?;
    }
    let posterior = joint.posterior_x_given_yz();
    let nz = joint.nz();
    let mut lhs = 0.0;
    for ((x, y, z), p) in joint.iter() {
        if p > 0.0 {
            let target = posterior[y * nz + z].as_ref().expect("P(y, z) > 0").get(x);
            let q = est.row(z).expect("checked above").get(x);
            if q <= 0.0 {
                lhs = f64::INFINITY;
                break;
            }
            lhs += p * (target / q).log2();
        }
    }
    let rhs = joint.conditional_entropy(Axis::X, Axis::Z)? - joint.conditional_entropy_x_given_yz();
    let gap = TheoremCheck::gap_of(lhs, rhs);
    let check = TheoremCheck {
        lhs,
        rhs,
        gap,
        tolerance: CHECK_TOLERANCE,
        passed: gap >= -CHECK_TOLERANCE,
    };
    let direct = direct_solution(joint);
    let estimator_is_direct = direct.max_tv(est, |z| pz.get(z) > 0.0)? <= CHECK_TOLERANCE;
    Ok(BoundCheck {
        check,
        equality: gap.abs() <= CHECK_TOLERANCE,
        estimator_is_direct,
    })
}

/// Checks `I(X; S_d(Z)) = I(X; Z)`, where `S_d(z) = P(. | z)`.
///
/// The value of `S_d(Z)` is a posterior, so z symbols whose posteriors agree
/// (within [`CHECK_TOLERANCE`] total variation) collapse to one value. The
/// left side is the mutual information between `X` and that class label.
pub fn sufficiency_check(joint: &Joint3) -> Result<TheoremCheck> {
    let direct = direct_solution(joint);
    let pxz = joint.marginal_xz();
    let nx = joint.nx();

    // representative posterior and accumulated P(x, class) per class
    let mut classes: Vec<(&Simplex, Vec<f64>)> = Vec::new();
    for z in 0..joint.nz() {
        let Some(post) = direct.row(z) else { continue };
        let slot = classes
            .iter()
            .position(|(rep, _)| rep.total_variation(post).unwrap() <= CHECK_TOLERANCE);
        let idx = match slot {
            Some(i) => i,
            None => {
                classes.push((post, vec![0.0; nx]));
                classes.len() - 1
            }
        };
        for (x, acc) in classes[idx].1.iter_mut().enumerate() {
            *acc += pxz[x][z];
        }
    }

    let hx = joint.entropy(Axis::X);
    // H(X | class) = sum_c P(c) H(P(. | c))
    let hx_given_class: f64 = classes
        .iter()
        .map(|(_, mass)| {
            let pc: f64 = mass.iter().sum();
            -mass
                .iter()
                .filter(|&&m| m > 0.0)
                .map(|&m| m * (m / pc).log2())
                .sum::<f64>()
        })
        .sum();
    let lhs = hx - hx_given_class;
    let rhs = joint.mutual_information(Axis::X, Axis::Z)?;
    Ok(TheoremCheck::equality(lhs, rhs, CHECK_TOLERANCE))
}
