//! Blind online training of `Q(x | z)` from a stream of `(y, z)` pairs.
//!
//! The trainer knows the role model's posterior `P(x | y)` but never sees `x`
//! and never learns `P(y, z)`. The expected divergence and its gradient are
//! replaced by moving averages over the last `window` observations, and every
//! observation from `start_step` on triggers one projected gradient step.
//!
//! For a binary X the estimator row for `z` has one free parameter,
//! `q_z = Q(k | z)` with `k = z mod 2`; for two z symbols these are
//! `Q(0 | 0)` and `Q(1 | 1)`. Larger X alphabets update every coordinate of
//! the row and project back onto the clamped simplex.

use std::collections::VecDeque;
use std::f64::consts::LN_2;

use serde::Serialize;

use crate::channels::SampleStream;
use crate::error::{Error, Result};
use crate::prob::{kl_divergence_raw, Axis, EstimatorTable, Joint3, Simplex, StochasticMatrix};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainerConfig {
    pub window: usize,
    /// 1-based index of the first observation that triggers an update.
    pub start_step: u64,
    /// Starting estimator; uniform rows when absent.
    pub init: Option<EstimatorTable>,
    pub step_size_initial: f64,
    pub step_size_tau: f64,
    pub clamp_epsilon: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            window: 100,
            start_step: 101,
            init: None,
            step_size_initial: 0.05,
            step_size_tau: 1000.0,
            clamp_epsilon: 1e-6,
            n_samples: 200_000,
            seed: 1,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.start_step < self.window as u64 + 1 {
            return Err(Error::Config(format!(
                "start step {} must exceed the window {}",
                self.start_step, self.window
            )));
        }
        if !(self.clamp_epsilon > 0.0 && self.clamp_epsilon < 0.5) {
            return Err(Error::Config(format!(
                "clamp epsilon must lie in (0, 0.5), got {}",
                self.clamp_epsilon
            )));
        }
        if !(self.step_size_initial > 0.0) || !(self.step_size_tau > 0.0) {
            return Err(Error::Config("step sizes must be positive".into()));
        }
        Ok(())
    }

    /// `eta_t = eta_0 / (1 + t / tau)`, `t` counting updates already made.
    pub fn step_size(&self, t: u64) -> f64 {
        self.step_size_initial / (1.0 + t as f64 / self.step_size_tau)
    }
}

/// The role model's posterior `P(x | y)`, known to the trainer.
#[derive(Clone, Debug, PartialEq)]
pub struct RoleModelOracle {
    nx: usize,
    // None for y symbols the role model never observes
    posterior_xy: Vec<Option<Simplex>>,
}

impl RoleModelOracle {
    pub fn new(posterior_xy: StochasticMatrix) -> Self {
        RoleModelOracle {
            nx: posterior_xy.output_size(),
            posterior_xy: posterior_xy.rows().iter().cloned().map(Some).collect(),
        }
    }

    pub fn from_joint(joint: &Joint3) -> Self {
        RoleModelOracle {
            nx: joint.nx(),
            posterior_xy: joint
                .conditional(Axis::X, Axis::Y)
                .expect("distinct axes")
                .rows()
                .to_vec(),
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.posterior_xy.len()
    }

    pub fn posterior(&self, y: usize) -> Result<&Simplex> {
        match self.posterior_xy.get(y) {
            Some(Some(p)) => Ok(p),
            Some(None) => Err(Error::UndefinedConditioning { axis: "Y", symbol: y }),
            None => Err(Error::dimension("y symbol", self.ny(), y)),
        }
    }
}

/// Gradient of the windowed divergence with respect to the free parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    /// Row-major, `per_row` entries per z symbol.
    pub values: Vec<f64>,
    pub per_row: usize,
}

impl Gradient {
    pub fn row(&self, z: usize) -> &[f64] {
        &self.values[z * self.per_row..(z + 1) * self.per_row]
    }
}

#[derive(Clone, Debug)]
pub struct TrainerState {
    est: EstimatorTable,
    step: u64,
    updates: u64,
    window: VecDeque<(usize, usize)>,
    // occurrences of (y, z) in the window, indexed y * nz + z
    counts: Vec<u32>,
    nz: usize,
    divergence_trace: Vec<(u64, f64)>,
    param_trace: Vec<(u64, Vec<f64>)>,
}

/// Free parameters of an estimator: `Q(z mod 2 | z)` per row for a binary X,
/// otherwise the first `nx - 1` coordinates of each row.
pub fn free_parameters(est: &EstimatorTable) -> Vec<f64> {
    let nx = est.nx();
    est.rows()
        .iter()
        .enumerate()
        .flat_map(|(z, row)| {
            let row = row.as_ref().expect("trainer estimators are fully defined");
            if nx == 2 {
                vec![row.get(z % 2)]
            } else {
                row.probs()[..nx - 1].to_vec()
            }
        })
        .collect()
}

/// Column names matching [`free_parameters`].
pub fn parameter_names(nx: usize, nz: usize) -> Vec<String> {
    if nx == 2 {
        (0..nz).map(|z| format!("q_{z}")).collect()
    } else {
        (0..nz)
            .flat_map(|z| (0..nx - 1).map(move |x| format!("q_{z}_{x}")))
            .collect()
    }
}

/// Euclidean projection of `v` onto `{q : sum q = 1, eps <= q_i <= 1 - eps}`.
fn project_clamped_simplex(v: &[f64], eps: f64) -> Vec<f64> {
    let at = |tau: f64| -> f64 { v.iter().map(|&vi| (vi - tau).clamp(eps, 1.0 - eps)).sum() };
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut out: Vec<f64> = v.iter().map(|&vi| (vi - tau).clamp(eps, 1.0 - eps)).collect();
    // With large entries `vi - tau` is only accurate to ulp(vi), so the sum can
    // miss 1 by far more than rounding. Put the residual on the coordinate
    // with the most room in that direction.
    let residual = 1.0 - out.iter().sum::<f64>();
    let room = |q: f64| if residual > 0.0 { 1.0 - eps - q } else { q - eps };
    if let Some(i) = (0..out.len()).max_by(|&a, &b| room(out[a]).total_cmp(&room(out[b]))) {
        out[i] = (out[i] + residual).clamp(eps, 1.0 - eps);
    }
    out
}

fn binary_row(z: usize, q: f64) -> Simplex {
    let row = if z % 2 == 0 { vec![q, 1.0 - q] } else { vec![1.0 - q, q] };
    Simplex::new(row).expect("q in (0, 1)")
}

fn clamp_row(z: usize, row: &Simplex, eps: f64) -> Simplex {
    if row.len() == 2 {
        binary_row(z, row.get(z % 2).clamp(eps, 1.0 - eps))
    } else {
        Simplex::new(project_clamped_simplex(row.probs(), eps)).expect("projection lands on the simplex")
    }
}

impl TrainerState {
    pub fn new(config: &TrainerConfig, oracle: &RoleModelOracle, nz: usize) -> Result<Self> {
        config.validate()?;
        let nx = oracle.nx();
        if nz < 2 {
            return Err(Error::Config(format!("need at least 2 z symbols, got {nz}")));
        }
        if nx > 2 && config.clamp_epsilon * nx as f64 >= 1.0 {
            return Err(Error::Config(format!(
                "clamp epsilon {} leaves no room on a {nx}-symbol simplex",
                config.clamp_epsilon
            )));
        }
        let init = match &config.init {
            Some(init) => {
                if init.nz() != nz {
                    return Err(Error::dimension("initial estimator rows", nz, init.nz()));
                }
                if init.nx() != nx {
                    return Err(Error::dimension("initial estimator alphabet", nx, init.nx()));
                }
                init.clone()
            }
            None => EstimatorTable::uniform(nx, nz)?,
        };
        let rows = init
            .rows()
            .iter()
            .enumerate()
            .map(|(z, r)| {
                let r = r.as_ref().ok_or(Error::UndefinedConditioning { axis: "Z", symbol: z })?;
                Ok(clamp_row(z, r, config.clamp_epsilon))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainerState {
            est: EstimatorTable::new(rows)?,
            step: 0,
            updates: 0,
            window: VecDeque::with_capacity(config.window + 1),
            counts: vec![0; oracle.ny() * nz],
            nz,
            divergence_trace: Vec::new(),
            param_trace: Vec::new(),
        })
    }

    pub fn estimator(&self) -> &EstimatorTable {
        &self.est
    }

    /// Observations received so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn window(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.window.iter()
    }

    pub fn divergence_trace(&self) -> &[(u64, f64)] {
        &self.divergence_trace
    }

    pub fn param_trace(&self) -> &[(u64, Vec<f64>)] {
        &self.param_trace
    }

    /// Replaces the estimator, e.g. to probe the objective at another point.
    pub fn set_estimator(&mut self, est: EstimatorTable) -> Result<()> {
        if est.nz() != self.nz || est.nx() != self.est.nx() || !est.is_fully_defined() {
            return Err(Error::dimension("estimator rows", self.nz, est.nz()));
        }
        self.est = est;
        Ok(())
    }

    fn buffered(&self) -> Result<f64> {
        if self.window.is_empty() {
            return Err(Error::State("window buffer is empty".into()));
        }
        Ok(self.window.len() as f64)
    }

    /// Pairs `((y, z), count)` present in the window.
    fn occupied(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let nz = self.nz;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| ((i / nz, i % nz), c as f64))
    }

    fn push(&mut self, y: usize, z: usize, capacity: usize) {
        self.window.push_back((y, z));
        self.counts[y * self.nz + z] += 1;
        if self.window.len() > capacity {
            let (oy, oz) = self.window.pop_front().expect("non-empty");
            self.counts[oy * self.nz + oz] -= 1;
        }
    }
}

/// Moving-average divergence `(1/m) sum_i D(P(. | y_i) || Q(. | z_i))` over the
/// buffered observations, at the current estimator.
pub fn windowed_divergence(state: &TrainerState, oracle: &RoleModelOracle) -> Result<f64> {
    let rows: Vec<&[f64]> = state
        .est
        .rows()
        .iter()
        .map(|r| r.as_ref().expect("fully defined").probs())
        .collect();
    windowed_divergence_at(state, oracle, &rows)
}

/// [`windowed_divergence`] with the estimator rows supplied directly. The rows
/// need not be normalized, which lets the objective be differentiated in
/// every coordinate.
pub fn windowed_divergence_at(state: &TrainerState, oracle: &RoleModelOracle, rows: &[&[f64]]) -> Result<f64> {
    let m = state.buffered()?;
    if rows.len() != state.nz {
        return Err(Error::dimension("estimator rows", state.nz, rows.len()));
    }
    let mut total = 0.0;
    for ((y, z), c) in state.occupied() {
        total += c * kl_divergence_raw(oracle.posterior(y)?.probs(), rows[z]);
    }
    Ok(total / m)
}

/// Moving-average gradient of the windowed divergence at the current
/// estimator.
///
/// For a binary X the component for `q_z = Q(k | z)` is
/// `(1/m) sum_i 1(z_i = z) [P(1-k | y_i) / (1 - q_z) - P(k | y_i) / q_z] / ln 2`.
/// Otherwise component `(z, x)` is `-(1/m) sum_i 1(z_i = z) P(x | y_i) / (Q(x | z) ln 2)`.
pub fn windowed_gradient(state: &TrainerState, oracle: &RoleModelOracle) -> Result<Gradient> {
    let m = state.buffered()?;
    let nx = state.est.nx();
    let per_row = if nx == 2 { 1 } else { nx };
    let mut values = vec![0.0; state.nz * per_row];
    for ((y, z), c) in state.occupied() {
        let p = oracle.posterior(y)?;
        let q = state.est.row(z).expect("fully defined");
        if nx == 2 {
            let k = z % 2;
            let qz = q.get(k);
            values[z] += c * (p.get(1 - k) / (1.0 - qz) - p.get(k) / qz);
        } else {
            for x in 0..nx {
                values[z * nx + x] -= c * p.get(x) / q.get(x);
            }
        }
    }
    for v in &mut values {
        *v /= m * LN_2;
    }
    Ok(Gradient { values, per_row })
}

/// Feeds one observation: buffer it, take a gradient step once `start_step`
/// is reached, and record the traces once the window has filled.
pub fn train_step(
    mut state: TrainerState,
    sample: (usize, usize),
    config: &TrainerConfig,
    oracle: &RoleModelOracle,
) -> Result<TrainerState> {
    observe(&mut state, sample, config, oracle)?;
    Ok(state)
}

/// In-place form of [`train_step`].
pub fn observe(
    state: &mut TrainerState,
    (y, z): (usize, usize),
    config: &TrainerConfig,
    oracle: &RoleModelOracle,
) -> Result<()> {
    if z >= state.nz {
        return Err(Error::dimension("z symbol", state.nz, z));
    }
    oracle.posterior(y)?;
    state.step += 1;
    state.push(y, z, config.window);

    if state.step >= config.start_step {
        let eta = config.step_size(state.updates);
        let grad = windowed_gradient(state, oracle)?;
        let eps = config.clamp_epsilon;
        let nx = state.est.nx();
        let rows = (0..state.nz)
            .map(|z| {
                let row = state.est.row(z).expect("fully defined");
                let g = grad.row(z);
                if nx == 2 {
                    let q = row.get(z % 2) - eta * g[0];
                    binary_row(z, q.clamp(eps, 1.0 - eps))
                } else {
                    let v: Vec<f64> = row.probs().iter().zip(g).map(|(q, g)| q - eta * g).collect();
                    Simplex::new(project_clamped_simplex(&v, eps)).expect("projection lands on the simplex")
                }
            })
            .collect();
        state.est = EstimatorTable::new(rows)?;
        state.updates += 1;
    }

    if state.step >= config.window as u64 {
        let d = windowed_divergence(state, oracle)?;
        state.divergence_trace.push((state.step, d));
        state.param_trace.push((state.step, free_parameters(&state.est)));
    }
    Ok(())
}

/// Runs `config.n_samples` observations through a fresh trainer.
pub fn train_run(
    observations: impl IntoIterator<Item = (usize, usize)>,
    nz: usize,
    config: &TrainerConfig,
    oracle: &RoleModelOracle,
) -> Result<TrainerState> {
    if config.n_samples < config.start_step {
        return Err(Error::Config(format!(
            "{} samples never reach the start step {}",
            config.n_samples, config.start_step
        )));
    }
    let mut state = TrainerState::new(config, oracle, nz)?;
    let mut seen = 0;
    for obs in observations.into_iter().take(config.n_samples as usize) {
        observe(&mut state, obs, config, oracle)?;
        seen += 1;
    }
    if seen < config.n_samples {
        return Err(Error::State(format!(
            "stream ended after {seen} of {} observations",
            config.n_samples
        )));
    }
    Ok(state)
}

/// Simulates the joint with `config.seed` and trains on the `(y, z)` part of
/// each draw; `x` is dropped before the trainer sees it.
pub fn train_on_joint(joint: &Joint3, config: &TrainerConfig, oracle: &RoleModelOracle) -> Result<TrainerState> {
    train_run(
        SampleStream::new(joint, config.seed).observations(),
        joint.nz(),
        config,
        oracle,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::kl_divergence;

    #[test]
    fn projection_survives_large_entries() {
        for v in [
            vec![2.0e6, -3.5e6, 1.0e6 + 0.3],
            vec![0.2, 0.3, 0.5],
            vec![1e9, 1e9, -1e9, 7.0],
        ] {
            let eps = 1e-9;
            let p = project_clamped_simplex(&v, eps);
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "{p:?}");
            assert!(p.iter().all(|&q| (eps..=1.0 - eps).contains(&q)), "{p:?}");
        }
        let inside = project_clamped_simplex(&[0.2, 0.3, 0.5], 1e-6);
        assert!(inside.iter().zip([0.2, 0.3, 0.5]).all(|(a, b)| (a - b).abs() < 1e-15), "{inside:?}");
    }

    fn binary_oracle() -> RoleModelOracle {
        RoleModelOracle::new(
            StochasticMatrix::new(vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap(),
        )
    }

    fn small_config() -> TrainerConfig {
        TrainerConfig {
            window: 4,
            start_step: 5,
            n_samples: 5,
            ..TrainerConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainerConfig::default().validate().is_ok());
        let bad = [
            TrainerConfig { window: 0, ..Default::default() },
            TrainerConfig { start_step: 100, ..Default::default() },
            TrainerConfig { clamp_epsilon: 0.5, ..Default::default() },
            TrainerConfig { step_size_initial: 0.0, ..Default::default() },
            TrainerConfig { step_size_tau: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let c = TrainerConfig::default();
        assert_eq!(c.step_size(0), 0.05);
        assert!((c.step_size(1000) - 0.025).abs() < 1e-17);
    }

    #[test]
    fn empty_window_is_a_state_error() {
        let oracle = binary_oracle();
        let state = TrainerState::new(&small_config(), &oracle, 2).unwrap();
        assert!(matches!(windowed_divergence(&state, &oracle), Err(Error::State(_))));
        assert!(matches!(windowed_gradient(&state, &oracle), Err(Error::State(_))));
    }

    #[test]
    fn single_sample_divergence_and_gradient() {
        let oracle = binary_oracle();
        let config = small_config();
        let mut state = TrainerState::new(&config, &oracle, 2).unwrap();
        state
            .set_estimator(EstimatorTable::from_vecs(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap())
            .unwrap();
        observe(&mut state, (0, 1), &config, &oracle).unwrap();
        let d = windowed_divergence(&state, &oracle).unwrap();
        let direct = kl_divergence(oracle.posterior(0).unwrap(), state.estimator().row(1).unwrap()).unwrap();
        assert_eq!(d, direct);

        let g = windowed_gradient(&state, &oracle).unwrap();
        // no sample with z = 0
        assert_eq!(g.values[0], 0.0);

        let mut sym = TrainerState::new(&config, &oracle, 2).unwrap();
        observe(&mut sym, (1, 0), &config, &oracle).unwrap();
        assert_eq!(windowed_gradient(&sym, &oracle).unwrap().values[0], 0.0);
    }

    #[test]
    fn no_updates_before_start_step() {
        let oracle = binary_oracle();
        let config = TrainerConfig { n_samples: 10, ..small_config() };
        let mut state = TrainerState::new(&config, &oracle, 2).unwrap();
        let start = state.estimator().clone();
        for i in 0..4 {
            observe(&mut state, (0, i % 2), &config, &oracle).unwrap();
            assert_eq!(state.estimator(), &start);
        }
        assert_eq!(state.window().count(), 4);
        assert_eq!(state.divergence_trace().len(), 1);
        observe(&mut state, (0, 0), &config, &oracle).unwrap();
        assert_ne!(state.estimator(), &start);
        assert_eq!(state.window().count(), 4);
        assert_eq!(state.updates(), 1);
    }

    #[test]
    fn zero_gradient_leaves_estimator() {
        // every buffered posterior equals the (uniform) estimator row
        let oracle = binary_oracle();
        let config = TrainerConfig { n_samples: 50, ..small_config() };
        let state = train_run(std::iter::repeat((1, 0)).take(50), 2, &config, &oracle).unwrap();
        assert_eq!(state.estimator(), &EstimatorTable::uniform(2, 2).unwrap());
    }

    #[test]
    fn general_alphabet_gradient_matches_finite_differences() {
        let oracle = RoleModelOracle::new(
            StochasticMatrix::new(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6], vec![0.25, 0.5, 0.25]])
                .unwrap(),
        );
        let config = TrainerConfig { window: 20, start_step: 1000, ..TrainerConfig::default() };
        let mut state = TrainerState::new(&config, &oracle, 2).unwrap();
        state
            .set_estimator(
                EstimatorTable::from_vecs(vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]]).unwrap(),
            )
            .unwrap();
        for i in 0..20 {
            observe(&mut state, ((i * 7) % 3, (i * 5) % 2), &config, &oracle).unwrap();
        }
        let grad = windowed_gradient(&state, &oracle).unwrap();
        let base: Vec<Vec<f64>> = (0..2)
            .map(|z| state.estimator().row(z).unwrap().probs().to_vec())
            .collect();
        let h = 1e-6;
        for z in 0..2 {
            for x in 0..3 {
                let eval = |delta: f64| {
                    let mut rows = base.clone();
                    rows[z][x] += delta;
                    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                    windowed_divergence_at(&state, &oracle, &refs).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let g = grad.row(z)[x];
                assert!((fd - g).abs() <= 1e-4 * g.abs().max(1e-8), "{fd} vs {g}");
            }
        }
    }

    #[test]
    fn projection_stays_in_bounds() {
        let eps = 1e-3;
        for v in [vec![5.0, -3.0, 0.2], vec![0.3, 0.3, 0.3], vec![-1.0, -1.0, -1.0, 10.0]] {
            let p = project_clamped_simplex(&v, eps);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&q| (eps..=1.0 - eps).contains(&q)));
        }
    }

    #[test]
    fn unknown_symbols_are_rejected() {
        let oracle = binary_oracle();
        let config = small_config();
        let mut state = TrainerState::new(&config, &oracle, 2).unwrap();
        assert!(observe(&mut state, (3, 0), &config, &oracle).is_err());
        assert!(observe(&mut state, (0, 2), &config, &oracle).is_err());
        assert_eq!(state.step(), 0);
    }

    #[test]
    fn short_stream_and_short_budget() {
        let oracle = binary_oracle();
        let config = TrainerConfig { n_samples: 10, ..small_config() };
        assert!(matches!(
            train_run(std::iter::repeat((0, 0)).take(3), 2, &config, &oracle),
            Err(Error::State(_))
        ));
        let config = TrainerConfig { n_samples: 4, ..small_config() };
        assert!(matches!(
            train_run(std::iter::repeat((0, 0)), 2, &config, &oracle),
            Err(Error::Config(_))
        ));
    }
}
