//! C ABI over the `rolemodel` library.
//!
//! Every function returns an [`RmStatus`]; results come back through out
//! pointers. Objects are opaque handles released with their `*_free`
//! function. After a non-`Ok` status, [`rm_last_error`] describes the failure
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rolemodel::prob::{EstimatorTable, Joint3, Simplex, StochasticMatrix};
use rolemodel::strategy::{
    check_theorem1, check_theorem2, direct_solution, expected_divergence, role_model_exact, role_model_numeric,
    sufficiency_check, NumericOptions, TheoremCheck,
};
use rolemodel::trainer::{
    observe, train_on_joint, windowed_divergence, RoleModelOracle, TrainerConfig, TrainerState,
};
use rolemodel::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Sizes that do not fit together.
    Dimension = 2,
    /// Not a probability distribution.
    InvalidDistribution = 3,
    /// Conditioning on a zero-probability symbol.
    Undefined = 4,
    /// The joint does not satisfy a theorem's hypothesis.
    Precondition = 5,
    Convergence = 6,
    InvalidConfig = 7,
    InvalidState = 8,
    Unsupported = 9,
    Io = 10,
    /// A Rust panic was caught at the boundary.
    Internal = 99,
}

/// A joint distribution `P(x, y, z)`.
pub struct RmJoint(Joint3);

/// A table `Q(x | z)`; rows for zero-probability z may be undefined.
pub struct RmEstimator(EstimatorTable);

/// An online trainer with its configuration and role-model posterior.
pub struct RmTrainer {
    state: TrainerState,
    config: TrainerConfig,
    oracle: RoleModelOracle,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RmTheoremCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RmBoundCheck {
    pub check: RmTheoremCheck,
    pub equality: bool,
    pub estimator_is_direct: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RmTrainerConfig {
    pub window: usize,
    pub start_step: u64,
    pub step_size_initial: f64,
    pub step_size_tau: f64,
    pub clamp_epsilon: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl From<&TheoremCheck> for RmTheoremCheck {
    fn from(c: &TheoremCheck) -> Self {
        RmTheoremCheck {
            lhs: c.lhs,
            rhs: c.rhs,
            gap: c.gap,
            tolerance: c.tolerance,
            passed: c.passed,
        }
    }
}

impl From<&RmTrainerConfig> for TrainerConfig {
    fn from(c: &RmTrainerConfig) -> Self {
        TrainerConfig {
            window: c.window,
            start_step: c.start_step,
            init: None,
            step_size_initial: c.step_size_initial,
            step_size_tau: c.step_size_tau,
            clamp_epsilon: c.clamp_epsilon,
            n_samples: c.n_samples,
            seed: c.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> RmStatus {
    match e {
        Error::Dimension { .. } => RmStatus::Dimension,
        Error::InvalidDistribution(_) => RmStatus::InvalidDistribution,
        Error::UndefinedConditioning { .. } => RmStatus::Undefined,
        Error::Convergence { .. } => RmStatus::Convergence,
        Error::Precondition(_) => RmStatus::Precondition,
        Error::State(_) => RmStatus::InvalidState,
        Error::Unsupported(_) => RmStatus::Unsupported,
        Error::Config(_) => RmStatus::InvalidConfig,
        Error::Parse { .. } | Error::Io { .. } => RmStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status plus a thread-local
/// message.
fn guard(f: impl FnOnce() -> Result<(), RmStatusError>) -> RmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            RmStatus::Ok
        }
        Ok(Err(RmStatusError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            RmStatus::Internal
        }
    }
}

struct RmStatusError(RmStatus, String);

impl From<Error> for RmStatusError {
    fn from(e: Error) -> Self {
        RmStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> RmStatusError {
    RmStatusError(RmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], RmStatusError> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, RmStatusError> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, RmStatusError> {
    p.as_mut().ok_or_else(|| null(what))
}

fn area(a: usize, b: usize) -> Result<usize, RmStatusError> {
    a.checked_mul(b)
        .ok_or_else(|| RmStatusError(RmStatus::Dimension, "alphabet sizes overflow".into()))
}

fn rows(values: &[f64], width: usize) -> Vec<Vec<f64>> {
    values.chunks(width).map(<[f64]>::to_vec).collect()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in bytes,
/// excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a joint from `nx * ny * nz` cells in row-major `(x, y, z)` order.
///
/// # Safety
/// `cells` must point to `nx * ny * nz` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_joint_new(
    nx: usize,
    ny: usize,
    nz: usize,
    cells: *const f64,
    out_joint: *mut *mut RmJoint,
) -> RmStatus {
    guard(|| {
        let dst = out(out_joint, "out")?;
        let n = area(area(nx, ny)?, nz)?;
        let joint = Joint3::new(nx, ny, nz, slice(cells, n, "cells")?.to_vec())?;
        *dst = Box::into_raw(Box::new(RmJoint(joint)));
        Ok(())
    })
}

/// Builds the Markov joint `prior(x) P(y | x) P(z | y)`. `xy` is `nx` rows
/// of `ny` entries; `yz` is `ny` rows of `nz` entries.
///
/// # Safety
/// Pointers must reference arrays of the stated sizes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_joint_from_chain(
    nx: usize,
    ny: usize,
    nz: usize,
    prior: *const f64,
    xy: *const f64,
    yz: *const f64,
    out_joint: *mut *mut RmJoint,
) -> RmStatus {
    guard(|| {
        let dst = out(out_joint, "out")?;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidDistribution("empty alphabet".into()).into());
        }
        let prior = Simplex::new(slice(prior, nx, "prior")?.to_vec())?;
        let xy = StochasticMatrix::new(rows(slice(xy, area(nx, ny)?, "xy")?, ny))?;
        let yz = StochasticMatrix::new(rows(slice(yz, area(ny, nz)?, "yz")?, nz))?;
        let joint = rolemodel::channels::build_joint(&prior, &xy, &yz)?;
        *dst = Box::into_raw(Box::new(RmJoint(joint)));
        Ok(())
    })
}

/// # Safety
/// `joint` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rm_joint_free(joint: *mut RmJoint) {
    if !joint.is_null() {
        drop(Box::from_raw(joint));
    }
}

/// # Safety
/// `joint` must be a live handle; the size pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_joint_dims(
    joint: *const RmJoint,
    nx: *mut usize,
    ny: *mut usize,
    nz: *mut usize,
) -> RmStatus {
    guard(|| {
        let (a, b, c) = handle(joint, "joint")?.0.dims();
        *out(nx, "nx")? = a;
        *out(ny, "ny")? = b;
        *out(nz, "nz")? = c;
        Ok(())
    })
}

/// `I(X; Z | Y)` in bits.
///
/// # Safety
/// `joint` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_joint_conditional_mutual_information(
    joint: *const RmJoint,
    value: *mut f64,
) -> RmStatus {
    guard(|| {
        let j = handle(joint, "joint")?;
        *out(value, "value")? = j.0.conditional_mutual_information();
        Ok(())
    })
}

/// Builds an estimator from `nz` rows of `nx` entries.
///
/// # Safety
/// `values` must point to `nx * nz` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_estimator_new(
    nx: usize,
    nz: usize,
    values: *const f64,
    out_est: *mut *mut RmEstimator,
) -> RmStatus {
    guard(|| {
        let dst = out(out_est, "out")?;
        if nx == 0 {
            return Err(Error::InvalidDistribution("empty alphabet".into()).into());
        }
        let est = EstimatorTable::from_vecs(rows(slice(values, area(nx, nz)?, "values")?, nx))?;
        *dst = Box::into_raw(Box::new(RmEstimator(est)));
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rm_estimator_free(est: *mut RmEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// # Safety
/// `est` must be a live handle; the size pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_estimator_dims(est: *const RmEstimator, nx: *mut usize, nz: *mut usize) -> RmStatus {
    guard(|| {
        let e = handle(est, "estimator")?;
        *out(nx, "nx")? = e.0.nx();
        *out(nz, "nz")? = e.0.nz();
        Ok(())
    })
}

/// `Q(x | z)`. Returns `Undefined` for a row left undefined because
/// `P(z) = 0`.
///
/// # Safety
/// `est` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_estimator_get(est: *const RmEstimator, z: usize, x: usize, value: *mut f64) -> RmStatus {
    guard(|| {
        let e = &handle(est, "estimator")?.0;
        let dst = out(value, "value")?;
        if z >= e.nz() {
            return Err(Error::Dimension { context: "z symbol", expected: e.nz(), found: z }.into());
        }
        if x >= e.nx() {
            return Err(Error::Dimension { context: "x symbol", expected: e.nx(), found: x }.into());
        }
        let row = e.row(z).ok_or(Error::UndefinedConditioning { axis: "Z", symbol: z })?;
        *dst = row.get(x);
        Ok(())
    })
}

unsafe fn solve(
    joint: *const RmJoint,
    out_est: *mut *mut RmEstimator,
    f: impl FnOnce(&Joint3) -> Result<EstimatorTable, RmStatusError>,
) -> RmStatus {
    guard(|| {
        let dst = out(out_est, "out")?;
        let est = f(&handle(joint, "joint")?.0)?;
        *dst = Box::into_raw(Box::new(RmEstimator(est)));
        Ok(())
    })
}

/// The direct solution `P(x | z)`.
///
/// # Safety
/// `joint` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_direct_solution(joint: *const RmJoint, out_est: *mut *mut RmEstimator) -> RmStatus {
    solve(joint, out_est, |j| Ok(direct_solution(j)))
}

/// The closed-form role-model solution `sum_y P(y | z) P(x | y)`.
///
/// # Safety
/// `joint` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_role_model_exact(joint: *const RmJoint, out_est: *mut *mut RmEstimator) -> RmStatus {
    solve(joint, out_est, |j| Ok(role_model_exact(j)))
}

/// Numeric minimization of the expected divergence. On `Convergence` the
/// last iterate is still returned through `out`.
///
/// # Safety
/// `joint` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_role_model_numeric(
    joint: *const RmJoint,
    tol: f64,
    max_iters: usize,
    out_est: *mut *mut RmEstimator,
) -> RmStatus {
    guard(|| {
        let dst = out(out_est, "out")?;
        let opts = NumericOptions {
            tol,
            max_iters,
            warm_start: None,
        };
        match role_model_numeric(&handle(joint, "joint")?.0, &opts) {
            Ok(sol) => {
                *dst = Box::into_raw(Box::new(RmEstimator(sol.est)));
                Ok(())
            }
            Err(Error::Convergence { iterations, last }) => {
                *dst = Box::into_raw(Box::new(RmEstimator(*last)));
                Err(RmStatusError(
                    RmStatus::Convergence,
                    format!("no convergence after {iterations} iterations"),
                ))
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// Expected divergence `ED(P_{X|Y} || Q)` in bits.
///
/// # Safety
/// Handles must be live and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_expected_divergence(
    joint: *const RmJoint,
    est: *const RmEstimator,
    value: *mut f64,
) -> RmStatus {
    guard(|| {
        let dst = out(value, "value")?;
        *dst = expected_divergence(&handle(joint, "joint")?.0, &handle(est, "estimator")?.0)?.total;
        Ok(())
    })
}

/// Checks `ED(P_{X|Y} || Q) = H(X|Z) - H(X|Y) + ED(P_{X|Z} || Q)` on a Markov
/// joint (`Precondition` otherwise).
///
/// # Safety
/// Handles must be live and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_check_theorem1(
    joint: *const RmJoint,
    est: *const RmEstimator,
    result: *mut RmTheoremCheck,
) -> RmStatus {
    guard(|| {
        let dst = out(result, "result")?;
        *dst = (&check_theorem1(&handle(joint, "joint")?.0, &handle(est, "estimator")?.0)?).into();
        Ok(())
    })
}

/// Checks `ED(P_{X|YZ} || Q) >= H(X|Z) - H(X|YZ)` on any joint.
///
/// # Safety
/// Handles must be live and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_check_theorem2(
    joint: *const RmJoint,
    est: *const RmEstimator,
    result: *mut RmBoundCheck,
) -> RmStatus {
    guard(|| {
        let dst = out(result, "result")?;
        let b = check_theorem2(&handle(joint, "joint")?.0, &handle(est, "estimator")?.0)?;
        *dst = RmBoundCheck {
            check: (&b.check).into(),
            equality: b.equality,
            estimator_is_direct: b.estimator_is_direct,
        };
        Ok(())
    })
}

/// Checks `I(X; S_d(Z)) = I(X; Z)`.
///
/// # Safety
/// `joint` must be live and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_sufficiency_check(joint: *const RmJoint, result: *mut RmTheoremCheck) -> RmStatus {
    guard(|| {
        let dst = out(result, "result")?;
        *dst = (&sufficiency_check(&handle(joint, "joint")?.0)?).into();
        Ok(())
    })
}

/// Library defaults: window 100, first update at step 101, step size
/// `0.05 / (1 + t / 1000)`, clamp `1e-6`, 200000 samples, seed 1.
#[no_mangle]
pub extern "C" fn rm_trainer_config_default() -> RmTrainerConfig {
    let d = TrainerConfig::default();
    RmTrainerConfig {
        window: d.window,
        start_step: d.start_step,
        step_size_initial: d.step_size_initial,
        step_size_tau: d.step_size_tau,
        clamp_epsilon: d.clamp_epsilon,
        n_samples: d.n_samples,
        seed: d.seed,
    }
}

/// Creates a trainer for `nz` observable symbols. `posterior_xy` holds the
/// role model's `P(x | y)` as `ny` rows of `nx` entries.
///
/// # Safety
/// `posterior_xy` must point to `nx * ny` doubles, `config` must be readable
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_trainer_new(
    nx: usize,
    ny: usize,
    nz: usize,
    posterior_xy: *const f64,
    config: *const RmTrainerConfig,
    out_trainer: *mut *mut RmTrainer,
) -> RmStatus {
    guard(|| {
        let dst = out(out_trainer, "out")?;
        if nx == 0 {
            return Err(Error::InvalidDistribution("empty alphabet".into()).into());
        }
        let config = TrainerConfig::from(handle(config, "config")?);
        let oracle = RoleModelOracle::new(StochasticMatrix::new(rows(slice(posterior_xy, area(nx, ny)?, "posterior_xy")?, nx))?);
        let state = TrainerState::new(&config, &oracle, nz)?;
        *dst = Box::into_raw(Box::new(RmTrainer { state, config, oracle }));
        Ok(())
    })
}

/// # Safety
/// `trainer` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rm_trainer_free(trainer: *mut RmTrainer) {
    if !trainer.is_null() {
        drop(Box::from_raw(trainer));
    }
}

/// Feeds one observation `(y, z)`.
///
/// # Safety
/// `trainer` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rm_trainer_observe(trainer: *mut RmTrainer, y: usize, z: usize) -> RmStatus {
    guard(|| {
        let t = out(trainer, "trainer")?;
        observe(&mut t.state, (y, z), &t.config, &t.oracle)?;
        Ok(())
    })
}

/// Number of observations fed so far.
///
/// # Safety
/// `trainer` must be live and `step` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_trainer_step(trainer: *const RmTrainer, step: *mut u64) -> RmStatus {
    guard(|| {
        *out(step, "step")? = handle(trainer, "trainer")?.state.step();
        Ok(())
    })
}

/// Moving-average divergence over the buffered observations.
///
/// # Safety
/// `trainer` must be live and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_trainer_windowed_divergence(trainer: *const RmTrainer, value: *mut f64) -> RmStatus {
    guard(|| {
        let t = handle(trainer, "trainer")?;
        *out(value, "value")? = windowed_divergence(&t.state, &t.oracle)?;
        Ok(())
    })
}

/// Copies the trainer's current estimator into a new handle.
///
/// # Safety
/// `trainer` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_trainer_estimator(trainer: *const RmTrainer, out_est: *mut *mut RmEstimator) -> RmStatus {
    guard(|| {
        let dst = out(out_est, "out")?;
        let est = handle(trainer, "trainer")?.state.estimator().clone();
        *dst = Box::into_raw(Box::new(RmEstimator(est)));
        Ok(())
    })
}

/// Simulates `config.n_samples` draws from `joint` with `config.seed` and
/// trains blindly on the `(y, z)` pairs, using the joint's own `P(x | y)` as
/// the role model.
///
/// # Safety
/// `joint` must be live, `config` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_train_on_joint(
    joint: *const RmJoint,
    config: *const RmTrainerConfig,
    out_est: *mut *mut RmEstimator,
) -> RmStatus {
    guard(|| {
        let dst = out(out_est, "out")?;
        let j = &handle(joint, "joint")?.0;
        let config = TrainerConfig::from(handle(config, "config")?);
        let state = train_on_joint(j, &config, &RoleModelOracle::from_joint(j))?;
        *dst = Box::into_raw(Box::new(RmEstimator(state.estimator().clone())));
        Ok(())
    })
}
