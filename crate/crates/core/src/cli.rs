//! The `rolemodel` command line.
//!
//! Exit codes: 0 when every advertised check passed, 1 when a check or
//! tolerance failed, 2 for usage, parse and I/O errors.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::channels::ChannelSpec;
use crate::error::Error;
use crate::experiments::{run_figure_traces, scenario_a, scenario_b, Scenario, TraceFile};
use crate::formats::{estimator_to_text, load_estimator, load_samples, ProblemSpec};
use crate::prob::{binary_entropy, Axis, EstimatorTable, Simplex, StochasticMatrix};
use crate::strategy::{
    check_theorem1, check_theorem2, direct_solution, expected_divergence, expected_divergence_given_z,
    role_model_exact, role_model_numeric, BoundCheck, NumericOptions, TheoremCheck, MARKOV_TOLERANCE,
};
use crate::sweep::{run_case, CaseReport, Sizes};
use crate::trainer::{
    free_parameters, parameter_names, train_on_joint, train_run, windowed_divergence, RoleModelOracle,
    TrainerConfig, TrainerState,
};

#[derive(Debug, Parser)]
#[command(name = "rolemodel", version, about = "Role-model estimation on finite alphabets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Z-channel cascade: direct vs role-model solution and the divergence identity.
    ExampleA {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// BEC followed by an unknown channel: blind online training.
    ExampleB {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        trainer: TrainerFlags,
        /// Largest allowed |trained - exact| over the free parameters.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        /// Erasure probability of the known channel.
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        /// Unknown channel P(z | y) as rows "a,b;c,d;e,f" for y = 0, erasure, 1.
        #[arg(long)]
        channel: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Randomized sweep over the divergence identities.
    VerifyTheorems {
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Alphabet sizes as "min-max".
        #[arg(long, default_value = "2-5")]
        sizes: String,
        /// Rerun the case with this seed and print every quantity.
        #[arg(long)]
        replay: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Fit Q(x | z) from a (y, z) stream and write the estimator.
    Train {
        /// Problem file (prior and xy channel, or an explicit joint).
        #[arg(long)]
        spec: PathBuf,
        /// CSV with header "y,z"; without it the problem is simulated.
        #[arg(long)]
        samples_file: Option<PathBuf>,
        /// Size of the Z alphabet when the problem file does not fix it.
        #[arg(long)]
        nz: Option<usize>,
        #[command(flatten)]
        trainer: TrainerFlags,
        /// Estimator output file.
        #[arg(long)]
        out: PathBuf,
        /// Optional trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Expected divergence of an estimator and its distance to the lower bound.
    Evaluate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        estimator: PathBuf,
        /// Fail (exit 1) when the gap to the bound exceeds this.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct TrainerFlags {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of observations.
    #[arg(long, default_value_t = 200_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 100)]
    pub window: usize,
    #[arg(long, default_value_t = 101)]
    pub start_step: u64,
    #[arg(long, default_value_t = 0.05)]
    pub eta0: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
}

impl TrainerFlags {
    fn config(&self) -> TrainerConfig {
        TrainerConfig {
            window: self.window,
            start_step: self.start_step,
            init: None,
            step_size_initial: self.eta0,
            step_size_tau: self.tau,
            clamp_epsilon: self.epsilon,
            n_samples: self.samples,
            seed: self.seed,
        }
    }
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Check(String),
    Library(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Check(_) | Failure::Library(Error::Convergence { .. }) => 1,
            Failure::Usage(_) | Failure::Library(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::Library(e) => write!(f, "error: {e}"),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Runs a parsed command, writing reports to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::ExampleA { out: dir, json } => cmd_example_a(&dir, json, out),
        Command::ExampleB {
            out: dir,
            trainer,
            tolerance,
            delta,
            channel,
            json,
        } => cmd_example_b(&dir, &trainer, tolerance, delta, channel.as_deref(), json, out),
        Command::VerifyTheorems {
            trials,
            seed,
            sizes,
            replay,
            json,
        } => cmd_verify_theorems(trials, seed, &sizes, replay, json, out),
        Command::Train {
            spec,
            samples_file,
            nz,
            trainer,
            out: dest,
            trace,
            json,
        } => cmd_train(&spec, samples_file.as_deref(), nz, &trainer, &dest, trace.as_deref(), json, out),
        Command::Evaluate {
            spec,
            estimator,
            tolerance,
            json,
        } => cmd_evaluate(&spec, &estimator, tolerance, json, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "{f}");
            f.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                2
            } else {
                // --help and --version
                let _ = write!(out, "{}", e.render());
                0
            }
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CmdResult {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Library(Error::io("<stdout>", e)))
}

fn prepare_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Library(Error::io(dir, e)))
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::Library(Error::io(path, e)))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn rows_of(est: &EstimatorTable) -> Vec<Option<Vec<f64>>> {
    est.rows().iter().map(|r| r.as_ref().map(|r| r.probs().to_vec())).collect()
}

fn format_rows(est: &EstimatorTable) -> String {
    est.rows()
        .iter()
        .enumerate()
        .map(|(z, r)| match r {
            Some(r) => format!("  z={z}: {:?}\n", r.probs()),
            None => format!("  z={z}: undefined\n"),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct CheckLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckLine {
    CheckLine { name, passed, detail }
}

fn check_failures(checks: &[CheckLine]) -> CmdResult {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({})", c.name, c.detail))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join("; ")))
    }
}

fn render_checks(checks: &[CheckLine]) -> String {
    checks
        .iter()
        .map(|c| {
            format!(
                "[{}] {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ExampleAReport {
    compound_channel: Vec<Vec<f64>>,
    direct_solution: Vec<Option<Vec<f64>>>,
    role_model_exact: Vec<Option<Vec<f64>>>,
    role_model_numeric: Vec<Option<Vec<f64>>>,
    closed_form_points: usize,
    closed_form_max_abs_error: f64,
    h_x_given_z: f64,
    h_x_given_y: f64,
    expected_divergence_at_optimum: f64,
    theorem1_numeric: TheoremCheck,
    theorem1_off_optimum: TheoremCheck,
    checks: Vec<CheckLine>,
}

fn cmd_example_a(dir: &Path, json: bool, out: &mut dyn Write) -> CmdResult {
    let scenario = scenario_a();
    let joint = scenario.joint()?;
    let compound = scenario.compound_channel()?;
    let direct = direct_solution(&joint);
    let exact = role_model_exact(&joint);
    let numeric = role_model_numeric(&joint, &NumericOptions::default())?.est;

    let h13 = binary_entropy(1.0 / 3.0);
    let closed_form_points = 50;
    let mut closed_form_max_abs_error: f64 = 0.0;
    for k in 1..=closed_form_points {
        let q0 = k as f64 / (closed_form_points + 1) as f64;
        let q = Simplex::new(vec![q0, 1.0 - q0])?;
        let computed = expected_divergence_given_z(&joint, &q, 0)?;
        let closed = -(6.0 / 7.0) * h13 - (4.0 / 7.0) * q0.log2() - (3.0 / 7.0) * (1.0 - q0).log2();
        closed_form_max_abs_error = closed_form_max_abs_error.max((computed - closed).abs());
    }

    let hxz = joint.conditional_entropy(Axis::X, Axis::Z)?;
    let hxy = joint.conditional_entropy(Axis::X, Axis::Y)?;
    let ed_opt = expected_divergence(&joint, &exact)?.total;
    let theorem1_numeric = check_theorem1(&joint, &numeric)?;
    let off = EstimatorTable::from_vecs(vec![vec![0.3, 0.7], vec![0.2, 0.8]])?;
    let theorem1_off_optimum = check_theorem1(&joint, &off)?;

    let q0 = direct.row(0).map_or(f64::NAN, |r| r.get(0));
    let q1 = direct.row(1).map_or(f64::NAN, |r| r.get(1));
    let exact_tv = exact.max_tv(&direct, |_| true)?;
    let numeric_tv = numeric.max_tv(&exact, |_| true)?;
    let checks = vec![
        check(
            "direct_posterior",
            (q0 - 4.0 / 7.0).abs() <= 1e-12 && (q1 - 1.0).abs() <= 1e-12,
            format!("q0 = {q0} (4/7 = {}), q1 = {q1}", 4.0 / 7.0),
        ),
        check(
            "role_model_exact_equals_direct",
            exact_tv <= 1e-12,
            format!("max TV {exact_tv:e}"),
        ),
        check(
            "role_model_numeric_equals_exact",
            numeric_tv <= 1e-6,
            format!("max TV {numeric_tv:e}"),
        ),
        check(
            "closed_form_objective",
            closed_form_max_abs_error <= 1e-12,
            format!("{closed_form_points} points, max |error| {closed_form_max_abs_error:e}"),
        ),
        check(
            "minimum_equals_entropy_gap",
            (ed_opt - (hxz - hxy)).abs() <= 1e-12,
            format!("ED = {ed_opt}, H(X|Z) - H(X|Y) = {}", hxz - hxy),
        ),
        check(
            "divergence_identity",
            theorem1_numeric.passed && theorem1_off_optimum.passed,
            format!(
                "gap {:e} at the numeric optimum, {:e} off it",
                theorem1_numeric.gap, theorem1_off_optimum.gap
            ),
        ),
    ];

    let report = ExampleAReport {
        compound_channel: compound.rows().iter().map(|r| r.probs().to_vec()).collect(),
        direct_solution: rows_of(&direct),
        role_model_exact: rows_of(&exact),
        role_model_numeric: rows_of(&numeric),
        closed_form_points,
        closed_form_max_abs_error,
        h_x_given_z: hxz,
        h_x_given_y: hxy,
        expected_divergence_at_optimum: ed_opt,
        theorem1_numeric,
        theorem1_off_optimum,
        checks,
    };

    let (text, file) = if json {
        (to_json(&report), "example_a_report.json")
    } else {
        let mut t = String::from("Z-channel cascade, crossovers 1/2 and 1/2, uniform input\n\n");
        let _ = writeln!(t, "compound channel P(z | x): {:?}", report.compound_channel);
        let _ = write!(t, "direct solution P(x | z):\n{}", format_rows(&direct));
        let _ = write!(t, "role model, closed form:\n{}", format_rows(&exact));
        let _ = write!(t, "role model, numeric:\n{}", format_rows(&numeric));
        let _ = writeln!(t, "H(X|Z) = {hxz}, H(X|Y) = {hxy}, ED at optimum = {ed_opt}\n");
        t.push_str(&render_checks(&report.checks));
        (t, "example_a_report.txt")
    };
    prepare_dir(dir)?;
    write_file(&dir.join(file), &text)?;
    emit(out, &text)?;
    check_failures(&report.checks)
}

#[derive(Debug, Serialize)]
struct ExampleBSummary {
    scenario: String,
    seed: u64,
    n_samples: u64,
    parameter_names: Vec<String>,
    trained: Vec<f64>,
    exact: Vec<f64>,
    max_abs_error: f64,
    tolerance: f64,
    final_windowed_divergence: f64,
    minimum_expected_divergence: f64,
    trace_file: String,
    passed: bool,
}

fn parse_matrix_flag(text: &str) -> Result<StochasticMatrix, Failure> {
    let rows = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Failure::Usage(format!("not a number in --channel: {v:?}")))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    StochasticMatrix::new(rows).map_err(|e| Failure::Usage(format!("--channel: {e}")))
}

fn validated_config(flags: &TrainerFlags) -> Result<TrainerConfig, Failure> {
    let config = flags.config();
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if config.n_samples < config.start_step {
        return Err(Failure::Usage(format!(
            "--samples {} is below --start-step {}",
            config.n_samples, config.start_step
        )));
    }
    Ok(config)
}

fn cmd_example_b(
    dir: &Path,
    flags: &TrainerFlags,
    tolerance: f64,
    delta: f64,
    channel: Option<&str>,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let config = validated_config(flags)?;
    let base = scenario_b();
    let scenario = if delta != 0.25 || channel.is_some() {
        let xy = ChannelSpec::bec(delta).map_err(|e| Failure::Usage(format!("--delta: {e}")))?;
        let yz = match channel {
            Some(text) => {
                let m = parse_matrix_flag(text)?;
                if m.input_size() != 3 {
                    return Err(Failure::Usage(format!(
                        "--channel needs 3 rows (y = 0, erasure, 1), got {}",
                        m.input_size()
                    )));
                }
                ChannelSpec::general(m)
            }
            None => base.yz_channel.clone(),
        };
        Scenario::derive("scenario-b-modified", base.prior.clone(), xy, yz)?
    } else {
        base
    };
    if !scenario.expected_posterior.is_fully_defined() {
        return Err(Failure::Usage("some z symbol has zero probability".into()));
    }

    prepare_dir(dir)?;
    let trace_path = dir.join("example_b_trace.csv");
    let (_, state) = run_figure_traces(&scenario, &config, &trace_path)?;
    let joint = scenario.joint()?;
    let oracle = RoleModelOracle::from_joint(&joint);

    let trained = free_parameters(state.estimator());
    let exact = free_parameters(&scenario.expected_posterior);
    let max_abs_error = trained
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let est = state.estimator();
    let summary = ExampleBSummary {
        scenario: scenario.name.clone(),
        seed: config.seed,
        n_samples: config.n_samples,
        parameter_names: parameter_names(est.nx(), est.nz()),
        trained,
        exact,
        max_abs_error,
        tolerance,
        final_windowed_divergence: windowed_divergence(&state, &oracle)?,
        minimum_expected_divergence: joint.conditional_entropy(Axis::X, Axis::Z)?
            - joint.conditional_entropy(Axis::X, Axis::Y)?,
        trace_file: trace_path.display().to_string(),
        passed: max_abs_error <= tolerance,
    };

    let (text, file) = if json {
        (to_json(&summary), "example_b_summary.json")
    } else {
        let mut t = format!(
            "{} trained blindly on {} observations (seed {})\n",
            summary.scenario, summary.n_samples, summary.seed
        );
        for ((name, a), b) in summary.parameter_names.iter().zip(&summary.trained).zip(&summary.exact) {
            let _ = writeln!(t, "  {name}: trained {a:.6}  exact {b:.6}  |diff| {:.6}", (a - b).abs());
        }
        let _ = writeln!(
            t,
            "final windowed divergence {:.6} bits, minimum expected divergence {:.6} bits",
            summary.final_windowed_divergence, summary.minimum_expected_divergence
        );
        let _ = writeln!(t, "trace: {}", summary.trace_file);
        let _ = writeln!(
            t,
            "[{}] max |trained - exact| = {:.6} (tolerance {})",
            if summary.passed { "PASS" } else { "FAIL" },
            summary.max_abs_error,
            summary.tolerance
        );
        (t, "example_b_summary.txt")
    };
    write_file(&dir.join(file), &text)?;
    emit(out, &text)?;
    if summary.passed {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "trained parameters {:?} differ from exact {:?} by {} > {}",
            summary.trained, summary.exact, summary.max_abs_error, summary.tolerance
        )))
    }
}

fn parse_sizes(text: &str) -> Result<Sizes, Failure> {
    let bad = || Failure::Usage(format!("--sizes expects \"min-max\" with 2 <= min <= max, got {text:?}"));
    let (lo, hi) = match text.split_once('-') {
        Some((lo, hi)) => (lo, hi),
        None => (text, text),
    };
    let min: usize = lo.trim().parse().map_err(|_| bad())?;
    let max: usize = hi.trim().parse().map_err(|_| bad())?;
    if min < 2 || max < min {
        return Err(bad());
    }
    Ok(Sizes { min, max })
}

#[derive(Debug, Default, Serialize)]
struct SweepSummary {
    trials: u64,
    passed: u64,
    worst_theorem1_gap: f64,
    worst_direct_equality_gap: f64,
    smallest_perturbed_gap: f64,
    worst_sufficiency_gap: f64,
    worst_markov_solution_tv: f64,
    failures: Vec<(u64, Vec<&'static str>)>,
}

fn render_case(case: &CaseReport) -> String {
    let mut t = String::new();
    let (nx, ny, nz) = case.dims;
    let _ = writeln!(t, "seed {} with |X| = {nx}, |Y| = {ny}, |Z| = {nz}", case.seed);
    let line = |t: &mut String, name: &str, c: &TheoremCheck| {
        let _ = writeln!(
            t,
            "  {name}: lhs {} rhs {} gap {:e} -> {}",
            c.lhs,
            c.rhs,
            c.gap,
            if c.passed { "pass" } else { "FAIL" }
        );
    };
    let bound = |t: &mut String, name: &str, b: &BoundCheck| {
        line(t, name, &b.check);
        let _ = writeln!(
            t,
            "    equality {} / estimator is direct {}",
            b.equality, b.estimator_is_direct
        );
    };
    line(&mut t, "identity (Markov joint, random estimator)", &case.theorem1);
    let _ = writeln!(t, "  role-model vs direct on Markov joint: TV {:e}", case.markov_solution_tv);
    bound(&mut t, "bound (general joint, random estimator)", &case.theorem2_random);
    bound(&mut t, "bound (general joint, direct solution)", &case.theorem2_direct);
    bound(&mut t, "bound (general joint, perturbed direct)", &case.theorem2_perturbed);
    line(&mut t, "sufficiency (Markov joint)", &case.sufficiency_markov);
    line(&mut t, "sufficiency (general joint)", &case.sufficiency_general);
    let failures = case.failures();
    let _ = writeln!(
        t,
        "  result: {}",
        if failures.is_empty() { "pass".to_string() } else { format!("FAIL {failures:?}") }
    );
    t
}

fn cmd_verify_theorems(
    trials: u64,
    seed: u64,
    sizes: &str,
    replay: Option<u64>,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let sizes = parse_sizes(sizes)?;
    if let Some(case_seed) = replay {
        let case = run_case(case_seed, sizes)?;
        let text = if json { to_json(&case) } else { render_case(&case) };
        emit(out, &text)?;
        return if case.passed() {
            Ok(())
        } else {
            Err(Failure::Check(format!("seed {case_seed}: {:?}", case.failures())))
        };
    }
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let mut s = SweepSummary {
        trials,
        smallest_perturbed_gap: f64::INFINITY,
        ..SweepSummary::default()
    };
    for i in 0..trials {
        let case_seed = seed.wrapping_add(i);
        let case = run_case(case_seed, sizes)?;
        s.worst_theorem1_gap = s.worst_theorem1_gap.max(case.theorem1.gap.abs());
        s.worst_direct_equality_gap = s.worst_direct_equality_gap.max(case.theorem2_direct.check.gap.abs());
        s.smallest_perturbed_gap = s.smallest_perturbed_gap.min(case.theorem2_perturbed.check.gap);
        s.worst_sufficiency_gap = s
            .worst_sufficiency_gap
            .max(case.sufficiency_markov.gap.abs())
            .max(case.sufficiency_general.gap.abs());
        s.worst_markov_solution_tv = s.worst_markov_solution_tv.max(case.markov_solution_tv);
        let failures = case.failures();
        if failures.is_empty() {
            s.passed += 1;
        } else {
            s.failures.push((case_seed, failures));
        }
    }
    let text = if json {
        to_json(&s)
    } else {
        let mut t = format!("{}/{} cases passed\n", s.passed, s.trials);
        let _ = writeln!(t, "worst |gap| of the divergence identity: {:e}", s.worst_theorem1_gap);
        let _ = writeln!(t, "worst |gap| with the direct solution: {:e}", s.worst_direct_equality_gap);
        let _ = writeln!(t, "smallest gap with a perturbed estimator: {:e}", s.smallest_perturbed_gap);
        let _ = writeln!(t, "worst |gap| of the sufficiency identity: {:e}", s.worst_sufficiency_gap);
        let _ = writeln!(t, "worst role-model vs direct TV on Markov joints: {:e}", s.worst_markov_solution_tv);
        for (seed, names) in &s.failures {
            let _ = writeln!(t, "FAIL seed {seed}: {names:?} (rerun with --replay {seed})");
        }
        t
    };
    emit(out, &text)?;
    if s.failures.is_empty() {
        Ok(())
    } else {
        let seeds: Vec<String> = s.failures.iter().map(|(seed, _)| seed.to_string()).collect();
        Err(Failure::Check(format!(
            "{} of {} cases failed; seeds {}",
            s.failures.len(),
            trials,
            seeds.join(", ")
        )))
    }
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    observations: u64,
    estimator: Vec<Option<Vec<f64>>>,
    final_windowed_divergence: f64,
    estimator_file: String,
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    spec_path: &Path,
    samples_file: Option<&Path>,
    nz_flag: Option<usize>,
    flags: &TrainerFlags,
    dest: &Path,
    trace: Option<&Path>,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let spec = ProblemSpec::load(spec_path)?;
    let oracle = spec.oracle()?;
    let problem_nz = spec
        .joint
        .as_ref()
        .map(|j| j.nz())
        .or_else(|| spec.yz.as_ref().map(ChannelSpec::output_size));
    let nz = match (problem_nz, nz_flag) {
        (Some(a), Some(b)) if a != b => {
            return Err(Failure::Library(Error::dimension("z alphabet", a, b)));
        }
        (Some(n), _) | (None, Some(n)) => n,
        (None, None) => {
            return Err(Failure::Usage(
                "the problem has no yz channel; pass --nz to size the Z alphabet".into(),
            ))
        }
    };

    let (state, config): (TrainerState, TrainerConfig) = match samples_file {
        Some(path) => {
            let samples = load_samples(path, oracle.ny(), nz)?;
            let config = TrainerConfig {
                n_samples: samples.len() as u64,
                ..flags.config()
            };
            config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            if config.n_samples < config.start_step {
                return Err(Failure::Usage(format!(
                    "{} observations in {} never reach --start-step {}",
                    config.n_samples,
                    path.display(),
                    config.start_step
                )));
            }
            (train_run(samples, nz, &config, &oracle)?, config)
        }
        None => {
            let config = validated_config(flags)?;
            let joint = spec.joint()?;
            (train_on_joint(&joint, &config, &RoleModelOracle::from_joint(&joint))?, config)
        }
    };

    let est = state.estimator();
    let summary = TrainSummary {
        observations: state.step(),
        estimator: rows_of(est),
        final_windowed_divergence: windowed_divergence(&state, &oracle)?,
        estimator_file: dest.display().to_string(),
    };
    write_file(dest, &estimator_to_text(est))?;
    if let Some(path) = trace {
        TraceFile::from_state(&spec.name, &config, &state, crate::experiments::unix_time()).write(path)?;
    }
    let text = if json {
        to_json(&summary)
    } else {
        format!(
            "trained on {} observations\n{}final windowed divergence {} bits\nwrote {}\n",
            summary.observations,
            format_rows(est),
            summary.final_windowed_divergence,
            summary.estimator_file
        )
    };
    emit(out, &text)
}

#[derive(Debug, Serialize)]
struct EvaluateReport {
    conditional_mutual_information: f64,
    markov: bool,
    /// Against P(x | y).
    expected_divergence: f64,
    /// Against P(x | y, z).
    expected_divergence_full: f64,
    lower_bound: f64,
    gap: f64,
    estimator_is_direct: bool,
}

fn cmd_evaluate(
    spec_path: &Path,
    est_path: &Path,
    tolerance: Option<f64>,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let joint = ProblemSpec::load(spec_path)?.joint()?;
    let est = load_estimator(est_path)?;
    if est.nz() != joint.nz() {
        return Err(Error::dimension("estimator rows", joint.nz(), est.nz()).into());
    }
    if est.nx() != joint.nx() {
        return Err(Error::dimension("estimator alphabet", joint.nx(), est.nx()).into());
    }
    let cmi = joint.conditional_mutual_information();
    let bound = check_theorem2(&joint, &est)?;
    let report = EvaluateReport {
        conditional_mutual_information: cmi,
        markov: cmi <= MARKOV_TOLERANCE,
        expected_divergence: expected_divergence(&joint, &est)?.total,
        expected_divergence_full: bound.check.lhs,
        lower_bound: bound.check.rhs,
        gap: bound.check.gap,
        estimator_is_direct: bound.estimator_is_direct,
    };
    let text = if json {
        to_json(&report)
    } else {
        format!(
            "I(X;Z|Y) = {:e} ({})\nexpected divergence to P(x|y): {} bits\n\
             expected divergence to P(x|y,z): {} bits\nlower bound H(X|Z) - H(X|Y,Z): {} bits\n\
             gap: {:e} bits\nestimator equals the direct solution: {}\n",
            report.conditional_mutual_information,
            if report.markov { "Markov" } else { "not Markov" },
            report.expected_divergence,
            report.expected_divergence_full,
            report.lower_bound,
            report.gap,
            report.estimator_is_direct
        )
    };
    emit(out, &text)?;
    match tolerance {
        Some(t) if !(report.gap <= t) => Err(Failure::Check(format!("gap {} exceeds tolerance {t}", report.gap))),
        _ => Ok(()),
    }
}

/// Reference problem files for the two built-in scenarios.
pub fn builtin_problem(name: &str) -> Option<ProblemSpec> {
    match name {
        "scenario-a" => Some(scenario_a().to_problem()),
        "scenario-b" => Some(scenario_b().to_problem()),
        _ => None,
    }
}
