//! Canonical scenarios, independent oracles, random test problems and trace
//! files.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::channels::{build_joint, seeded_rng, unit_uniform, ChannelSpec};
use crate::error::{Error, Result};
use crate::formats::{read_text, ProblemSpec};
use crate::prob::{kl_divergence, Axis, EstimatorTable, Joint3, Simplex, StochasticMatrix};
use crate::strategy::{direct_solution, CHECK_TOLERANCE};
use crate::trainer::{parameter_names, train_on_joint, RoleModelOracle, TrainerConfig, TrainerState};

/// A chain `X -> Y -> Z` together with its known posterior `P(x | z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub prior: Simplex,
    pub xy_channel: ChannelSpec,
    pub yz_channel: ChannelSpec,
    pub expected_posterior: EstimatorTable,
}

impl Scenario {
    /// Builds a scenario and checks `expected_posterior` against the posterior
    /// derived from the channels.
    pub fn new(
        name: impl Into<String>,
        prior: Simplex,
        xy_channel: ChannelSpec,
        yz_channel: ChannelSpec,
        expected_posterior: EstimatorTable,
    ) -> Result<Self> {
        let scenario = Scenario {
            name: name.into(),
            prior,
            xy_channel,
            yz_channel,
            expected_posterior,
        };
        let derived = direct_solution(&scenario.joint()?);
        let tv = derived.max_tv(&scenario.expected_posterior, |_| true)?;
        if tv > CHECK_TOLERANCE {
            return Err(Error::Precondition(format!(
                "scenario {:?}: stored posterior is {tv:e} (TV) away from the derived one",
                scenario.name
            )));
        }
        Ok(scenario)
    }

    /// Builds a scenario whose expected posterior is derived from the channels.
    pub fn derive(
        name: impl Into<String>,
        prior: Simplex,
        xy_channel: ChannelSpec,
        yz_channel: ChannelSpec,
    ) -> Result<Self> {
        let joint = build_joint(&prior, &xy_channel.to_matrix()?, &yz_channel.to_matrix()?)?;
        let expected = direct_solution(&joint);
        Scenario::new(name, prior, xy_channel, yz_channel, expected)
    }

    pub fn from_problem(spec: &ProblemSpec) -> Result<Self> {
        let (Some(prior), Some(xy), Some(yz)) = (&spec.prior, &spec.xy, &spec.yz) else {
            return Err(Error::Precondition(format!(
                "problem {:?} is not a complete X -> Y -> Z chain",
                spec.name
            )));
        };
        match &spec.expected_posterior {
            Some(e) => Scenario::new(&spec.name, prior.clone(), xy.clone(), yz.clone(), e.clone()),
            None => Scenario::derive(&spec.name, prior.clone(), xy.clone(), yz.clone()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Scenario::from_problem(&ProblemSpec::load(path)?)
    }

    pub fn to_problem(&self) -> ProblemSpec {
        ProblemSpec {
            name: self.name.clone(),
            prior: Some(self.prior.clone()),
            xy: Some(self.xy_channel.clone()),
            yz: Some(self.yz_channel.clone()),
            joint: None,
            expected_posterior: Some(self.expected_posterior.clone()),
        }
    }

    pub fn joint(&self) -> Result<Joint3> {
        build_joint(&self.prior, &self.xy_channel.to_matrix()?, &self.yz_channel.to_matrix()?)
    }

    pub fn oracle(&self) -> Result<RoleModelOracle> {
        Ok(RoleModelOracle::from_joint(&self.joint()?))
    }

    /// The end-to-end channel `P(z | x)`.
    pub fn compound_channel(&self) -> Result<StochasticMatrix> {
        crate::channels::cascade(&self.xy_channel.to_matrix()?, &self.yz_channel.to_matrix()?)
    }
}

/// Two Z-channels with crossover 1/2 in cascade (compound crossover 3/4)
/// under a uniform input.
pub fn scenario_a() -> Scenario {
    let expected = EstimatorTable::from_vecs(vec![vec![4.0 / 7.0, 3.0 / 7.0], vec![0.0, 1.0]])
        .expect("valid rows");
    Scenario::new(
        "scenario-a",
        Simplex::uniform(2).expect("binary"),
        ChannelSpec::ZChannel { crossover: 0.5 },
        ChannelSpec::ZChannel { crossover: 0.5 },
        expected,
    )
    .expect("scenario A is self-consistent")
}

/// A BEC with erasure probability 1/4 followed by a ternary-input,
/// binary-output channel.
pub fn scenario_b() -> Scenario {
    let q0 = 0.425 / 0.5875;
    let q1 = 0.3375 / 0.4125;
    let expected = EstimatorTable::from_vecs(vec![vec![q0, 1.0 - q0], vec![1.0 - q1, q1]])
        .expect("valid rows");
    Scenario::new(
        "scenario-b",
        Simplex::uniform(2).expect("binary"),
        ChannelSpec::Bec { delta: 0.25 },
        scenario_b_unknown_channel(),
        expected,
    )
    .expect("scenario B is self-consistent")
}

/// `P(z | y)` for `y` in `(0, erasure, 1)`.
pub fn scenario_b_unknown_channel() -> ChannelSpec {
    ChannelSpec::General {
        matrix: StochasticMatrix::new(vec![vec![0.9, 0.1], vec![0.7, 0.3], vec![0.2, 0.8]])
            .expect("valid rows"),
    }
}

/// Per-z grid search of the expected divergence against `P(x | y)`.
///
/// Binary X searches `q = k / resolution`; ternary X searches the grid
/// `(i, j, resolution - i - j) / resolution` on the 2-simplex. Rows for
/// zero-probability z are undefined.
pub fn brute_force_minimizer(joint: &Joint3, resolution: usize) -> Result<EstimatorTable> {
    let nx = joint.nx();
    if !(nx == 2 || nx == 3) {
        return Err(Error::Unsupported(format!(
            "grid search covers alphabets of size 2 or 3, got {nx}"
        )));
    }
    if resolution == 0 {
        return Err(Error::Config("grid resolution must be positive".into()));
    }
    let pyz = joint.marginal_yz();
    let pz = joint.marginal_z();
    let x_given_y = joint.conditional(Axis::X, Axis::Y)?;
    let r = resolution as f64;

    let rows = (0..joint.nz())
        .map(|z| {
            if pz.get(z) == 0.0 {
                return Ok(None);
            }
            let terms: Vec<(f64, &Simplex)> = (0..joint.ny())
                .filter(|&y| pyz[y][z] > 0.0)
                .map(|y| (pyz[y][z] / pz.get(z), x_given_y.row(y).expect("P(y) > 0")))
                .collect();
            let objective = |q: &Simplex| -> f64 {
                terms.iter().map(|&(w, p)| w * kl_divergence(p, q).unwrap()).sum()
            };
            let mut best: Option<(f64, Simplex)> = None;
            let mut consider = |q: Vec<f64>| {
                let q = Simplex::new(q).expect("grid point");
                let f = objective(&q);
                if best.as_ref().is_none_or(|(b, _)| f < *b) {
                    best = Some((f, q));
                }
            };
            if nx == 2 {
                for k in 0..=resolution {
                    let q = k as f64 / r;
                    consider(vec![q, 1.0 - q]);
                }
            } else {
                for i in 0..=resolution {
                    for j in 0..=resolution - i {
                        let (a, b) = (i as f64 / r, j as f64 / r);
                        consider(vec![a, b, (1.0 - a - b).max(0.0)]);
                    }
                }
            }
            Ok(best.map(|(_, q)| q))
        })
        .collect::<Result<Vec<_>>>()?;
    EstimatorTable::with_undefined(rows)
}

fn exponential(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    -(1.0 - unit_uniform(rng)).ln()
}

fn random_simplex(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Simplex {
    let v: Vec<f64> = (0..n).map(|_| exponential(rng)).collect();
    let s: f64 = v.iter().sum();
    Simplex::new(v.into_iter().map(|x| x / s).collect()).expect("normalized")
}

/// A random joint, uniform on the simplex of the chosen family.
///
/// With `markov` the joint is `prior x P(y|x) x P(z|y)` with every factor
/// drawn uniformly from its simplex; otherwise every cell is an independent
/// standard exponential, normalized.
pub fn random_joint(seed: u64, nx: usize, ny: usize, nz: usize, markov: bool) -> Result<Joint3> {
    for n in [nx, ny, nz] {
        if n < 2 {
            return Err(Error::Config(format!("alphabet sizes must be at least 2, got {n}")));
        }
    }
    let mut rng = seeded_rng(seed);
    if markov {
        let prior = random_simplex(&mut rng, nx);
        let xy = StochasticMatrix::from_rows((0..nx).map(|_| random_simplex(&mut rng, ny)).collect())?;
        let yz = StochasticMatrix::from_rows((0..ny).map(|_| random_simplex(&mut rng, nz)).collect())?;
        build_joint(&prior, &xy, &yz)
    } else {
        let cells: Vec<f64> = (0..nx * ny * nz).map(|_| exponential(&mut rng)).collect();
        let s: f64 = cells.iter().sum();
        Joint3::new(nx, ny, nz, cells.into_iter().map(|c| c / s).collect())
    }
}

/// A random estimator with every entry positive.
pub fn random_estimator(seed: u64, nx: usize, nz: usize) -> Result<EstimatorTable> {
    let mut rng = seeded_rng(seed);
    EstimatorTable::new((0..nz).map(|_| random_simplex(&mut rng, nx)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: u64,
    pub divergence_bits: f64,
    pub params: Vec<f64>,
}

/// Divergence and parameter traces of one training run, as written to CSV.
///
/// The file starts with `# key=value` metadata lines, then the column header
/// `step,divergence_bits,q_0,q_1,...`, then one row per recorded step.
/// Numbers use the shortest representation that parses back to the same
/// value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceFile {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<TraceRow>,
}

pub const TIMESTAMP_KEY: &str = "timestamp";

impl TraceFile {
    pub fn from_state(scenario: &str, config: &TrainerConfig, state: &TrainerState, timestamp: u64) -> Self {
        let est = state.estimator();
        let metadata = [
            ("scenario", scenario.to_string()),
            ("seed", config.seed.to_string()),
            ("window", config.window.to_string()),
            ("start_step", config.start_step.to_string()),
            ("step_size_initial", config.step_size_initial.to_string()),
            ("step_size_tau", config.step_size_tau.to_string()),
            ("clamp_epsilon", config.clamp_epsilon.to_string()),
            ("n_samples", config.n_samples.to_string()),
            ("version", env!("CARGO_PKG_VERSION").to_string()),
            (TIMESTAMP_KEY, timestamp.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let mut columns = vec!["step".to_string(), "divergence_bits".to_string()];
        columns.extend(parameter_names(est.nx(), est.nz()));
        let rows = state
            .divergence_trace()
            .iter()
            .zip(state.param_trace())
            .map(|(&(step, d), (_, params))| TraceRow {
                step,
                divergence_bits: d,
                params: params.clone(),
            })
            .collect();
        TraceFile {
            metadata,
            columns,
            rows,
        }
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.step, row.divergence_bits);
            for p in &row.params {
                let _ = write!(out, ",{p}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut metadata = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows: Vec<TraceRow> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| err(n, format!("metadata line without '=': {line:?}")))?;
                metadata.push((k.to_string(), v.to_string()));
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let Some(cols) = &columns else {
                let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
                if cols.len() < 3 || cols[0] != "step" || cols[1] != "divergence_bits" {
                    return Err(err(n, format!("unexpected column header {line:?}")));
                }
                columns = Some(cols);
                continue;
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(err(n, format!("{} fields, expected {}", fields.len(), cols.len())));
            }
            let step: u64 = fields[0]
                .parse()
                .map_err(|_| err(n, format!("bad step {:?}", fields[0])))?;
            if rows.last().is_some_and(|r| r.step >= step) {
                return Err(err(n, format!("step {step} is not increasing")));
            }
            let reals = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| err(n, format!("not a number: {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(TraceRow {
                step,
                divergence_bits: reals[0],
                params: reals[1..].to_vec(),
            });
        }
        let columns = columns.ok_or_else(|| err(0, "no column header".into()))?;
        Ok(TraceFile {
            metadata,
            columns,
            rows,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        TraceFile::parse(&read_text(path)?, path)
    }

    /// The CSV text without the timestamp line.
    pub fn without_timestamp(csv: &str) -> String {
        csv.lines()
            .filter(|l| !l.starts_with(&format!("# {TIMESTAMP_KEY}=")))
            .map(|l| format!("{l}\n"))
            .collect()
    }
}

pub(crate) fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Trains on a simulated stream from `scenario`, writes the trace CSV to
/// `out_path`, and returns the trace with the final trainer state.
pub fn run_figure_traces(
    scenario: &Scenario,
    config: &TrainerConfig,
    out_path: &Path,
) -> Result<(TraceFile, TrainerState)> {
    let joint = scenario.joint()?;
    let oracle = RoleModelOracle::from_joint(&joint);
    let state = train_on_joint(&joint, config, &oracle)?;
    let trace = TraceFile::from_state(&scenario.name, config, &state, unix_time());
    trace.write(out_path)?;
    Ok((trace, state))
}
