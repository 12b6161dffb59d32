//! Plain-text file formats.
//!
//! Problem and estimator files are `key = value` lines; blank lines and lines
//! starting with `#` are ignored. Lists are comma-separated decimals and
//! matrix rows are separated by `;`.
//!
//! A problem file describes a chain `X -> Y -> Z`:
//!
//! ```text
//! name = scenario-b
//! prior = 0.5, 0.5
//! xy.kind = bec
//! xy.delta = 0.25
//! yz.kind = general
//! yz.matrix = 0.9, 0.1; 0.7, 0.3; 0.2, 0.8
//! ```
//!
//! Channel kinds are `z_channel` (key `crossover`), `bec` (key `delta`, output
//! ordering `0, erasure, 1`) and `general` (key `matrix`, one row per input
//! symbol). `yz` may be omitted when only the role model's posterior is
//! needed. Alternatively an arbitrary joint is given directly with
//! `dims = nx, ny, nz` and `joint = ...` listing the cells in row-major
//! `(x, y, z)` order. An optional `expected_posterior` matrix is checked
//! against the derived `P(x | z)`.
//!
//! Estimator files carry `nx`, `nz` and one `row.<z>` entry per z symbol,
//! either a distribution or the word `undefined`.
//!
//! Sample files are CSV with the header `y,z` and one integer pair per line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::channels::{build_joint, ChannelSpec};
use crate::error::{Error, Result};
use crate::prob::{EstimatorTable, Joint3, Simplex, StochasticMatrix};
use crate::trainer::RoleModelOracle;

struct Entries {
    path: PathBuf,
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(parse_error(path, i + 1, format!("expected key = value, got {line:?}")));
            };
            let key = key.trim().to_string();
            if let Some((first, _)) = map.get(&key) {
                return Err(parse_error(
                    path,
                    i + 1,
                    format!("duplicate key {key:?} (first on line {first})"),
                ));
            }
            map.insert(key, (i + 1, value.trim().to_string()));
        }
        Ok(Entries {
            path: path.to_path_buf(),
            map,
        })
    }

    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        parse_error(&self.path, line, message.into())
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<(usize, String)> {
        self.take(key)
            .ok_or_else(|| parse_error(&self.path, 0, format!("missing key {key:?}")))
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            Some((key, (line, _))) => Err(parse_error(&self.path, line, format!("unknown key {key:?}"))),
            None => Ok(()),
        }
    }

    fn reals(&self, line: usize, value: &str) -> Result<Vec<f64>> {
        value
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .map_err(|_| self.error(line, format!("not a number: {t:?}")))
            })
            .collect()
    }

    fn real(&self, line: usize, value: &str) -> Result<f64> {
        value
            .trim()
            .parse()
            .map_err(|_| self.error(line, format!("not a number: {value:?}")))
    }

    fn integer(&self, line: usize, value: &str) -> Result<usize> {
        value
            .trim()
            .parse()
            .map_err(|_| self.error(line, format!("not a non-negative integer: {value:?}")))
    }

    fn matrix(&self, line: usize, value: &str) -> Result<Vec<Vec<f64>>> {
        value.split(';').map(|row| self.reals(line, row)).collect()
    }

    fn channel(&mut self, prefix: &str) -> Result<Option<ChannelSpec>> {
        let Some((line, kind)) = self.take(&format!("{prefix}.kind")) else {
            return Ok(None);
        };
        let spec = match kind.as_str() {
            "z_channel" => {
                let (l, v) = self.require(&format!("{prefix}.crossover"))?;
                ChannelSpec::z_channel(self.real(l, &v)?).map_err(|e| self.error(l, e.to_string()))?
            }
            "bec" => {
                let (l, v) = self.require(&format!("{prefix}.delta"))?;
                ChannelSpec::bec(self.real(l, &v)?).map_err(|e| self.error(l, e.to_string()))?
            }
            "general" => {
                let (l, v) = self.require(&format!("{prefix}.matrix"))?;
                let rows = self.matrix(l, &v)?;
                ChannelSpec::general(StochasticMatrix::new(rows).map_err(|e| self.error(l, e.to_string()))?)
            }
            other => return Err(self.error(line, format!("unknown channel kind {other:?}"))),
        };
        Ok(Some(spec))
    }
}

fn parse_error(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn format_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn format_matrix(m: &StochasticMatrix) -> String {
    m.rows()
        .iter()
        .map(|r| format_list(r.probs()))
        .collect::<Vec<_>>()
        .join("; ")
}

/// A parsed problem file.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub prior: Option<Simplex>,
    pub xy: Option<ChannelSpec>,
    pub yz: Option<ChannelSpec>,
    pub joint: Option<Joint3>,
    pub expected_posterior: Option<EstimatorTable>,
}

impl ProblemSpec {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut e = Entries::parse(text, path)?;
        let name = e.take("name").map_or_else(|| "unnamed".to_string(), |(_, v)| v);
        let joint = match e.take("joint") {
            Some((line, cells)) => {
                let (dl, dims) = e.require("dims")?;
                let dims: Vec<usize> = dims
                    .split(',')
                    .map(|d| e.integer(dl, d))
                    .collect::<Result<_>>()?;
                let [nx, ny, nz] = dims[..] else {
                    return Err(e.error(dl, "dims needs exactly three sizes"));
                };
                let cells = e.reals(line, &cells)?;
                Some(Joint3::new(nx, ny, nz, cells).map_err(|err| e.error(line, err.to_string()))?)
            }
            None => None,
        };
        let prior = match e.take("prior") {
            Some((line, v)) => {
                let p = e.reals(line, &v)?;
                Some(Simplex::new(p).map_err(|err| e.error(line, err.to_string()))?)
            }
            None => None,
        };
        let xy = e.channel("xy")?;
        let yz = e.channel("yz")?;
        let expected = match e.take("expected_posterior") {
            Some((line, v)) => {
                let rows = e.matrix(line, &v)?;
                Some(EstimatorTable::from_vecs(rows).map_err(|err| e.error(line, err.to_string()))?)
            }
            None => None,
        };
        e.finish()?;

        if joint.is_some() && (prior.is_some() || xy.is_some() || yz.is_some()) {
            return Err(parse_error(path, 0, "give either joint or prior/xy/yz, not both".into()));
        }
        if joint.is_none() && (prior.is_none() || xy.is_none()) {
            return Err(parse_error(path, 0, "need a joint, or a prior and an xy channel".into()));
        }
        Ok(ProblemSpec {
            name,
            prior,
            xy,
            yz,
            joint,
            expected_posterior: expected,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        ProblemSpec::parse(&read_text(path)?, path)
    }

    /// The full joint, explicit or assembled from the chain.
    pub fn joint(&self) -> Result<Joint3> {
        if let Some(j) = &self.joint {
            return Ok(j.clone());
        }
        let (Some(prior), Some(xy)) = (&self.prior, &self.xy) else {
            return Err(Error::Precondition("problem has neither a joint nor a chain".into()));
        };
        let Some(yz) = &self.yz else {
            return Err(Error::Precondition(format!(
                "problem {:?} has no yz channel, so its joint is unknown",
                self.name
            )));
        };
        build_joint(prior, &xy.to_matrix()?, &yz.to_matrix()?)
    }

    /// The role model's posterior `P(x | y)`; needs only the prior and the
    /// `xy` channel when the problem is a chain.
    pub fn oracle(&self) -> Result<RoleModelOracle> {
        if let Some(j) = &self.joint {
            return Ok(RoleModelOracle::from_joint(j));
        }
        let prior = self.prior.as_ref().expect("checked at parse time");
        let xy = self.xy.as_ref().expect("checked at parse time").to_matrix()?;
        let passthrough = StochasticMatrix::identity(xy.output_size())?;
        Ok(RoleModelOracle::from_joint(&build_joint(prior, &xy, &passthrough)?))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        if let Some(j) = &self.joint {
            let (nx, ny, nz) = j.dims();
            let _ = writeln!(out, "dims = {nx}, {ny}, {nz}");
            let _ = writeln!(out, "joint = {}", format_list(j.cells()));
        }
        if let Some(p) = &self.prior {
            let _ = writeln!(out, "prior = {}", format_list(p.probs()));
        }
        for (prefix, ch) in [("xy", &self.xy), ("yz", &self.yz)] {
            match ch {
                Some(ChannelSpec::ZChannel { crossover }) => {
                    let _ = writeln!(out, "{prefix}.kind = z_channel\n{prefix}.crossover = {crossover}");
                }
                Some(ChannelSpec::Bec { delta }) => {
                    let _ = writeln!(out, "{prefix}.kind = bec\n{prefix}.delta = {delta}");
                }
                Some(ChannelSpec::General { matrix }) => {
                    let _ = writeln!(out, "{prefix}.kind = general\n{prefix}.matrix = {}", format_matrix(matrix));
                }
                None => {}
            }
        }
        if let Some(e) = &self.expected_posterior {
            let rows: Vec<String> = e
                .rows()
                .iter()
                .map(|r| r.as_ref().map_or("undefined".into(), |r| format_list(r.probs())))
                .collect();
            let _ = writeln!(out, "expected_posterior = {}", rows.join("; "));
        }
        out
    }
}

pub fn estimator_to_text(est: &EstimatorTable) -> String {
    let mut out = String::from("# rolemodel estimator Q(x | z)\n");
    let _ = writeln!(out, "nx = {}", est.nx());
    let _ = writeln!(out, "nz = {}", est.nz());
    for (z, row) in est.rows().iter().enumerate() {
        match row {
            Some(r) => {
                let _ = writeln!(out, "row.{z} = {}", format_list(r.probs()));
            }
            None => {
                let _ = writeln!(out, "row.{z} = undefined");
            }
        }
    }
    out
}

pub fn parse_estimator(text: &str, path: &Path) -> Result<EstimatorTable> {
    let mut e = Entries::parse(text, path)?;
    let (lx, nx) = e.require("nx")?;
    let nx = e.integer(lx, &nx)?;
    let (lz, nz) = e.require("nz")?;
    let nz = e.integer(lz, &nz)?;
    let mut rows = Vec::with_capacity(nz);
    for z in 0..nz {
        let (line, v) = e.require(&format!("row.{z}"))?;
        if v == "undefined" {
            rows.push(None);
            continue;
        }
        let probs = e.reals(line, &v)?;
        if probs.len() != nx {
            return Err(e.error(line, format!("row has {} entries, expected {nx}", probs.len())));
        }
        rows.push(Some(Simplex::new(probs).map_err(|err| e.error(line, err.to_string()))?));
    }
    e.finish()?;
    EstimatorTable::with_undefined(rows).map_err(|err| parse_error(path, 0, err.to_string()))
}

pub fn load_estimator(path: &Path) -> Result<EstimatorTable> {
    parse_estimator(&read_text(path)?, path)
}

/// Parses a `y,z` sample file, checking indices against the alphabet sizes.
pub fn parse_samples(text: &str, path: &Path, ny: usize, nz: usize) -> Result<Vec<(usize, usize)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim().replace(' ', "") == "y,z" => {}
        Some((i, header)) => {
            return Err(parse_error(path, i + 1, format!("expected header \"y,z\", got {header:?}")))
        }
        None => return Err(parse_error(path, 0, "empty sample file".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [y, z] = fields[..] else {
            return Err(parse_error(path, i + 1, format!("expected two columns, got {line:?}")));
        };
        let parse = |s: &str, n: usize, name: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| parse_error(path, i + 1, format!("{name} is not an index: {s:?}")))?;
            if v >= n {
                return Err(parse_error(
                    path,
                    i + 1,
                    format!("{name} = {v} outside alphabet of size {n}"),
                ));
            }
            Ok(v)
        };
        out.push((parse(y, ny, "y")?, parse(z, nz, "z")?));
    }
    if out.is_empty() {
        return Err(parse_error(path, 0, "sample file has no data rows".into()));
    }
    Ok(out)
}

pub fn load_samples(path: &Path, ny: usize, nz: usize) -> Result<Vec<(usize, usize)>> {
    parse_samples(&read_text(path)?, path, ny, nz)
}

pub fn samples_to_csv(samples: &[(usize, usize)]) -> String {
    let mut out = String::from("y,z\n");
    for (y, z) in samples {
        let _ = writeln!(out, "{y},{z}");
    }
    out
}
