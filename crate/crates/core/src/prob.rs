//! Finite-alphabet probability primitives.
//!
//! Everything here works in bits (base-2 logarithms) with the convention
//! `0 · log 0 = 0`. Distributions are validated on construction and immutable
//! afterwards, so the information measures below never need to re-check them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest deviation of a stored distribution's sum from 1.
pub const STORE_TOLERANCE: f64 = 1e-12;

/// Inputs whose sum is off by more than [`STORE_TOLERANCE`] but at most this
/// much are renormalized; anything further off is rejected.
pub const NORMALIZE_TOLERANCE: f64 = 1e-9;

/// A probability distribution over a finite alphabet of at least two symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Simplex {
    probs: Vec<f64>,
}

impl Simplex {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "alphabet must have at least 2 symbols, got {}",
                probs.len()
            )));
        }
        if let Some((i, &p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {p}, expected a finite non-negative value"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZE_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        let probs = if (sum - 1.0).abs() <= STORE_TOLERANCE {
            probs
        } else {
            probs.into_iter().map(|p| p / sum).collect()
        };
        Ok(Simplex { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Simplex::new(vec![1.0 / n as f64; n])
    }

    /// All mass on `symbol`.
    pub fn point(n: usize, symbol: usize) -> Result<Self> {
        if symbol >= n {
            return Err(Error::dimension("point mass symbol", n, symbol));
        }
        let mut probs = vec![0.0; n];
        probs[symbol] = 1.0;
        Simplex::new(probs)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, symbol: usize) -> f64 {
        self.probs[symbol]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    /// Half the L1 distance.
    pub fn total_variation(&self, other: &Simplex) -> Result<f64> {
        check_len("total variation", self.len(), other.len())?;
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

impl TryFrom<Vec<f64>> for Simplex {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Simplex::new(probs)
    }
}

impl From<Simplex> for Vec<f64> {
    fn from(s: Simplex) -> Self {
        s.probs
    }
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::dimension(context, expected, found))
    }
}

/// `-p log2 p` with `0 log 0 = 0`.
fn surprisal_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Simplex) -> f64 {
    p.probs.iter().map(|&v| surprisal_term(v)).sum()
}

/// The binary entropy function `h(p)`.
pub fn binary_entropy(p: f64) -> f64 {
    surprisal_term(p) + surprisal_term(1.0 - p)
}

/// `D(p || q)` in bits. Returns `f64::INFINITY` when `p` puts mass where `q`
/// has none.
pub fn kl_divergence(p: &Simplex, q: &Simplex) -> Result<f64> {
    check_len("kl divergence", p.len(), q.len())?;
    // a sum of terms that is mathematically non-negative can dip to -1e-17
    Ok(kl_divergence_raw(p.probs(), q.probs()).max(0.0))
}

/// Divergence against an arbitrary positive vector `q`, which need not sum
/// to one. Used where the objective is differentiated off the simplex.
pub fn kl_divergence_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            d += pi * (pi / qi).log2();
        }
    }
    d
}

/// A conditional distribution `P(b | a)`, one row per input symbol `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    rows: Vec<Simplex>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(Simplex::new)
            .collect::<Result<Vec<_>>>()?;
        StochasticMatrix::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<Simplex>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidDistribution(
                "stochastic matrix needs at least one row".into(),
            ));
        };
        let width = first.len();
        for row in &rows {
            check_len("stochastic matrix row", width, row.len())?;
        }
        Ok(StochasticMatrix { rows })
    }

    pub fn identity(n: usize) -> Result<Self> {
        StochasticMatrix::from_rows((0..n).map(|i| Simplex::point(n, i)).collect::<Result<_>>()?)
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, input: usize) -> &Simplex {
        &self.rows[input]
    }

    pub fn rows(&self) -> &[Simplex] {
        &self.rows
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.rows[input].get(output)
    }

    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> Result<f64> {
        check_len("matrix rows", self.input_size(), other.input_size())?;
        check_len("matrix columns", self.output_size(), other.output_size())?;
        Ok(self
            .rows
            .iter()
            .zip(&other.rows)
            .flat_map(|(a, b)| a.probs().iter().zip(b.probs()).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max))
    }
}

/// One of the three variables of a [`Joint3`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }
}

/// Rows of `P(target | given)`. A row is `None` when the conditioning symbol
/// has zero probability.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalTable {
    given: Axis,
    rows: Vec<Option<Simplex>>,
}

impl ConditionalTable {
    pub fn row(&self, given: usize) -> Option<&Simplex> {
        self.rows[given].as_ref()
    }

    pub fn rows(&self) -> &[Option<Simplex>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fails if any conditioning symbol has zero probability.
    pub fn to_matrix(&self) -> Result<StochasticMatrix> {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(g, r)| {
                r.clone().ok_or(Error::UndefinedConditioning {
                    axis: self.given.name(),
                    symbol: g,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        StochasticMatrix::from_rows(rows)
    }

    pub fn into_estimator(self) -> EstimatorTable {
        EstimatorTable { rows: self.rows }
    }
}

/// The joint distribution `P(x, y, z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Joint3 {
    nx: usize,
    ny: usize,
    nz: usize,
    // row-major in (x, y, z)
    p: Vec<f64>,
}

impl Joint3 {
    pub fn new(nx: usize, ny: usize, nz: usize, cells: Vec<f64>) -> Result<Self> {
        for (axis, n) in [(Axis::X, nx), (Axis::Y, ny), (Axis::Z, nz)] {
            if n < 2 {
                return Err(Error::InvalidDistribution(format!(
                    "alphabet of {} must have at least 2 symbols, got {n}",
                    axis.name()
                )));
            }
        }
        check_len("joint cells", nx * ny * nz, cells.len())?;
        if let Some((i, &p)) = cells
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "joint cell {i} is {p}, expected a finite non-negative value"
            )));
        }
        let sum: f64 = cells.iter().sum();
        if (sum - 1.0).abs() > NORMALIZE_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "joint cells sum to {sum}, expected 1"
            )));
        }
        let p = if (sum - 1.0).abs() <= STORE_TOLERANCE {
            cells
        } else {
            cells.into_iter().map(|v| v / sum).collect()
        };
        Ok(Joint3 { nx, ny, nz, p })
    }

    pub fn from_fn(
        nx: usize,
        ny: usize,
        nz: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut cells = Vec::with_capacity(nx * ny * nz);
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    cells.push(f(x, y, z));
                }
            }
        }
        Joint3::new(nx, ny, nz, cells)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    pub fn size(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::Z => self.nz,
        }
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.p[(x * self.ny + y) * self.nz + z]
    }

    /// Cells in row-major (x, y, z) order.
    pub fn cells(&self) -> &[f64] {
        &self.p
    }

    /// Iterates `((x, y, z), P(x, y, z))` over every cell.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), f64)> + '_ {
        let (ny, nz) = (self.ny, self.nz);
        self.p
            .iter()
            .enumerate()
            .map(move |(i, &v)| ((i / (ny * nz), (i / nz) % ny, i % nz), v))
    }

    fn coord(idx: (usize, usize, usize), axis: Axis) -> usize {
        match axis {
            Axis::X => idx.0,
            Axis::Y => idx.1,
            Axis::Z => idx.2,
        }
    }

    fn marginal_raw(&self, axis: Axis) -> Vec<f64> {
        let mut m = vec![0.0; self.size(axis)];
        for (idx, v) in self.iter() {
            m[Joint3::coord(idx, axis)] += v;
        }
        m
    }

    pub fn marginal(&self, axis: Axis) -> Simplex {
        Simplex::new(self.marginal_raw(axis)).expect("marginal of a valid joint is a distribution")
    }

    pub fn marginal_x(&self) -> Simplex {
        self.marginal(Axis::X)
    }

    pub fn marginal_y(&self) -> Simplex {
        self.marginal(Axis::Y)
    }

    pub fn marginal_z(&self) -> Simplex {
        self.marginal(Axis::Z)
    }

    /// `P(a, b)` as a table indexed `[a][b]`, summing to one overall.
    pub fn pair_marginal(&self, a: Axis, b: Axis) -> Result<Vec<Vec<f64>>> {
        if a == b {
            return Err(Error::Precondition(format!(
                "pair marginal needs two distinct axes, got {} twice",
                a.name()
            )));
        }
        let mut t = vec![vec![0.0; self.size(b)]; self.size(a)];
        for (idx, v) in self.iter() {
            t[Joint3::coord(idx, a)][Joint3::coord(idx, b)] += v;
        }
        Ok(t)
    }

    pub fn marginal_xy(&self) -> Vec<Vec<f64>> {
        self.pair_marginal(Axis::X, Axis::Y).unwrap()
    }

    pub fn marginal_xz(&self) -> Vec<Vec<f64>> {
        self.pair_marginal(Axis::X, Axis::Z).unwrap()
    }

    pub fn marginal_yz(&self) -> Vec<Vec<f64>> {
        self.pair_marginal(Axis::Y, Axis::Z).unwrap()
    }

    /// `P(target | given)`.
    pub fn conditional(&self, target: Axis, given: Axis) -> Result<ConditionalTable> {
        let pair = self.pair_marginal(given, target)?;
        let rows = pair
            .into_iter()
            .map(|row| {
                let mass: f64 = row.iter().sum();
                if mass > 0.0 {
                    Some(
                        Simplex::new(row.into_iter().map(|v| v / mass).collect())
                            .expect("normalized row"),
                    )
                } else {
                    None
                }
            })
            .collect();
        Ok(ConditionalTable { given, rows })
    }

    /// `P(x | y, z)` indexed by `y * nz + z`.
    pub fn posterior_x_given_yz(&self) -> Vec<Option<Simplex>> {
        (0..self.ny * self.nz)
            .map(|yz| {
                let (y, z) = (yz / self.nz, yz % self.nz);
                let col: Vec<f64> = (0..self.nx).map(|x| self.get(x, y, z)).collect();
                let mass: f64 = col.iter().sum();
                (mass > 0.0).then(|| {
                    Simplex::new(col.into_iter().map(|v| v / mass).collect())
                        .expect("normalized column")
                })
            })
            .collect()
    }

    /// `H(target | given) = sum_g P(g) H(target | given = g)`.
    pub fn conditional_entropy(&self, target: Axis, given: Axis) -> Result<f64> {
        let weights = self.marginal_raw(given);
        let cond = self.conditional(target, given)?;
        Ok(weights
            .iter()
            .zip(cond.rows())
            .filter_map(|(&w, row)| row.as_ref().map(|r| w * r.entropy()))
            .sum())
    }

    /// `H(X | Y, Z)`.
    pub fn conditional_entropy_x_given_yz(&self) -> f64 {
        let yz = self.marginal_yz();
        self.posterior_x_given_yz()
            .iter()
            .enumerate()
            .filter_map(|(i, row)| {
                row.as_ref()
                    .map(|r| yz[i / self.nz][i % self.nz] * r.entropy())
            })
            .sum()
    }

    pub fn entropy(&self, axis: Axis) -> f64 {
        self.marginal(axis).entropy()
    }

    /// `I(a; b) = H(a) - H(a | b)`.
    pub fn mutual_information(&self, a: Axis, b: Axis) -> Result<f64> {
        Ok(self.entropy(a) - self.conditional_entropy(a, b)?)
    }

    /// `I(X; Z | Y) = H(X | Y) - H(X | Y, Z)`. Zero exactly when `X - Y - Z`
    /// is a Markov chain; may come out a few ulps below zero.
    pub fn conditional_mutual_information(&self) -> f64 {
        self.conditional_entropy(Axis::X, Axis::Y).unwrap() - self.conditional_entropy_x_given_yz()
    }
}

/// A candidate estimator `Q(x | z)`: one distribution over the X alphabet for
/// every z symbol. A row may be undefined when it was derived from a joint in
/// which that z never occurs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorTable {
    rows: Vec<Option<Simplex>>,
}

impl EstimatorTable {
    pub fn new(rows: Vec<Simplex>) -> Result<Self> {
        EstimatorTable::with_undefined(rows.into_iter().map(Some).collect())
    }

    pub fn from_vecs(rows: Vec<Vec<f64>>) -> Result<Self> {
        EstimatorTable::new(rows.into_iter().map(Simplex::new).collect::<Result<_>>()?)
    }

    pub fn with_undefined(rows: Vec<Option<Simplex>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDistribution(
                "estimator table needs at least one row".into(),
            ));
        }
        let Some(nx) = rows.iter().flatten().map(Simplex::len).next() else {
            return Err(Error::InvalidDistribution(
                "estimator table has no defined row".into(),
            ));
        };
        for row in rows.iter().flatten() {
            check_len("estimator row", nx, row.len())?;
        }
        Ok(EstimatorTable { rows })
    }

    pub fn uniform(nx: usize, nz: usize) -> Result<Self> {
        EstimatorTable::new(vec![Simplex::uniform(nx)?; nz])
    }

    pub fn nx(&self) -> usize {
        self.rows.iter().flatten().next().map_or(0, Simplex::len)
    }

    pub fn nz(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, z: usize) -> Option<&Simplex> {
        self.rows.get(z).and_then(Option::as_ref)
    }

    pub fn rows(&self) -> &[Option<Simplex>] {
        &self.rows
    }

    pub fn is_fully_defined(&self) -> bool {
        self.rows.iter().all(Option::is_some)
    }

    /// Largest per-row total-variation distance over rows defined in both
    /// tables and selected by `include`.
    pub fn max_tv(&self, other: &EstimatorTable, include: impl Fn(usize) -> bool) -> Result<f64> {
        check_len("estimator rows", self.nz(), other.nz())?;
        let mut worst: f64 = 0.0;
        for (z, (a, b)) in self.rows.iter().zip(&other.rows).enumerate() {
            if !include(z) {
                continue;
            }
            match (a, b) {
                (Some(a), Some(b)) => worst = worst.max(a.total_variation(b)?),
                (None, None) => {}
                _ => return Err(Error::UndefinedConditioning { axis: "Z", symbol: z }),
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The Z-channel cascade with crossovers 1/2 and 1/2 under a uniform prior.
    pub(crate) fn scenario_a_cells() -> Joint3 {
        Joint3::from_fn(2, 2, 2, |x, y, z| match (x, y, z) {
            (0, 0, 0) => 0.5,
            (1, 0, 0) => 0.25,
            (1, 1, 0) => 0.125,
            (1, 1, 1) => 0.125,
            _ => 0.0,
        })
        .unwrap()
    }

    fn s(v: &[f64]) -> Simplex {
        Simplex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn simplex_rejects_and_normalizes() {
        assert!(Simplex::new(vec![1.0]).is_err());
        assert!(Simplex::new(vec![0.5, 0.6]).is_err());
        assert!(Simplex::new(vec![1.5, -0.5]).is_err());
        assert!(Simplex::new(vec![f64::NAN, 1.0]).is_err());
        let p = Simplex::new(vec![0.5 + 4e-10, 0.5]).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= STORE_TOLERANCE);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&s(&[1.0, 0.0])), 0.0);
        assert_eq!(entropy(&s(&[0.5, 0.5])), 1.0);
        let h = entropy(&s(&[2.0 / 3.0, 1.0 / 3.0]));
        assert!((h - 0.918295834054489514787).abs() < 1e-14);
        assert!((h - binary_entropy(1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let u = s(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&u, &u).unwrap(), 0.0);
        assert_eq!(kl_divergence(&u, &s(&[1.0, 0.0])).unwrap(), f64::INFINITY);
        let d = kl_divergence(&s(&[2.0 / 3.0, 1.0 / 3.0]), &s(&[4.0 / 7.0, 3.0 / 7.0])).unwrap();
        assert!((d - 0.0274049210960625321703).abs() < 1e-14);
        assert!(matches!(
            kl_divergence(&u, &s(&[0.2, 0.3, 0.5])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn marginals() {
        let uniform = Joint3::new(2, 2, 2, vec![0.125; 8]).unwrap();
        assert_eq!(uniform.marginal_z().probs(), &[0.5, 0.5]);
        let a = scenario_a_cells();
        assert_eq!(a.marginal_z().probs(), &[0.875, 0.125]);
        assert_eq!(a.marginal_y().probs(), &[0.75, 0.25]);
        let xz = a.marginal_xz();
        assert_eq!(xz, vec![vec![0.5, 0.0], vec![0.375, 0.125]]);
    }

    #[test]
    fn conditionals_match_worked_example() {
        let a = scenario_a_cells();
        let x_given_z = a.conditional(Axis::X, Axis::Z).unwrap();
        let r0 = x_given_z.row(0).unwrap();
        assert!((r0.get(0) - 4.0 / 7.0).abs() < 1e-15);
        assert!((r0.get(1) - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(x_given_z.row(1).unwrap().probs(), &[0.0, 1.0]);
        let y_given_z = a.conditional(Axis::Y, Axis::Z).unwrap();
        assert!((y_given_z.row(0).unwrap().get(0) - 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_rows_are_undefined() {
        let j = Joint3::from_fn(2, 2, 3, |x, y, z| if z == 2 { 0.0 } else if x == y { 0.25 } else { 0.0 })
            .unwrap();
        let c = j.conditional(Axis::X, Axis::Z).unwrap();
        assert!(c.row(2).is_none());
        assert!(matches!(
            c.to_matrix(),
            Err(Error::UndefinedConditioning { axis: "Z", symbol: 2 })
        ));
    }

    #[test]
    fn conditional_entropy_examples() {
        // X uniform, independent of (Y, Z)
        let ind = Joint3::new(2, 2, 2, vec![0.125; 8]).unwrap();
        assert_eq!(ind.conditional_entropy(Axis::X, Axis::Z).unwrap(), 1.0);

        let a = scenario_a_cells();
        let hxy = a.conditional_entropy(Axis::X, Axis::Y).unwrap();
        let hxz = a.conditional_entropy(Axis::X, Axis::Z).unwrap();
        assert!((hxy - 0.688721875540867136090).abs() < 1e-14);
        assert!((hxz - 0.862074619029970025966).abs() < 1e-14);
    }

    #[test]
    fn conditional_mutual_information_examples() {
        assert!(scenario_a_cells().conditional_mutual_information().abs() <= 1e-12);
        // Z = X, Y independent of both, X uniform
        let copy = Joint3::from_fn(2, 2, 2, |x, _, z| if x == z { 0.25 } else { 0.0 }).unwrap();
        assert!((copy.conditional_mutual_information() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_mutual_information_matches_triple_sum() {
        let cells = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0];
        let total: f64 = cells.iter().sum();
        let j = Joint3::new(2, 2, 3, cells.iter().map(|c| c / total).collect()).unwrap();
        // sum P(xyz) log P(xz|y) / (P(x|y) P(z|y))
        let py = j.marginal_y();
        let pxy = j.marginal_xy();
        let pyz = j.marginal_yz();
        let mut oracle = 0.0;
        for ((x, y, z), p) in j.iter() {
            if p > 0.0 {
                let pxz_y = p / py.get(y);
                let px_y = pxy[x][y] / py.get(y);
                let pz_y = pyz[y][z] / py.get(y);
                oracle += p * (pxz_y / (px_y * pz_y)).log2();
            }
        }
        let cmi = j.conditional_mutual_information();
        assert!(cmi > 0.0);
        assert!((cmi - oracle).abs() < 1e-13, "{cmi} vs {oracle}");
    }

    #[test]
    fn estimator_table_shape_checks() {
        assert!(EstimatorTable::new(vec![]).is_err());
        assert!(EstimatorTable::new(vec![s(&[0.5, 0.5]), s(&[0.2, 0.3, 0.5])]).is_err());
        let t = EstimatorTable::with_undefined(vec![None, Some(s(&[0.5, 0.5]))]).unwrap();
        assert_eq!((t.nx(), t.nz()), (2, 2));
        assert!(!t.is_fully_defined());
    }
}
