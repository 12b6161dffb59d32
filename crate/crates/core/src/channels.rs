//! Channel models, cascades, joint assembly and seeded sampling.
//!
//! The binary erasure channel's output alphabet is ordered `(0, Δ, 1)`, so
//! `Δ` is symbol 1 and the clean `1` is symbol 2. Scenario files and sample
//! files rely on this ordering.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{Joint3, Simplex, StochasticMatrix};

/// Index of the erasure symbol in a BEC output.
pub const ERASURE: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    /// Input 0 passes clean; input 1 is flipped to 0 with probability
    /// `crossover`.
    ZChannel { crossover: f64 },
    /// Binary erasure channel with erasure probability `delta`.
    Bec { delta: f64 },
    General { matrix: StochasticMatrix },
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

impl ChannelSpec {
    pub fn z_channel(crossover: f64) -> Result<Self> {
        check_probability("crossover", crossover)?;
        Ok(ChannelSpec::ZChannel { crossover })
    }

    pub fn bec(delta: f64) -> Result<Self> {
        check_probability("erasure probability", delta)?;
        Ok(ChannelSpec::Bec { delta })
    }

    pub fn general(matrix: StochasticMatrix) -> Self {
        ChannelSpec::General { matrix }
    }

    pub fn input_size(&self) -> usize {
        match self {
            ChannelSpec::ZChannel { .. } | ChannelSpec::Bec { .. } => 2,
            ChannelSpec::General { matrix } => matrix.input_size(),
        }
    }

    pub fn output_size(&self) -> usize {
        match self {
            ChannelSpec::ZChannel { .. } => 2,
            ChannelSpec::Bec { .. } => 3,
            ChannelSpec::General { matrix } => matrix.output_size(),
        }
    }

    pub fn to_matrix(&self) -> Result<StochasticMatrix> {
        match *self {
            ChannelSpec::ZChannel { crossover: p } => {
                check_probability("crossover", p)?;
                StochasticMatrix::new(vec![vec![1.0, 0.0], vec![p, 1.0 - p]])
            }
            ChannelSpec::Bec { delta: d } => {
                check_probability("erasure probability", d)?;
                StochasticMatrix::new(vec![vec![1.0 - d, d, 0.0], vec![0.0, d, 1.0 - d]])
            }
            ChannelSpec::General { ref matrix } => Ok(matrix.clone()),
        }
    }
}

/// Serial composition: `result(b | a) = sum_m second(b | m) first(m | a)`.
pub fn cascade(first: &StochasticMatrix, second: &StochasticMatrix) -> Result<StochasticMatrix> {
    if first.output_size() != second.input_size() {
        return Err(Error::dimension(
            "cascade",
            first.output_size(),
            second.input_size(),
        ));
    }
    let rows = first
        .rows()
        .iter()
        .map(|row| {
            let mut out = vec![0.0; second.output_size()];
            for (m, &w) in row.probs().iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (b, o) in out.iter_mut().enumerate() {
                    *o += w * second.get(m, b);
                }
            }
            Simplex::new(out)
        })
        .collect::<Result<Vec<_>>>()?;
    StochasticMatrix::from_rows(rows)
}

/// `P(x, y, z) = P(x) P(y | x) P(z | y)`, a Markov chain `X - Y - Z` by
/// construction.
pub fn build_joint(prior: &Simplex, xy: &StochasticMatrix, yz: &StochasticMatrix) -> Result<Joint3> {
    if xy.input_size() != prior.len() {
        return Err(Error::dimension("X->Y channel input", prior.len(), xy.input_size()));
    }
    if yz.input_size() != xy.output_size() {
        return Err(Error::dimension(
            "Y->Z channel input",
            xy.output_size(),
            yz.input_size(),
        ));
    }
    Joint3::from_fn(prior.len(), xy.output_size(), yz.output_size(), |x, y, z| {
        prior.get(x) * xy.get(x, y) * yz.get(y, z)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleTriple {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

/// Uniform on `[0, 1)` with 53 random bits.
pub(crate) fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An endless i.i.d. stream of draws from a joint distribution.
///
/// Draws use inverse-CDF lookup over the row-major cells, driven by a
/// ChaCha8 generator seeded with [`SeedableRng::seed_from_u64`]. The same
/// `(joint, seed)` always produces the same sequence.
#[derive(Clone, Debug)]
pub struct SampleStream {
    cdf: Vec<f64>,
    last_cell: usize,
    dims: (usize, usize, usize),
    rng: ChaCha8Rng,
}

impl SampleStream {
    pub fn new(joint: &Joint3, seed: u64) -> Self {
        let mut acc = 0.0;
        let cdf: Vec<f64> = joint
            .cells()
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        let last_cell = joint
            .cells()
            .iter()
            .rposition(|&p| p > 0.0)
            .expect("a valid joint has positive mass");
        SampleStream {
            cdf,
            last_cell,
            dims: joint.dims(),
            rng: seeded_rng(seed),
        }
    }

    /// Consumes the stream, keeping only `(y, z)`.
    pub fn observations(self) -> impl Iterator<Item = (usize, usize)> {
        self.map(|s| (s.y, s.z))
    }
}

impl Iterator for SampleStream {
    type Item = SampleTriple;

    fn next(&mut self) -> Option<SampleTriple> {
        let u = unit_uniform(&mut self.rng);
        // first cell whose cumulative mass exceeds u; rounding in the running
        // sum can leave the total a hair under 1
        let cell = self.cdf.partition_point(|&c| c <= u).min(self.last_cell);
        let (_, ny, nz) = self.dims;
        Some(SampleTriple {
            x: cell / (ny * nz),
            y: (cell / nz) % ny,
            z: cell % nz,
        })
    }
}

pub fn sample_stream(joint: &Joint3, seed: u64, n: usize) -> Vec<SampleTriple> {
    SampleStream::new(joint, seed).take(n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Axis;

    fn m(rows: &[&[f64]]) -> StochasticMatrix {
        StochasticMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn scenario_b_joint() -> Joint3 {
        build_joint(
            &Simplex::uniform(2).unwrap(),
            &ChannelSpec::bec(0.25).unwrap().to_matrix().unwrap(),
            &m(&[&[0.9, 0.1], &[0.7, 0.3], &[0.2, 0.8]]),
        )
        .unwrap()
    }

    #[test]
    fn channel_matrices() {
        let id = ChannelSpec::z_channel(0.0).unwrap().to_matrix().unwrap();
        assert_eq!(id, StochasticMatrix::identity(2).unwrap());
        assert_eq!(
            ChannelSpec::z_channel(0.75).unwrap().to_matrix().unwrap(),
            m(&[&[1.0, 0.0], &[0.75, 0.25]])
        );
        assert_eq!(
            ChannelSpec::bec(0.25).unwrap().to_matrix().unwrap(),
            m(&[&[0.75, 0.25, 0.0], &[0.0, 0.25, 0.75]])
        );
        assert!(ChannelSpec::bec(1.5).is_err());
        assert!(ChannelSpec::z_channel(-0.1).is_err());
    }

    #[test]
    fn cascade_examples() {
        let half = ChannelSpec::z_channel(0.5).unwrap().to_matrix().unwrap();
        let compound = cascade(&half, &half).unwrap();
        let expected = ChannelSpec::z_channel(0.75).unwrap().to_matrix().unwrap();
        assert!(compound.max_abs_diff(&expected).unwrap() < 1e-15);

        let general = m(&[&[0.9, 0.1], &[0.7, 0.3], &[0.2, 0.8]]);
        assert_eq!(cascade(&general, &StochasticMatrix::identity(2).unwrap()).unwrap(), general);

        let bec = ChannelSpec::bec(0.25).unwrap().to_matrix().unwrap();
        let c = cascade(&bec, &general).unwrap();
        assert!(c.max_abs_diff(&m(&[&[0.85, 0.15], &[0.325, 0.675]])).unwrap() < 1e-15);

        assert!(matches!(cascade(&bec, &bec), Err(Error::Dimension { .. })));
    }

    fn general_3x2() -> StochasticMatrix {
        m(&[&[0.9, 0.1], &[0.7, 0.3], &[0.2, 0.8]])
    }

    #[test]
    fn build_joint_examples() {
        let u = Simplex::uniform(2).unwrap();
        let id = StochasticMatrix::identity(2).unwrap();
        let j = build_joint(&u, &id, &id).unwrap();
        assert_eq!(j.get(0, 0, 0), 0.5);
        assert_eq!(j.get(1, 1, 1), 0.5);
        assert_eq!(j.cells().iter().filter(|&&p| p > 0.0).count(), 2);

        let half = ChannelSpec::z_channel(0.5).unwrap().to_matrix().unwrap();
        let a = build_joint(&u, &half, &half).unwrap();
        let post = a.conditional(Axis::X, Axis::Z).unwrap();
        assert!((post.row(0).unwrap().get(0) - 4.0 / 7.0).abs() < 1e-15);

        let b = scenario_b_joint();
        let post = b.conditional(Axis::X, Axis::Z).unwrap();
        assert!((post.row(0).unwrap().get(0) - 0.425 / 0.5875).abs() < 1e-15);
        assert!((post.row(1).unwrap().get(1) - 0.3375 / 0.4125).abs() < 1e-15);
        assert!((b.marginal_z().get(0) - 0.5875).abs() < 1e-15);

        assert!(build_joint(&Simplex::uniform(3).unwrap(), &half, &half).is_err());
        assert!(build_joint(&u, &half, &general_3x2()).is_err());
    }

    #[test]
    fn sample_stream_basics() {
        let b = scenario_b_joint();
        assert!(sample_stream(&b, 7, 0).is_empty());
        assert_eq!(sample_stream(&b, 7, 500), sample_stream(&b, 7, 500));
        assert_ne!(sample_stream(&b, 7, 500), sample_stream(&b, 8, 500));

        let degenerate = Joint3::from_fn(2, 2, 3, |x, y, z| if (x, y, z) == (0, 1, 2) { 1.0 } else { 0.0 })
            .unwrap();
        assert!(sample_stream(&degenerate, 3, 1000)
            .iter()
            .all(|s| *s == SampleTriple { x: 0, y: 1, z: 2 }));
    }

    #[test]
    fn sample_frequencies_converge() {
        let b = scenario_b_joint();
        let n = 1_000_000;
        let mut counts = vec![0usize; b.cells().len()];
        let (_, ny, nz) = b.dims();
        for s in SampleStream::new(&b, 2024).take(n) {
            counts[(s.x * ny + s.y) * nz + s.z] += 1;
        }
        for (c, &p) in counts.iter().zip(b.cells()) {
            let freq = *c as f64 / n as f64;
            assert!((freq - p).abs() < 0.005, "{freq} vs {p}");
            if p == 0.0 {
                assert_eq!(*c, 0);
            }
        }
    }
}
