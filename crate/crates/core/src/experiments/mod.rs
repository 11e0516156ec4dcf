//! Random compressed-sensing instances, the temperature sweep, network
//! training and the summary statistics written out as CSV.

mod exp1;
mod exp2;
pub mod output;
mod stats;

pub use exp1::{experiment_one, ExperimentOneParams, ExperimentOneResult, Exp1Error, Exp1Stat};
pub use exp2::{
    classical_errors, evaluate_network, mse, oracle_weights, top_weight_overlap, train_network,
    Checkpoint, EpochLog, Evaluation, TrainConfig, TrainState, WeightRow,
};
pub use stats::{log_stats, quantile, relative_error, BoxplotSummary, LogStats, LOG_FLOOR};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SupportSet};
use crate::scalar::{Complex64, Scalar};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of an independent stream identified by `path` under `seed`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

const MATRIX_STREAM: u64 = 1;
const SUPERSET_STREAM: u64 = 2;
const SIGNAL_STREAM: u64 = 3;
const NOISE_STREAM: u64 = 4;
const TRAIN_SPLIT: u64 = 0;
const VAL_SPLIT: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFamily {
    Gaussian,
    Fourier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceParams {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub sigma: f64,
    pub family: MatrixFamily,
    /// Draw supports inside a fixed superset of size `superset_factor * s`.
    #[serde(default)]
    pub superset_factor: Option<usize>,
    #[serde(default)]
    pub normalize_columns: bool,
}

impl InstanceParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n == 0 || self.m == 0 || self.s == 0 {
            return bad(format!("dimensions must be positive, got N={}, m={}, s={}", self.n, self.m, self.s));
        }
        if self.m > self.n {
            return bad(format!("m = {} exceeds N = {}", self.m, self.n));
        }
        if self.s > self.n {
            return bad(format!("s = {} exceeds N = {}", self.s, self.n));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("noise level must be finite and nonnegative, got {}", self.sigma));
        }
        if let Some(k) = self.superset_factor {
            if k == 0 || k * self.s > self.n {
                return bad(format!("superset of size {}·{} does not fit in N = {}", k, self.s, self.n));
            }
        }
        Ok(())
    }
}

/// Scalar fields a measurement model can be drawn over.
pub trait Field: Scalar {
    /// `std * g` with `g` standard normal, split evenly over real and
    /// imaginary parts for complex fields.
    fn noise(rng: &mut ChaCha8Rng, std: f64) -> Self;
    fn measurement_matrix(family: MatrixFamily, m: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<DenseMatrix<Self>>;
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

impl Field for f64 {
    fn noise(rng: &mut ChaCha8Rng, std: f64) -> Self {
        std * normal(rng)
    }

    fn measurement_matrix(family: MatrixFamily, m: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<DenseMatrix<Self>> {
        match family {
            MatrixFamily::Gaussian => Ok(gaussian_matrix(m, n, rng)),
            MatrixFamily::Fourier => Err(Error::InvalidArgument("partial Fourier matrices are complex".into())),
        }
    }
}

impl Field for Complex64 {
    fn noise(rng: &mut ChaCha8Rng, std: f64) -> Self {
        let s = std / 2f64.sqrt();
        let re = s * normal(rng);
        Complex64::new(re, s * normal(rng))
    }

    fn measurement_matrix(family: MatrixFamily, m: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<DenseMatrix<Self>> {
        match family {
            MatrixFamily::Fourier => Ok(partial_fourier(m, n, rng)),
            MatrixFamily::Gaussian => Err(Error::InvalidArgument("Gaussian matrices are real".into())),
        }
    }
}

/// `A'/sqrt(m)` with i.i.d. standard normal `A'`.
pub fn gaussian_matrix(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
    let scale = 1.0 / (m as f64).sqrt();
    DenseMatrix::from_fn(m, n, |_, _| scale * normal(rng))
}

/// `m` distinct rows of the DFT matrix `exp(-2 pi i k l / N)`, frequencies
/// `k = -N/2 + 1, ..., N/2`, scaled by `1/sqrt(m)`. Rows are kept in
/// increasing frequency order.
pub fn partial_fourier(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<Complex64> {
    let mut rows = sample(rng, n, m).into_vec();
    rows.sort_unstable();
    let first = -(n as i64) / 2 + 1;
    let freqs: Vec<i64> = rows.iter().map(|&r| first + r as i64).collect();
    let scale = 1.0 / (m as f64).sqrt();
    DenseMatrix::from_fn(m, n, |i, l| {
        let phase = (freqs[i] * l as i64).rem_euclid(n as i64) as f64;
        let angle = -2.0 * std::f64::consts::PI * phase / n as f64;
        Complex64::new(scale * angle.cos(), scale * angle.sin())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance<T> {
    pub a: DenseMatrix<T>,
    pub x_true: Vec<T>,
    pub support: SupportSet,
    pub superset: Option<SupportSet>,
    pub y: Vec<T>,
    pub noise_sigma: f64,
    pub matrix_family: MatrixFamily,
    pub seed: u64,
}

/// Either field, chosen at run time by the matrix family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum AnyInstance {
    Real(ProblemInstance<f64>),
    Complex(ProblemInstance<Complex64>),
}

/// A single sparse signal and its measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub support: SupportSet,
}

fn draw_superset(params: &InstanceParams, seed: u64) -> Result<Option<SupportSet>> {
    params
        .superset_factor
        .map(|k| {
            let mut rng = stream(seed, &[SUPERSET_STREAM]);
            SupportSet::new(sample(&mut rng, params.n, k * params.s).into_vec(), params.n)
        })
        .transpose()
}

fn draw_sample<T: Field>(
    a: &DenseMatrix<T>,
    params: &InstanceParams,
    superset: Option<&SupportSet>,
    seed: u64,
    path: &[u64],
) -> Result<Sample<T>> {
    let n = params.n;
    let mut rng = stream(seed, &[&[SIGNAL_STREAM], path].concat());
    let picks = match superset {
        Some(t) => sample(&mut rng, t.len(), params.s)
            .into_iter()
            .map(|i| t.indices()[i])
            .collect(),
        None => sample(&mut rng, n, params.s).into_vec(),
    };
    let support = SupportSet::new(picks, n)?;
    let mut x = vec![T::zero(); n];
    for &j in support.indices() {
        x[j] = T::from_real(normal(&mut rng));
    }
    let mut y = a.matvec(&x)?;
    if params.sigma > 0.0 {
        let mut noise = stream(seed, &[&[NOISE_STREAM], path].concat());
        let std = params.sigma / (params.m as f64).sqrt();
        for yi in &mut y {
            *yi += T::noise(&mut noise, std);
        }
    }
    Ok(Sample { x, y, support })
}

fn draw_matrix<T: Field>(params: &InstanceParams, seed: u64) -> Result<DenseMatrix<T>> {
    let mut rng = stream(seed, &[MATRIX_STREAM]);
    let mut a = T::measurement_matrix(params.family, params.m, params.n, &mut rng)?;
    if params.normalize_columns {
        a.normalize_columns();
    }
    Ok(a)
}

/// One instance over the field `T`; fully determined by `(params, seed)`.
pub fn generate_typed<T: Field>(params: &InstanceParams, seed: u64) -> Result<ProblemInstance<T>> {
    params.validate()?;
    let a = draw_matrix::<T>(params, seed)?;
    let superset = draw_superset(params, seed)?;
    let smp = draw_sample(&a, params, superset.as_ref(), seed, &[])?;
    Ok(ProblemInstance {
        a,
        x_true: smp.x,
        support: smp.support,
        superset,
        y: smp.y,
        noise_sigma: params.sigma,
        matrix_family: params.family,
        seed,
    })
}

/// Real instance for Gaussian matrices, complex for partial Fourier.
pub fn generate_instance(params: &InstanceParams, seed: u64) -> Result<AnyInstance> {
    Ok(match params.family {
        MatrixFamily::Gaussian => AnyInstance::Real(generate_typed(params, seed)?),
        MatrixFamily::Fourier => AnyInstance::Complex(generate_typed(params, seed)?),
    })
}

/// Training and validation signals sharing one matrix and one superset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub a: DenseMatrix<T>,
    pub superset: Option<SupportSet>,
    pub train: Vec<Sample<T>>,
    pub val: Vec<Sample<T>>,
    pub params: InstanceParams,
    pub seed: u64,
}

pub fn generate_dataset<T: Field>(
    params: &InstanceParams,
    n_train: usize,
    n_val: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    params.validate()?;
    let a = draw_matrix::<T>(params, seed)?;
    let superset = draw_superset(params, seed)?;
    let split = |tag: u64, count: usize| -> Result<Vec<Sample<T>>> {
        (0..count as u64)
            .map(|i| draw_sample(&a, params, superset.as_ref(), seed, &[tag, i]))
            .collect()
    };
    let train = split(TRAIN_SPLIT, n_train)?;
    let val = split(VAL_SPLIT, n_val)?;
    Ok(Dataset {
        a,
        superset,
        train,
        val,
        params: params.clone(),
        seed,
    })
}
