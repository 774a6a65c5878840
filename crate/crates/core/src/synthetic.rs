//! Seeded generators for the artificial benchmark families and the sinc
//! example with its analytic conditional quantile.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`; each
//! column of draws uses its own stream so the datasets do not depend on the
//! order in which columns are generated:
//!
//! | stream | use            |
//! |--------|----------------|
//! | 1      | training noise |
//! | 2      | test inputs    |
//! | 3      | test noise     |
//! | 4      | sinc inputs    |
//! | 5      | sinc noise     |
//!
//! Training inputs of the A/B families and of `Sinc` lie on an evenly spaced
//! grid over the domain; test inputs are uniform on the domain.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::loss::check_tau;

const STREAM_TRAIN_NOISE: u64 = 1;
const STREAM_TEST_X: u64 = 2;
const STREAM_TEST_NOISE: u64 = 3;
const STREAM_SINC_X: u64 = 4;
const STREAM_SINC_NOISE: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A1,
    A2,
    A3,
    B1,
    B2,
    B3,
    Sinc,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::A1,
        Family::A2,
        Family::A3,
        Family::B1,
        Family::B2,
        Family::B3,
        Family::Sinc,
    ];

    /// Default (train, test) sizes.
    pub fn default_sizes(self) -> (usize, usize) {
        match self {
            Family::A1 | Family::A2 => (401, 400),
            Family::A3 => (405, 400),
            Family::B1 | Family::B2 => (801, 161),
            Family::B3 => (805, 400),
            Family::Sinc => (500, 500),
        }
    }

    pub fn domain(self) -> (f64, f64) {
        match self {
            Family::Sinc => (-1.0, 1.0),
            _ => (-4.0, 4.0),
        }
    }

    /// Noise-free response at `x`.
    pub fn clean_response(self, x: f64) -> f64 {
        match self {
            Family::A1 | Family::A2 | Family::A3 => (1.0 - x + 2.0 * x * x) * (-0.5 * x * x).exp(),
            Family::B1 | Family::B2 | Family::B3 => 6.0 * (FRAC_PI_2 - x).sin(),
            Family::Sinc => sinc(x),
        }
    }

    /// Multiplier applied to the raw noise draw at `x`.
    pub fn noise_scale(self, x: f64) -> f64 {
        match self {
            Family::A1 | Family::A2 | Family::A3 => 0.2 * (1.0 + 0.2 * x),
            Family::B1 | Family::B2 | Family::B3 => 3.0 * (FRAC_PI_2 - x).sin(),
            Family::Sinc => sinc_sigma(x),
        }
    }

    /// One raw noise draw `ξ`.
    pub fn sample_noise<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Family::A1 => ChiSquared::new(3.0).expect("valid dof").sample(rng),
            Family::A2 => ChiSquared::new(5.0).expect("valid dof").sample(rng),
            Family::B1 => Normal::new(0.3, 0.6).expect("valid sd").sample(rng),
            Family::B2 => Normal::new(0.5, 0.8).expect("valid sd").sample(rng),
            Family::A3 | Family::B3 => sample_laplace(rng),
            Family::Sinc => Normal::new(0.0, 1.0).expect("valid sd").sample(rng),
        }
    }

    fn response<R: Rng + ?Sized>(self, x: f64, rng: &mut R, noiseless: bool) -> f64 {
        let clean = self.clean_response(x);
        if noiseless {
            clean
        } else {
            clean + self.noise_scale(x) * self.sample_noise(rng)
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::A1 => "A1",
            Family::A2 => "A2",
            Family::A3 => "A3",
            Family::B1 => "B1",
            Family::B2 => "B2",
            Family::B3 => "B3",
            Family::Sinc => "sinc",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = crate::error::TsvqrError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown family {s:?}")))
    }
}

/// Laplace(0, 1) by inversion of an open-interval uniform.
fn sample_laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let t = 2.0 * PI * x;
        t.sin() / t
    }
}

fn sinc_sigma(x: f64) -> f64 {
    0.1 * (1.0 + x).exp()
}

/// GACV-selected `(C, P)` reported for the artificial families (with `C₁ = C₂ = C`
/// and a Gaussian kernel of width `P`), at `τ ∈ {0.10, 0.25, 0.50, 0.75, 0.90}`.
pub fn reference_setting(family: Family, tau: f64) -> Option<(f64, f64)> {
    const TAUS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];
    let col = TAUS.iter().position(|t| (t - tau).abs() < 1e-9)?;
    let (log_c, log_p): ([i32; 5], i32) = match family {
        Family::A1 => ([3, 3, 3, -2, 3], 0),
        Family::A2 => ([3, 3, 3, 1, 3], 0),
        Family::A3 => ([3, 3, 3, 3, 3], 0),
        Family::B1 | Family::B2 => ([1, 2, 1, 3, 3], 1),
        Family::B3 => ([3, 3, 2, 3, 3], 1),
        Family::Sinc => return None,
    };
    Some((2f64.powi(log_c[col]), 2f64.powi(log_p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Emit the clean response (debugging aid).
    #[serde(default)]
    pub noiseless: bool,
}

impl GeneratorSpec {
    /// Family defaults for the sample sizes.
    pub fn new(family: Family, seed: u64) -> Self {
        let (n_train, n_test) = family.default_sizes();
        Self {
            family,
            n_train,
            n_test,
            seed,
            noiseless: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(invalid("sample counts must be at least 1"));
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

fn to_dataset(xs: Vec<f64>, ys: Vec<f64>) -> Result<Dataset> {
    let n = xs.len();
    let inputs = Array2::from_shape_vec((n, 1), xs).map_err(|e| invalid(e.to_string()))?;
    Dataset::new(inputs, Array1::from(ys))?.with_feature_names(vec!["x".to_string()])
}

/// `(train, test)` for one family.
pub fn generate(spec: &GeneratorSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let family = spec.family;
    let (lo, hi) = family.domain();

    let x_train = grid(lo, hi, spec.n_train);
    let mut noise = stream(spec.seed, STREAM_TRAIN_NOISE);
    let y_train = x_train
        .iter()
        .map(|&x| family.response(x, &mut noise, spec.noiseless))
        .collect();

    let x_test = uniform(&mut stream(spec.seed, STREAM_TEST_X), lo, hi, spec.n_test);
    let mut noise = stream(spec.seed, STREAM_TEST_NOISE);
    let y_test = x_test
        .iter()
        .map(|&x| family.response(x, &mut noise, spec.noiseless))
        .collect();

    Ok((to_dataset(x_train, y_train)?, to_dataset(x_test, y_test)?))
}

/// `y = sin(2πx)/(2πx) + ξ`, `ξ ~ N(0, (0.1e^{1+x})²)`, with `x` uniform on `[−1, 1]`.
pub fn generate_sinc(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let xs = uniform(&mut stream(seed, STREAM_SINC_X), -1.0, 1.0, n);
    let mut noise = stream(seed, STREAM_SINC_NOISE);
    let ys = xs
        .iter()
        .map(|&x| Family::Sinc.response(x, &mut noise, false))
        .collect();
    to_dataset(xs, ys)
}

/// Conditional `τ`-quantile of the sinc model: `sinc(2πx) + 0.1e^{1+x}·Φ⁻¹(τ)`.
pub fn sinc_quantile_oracle(x: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let z = StdNormal::standard().inverse_cdf(tau);
    Ok(sinc(x) + sinc_sigma(x) * z)
}
