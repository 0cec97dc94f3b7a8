//! Uniform periodic grids and the arithmetic every other module builds on.
//!
//! Functions live on a torus of circumference `L` sampled at `N` points
//! (`N` a power of two). Data supported in `[0, 1]` is zero-extended, so with
//! the default `L = 4` periodic convolution agrees with convolution on the
//! line for every scale this crate accepts.
//!
//! Fourier convention: `f̂(ξ) = h · Σ_x f(x) e(−xξ/L)` with `h = L/N` and
//! `e(t) = exp(2πit)`. Under this convention
//! `h · Σ |f|² = (1/L) · Σ_ξ |f̂(ξ)|²`, and the integer index `ξ` corresponds
//! to the physical frequency `ξ / L` cycles per unit length.

use std::cell::RefCell;
use std::fmt;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest resolution any operation accepts.
pub const MIN_RESOLUTION: usize = 1 << 6;

/// Minimum number of quadrature samples per scale.
pub const SAMPLES_PER_SCALE: usize = 4;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Circumference and resolution of the ambient torus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusConfig {
    #[serde(rename = "L")]
    circumference: f64,
    #[serde(rename = "N")]
    resolution: usize,
}

impl Default for TorusConfig {
    fn default() -> Self {
        TorusConfig {
            circumference: 4.0,
            resolution: 1 << 16,
        }
    }
}

impl fmt::Display for TorusConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L={}, N={}", self.circumference, self.resolution)
    }
}

impl TorusConfig {
    pub fn new(circumference: f64, resolution: usize) -> Result<Self> {
        if !resolution.is_power_of_two() {
            return Err(Error::Config(format!(
                "resolution {resolution} is not a power of two"
            )));
        }
        if resolution < MIN_RESOLUTION {
            return Err(Error::Config(format!(
                "resolution {resolution} is below the minimum {MIN_RESOLUTION}"
            )));
        }
        if !(circumference.is_finite() && circumference > 0.0) {
            return Err(Error::Config(format!(
                "circumference {circumference} must be positive and finite"
            )));
        }
        Ok(TorusConfig {
            circumference,
            resolution,
        })
    }

    /// Default circumference `L = 4` at the given resolution.
    pub fn with_resolution(resolution: usize) -> Result<Self> {
        Self::new(4.0, resolution)
    }

    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    pub fn len(&self) -> usize {
        self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `h = L / N`.
    pub fn spacing(&self) -> f64 {
        self.circumference / self.resolution as f64
    }

    pub fn point(&self, index: usize) -> f64 {
        index as f64 * self.spacing()
    }

    /// Nearest grid index of `x`, reduced onto the torus.
    pub fn nearest_index(&self, x: f64) -> usize {
        let steps = (x / self.spacing()).round() as i64;
        steps.rem_euclid(self.resolution as i64) as usize
    }

    /// Physical Nyquist frequency `N / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.resolution as f64 / (2.0 * self.circumference)
    }

    /// Smallest admissible averaging scale, `4h`.
    pub fn min_scale(&self) -> f64 {
        SAMPLES_PER_SCALE as f64 * self.spacing()
    }

    /// Number of grid steps `t = jh` with `0 < t <= r`.
    pub fn steps_within(&self, r: f64) -> usize {
        // Tolerate representation error for scales that sit on the grid.
        ((r / self.spacing()) * (1.0 + 1e-12)).floor() as usize
    }

    pub fn check_scale(&self, r: f64) -> Result<()> {
        if !r.is_finite() || self.steps_within(r) < SAMPLES_PER_SCALE {
            return Err(Error::Resolution {
                scale: r,
                min: self.min_scale(),
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_same(&self, other: &TorusConfig) -> Result<()> {
        if self != other {
            return Err(Error::ConfigMismatch {
                left: self.to_string(),
                right: other.to_string(),
            });
        }
        Ok(())
    }

    /// Physical frequency carried by each storage slot.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.resolution)
            .map(|slot| FourierIndex::from_slot(slot, self.resolution).frequency(self))
            .collect()
    }
}

/// Integer frequency `ξ ∈ {−N/2, …, N/2 − 1}` of a spectral coefficient.
///
/// Storage follows the usual FFT layout: slot `s < N/2` holds `ξ = s`, and
/// slot `s >= N/2` holds `ξ = s − N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FourierIndex(pub i64);

impl FourierIndex {
    pub fn from_slot(slot: usize, n: usize) -> Self {
        let slot = slot as i64;
        let n = n as i64;
        if slot < n / 2 {
            FourierIndex(slot)
        } else {
            FourierIndex(slot - n)
        }
    }

    pub fn slot(self, n: usize) -> usize {
        self.0.rem_euclid(n as i64) as usize
    }

    /// Physical frequency in cycles per unit length.
    pub fn frequency(self, config: &TorusConfig) -> f64 {
        self.0 as f64 / config.circumference()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Sup,
}

/// Real samples of a function on the torus, in physical form.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    config: TorusConfig,
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(config: TorusConfig, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != config.len() {
            return Err(Error::Config(format!(
                "expected {} samples, got {}",
                config.len(),
                samples.len()
            )));
        }
        Ok(GridFunction { config, samples })
    }

    pub fn zeros(config: TorusConfig) -> Self {
        GridFunction {
            config,
            samples: vec![0.0; config.len()],
        }
    }

    pub fn constant(config: TorusConfig, value: f64) -> Self {
        GridFunction {
            config,
            samples: vec![value; config.len()],
        }
    }

    /// Samples `f` at the grid points `x_i = i·h`.
    pub fn from_fn(config: TorusConfig, mut f: impl FnMut(f64) -> f64) -> Self {
        let samples = (0..config.len()).map(|i| f(config.point(i))).collect();
        GridFunction { config, samples }
    }

    pub fn config(&self) -> &TorusConfig {
        &self.config
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            config: self.config,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<GridFunction> {
        self.config.ensure_same(&other.config)?;
        Ok(GridFunction {
            config: self.config,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `h`-weighted inner product, summed in index order.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.config.ensure_same(&other.config)?;
        let sum: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.config.spacing() * sum)
    }

    pub fn integral(&self) -> f64 {
        self.config.spacing() * self.samples.iter().sum::<f64>()
    }

    pub fn norm(&self, p: Norm) -> f64 {
        let h = self.config.spacing();
        match p {
            Norm::L1 => h * self.samples.iter().map(|v| v.abs()).sum::<f64>(),
            Norm::L2 => (h * self.samples.iter().map(|v| v * v).sum::<f64>()).sqrt(),
            Norm::Sup => self.samples.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn transform(&self) -> Spectrum {
        let buf: Vec<Complex64> = self
            .samples
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        Spectrum::from_complex_samples(self.config, buf)
    }

    /// Periodic convolution `(f*g)(x) = h · Σ_t f(t) g(x − t)`, computed spectrally.
    pub fn convolve(&self, other: &GridFunction) -> Result<GridFunction> {
        self.config.ensure_same(&other.config)?;
        let a = self.transform();
        let b = other.transform();
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).collect();
        Ok(Spectrum {
            config: self.config,
            coeffs,
        }
        .inverse())
    }

    /// One-sided average `(1/J) Σ_{j=1}^{J} f(x − jh)` over `t ∈ (0, r]`.
    pub fn trailing_average(&self, r: f64) -> Result<GridFunction> {
        self.config.check_scale(r)?;
        let steps = self.config.steps_within(r);
        let prefix = WrappedPrefix::new(&self.samples);
        let n = self.config.len();
        let norm = 1.0 / steps as f64;
        let samples = (0..n)
            .into_par_iter()
            .map(|x| norm * prefix.window((x + n - steps % n) % n, steps))
            .collect();
        Ok(GridFunction {
            config: self.config,
            samples,
        })
    }

    /// Centred average over `|t| <= r`, i.e. `(1/(2J+1)) Σ_{|j|<=J} f(x − jh)`.
    pub fn centered_average(&self, r: f64) -> Result<GridFunction> {
        let steps = self.config.steps_within(r);
        if !r.is_finite() || steps == 0 {
            return Err(Error::Resolution {
                scale: r,
                min: self.config.spacing(),
            });
        }
        let n = self.config.len();
        let width = 2 * steps + 1;
        if width > n {
            return Err(Error::Config(format!(
                "radius {r} exceeds half the circumference"
            )));
        }
        let prefix = WrappedPrefix::new(&self.samples);
        let norm = 1.0 / width as f64;
        let samples = (0..n)
            .into_par_iter()
            .map(|x| norm * prefix.window((x + n - steps) % n, width))
            .collect();
        Ok(GridFunction {
            config: self.config,
            samples,
        })
    }

    /// Pointwise maximum over the given radii of centred averages.
    pub fn hl_maximal(&self, radii: &[f64]) -> Result<GridFunction> {
        if radii.is_empty() {
            return Err(Error::Config("empty list of radii".into()));
        }
        let mut out: Option<Vec<f64>> = None;
        for &r in radii {
            let avg = self.centered_average(r)?;
            out = Some(match out {
                None => avg.samples,
                Some(mut acc) => {
                    acc.iter_mut()
                        .zip(avg.samples)
                        .for_each(|(a, b)| *a = a.max(b));
                    acc
                }
            });
        }
        Ok(GridFunction {
            config: self.config,
            samples: out.expect("radii is nonempty"),
        })
    }

    pub fn to_json(&self) -> String {
        let data: Vec<u8> = self.samples.iter().flat_map(|v| v.to_le_bytes()).collect();
        serde_json::to_string(&Envelope {
            circumference: self.config.circumference,
            resolution: self.config.resolution,
            form: Form::Physical,
            data: BASE64.encode(data),
        })
        .expect("envelope serializes")
    }
}

/// Spectral coefficients `f̂(ξ)` in FFT storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    config: TorusConfig,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    /// Transform arbitrary complex samples; the real case goes through
    /// [`GridFunction::transform`].
    pub fn forward_complex(config: TorusConfig, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != config.len() {
            return Err(Error::Config(format!(
                "expected {} samples, got {}",
                config.len(),
                samples.len()
            )));
        }
        Ok(Self::from_complex_samples(config, samples))
    }

    fn from_complex_samples(config: TorusConfig, mut buf: Vec<Complex64>) -> Self {
        let n = config.len();
        let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
        fft.process(&mut buf);
        let h = config.spacing();
        buf.iter_mut().for_each(|c| *c *= h);
        Spectrum {
            config,
            coeffs: buf,
        }
    }

    pub fn from_coefficients(config: TorusConfig, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != config.len() {
            return Err(Error::Config(format!(
                "expected {} coefficients, got {}",
                config.len(),
                coeffs.len()
            )));
        }
        Ok(Spectrum { config, coeffs })
    }

    pub fn config(&self) -> &TorusConfig {
        &self.config
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficient(&self, xi: FourierIndex) -> Complex64 {
        self.coeffs[xi.slot(self.config.len())]
    }

    pub fn inverse_complex(&self) -> Vec<Complex64> {
        let n = self.config.len();
        let mut buf = self.coeffs.clone();
        let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
        fft.process(&mut buf);
        let scale = 1.0 / self.config.circumference();
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse(&self) -> GridFunction {
        GridFunction {
            config: self.config,
            samples: self.inverse_complex().into_iter().map(|c| c.re).collect(),
        }
    }

    /// Multiply each coefficient by `m(physical frequency)`.
    pub fn apply_multiplier(&self, m: impl Fn(f64) -> f64) -> Spectrum {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(slot, c)| {
                let nu = FourierIndex::from_slot(slot, self.config.len()).frequency(&self.config);
                c * m(nu)
            })
            .collect();
        Spectrum {
            config: self.config,
            coeffs,
        }
    }

    /// Spectral `ℓ²` norm `((1/L) Σ |f̂|²)^{1/2}`, equal to the physical `L²` norm.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (sum / self.config.circumference()).sqrt()
    }

    pub fn to_json(&self) -> String {
        let data: Vec<u8> = self
            .coeffs
            .iter()
            .flat_map(|c| c.re.to_le_bytes().into_iter().chain(c.im.to_le_bytes()))
            .collect();
        serde_json::to_string(&Envelope {
            circumference: self.config.circumference,
            resolution: self.config.resolution,
            form: Form::Spectral,
            data: BASE64.encode(data),
        })
        .expect("envelope serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Physical,
    Spectral,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    #[serde(rename = "L")]
    circumference: f64,
    #[serde(rename = "N")]
    resolution: usize,
    form: Form,
    data: String,
}

/// A deserialized grid file in either form.
#[derive(Clone, Debug, PartialEq)]
pub enum GridData {
    Physical(GridFunction),
    Spectral(Spectrum),
}

impl GridData {
    pub fn form(&self) -> Form {
        match self {
            GridData::Physical(_) => Form::Physical,
            GridData::Spectral(_) => Form::Spectral,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope = serde_json::from_str(text)?;
        let config = TorusConfig::new(env.circumference, env.resolution)?;
        let bytes = BASE64
            .decode(env.data.as_bytes())
            .map_err(|e| Error::Serialization(e.to_string()))?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        if bytes.len() % 8 != 0 {
            return Err(Error::Serialization("payload is not a whole number of f64".into()));
        }
        match env.form {
            Form::Physical => Ok(GridData::Physical(GridFunction::new(config, values)?)),
            Form::Spectral => {
                if values.len() != 2 * config.len() {
                    return Err(Error::Serialization(format!(
                        "spectral payload holds {} values, expected {}",
                        values.len(),
                        2 * config.len()
                    )));
                }
                let coeffs = values
                    .chunks_exact(2)
                    .map(|p| Complex64::new(p[0], p[1]))
                    .collect();
                Ok(GridData::Spectral(Spectrum::from_coefficients(config, coeffs)?))
            }
        }
    }

    pub fn into_physical(self) -> Result<GridFunction> {
        match self {
            GridData::Physical(f) => Ok(f),
            GridData::Spectral(_) => Err(Error::WrongForm {
                expected: "physical",
                found: "spectral",
            }),
        }
    }
}

/// Prefix sums over two copies of a periodic array, so any window of length
/// `<= N` is a single difference. For nonnegative input the prefix is
/// nondecreasing in floating point, hence every window sum is `>= 0`.
pub(crate) struct WrappedPrefix {
    sums: Vec<f64>,
    n: usize,
}

impl WrappedPrefix {
    pub(crate) fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut sums = Vec::with_capacity(2 * n + 1);
        let mut acc = 0.0;
        sums.push(acc);
        for v in values.iter().chain(values) {
            acc += v;
            sums.push(acc);
        }
        WrappedPrefix { sums, n }
    }

    /// Sum of `values[start], …, values[start + len − 1]` (indices mod `N`).
    #[inline]
    pub(crate) fn window(&self, start: usize, len: usize) -> f64 {
        debug_assert!(start < self.n && len <= self.n);
        self.sums[start + len] - self.sums[start]
    }
}
