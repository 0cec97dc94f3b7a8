//! Smooth Fourier projections and the low/medium/high frequency split.
//!
//! The cutoff `φ̂` equals 1 on `|ξ| <= 1/8`, vanishes on `|ξ| >= 1/2`, and is
//! bridged by the smooth step `s(x) = e(x) / (e(x) + e(1 − x))`,
//! `e(x) = exp(−1/x)`. `φ_k` has multiplier `φ̂(2^-k ξ)` and the annular
//! multiplier is `Ψ(ξ) = φ̂(ξ/2) − φ̂(ξ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusConfig};
use crate::sets::DensitySet;

const PLATEAU: f64 = 1.0 / 8.0;
const CUTOFF: f64 = 1.0 / 2.0;

fn flat(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// `C^∞` monotone step from 0 at `x <= 0` to 1 at `x >= 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = flat(x);
        a / (a + flat(1.0 - x))
    }
}

/// The cutoff `φ̂(ξ)`.
pub fn cutoff(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= PLATEAU {
        1.0
    } else if a >= CUTOFF {
        0.0
    } else {
        1.0 - smooth_step((a - PLATEAU) / (CUTOFF - PLATEAU))
    }
}

/// Multiplier of `φ_k`: `φ̂(2^-k ξ)`.
pub fn projection_multiplier(k: f64, xi: f64) -> f64 {
    cutoff(xi * (-k).exp2())
}

/// `Ψ(2^-m ξ) = φ̂(2^-(m+1) ξ) − φ̂(2^-m ξ)`.
pub fn annulus_multiplier(m: f64, xi: f64) -> f64 {
    projection_multiplier(m + 1.0, xi) - projection_multiplier(m, xi)
}

/// `f ↦ φ_k * f`, computed spectrally.
pub fn project(f: &GridFunction, k: f64) -> GridFunction {
    f.transform().apply_multiplier(|xi| projection_multiplier(k, xi)).inverse()
}

/// The annular piece `f_m` with `f̂_m = f̂ · Ψ(2^-m ·)`.
pub fn annular_piece(f: &GridFunction, m: f64) -> GridFunction {
    f.transform().apply_multiplier(|xi| annulus_multiplier(m, xi)).inverse()
}

/// Annular indices whose multiplier touches some nonzero grid frequency.
pub fn representable_annuli(config: &TorusConfig) -> std::ops::RangeInclusive<i32> {
    let lowest = 1.0 / config.circumference();
    let lo = lowest.log2().floor() as i32 + 1;
    let hi = (config.nyquist() / PLATEAU).log2().ceil() as i32 - 1;
    lo..=hi
}

/// Which factor of `B_r(f, g)` a split is for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    F,
    G,
}

/// Scale parameters of the split: `k_δ = k + C log₂(1/δ)`, `l_δ = l − C log₂(1/δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub l: f64,
    pub k: f64,
    pub delta: f64,
    /// Log-factor constant `C`.
    pub constant: f64,
    /// Index multiplier applied on the `g` side; 2 for `P(t) = t²`.
    pub g_scaling: f64,
}

impl SplitParams {
    pub fn new(l: f64, k: f64, delta: f64) -> Self {
        SplitParams {
            l,
            k,
            delta,
            constant: 3.0,
            g_scaling: 2.0,
        }
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = c;
        self
    }

    fn log_factor(&self) -> f64 {
        self.constant * (1.0 / self.delta).log2()
    }

    pub fn low_index(&self) -> f64 {
        self.l - self.log_factor()
    }

    pub fn high_index(&self) -> f64 {
        self.k + self.log_factor()
    }

    /// `(low, high)` cutoff indices for the given side.
    pub fn indices(&self, side: Side) -> (f64, f64) {
        let s = match side {
            Side::F => 1.0,
            Side::G => self.g_scaling,
        };
        (s * self.low_index(), s * self.high_index())
    }

    /// Checks the base indices against the torus: `2^{l_δ} >= 1/L` and
    /// `2^{k_δ}/8 <= N/(2L)`. The `g`-side indices are derived and may leave
    /// this range, in which case the corresponding piece degenerates.
    pub fn validate(&self, config: &TorusConfig) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Range(format!("δ = {} is outside (0, 1]", self.delta)));
        }
        if !(self.l <= self.k) {
            return Err(Error::Range(format!("l = {} exceeds k = {}", self.l, self.k)));
        }
        let floor = -config.circumference().log2();
        if !(self.low_index() >= floor) {
            return Err(Error::Range(format!(
                "l_δ = {} is below the resolution floor log₂(1/L) = {floor}",
                self.low_index()
            )));
        }
        let ceiling = (config.nyquist() / PLATEAU).log2();
        if !(self.high_index() <= ceiling) {
            return Err(Error::Range(format!(
                "k_δ = {} is above the Nyquist ceiling log₂(8·N/(2L)) = {ceiling}",
                self.high_index()
            )));
        }
        Ok(())
    }
}

/// `f = f_L + f_M + f_H`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandDecomposition {
    pub low: GridFunction,
    pub medium: GridFunction,
    pub high: GridFunction,
    pub params: SplitParams,
    pub side: Side,
    /// Cutoff index of `f̂_L = f̂ · φ̂_{low}`.
    pub low_index: f64,
    /// Cutoff index of `f̂_H = f̂ · (1 − φ̂_{high})`.
    pub high_index: f64,
}

impl BandDecomposition {
    pub fn pieces(&self) -> [(&'static str, &GridFunction); 3] {
        [("L", &self.low), ("M", &self.medium), ("H", &self.high)]
    }

    /// Physical-frequency band `[lo, hi]` outside which each piece's multiplier vanishes.
    pub fn support(&self, piece: &str) -> (f64, f64) {
        let edge = |k: f64| k.exp2();
        match piece {
            "L" => (0.0, edge(self.low_index) * CUTOFF),
            "M" => (edge(self.low_index) * PLATEAU, edge(self.high_index) * CUTOFF),
            _ => (edge(self.high_index) * PLATEAU, f64::INFINITY),
        }
    }

    /// `f_L + g` for the `g_L + g_M` combination.
    pub fn low_plus_medium(&self) -> GridFunction {
        self.low.add(&self.medium).expect("pieces share a torus")
    }
}

/// Splits `f` at the side's cutoff indices; `f_M` is defined by subtraction.
pub fn decompose_lmh(f: &GridFunction, params: &SplitParams, side: Side) -> Result<BandDecomposition> {
    params.validate(f.config())?;
    let (low_index, high_index) = params.indices(side);
    let spectrum = f.transform();
    let low = spectrum
        .apply_multiplier(|xi| projection_multiplier(low_index, xi))
        .inverse();
    let high = spectrum
        .apply_multiplier(|xi| 1.0 - projection_multiplier(high_index, xi))
        .inverse();
    let medium = f.zip_with(&low, |a, b| a - b)?.zip_with(&high, |a, b| a - b)?;
    Ok(BandDecomposition {
        low,
        medium,
        high,
        params: *params,
        side,
        low_index,
        high_index,
    })
}

/// `ℓ²` mass of `1̂_A` over `lo < |ξ| <= hi` (physical frequency).
pub fn band_energy(set: &DensitySet, config: &TorusConfig, lo: f64, hi: f64) -> f64 {
    band_energy_of(&set.rasterize(config), lo, hi)
}

pub fn band_energy_of(f: &GridFunction, lo: f64, hi: f64) -> f64 {
    let spectrum = f.transform();
    let config = f.config();
    let sum: f64 = spectrum
        .coefficients()
        .iter()
        .zip(config.frequencies())
        .filter(|(_, xi)| lo < xi.abs() && xi.abs() <= hi)
        .map(|(c, _)| c.norm_sqr())
        .sum();
    (sum / config.circumference()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Norm;
    use crate::sets::random_set;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cfg() -> TorusConfig {
        TorusConfig::with_resolution(1 << 10).unwrap()
    }

    fn random_fn(config: TorusConfig, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_fn(config, |_| rng.gen_range(-1.0..1.0))
    }

    fn cosine(config: TorusConfig, nu: f64) -> GridFunction {
        GridFunction::from_fn(config, |x| (2.0 * PI * nu * x).cos())
    }

    #[test]
    fn cutoff_plateaus() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(0.125), 1.0);
        assert_eq!(cutoff(-0.125), 1.0);
        assert_eq!(cutoff(0.5), 0.0);
        assert_eq!(cutoff(3.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=1000 {
            let v = cutoff(0.125 + 0.375 * i as f64 / 1000.0);
            assert!((0.0..=1.0).contains(&v) && v <= prev);
            prev = v;
        }
    }

    #[test]
    fn projection_on_pure_waves() {
        let c = cfg();
        let k = 4.0;
        let one = GridFunction::constant(c, 1.0);
        assert!(project(&one, k).sub(&one).unwrap().norm(Norm::Sup) < 1e-12);
        // Frequencies are multiples of 1/L = 1/4.
        let pass = cosine(c, 2.0);
        assert!(project(&pass, k).sub(&pass).unwrap().norm(Norm::Sup) < 1e-10);
        let stop = cosine(c, 8.0);
        assert!(project(&stop, k).norm(Norm::Sup) < 1e-10);
    }

    #[test]
    fn projection_is_idempotent_on_band_edges() {
        let c = cfg();
        let f = random_fn(c, 2);
        let once = project(&f, 5.0);
        let twice = project(&once, 5.0);
        // Not a true projection between the plateaus; exact on both plateaus.
        let spec1 = once.transform();
        let spec2 = twice.transform();
        for (slot, xi) in c.frequencies().into_iter().enumerate() {
            if xi.abs() <= 4.0 || xi.abs() >= 16.0 {
                assert!((spec1.coefficients()[slot] - spec2.coefficients()[slot]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn decomposition_reconstructs_exactly() {
        let c = cfg();
        let f = random_fn(c, 11);
        let params = SplitParams::new(2.0, 4.0, 0.5).with_constant(1.0);
        for side in [Side::F, Side::G] {
            let d = decompose_lmh(&f, &params, side).unwrap();
            let sum = d.low.add(&d.medium).unwrap().add(&d.high).unwrap();
            assert!(sum.sub(&f).unwrap().norm(Norm::Sup) <= 1e-12);
        }
    }

    #[test]
    fn low_spectrum_input_has_no_medium_or_high() {
        let c = cfg();
        let params = SplitParams::new(3.0, 5.0, 0.5).with_constant(1.0);
        // l_δ = 2 so the plateau reaches 2^2/8 = 0.5.
        let f = cosine(c, 0.5);
        let d = decompose_lmh(&f, &params, Side::F).unwrap();
        assert!(d.medium.norm(Norm::Sup) < 1e-12);
        assert!(d.high.norm(Norm::Sup) < 1e-12);
    }

    #[test]
    fn range_errors_name_the_bound() {
        let c = cfg();
        let f = GridFunction::zeros(c);
        let low = SplitParams::new(-1.0, 3.0, 0.25);
        match decompose_lmh(&f, &low, Side::F) {
            Err(Error::Range(msg)) => assert!(msg.contains("resolution floor")),
            other => panic!("{other:?}"),
        }
        let high = SplitParams::new(1.0, 9.0, 0.5);
        match decompose_lmh(&f, &high, Side::F) {
            Err(Error::Range(msg)) => assert!(msg.contains("Nyquist ceiling")),
            other => panic!("{other:?}"),
        }
        assert!(decompose_lmh(&f, &SplitParams::new(5.0, 4.0, 0.5), Side::F).is_err());
    }

    #[test]
    fn annuli_telescope() {
        let c = cfg();
        let f = random_fn(c, 4);
        let range = representable_annuli(&c);
        let (lo, hi) = (*range.start(), *range.end());
        let mut sum = project(&f, lo as f64);
        for m in range {
            sum = sum.add(&annular_piece(&f, m as f64)).unwrap();
        }
        assert!(sum.sub(&f).unwrap().norm(Norm::Sup) < 1e-9);
        // Above the last annulus the multiplier is exhausted.
        assert!(annular_piece(&f, hi as f64 + 1.0).norm(Norm::Sup) < 1e-12);
        assert!(project(&f, lo as f64 - 1.0).sub(&GridFunction::constant(c, f.integral() / c.circumference())).unwrap().norm(Norm::Sup) < 1e-12);
    }

    #[test]
    fn wave_lives_in_few_annuli() {
        let c = cfg();
        let m = 5.0;
        let f = cosine(c, 9.5);
        let range = representable_annuli(&c);
        let active: Vec<i32> = range
            .filter(|&j| annular_piece(&f, j as f64).norm(Norm::L2) > 1e-10)
            .collect();
        assert!(!active.is_empty() && active.len() <= 3, "{active:?}");
        assert!(active.contains(&(m as i32)));
    }

    #[test]
    fn band_energy_examples() {
        let c = TorusConfig::with_resolution(1 << 12).unwrap();
        let full = DensitySet::full();
        let e = band_energy(&full, &c, 0.0, c.nyquist());
        assert!((e - 0.75f64.sqrt()).abs() < 1e-12, "{e}");
        assert_eq!(band_energy(&full, &c, 0.1, 0.2), 0.0);

        let a = random_set(0.4, 9, 3).unwrap();
        let mask = a.rasterize(&c);
        let mean = mask.integral() / c.circumference();
        let total = mask.norm(Norm::L2).powi(2) - c.circumference() * mean * mean;
        let edges = [0.0, 1.0, 4.0, 17.5, 100.0, c.nyquist()];
        let parts: f64 = edges.windows(2).map(|w| band_energy(&a, &c, w[0], w[1]).powi(2)).sum();
        assert!((parts - total).abs() < 1e-10);
    }

    #[test]
    fn complementary_medium_pieces_cancel() {
        let c = TorusConfig::with_resolution(1 << 12).unwrap();
        let params = SplitParams::new(3.0, 5.0, 0.5).with_constant(1.0);
        let a = random_set(0.3, 12, 21).unwrap();
        let b = a.complement();
        let med = |s: &DensitySet| decompose_lmh(&s.rasterize(&c), &params, Side::F).unwrap().medium;
        let lhs = med(&a).add(&med(&b)).unwrap().norm(Norm::L2);
        let rhs = med(&DensitySet::full()).norm(Norm::L2);
        assert!(lhs <= rhs + 1e-10);
    }

    #[test]
    fn matches_direct_multiplier_oracle() {
        let c = TorusConfig::with_resolution(1 << 8).unwrap();
        let f = random_fn(c, 8);
        let n = c.len();
        let k = 3.5;
        let direct: Vec<f64> = (0..n)
            .map(|x| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, xi) in c.frequencies().into_iter().enumerate() {
                    let coeff: Complex64 = (0..n)
                        .map(|y| f.samples()[y] * Complex64::from_polar(1.0, -2.0 * PI * (y * s) as f64 / n as f64))
                        .sum::<Complex64>()
                        * c.spacing();
                    acc += coeff * projection_multiplier(k, xi) * Complex64::from_polar(1.0, 2.0 * PI * (x * s) as f64 / n as f64);
                }
                acc.re / c.circumference()
            })
            .collect();
        let fast = project(&f, k);
        for (a, b) in fast.samples().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
