//! Numerical probes of the averaging inequalities.
//!
//! Every "≲" becomes an observed statistic compared against a configurable
//! threshold. Thresholds are calibration defaults.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::averages::{AverageContext, KernelSpec, ScaleGrid};
use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::frequency::{annulus_multiplier, decompose_lmh, representable_annuli, Side, SplitParams};
use crate::grid::{GridFunction, Norm, TorusConfig};
use crate::sets::{random_set, structured_set, DensitySet, StructureKind, StructureParams};

/// Relative size below which an annular piece or probe value counts as vanishing.
pub const VANISHING: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub name: String,
    pub inputs: serde_json::Value,
    pub statistic: f64,
    pub baseline: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ProbeReport {
    pub fn new(
        name: impl Into<String>,
        inputs: serde_json::Value,
        statistic: f64,
        baseline: f64,
        comparison: Comparison,
    ) -> Self {
        let pass = match comparison {
            Comparison::AtMost => statistic <= baseline,
            Comparison::AtLeast => statistic >= baseline,
        };
        ProbeReport {
            name: name.into(),
            inputs,
            statistic,
            baseline,
            comparison,
            pass,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

fn check_unit_function(f: &GridFunction) -> Result<()> {
    let config = f.config();
    let mut out_of_range = 0usize;
    let mut outside_support = 0usize;
    for (i, &v) in f.samples().iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            out_of_range += 1;
        } else if v != 0.0 && config.point(i) > 1.0 {
            outside_support += 1;
        }
    }
    let mut problems = Vec::new();
    if out_of_range > 0 {
        problems.push(format!("{out_of_range} samples outside [0, 1]"));
    }
    if outside_support > 0 {
        problems.push(format!("{outside_support} nonzero samples outside the unit interval"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems))
    }
}

fn triple(f: &GridFunction, a: &GridFunction, b: &GridFunction) -> f64 {
    let sum: f64 = f
        .samples()
        .iter()
        .zip(a.samples())
        .zip(b.samples())
        .map(|((x, y), z)| x * y * z)
        .sum();
    f.config().spacing() * sum
}

/// `∫ f · ρ_r*f · ρ_s*f` with one-sided sharp averages.
pub fn martingale_triple(f: &GridFunction, r: f64, s: f64) -> Result<f64> {
    check_unit_function(f)?;
    let a = f.trailing_average(r)?;
    let b = f.trailing_average(s)?;
    Ok(triple(f, &a, &b))
}

/// Smallest `martingale_triple / (∫f)³` found in a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSummary {
    pub min_ratio: f64,
    pub label: String,
    pub density: f64,
    pub r: f64,
    pub s: f64,
    pub sets: usize,
}

/// Minimum of the normalized triple over every set and every `(r, s)` pair of scales.
pub fn martingale_constant(sets: &[DensitySet], config: &TorusConfig, scales: &ScaleGrid) -> Result<MartingaleSummary> {
    scales.check(config)?;
    let per_set: Vec<(f64, f64, f64)> = sets
        .par_iter()
        .map(|set| {
            let f = set.rasterize(config);
            let mass = f.integral();
            let averages: Vec<GridFunction> = scales
                .scales()
                .iter()
                .map(|&r| f.trailing_average(r))
                .collect::<Result<_>>()?;
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for (i, a) in averages.iter().enumerate() {
                for (j, b) in averages.iter().enumerate().skip(i) {
                    let ratio = triple(&f, a, b) / mass.powi(3);
                    if ratio < best.0 {
                        best = (ratio, scales.scales()[i], scales.scales()[j]);
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let mut summary = MartingaleSummary {
        min_ratio: f64::INFINITY,
        label: String::new(),
        density: 0.0,
        r: 0.0,
        s: 0.0,
        sets: sets.len(),
    };
    for (set, (ratio, r, s)) in sets.iter().zip(per_set) {
        if ratio < summary.min_ratio {
            summary.min_ratio = ratio;
            summary.label = set.label().to_string();
            summary.density = set.density();
            summary.r = r;
            summary.s = s;
        }
    }
    Ok(summary)
}

/// Where the `L¹` norm of a probe is taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormDomain {
    #[default]
    Torus,
    Unit,
}

fn l1_on(f: &GridFunction, domain: NormDomain) -> f64 {
    match domain {
        NormDomain::Torus => f.norm(Norm::L1),
        NormDomain::Unit => {
            let config = f.config();
            let sum: f64 = f
                .samples()
                .iter()
                .enumerate()
                .take_while(|(i, _)| config.point(*i) <= 1.0)
                .map(|(_, v)| v.abs())
                .sum();
            config.spacing() * sum
        }
    }
}

/// `sup_r |B_r(f, g)|` over the scale grid.
pub fn maximal_average(f: &GridFunction, g: &GridFunction, ctx: &AverageContext, scales: &ScaleGrid) -> Result<GridFunction> {
    let mut acc: Option<Vec<f64>> = None;
    for &r in scales.scales() {
        let b = ctx.bilinear_average(f, g, r)?;
        acc = Some(match acc {
            None => b.samples().iter().map(|v| v.abs()).collect(),
            Some(mut acc) => {
                acc.iter_mut().zip(b.samples()).for_each(|(a, v)| *a = a.max(v.abs()));
                acc
            }
        });
    }
    GridFunction::new(ctx.config, acc.ok_or_else(|| Error::Config("empty scale grid".into()))?)
}

/// `‖sup_r |B_r(f, g)|‖₁ / (‖f‖₂ ‖g‖₂)`.
pub fn maximal_ratio(
    f: &GridFunction,
    g: &GridFunction,
    ctx: &AverageContext,
    scales: &ScaleGrid,
    domain: NormDomain,
) -> Result<f64> {
    let denom = f.norm(Norm::L2) * g.norm(Norm::L2);
    if denom == 0.0 {
        return Err(Error::Domain("maximal ratio of a zero-norm input".into()));
    }
    let sup = maximal_average(f, g, ctx, scales)?;
    Ok(l1_on(&sup, domain) / denom)
}

/// Settings of the annular decay probe `‖B_{2^-k}(f_{k+m}, g_{s·k+m+p})‖₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySettings {
    pub k: i32,
    pub m_range: RangeInclusive<i32>,
    pub shift: i32,
    /// Scale multiplier on the `g` side; 2 for `P(t) = t²`.
    pub g_scaling: i32,
}

impl DecaySettings {
    pub fn new(k: i32, m_range: RangeInclusive<i32>) -> Self {
        DecaySettings {
            k,
            m_range,
            shift: 0,
            g_scaling: 2,
        }
    }

    pub fn with_shift(mut self, p: i32) -> Self {
        self.shift = p;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub m: i32,
    pub f_index: i32,
    pub g_index: i32,
    pub value: f64,
    /// `false` when a piece or the value vanishes, so it carries no slope information.
    pub included: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub points: Vec<DecayPoint>,
    /// Least-squares slope of `log₂ value` against `m` over included points.
    pub slope: Option<f64>,
}

/// Least-squares slope; `None` with fewer than two distinct abscissae.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

pub fn scale_decay_probe(
    f: &GridFunction,
    g: &GridFunction,
    ctx: &AverageContext,
    settings: &DecaySettings,
) -> Result<DecayReport> {
    let config = ctx.config;
    if settings.shift.abs() > 1 {
        return Err(Error::Range(format!("shift p = {} must satisfy |p| <= 1", settings.shift)));
    }
    if settings.m_range.clone().count() < 4 {
        return Err(Error::Range("the m range needs at least four points".into()));
    }
    let r = (-(settings.k as f64)).exp2();
    config.check_scale(r)?;
    let annuli = representable_annuli(&config);
    let f_indices: Vec<i32> = settings.m_range.clone().map(|m| settings.k + m).collect();
    if let Some(bad) = f_indices.iter().find(|i| !annuli.contains(i)) {
        return Err(Error::Range(format!(
            "f-side annulus {bad} is outside the representable range {}..={}",
            annuli.start(),
            annuli.end()
        )));
    }
    let f_hat = f.transform();
    let g_hat = g.transform();
    let scale = f.norm(Norm::L2) * g.norm(Norm::L2);
    let mut points = Vec::new();
    for m in settings.m_range.clone() {
        let f_index = settings.k + m;
        let g_index = settings.g_scaling * settings.k + m + settings.shift;
        let fm = f_hat.apply_multiplier(|xi| annulus_multiplier(f_index as f64, xi)).inverse();
        let gm = g_hat.apply_multiplier(|xi| annulus_multiplier(g_index as f64, xi)).inverse();
        let vanishes = |piece: &GridFunction, whole: &GridFunction| {
            piece.norm(Norm::L2) <= VANISHING * whole.norm(Norm::L2)
        };
        let (value, included) = if vanishes(&fm, f) || vanishes(&gm, g) {
            (0.0, false)
        } else {
            let v = ctx.bilinear_average(&fm, &gm, r)?.norm(Norm::L1);
            (v, v > VANISHING * scale)
        };
        points.push(DecayPoint {
            m,
            f_index,
            g_index,
            value,
            included,
        });
    }
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.included)
        .map(|p| (p.m as f64, p.value.log2()))
        .collect();
    Ok(DecayReport {
        slope: fit_slope(&fit),
        points,
    })
}

/// `∫_A sup_r |B_r(f_H, g_L + g_M)|` for `f = g = 1_A`, against `δ^C`.
pub fn high_piece_smallness(
    set: &DensitySet,
    ctx: &AverageContext,
    scales: &ScaleGrid,
    params: &SplitParams,
) -> Result<ProbeReport> {
    let config = ctx.config;
    let mask = set.rasterize(&config);
    let f = decompose_lmh(&mask, params, Side::F)?;
    let g = decompose_lmh(&mask, params, Side::G)?;
    let sup = maximal_average(&f.high, &g.low_plus_medium(), ctx, scales)?;
    let statistic = mask.inner(&sup)?;
    let baseline = params.delta.powf(params.constant);
    let inputs = json!({
        "set": set.label(),
        "density": set.density(),
        "N": config.len(),
        "L": config.circumference(),
        "scales": scales.scales(),
        "split": params,
    });
    Ok(ProbeReport::new("high-piece", inputs, statistic, baseline, Comparison::AtMost))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowProductReport {
    /// `sup_{x ∈ [0,1]} |B_r(f_L, f_L) − f_L²|`.
    pub discrepancy: f64,
    /// Whether `2^-k <= r <= 2^-l`.
    pub in_regime: bool,
    pub r: f64,
    pub split: SplitParams,
}

/// Pointwise deviation of `B_r(f_L, f_L)` from `f_L²` for `f = 1_A`.
pub fn low_product_identity(set: &DensitySet, ctx: &AverageContext, r: f64, params: &SplitParams) -> Result<LowProductReport> {
    let config = ctx.config;
    let low = decompose_lmh(&set.rasterize(&config), params, Side::F)?.low;
    let b = ctx.bilinear_average(&low, &low, r)?;
    let discrepancy = b
        .samples()
        .iter()
        .zip(low.samples())
        .enumerate()
        .take_while(|(i, _)| config.point(*i) <= 1.0)
        .map(|(_, (bv, lv))| (bv - lv * lv).abs())
        .fold(0.0, f64::max);
    let in_regime = (-params.k).exp2() <= r && r <= (-params.l).exp2();
    Ok(LowProductReport {
        discrepancy,
        in_regime,
        r,
        split: *params,
    })
}

/// Deterministic corpus alternating random and structured sets with densities in `[lo, hi]`.
pub fn mixed_corpus(count: usize, lo: f64, hi: f64, seed: u64) -> Result<Vec<DensitySet>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = [StructureKind::Periodic, StructureKind::CantorLike, StructureKind::QuadraticAvoiding];
    (0..count)
        .map(|i| {
            let delta = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let sub_seed: u64 = rng.gen();
            if i % 2 == 0 {
                let pieces = rng.gen_range(1..=32);
                random_set(delta, pieces, sub_seed)
            } else {
                let kind = kinds[(i / 2) % kinds.len()];
                let params = StructureParams {
                    period: 1.0 / rng.gen_range(2..=32) as f64,
                    depth: rng.gen_range(1..=5),
                    cells: 128,
                    seed: sub_seed,
                };
                structured_set(kind, delta, &params)
            }
        })
        .collect()
}

/// Uniform random function on `[0, 1]`, zero elsewhere.
pub fn random_unit_function(config: &TorusConfig, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridFunction::from_fn(*config, |x| if x <= 1.0 { rng.gen_range(0.0..1.0) } else { 0.0 })
}

/// Indicator of a seeded random set with 16 pieces and density in `[0.2, 0.5]`.
pub fn random_indicator(config: &TorusConfig, seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = rng.gen_range(0.2..=0.5);
    Ok(random_set(delta, 16, rng.gen())?.rasterize(config))
}

/// Dyadic scales `2^-coarsest ..= 2^-finest`, truncated at the resolution floor.
pub fn resolvable_dyadic(config: &TorusConfig, coarsest: u32, finest: u32) -> Result<ScaleGrid> {
    let finest = (coarsest..=finest)
        .take_while(|&j| (-(j as f64)).exp2() >= config.min_scale())
        .last()
        .ok_or_else(|| Error::Resolution {
            scale: (-(coarsest as f64)).exp2(),
            min: config.min_scale(),
        })?;
    ScaleGrid::dyadic(coarsest, finest)
}

pub const SUITES: [&str; 5] = ["core", "martingale", "maximal", "decay", "high-piece"];

/// Runs a named probe suite at the given resolution.
pub fn run_suite(name: &str, config: &TorusConfig, curve: &Curve, seed: u64) -> Result<Vec<ProbeReport>> {
    let mut reports = Vec::new();
    let wants = |part: &str| name == part || name == "core" || name == "all";
    if !SUITES.contains(&name) && name != "all" {
        return Err(Error::Validation(vec![format!(
            "unknown suite {name:?}; expected one of {}, all",
            SUITES.join(", ")
        )]));
    }
    let sharp = AverageContext::new(*config, curve.clone(), KernelSpec::sharp());
    let small = name == "core";

    if wants("martingale") {
        let sets = mixed_corpus(if small { 40 } else { 200 }, 0.05, 0.5, seed)?;
        let scales = resolvable_dyadic(config, 3, 8)?;
        let summary = martingale_constant(&sets, config, &scales)?;
        let inputs = json!({"sets": sets.len(), "delta": [0.05, 0.5], "scales": scales.scales(), "seed": seed, "N": config.len()});
        reports.push(
            ProbeReport::new("martingale", inputs, summary.min_ratio, 0.2, Comparison::AtLeast).with_note(format!(
                "minimum at {} (δ = {:.4}, r = {}, s = {})",
                summary.label, summary.density, summary.r, summary.s
            )),
        );
    }

    if wants("maximal") {
        let pairs = if small { 8 } else { 100 };
        let scales = resolvable_dyadic(config, 1, 8)?;
        let ratios: Vec<f64> = (0..pairs as u64)
            .map(|i| {
                let f = random_unit_function(config, seed.wrapping_add(2 * i));
                let g = random_unit_function(config, seed.wrapping_add(2 * i + 1));
                maximal_ratio(&f, &g, &sharp, &scales, NormDomain::Torus)
            })
            .collect::<Result<_>>()?;
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let inputs = json!({"pairs": pairs, "scales": scales.scales(), "seed": seed, "N": config.len()});
        reports.push(ProbeReport::new("maximal", inputs, max, 10.0, Comparison::AtMost));
    }

    if wants("decay") {
        let smooth = AverageContext::new(*config, curve.clone(), KernelSpec::smooth());
        let top = *representable_annuli(config).end();
        // Largest k whose g-side annuli 2k+m stay representable for m in [3, 6].
        let k = (top - 6) / 2;
        let settings = DecaySettings::new(k, 3..=6);
        let pairs = if small { 2 } else { 10 };
        let mut negative = 0usize;
        let mut slopes = Vec::new();
        for i in 0..pairs as u64 {
            let f = random_indicator(config, seed.wrapping_add(100 + 2 * i))?;
            let g = random_indicator(config, seed.wrapping_add(101 + 2 * i))?;
            let report = scale_decay_probe(&f, &g, &smooth, &settings)?;
            if report.slope.is_some_and(|s| s < 0.0) {
                negative += 1;
            }
            slopes.push(report.slope);
        }
        let inputs = json!({"pairs": pairs, "k": k, "m": [3, 6], "seed": seed, "N": config.len(), "slopes": slopes});
        reports.push(ProbeReport::new(
            "decay",
            inputs,
            negative as f64 / pairs as f64,
            0.9,
            Comparison::AtLeast,
        ));
    }

    if wants("high-piece") {
        let top = (config.nyquist() * 8.0).log2().floor();
        let delta: f64 = 0.3;
        let constant = 3.0;
        let log_factor = constant * (1.0 / delta).log2();
        let k = (top - log_factor).floor();
        let l = (k - 4.0).max((-config.circumference().log2() + log_factor).ceil());
        let params = SplitParams::new(l, k, delta).with_constant(constant);
        let scales = ScaleGrid::new(
            ((l as i64)..=(k as i64))
                .map(|j| (-(j as f64)).exp2())
                .filter(|&r| r >= config.min_scale() && r <= 1.0)
                .collect(),
        )?;
        reports.push(high_piece_smallness(&DensitySet::full(), &sharp, &scales, &params)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> TorusConfig {
        TorusConfig::with_resolution(n).unwrap()
    }

    /// `h Σ f (A_r f)(A_s f)` with the averages summed directly.
    fn triple_oracle(f: &GridFunction, r: f64, s: f64) -> f64 {
        let c = f.config();
        let n = c.len();
        let avg = |x: usize, steps: usize| -> f64 {
            (1..=steps).map(|j| f.samples()[(x + n - j % n) % n]).sum::<f64>() / steps as f64
        };
        let (jr, js) = (c.steps_within(r), c.steps_within(s));
        (0..n).map(|x| f.samples()[x] * avg(x, jr) * avg(x, js)).sum::<f64>() * c.spacing()
    }

    #[test]
    fn martingale_examples() {
        let c = cfg(1 << 10);
        let r = 1.0 / 64.0;
        assert_eq!(martingale_triple(&GridFunction::zeros(c), r, r).unwrap(), 0.0);
        let full = DensitySet::full().rasterize(&c);
        let v = martingale_triple(&full, r, r).unwrap();
        assert!(v >= (1.0 - 4.0 * r).powi(3));
        assert!((v - triple_oracle(&full, r, r)).abs() < 1e-12);
        let scaled = full.scaled(0.3);
        let w = martingale_triple(&scaled, r, r).unwrap();
        assert!((w - 0.027 * v).abs() < 1e-12);
    }

    #[test]
    fn martingale_homogeneity_and_symmetry() {
        let c = cfg(1 << 10);
        let a = random_set(0.2, 7, 5).unwrap().rasterize(&c);
        let f = a.map(|v| v * 0.8);
        let (r, s) = (1.0 / 16.0, 1.0 / 64.0);
        let base = martingale_triple(&f, r, s).unwrap();
        assert!((base - triple_oracle(&f, r, s)).abs() < 1e-12);
        for k in [0.0, 0.25, 0.5, 1.0] {
            let v = martingale_triple(&f.scaled(k), r, s).unwrap();
            assert!((v - k * k * k * base).abs() < 1e-10);
        }
        assert!((martingale_triple(&f, s, r).unwrap() - base).abs() < 1e-10);
    }

    #[test]
    fn martingale_validation() {
        let c = cfg(1 << 8);
        let bad = GridFunction::constant(c, 0.5);
        assert!(matches!(martingale_triple(&bad, 0.1, 0.1), Err(Error::Validation(_))));
        let neg = GridFunction::from_fn(c, |x| if x < 0.5 { -0.1 } else { 0.0 });
        assert!(matches!(martingale_triple(&neg, 0.1, 0.1), Err(Error::Validation(_))));
    }

    #[test]
    fn maximal_ratio_examples() {
        let c = cfg(1 << 12);
        let ctx = AverageContext::new(c, Curve::parabola(), KernelSpec::sharp());
        let full = DensitySet::full().rasterize(&c);
        let scales = ScaleGrid::dyadic(4, 8).unwrap();
        let ratio = maximal_ratio(&full, &full, &ctx, &scales, NormDomain::Torus).unwrap();
        assert!(ratio <= 1.0 + 1e-9, "{ratio}");

        let single = ScaleGrid::new(vec![0.125]).unwrap();
        let f = random_unit_function(&c, 1);
        let g = random_unit_function(&c, 2);
        let direct = ctx.bilinear_average(&f, &g, 0.125).unwrap().norm(Norm::L1) / (f.norm(Norm::L2) * g.norm(Norm::L2));
        let via = maximal_ratio(&f, &g, &ctx, &single, NormDomain::Torus).unwrap();
        assert_eq!(direct, via);
        let unit = maximal_ratio(&f, &g, &ctx, &single, NormDomain::Unit).unwrap();
        assert!(unit <= via);

        let zero = GridFunction::zeros(c);
        assert!(matches!(maximal_ratio(&zero, &g, &ctx, &single, NormDomain::Torus), Err(Error::Domain(_))));
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = (0..5).map(|m| (m as f64, 3.0 - 0.5 * m as f64)).collect();
        assert!((fit_slope(&pts).unwrap() + 0.5).abs() < 1e-14);
        assert_eq!(fit_slope(&pts[..1]), None);
        assert_eq!(fit_slope(&[(1.0, 1.0), (1.0, 2.0)]), None);
    }

    #[test]
    fn decay_probe_bilinearity_and_exclusion() {
        let c = cfg(1 << 12);
        let ctx = AverageContext::new(c, Curve::parabola(), KernelSpec::smooth());
        let f = random_unit_function(&c, 3);
        let g = random_unit_function(&c, 4);
        // g-side annuli 2k+m run past the top representable annulus for the larger m.
        let top = *representable_annuli(&c).end();
        let settings = DecaySettings::new(3, 3..=7);
        let report = scale_decay_probe(&f, &g, &ctx, &settings).unwrap();
        for p in &report.points {
            if p.g_index > top + 1 {
                assert!(!p.included && p.value == 0.0, "{p:?}");
            }
        }
        let doubled = scale_decay_probe(&f.scaled(2.0), &g, &ctx, &settings).unwrap();
        for (a, b) in report.points.iter().zip(&doubled.points) {
            assert_eq!(2.0 * a.value, b.value);
        }
        let shrunk = scale_decay_probe(&f.scaled(0.37), &g, &ctx, &settings).unwrap();
        match (report.slope, shrunk.slope) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9),
            (a, b) => assert_eq!(a.is_none(), b.is_none()),
        }
    }

    #[test]
    fn decay_probe_errors() {
        let c = cfg(1 << 12);
        let ctx = AverageContext::new(c, Curve::parabola(), KernelSpec::smooth());
        let f = random_unit_function(&c, 3);
        assert!(scale_decay_probe(&f, &f, &ctx, &DecaySettings::new(2, 3..=5)).is_err());
        assert!(scale_decay_probe(&f, &f, &ctx, &DecaySettings::new(2, 3..=6).with_shift(2)).is_err());
        assert!(scale_decay_probe(&f, &f, &ctx, &DecaySettings::new(8, 3..=6)).is_err());
    }

    #[test]
    fn high_piece_examples() {
        let c = cfg(1 << 14);
        let ctx = AverageContext::new(c, Curve::parabola(), KernelSpec::sharp());
        let params = SplitParams::new(4.0, 8.0, 0.3);
        let scales = ScaleGrid::dyadic(4, 8).unwrap();
        let empty = high_piece_smallness(&DensitySet::empty(), &ctx, &scales, &params).unwrap();
        assert_eq!(empty.statistic, 0.0);
        assert!(empty.pass);
        let full = high_piece_smallness(&DensitySet::full(), &ctx, &scales, &params).unwrap();
        assert!(full.statistic <= 1e-6, "{}", full.statistic);
        assert!((full.baseline - 0.027).abs() < 1e-15);
        let a = random_set(0.3, 10, 9).unwrap();
        let rep = high_piece_smallness(&a, &ctx, &scales, &params).unwrap();
        assert!(rep.statistic.is_finite() && rep.statistic >= 0.0);
        assert_eq!(rep.pass, rep.statistic <= rep.baseline);
    }

    #[test]
    fn low_product_examples() {
        let c = cfg(1 << 14);
        let ctx = AverageContext::new(c, Curve::parabola(), KernelSpec::sharp());
        let params = SplitParams::new(4.0, 8.0, 0.3);
        let rep = low_product_identity(&DensitySet::full(), &ctx, 1.0 / 64.0, &params).unwrap();
        assert!(rep.in_regime);
        assert!(rep.discrepancy <= 1e-3, "{}", rep.discrepancy);
        let out = low_product_identity(&DensitySet::full(), &ctx, 0.5, &params).unwrap();
        assert!(!out.in_regime);
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = mixed_corpus(12, 0.05, 0.5, 3).unwrap();
        let b = mixed_corpus(12, 0.05, 0.5, 3).unwrap();
        assert_eq!(a, b);
        for s in &a {
            assert!(s.density() >= 0.05 - 1e-9 && s.density() <= 0.5 + 1.0 / 64.0, "{} {}", s.label(), s.density());
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        let c = cfg(1 << 10);
        assert!(matches!(run_suite("nope", &c, &Curve::parabola(), 0), Err(Error::Validation(_))));
    }
}
