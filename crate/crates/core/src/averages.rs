//! Bilinear averages `B_r(f, g)(x)` of `f(x − t) g(x − P(t))` over `t ∈ (0, r]`,
//! and the density functionals built from them.
//!
//! The `t` quadrature runs over the same grid as `x`: `t_j = j·h`, and `P(t_j)`
//! is looked up at the nearest grid point. With the sharp kernel every sample
//! carries weight `1/J`; consecutive samples sharing a curve offset are grouped
//! into runs and summed with a wrapped prefix array, so a scale costs one pass
//! per distinct offset rather than one per sample.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusConfig, WrappedPrefix, SAMPLES_PER_SCALE};
use crate::sets::DensitySet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Sharp,
    Smooth,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sharp" => Ok(KernelKind::Sharp),
            "smooth" => Ok(KernelKind::Smooth),
            other => Err(Error::Validation(vec![format!("unknown kernel '{other}'")])),
        }
    }
}

/// Profile `ρ` of the averaging kernel, with `ρ_r(t) = r^{-1} ρ(t/r)`.
///
/// The support `(lo, hi]` defaults to `(0, 1]`. The sharp profile is the
/// normalized indicator of the support; the smooth one is the bump
/// `exp(−1/s) · exp(−1/(1 − s))` with `s` the affine coordinate of the support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub support: (f64, f64),
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::sharp()
    }
}

fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / s - 1.0 / (1.0 - s)).exp()
    }
}

/// `∫₀¹ bump`, by the trapezoid rule (spectrally accurate for a flat bump).
fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let m = 1usize << 16;
        let step = 1.0 / m as f64;
        step * (1..m).map(|i| bump(i as f64 * step)).sum::<f64>()
    })
}

impl KernelSpec {
    pub fn sharp() -> Self {
        KernelSpec {
            kind: KernelKind::Sharp,
            support: (0.0, 1.0),
        }
    }

    pub fn smooth() -> Self {
        KernelSpec {
            kind: KernelKind::Smooth,
            support: (0.0, 1.0),
        }
    }

    pub fn of_kind(kind: KernelKind) -> Self {
        KernelSpec {
            kind,
            support: (0.0, 1.0),
        }
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Config(format!("kernel support ({lo}, {hi}] is invalid")));
        }
        self.support = (lo, hi);
        Ok(self)
    }

    /// `ρ(u)`, normalized so that `∫ ρ = 1`.
    pub fn profile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support;
        let width = hi - lo;
        match self.kind {
            KernelKind::Sharp => {
                if u > lo && u <= hi {
                    1.0 / width
                } else {
                    0.0
                }
            }
            KernelKind::Smooth => bump((u - lo) / width) / (bump_mass() * width),
        }
    }
}

/// Scales `r ∈ (0, 1]`, strictly decreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid(Vec<f64>);

impl ScaleGrid {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::Config("empty scale grid".into()));
        }
        if let Some(r) = scales.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::Config(format!("scale {r} is outside (0, 1]")));
        }
        if scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("scales must be strictly decreasing".into()));
        }
        Ok(ScaleGrid(scales))
    }

    /// `{2^-j : coarsest <= j <= finest}`.
    pub fn dyadic(coarsest: u32, finest: u32) -> Result<Self> {
        if finest < coarsest {
            return Err(Error::Config(format!("empty dyadic range 2^-{coarsest}..2^-{finest}")));
        }
        Self::new((coarsest..=finest).map(|j| (-(j as f64)).exp2()).collect())
    }

    pub fn scales(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Scale indices `k = log₂(1/r)`.
    pub fn indices(&self) -> Vec<f64> {
        self.0.iter().map(|r| -r.log2()).collect()
    }

    pub fn check(&self, config: &TorusConfig) -> Result<()> {
        self.0.iter().try_for_each(|&r| config.check_scale(r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Inf,
    Sup,
}

#[derive(Clone, Copy, Debug)]
struct Run {
    /// Largest `j` of the run; the run covers `last − len + 1 ..= last`.
    last: usize,
    len: usize,
    offset: i64,
}

#[derive(Clone, Debug)]
enum Taps {
    Runs { runs: Vec<Run>, weight: f64 },
    Weighted(Vec<(usize, i64, f64)>),
}

/// Precomputed quadrature for one `(curve, scale, kernel, torus)`.
#[derive(Clone, Debug)]
pub struct BilinearPlan {
    config: TorusConfig,
    scale: f64,
    taps: Taps,
    max_displacement: f64,
}

impl BilinearPlan {
    pub fn new(config: &TorusConfig, curve: &Curve, r: f64, kernel: &KernelSpec) -> Result<Self> {
        curve.ensure_valid()?;
        config.check_scale(r)?;
        let h = config.spacing();
        let (lo, hi) = kernel.support;
        let first = config.steps_within(lo * r) + 1;
        let last = config.steps_within(hi * r);
        if last + 1 < first + SAMPLES_PER_SCALE {
            return Err(Error::Resolution {
                scale: r,
                min: config.min_scale(),
            });
        }
        if last >= config.len() {
            return Err(Error::Config(format!("scale {r} exceeds the circumference")));
        }
        let mut offsets = Vec::with_capacity(last + 1 - first);
        let mut max_displacement = last as f64 * h;
        for j in first..=last {
            let p = curve.eval(j as f64 * h)?;
            max_displacement = max_displacement.max(p.abs());
            offsets.push((j, (p / h).round() as i64));
        }
        let taps = match kernel.kind {
            KernelKind::Sharp => {
                let mut runs: Vec<Run> = Vec::new();
                for &(j, q) in &offsets {
                    match runs.last_mut() {
                        Some(run) if run.offset == q => {
                            run.last = j;
                            run.len += 1;
                        }
                        _ => runs.push(Run {
                            last: j,
                            len: 1,
                            offset: q,
                        }),
                    }
                }
                Taps::Runs {
                    runs,
                    weight: 1.0 / offsets.len() as f64,
                }
            }
            KernelKind::Smooth => {
                let raw: Vec<(usize, i64, f64)> = offsets
                    .iter()
                    .map(|&(j, q)| (j, q, kernel.profile(j as f64 * h / r)))
                    .filter(|&(_, _, w)| w > 0.0)
                    .collect();
                let total: f64 = raw.iter().map(|t| t.2).sum();
                if raw.is_empty() || total <= 0.0 {
                    return Err(Error::Resolution {
                        scale: r,
                        min: config.min_scale(),
                    });
                }
                Taps::Weighted(raw.into_iter().map(|(j, q, w)| (j, q, w / total)).collect())
            }
        };
        Ok(BilinearPlan {
            config: *config,
            scale: r,
            taps,
            max_displacement,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `max(t, |P(t)|)` over the sampled `t`.
    pub fn max_displacement(&self) -> f64 {
        self.max_displacement
    }

    /// Errors if a pattern anchored in `[0, 1]` could wrap back into `[0, 1]`.
    pub fn ensure_no_wrap(&self) -> Result<()> {
        let limit = self.config.circumference() - 1.0;
        if self.max_displacement >= limit {
            return Err(Error::WrapAround {
                scale: self.scale,
                displacement: self.max_displacement,
                circumference: self.config.circumference(),
            });
        }
        Ok(())
    }

    /// Number of distinct inner sums evaluated per point.
    pub fn cost(&self) -> usize {
        match &self.taps {
            Taps::Runs { runs, .. } => runs.len(),
            Taps::Weighted(t) => t.len(),
        }
    }

    /// `B_r(f, g)` at the indices `xs`.
    pub(crate) fn apply(&self, f: &[f64], g: &[f64], xs: std::ops::Range<usize>) -> Vec<f64> {
        let n = self.config.len();
        let mask = n - 1;
        let reduce = |x: usize, q: i64| (x as i64 - q).rem_euclid(n as i64) as usize;
        match &self.taps {
            Taps::Runs { runs, weight } => {
                let prefix = WrappedPrefix::new(f);
                xs.into_par_iter()
                    .map(|x| {
                        let mut acc = 0.0;
                        for run in runs {
                            let start = (x + n - (run.last & mask)) & mask;
                            acc += g[reduce(x, run.offset)] * prefix.window(start, run.len);
                        }
                        weight * acc
                    })
                    .collect()
            }
            Taps::Weighted(taps) => xs
                .into_par_iter()
                .map(|x| {
                    taps.iter()
                        .map(|&(j, q, w)| w * f[(x + n - (j & mask)) & mask] * g[reduce(x, q)])
                        .sum()
                })
                .collect(),
        }
    }
}

/// Best pin found by [`AverageContext::pinned_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinReport {
    /// Maximizing pin, or `None` when no pin was evaluated.
    pub best_pin: Option<f64>,
    pub best_inf: f64,
    /// `(T, pinned density)` at the best pin.
    pub profile: Vec<(f64, f64)>,
    pub pins_evaluated: usize,
}

/// Torus, curve and kernel shared by a family of evaluations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageContext {
    pub config: TorusConfig,
    pub curve: Curve,
    pub kernel: KernelSpec,
}

impl AverageContext {
    pub fn new(config: TorusConfig, curve: Curve, kernel: KernelSpec) -> Self {
        AverageContext { config, curve, kernel }
    }

    pub fn plan(&self, r: f64) -> Result<BilinearPlan> {
        BilinearPlan::new(&self.config, &self.curve, r, &self.kernel)
    }

    /// `B_r(f, g)` on the whole torus.
    pub fn bilinear_average(&self, f: &GridFunction, g: &GridFunction, r: f64) -> Result<GridFunction> {
        self.config.ensure_same(f.config())?;
        self.config.ensure_same(g.config())?;
        let plan = self.plan(r)?;
        let values = plan.apply(f.samples(), g.samples(), 0..self.config.len());
        GridFunction::new(self.config, values)
    }

    fn density_plan(&self, r: f64) -> Result<BilinearPlan> {
        let plan = self.plan(r)?;
        plan.ensure_no_wrap()?;
        Ok(plan)
    }

    /// `⟨1_A, B_r(1_A, 1_A)⟩`.
    pub fn pairing(&self, set: &DensitySet, r: f64) -> Result<f64> {
        let plan = self.density_plan(r)?;
        let mask = set.rasterize(&self.config);
        let range = set.index_support(&self.config);
        let values = plan.apply(mask.samples(), mask.samples(), range.clone());
        Ok(self.config.spacing() * weighted_sum(&mask.samples()[range], &values))
    }

    fn extremal_on(
        &self,
        mask: &GridFunction,
        scales: &ScaleGrid,
        mode: Extremum,
        range: std::ops::Range<usize>,
    ) -> Result<Vec<f64>> {
        let mut out: Option<Vec<f64>> = None;
        for &r in scales.scales() {
            let plan = self.density_plan(r)?;
            let values = plan.apply(mask.samples(), mask.samples(), range.clone());
            out = Some(match out {
                None => match mode {
                    Extremum::Inf => values,
                    Extremum::Sup => values.into_iter().map(f64::abs).collect(),
                },
                Some(mut acc) => {
                    for (a, v) in acc.iter_mut().zip(values) {
                        *a = match mode {
                            Extremum::Inf => a.min(v),
                            Extremum::Sup => a.max(v.abs()),
                        };
                    }
                    acc
                }
            });
        }
        out.ok_or_else(|| Error::Config("empty scale grid".into()))
    }

    /// Pointwise `min_r B_r(1_A, 1_A)` or `max_r |B_r(1_A, 1_A)|` over the grid.
    pub fn pointwise_extremal(&self, set: &DensitySet, scales: &ScaleGrid, mode: Extremum) -> Result<GridFunction> {
        let mask = set.rasterize(&self.config);
        let values = self.extremal_on(&mask, scales, mode, 0..self.config.len())?;
        GridFunction::new(self.config, values)
    }

    /// `⟨1_A, pointwise_extremal⟩`.
    pub fn paired_extremal(&self, set: &DensitySet, scales: &ScaleGrid, mode: Extremum) -> Result<f64> {
        let mask = set.rasterize(&self.config);
        let range = set.index_support(&self.config);
        let values = self.extremal_on(&mask, scales, mode, range.clone())?;
        Ok(self.config.spacing() * weighted_sum(&mask.samples()[range], &values))
    }

    /// `min_r ⟨1_A, B_r(1_A, 1_A)⟩` over the grid.
    pub fn global_inf(&self, set: &DensitySet, scales: &ScaleGrid) -> Result<f64> {
        scales
            .scales()
            .iter()
            .map(|&r| self.pairing(set, r))
            .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
    }

    /// Fraction of `t_j = jh ∈ (0, T]` with `x − t_j ∈ A` and `x − P(t_j) ∈ A`.
    pub fn pinned_density(&self, set: &DensitySet, x: f64, horizon: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("pin {x} is outside [0, 1]")));
        }
        self.curve.ensure_valid()?;
        self.config.check_scale(horizon)?;
        let h = self.config.spacing();
        let steps = self.config.steps_within(horizon);
        let mut hits = 0usize;
        for j in 1..=steps {
            let t = j as f64 * h;
            if set.contains(x - t) && set.contains(x - self.curve.eval(t)?) {
                hits += 1;
            }
        }
        Ok(hits as f64 / steps as f64)
    }

    /// The pin maximizing `inf_{T ∈ horizons}` of the pinned density.
    /// Ties go to the earliest pin in `pins`.
    pub fn pinned_scan(&self, set: &DensitySet, horizons: &[f64], pins: &[f64]) -> Result<PinReport> {
        if horizons.is_empty() {
            return Err(Error::Config("empty horizon grid".into()));
        }
        self.curve.ensure_valid()?;
        if let Some(x) = pins.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("pin {x} is outside [0, 1]")));
        }
        let h = self.config.spacing();
        let mut cutoffs = Vec::with_capacity(horizons.len());
        for &t in horizons {
            self.config.check_scale(t)?;
            cutoffs.push(self.config.steps_within(t));
        }
        let max_steps = *cutoffs.iter().max().expect("nonempty");
        let shifts: Vec<(f64, f64)> = (1..=max_steps)
            .map(|j| {
                let t = j as f64 * h;
                self.curve.eval(t).map(|p| (t, p))
            })
            .collect::<Result<_>>()?;

        let profiles: Vec<Vec<f64>> = pins
            .par_iter()
            .map(|&x| {
                let mut running = Vec::with_capacity(max_steps + 1);
                running.push(0usize);
                let mut hits = 0;
                for &(t, p) in &shifts {
                    if set.contains(x - t) && set.contains(x - p) {
                        hits += 1;
                    }
                    running.push(hits);
                }
                cutoffs.iter().map(|&c| running[c] as f64 / c as f64).collect()
            })
            .collect();

        let mut best: Option<(usize, f64)> = None;
        for (i, profile) in profiles.iter().enumerate() {
            let inf = profile.iter().copied().fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(_, b)| inf > b) {
                best = Some((i, inf));
            }
        }
        Ok(match best {
            Some((i, inf)) => PinReport {
                best_pin: Some(pins[i]),
                best_inf: inf,
                profile: horizons.iter().copied().zip(profiles[i].iter().copied()).collect(),
                pins_evaluated: pins.len(),
            },
            None => PinReport {
                best_pin: None,
                best_inf: 0.0,
                profile: Vec::new(),
                pins_evaluated: 0,
            },
        })
    }
}

/// `Σ w_i v_i` in index order; the fixed order keeps results independent of
/// the thread count.
fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}
