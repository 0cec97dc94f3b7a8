//! Admissible partitions of `(r_min, 1]` and the good/exceptional classification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averages::{AverageContext, Extremum, ScaleGrid};
use crate::error::{Error, Result};
use crate::sets::DensitySet;

/// A half-open interval `(lo, hi]` with a dyadic witness `2^-k` inside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub lo: f64,
    pub hi: f64,
    pub witness: f64,
}

/// Largest `2^-k` in `(lo, hi]`, if any.
pub fn dyadic_witness(lo: f64, hi: f64) -> Option<f64> {
    if !(hi > 0.0) {
        return None;
    }
    let w = hi.log2().floor().exp2();
    // floor(log2) can land one step low for values just above a power of two.
    let w = if 2.0 * w <= hi { 2.0 * w } else { w };
    (w > lo && w <= hi).then_some(w)
}

/// Every `2^-k` in `(lo, hi]`, largest first.
pub fn dyadics_within(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut w = match dyadic_witness(lo, hi) {
        Some(w) => w,
        None => return out,
    };
    while w > lo && w > 0.0 {
        out.push(w);
        w /= 2.0;
    }
    out
}

/// Lists every way `intervals` (each `(lo, hi]`) fails to be an admissible
/// partition of `(r_min, 1]` with `r_min` the smallest left endpoint.
pub fn validate_partition(intervals: &[(f64, f64)]) -> Vec<String> {
    let mut violations = Vec::new();
    if intervals.is_empty() {
        violations.push("empty partition".to_string());
        return violations;
    }
    for &(lo, hi) in intervals {
        if !(lo >= 0.0 && lo < hi && hi <= 1.0) {
            violations.push(format!("({lo}, {hi}] is not a nonempty subinterval of (0, 1]"));
        } else if dyadic_witness(lo, hi).is_none() {
            violations.push(format!("({lo}, {hi}]: no dyadic rational 2^{{-k}} inside"));
        }
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in sorted.windows(2) {
        let ((a, b), (c, d)) = (pair[0], pair[1]);
        if c < b {
            violations.push(format!("({a}, {b}] and ({c}, {d}] are not disjoint"));
        } else if c > b {
            violations.push(format!("gap ({b}, {c}] is not covered"));
        }
    }
    let top = sorted.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if top != 1.0 {
        violations.push(format!("cover ends at {top}, not at 1"));
    }
    violations
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePartition {
    parts: Vec<Part>,
}

impl AdmissiblePartition {
    pub fn new(intervals: &[(f64, f64)]) -> Result<Self> {
        let violations = validate_partition(intervals);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let mut parts: Vec<Part> = intervals
            .iter()
            .map(|&(lo, hi)| Part {
                lo,
                hi,
                witness: dyadic_witness(lo, hi).expect("validated"),
            })
            .collect();
        parts.sort_by(|a, b| b.hi.total_cmp(&a.hi));
        Ok(AdmissiblePartition { parts })
    }

    /// Ordered from the interval ending at 1 downwards.
    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn truncation(&self) -> f64 {
        self.parts.iter().map(|p| p.lo).fold(f64::INFINITY, f64::min)
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.parts.iter().map(|p| (p.lo, p.hi)).collect()
    }
}

/// `{(2^-(j+1), 2^-j] : 0 <= j < depth}`.
pub fn dyadic_partition(depth: u32) -> Result<AdmissiblePartition> {
    if depth == 0 || depth > 60 {
        return Err(Error::Config(format!("partition depth {depth} is outside 1..=60")));
    }
    let intervals: Vec<(f64, f64)> = (0..depth)
        .map(|j| ((-(j as f64) - 1.0).exp2(), (-(j as f64)).exp2()))
        .collect();
    AdmissiblePartition::new(&intervals)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub c_p: f64,
    /// Constant in the exceptional-count bound `C_P δ^-5 log₂(1/δ)`.
    pub count_constant: f64,
    /// Target scale samples per interval: endpoints and dyadics first, then
    /// log-spaced extras up to this count.
    pub samples_per_j: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            c_p: 1e-3,
            count_constant: 1.0,
            samples_per_j: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub lo: f64,
    pub hi: f64,
    pub witness: f64,
    pub samples: Vec<f64>,
    pub v: f64,
    pub good: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedPart {
    pub lo: f64,
    pub hi: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub density: f64,
    pub r_min: f64,
    pub settings: ReportSettings,
    pub threshold: f64,
    pub rows: Vec<PartitionRow>,
    pub dropped: Vec<DroppedPart>,
    pub good_count: usize,
    pub exceptional_count: usize,
    pub bound: f64,
}

impl PartitionReport {
    pub fn within_bound(&self) -> bool {
        self.exceptional_count as f64 <= self.bound
    }
}

/// Scale sample of `(lo, hi]`: both endpoints, every dyadic inside, and
/// log-spaced extras up to `target`, keeping only scales `>= r_min`.
pub fn interval_samples(part: &Part, target: usize, r_min: f64) -> Vec<f64> {
    let mut samples = vec![part.hi];
    if part.lo > 0.0 {
        samples.push(part.lo);
    }
    samples.extend(dyadics_within(part.lo, part.hi));
    let base = part.lo.max(r_min);
    let extras = target.saturating_sub(samples.len());
    if base < part.hi {
        for i in 1..=extras {
            samples.push(base * (part.hi / base).powf(i as f64 / (extras + 1) as f64));
        }
    }
    samples.retain(|&s| s >= r_min && s <= 1.0);
    samples.sort_by(|a, b| b.total_cmp(a));
    samples.dedup();
    samples
}

pub fn partition_report(
    set: &DensitySet,
    ctx: &AverageContext,
    partition: &AdmissiblePartition,
    settings: &ReportSettings,
) -> Result<PartitionReport> {
    if settings.samples_per_j < 2 {
        return Err(Error::Config("samples_per_j must be at least 2".into()));
    }
    let r_min = ctx.config.min_scale();
    let delta = set.density();
    let threshold = settings.c_p * delta.powi(3);
    let evaluated: Vec<std::result::Result<PartitionRow, DroppedPart>> = partition
        .parts()
        .par_iter()
        .map(|part| {
            if part.witness < r_min {
                return Ok(Err(DroppedPart {
                    lo: part.lo,
                    hi: part.hi,
                    reason: format!("witness {} is below the resolution floor {r_min}", part.witness),
                }));
            }
            let samples = interval_samples(part, settings.samples_per_j, r_min);
            let grid = ScaleGrid::new(samples.clone())?;
            let v = ctx.paired_extremal(set, &grid, Extremum::Inf)?.abs();
            Ok(Ok(PartitionRow {
                lo: part.lo,
                hi: part.hi,
                witness: part.witness,
                samples,
                v,
                good: v > 0.0 && v >= threshold,
            }))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for item in evaluated {
        match item {
            Ok(row) => rows.push(row),
            Err(d) => dropped.push(d),
        }
    }
    let good_count = rows.iter().filter(|r| r.good).count();
    let bound = if delta > 0.0 {
        settings.count_constant * delta.powi(-5) * (1.0 / delta).log2()
    } else {
        f64::INFINITY
    };
    Ok(PartitionReport {
        density: delta,
        r_min,
        settings: *settings,
        threshold,
        exceptional_count: rows.len() - good_count,
        good_count,
        rows,
        dropped,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averages::KernelSpec;
    use crate::curves::Curve;
    use crate::grid::TorusConfig;
    use crate::sets::random_set;

    fn ctx(n: usize) -> AverageContext {
        AverageContext::new(TorusConfig::with_resolution(n).unwrap(), Curve::parabola(), KernelSpec::sharp())
    }

    #[test]
    fn witnesses() {
        assert_eq!(dyadic_witness(1.0 / 3.0, 1.0), Some(1.0));
        assert_eq!(dyadic_witness(0.3, 0.6), Some(0.5));
        assert_eq!(dyadic_witness(5.0 / 16.0, 3.0 / 8.0), None);
        assert_eq!(dyadic_witness(0.25, 0.5), Some(0.5));
        assert_eq!(dyadic_witness(0.5, 0.75), None);
        assert_eq!(dyadics_within(0.1, 1.0), vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn dyadic_partitions() {
        let p = dyadic_partition(1).unwrap();
        assert_eq!(p.parts(), &[Part { lo: 0.5, hi: 1.0, witness: 1.0 }]);
        let p = dyadic_partition(3).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.truncation(), 0.125);
        for d in 1..20 {
            let p = dyadic_partition(d).unwrap();
            assert!(validate_partition(&p.intervals()).is_empty());
            for part in p.parts() {
                assert_eq!(part.witness, part.hi);
            }
        }
        assert!(dyadic_partition(0).is_err());
    }

    #[test]
    fn validation_messages() {
        assert!(validate_partition(&[(1.0 / 3.0, 1.0)]).is_empty());
        let v = validate_partition(&[(0.375, 1.0), (5.0 / 16.0, 3.0 / 8.0)]);
        assert!(v.iter().any(|m| m.contains("no dyadic rational 2^{-k} inside")), "{v:?}");
        let v = validate_partition(&[(0.4, 1.0), (0.2, 0.6)]);
        assert!(v.iter().any(|m| m.contains("not disjoint")), "{v:?}");
        let v = validate_partition(&[(0.5, 1.0), (0.1, 0.3)]);
        assert!(v.iter().any(|m| m.contains("gap")), "{v:?}");
        let v = validate_partition(&[(0.25, 0.5)]);
        assert!(v.iter().any(|m| m.contains("not at 1")), "{v:?}");
        assert!(AdmissiblePartition::new(&[(0.6, 1.0), (0.5, 0.6)]).is_err());
    }

    #[test]
    fn samples_include_witness_and_endpoints() {
        let part = Part { lo: 0.1, hi: 0.4, witness: 0.25 };
        let s = interval_samples(&part, 6, 0.01);
        assert!(s.contains(&0.4) && s.contains(&0.1) && s.contains(&0.25) && s.contains(&0.125));
        assert_eq!(s.len(), 6);
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        let s = interval_samples(&part, 2, 0.2);
        assert_eq!(s, vec![0.4, 0.25]);
    }

    #[test]
    fn full_and_empty_sets() {
        let ctx = ctx(1 << 12);
        let p = dyadic_partition(6).unwrap();
        let settings = ReportSettings { c_p: 0.01, ..Default::default() };
        let full = partition_report(&DensitySet::full(), &ctx, &p, &settings).unwrap();
        assert_eq!(full.exceptional_count, 0);
        assert!(full.rows.iter().all(|r| r.v > 0.4));
        let empty = partition_report(&DensitySet::empty(), &ctx, &p, &settings).unwrap();
        assert_eq!(empty.good_count, 0);
        assert_eq!(empty.exceptional_count, p.len());
    }

    #[test]
    fn unresolvable_parts_are_dropped() {
        let ctx = ctx(1 << 8);
        let p = dyadic_partition(10).unwrap();
        let report = partition_report(&DensitySet::full(), &ctx, &p, &ReportSettings::default()).unwrap();
        assert_eq!(report.r_min, 1.0 / 16.0);
        assert_eq!(report.rows.len(), 5);
        assert_eq!(report.dropped.len(), 5);
        assert!(report.dropped.iter().all(|d| d.reason.contains("resolution floor")));
    }

    #[test]
    fn refinement_cannot_lower_v() {
        let ctx = ctx(1 << 12);
        let settings = ReportSettings { samples_per_j: 2, ..Default::default() };
        let fine = dyadic_partition(8).unwrap();
        let coarse_intervals: Vec<(f64, f64)> = (0..4)
            .map(|i: u32| ((-2.0 * i as f64 - 2.0).exp2(), (-2.0 * i as f64).exp2()))
            .collect();
        let coarse = AdmissiblePartition::new(&coarse_intervals).unwrap();
        for seed in 0..4 {
            let a = random_set(0.3, 6, seed).unwrap();
            let parent = partition_report(&a, &ctx, &coarse, &settings).unwrap();
            let child = partition_report(&a, &ctx, &fine, &settings).unwrap();
            for row in &child.rows {
                let up = parent.rows.iter().find(|p| p.lo <= row.lo && row.hi <= p.hi).unwrap();
                assert!(row.v >= up.v - 1e-15);
                if !row.good {
                    assert!(!up.good);
                }
            }
            let min = |r: &PartitionReport| r.rows.iter().map(|r| r.v).fold(f64::INFINITY, f64::min);
            assert!(min(&child) >= min(&parent) - 1e-15);
        }
    }

    #[test]
    fn exchange_inequality() {
        let ctx = ctx(1 << 12);
        let grid = ScaleGrid::dyadic(3, 8).unwrap();
        for seed in 0..5 {
            let a = random_set(0.3, 8, seed).unwrap();
            let g = ctx.global_inf(&a, &grid).unwrap();
            let p = ctx.paired_extremal(&a, &grid, Extremum::Inf).unwrap();
            assert!(g >= p - 1e-10);
        }
    }

    #[test]
    fn report_is_deterministic() {
        let ctx = ctx(1 << 12);
        let a = random_set(0.3, 8, 2).unwrap();
        let p = dyadic_partition(8).unwrap();
        let s = ReportSettings::default();
        assert_eq!(partition_report(&a, &ctx, &p, &s).unwrap(), partition_report(&a, &ctx, &p, &s).unwrap());
    }
}
