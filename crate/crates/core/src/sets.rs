//! Measurable subsets of `[0, 1]` stored as finite unions of half-open intervals.
//!
//! Endpoints are held on a fixed dyadic lattice of `2^-40`, so lengths, densities
//! and complements are exact integer arithmetic. A set is rasterized onto a
//! torus only when a grid is needed, with the convention `x ∈ [a, b) → 1`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusConfig};

/// Lattice points per unit length.
pub const TICKS_PER_UNIT: u64 = 1 << 40;

/// A lattice point `k · 2^-40` of `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);
    pub const ONE: Tick = Tick(TICKS_PER_UNIT);

    /// Rounds `x` to the nearest lattice point; `x` must lie in `[0, 1]`.
    pub fn from_f64(x: f64) -> Option<Tick> {
        if !(0.0..=1.0).contains(&x) {
            return None;
        }
        Some(Tick((x * TICKS_PER_UNIT as f64).round() as u64))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_UNIT as f64
    }
}

/// Half-open interval `[start, end)` on the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Interval {
    pub start: Tick,
    pub end: Tick,
}

impl Interval {
    pub fn new(start: Tick, end: Tick) -> Self {
        Interval { start, end }
    }

    pub fn length(&self) -> u64 {
        self.end.0 - self.start.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.start.to_f64() <= x && x < self.end.to_f64()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensitySet {
    intervals: Vec<Interval>,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct SetFile {
    intervals: Vec<[f64; 2]>,
    #[serde(default)]
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

impl DensitySet {
    pub fn empty() -> Self {
        DensitySet {
            intervals: Vec::new(),
            label: "empty".into(),
        }
    }

    pub fn full() -> Self {
        DensitySet {
            intervals: vec![Interval::new(Tick::ZERO, Tick::ONE)],
            label: "full".into(),
        }
    }

    /// Builds a set from real endpoints. Overlapping intervals are merged unless
    /// `strict`, in which case they are reported as a validation error.
    pub fn from_intervals(list: &[[f64; 2]], strict: bool) -> Result<Self> {
        let mut problems = Vec::new();
        let mut raw = Vec::with_capacity(list.len());
        for (i, &[a, b]) in list.iter().enumerate() {
            match (Tick::from_f64(a), Tick::from_f64(b)) {
                (Some(s), Some(e)) if s <= e => raw.push((i, Interval::new(s, e))),
                (Some(_), Some(_)) => problems.push(format!("interval #{i} [{a}, {b}] is reversed")),
                _ => problems.push(format!("interval #{i} [{a}, {b}] is not within [0, 1]")),
            }
        }
        if strict {
            let mut sorted = raw.clone();
            sorted.sort_by_key(|(_, iv)| *iv);
            for pair in sorted.windows(2) {
                let ((i, x), (j, y)) = (pair[0], pair[1]);
                if y.start < x.end {
                    problems.push(format!("intervals #{i} and #{j} overlap"));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self::normalized(
            raw.into_iter().map(|(_, iv)| iv).collect(),
            String::new(),
        ))
    }

    /// Builds a set from lattice intervals, merging overlaps and touching neighbours.
    pub fn from_ticks(intervals: Vec<Interval>, label: impl Into<String>) -> Result<Self> {
        let bad: Vec<String> = intervals
            .iter()
            .enumerate()
            .filter(|(_, iv)| iv.start > iv.end || iv.end > Tick::ONE)
            .map(|(i, iv)| format!("interval #{i} {iv:?} is invalid"))
            .collect();
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        Ok(Self::normalized(intervals, label.into()))
    }

    fn normalized(mut intervals: Vec<Interval>, label: String) -> Self {
        intervals.retain(|iv| iv.start < iv.end);
        intervals.sort();
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
                _ => merged.push(iv),
            }
        }
        DensitySet {
            intervals: merged,
            label,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn endpoints(&self) -> Vec<[f64; 2]> {
        self.intervals
            .iter()
            .map(|iv| [iv.start.to_f64(), iv.end.to_f64()])
            .collect()
    }

    pub fn measure_ticks(&self) -> u64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    /// `δ = |A|`, exact on the lattice.
    pub fn density(&self) -> f64 {
        self.measure_ticks() as f64 / TICKS_PER_UNIT as f64
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        let idx = self.intervals.partition_point(|iv| iv.end.to_f64() <= x);
        self.intervals.get(idx).is_some_and(|iv| iv.contains(x))
    }

    /// `[0, 1] ∖ A`.
    pub fn complement(&self) -> DensitySet {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut cursor = Tick::ZERO;
        for iv in &self.intervals {
            if iv.start > cursor {
                out.push(Interval::new(cursor, iv.start));
            }
            cursor = iv.end;
        }
        if cursor < Tick::ONE {
            out.push(Interval::new(cursor, Tick::ONE));
        }
        DensitySet {
            intervals: out,
            label: format!("complement({})", self.label),
        }
    }

    /// The rasterized indicator `1_A` on the torus.
    pub fn rasterize(&self, config: &TorusConfig) -> GridFunction {
        let mut samples = vec![0.0; config.len()];
        let h = config.spacing();
        for iv in &self.intervals {
            let (a, b) = (iv.start.to_f64(), iv.end.to_f64());
            let mut i = (a / h).ceil().max(0.0) as usize;
            while i > 0 && config.point(i - 1) >= a {
                i -= 1;
            }
            while i < samples.len() && config.point(i) < a {
                i += 1;
            }
            while i < samples.len() && config.point(i) < b {
                samples[i] = 1.0;
                i += 1;
            }
        }
        GridFunction::new(*config, samples).expect("length matches config")
    }

    /// Half-open index range `[lo, hi)` containing every grid point of `A`.
    pub(crate) fn index_support(&self, config: &TorusConfig) -> std::ops::Range<usize> {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(first), Some(last)) => {
                let h = config.spacing();
                let lo = ((first.start.to_f64() / h).floor() as usize).saturating_sub(1);
                let hi = ((last.end.to_f64() / h).ceil() as usize + 1).min(config.len());
                lo..hi
            }
            _ => 0..0,
        }
    }

    pub fn to_json(&self, provenance: Option<serde_json::Value>) -> String {
        serde_json::to_string_pretty(&SetFile {
            intervals: self.endpoints(),
            label: self.label.clone(),
            provenance,
        })
        .expect("set file serializes")
    }

    pub fn from_json(text: &str, strict: bool) -> Result<Self> {
        let file: SetFile = serde_json::from_str(text)?;
        Ok(Self::from_intervals(&file.intervals, strict)?.with_label(file.label))
    }
}

impl fmt::Display for DensitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (δ = {}, {} intervals)", self.label, self.density(), self.intervals.len())
    }
}

fn check_density(delta: f64) -> Result<u64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("density {delta} must lie in (0, 1]")));
    }
    Ok((delta * TICKS_PER_UNIT as f64).round() as u64)
}

/// Splits `total` into `parts` nonnegative integers, each at least `floor`,
/// uniformly over compositions (via sorted uniform cut points).
fn random_composition(rng: &mut ChaCha8Rng, total: u64, parts: usize, floor: u64) -> Vec<u64> {
    let slack = total - floor * parts as u64;
    let mut cuts: Vec<u64> = (0..parts - 1).map(|_| rng.gen_range(0..=slack)).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(slack)) {
        out.push(floor + c - prev);
        prev = c;
    }
    out
}

/// A seeded union of `pieces` intervals with total length `δ`, uniformly placed.
///
/// Adjacent pieces merge on normalization, so `δ = 1` always yields `[0, 1]`.
pub fn random_set(delta: f64, pieces: usize, seed: u64) -> Result<DensitySet> {
    let mass = check_density(delta)?;
    if pieces == 0 {
        return Err(Error::Infeasible("at least one piece is required".into()));
    }
    if mass < pieces as u64 {
        return Err(Error::Infeasible(format!(
            "{pieces} pieces cannot share a total length of {delta}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lengths = random_composition(&mut rng, mass, pieces, 1);
    let gaps = random_composition(&mut rng, TICKS_PER_UNIT - mass, pieces + 1, 0);
    let mut cursor = 0;
    let mut intervals = Vec::with_capacity(pieces);
    for (len, gap) in lengths.iter().zip(&gaps) {
        cursor += gap;
        intervals.push(Interval::new(Tick(cursor), Tick(cursor + len)));
        cursor += len;
    }
    DensitySet::from_ticks(intervals, format!("random(δ={delta}, pieces={pieces}, seed={seed})"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureKind {
    Periodic,
    CantorLike,
    QuadraticAvoiding,
}

impl FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(StructureKind::Periodic),
            "cantor-like" | "cantor" => Ok(StructureKind::CantorLike),
            "quadratic-avoiding" => Ok(StructureKind::QuadraticAvoiding),
            other => Err(Error::Validation(vec![format!("unknown structure kind '{other}'")])),
        }
    }
}

/// Parameters for [`structured_set`]. Unused fields are ignored by each kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureParams {
    /// Period of the periodic comb; `1/period` is rounded to an integer.
    pub period: f64,
    /// Number of halving levels for the Cantor-like set.
    pub depth: u32,
    /// Cell count of the greedy pattern-avoiding construction.
    pub cells: usize,
    pub seed: u64,
}

impl Default for StructureParams {
    fn default() -> Self {
        StructureParams {
            period: 1.0 / 16.0,
            depth: 4,
            cells: 256,
            seed: 0,
        }
    }
}

pub fn structured_set(kind: StructureKind, delta: f64, params: &StructureParams) -> Result<DensitySet> {
    let mass = check_density(delta)?;
    match kind {
        StructureKind::Periodic => periodic(mass, delta, params.period),
        StructureKind::CantorLike => cantor_like(delta, params.depth),
        StructureKind::QuadraticAvoiding => quadratic_avoiding(mass, delta, params.cells, params.seed),
    }
}

fn periodic(mass: u64, delta: f64, period: f64) -> Result<DensitySet> {
    if !(period > 0.0 && period <= 1.0) {
        return Err(Error::Domain(format!("period {period} must lie in (0, 1]")));
    }
    let count = (1.0 / period).round() as u64;
    if count == 0 || count > 1 << 20 {
        return Err(Error::Domain(format!("period {period} gives an unusable piece count")));
    }
    let len = (mass as f64 / count as f64).round() as u64;
    let intervals = (0..count)
        .map(|k| {
            let start = k * TICKS_PER_UNIT / count;
            Interval::new(Tick(start), Tick((start + len).min(TICKS_PER_UNIT)))
        })
        .collect();
    DensitySet::from_ticks(intervals, format!("periodic(δ={delta}, period=1/{count})"))
}

fn cantor_like(delta: f64, depth: u32) -> Result<DensitySet> {
    if depth > 16 {
        return Err(Error::Domain(format!("depth {depth} exceeds 16")));
    }
    let label = format!("cantor-like(δ={delta}, depth={depth})");
    if depth == 0 {
        return DensitySet::from_intervals(&[[0.0, delta]], false).map(|s| s.with_label(label));
    }
    let ratio = delta.powf(1.0 / depth as f64) / 2.0;
    let mut level = vec![(0.0f64, 1.0f64)];
    for _ in 0..depth {
        level = level
            .into_iter()
            .flat_map(|(a, len)| {
                let child = ratio * len;
                [(a, child), (a + len - child, child)]
            })
            .collect();
    }
    let list: Vec<[f64; 2]> = level.into_iter().map(|(a, len)| [a, (a + len).min(1.0)]).collect();
    DensitySet::from_intervals(&list, false).map(|s| s.with_label(label))
}

/// Greedy selection of `⌈δM⌉` cells out of `M`, each step taking the cell that
/// closes the fewest discrete patterns `{c, c − a, c − round(a²/M)}`.
fn quadratic_avoiding(mass: u64, delta: f64, cells: usize, seed: u64) -> Result<DensitySet> {
    if cells < 2 {
        return Err(Error::Domain("at least two cells are required".into()));
    }
    let wanted = ((delta * cells as f64).ceil() as usize).clamp(1, cells);
    let offset = |a: usize| ((a * a) as f64 / cells as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..cells).collect();
    for i in (1..cells).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut chosen = vec![false; cells];
    let count_new = |chosen: &[bool], n: usize| -> usize {
        let has = |c: usize| c == n || chosen[c];
        let mut hits = 0;
        for a in 1..cells {
            let q = offset(a);
            // n plays the apex c.
            if a <= n && q <= n && has(n - a) && has(n - q) {
                hits += 1;
            }
            // n plays c − a.
            let c = n + a;
            if c < cells && q <= c && has(c) && has(c - q) {
                hits += 1;
            }
            // n plays c − q.
            let c = n + q;
            if q > 0 && q != a && c < cells && a <= c && has(c) && has(c - a) {
                hits += 1;
            }
        }
        hits
    };
    let mut picked: BTreeSet<usize> = BTreeSet::new();
    for _ in 0..wanted {
        let best = order
            .iter()
            .copied()
            .filter(|&c| !chosen[c])
            .min_by_key(|&c| count_new(&chosen, c))
            .expect("a free cell remains");
        chosen[best] = true;
        picked.insert(best);
    }
    let len = mass / wanted as u64;
    let extra = mass - len * wanted as u64;
    let intervals = picked
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let start = c as u64 * TICKS_PER_UNIT / cells as u64;
            let l = len + u64::from((i as u64) < extra);
            Interval::new(Tick(start), Tick(start + l))
        })
        .collect();
    DensitySet::from_ticks(
        intervals,
        format!("quadratic-avoiding(δ={delta}, cells={cells}, seed={seed})"),
    )
}
