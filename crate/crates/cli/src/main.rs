use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use roth_core::averages::{AverageContext, Extremum, KernelKind, KernelSpec, ScaleGrid};
use roth_core::diagnostics::{self, random_indicator, random_unit_function, resolvable_dyadic, DecaySettings};
use roth_core::frequency::{decompose_lmh, Side, SplitParams};
use roth_core::grid::{Norm, TorusConfig};
use roth_core::partition::{dyadic_partition, partition_report, ReportSettings};
use roth_core::search::{calibration_sweep, search_extremal, SearchConfig};
use roth_core::sets::{random_set, structured_set, DensitySet, StructureKind, StructureParams};
use roth_core::Curve;

mod output;

use output::{Report, Table};

#[derive(Parser, Debug)]
#[command(name = "roth", version, about = "Bilinear averages and pattern densities along curves")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Serialize)]
struct Global {
    /// Grid points on the torus (power of two).
    #[arg(long = "N", global = true, default_value_t = 1 << 16)]
    #[serde(rename = "N")]
    n: usize,
    /// Torus circumference.
    #[arg(long = "L", global = true, default_value_t = 4.0)]
    #[serde(rename = "L")]
    l: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON curve or shorthand such as `monomial:2`, `poly:2=1,3=0.5`, `powerlog:1.5,1`.
    #[arg(long, global = true, default_value = "monomial:2")]
    curve: String,
    /// Averaging kernel; each command has its own default.
    #[arg(long, global = true, value_enum)]
    kernel: Option<KernelArg>,
    /// Kernel support `lo,hi` inside `[0, 1]`.
    #[arg(long, global = true)]
    kernel_support: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    #[serde(skip)]
    format: Format,
    /// Worker thread cap.
    #[arg(long, global = true)]
    #[serde(skip)]
    threads: Option<usize>,
    /// Also write `(x, y)` pairs for plotting to this path.
    #[arg(long, global = true)]
    #[serde(skip)]
    plot_data: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KernelArg {
    Sharp,
    Smooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Pairing ⟨1_A, B_r(1_A, 1_A)⟩ at each scale.
    Pair(PairArgs),
    /// Best pin for the pinned pattern density.
    ScanPinned(ScanArgs),
    /// Low/medium/high split of 1_A with per-piece energies.
    Decompose(DecomposeArgs),
    /// Run a probe suite; exit code 2 if any probe fails.
    Verify(VerifyArgs),
    /// Good/exceptional classification over a dyadic partition.
    PartitionReport(PartitionArgs),
    /// Annealing search for sets with few patterns.
    Search(SearchArgs),
    /// Annular decay probe on seeded random functions.
    ProbeDecay(DecayArgs),
    /// Generate a set file.
    GenSet(GenArgs),
}

#[derive(Args, Debug, Serialize)]
struct SetArg {
    /// Set file, or `full` / `empty`.
    #[arg(long)]
    set: String,
}

#[derive(Args, Debug, Serialize)]
struct PairArgs {
    #[command(flatten)]
    set: SetArg,
    /// Scales, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    r: Vec<f64>,
    /// Also report ⟨1_A, inf_r B_r⟩ and ⟨1_A, sup_r |B_r|⟩ over the scales.
    #[arg(long)]
    extremal: bool,
}

#[derive(Args, Debug, Serialize)]
struct ScanArgs {
    #[command(flatten)]
    set: SetArg,
    /// Number of evenly spaced pins in [0, 1].
    #[arg(long, default_value_t = 1024)]
    pins: usize,
    /// Horizons T, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.125, 0.0625, 0.03125, 0.015625])]
    horizons: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
struct DecomposeArgs {
    #[command(flatten)]
    set: SetArg,
    #[arg(long)]
    l: f64,
    #[arg(long)]
    k: f64,
    /// Density parameter in the cutoffs; defaults to the set density.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "C", default_value_t = 3.0)]
    #[serde(rename = "C")]
    c: f64,
    #[arg(long, value_enum, default_value_t = SideArg::F)]
    side: SideArg,
    #[arg(long, default_value_t = 2.0)]
    g_scaling: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SideArg {
    F,
    G,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// core, martingale, maximal, decay, high-piece or all.
    #[arg(long, default_value = "core")]
    suite: String,
}

#[derive(Args, Debug, Serialize)]
struct PartitionArgs {
    #[command(flatten)]
    set: SetArg,
    #[arg(long, default_value_t = 8)]
    depth: u32,
    #[arg(long, default_value_t = 1e-3)]
    c_p: f64,
    #[arg(long, default_value_t = 1.0)]
    count_constant: f64,
    #[arg(long, default_value_t = 4)]
    samples_per_j: usize,
}

#[derive(Args, Debug, Serialize)]
struct SearchArgs {
    #[arg(long, default_value_t = 0.3)]
    delta: f64,
    #[arg(long, default_value_t = 16)]
    pieces: usize,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    t0: f64,
    #[arg(long, default_value_t = 0.995)]
    cooling: f64,
    #[arg(long, default_value_t = 1.0 / 32.0)]
    max_step: f64,
    /// Scales 2^-coarsest ..= 2^-finest, truncated at the resolution floor.
    #[arg(long, default_value_t = 3)]
    coarsest: u32,
    #[arg(long, default_value_t = 10)]
    finest: u32,
    /// Write the best set here.
    #[arg(long)]
    #[serde(skip)]
    best_out: Option<PathBuf>,
    /// Run a calibration sweep over these densities instead of a single search.
    #[arg(long, value_delimiter = ',')]
    calibrate: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
}

#[derive(Args, Debug, Serialize)]
struct DecayArgs {
    #[arg(long)]
    k: i32,
    #[arg(long, default_value_t = 3)]
    m_min: i32,
    #[arg(long, default_value_t = 8)]
    m_max: i32,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    p: i32,
    #[arg(long, default_value_t = 2)]
    g_scaling: i32,
    /// Number of seeded random (f, g) pairs.
    #[arg(long, default_value_t = 1)]
    pairs: usize,
    #[arg(long, value_enum, default_value_t = DecayInput::Sets)]
    inputs: DecayInput,
}

/// Random set indicators, or uniform noise on [0, 1].
#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum DecayInput {
    Sets,
    Noise,
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 16)]
    pieces: usize,
    /// random, periodic, cantor-like or quadratic-avoiding.
    #[arg(long, default_value = "random")]
    kind: String,
    #[arg(long, default_value_t = 1.0 / 16.0)]
    period: f64,
    #[arg(long, default_value_t = 4)]
    depth: u32,
    #[arg(long, default_value_t = 256)]
    cells: usize,
}

struct Env {
    config: TorusConfig,
    curve: Curve,
    global_kernel: Option<KernelArg>,
    support: Option<(f64, f64)>,
    seed: u64,
    header: Value,
}

impl Env {
    fn kernel(&self, default: KernelKind) -> anyhow::Result<KernelSpec> {
        let kind = match self.global_kernel {
            Some(KernelArg::Sharp) => KernelKind::Sharp,
            Some(KernelArg::Smooth) => KernelKind::Smooth,
            None => default,
        };
        let spec = KernelSpec::of_kind(kind);
        Ok(match self.support {
            Some((lo, hi)) => spec.with_support(lo, hi)?,
            None => spec,
        })
    }

    fn context(&self, default: KernelKind) -> anyhow::Result<AverageContext> {
        Ok(AverageContext::new(self.config, self.curve.clone(), self.kernel(default)?))
    }
}

fn load_set(arg: &SetArg) -> anyhow::Result<DensitySet> {
    match arg.set.as_str() {
        "full" => Ok(DensitySet::full()),
        "empty" => Ok(DensitySet::empty()),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading set file {path}"))?;
            Ok(DensitySet::from_json(&text, false)?)
        }
    }
}

fn parse_support(text: &str) -> anyhow::Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("kernel support must be `lo,hi`");
    }
    Ok((parts[0].trim().parse()?, parts[1].trim().parse()?))
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Pair(_) => "pair",
        Command::ScanPinned(_) => "scan-pinned",
        Command::Decompose(_) => "decompose",
        Command::Verify(_) => "verify",
        Command::PartitionReport(_) => "partition-report",
        Command::Search(_) => "search",
        Command::ProbeDecay(_) => "probe-decay",
        Command::GenSet(_) => "gen-set",
    }
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    let g = &cli.global;
    let config = TorusConfig::new(g.l, g.n)?;
    let curve: Curve = g.curve.parse()?;
    curve.ensure_valid()?;
    let support = g.kernel_support.as_deref().map(parse_support).transpose()?;
    let header = json!({
        "command": command_name(&cli.command),
        "version": env!("CARGO_PKG_VERSION"),
        "global": g,
        "curve": curve,
        "args": &cli.command,
    });
    let env = Env {
        config,
        curve,
        global_kernel: g.kernel,
        support,
        seed: g.seed,
        header,
    };
    match &cli.command {
        Command::Pair(a) => pair(&env, a),
        Command::ScanPinned(a) => scan(&env, a),
        Command::Decompose(a) => decompose(&env, a),
        Command::Verify(a) => verify(&env, a),
        Command::PartitionReport(a) => partition(&env, a),
        Command::Search(a) => search(&env, a),
        Command::ProbeDecay(a) => decay(&env, a),
        Command::GenSet(a) => gen_set(&env, a),
    }
}

fn pair(env: &Env, a: &PairArgs) -> anyhow::Result<Report> {
    let ctx = env.context(KernelKind::Sharp)?;
    let set = load_set(&a.set)?;
    let mut rows = Vec::new();
    for &r in &a.r {
        rows.push((r, ctx.pairing(&set, r)?));
    }
    let mut result = json!({
        "set": set.label(),
        "density": set.density(),
        "pairings": rows.iter().map(|(r, v)| json!({"r": r, "pairing": v})).collect::<Vec<_>>(),
        "global_inf": rows.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
    });
    if a.extremal {
        let mut scales = a.r.clone();
        scales.sort_by(|x, y| y.total_cmp(x));
        scales.dedup();
        let grid = ScaleGrid::new(scales)?;
        result["paired_inf"] = json!(ctx.paired_extremal(&set, &grid, Extremum::Inf)?);
        result["paired_sup"] = json!(ctx.paired_extremal(&set, &grid, Extremum::Sup)?);
    }
    let table = Table::new(["r", "pairing"], rows.iter().map(|&(r, v)| vec![r.into(), v.into()]));
    Ok(Report::new(env.header.clone(), result, table).with_plot(rows))
}

fn scan(env: &Env, a: &ScanArgs) -> anyhow::Result<Report> {
    let ctx = env.context(KernelKind::Sharp)?;
    let set = load_set(&a.set)?;
    let pins: Vec<f64> = match a.pins {
        0 => Vec::new(),
        1 => vec![0.5],
        n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    };
    let report = ctx.pinned_scan(&set, &a.horizons, &pins)?;
    let table = Table::new(
        ["T", "pinned_density"],
        report.profile.iter().map(|&(t, v)| vec![t.into(), v.into()]),
    );
    let plot = report.profile.clone();
    Ok(Report::new(env.header.clone(), serde_json::to_value(&report)?, table).with_plot(plot))
}

fn decompose(env: &Env, a: &DecomposeArgs) -> anyhow::Result<Report> {
    let set = load_set(&a.set)?;
    let delta = a.delta.unwrap_or_else(|| set.density());
    let mut params = SplitParams::new(a.l, a.k, delta).with_constant(a.c);
    params.g_scaling = a.g_scaling;
    let side = match a.side {
        SideArg::F => Side::F,
        SideArg::G => Side::G,
    };
    let d = decompose_lmh(&set.rasterize(&env.config), &params, side)?;
    let mut rows = Vec::new();
    for (name, piece) in d.pieces() {
        let (lo, hi) = d.support(name);
        rows.push((name, piece.norm(Norm::L2), lo, hi.min(env.config.nyquist())));
    }
    let result = json!({
        "set": set.label(),
        "split": params,
        "side": a.side,
        "low_index": d.low_index,
        "high_index": d.high_index,
        "pieces": rows.iter().map(|(p, e, lo, hi)| json!({"piece": p, "l2_energy": e, "support_lo": lo, "support_hi": hi})).collect::<Vec<_>>(),
    });
    let table = Table::new(
        ["piece", "l2_energy", "support_lo", "support_hi"],
        rows.iter().map(|&(p, e, lo, hi)| vec![p.into(), e.into(), lo.into(), hi.into()]),
    );
    let spectrum = d.medium.transform();
    let plot: Vec<(f64, f64)> = env
        .config
        .frequencies()
        .into_iter()
        .zip(spectrum.coefficients())
        .filter(|(xi, _)| *xi >= 0.0)
        .map(|(xi, c)| (xi, c.norm()))
        .collect();
    Ok(Report::new(env.header.clone(), result, table).with_plot(plot))
}

fn verify(env: &Env, a: &VerifyArgs) -> anyhow::Result<Report> {
    let reports = diagnostics::run_suite(&a.suite, &env.config, &env.curve, env.seed)?;
    let failed = reports.iter().any(|r| !r.pass);
    let table = Table::new(
        ["probe", "statistic", "baseline", "pass"],
        reports
            .iter()
            .map(|r| vec![r.name.clone().into(), r.statistic.into(), r.baseline.into(), r.pass.into()]),
    );
    Ok(Report::new(env.header.clone(), json!({"suite": a.suite, "probes": reports, "pass": !failed}), table).failing(failed))
}

fn partition(env: &Env, a: &PartitionArgs) -> anyhow::Result<Report> {
    let ctx = env.context(KernelKind::Sharp)?;
    let set = load_set(&a.set)?;
    let p = dyadic_partition(a.depth)?;
    let settings = ReportSettings {
        c_p: a.c_p,
        count_constant: a.count_constant,
        samples_per_j: a.samples_per_j,
    };
    let report = partition_report(&set, &ctx, &p, &settings)?;
    let table = Table::new(
        ["lo", "hi", "witness", "v", "good"],
        report
            .rows
            .iter()
            .map(|r| vec![r.lo.into(), r.hi.into(), r.witness.into(), r.v.into(), r.good.into()]),
    );
    let plot = report.rows.iter().map(|r| (r.witness, r.v)).collect();
    let mut result = serde_json::to_value(&report)?;
    result["within_bound"] = json!(report.within_bound());
    Ok(Report::new(env.header.clone(), result, table).with_plot(plot))
}

fn search(env: &Env, a: &SearchArgs) -> anyhow::Result<Report> {
    let ctx = env.context(KernelKind::Sharp)?;
    let scales = resolvable_dyadic(&env.config, a.coarsest, a.finest)?;
    let config = SearchConfig {
        delta: a.delta,
        pieces: a.pieces,
        initial_temperature: a.t0,
        cooling: a.cooling,
        steps: a.steps,
        seed: env.seed,
        max_step: a.max_step,
        scales,
    };
    if let Some(deltas) = &a.calibrate {
        let table = calibration_sweep(&config, &ctx, deltas, a.repeats)?;
        let rows = Table::new(
            ["delta", "min_objective", "best_seed"],
            table
                .rows
                .iter()
                .map(|r| vec![r.delta.into(), r.min_objective.into(), (r.best_seed as f64).into()]),
        );
        let plot = table.rows.iter().map(|r| (r.delta, r.min_objective)).collect();
        let result = json!({"scales": config.scales.scales(), "calibration": table});
        return Ok(Report::new(env.header.clone(), result, rows).with_plot(plot));
    }
    let outcome = search_extremal(&config, &ctx)?;
    if let Some(path) = &a.best_out {
        let text = outcome.best.to_json(Some(json!({"config": env.header})));
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let best: Value = serde_json::from_str(&outcome.best.to_json(None))?;
    let result = json!({
        "scales": config.scales.scales(),
        "initial_objective": outcome.initial_objective,
        "best_objective": outcome.best_objective,
        "best_set": best,
        "trajectory": outcome.trajectory,
    });
    let table = Table::new(
        ["step", "objective", "accepted"],
        outcome
            .trajectory
            .iter()
            .map(|s| vec![(s.step as f64).into(), s.objective.into(), s.accepted.into()]),
    );
    let plot = outcome.trajectory.iter().map(|s| (s.step as f64, s.objective)).collect();
    Ok(Report::new(env.header.clone(), result, table).with_plot(plot))
}

fn decay(env: &Env, a: &DecayArgs) -> anyhow::Result<Report> {
    let ctx = env.context(KernelKind::Smooth)?;
    let settings = DecaySettings {
        k: a.k,
        m_range: a.m_min..=a.m_max,
        shift: a.p,
        g_scaling: a.g_scaling,
    };
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    for i in 0..a.pairs as u64 {
        let (sf, sg) = (env.seed.wrapping_add(2 * i), env.seed.wrapping_add(2 * i + 1));
        let (f, g) = match a.inputs {
            DecayInput::Sets => (random_indicator(&env.config, sf)?, random_indicator(&env.config, sg)?),
            DecayInput::Noise => (random_unit_function(&env.config, sf), random_unit_function(&env.config, sg)),
        };
        let report = diagnostics::scale_decay_probe(&f, &g, &ctx, &settings)?;
        for p in &report.points {
            rows.push(vec![(i as f64).into(), (p.m as f64).into(), p.value.into(), p.included.into()]);
            if p.included {
                plot.push((p.m as f64, p.value.log2()));
            }
        }
        runs.push(report);
    }
    let negative = runs.iter().filter(|r| r.slope.is_some_and(|s| s < 0.0)).count();
    let result = json!({"runs": runs, "negative_slopes": negative});
    Ok(Report::new(env.header.clone(), result, Table::new(["pair", "m", "value", "included"], rows)).with_plot(plot))
}

fn gen_set(env: &Env, a: &GenArgs) -> anyhow::Result<Report> {
    let set = if a.kind == "random" {
        random_set(a.delta, a.pieces, env.seed)?
    } else {
        let kind: StructureKind = a.kind.parse()?;
        let params = StructureParams {
            period: a.period,
            depth: a.depth,
            cells: a.cells,
            seed: env.seed,
        };
        structured_set(kind, a.delta, &params)?
    };
    let table = Table::new(
        ["start", "end"],
        set.endpoints().into_iter().map(|[s, e]| vec![s.into(), e.into()]),
    );
    let file: Value = serde_json::from_str(&set.to_json(Some(json!({"config": env.header}))))?;
    Ok(Report::set_file(env.header.clone(), file, table))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = report.emit(cli.global.format, cli.global.out.as_deref(), cli.global.plot_data.as_deref()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(if report.failed { 2 } else { 0 })
}
