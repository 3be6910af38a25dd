use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gsegraph::ensemble::{compare_report, cross_sector_ratio, run_graph_ensemble, run_rmt_ensemble, Ensemble, Entry, GraphEnsembleConfig, Thresholds, PORT_NAMES};
use gsegraph::graph::{build_gse_graph, defaults, GraphConfig, GraphTopology, Sector};
use gsegraph::rmt::{estimate_transmission, RmtModel, VStructure};
use gsegraph::scattering::{local_minima, phase_sweep, predicted_minima};
use gsegraph::spectrum::{first_eigenwavenumbers, kramers_fold, pair_doublets, SpectrumRecord};
use gsegraph::stats::{statistics_report, unfold, Reference, StatisticsConfig};

const PAIRING_TOLERANCE: f64 = 1e-8;
const UNITARITY_TOLERANCE: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "gsegraph", version, about = "Spectra and scattering of symplectic quantum graphs and Heidelberg ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Graph document (spectrum, scatter, sweep, stats) or RMT model (rmt).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Length seed of the built-in graph, model seed for rmt, window seed for stats.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Absorption, k -> k + i eps (scatter, sweep).
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Absorption strength of the fictitious channels (rmt).
    #[arg(long, global = true)]
    tau_abs: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenwavenumbers of the closed graph.
    Spectrum {
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 1e-3)]
        k_min: f64,
        /// Keep one root per Kramers doublet.
        #[arg(long)]
        fold: bool,
    },
    /// Scattering-matrix ensemble of the open graph.
    Scatter {
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        k_min: Option<f64>,
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long)]
        k_points: Option<usize>,
    },
    /// Heidelberg-approach GSE scattering ensemble.
    Rmt {
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        energies: Option<usize>,
        #[arg(long, value_enum)]
        v_structure: Option<VKind>,
    },
    /// Spacing distribution, number variance and rigidity of a spectrum.
    Stats {
        /// Spectrum CSV written by `spectrum`; computed from the graph if absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Fold Kramers doublets before unfolding.
        #[arg(long)]
        fold: bool,
        /// Reference ensemble the spacings must match.
        #[arg(long, value_enum)]
        expect: Option<RefKind>,
        #[arg(long, default_value_t = 0.05)]
        ks_max: f64,
    },
    /// |S_{1bar 1}| while one coupling bond of the graph without the pi phase is lengthened.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = vec![100.0, 150.0, 200.0])]
        k: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        max_increment: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// KS distances and variance ratios of two sample files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        ks_max: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VKind {
    Full,
    Sparse,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefKind {
    Poisson,
    Goe,
    Gue,
    Gse,
}

impl From<RefKind> for Reference {
    fn from(r: RefKind) -> Self {
        match r {
            RefKind::Poisson => Reference::Poisson,
            RefKind::Goe => Reference::Goe,
            RefKind::Gue => Reference::Gue,
            RefKind::Gse => Reference::Gse,
        }
    }
}

struct Check {
    name: String,
    value: f64,
    threshold: f64,
    pass: bool,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value < threshold }
    }

    fn json(&self) -> Value {
        json!({ "name": self.name, "value": self.value, "threshold": self.threshold, "pass": self.pass })
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn text(&self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))
    }

    fn writer(&self, name: &str) -> Result<BufWriter<fs::File>> {
        let path = self.dir.join(name);
        Ok(BufWriter::new(fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?))
    }

    /// Writes `report.json` with the checks appended; returns the overall verdict.
    fn report(&self, mut body: Value, checks: &[Check]) -> Result<bool> {
        let pass = checks.iter().all(|c| c.pass);
        body["checks"] = Value::Array(checks.iter().map(Check::json).collect());
        body["pass"] = json!(pass);
        self.text("report.json", &serde_json::to_string_pretty(&body)?)?;
        Ok(pass)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Graph document from `--config`, else the built-in graph with lengths from `--seed`.
fn graph_config(cli: &Cli) -> Result<GraphConfig> {
    match &cli.config {
        Some(path) => Ok(GraphConfig::from_json(&read(path)?)?),
        None => {
            let seed = cli.seed.unwrap_or(defaults::DEFAULT_LENGTH_SEED);
            Ok(GraphConfig::from_doubling_spec(&defaults::doubling_spec_with_seed(seed)))
        }
    }
}

fn has_kramers_symmetry(cfg: &GraphConfig) -> bool {
    cfg.doubling.as_ref().is_some_and(|d| d.gse_condition)
}

fn spectrum_of(topology: &GraphTopology, count: usize, k_min: f64) -> Result<SpectrumRecord> {
    Ok(first_eigenwavenumbers(topology, count, k_min)?)
}

fn cmd_spectrum(cli: &Cli, out: &Output, count: usize, k_min: f64, fold: bool) -> Result<bool> {
    let cfg = graph_config(cli)?;
    let topology = cfg.topology()?;
    out.text("config.json", &cfg.to_json_pretty())?;
    let raw = spectrum_of(&topology, count, k_min)?;
    let pairing = pair_doublets(&raw.eigenwavenumbers, PAIRING_TOLERANCE);
    let unpaired = pairing.unpaired_fraction(raw.len());
    let record = if fold { kramers_fold(&raw, PAIRING_TOLERANCE)? } else { raw.clone() };
    record.write_csv(out.writer("samples.csv")?, cli.seed)?;

    let spacing = std::f64::consts::PI / topology.total_length();
    let weyl = raw
        .eigenwavenumbers
        .iter()
        .enumerate()
        .map(|(i, &k)| ((i + 1) as f64 - k / spacing).abs())
        .fold(0.0, f64::max);
    let mut checks = Vec::new();
    if has_kramers_symmetry(&cfg) {
        checks.push(Check::below("unpaired_fraction", unpaired, f64::MIN_POSITIVE));
    }
    out.report(
        json!({
            "command": "spectrum",
            "topology_digest": raw.topology_digest,
            "roots": raw.len(),
            "k_min": k_min,
            "k_max": raw.eigenwavenumbers.last(),
            "total_length": topology.total_length(),
            "unpaired_fraction": unpaired,
            "weyl_max_deviation": weyl,
            "folded": fold,
        }),
        &checks,
    )
}

fn cmd_stats(cli: &Cli, out: &Output, input: Option<&Path>, count: usize, fold: bool, expect: Option<RefKind>, ks_max: f64) -> Result<bool> {
    let cfg = graph_config(cli)?;
    let topology = cfg.topology()?;
    let record = match input {
        Some(path) => SpectrumRecord::read_csv(&read(path)?)?,
        None => spectrum_of(&topology, count, 1e-3)?,
    };
    let record = if fold && record.fold == gsegraph::spectrum::FoldPolicy::Raw {
        kramers_fold(&record, PAIRING_TOLERANCE)?
    } else {
        record
    };
    let stats_cfg = StatisticsConfig { seed: cli.seed.unwrap_or(0), ..Default::default() };
    out.text(
        "config.json",
        &serde_json::to_string_pretty(&json!({ "graph": cfg, "statistics": stats_cfg, "input": input }))?,
    )?;
    let report = statistics_report(&unfold(&record, topology.total_length())?, &stats_cfg)?;
    report.write_spacing_csv(out.writer("spacing.csv")?)?;
    report.write_long_range_csv(out.writer("long_range.csv")?)?;
    let checks: Vec<Check> = expect
        .map(|r| {
            let r = Reference::from(r);
            Check::below(&format!("ks_{}", r.name()), report.ks(r), ks_max)
        })
        .into_iter()
        .collect();
    out.report(serde_json::to_value(&report)?, &checks)
}

/// Largest unitarity defect and largest singular value over an ensemble.
fn unitarity_summary(e: &Ensemble) -> (f64, f64) {
    e.samples.iter().fold((0.0, 0.0), |(d, s), x| {
        let sv = x.sample.singular_values().into_iter().fold(0.0, f64::max);
        (f64::max(d, x.sample.unitarity_defect()), f64::max(s, sv))
    })
}

fn ensemble_summary(e: &Ensemble) -> Result<Value> {
    let (defect, max_sv) = unitarity_summary(e);
    let (ratio, ks) = cross_sector_ratio(e)?;
    let n = e.samples[0].sample.s.nrows();
    let ports: Vec<Value> = (0..n.min(PORT_NAMES.len()))
        .map(|p| {
            let s = e.elements(&Entry::new(p, p));
            let mean_abs = s.iter().map(|z| z.norm()).sum::<f64>() / s.len() as f64;
            Ok(json!({
                "port": PORT_NAMES[p],
                "mean_abs_reflection": mean_abs,
                "transmission": estimate_transmission(&s).ok(),
            }))
        })
        .collect::<Result<_>>()?;
    Ok(json!({
        "samples": e.len(),
        "max_unitarity_defect": defect,
        "max_singular_value": max_sv,
        "cross_sector_variance_ratio": ratio,
        "cross_sector_ks": ks,
        "ports": ports,
    }))
}

fn unitarity_check(e: &Ensemble, lossless: bool) -> Check {
    let (defect, max_sv) = unitarity_summary(e);
    if lossless {
        Check::below("max_unitarity_defect", defect, UNITARITY_TOLERANCE)
    } else {
        Check::below("max_singular_value", max_sv, 1.0)
    }
}

fn cmd_scatter(cli: &Cli, out: &Output, realizations: Option<usize>, k_min: Option<f64>, k_max: Option<f64>, k_points: Option<usize>) -> Result<bool> {
    let cfg = graph_config(cli)?;
    let topology = cfg.topology()?;
    let d = GraphEnsembleConfig::default();
    let ens_cfg = GraphEnsembleConfig {
        k_min: k_min.unwrap_or(d.k_min),
        k_max: k_max.unwrap_or(d.k_max),
        k_points: k_points.unwrap_or(d.k_points),
        realizations: realizations.unwrap_or(d.realizations),
        eps: cli.eps.unwrap_or(d.eps),
        ..d
    };
    ens_cfg.validate()?;
    out.text("config.json", &serde_json::to_string_pretty(&json!({ "graph": cfg, "ensemble": ens_cfg }))?)?;
    let e = run_graph_ensemble(&topology, &ens_cfg)?;
    e.write_csv(out.writer("samples.csv")?)?;
    let mut body = ensemble_summary(&e)?;
    body["command"] = json!("scatter");
    body["topology_digest"] = json!(topology.digest());
    out.report(body, &[unitarity_check(&e, ens_cfg.eps == 0.0)])
}

fn cmd_rmt(cli: &Cli, out: &Output, realizations: Option<usize>, energies: Option<usize>, v: Option<VKind>) -> Result<bool> {
    let mut model = match &cli.config {
        Some(path) => RmtModel::from_json(&read(path)?)?,
        None => RmtModel::default(),
    };
    if let Some(s) = cli.seed {
        model.seed = s;
    }
    if let Some(t) = cli.tau_abs {
        model.tau_abs = t;
    }
    if let Some(r) = realizations {
        model.ensemble_size = r;
    }
    if let Some(n) = energies {
        model.energies = n;
    }
    match v {
        Some(VKind::Full) => model.v_structure = VStructure::Full,
        Some(VKind::Sparse) if !matches!(model.v_structure, VStructure::Sparse { .. }) => {
            model.v_structure = RmtModel::default().v_structure
        }
        _ => {}
    }
    model.validate()?;
    out.text("config.json", &model.to_json_pretty())?;
    let e = run_rmt_ensemble(&model)?;
    e.write_csv(out.writer("samples.csv")?)?;
    let mut body = ensemble_summary(&e)?;
    body["command"] = json!("rmt");
    let lossless = model.lambda == 0 || model.tau_abs == 0.0;
    out.report(body, &[unitarity_check(&e, lossless)])
}

fn cmd_sweep(cli: &Cli, out: &Output, ks: &[f64], max_increment: f64, steps: usize) -> Result<bool> {
    let cfg = graph_config(cli)?;
    let Some(mut spec) = cfg.doubling_spec()? else {
        bail!("sweep needs a graph document with a doubling section");
    };
    let Some(pair) = spec.coupling_pairs.first().cloned() else {
        bail!("sweep needs at least one coupling pair");
    };
    if steps < 3 || !(max_increment > 0.0) {
        bail!("sweep needs steps >= 3 and a positive max increment");
    }
    spec.gse_condition = false;
    let base = build_gse_graph(&spec)?;
    let target = (gsegraph::graph::VertexId::up(pair.up), gsegraph::graph::VertexId::down(pair.down));
    let port_of = |sector: Sector| {
        base.leads()
            .iter()
            .position(|l| l.vertex.index == pair.up && l.vertex.sector == sector)
            .or_else(|| base.leads().iter().position(|l| l.vertex.sector == sector))
    };
    let (Some(port_in), Some(port_out)) = (port_of(Sector::Up), port_of(Sector::Down)) else {
        bail!("sweep needs a lead in each sector");
    };
    let eps = cli.eps.unwrap_or(0.0);
    let increments: Vec<f64> = (0..steps).map(|i| max_increment * i as f64 / (steps - 1) as f64).collect();
    let sweep = phase_sweep(&base, target, &increments, ks, port_out, port_in, eps)?;
    out.text(
        "config.json",
        &serde_json::to_string_pretty(&json!({
            "graph": cfg,
            "k": ks,
            "max_increment": max_increment,
            "steps": steps,
            "eps": eps,
        }))?,
    )?;
    sweep.write_csv(out.writer("samples.csv")?)?;

    let step = max_increment / (steps - 1) as f64;
    let mut worst = 0.0f64;
    let columns: Vec<Value> = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let found: Vec<f64> = local_minima(&sweep.column(j)).into_iter().map(|i| increments[i]).collect();
            let predicted = predicted_minima(k, 0.0, max_increment - step);
            for p in &predicted {
                let miss = found.iter().map(|f| (f - p).abs()).fold(f64::INFINITY, f64::min) / step;
                worst = worst.max(miss);
            }
            json!({ "k": k, "predicted_minima_m": predicted, "found_minima_m": found })
        })
        .collect();
    let mut meta: Value = serde_json::from_str(&sweep.sidecar_json())?;
    meta["command"] = json!("sweep");
    meta["columns"] = Value::Array(columns);
    out.report(meta, &[Check::below("max_minimum_offset_steps", worst, 1.5)])
}

fn load_samples(path: &Path) -> Result<Ensemble> {
    let f = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ensemble::read_csv(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_compare(out: &Output, a: &Path, b: &Path, ks_max: f64) -> Result<bool> {
    let thresholds = Thresholds { ks_max };
    out.text(
        "config.json",
        &serde_json::to_string_pretty(&json!({ "a": a, "b": b, "thresholds": thresholds }))?,
    )?;
    let report = compare_report(&load_samples(a)?, &load_samples(b)?, &Entry::standard(), &thresholds)?;
    out.text("report.json", &report.to_json_pretty())?;
    Ok(report.pass)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = Output::new(&cli.out)?;
    match &cli.command {
        Command::Spectrum { count, k_min, fold } => cmd_spectrum(cli, &out, *count, *k_min, *fold),
        Command::Scatter { realizations, k_min, k_max, k_points } => {
            cmd_scatter(cli, &out, *realizations, *k_min, *k_max, *k_points)
        }
        Command::Rmt { realizations, energies, v_structure } => cmd_rmt(cli, &out, *realizations, *energies, *v_structure),
        Command::Stats { input, count, fold, expect, ks_max } => {
            cmd_stats(cli, &out, input.as_deref(), *count, *fold, *expect, *ks_max)
        }
        Command::Sweep { k, max_increment, steps } => cmd_sweep(cli, &out, k, *max_increment, *steps),
        Command::Compare { a, b, ks_max } => cmd_compare(&out, a, b, *ks_max),
    }
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
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            let _ = writeln!(std::io::stderr(), "threshold check failed, see {}", cli.out.join("report.json").display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
