//! Command-line front end. Each subcommand is a plain function so tests can
//! drive the pipeline without spawning a process.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::{
    compare_affinity, graph_from_json, graph_to_json, model_affinity_all, trace_affinity, write_comparison_csv,
    write_histogram_csv, AffinityGraph, AffinityWeighting, Comparison, DEFAULT_WINDOW,
};
use crate::cfg::{ProfileData, StaticWeightPolicy};
use crate::interp::{self, Limits, Trace};
use crate::ir::{generate_random_program, parse_program, serialize_program, ClassDef, MethodId, Program};
use crate::markov::{build_model, model_from_json, model_to_json, MarkovChain, ModelOptions, SelfLoopPolicy, STOCHASTIC_TOLERANCE};
use crate::par::{self, Mode};
use crate::seed::sub_seed;
use crate::stats::{correlation_report, summaries, write_correlation_csv, write_pvalue_csv, write_summary_csv};
use crate::validate::{
    read_validation_csv, segment_all, validate_method, write_detail_csv, write_validation_csv, MatchOptions,
    MethodValidation, Segmentation, ValidationConfig, ValidationRow,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Fault(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Fault(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

fn input<E: std::fmt::Display>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Input(format!("{ctx}: {e}"))
}

/// Settings shared by every subcommand. All of them are echoed into the
/// header of each report so a run can be repeated exactly.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Root seed; every random stage derives its own sub-seed from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Call sites sampled per method during validation.
    #[arg(long, default_value_t = 100)]
    pub callsite_cap: usize,
    /// Probability shared by backward (loop-continuing) edges of blocks
    /// without profile counts. Must lie strictly between 0 and 1.
    #[arg(long, default_value_t = 0.9)]
    pub back_edge_probability: f64,
    /// Sliding window, in access events, for trace affinity (at least 2).
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Interpreter event cap; longer runs are truncated.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_events: usize,
    /// How a bypassed state's self-loop weight is redistributed: equal|proportional.
    #[arg(long, default_value_t = SelfLoopPolicy::Equal)]
    pub selfloop_policy: SelfLoopPolicy,
    /// Model affinity contribution of distance-1 and distance-2 paths: probability|uniform.
    #[arg(long, default_value_t = AffinityWeighting::Probability)]
    pub affinity_weighting: AffinityWeighting,
    /// Only accept a final state reached by the last matched access itself.
    #[arg(long)]
    pub strict_termination: bool,
    /// Methods with fewer evaluated calls are left out of correlations.
    #[arg(long, default_value_t = 0)]
    pub min_calls: usize,
    /// Run batch work on one thread.
    #[arg(long)]
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            callsite_cap: 100,
            back_edge_probability: 0.9,
            window: DEFAULT_WINDOW,
            max_events: 10_000_000,
            selfloop_policy: SelfLoopPolicy::Equal,
            affinity_weighting: AffinityWeighting::Probability,
            strict_termination: false,
            min_calls: 0,
            sequential: false,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), CliError> {
        StaticWeightPolicy::new(self.back_edge_probability).map_err(|e| CliError::Input(e.to_string()))?;
        if self.window < 2 {
            return Err(CliError::Input(format!("--window must be at least 2, got {}", self.window)));
        }
        if self.callsite_cap == 0 {
            return Err(CliError::Input("--callsite-cap must be positive".into()));
        }
        if self.max_events == 0 {
            return Err(CliError::Input("--max-events must be positive".into()));
        }
        Ok(())
    }

    /// One-line rendering used as a report header. Execution mode is left
    /// out because it never changes results.
    pub fn header(&self) -> String {
        format!(
            "seed={} callsite_cap={} back_edge_probability={} window={} max_events={} selfloop_policy={} \
             affinity_weighting={} strict_termination={} min_calls={}",
            self.seed,
            self.callsite_cap,
            self.back_edge_probability,
            self.window,
            self.max_events,
            self.selfloop_policy,
            self.affinity_weighting,
            self.strict_termination,
            self.min_calls
        )
    }

    pub fn mode(&self) -> Mode {
        if self.sequential {
            Mode::Sequential
        } else {
            Mode::Parallel
        }
    }

    fn model_options(&self) -> ModelOptions {
        ModelOptions {
            policy: StaticWeightPolicy { back_edge_probability: self.back_edge_probability },
            selfloop: self.selfloop_policy,
        }
    }

    fn limits(&self) -> Limits {
        Limits { max_events: self.max_events, ..Limits::default() }
    }

    fn validation(&self, seed: u64) -> ValidationConfig {
        ValidationConfig {
            seed,
            callsite_cap: self.callsite_cap,
            matching: MatchOptions { strict_termination: self.strict_termination, ..MatchOptions::default() },
            mode: self.mode(),
            ..ValidationConfig::default()
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oopredict", version, about = "Predict and validate object field-access patterns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build one compressed model per method, plus a manifest.
    Build {
        #[arg(long)]
        program: PathBuf,
        /// Edge counts: `method<TAB>src<TAB>dst<TAB>count` per line.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Output directory; receives `manifest.json` and `models/`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Execute a program and record its access trace.
    Run {
        #[arg(long)]
        program: PathBuf,
        /// Trace file to write.
        #[arg(long)]
        trace_out: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Replay a trace against the models of a build directory.
    Validate {
        /// Directory written by `build`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Per-method validation CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional report with raw counts per method.
        #[arg(long)]
        detail: Option<PathBuf>,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Write per-class affinity graphs from models or from a trace.
    Affinity {
        /// Supplies the class declarations.
        #[arg(long)]
        program: PathBuf,
        /// Build directory to derive model graphs from.
        #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
        models: Option<PathBuf>,
        /// Trace file to derive windowed graphs from.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Comma-separated class names; all classes when omitted.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<String>>,
        /// Output directory, one `<Class>.json` per graph.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Compare two directories of affinity graphs.
    Compare {
        #[arg(long)]
        model_graphs: PathBuf,
        #[arg(long)]
        trace_graphs: PathBuf,
        /// Output directory for the comparison and histogram CSVs.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Correlation table and metric summaries from a validation report.
    Report {
        #[arg(long)]
        validation: PathBuf,
        /// Row label in the correlation table.
        #[arg(long)]
        label: String,
        /// Output directory for the correlation and summary CSVs.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Generate a corpus and run the whole pipeline over it.
    Corpus {
        /// Number of programs to generate.
        #[arg(long)]
        n: usize,
        /// Output directory for the bundle.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build { program, profile, out, config } => cmd_build(&program, profile.as_deref(), &out, &config),
        Command::Run { program, trace_out, config } => cmd_run(&program, &trace_out, &config),
        Command::Validate { models, trace, out, detail, config } => {
            cmd_validate(&models, &trace, &out, detail.as_deref(), &config)
        }
        Command::Affinity { program, models, trace, classes, out, config } => {
            let source = match (models, trace) {
                (Some(m), None) => AffinitySource::Models(m),
                (None, Some(t)) => AffinitySource::Trace(t),
                _ => return Err(CliError::Input("give exactly one of --models and --trace".into())),
            };
            cmd_affinity(&program, &source, classes.as_deref(), &out, &config)
        }
        Command::Compare { model_graphs, trace_graphs, out, config } => {
            cmd_compare(&model_graphs, &trace_graphs, &out, &config).map(|_| ())
        }
        Command::Report { validation, label, out, config } => cmd_report(&validation, &label, &out, &config),
        Command::Corpus { n, out, config } => cmd_corpus(n, &out, &config).map(|_| ()),
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Input(format!("writing {}: {e}", path.display()));
    fs::create_dir_all(dir).map_err(fail)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        write(&mut w).map_err(fail)?;
        w.flush().map_err(fail)?;
    }
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(input(path.display()))
}

pub fn load_program(path: &Path) -> Result<Program, CliError> {
    parse_program(&read_text(path)?).map_err(input(path.display()))
}

pub fn method_size(program: &Program, id: &MethodId) -> usize {
    program.method(id).map_or(0, |m| m.instructions.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub method: String,
    pub file: String,
    pub num_accesses: usize,
    pub states: usize,
    pub method_size: usize,
    /// Empty states kept because they only loop on themselves.
    pub stuck: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: String,
    pub methods: Vec<ManifestEntry>,
}

/// Compressed models of every method, in program order.
pub fn build_models(
    program: &Program,
    profile: Option<&ProfileData>,
    config: &RunConfig,
) -> Result<Vec<(MarkovChain, ManifestEntry)>, CliError> {
    let opts = config.model_options();
    par::try_map(config.mode(), &program.methods, |m| {
        let c = build_model(program, m, profile, opts).map_err(|e| CliError::Input(e.to_string()))?;
        c.chain.check(STOCHASTIC_TOLERANCE).map_err(|e| CliError::Invariant(e.to_string()))?;
        let id = m.id().to_string();
        let entry = ManifestEntry {
            file: format!("models/{id}.json"),
            method: id,
            num_accesses: c.chain.num_accesses(),
            states: c.chain.states.len(),
            method_size: m.instructions.len(),
            stuck: c.stuck,
        };
        Ok((c.chain, entry))
    })
}

pub fn cmd_build(program: &Path, profile: Option<&Path>, out: &Path, config: &RunConfig) -> Result<(), CliError> {
    config.check()?;
    let prog = load_program(program)?;
    let profile = match profile {
        Some(p) => Some(ProfileData::parse(&read_text(p)?).map_err(input(p.display()))?),
        None => None,
    };
    let models = build_models(&prog, profile.as_ref(), config)?;
    for (chain, entry) in &models {
        write_text(&out.join(&entry.file), &model_to_json(chain))?;
    }
    let manifest = Manifest { config: config.header(), methods: models.into_iter().map(|(_, e)| e).collect() };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_text(&out.join("manifest.json"), &text)
}

fn execute(program: &Program, config: &RunConfig) -> Result<Trace, CliError> {
    let trace = interp::execute(program, config.limits()).map_err(|f| CliError::Fault(f.to_string()))?;
    if trace.truncated {
        log::warn!("trace truncated at {} events", trace.events.len());
    }
    Ok(trace)
}

pub fn cmd_run(program: &Path, trace_out: &Path, config: &RunConfig) -> Result<(), CliError> {
    config.check()?;
    let trace = execute(&load_program(program)?, config)?;
    write_atomic(trace_out, |w| interp::write_trace(&trace, w))
}

/// Models and manifest of a build directory.
pub fn load_models(dir: &Path) -> Result<(Manifest, Vec<MarkovChain>), CliError> {
    let mpath = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&read_text(&mpath)?).map_err(input(mpath.display()))?;
    let chains = manifest
        .methods
        .iter()
        .map(|e| {
            let path = dir.join(&e.file);
            let chain = model_from_json(&read_text(&path)?).map_err(input(path.display()))?;
            if chain.method.to_string() != e.method {
                return Err(CliError::Input(format!("{} holds the model of {}", path.display(), chain.method)));
            }
            Ok(chain)
        })
        .collect::<Result<_, _>>()?;
    Ok((manifest, chains))
}

fn load_trace(path: &Path) -> Result<Trace, CliError> {
    interp::read_trace_file(path).map_err(input(path.display()))
}

/// Validates every chain against `trace`; methods the trace never enters
/// get a row with zero evaluated calls.
pub fn validate_all(
    chains: &[MarkovChain],
    sizes: &[usize],
    trace: &Trace,
    seed: u64,
    config: &RunConfig,
) -> Result<Vec<MethodValidation>, CliError> {
    let mut segs = segment_all(trace).map_err(|e| CliError::Input(e.to_string()))?;
    let vcfg = config.validation(seed);
    let mut rows = Vec::with_capacity(chains.len());
    for (chain, &size) in chains.iter().zip(sizes) {
        let seg = segs
            .remove(&chain.method)
            .unwrap_or_else(|| Segmentation { method: chain.method.clone(), invocations: Vec::new(), discarded: 0 });
        let v = validate_method(chain, &seg, trace, size, &vcfg).map_err(|e| CliError::Invariant(e.to_string()))?;
        check_validation(&v)?;
        rows.push(v);
    }
    Ok(rows)
}

fn check_validation(v: &MethodValidation) -> Result<(), CliError> {
    let in_range = |r: Option<f64>| r.is_none_or(|x| (0.0..=1.0).contains(&x));
    if !v.conservation_ok {
        return Err(CliError::Invariant(format!("{}: matched + skipped differs from presented accesses", v.method)));
    }
    if !in_range(v.termination_rate) || !in_range(v.oo_match_rate) {
        return Err(CliError::Invariant(format!("{}: rate outside [0, 1]", v.method)));
    }
    Ok(())
}

pub fn cmd_validate(
    models: &Path,
    trace: &Path,
    out: &Path,
    detail: Option<&Path>,
    config: &RunConfig,
) -> Result<(), CliError> {
    config.check()?;
    let (manifest, chains) = load_models(models)?;
    let trace = load_trace(trace)?;
    let sizes: Vec<usize> = manifest.methods.iter().map(|e| e.method_size).collect();
    let results = validate_all(&chains, &sizes, &trace, config.seed, config)?;
    let header = config.header();
    let rows: Vec<ValidationRow> = results.iter().map(|v| v.row(None)).collect();
    write_atomic(out, |w| write_validation_csv(&rows, Some(&header), w).map_err(std::io::Error::other))?;
    if let Some(d) = detail {
        let named: Vec<(String, &MethodValidation)> = results.iter().map(|v| (v.method.to_string(), v)).collect();
        write_atomic(d, |w| write_detail_csv(&named, Some(&header), w).map_err(std::io::Error::other))?;
    }
    Ok(())
}

pub enum AffinitySource {
    Models(PathBuf),
    Trace(PathBuf),
}

/// Declared classes named in `wanted`, in program order. Unknown names are
/// reported and skipped.
fn select_classes(program: &Program, wanted: Option<&[String]>) -> Vec<ClassDef> {
    let Some(wanted) = wanted else { return program.classes.clone() };
    for w in wanted {
        if program.class(w).is_none() {
            log::warn!("class `{w}` is not declared by the program; skipped");
        }
    }
    program.classes.iter().filter(|c| wanted.contains(&c.name)).cloned().collect()
}

fn graph_file(class: &str) -> String {
    format!("{}.json", class.replace('/', "__"))
}

pub fn cmd_affinity(
    program: &Path,
    source: &AffinitySource,
    classes: Option<&[String]>,
    out: &Path,
    config: &RunConfig,
) -> Result<(), CliError> {
    config.check()?;
    let prog = load_program(program)?;
    let selected = select_classes(&prog, classes);
    if selected.is_empty() {
        log::warn!("no classes selected; nothing written");
        return Ok(());
    }
    let graphs = match source {
        AffinitySource::Models(dir) => {
            let (_, chains) = load_models(dir)?;
            let names: Vec<String> = selected.iter().map(|c| c.name.clone()).collect();
            model_affinity_all(&chains, &selected, &names, config.affinity_weighting, config.mode())
        }
        AffinitySource::Trace(path) => trace_affinity(&load_trace(path)?, &selected, config.window),
    }
    .map_err(|e| CliError::Input(e.to_string()))?;
    for (class, g) in &graphs {
        write_text(&out.join(graph_file(class)), &graph_to_json(g))?;
    }
    Ok(())
}

fn load_graphs(dir: &Path) -> Result<BTreeMap<String, AffinityGraph>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(input(dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for p in paths {
        let g = graph_from_json(&read_text(&p)?).map_err(input(p.display()))?;
        if out.insert(g.class_name.clone(), g).is_some() {
            return Err(CliError::Input(format!("{}: class graph given twice", p.display())));
        }
    }
    Ok(out)
}

fn write_comparison(out: &Path, cmp: &Comparison, header: &str) -> Result<(), CliError> {
    write_atomic(&out.join("comparison.csv"), |w| write_comparison_csv(&cmp.rows, Some(header), w))?;
    write_atomic(&out.join("cosine_histogram.csv"), |w| write_histogram_csv(&cmp.cosine_histogram, Some(header), w))?;
    write_atomic(&out.join("spearman_histogram.csv"), |w| {
        write_histogram_csv(&cmp.spearman_histogram, Some(header), w)
    })?;
    write_text(&out.join("uncompared.txt"), &cmp.uncompared.iter().map(|c| format!("{c}\n")).collect::<String>())
}

pub fn cmd_compare(model_graphs: &Path, trace_graphs: &Path, out: &Path, config: &RunConfig) -> Result<Comparison, CliError> {
    config.check()?;
    let cmp = compare_affinity(&load_graphs(model_graphs)?, &load_graphs(trace_graphs)?)
        .map_err(|e| CliError::Input(e.to_string()))?;
    write_comparison(out, &cmp, &config.header())?;
    Ok(cmp)
}

fn write_report(rows: &[ValidationRow], label: &str, out: &Path, config: &RunConfig) -> Result<(), CliError> {
    let header = config.header();
    let report = correlation_report(rows, label, config.min_calls);
    if report.excluded > 0 {
        log::info!("{} of {} methods excluded from correlations", report.excluded, rows.len());
    }
    let reports = [report];
    write_atomic(&out.join("correlation.csv"), |w| write_correlation_csv(&reports, Some(&header), w))?;
    write_atomic(&out.join("correlation_pvalues.csv"), |w| write_pvalue_csv(&reports, Some(&header), w))?;
    let summary = summaries(rows, config.min_calls);
    write_atomic(&out.join("summary.csv"), |w| write_summary_csv(&summary, Some(&header), w))
}

pub fn cmd_report(validation: &Path, label: &str, out: &Path, config: &RunConfig) -> Result<(), CliError> {
    config.check()?;
    let file = fs::File::open(validation).map_err(input(validation.display()))?;
    let rows = read_validation_csv(file).map_err(input(validation.display()))?;
    write_report(&rows, label, out, config)
}

/// Everything one corpus program contributes to the bundle.
#[derive(Debug, Clone)]
pub struct ProgramResult {
    pub name: String,
    pub program: Program,
    pub validations: Vec<MethodValidation>,
    pub model_graphs: BTreeMap<String, AffinityGraph>,
    pub trace_graphs: BTreeMap<String, AffinityGraph>,
}

#[derive(Debug, Clone)]
pub struct CorpusOutcome {
    pub programs: Vec<ProgramResult>,
    pub comparison: Comparison,
}

impl CorpusOutcome {
    /// `(row name, validation)` for every method in corpus order.
    pub fn named_validations(&self) -> Vec<(String, &MethodValidation)> {
        self.programs
            .iter()
            .flat_map(|p| p.validations.iter().map(move |v| (format!("{}:{}", p.name, v.method), v)))
            .collect()
    }
}

/// Size hints cycle through small-to-medium programs.
const CORPUS_SIZES: [usize; 6] = [2, 3, 4, 6, 8, 10];

pub fn corpus_program(seed: u64, i: usize) -> Program {
    let s = sub_seed(seed, "corpus", &i.to_string());
    generate_random_program(s, CORPUS_SIZES[i % CORPUS_SIZES.len()])
}

fn run_program(i: usize, config: &RunConfig) -> Result<ProgramResult, CliError> {
    let name = format!("p{i:03}");
    let program = corpus_program(config.seed, i);
    let mut cfg = config.clone();
    // batch work is already spread across programs
    cfg.sequential = true;
    let models = build_models(&program, None, &cfg)?;
    let chains: Vec<MarkovChain> = models.iter().map(|(c, _)| c.clone()).collect();
    let sizes: Vec<usize> = models.iter().map(|(_, e)| e.method_size).collect();
    let trace = execute(&program, &cfg)?;
    let validations = validate_all(&chains, &sizes, &trace, sub_seed(config.seed, "validate", &name), &cfg)?;

    let names: Vec<String> = program.classes.iter().map(|c| c.name.clone()).collect();
    let to_invariant = |e: crate::affinity::AffinityError| CliError::Invariant(e.to_string());
    let prefix = |m: BTreeMap<String, AffinityGraph>| -> BTreeMap<String, AffinityGraph> {
        m.into_iter()
            .map(|(k, mut g)| {
                g.class_name = format!("{name}/{k}");
                (g.class_name.clone(), g)
            })
            .collect()
    };
    let model_graphs =
        prefix(model_affinity_all(&chains, &program.classes, &names, cfg.affinity_weighting, Mode::Sequential).map_err(to_invariant)?);
    let trace_graphs = prefix(trace_affinity(&trace, &program.classes, cfg.window).map_err(to_invariant)?);
    Ok(ProgramResult { name, program, validations, model_graphs, trace_graphs })
}

/// Generates `n` programs and runs build, execution, validation, reporting
/// and affinity comparison over all of them.
pub fn run_corpus(n: usize, config: &RunConfig) -> Result<CorpusOutcome, CliError> {
    config.check()?;
    if n == 0 {
        return Err(CliError::Input("--n must be at least 1".into()));
    }
    let programs: Vec<ProgramResult> =
        par::map_range(config.mode(), n, |i| run_program(i, config)).into_iter().collect::<Result<_, _>>()?;
    let mut model = BTreeMap::new();
    let mut trace = BTreeMap::new();
    for p in &programs {
        model.extend(p.model_graphs.clone());
        trace.extend(p.trace_graphs.clone());
    }
    let comparison = compare_affinity(&model, &trace).map_err(|e| CliError::Invariant(e.to_string()))?;
    Ok(CorpusOutcome { programs, comparison })
}

pub fn cmd_corpus(n: usize, out: &Path, config: &RunConfig) -> Result<CorpusOutcome, CliError> {
    let outcome = run_corpus(n, config)?;
    let header = config.header();
    for p in &outcome.programs {
        write_text(&out.join("programs").join(format!("{}.mir", p.name)), &serialize_program(&p.program))?;
    }
    let named = outcome.named_validations();
    let rows: Vec<ValidationRow> = named.iter().map(|(n, v)| v.row(Some(n))).collect();
    write_atomic(&out.join("validation.csv"), |w| {
        write_validation_csv(&rows, Some(&header), w).map_err(std::io::Error::other)
    })?;
    write_atomic(&out.join("validation_detail.csv"), |w| {
        write_detail_csv(&named, Some(&header), w).map_err(std::io::Error::other)
    })?;
    write_report(&rows, "corpus", out, config)?;
    write_comparison(out, &outcome.comparison, &header)?;
    Ok(outcome)
}
