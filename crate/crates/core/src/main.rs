use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use matchcert::bounds::{BoundMethod, DeltaBudget};
use matchcert::graph::{MatchRole, MatchSet, Network, NetworkPair, NodeIdx};
use matchcert::harness::{run_coverage, CoverageTable, ExperimentConfig};
use matchcert::matchers::{run_batch, MatcherConfig, MatcherHandle, QueryMatcher, QuerySource};
use matchcert::sampling::{split_train_validation, SplitSpec};
use matchcert::synth::{generate_pair, GeneratorConfig};
use matchcert::validation::batch::{
    complete_batch_precision, complete_batch_recall, holdout_batch_precision, holdout_batch_recall,
    BatchValidationInput, MatchTotal,
};
use matchcert::validation::query::{CompleteSource, QueryEvidence, QueryValidationInput};
use matchcert::validation::ValidationReport;

/// Certified precision, recall and error-rate bounds for network matchers.
#[derive(Parser)]
#[command(name = "matchcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a correlated network pair with ground truth.
    Gen(GenArgs),
    /// Run a batch matcher and write its identified matches.
    Match(MatchArgs),
    /// Split a labeled sample into training and validation samples.
    Split(SplitArgs),
    /// Compute a validation bound.
    #[command(subcommand)]
    Validate(ValidateCommand),
    /// Run a Monte Carlo coverage experiment.
    Coverage(CoverageArgs),
    /// Summarize a report or coverage JSON file.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum ValidateCommand {
    Batch(BatchArgs),
    Query(QueryArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for x.tsv, y.tsv and truth.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PairArgs {
    /// Edge file of the x network.
    #[arg(long)]
    x: PathBuf,
    /// Edge file of the y network; omit with --self-match.
    #[arg(long)]
    y: Option<PathBuf>,
    /// Match the x network against itself; identity pairs are illegal.
    #[arg(long)]
    self_match: bool,
}

impl PairArgs {
    fn load(&self) -> Result<NetworkPair> {
        let x = Network::load(&self.x).with_context(|| format!("reading {}", self.x.display()))?;
        match (&self.y, self.self_match) {
            (None, true) => Ok(NetworkPair::self_match(x)),
            (Some(y), false) => {
                let y = Network::load(y).with_context(|| format!("reading {}", y.display()))?;
                Ok(NetworkPair::new(x, y))
            }
            (Some(_), true) => bail!("--y cannot be combined with --self-match"),
            (None, false) => bail!("--y is required unless --self-match is given"),
        }
    }
}

#[derive(Args)]
struct MatchArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Matcher configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Verified training pairs (x<TAB>y).
    #[arg(long)]
    training: Option<PathBuf>,
    /// Validation pairs to add to the seeds, making the matcher complete.
    #[arg(long)]
    extra_seeds: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Labeled sample, one item per line.
    #[arg(long)]
    labeled: PathBuf,
    /// Size of the population the labeled sample came from.
    #[arg(long)]
    population_n: u64,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    validation_out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantityArg {
    Precision,
    Recall,
    ErrorRate,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Holdout,
    Complete,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_enum)]
    quantity: QuantityArg,
    #[arg(long, value_enum, default_value = "holdout")]
    variant: VariantArg,
    #[arg(long, default_value = "hypergeometric-exact")]
    method: BoundMethod,
    /// Failure probability per term, comma separated. Defaults to 0.05
    /// split equally over the terms.
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BoundArgs {
    fn budget(&self, parts: usize) -> Result<DeltaBudget> {
        Ok(if self.delta.is_empty() {
            DeltaBudget::equal(0.05, parts)?
        } else {
            DeltaBudget::new(self.delta.clone())?
        })
    }
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Identified matches of the holdout matcher.
    #[arg(long)]
    holdout: PathBuf,
    /// Identified matches of the complete matcher.
    #[arg(long)]
    complete: Option<PathBuf>,
    /// Sampled actual matches (x<TAB>y).
    #[arg(long)]
    s_m: PathBuf,
    /// Sampled x nodes, one per line.
    #[arg(long)]
    s_x: PathBuf,
    /// Actual matches of (at least) the sampled x nodes.
    #[arg(long)]
    actual: PathBuf,
    #[arg(long, default_value_t = 1)]
    k_y: usize,
    /// Exact number of actual matches.
    #[arg(long, conflicts_with = "match_total_upper")]
    match_total: Option<u64>,
    /// Upper bound on the number of actual matches.
    #[arg(long)]
    match_total_upper: Option<u64>,
    #[command(flatten)]
    bound: BoundArgs,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Precomputed answers of the holdout matcher.
    #[arg(long, required_unless_present = "holdout_matcher")]
    holdout: Option<PathBuf>,
    /// Holdout matcher configuration, queried on demand.
    #[arg(long, conflicts_with = "holdout")]
    holdout_matcher: Option<PathBuf>,
    /// Training pairs for the holdout matcher.
    #[arg(long)]
    training: Option<PathBuf>,
    /// Precomputed answers of the complete matcher.
    #[arg(long)]
    complete: Option<PathBuf>,
    /// Complete matcher configuration, queried on demand.
    #[arg(long, conflicts_with = "complete")]
    complete_matcher: Option<PathBuf>,
    /// Extra seed pairs of the complete matcher.
    #[arg(long)]
    complete_seeds: Option<PathBuf>,
    /// Sampled x nodes with known actual matches.
    #[arg(long)]
    s_x: PathBuf,
    /// Independent node sample; actual matches not needed.
    #[arg(long)]
    s_x_prime: Option<PathBuf>,
    #[arg(long)]
    actual: PathBuf,
    #[arg(long, default_value_t = 1)]
    k_cap: usize,
    /// Write per-node statistics (JSON) here.
    #[arg(long)]
    emit_node_stats: Option<PathBuf>,
    #[command(flatten)]
    bound: BoundArgs,
}

#[derive(Args)]
struct CoverageArgs {
    /// Experiment configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Total failure probability per check.
    #[arg(long)]
    delta: Option<f64>,
    /// Restrict to these methods (comma separated).
    #[arg(long, value_delimiter = ',')]
    method: Vec<BoundMethod>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
}

enum Status {
    Ok,
    Vacuous,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_pairs(path: &Path, pair: &NetworkPair, role: MatchRole) -> Result<MatchSet> {
    MatchSet::load(path, pair, role, None).with_context(|| format!("reading {}", path.display()))
}

fn load_names(path: &Path, pair: &NetworkPair) -> Result<Vec<(String, String)>> {
    Ok(load_pairs(path, pair, MatchRole::Actual)?.to_names(pair))
}

fn load_nodes(path: &Path, net: &Network) -> Result<Vec<NodeIdx>> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let name = line.trim();
        if name.is_empty() || name.starts_with('#') {
            continue;
        }
        out.push(
            net.require(name)
                .with_context(|| format!("{}:{}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn emit_reports(reports: &[ValidationReport], out: Option<&Path>) -> Result<Status> {
    let value = if reports.len() == 1 {
        reports[0].to_json()?
    } else {
        serde_json::Value::Array(reports.iter().map(|r| r.to_json()).collect::<Result<_, _>>()?)
    };
    let text = serde_json::to_string_pretty(&value)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(if reports.iter().any(ValidationReport::is_vacuous) {
        Status::Vacuous
    } else {
        Status::Ok
    })
}

fn cmd_gen(args: &GenArgs) -> Result<Status> {
    let mut cfg: GeneratorConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    let (pair, truth) = generate_pair(&cfg)?;
    fs::create_dir_all(&args.out)?;
    pair.x().save(args.out.join("x.tsv"))?;
    pair.y().save(args.out.join("y.tsv"))?;
    truth.save(args.out.join("truth.tsv"), &pair, false)?;
    Ok(Status::Ok)
}

fn cmd_match(args: &MatchArgs) -> Result<Status> {
    let pair = args.pair.load()?;
    let cfg: MatcherConfig = read_json(&args.config)?;
    let training = match &args.training {
        Some(p) => load_names(p, &pair)?,
        None => Vec::new(),
    };
    let handle = match &args.extra_seeds {
        Some(p) => MatcherHandle::complete(cfg, training, load_names(p, &pair)?, Vec::new())?,
        None => MatcherHandle::holdout(cfg, training)?,
    };
    run_batch(&handle, &pair)?.write(create(&args.out)?, &pair, true)?;
    Ok(Status::Ok)
}

fn cmd_split(args: &SplitArgs) -> Result<Status> {
    let text = fs::read_to_string(&args.labeled).with_context(|| format!("reading {}", args.labeled.display()))?;
    let labeled: Vec<String> = text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect();
    let spec = SplitSpec {
        population_n: args.population_n,
        labeled,
        t: args.t,
        s: args.s,
        rng_seed: args.seed,
    };
    let (train, validation) = split_train_validation(&spec)?;
    for (path, items) in [(&args.train_out, train), (&args.validation_out, validation)] {
        let mut w = create(path)?;
        for item in items {
            writeln!(w, "{item}")?;
        }
        w.flush()?;
    }
    Ok(Status::Ok)
}

fn cmd_validate_batch(args: &BatchArgs) -> Result<Status> {
    let pair = args.pair.load()?;
    let holdout = load_pairs(&args.holdout, &pair, MatchRole::IdentifiedHoldout)?;
    let complete = args
        .complete
        .as_deref()
        .map(|p| load_pairs(p, &pair, MatchRole::Identified))
        .transpose()?;
    let s_m: Vec<_> = load_pairs(&args.s_m, &pair, MatchRole::Actual)?.iter().collect();
    let actual = MatchSet::load(&args.actual, &pair, MatchRole::Actual, Some(args.k_y))
        .with_context(|| format!("reading {}", args.actual.display()))?;
    let s_x: Vec<(NodeIdx, usize)> = load_nodes(&args.s_x, pair.x())?
        .into_iter()
        .map(|x| (x, actual.count(x)))
        .collect();
    let b = &args.bound;
    let parts = match (b.quantity, b.variant) {
        (QuantityArg::Recall, VariantArg::Holdout) => 1,
        (QuantityArg::ErrorRate, _) => bail!("error rate is a query bound; use `validate query`"),
        _ => 2,
    };
    let mut input = BatchValidationInput::new(&pair, &holdout, &s_m, &s_x, args.k_y, b.method, b.budget(parts)?);
    if let Some(c) = &complete {
        input = input.with_complete(c);
    }
    if let Some(n) = args.match_total {
        input = input.with_match_total(MatchTotal::Known(n));
    } else if let Some(n) = args.match_total_upper {
        input = input.with_match_total(MatchTotal::UpperBound(n));
    }
    let report = match (b.quantity, b.variant) {
        (QuantityArg::Recall, VariantArg::Holdout) => holdout_batch_recall(&input)?,
        (QuantityArg::Precision, VariantArg::Holdout) => holdout_batch_precision(&input)?,
        (QuantityArg::Recall, VariantArg::Complete) => complete_batch_recall(&input)?,
        (QuantityArg::Precision, VariantArg::Complete) => complete_batch_precision(&input)?,
        (QuantityArg::ErrorRate, _) => unreachable!(),
    };
    emit_reports(&[report], b.out.as_deref())
}

enum Source<'a> {
    Answers(MatchSet),
    Live(QueryMatcher<'a>),
}

impl Source<'_> {
    fn as_dyn(&self) -> &dyn QuerySource {
        match self {
            Source::Answers(ms) => ms,
            Source::Live(q) => q,
        }
    }
}

fn cmd_validate_query(args: &QueryArgs) -> Result<Status> {
    let pair = args.pair.load()?;
    let training = match &args.training {
        Some(p) => load_names(p, &pair)?,
        None => Vec::new(),
    };
    let holdout_handle = match &args.holdout_matcher {
        Some(p) => Some(MatcherHandle::holdout(read_json(p)?, training.clone())?),
        None => None,
    };
    let complete_handle = match &args.complete_matcher {
        Some(p) => {
            let extra = match &args.complete_seeds {
                Some(s) => load_names(s, &pair)?,
                None => Vec::new(),
            };
            Some(MatcherHandle::complete(read_json(p)?, training, extra, Vec::new())?)
        }
        None => None,
    };
    let holdout = match (&args.holdout, &holdout_handle) {
        (Some(p), _) => Source::Answers(load_pairs(p, &pair, MatchRole::IdentifiedHoldout)?),
        (None, Some(h)) => Source::Live(QueryMatcher::new(h, &pair)),
        (None, None) => bail!("--holdout or --holdout-matcher is required"),
    };
    let complete = match (&args.complete, &complete_handle) {
        (Some(p), _) => Some(Source::Answers(load_pairs(p, &pair, MatchRole::Identified)?)),
        (None, Some(h)) => Some(Source::Live(QueryMatcher::new(h, &pair))),
        (None, None) => None,
    };
    let actual = MatchSet::load(&args.actual, &pair, MatchRole::Actual, None)
        .with_context(|| format!("reading {}", args.actual.display()))?;
    let s_x = load_nodes(&args.s_x, pair.x())?;
    let s_x_prime = match &args.s_x_prime {
        Some(p) => load_nodes(p, pair.x())?,
        None => Vec::new(),
    };
    let b = &args.bound;
    let input = QueryValidationInput::new(
        pair.x().len() as u64,
        holdout.as_dyn(),
        match &complete {
            Some(c) => CompleteSource::Distinct(c.as_dyn()),
            None => CompleteSource::SameAsHoldout,
        },
        &actual,
        &s_x,
        &s_x_prime,
        args.k_cap,
        b.method,
        b.budget(1)?,
    );
    let ev = QueryEvidence::gather(&input)?;
    if let Some(path) = &args.emit_node_stats {
        let stats: Vec<_> = ev.verified.iter().chain(&ev.unverified).collect();
        serde_json::to_writer_pretty(create(path)?, &stats)?;
    }
    let report = match (b.quantity, b.variant) {
        (QuantityArg::Precision, VariantArg::Holdout) => ev.holdout_precision(b.method, &b.budget(1)?)?,
        (QuantityArg::Recall, VariantArg::Holdout) => ev.holdout_recall(b.method, &b.budget(1)?)?,
        (QuantityArg::ErrorRate, VariantArg::Holdout) => ev.holdout_error_rate(b.method, &b.budget(1)?)?,
        (QuantityArg::Recall, VariantArg::Complete) => ev.complete_recall(b.method, &b.budget(3)?)?,
        (QuantityArg::Precision, VariantArg::Complete) => ev.complete_precision(b.method, &b.budget(4)?)?,
        (QuantityArg::ErrorRate, VariantArg::Complete) => ev.complete_error_rate(b.method, &b.budget(2)?)?,
    };
    emit_reports(&[report], b.out.as_deref())
}

fn cmd_coverage(args: &CoverageArgs) -> Result<Status> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(d) = args.delta {
        cfg.delta = d;
    }
    if !args.method.is_empty() {
        cfg.methods = args.method.clone();
    }
    let table = run_coverage(&cfg, args.jobs)?;
    let csv_path = args
        .out_csv
        .clone()
        .or_else(|| cfg.output_path.clone());
    match csv_path {
        Some(p) => {
            let mut w = create(&p)?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    if let Some(p) = &args.out_json {
        let mut w = create(p)?;
        table.write_json(&mut w)?;
        w.flush()?;
    }
    Ok(Status::Ok)
}

fn cmd_report(args: &ReportArgs) -> Result<Status> {
    let value: serde_json::Value = read_json(&args.input)?;
    let mut out = io::stdout().lock();
    if value.get("rows").is_some() {
        let table: CoverageTable = serde_json::from_value(value)?;
        for r in &table.rows {
            writeln!(
                out,
                "{:<26} {:<28} failures {:>4}/{:<5} rate {:.4} (tolerance {:.4}) {}",
                r.check,
                r.method,
                r.failures,
                r.trials,
                r.failure_rate,
                r.tolerance,
                if r.within_tolerance() { "ok" } else { "EXCEEDED" }
            )?;
        }
        return Ok(Status::Ok);
    }
    let reports: Vec<ValidationReport> = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value)?,
        v => vec![serde_json::from_value(v)?],
    };
    for r in &reports {
        let rel = if r.direction == matchcert::validation::Direction::Lower { ">=" } else { "<=" };
        writeln!(
            out,
            "{} {} {:.6} with confidence {:.4} [{}]{}",
            r.check,
            rel,
            r.bound,
            r.confidence,
            r.method,
            if r.flags.is_empty() {
                String::new()
            } else {
                format!(" flags: {}", r.flags.iter().cloned().collect::<Vec<_>>().join(","))
            }
        )?;
    }
    Ok(if reports.iter().any(ValidationReport::is_vacuous) {
        Status::Vacuous
    } else {
        Status::Ok
    })
}

fn run(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Match(a) => cmd_match(a),
        Command::Split(a) => cmd_split(a),
        Command::Validate(ValidateCommand::Batch(a)) => cmd_validate_batch(a),
        Command::Validate(ValidateCommand::Query(a)) => cmd_validate_query(a),
        Command::Coverage(a) => cmd_coverage(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Vacuous) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
