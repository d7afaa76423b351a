use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use plackett::fit::{fit, FitConfig, Method, ModelFit};
use plackett::inference::{comparison_intervals, model_metrics, quasi_variances, summarize, Reference};
use plackett::io::{self, ModelArtifact, RankCsvOptions};
use plackett::network::{adjacency, connectivity};
use plackett::rankings::{group_rankings, RankingsTable};
use plackett::tree::{grow_tree, TreeConfig};
use plackett::Error;

/// Environment variable naming a directory searched for input files that
/// are not found as given.
const DATA_DIR_VAR: &str = "PLACKETT_DATA_DIR";

#[derive(Parser)]
#[command(name = "plackett", version, about = "Plackett-Luce models for rankings with ties")]
struct Cli {
    /// Worker threads for likelihood evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a SOC, rank CSV or paired-count file to a canonical rank CSV.
    Convert(ConvertArgs),
    /// Fit a model and print worths and tie parameters.
    Fit(FitArgs),
    /// Coefficients with standard errors, z and p values, and model metrics.
    Summary(SummaryArgs),
    /// Quasi-variances and comparison intervals.
    Qv(QvArgs),
    /// Adjacency matrix and strongly connected components.
    Connectivity(ConnectivityArgs),
    /// Grow a Plackett-Luce tree.
    Tree(TreeArgs),
    /// Time repeated fits.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// PrefLib strict orders, complete list.
    Soc,
    /// Rank table with item columns.
    Csv,
    /// Paired-comparison counts (i, j, w_ij, w_ji, t_ij).
    Pairs,
}

#[derive(Args)]
struct InputArgs {
    /// Input file: .soc, rank .csv, or a model .json where accepted.
    input: Option<PathBuf>,
    /// Input format; inferred from the extension by default.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Column holding ranking weights.
    #[arg(long)]
    weights_col: Option<String>,
    /// Keep only these items (comma-separated).
    #[arg(long, value_delimiter = ',')]
    items: Option<Vec<String>>,
}

#[derive(Args)]
struct FitOpts {
    /// Weight of the pseudo-rankings with the ghost item (0 for maximum likelihood).
    #[arg(long, default_value_t = 0.5)]
    npseudo: f64,
    /// iterative-scaling, bfgs or l-bfgs.
    #[arg(long, default_value = "iterative-scaling")]
    method: Method,
    #[arg(long, default_value_t = 500)]
    maxit: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Maximum tie order; defaults to the largest observed tie.
    #[arg(long)]
    max_tie_order: Option<usize>,
    /// Allow a maximum tie order above 4.
    #[arg(long)]
    allow_high_tie_order: bool,
}

impl FitOpts {
    fn config(&self) -> FitConfig<f64> {
        FitConfig {
            npseudo: self.npseudo,
            method: self.method,
            maxit: self.maxit,
            tol: self.tol,
            max_tie_order: self.max_tie_order,
            allow_high_tie_order: self.allow_high_tie_order,
            ..FitConfig::default()
        }
    }
}

#[derive(Args)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Download the input instead of reading a file.
    #[arg(long, conflicts_with = "input")]
    url: Option<String>,
    /// Output rank CSV (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitOpts,
    /// Reference for the printed log-worth contrasts: an item, a comma-separated list, or `mean`.
    #[arg(long = "ref")]
    reference: Option<String>,
    /// Write the fitted model as JSON.
    #[arg(long)]
    json_out: Option<PathBuf>,
    /// Decimal places in printed tables.
    #[arg(long, default_value_t = 7)]
    digits: usize,
}

#[derive(Args)]
struct SummaryArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitOpts,
    #[arg(long = "ref")]
    reference: Option<String>,
    /// Write the coefficient table as CSV.
    #[arg(long)]
    csv_out: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    digits: usize,
}

#[derive(Args)]
struct QvArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitOpts,
    #[arg(long = "ref")]
    reference: Option<String>,
    /// Coverage of the comparison intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Write comparison intervals as CSV plot data.
    #[arg(long)]
    csv_out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    digits: usize,
}

#[derive(Args)]
struct ConnectivityArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Write the adjacency matrix as CSV.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitOpts,
    /// One row of covariates per group.
    #[arg(long)]
    covariates: PathBuf,
    /// Column of the rank CSV holding one-based group ids; each ranking is its own group otherwise.
    #[arg(long)]
    group_col: Option<String>,
    /// Treat a numeric-looking covariate as unordered categorical.
    #[arg(long = "factor")]
    factors: Vec<String>,
    /// Treat a covariate as ordered categorical.
    #[arg(long = "ordered")]
    ordered: Vec<String>,
    /// Minimum groups per node (default: 5% of the groups).
    #[arg(long)]
    minsize: Option<usize>,
    /// Maximum depth, the root having depth 1.
    #[arg(long)]
    maxdepth: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    json_out: Option<PathBuf>,
    /// Write per-leaf worths as CSV plot data.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitOpts,
    /// Timed runs after one warm-up run.
    #[arg(long, default_value_t = 5)]
    runs: usize,
}

/// Failure classes with their exit codes.
enum Failure {
    Input(anyhow::Error),
    Model(anyhow::Error),
}

type CliResult<T = ()> = Result<T, Failure>;

fn classify(e: Error) -> Failure {
    match e {
        Error::NotConnected(_)
        | Error::SingularInformation
        | Error::ZeroExpectation(_)
        | Error::LineSearch { .. }
        | Error::Optimizer(_)
        | Error::TieOrderGuard(_)
        | Error::TieOrderExceeded { .. }
        | Error::EmptyData => Failure::Model(e.into()),
        _ => Failure::Input(e.into()),
    }
}

trait OrInput<T> {
    fn input(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrInput<T> for Result<T, E> {
    fn input(self) -> CliResult<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }
}

fn lib<T>(r: plackett::Result<T>) -> CliResult<T> {
    r.map_err(classify)
}

fn resolve(path: &Path) -> PathBuf {
    if !path.exists() {
        if let Some(dir) = std::env::var_os(DATA_DIR_VAR) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

fn format_of(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("soc") => Format::Soc,
        _ => Format::Csv,
    })
}

fn parse_text(text: &str, format: Format, weights_col: Option<&str>) -> CliResult<RankingsTable<f64>> {
    lib(match format {
        Format::Soc => io::parse_preflib_soc(text).and_then(|s| s.to_rankings()),
        Format::Csv => io::read_rank_csv(text.as_bytes(), weights_col),
        Format::Pairs => io::read_paired_counts_csv(text.as_bytes()),
    })
}

fn input_path(args: &InputArgs) -> CliResult<PathBuf> {
    let path = args.input.as_ref().ok_or_else(|| Failure::Input(anyhow!("no input file given")))?;
    Ok(resolve(path))
}

fn read_table(args: &InputArgs) -> CliResult<RankingsTable<f64>> {
    let path = input_path(args)?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display())).input()?;
    let table = parse_text(&text, format_of(&path, args.format), args.weights_col.as_deref())?;
    if table.na_count() > 0 {
        log::warn!("{} rankings with fewer than two items are ignored", table.na_count());
    }
    match &args.items {
        Some(items) => Ok(lib(table.subset_items(items))?.0),
        None => Ok(table),
    }
}

fn is_json(args: &InputArgs) -> bool {
    args.input
        .as_ref()
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// A fitted model from a model JSON file, or a fresh fit of a data file.
fn model_from(args: &InputArgs, opts: &FitOpts) -> CliResult<ModelFit<f64>> {
    if is_json(args) {
        let path = input_path(args)?;
        return match lib(io::read_model_json_path(&path))? {
            ModelArtifact::Fit(m) => Ok(m),
            ModelArtifact::Tree(_) => Err(Failure::Input(anyhow!("{} holds a tree, not a single model", path.display()))),
        };
    }
    let table = read_table(args)?;
    lib(fit(&table, &opts.config()))
}

fn reference(spec: Option<&str>, items: &[String]) -> CliResult<Reference> {
    match spec {
        None => Ok(Reference::default()),
        Some(s) => lib(Reference::parse(s, items)),
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display())).input()?))
}

fn fmt_num(x: f64, digits: usize) -> String {
    if x.is_finite() {
        format!("{x:.digits$}")
    } else {
        "NA".to_string()
    }
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "NA".to_string(), |v| fmt_num(v, digits))
}

/// Right-aligned columns under a header, first column left-aligned.
fn print_table(out: &mut impl Write, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let cols = header.len();
    let width: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = width[c]) } else { format!("{s:>w$}", w = width[c]) })
            .collect::<Vec<_>>()
            .join("  ")
    };
    writeln!(out, "{}", line(header.to_vec()).trim_end())?;
    for r in rows {
        writeln!(out, "{}", line(r.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

fn convert(args: &ConvertArgs) -> CliResult {
    let table = match &args.url {
        Some(url) => {
            let format = args.input.format.unwrap_or_else(|| format_of(Path::new(url), None));
            let text = ureq::get(url)
                .call()
                .and_then(|mut r| r.body_mut().read_to_string())
                .with_context(|| format!("downloading {url}"))
                .input()?;
            parse_text(&text, format, args.input.weights_col.as_deref())?
        }
        None => read_table(&args.input)?,
    };
    match &args.output {
        Some(p) => {
            let mut w = create(p)?;
            lib(io::write_rank_csv(&table, &mut w))?;
            w.flush().input()
        }
        None => lib(io::write_rank_csv(&table, std::io::stdout().lock())),
    }
}

fn run_fit(args: &FitArgs) -> CliResult {
    let table = read_table(&args.input)?;
    let model = lib(fit(&table, &args.fit.config()))?;
    let mut out = std::io::stdout().lock();
    let d = args.digits;
    let contrasts = plackett::inference::contrasts(&model, &reference(args.reference.as_deref(), model.items())?).map_err(classify)?;
    let mut rows: Vec<Vec<String>> = model
        .items()
        .iter()
        .zip(model.worth())
        .zip(&contrasts)
        .map(|((i, w), c)| vec![i.clone(), fmt_num(w, d), fmt_num(*c, d)])
        .collect();
    for (order, delta) in model.tie() {
        if model.tie_active()[order - 2] {
            rows.push(vec![plackett::inference::tie_label(order), fmt_num(delta, d), fmt_num(delta.ln(), d)]);
        }
    }
    print_table(&mut out, &["", "worth", "log"], &rows).input()?;
    writeln!(
        out,
        "\nMethod: {}; iterations: {}; converged: {}; log-likelihood: {}",
        model.method(),
        model.iterations(),
        model.converged(),
        fmt_num(model.log_likelihood(), d)
    )
    .input()?;
    if let Some(p) = &args.json_out {
        let mut w = create(p)?;
        lib(io::write_model_json(&ModelArtifact::Fit(model), &mut w))?;
        w.flush().input()?;
    }
    Ok(())
}

fn run_summary(args: &SummaryArgs) -> CliResult {
    let model = model_from(&args.input, &args.fit)?;
    let r = reference(args.reference.as_deref(), model.items())?;
    let s = lib(summarize(&model, &r))?;
    let d = args.digits;
    let rows: Vec<Vec<String>> = s
        .coefficients
        .iter()
        .map(|c| vec![c.name.clone(), fmt_num(c.estimate, d), fmt_opt(c.se, d), fmt_opt(c.z, 3), fmt_opt(c.p, 6)])
        .collect();
    let mut out = std::io::stdout().lock();
    writeln!(out, "Coefficients:").input()?;
    print_table(&mut out, &["", "Estimate", "Std. Error", "z value", "Pr(>|z|)"], &rows).input()?;
    let m = model_metrics(&model);
    writeln!(
        out,
        "\nResidual deviance: {} on {} degrees of freedom\nAIC: {}\nNumber of iterations: {}",
        fmt_num(m.deviance, d),
        fmt_num(m.df_residual, 0),
        fmt_num(m.aic, d),
        model.iterations()
    )
    .input()?;
    if let Some(p) = &args.csv_out {
        let mut w = create(p)?;
        lib(io::write_summary_csv(&s, &mut w))?;
        w.flush().input()?;
    }
    Ok(())
}

fn run_qv(args: &QvArgs) -> CliResult {
    let model = model_from(&args.input, &args.fit)?;
    let r = reference(args.reference.as_deref(), model.items())?;
    let qv = lib(quasi_variances(&model, &r))?;
    let d = args.digits;
    let rows: Vec<Vec<String>> = (0..qv.items.len())
        .map(|i| {
            vec![
                qv.items[i].clone(),
                fmt_num(qv.estimate[i], d),
                fmt_num(qv.se[i], d),
                fmt_num(qv.quasi_se[i], d),
                fmt_num(qv.quasi_var[i], d + 1),
            ]
        })
        .collect();
    let mut out = std::io::stdout().lock();
    print_table(&mut out, &["", "estimate", "SE", "quasiSE", "quasiVar"], &rows).input()?;
    let pct = |x: f64| format!("{:.2}%", 100.0 * x);
    writeln!(
        out,
        "Worst relative errors in SEs of simple contrasts: {} {}\nWorst relative errors over all contrasts: {} {}",
        pct(qv.simple_error.0),
        pct(qv.simple_error.1),
        pct(qv.all_error.0),
        pct(qv.all_error.1)
    )
    .input()?;
    if let Some(p) = &args.csv_out {
        let intervals = lib(comparison_intervals(&qv, args.level))?;
        let mut w = create(p)?;
        lib(io::write_intervals_csv(&intervals, &mut w))?;
        w.flush().input()?;
    }
    Ok(())
}

fn run_connectivity(args: &ConnectivityArgs) -> CliResult {
    let table = read_table(&args.input)?;
    let adj = adjacency(&table);
    let mut out = std::io::stdout().lock();
    let rows: Vec<Vec<String>> = (0..adj.n())
        .map(|i| std::iter::once(adj.items()[i].clone()).chain(adj.row(i).iter().map(|v| v.to_string())).collect())
        .collect();
    let mut header = vec![""];
    header.extend(adj.items().iter().map(String::as_str));
    print_table(&mut out, &header, &rows).input()?;
    writeln!(out).input()?;
    writeln!(out, "{}", connectivity(&adj)).input()?;
    if let Some(p) = &args.csv_out {
        let mut w = create(p)?;
        lib(io::write_adjacency_csv(&adj, &mut w))?;
        w.flush().input()?;
    }
    Ok(())
}

fn run_tree(args: &TreeArgs) -> CliResult {
    let path = input_path(&args.input)?;
    let (table, groups) = match format_of(&path, args.input.format) {
        Format::Csv => {
            let opts = RankCsvOptions {
                weight_col: args.input.weights_col.clone(),
                group_col: args.group_col.clone(),
            };
            lib(io::read_rank_csv_with::<f64>(File::open(&path).with_context(|| format!("reading {}", path.display())).input()?, &opts))?
        }
        _ => {
            if args.group_col.is_some() {
                return Err(Failure::Input(anyhow!("--group-col needs a rank CSV input")));
            }
            (read_table(&args.input)?, None)
        }
    };
    let index = groups.unwrap_or_else(|| (1..=table.n_rows()).collect());
    let grouped = lib(group_rankings(table, &index))?;
    let cov_path = resolve(&args.covariates);
    let frame = lib(io::read_covariates_csv(
        File::open(&cov_path).with_context(|| format!("reading {}", cov_path.display())).input()?,
        &args.factors,
        &args.ordered,
    ))?;
    let config = TreeConfig {
        minsize: args.minsize,
        maxdepth: args.maxdepth.unwrap_or(usize::MAX),
        alpha: args.alpha,
        fit: args.fit.config(),
        ..TreeConfig::default()
    };
    let tree = lib(grow_tree(&grouped, &frame, &config))?;
    println!("{tree}");
    if let Some(p) = &args.json_out {
        let mut w = create(p)?;
        lib(io::write_model_json(&ModelArtifact::Tree(tree.clone()), &mut w))?;
        w.flush().input()?;
    }
    if let Some(p) = &args.csv_out {
        let mut w = create(p)?;
        lib(io::write_tree_worths_csv(&tree, &mut w))?;
        w.flush().input()?;
    }
    Ok(())
}

fn run_bench(args: &BenchArgs) -> CliResult {
    if args.runs == 0 {
        return Err(Failure::Input(anyhow!("--runs must be at least 1")));
    }
    let table = read_table(&args.input)?;
    let config = args.fit.config();
    lib(fit(&table, &config))?;
    let mut times: Vec<f64> = (0..args.runs)
        .map(|_| {
            let t = Instant::now();
            fit(&table, &config).map(|_| t.elapsed().as_secs_f64())
        })
        .collect::<plackett::Result<_>>()
        .map_err(classify)?;
    times.sort_by(f64::total_cmp);
    let median = if times.len() % 2 == 1 {
        times[times.len() / 2]
    } else {
        (times[times.len() / 2 - 1] + times[times.len() / 2]) / 2.0
    };
    println!(
        "{} rankings, {} items, method {}: median {:.4} s over {} runs (min {:.4}, max {:.4})",
        table.n_rows(),
        table.n_items(),
        config.method,
        median,
        times.len(),
        times[0],
        times[times.len() - 1]
    );
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().input()?;
    }
    match &cli.command {
        Command::Convert(a) => convert(a),
        Command::Fit(a) => run_fit(a),
        Command::Summary(a) => run_summary(a),
        Command::Qv(a) => run_qv(a),
        Command::Connectivity(a) => run_connectivity(a),
        Command::Tree(a) => run_tree(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| {
            let level = match record.level() {
                log::Level::Warn => "warning".to_string(),
                other => other.as_str().to_lowercase(),
            };
            writeln!(buf, "{level}: {}", record.args())
        })
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Model(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
