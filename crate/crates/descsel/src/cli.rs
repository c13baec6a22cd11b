//! The `descsel` command line.
//!
//! Evaluation settings resolve as flags, then the `--config` TOML file, then
//! built-in defaults. Keys in the file use the flag names with underscores
//! (`w_cls`, `outer_norm`, `probe_seed`, ...).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use descsel_core::evaluator::ImageState;
use descsel_core::{
    dump_distinctiveness, generate, Aggregation, AssignmentSource, DatasetStore, EvalConfig, EvalResult, LookupMatrix,
    OuterNorm, PositivityMode, Scope, Setup, SynthSpec,
};
use rayon::ThreadPool;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::report::{Curve, GridCell, RankedScores};
use crate::{cache, export, parallel, report, storefs};

#[derive(Debug, Parser)]
#[command(
    name = "descsel",
    version,
    about = "Distinctive description selection and evaluation over precomputed embeddings"
)]
struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic store with planted descriptions.
    Synth(SynthArgs),
    /// Load a store and check every invariant.
    Validate(StoreArgs),
    /// Build the classwise similarity matrix and cache it.
    Lookup(LookupArgs),
    /// Select descriptions for every test image and write selections.json.
    Select(SelectArgs),
    /// Evaluate one configuration and write results.json and results.csv.
    Eval(EvalArgs),
    /// Evaluate a grid of classname weights and plot the curves.
    Sweep(SweepArgs),
    /// Evaluate every (k, n) combination and write grid.csv.
    Grid(GridArgs),
    /// Dump ranked distinctiveness scores per image and candidate.
    Distinct(DistinctArgs),
    /// Re-render a CSV table produced by sweep, grid or distinct.
    Report(ReportArgs),
    /// List the (class, description) pairs a selection needs embedded.
    EmitPairs(EvalArgs),
}

#[derive(Debug, Args)]
struct StoreArgs {
    /// Store directory.
    #[arg(long, env = "DESCSEL_STORE")]
    store: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Directory to write the store into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    /// Pool size.
    #[arg(long)]
    pool: Option<usize>,
    /// Planted descriptions per class.
    #[arg(long)]
    planted: Option<usize>,
    /// Image noise scale.
    #[arg(long)]
    sigma: Option<f64>,
    /// Fraction of non-planted descriptions shared by neighbouring classes.
    #[arg(long)]
    overlap: Option<f64>,
    /// Extra weight of a class's own axis in its classname prompt.
    #[arg(long)]
    prompt_specificity: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct LookupArgs {
    #[command(flatten)]
    store: StoreArgs,
    /// Probes per class [default: smallest train class]
    #[arg(long)]
    n: Option<usize>,
    /// Probe sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cache directory [default: <store>/cache]
    #[arg(long)]
    cache: Option<PathBuf>,
}

/// Settings that shape the selection itself.
#[derive(Debug, Clone, Default, Args)]
struct SelectionFlags {
    /// TOML file with evaluation settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Candidate classes per image [default: 3]
    #[arg(long)]
    k: Option<usize>,
    /// Descriptions kept per candidate [default: 5]
    #[arg(long)]
    m: Option<usize>,
    /// Probes per class [default: smallest train class]
    #[arg(long)]
    n: Option<usize>,
    /// Probe sampling seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// clamp or strict [default: clamp]
    #[arg(long, value_parser = kebab::<PositivityMode>)]
    mode: Option<PositivityMode>,
    /// Lookup cache directory [default: <store>/cache]
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
struct ConfigFlags {
    #[command(flatten)]
    sel: SelectionFlags,
    /// classname-free, classname-included or cls-only [default: classname-free]
    #[arg(long, value_parser = kebab::<Setup>)]
    setup: Option<Setup>,
    /// selected, llm or random [default: selected]
    #[arg(long, value_parser = kebab::<AssignmentSource>)]
    assignment: Option<AssignmentSource>,
    /// mean or max [default: mean]
    #[arg(long, value_parser = kebab::<Aggregation>)]
    aggregation: Option<Aggregation>,
    /// local-k or global [default: local-k]
    #[arg(long, value_parser = kebab::<Scope>)]
    scope: Option<Scope>,
    /// Classname prompt weight, classname-free setup only [default: 1]
    #[arg(long = "wcls")]
    w_cls: Option<f64>,
    /// paper-eq5 or description-block-only [default: paper-eq5]
    #[arg(long, value_parser = kebab::<OuterNorm>)]
    outer_norm: Option<OuterNorm>,
    /// Cap on LLM description lists [default: none]
    #[arg(long)]
    llm_cap: Option<usize>,
    /// Descriptions per class for random assignments [default: 13]
    #[arg(long)]
    random_per_class: Option<usize>,
    /// Seed for random assignments [default: 0]
    #[arg(long)]
    random_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    store: StoreArgs,
    #[command(flatten)]
    sel: SelectionFlags,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    store: StoreArgs,
    #[command(flatten)]
    cfg: ConfigFlags,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Comma-separated classname weights.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.25,0.5,1,2,3,5,10,30,100,1000,1000000")]
    wcls_grid: Vec<f64>,
    /// Comma-separated assignment sources, one curve each.
    #[arg(long, value_delimiter = ',', value_parser = kebab::<AssignmentSource>, default_value = "selected")]
    assignments: Vec<AssignmentSource>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Comma-separated candidate counts.
    #[arg(long, value_delimiter = ',', required = true)]
    k_list: Vec<usize>,
    /// Comma-separated probe counts.
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
}

#[derive(Debug, Args)]
struct DistinctArgs {
    #[command(flatten)]
    store: StoreArgs,
    #[command(flatten)]
    sel: SelectionFlags,
    /// Comma-separated image indices [default: the first --limit test images]
    #[arg(long, value_delimiter = ',')]
    images: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    limit: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportKind {
    /// sweep.csv to a curve plot
    Sweep,
    /// results.csv to a k by n table
    Grid,
    /// distinct.csv to a rank plot
    Distinct,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, value_enum)]
    kind: ReportKind,
    /// Input CSV.
    #[arg(long)]
    input: PathBuf,
    /// Dataset name used in plot titles and file names.
    #[arg(long, default_value = "report")]
    dataset: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Parses a unit enum from its kebab-case name; underscores are accepted.
fn kebab<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    let name = s.trim().to_ascii_lowercase().replace('_', "-");
    serde_json::from_value(serde_json::Value::String(name)).map_err(|e| e.to_string())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    setup: Option<String>,
    assignment: Option<String>,
    aggregation: Option<String>,
    scope: Option<String>,
    w_cls: Option<f64>,
    outer_norm: Option<String>,
    k: Option<usize>,
    m: Option<usize>,
    n: Option<usize>,
    #[serde(alias = "seed")]
    probe_seed: Option<u64>,
    mode: Option<String>,
    llm_cap: Option<usize>,
    random_per_class: Option<usize>,
    random_seed: Option<u64>,
}

fn read_config_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn file_enum<T: DeserializeOwned>(key: &str, v: &Option<String>) -> Result<Option<T>> {
    v.as_deref().map(|s| kebab(s).map_err(|e| Error::Config(format!("config key {key}: {e}")))).transpose()
}

/// Flags over file over defaults. Also reports whether `w_cls` was set
/// explicitly.
fn resolve(flags: &ConfigFlags) -> Result<(EvalConfig, bool)> {
    let file = match &flags.sel.config {
        Some(p) => read_config_file(p)?,
        None => FileConfig::default(),
    };
    let d = EvalConfig::default();
    let cfg = EvalConfig {
        setup: flags.setup.or(file_enum("setup", &file.setup)?).unwrap_or(d.setup),
        assignment: flags.assignment.or(file_enum("assignment", &file.assignment)?).unwrap_or(d.assignment),
        aggregation: flags.aggregation.or(file_enum("aggregation", &file.aggregation)?).unwrap_or(d.aggregation),
        scope: flags.scope.or(file_enum("scope", &file.scope)?).unwrap_or(d.scope),
        w_cls: flags.w_cls.or(file.w_cls).unwrap_or(d.w_cls),
        outer_norm: flags.outer_norm.or(file_enum("outer_norm", &file.outer_norm)?).unwrap_or(d.outer_norm),
        k: flags.sel.k.or(file.k).unwrap_or(d.k),
        m: flags.sel.m.or(file.m).unwrap_or(d.m),
        n: flags.sel.n.or(file.n).or(d.n),
        probe_seed: flags.sel.seed.or(file.probe_seed).unwrap_or(d.probe_seed),
        mode: flags.sel.mode.or(file_enum("mode", &file.mode)?).unwrap_or(d.mode),
        llm_cap: flags.llm_cap.or(file.llm_cap).or(d.llm_cap),
        random_per_class: flags.random_per_class.or(file.random_per_class).unwrap_or(d.random_per_class),
        random_seed: flags.random_seed.or(file.random_seed).unwrap_or(d.random_seed),
    };
    let explicit_wcls = flags.w_cls.is_some() || file.w_cls.is_some();
    if explicit_wcls && cfg.setup != Setup::ClassnameFree {
        return Err(Error::Config(format!(
            "w_cls only applies to the classname-free setup, not {}",
            export::variant_name(&cfg.setup)
        )));
    }
    cfg.validate()?;
    Ok((cfg, explicit_wcls))
}

fn warn_clamp(store: &DatasetStore, k: usize) {
    let classes = store.num_classes();
    if k > classes {
        eprintln!("warning: k={k} exceeds the {classes} classes; using k={classes}");
    }
}

fn cache_dir(store: &Path, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| store.join("cache"))
}

fn cached_lookup(
    store_dir: &Path,
    store: &DatasetStore,
    cfg: &EvalConfig,
    cache: &Option<PathBuf>,
) -> Result<Option<LookupMatrix>> {
    let n = cfg.n.unwrap_or_else(|| store.min_train_cardinality());
    cache::load_matching(&cache_dir(store_dir, cache), store, n, cfg.probe_seed)
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn prepared(
    pool: &ThreadPool,
    store_dir: &Path,
    store: &DatasetStore,
    cfg: &EvalConfig,
    cache: &Option<PathBuf>,
) -> Result<(descsel_core::evaluator::EvalContext, Vec<ImageState>)> {
    let cached = cached_lookup(store_dir, store, cfg, cache)?;
    pool.install(|| {
        let ctx = parallel::context(store, cfg, cached)?;
        let states = parallel::prepare_all(store, cfg, &ctx)?;
        Ok((ctx, states))
    })
}

fn selection_config(sel: &SelectionFlags) -> Result<EvalConfig> {
    let flags = ConfigFlags { sel: sel.clone(), ..ConfigFlags::default() };
    let (mut cfg, _) = resolve(&flags)?;
    cfg.setup = Setup::ClassnameFree;
    cfg.assignment = AssignmentSource::Selected;
    Ok(cfg)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let d = SynthSpec::default();
    let spec = SynthSpec {
        classes: a.classes.unwrap_or(d.classes),
        dim: a.dim.unwrap_or(d.dim),
        train_per_class: a.train_per_class.unwrap_or(d.train_per_class),
        test_per_class: a.test_per_class.unwrap_or(d.test_per_class),
        pool: a.pool.unwrap_or(d.pool),
        planted: a.planted.unwrap_or(d.planted),
        sigma: a.sigma.unwrap_or(d.sigma),
        overlap: a.overlap.unwrap_or(d.overlap),
        prompt_specificity: a.prompt_specificity.unwrap_or(d.prompt_specificity),
        seed: a.seed.unwrap_or(d.seed),
    };
    let out = generate(&spec)?;
    storefs::save_store(&out.store, &a.out)?;
    storefs::write_json(&a.out.join("ground_truth.json"), &export::ground_truth(&out.store, &out.ground_truth))?;
    println!(
        "wrote {} ({} classes, {} images, {} descriptions) to {}",
        out.store.name,
        out.store.num_classes(),
        out.store.images.rows(),
        out.store.pool.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_validate(a: &StoreArgs) -> Result<()> {
    let s = storefs::load_store(&a.store)?;
    println!("dataset {}", s.name);
    println!("classes {}", s.num_classes());
    println!("dim {}", s.dim());
    println!("pool {}", s.pool.len());
    println!("images {} (test {})", s.images.rows(), s.test_indices().len());
    println!("min train per class {}", s.min_train_cardinality());
    println!("pairs {}", s.pairs.as_ref().map_or(0, |p| p.len()));
    println!("ok");
    Ok(())
}

fn cmd_lookup(pool: &ThreadPool, a: &LookupArgs) -> Result<()> {
    let s = storefs::load_store(&a.store.store)?;
    let n = a.n.unwrap_or_else(|| s.min_train_cardinality());
    let probes = descsel_core::sample_probe_set(&s, n, a.seed)?;
    let lookup = pool.install(|| parallel::build_lookup(&s, &probes))?;
    let dir = cache_dir(&a.store.store, &a.cache);
    cache::save_lookup(&dir, &lookup)?;
    println!("cached {}x{} lookup (n={n}, seed={}) in {}", lookup.classes, lookup.pool, a.seed, dir.display());
    Ok(())
}

fn cmd_select(pool: &ThreadPool, a: &SelectArgs) -> Result<()> {
    let s = storefs::load_store(&a.store.store)?;
    let cfg = selection_config(&a.sel)?;
    warn_clamp(&s, cfg.k);
    let (ctx, states) = prepared(pool, &a.store.store, &s, &cfg, &a.sel.cache)?;
    let file = export::selections(&s, &states, ctx.k, cfg.m, ctx.n, cfg.probe_seed, cfg.mode);
    create_out(&a.out)?;
    let path = a.out.join("selections.json");
    storefs::write_json(&path, &file)?;
    println!("wrote selections for {} images to {}", states.len(), path.display());
    Ok(())
}

fn cmd_eval(pool: &ThreadPool, a: &EvalArgs) -> Result<EvalResult> {
    let s = storefs::load_store(&a.store.store)?;
    let (cfg, _) = resolve(&a.cfg)?;
    warn_clamp(&s, cfg.k);
    let cached = cached_lookup(&a.store.store, &s, &cfg, &a.cfg.sel.cache)?;
    let r = parallel::evaluate(pool, &s, &cfg, cached)?;
    create_out(&a.out)?;
    export::write_results(&a.out, std::slice::from_ref(&r))?;
    println!("top1 {} ({}/{})", r.top1, r.correct, r.total);
    Ok(r)
}

fn cmd_sweep(pool: &ThreadPool, a: &SweepArgs) -> Result<()> {
    let s = storefs::load_store(&a.eval.store.store)?;
    let (cfg, explicit) = resolve(&a.eval.cfg)?;
    if explicit {
        return Err(Error::Config("sweep takes --wcls-grid, not a single w_cls".into()));
    }
    if cfg.setup != Setup::ClassnameFree {
        return Err(Error::Config("sweep needs the classname-free setup".into()));
    }
    if a.wcls_grid.is_empty() || a.assignments.is_empty() {
        return Err(Error::Config("sweep needs at least one w_cls and one assignment".into()));
    }
    warn_clamp(&s, cfg.k);
    let cached = cached_lookup(&a.eval.store.store, &s, &cfg, &a.eval.cfg.sel.cache)?;
    let mut all = Vec::new();
    let mut curves = Vec::new();
    for &assignment in &a.assignments {
        let c = EvalConfig { assignment, ..cfg.clone() };
        let rs = parallel::sweep(pool, &s, &c, &a.wcls_grid, cached.clone())?;
        curves.push(Curve {
            name: export::variant_name(&assignment),
            points: rs.iter().map(|r| (r.config.w_cls, r.top1)).collect(),
        });
        all.extend(rs);
    }
    let baseline = parallel::evaluate(pool, &s, &EvalConfig { setup: Setup::ClsOnly, ..cfg.clone() }, None)?;
    create_out(&a.eval.out)?;
    let plot = report::render_sweep(&a.eval.out, &s.name, &curves, baseline.top1)?;
    all.push(baseline);
    export::write_results(&a.eval.out, &all)?;
    for c in &curves {
        let best = c.points.iter().copied().reduce(|a, b| if b.1 > a.1 { b } else { a }).expect("nonempty grid");
        println!("{}: best top1 {} at w_cls={}", c.name, best.1, best.0);
    }
    println!("plot {}", plot.display());
    Ok(())
}

fn cmd_grid(pool: &ThreadPool, a: &GridArgs) -> Result<()> {
    let s = storefs::load_store(&a.eval.store.store)?;
    let (cfg, _) = resolve(&a.eval.cfg)?;
    let mut results = Vec::new();
    let mut cells = Vec::new();
    for &n in &a.n_list {
        for &k in &a.k_list {
            let c = EvalConfig { k, n: Some(n), ..cfg.clone() };
            c.validate()?;
            warn_clamp(&s, k);
            let cached = cached_lookup(&a.eval.store.store, &s, &c, &a.eval.cfg.sel.cache)?;
            let r = parallel::evaluate(pool, &s, &c, cached)?;
            cells.push(GridCell { k, n, top1: r.top1 });
            results.push(r);
        }
    }
    create_out(&a.eval.out)?;
    let grid = report::render_grid(&a.eval.out, &cells)?;
    export::write_results(&a.eval.out, &results)?;
    print!("{}", report::grid_csv(&grid)?);
    Ok(())
}

fn cmd_distinct(pool: &ThreadPool, a: &DistinctArgs) -> Result<()> {
    let s = storefs::load_store(&a.store.store)?;
    let cfg = selection_config(&a.sel)?;
    warn_clamp(&s, cfg.k);
    let images: Vec<usize> =
        if a.images.is_empty() { s.test_indices().into_iter().take(a.limit).collect() } else { a.images.clone() };
    if let Some(&bad) = images.iter().find(|&&i| i >= s.images.rows()) {
        return Err(Error::Config(format!("image {bad} is out of range for {} images", s.images.rows())));
    }
    let cached = cached_lookup(&a.store.store, &s, &cfg, &a.sel.cache)?;
    let ctx = pool.install(|| parallel::context(&s, &cfg, cached))?;
    let lookup = ctx.lookup.as_ref().expect("selected assignments build a lookup");
    let mut lists = Vec::new();
    for &image in &images {
        let cands = descsel_core::candidates(image, s.images.row(image), &s.cls_prompts, ctx.k)?;
        for &class in &cands.classes {
            lists.push(RankedScores { image, class, scores: dump_distinctiveness(lookup, &cands, class)? });
        }
    }
    create_out(&a.out)?;
    let plot = report::render_distinctiveness(&a.out, &s.name, &lists)?;
    println!("wrote {} ranked lists; plot {}", lists.len(), plot.display());
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
    create_out(&a.out)?;
    match a.kind {
        ReportKind::Sweep => {
            let (curves, baseline) = report::parse_sweep_csv(&a.input, &text)?;
            if curves.is_empty() {
                return Err(Error::format(&a.input, "no curves"));
            }
            let baseline = baseline.ok_or_else(|| Error::format(&a.input, "no cls-only baseline rows"))?;
            println!("plot {}", report::render_sweep(&a.out, &a.dataset, &curves, baseline)?.display());
        }
        ReportKind::Grid => {
            let rows = export::read_results_csv(&a.input)?;
            let cells: Vec<GridCell> = rows.iter().map(|r| GridCell { k: r.k, n: r.n, top1: r.top1 }).collect();
            print!("{}", report::grid_csv(&report::render_grid(&a.out, &cells)?)?);
        }
        ReportKind::Distinct => {
            let lists = report::parse_distinctiveness_csv(&a.input, &text)?;
            println!("plot {}", report::render_distinctiveness(&a.out, &a.dataset, &lists)?.display());
        }
    }
    Ok(())
}

fn cmd_emit_pairs(pool: &ThreadPool, a: &EvalArgs) -> Result<()> {
    let s = storefs::load_store(&a.store.store)?;
    let (mut cfg, _) = resolve(&a.cfg)?;
    // keys are what a classname-included run would look up
    cfg.setup = Setup::ClassnameFree;
    warn_clamp(&s, cfg.k);
    let keys = match cfg.assignment {
        AssignmentSource::Selected => {
            let (_, states) = prepared(pool, &a.store.store, &s, &cfg, &a.cfg.sel.cache)?;
            export::keys_from_states(&states)
        }
        _ => {
            let ctx = parallel::context(&s, &cfg, None)?;
            export::keys_from_assignment(ctx.class_assignment.as_ref().expect("class-level assignment"))
        }
    };
    let file = export::pair_keys(&s, keys);
    create_out(&a.out)?;
    let path = a.out.join("pair_keys.json");
    storefs::write_json(&path, &file)?;
    println!("wrote {} pair keys to {}", file.keys.len(), path.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let pool = parallel::thread_pool(cli.threads)?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Lookup(a) => cmd_lookup(&pool, a),
        Command::Select(a) => cmd_select(&pool, a),
        Command::Eval(a) => cmd_eval(&pool, a).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(&pool, a),
        Command::Grid(a) => cmd_grid(&pool, a),
        Command::Distinct(a) => cmd_distinct(&pool, a),
        Command::Report(a) => cmd_report(a),
        Command::EmitPairs(a) => cmd_emit_pairs(&pool, a),
    }
}

/// Runs the CLI and returns the process exit code: 0 ok, 2 config error,
/// 3 data error, 4 I/O error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
