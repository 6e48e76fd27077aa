use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qcf_core::bench::{self, ExperimentConfig, SyntheticSpec};
use qcf_core::curation::{build_curated_split, CurationPlan, HoldOut, ScoredSet, Strategy};
use qcf_core::eval::{self, quartile_eval, QuartileResult, TestSplit, TrainedProbe};
use qcf_core::gmm::{fit_em, score_set, EmConfig, GaussianMixture};
use qcf_core::pixels::{
    augment, extract_features, resize_bilinear, AugmentConfig, Extractor, ExtractorConfig, Image, ToyExtractor,
    DEFAULT_BATCH_SIZE, EVAL_SIZE,
};
use qcf_core::probe::{train_on, ProbeModel, TrainConfig};
use qcf_core::spectra::{denoise, fft2_spectrum, residual, DenoiseMethod, ResidualStack, SpectrumMeta};
use qcf_core::{rng, DatasetManifest, Error, FeatureRecord, FeatureSet};

use crate::error::{Diagnostic, ExitCode, QcfError, Result};
use crate::imageio::{load_image, save_gray_png, ImageJpeg};
use crate::io;

const SPECTRA_STREAM: u64 = 0x7370_6563;

#[derive(Debug, Parser)]
#[command(
    name = "qcf",
    version,
    about = "Quality-scored curation of generated images for detector training"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random stream (overrides module seeds in --config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON run configuration; flags win over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, env = "QCF_THREADS")]
    pub threads: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode images from a manifest and write their feature vectors.
    Extract(ExtractArgs),
    /// Fit a Gaussian mixture to real-image features.
    FitGmm(FitGmmArgs),
    /// Score features by log-density under a fitted mixture.
    Score(ScoreArgs),
    /// Split scored fakes and reals into train/test sets.
    Curate(CurateArgs),
    /// Train a probe classifier on a curated split.
    Train(TrainArgs),
    /// Cross-concept AUC matrix and quality-quartile breakdown.
    Eval(EvalArgs),
    /// Average denoising residuals and render their magnitude spectrum.
    Spectra(SpectraArgs),
    /// Synthetic benchmark: qc vs random curation across concepts.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch: usize,
    /// Toy extractor output dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub projection_seed: Option<u64>,
    /// Apply training-time augmentation instead of the plain test-time resize.
    #[arg(long)]
    pub augment: bool,
    #[arg(long, default_value = "features.qcfs")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct FitGmmArgs {
    /// Real-image features.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub cov_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub gmm: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Qc,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HoldOutArg {
    Before,
    After,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Fake pool features.
    #[arg(long)]
    pub fakes: PathBuf,
    /// `id,qc_score` table covering every fake.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub reals: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    /// Training fakes kept (default: half the pool).
    #[arg(long)]
    pub k: Option<usize>,
    /// Held-out fakes and reals (default: a tenth of the pool, at least 1).
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long, value_enum)]
    pub hold_out: Option<HoldOutArg>,
    /// Concept tag for the split (default: concept of the first fake).
    #[arg(long)]
    pub tag: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `curate`.
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Hidden widths, comma separated; `none` for a linear probe.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `train`; repeatable.
    #[arg(long = "probe", required = true)]
    pub probes: Vec<PathBuf>,
    /// Directory written by `curate`; repeatable.
    #[arg(long = "test", required = true)]
    pub tests: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DenoiseArg {
    Median3,
    Gaussian,
    External,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    /// Repeatable; manifests sharing (concept, source) are pooled.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<DenoiseArg>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// External denoiser model path.
    #[arg(long)]
    pub model: Option<String>,
    /// Images per (concept, source), drawn at random when there are more.
    #[arg(long, default_value_t = 1000)]
    pub limit: usize,
    /// Resize every image to size×size first.
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// SyntheticSpec JSON (default: the built-in two-concept spec).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of seeds, counting up from --seed.
    #[arg(long)]
    pub seeds: Option<usize>,
}

/// Module configuration file; every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub extractor: Option<ExtractorConfig>,
    pub batch_size: Option<usize>,
    pub augment: Option<AugmentConfig>,
    pub em: Option<EmConfig>,
    pub plan: Option<CurationPlan>,
    pub train: Option<TrainConfig>,
    pub denoise: Option<DenoiseMethod>,
    pub bench: Option<ExperimentConfig>,
    pub spec: Option<SyntheticSpec>,
}

struct Ctx {
    out: PathBuf,
    seed: Option<u64>,
    config: RunConfig,
    verbose: u8,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn seed_or(&self, module: u64) -> u64 {
        self.seed.unwrap_or(module)
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::Usage.code()
            } else {
                ExitCode::Ok.code()
            };
        }
    };
    let name = command_name(&cli.command);
    let mut seed = cli.global.seed.unwrap_or(0);
    let result = prepare(&cli.global).and_then(|ctx| {
        seed = ctx.seed.unwrap_or(0);
        let threads = cli.global.threads.or(ctx.config.threads).unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| QcfError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(&cli.command, &ctx).map_err(|e| (e, Some(ctx.out.clone()))))
            .or_else(|(e, out)| {
                if e.exit_code() == ExitCode::Numeric {
                    let dump = Diagnostic {
                        command: name,
                        seed,
                        error: &e,
                    }
                    .to_string();
                    if let Some(out) = out {
                        let _ = std::fs::write(out.join("diagnostic.txt"), &dump);
                    }
                    let _ = std::io::stderr().write_all(dump.as_bytes());
                }
                Err(e)
            })
    });
    match result {
        Ok(()) => ExitCode::Ok.code(),
        Err(e) => {
            eprintln!("qcf {name}: error: {e}");
            e.exit_code().code()
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Extract(_) => "extract",
        Command::FitGmm(_) => "fit-gmm",
        Command::Score(_) => "score",
        Command::Curate(_) => "curate",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Spectra(_) => "spectra",
        Command::Bench(_) => "bench",
    }
}

fn prepare(g: &GlobalArgs) -> Result<Ctx> {
    let out = g
        .out
        .clone()
        .ok_or_else(|| QcfError::Usage("--out is required".into()))?;
    let config = match &g.config {
        Some(p) => {
            require(p)?;
            io::read_json(p)?
        }
        None => RunConfig::default(),
    };
    let seed = g.seed.or(config.seed);
    io::ensure_dir(&out)?;
    Ok(Ctx {
        out,
        seed,
        config,
        verbose: g.verbose,
    })
}

fn require(p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(QcfError::Input(format!("{}: no such file or directory", p.display())))
    }
}

fn dispatch(cmd: &Command, ctx: &Ctx) -> Result<()> {
    match cmd {
        Command::Extract(a) => cmd_extract(a, ctx),
        Command::FitGmm(a) => cmd_fit_gmm(a, ctx),
        Command::Score(a) => cmd_score(a, ctx),
        Command::Curate(a) => cmd_curate(a, ctx),
        Command::Train(a) => cmd_train(a, ctx),
        Command::Eval(a) => cmd_eval(a, ctx),
        Command::Spectra(a) => cmd_spectra(a, ctx),
        Command::Bench(a) => cmd_bench(a, ctx),
    }
}

fn make_extractor(cfg: &ExtractorConfig) -> Result<ToyExtractor> {
    match cfg {
        ExtractorConfig::Toy { dim, projection_seed } => {
            ToyExtractor::new(*dim, *projection_seed).map_err(QcfError::Extractor)
        }
        ExtractorConfig::External { model, .. } => Err(QcfError::Extractor(Error::Unavailable(format!(
            "external extractor `{model}`: no inference backend in this build"
        )))),
    }
}

/// Decodes entries in parallel; the first failure in manifest order wins.
fn load_all<T: Send>(paths: &[PathBuf], f: impl Fn(usize, Image) -> Result<T> + Sync) -> Result<Vec<T>> {
    let loaded: Vec<Result<T>> = paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| load_image(p).and_then(|img| f(i, img)))
        .collect();
    loaded.into_iter().collect()
}

fn manifest_paths(manifest_path: &Path, m: &DatasetManifest) -> Vec<PathBuf> {
    let root = io::image_root(manifest_path, m);
    m.entries.iter().map(|e| root.join(&e.path)).collect()
}

fn cmd_extract(a: &ExtractArgs, ctx: &Ctx) -> Result<()> {
    require(&a.manifest)?;
    let manifest = io::read_manifest(&a.manifest)?;
    if manifest.entries.is_empty() {
        return Err(QcfError::Input(format!(
            "{}: manifest has no entries",
            a.manifest.display()
        )));
    }
    let mut xcfg = ctx.config.extractor.clone().unwrap_or_default();
    match &mut xcfg {
        ExtractorConfig::Toy { dim, projection_seed } => {
            if let Some(d) = a.dim {
                *dim = d;
            }
            if let Some(s) = a.projection_seed {
                *projection_seed = s;
            }
        }
        ExtractorConfig::External { dim, .. } => {
            if let Some(d) = a.dim {
                *dim = d;
            }
        }
    }
    let fx = make_extractor(&xcfg)?;
    let batch = if a.batch == DEFAULT_BATCH_SIZE {
        ctx.config.batch_size.unwrap_or(a.batch)
    } else {
        a.batch
    };
    if batch == 0 {
        return Err(QcfError::Usage("--batch must be at least 1".into()));
    }
    let aug = if a.augment {
        let mut c = ctx.config.augment.clone().unwrap_or_default();
        c.seed = ctx.seed_or(c.seed);
        c.validate()?;
        Some(c)
    } else {
        None
    };

    let paths = manifest_paths(&a.manifest, &manifest);
    let mut set = FeatureSet::new(fx.dim())?;
    for (b, chunk) in paths.chunks(batch).enumerate() {
        let offset = b * batch;
        let imgs = load_all(chunk, |i, img| match &aug {
            Some(c) => Ok(augment(
                &img,
                c,
                &mut rng::stream(c.seed, (offset + i) as u64),
                &ImageJpeg,
            )?),
            None => Ok(resize_bilinear(&img, EVAL_SIZE, EVAL_SIZE)),
        })?;
        let feats = extract_features(&imgs, &fx, batch).map_err(QcfError::Extractor)?;
        for (entry, v) in manifest.entries[offset..offset + chunk.len()].iter().zip(feats) {
            set.push(FeatureRecord::new(
                manifest.record_id(entry),
                entry.label,
                manifest.concept.clone(),
                manifest.source.clone(),
                v,
            ))?;
        }
        ctx.log(format!("extract: {} / {}", set.len(), paths.len()));
    }
    io::write_feature_set(&set, &ctx.path(&a.name))
}

fn cmd_fit_gmm(a: &FitGmmArgs, ctx: &Ctx) -> Result<()> {
    require(&a.features)?;
    let reals = io::read_feature_set(&a.features)?;
    let mut cfg = ctx.config.em.clone().unwrap_or_default();
    cfg.seed = ctx.seed_or(cfg.seed);
    if let Some(m) = a.components {
        cfg.components = m;
    }
    if let Some(n) = a.max_iters {
        cfg.max_iters = n;
    }
    if let Some(t) = a.tol {
        cfg.rel_tol = t;
    }
    if let Some(f) = a.cov_floor {
        cfg.cov_floor = f;
    }
    let (gmm, report) = fit_em(&reals, &cfg)?;
    ctx.log(format!(
        "fit-gmm: {} iterations, converged {}, final mean log-likelihood {}",
        report.iterations,
        report.converged,
        report.trace.last().copied().unwrap_or(f64::NAN)
    ));
    io::write_json(&gmm, &ctx.path("gmm.json"))?;
    io::write_json(
        &FitOutput {
            config: &cfg,
            report: &report,
        },
        &ctx.path("fit_report.json"),
    )
}

#[derive(Serialize)]
struct FitOutput<'a> {
    config: &'a EmConfig,
    report: &'a qcf_core::gmm::FitReport,
}

fn cmd_score(a: &ScoreArgs, ctx: &Ctx) -> Result<()> {
    require(&a.gmm)?;
    require(&a.features)?;
    let gmm: GaussianMixture = io::read_json(&a.gmm)?;
    let set = io::read_feature_set(&a.features)?;
    let scored = score_set(&gmm, &set)?;
    io::write_scores(
        scored.set().iter().map(|r| r.id.as_str()),
        scored.scores(),
        &ctx.path("scores.csv"),
    )
}

/// Scores aligned to the fake set's order, by id.
fn align_scores(fakes: FeatureSet, table: Vec<(String, f64)>, path: &Path) -> Result<ScoredSet> {
    let mut by_id = BTreeMap::new();
    for (id, s) in table {
        if by_id.insert(id.clone(), s).is_some() {
            return Err(QcfError::Input(format!("{}: duplicate id `{id}`", path.display())));
        }
    }
    let mut scores = Vec::with_capacity(fakes.len());
    for r in &fakes {
        match by_id.get(&r.id) {
            Some(&s) => scores.push(s),
            None => return Err(QcfError::Input(format!("{}: no score for `{}`", path.display(), r.id))),
        }
    }
    Ok(ScoredSet::new(fakes, scores)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitProvenance {
    pub tag: String,
    pub strategy: Strategy,
    pub plan: CurationPlan,
    /// SHA-256 of each file's id list.
    pub id_sha256: BTreeMap<String, String>,
}

const SPLIT_FILES: [&str; 4] = ["train_fake.qcfs", "train_real.qcfs", "test_fake.qcfs", "test_real.qcfs"];

fn cmd_curate(a: &CurateArgs, ctx: &Ctx) -> Result<()> {
    for p in [&a.fakes, &a.scores, &a.reals] {
        require(p)?;
    }
    let fakes = io::read_feature_set(&a.fakes)?;
    let reals = io::read_feature_set(&a.reals)?;
    let scored = align_scores(fakes, io::read_scores(&a.scores)?, &a.scores)?;
    let pool = scored.len();
    let base = ctx.config.plan.clone();
    let plan = CurationPlan {
        pool_size: pool,
        test_size: a
            .test_size
            .or(base.as_ref().map(|p| p.test_size))
            .unwrap_or((pool / 10).max(1)),
        k: a.k.or(base.as_ref().map(|p| p.k)).unwrap_or(pool / 2),
        seed: ctx.seed_or(base.as_ref().map_or(0, |p| p.seed)),
        hold_out: match a.hold_out {
            Some(HoldOutArg::Before) => HoldOut::BeforeSelection,
            Some(HoldOutArg::After) => HoldOut::AfterSelection,
            None => base.map(|p| p.hold_out).unwrap_or_default(),
        },
    };
    let strategy = match a.strategy {
        StrategyArg::Qc => Strategy::Qc,
        StrategyArg::Random => Strategy::Random,
    };
    let split = build_curated_split(&scored, &reals, &plan, strategy)?;
    let tag = match &a.tag {
        Some(t) => t.clone(),
        None => scored.set().records()[0].concept.clone(),
    };
    let mut id_sha256 = BTreeMap::new();
    for (name, set) in
        SPLIT_FILES
            .iter()
            .zip([&split.train_fake, &split.train_real, &split.test_fake, &split.test_real])
    {
        io::write_feature_set(set, &ctx.path(name))?;
        id_sha256.insert(name.to_string(), io::id_list_hash(set));
    }
    io::write_scores(
        split.test_fake.iter().map(|r| r.id.as_str()),
        &split.test_fake_scores,
        &ctx.path("test_fake_scores.csv"),
    )?;
    ctx.log(format!(
        "curate: {} train fakes, {} train reals, {} test fakes, {} test reals",
        split.train_fake.len(),
        split.train_real.len(),
        split.test_fake.len(),
        split.test_real.len()
    ));
    io::write_json(
        &SplitProvenance {
            tag,
            strategy,
            plan,
            id_sha256,
        },
        &ctx.path("provenance.json"),
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeMeta {
    pub train_tag: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub config: TrainConfig,
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| QcfError::Usage(format!("--hidden: `{w}` is not a width")))
        })
        .collect()
}

fn cmd_train(a: &TrainArgs, ctx: &Ctx) -> Result<()> {
    require(&a.split)?;
    let prov: SplitProvenance = io::read_json(&a.split.join("provenance.json"))?;
    let fakes = io::read_feature_set(&a.split.join("train_fake.qcfs"))?;
    let reals = io::read_feature_set(&a.split.join("train_real.qcfs"))?;
    let mut cfg = ctx.config.train.clone().unwrap_or_default();
    cfg.seed = ctx.seed_or(cfg.seed);
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(h) = &a.hidden {
        cfg.hidden = parse_hidden(h)?;
    }
    if let Some(lr) = a.lr {
        cfg.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    let (model, log) = train_on(&reals, &fakes, &cfg)?;
    if let Some(last) = log.epochs.last() {
        ctx.log(format!("train: epoch {} mean loss {}", last.epoch, last.mean_loss));
    }
    io::write_json(&model, &ctx.path("probe.json"))?;
    io::write_json(
        &ProbeMeta {
            train_tag: prov.tag,
            strategy: prov.strategy,
            seed: cfg.seed,
            config: cfg,
        },
        &ctx.path("probe_meta.json"),
    )?;
    io::write_text(&log.to_csv(), &ctx.path("training_log.csv"))
}

struct LoadedTest {
    split: TestSplit,
    scored: ScoredSet,
}

fn load_test(dir: &Path) -> Result<LoadedTest> {
    require(dir)?;
    let prov: SplitProvenance = io::read_json(&dir.join("provenance.json"))?;
    let fakes = io::read_feature_set(&dir.join("test_fake.qcfs"))?;
    let reals = io::read_feature_set(&dir.join("test_real.qcfs"))?;
    let scores_path = dir.join("test_fake_scores.csv");
    let scored = align_scores(fakes.clone(), io::read_scores(&scores_path)?, &scores_path)?;
    Ok(LoadedTest {
        split: TestSplit {
            tag: prov.tag,
            fakes,
            reals,
        },
        scored,
    })
}

fn cmd_eval(a: &EvalArgs, ctx: &Ctx) -> Result<()> {
    let mut probes = Vec::with_capacity(a.probes.len());
    for dir in &a.probes {
        require(dir)?;
        let meta: ProbeMeta = io::read_json(&dir.join("probe_meta.json"))?;
        let model: ProbeModel = io::read_json(&dir.join("probe.json"))?;
        probes.push(TrainedProbe {
            train_tag: meta.train_tag,
            strategy: meta.strategy,
            seed: meta.seed,
            model,
        });
    }
    let tests = a.tests.iter().map(|d| load_test(d)).collect::<Result<Vec<_>>>()?;
    let mut seeds: Vec<u64> = probes.iter().map(|p| p.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let splits: Vec<TestSplit> = tests.iter().map(|t| t.split.clone()).collect();
    let report = eval::cross_concept_matrix(&probes, &splits, &seeds)?;
    io::write_text(&report.to_csv(), &ctx.path("report.csv"))?;
    io::write_text(&report.to_markdown(), &ctx.path("report.md"))?;

    let mut csv = String::from("train,strategy,seed,test,quartile,n_fake,n_real,auc,auc_x100\n");
    let mut md = String::new();
    for p in &probes {
        for t in tests.iter().filter(|t| t.split.tag == p.train_tag) {
            let title = format!("{} ({}, seed {}) on {}", p.train_tag, p.strategy, p.seed, t.split.tag);
            md.push_str(&format!("## {title}\n\n"));
            if t.scored.len() < 4 {
                md.push_str(&format!(
                    "skipped: {} test fakes, quartiles need at least 4\n\n",
                    t.scored.len()
                ));
                continue;
            }
            let qs: [QuartileResult; 4] = quartile_eval(&p.model, &t.scored, &t.split.reals)?;
            for q in &qs {
                csv.push_str(&format!(
                    "{},{},{},{},\"{}\",{},{},{:.6},{:.2}\n",
                    p.train_tag,
                    p.strategy,
                    p.seed,
                    t.split.tag,
                    q.label,
                    q.result.n_pos,
                    q.result.n_neg,
                    q.result.auc,
                    q.result.auc * 100.0
                ));
            }
            md.push_str(&eval::quartiles_to_markdown(&qs));
            md.push('\n');
        }
    }
    io::write_text(&csv, &ctx.path("quartiles.csv"))?;
    io::write_text(&md, &ctx.path("quartiles.md"))
}

fn file_token(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn cmd_spectra(a: &SpectraArgs, ctx: &Ctx) -> Result<()> {
    let method = match a.method {
        Some(DenoiseArg::Median3) => DenoiseMethod::Median3,
        Some(DenoiseArg::Gaussian) => DenoiseMethod::Gaussian { sigma: a.sigma },
        Some(DenoiseArg::External) => DenoiseMethod::External {
            model: a.model.clone().unwrap_or_default(),
        },
        None => ctx.config.denoise.clone().unwrap_or_default(),
    };
    if let DenoiseMethod::Gaussian { sigma } = method {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(QcfError::Usage("--sigma must be positive".into()));
        }
    }
    if a.limit == 0 {
        return Err(QcfError::Usage("--limit must be at least 1".into()));
    }
    let mut groups: BTreeMap<(String, String), Vec<PathBuf>> = BTreeMap::new();
    for mp in &a.manifests {
        require(mp)?;
        let m = io::read_manifest(mp)?;
        groups
            .entry((m.concept.clone(), m.source.clone()))
            .or_default()
            .extend(manifest_paths(mp, &m));
    }
    let seed = ctx.seed_or(0);
    for (gi, ((concept, source), mut paths)) in groups.into_iter().enumerate() {
        if paths.len() > a.limit {
            use rand::seq::SliceRandom;
            let mut idx: Vec<usize> = (0..paths.len()).collect();
            idx.shuffle(&mut rng::stream(seed, SPECTRA_STREAM + gi as u64));
            idx.truncate(a.limit);
            idx.sort_unstable();
            paths = idx.into_iter().map(|i| paths[i].clone()).collect();
        }
        let residuals = load_all(&paths, |_, img| {
            let img = match a.size {
                Some(s) => resize_bilinear(&img, s, s),
                None => img,
            };
            let den = denoise(&img, &method)?;
            Ok(residual(&img, &den)?)
        })?;
        let mut stack = ResidualStack::new(format!("{concept}/{source}"));
        for (p, r) in paths.iter().zip(&residuals) {
            stack.accumulate(r).map_err(|e| match e {
                Error::DimMismatch { .. } => QcfError::Input(format!(
                    "{}: image size differs from the rest of {concept}/{source}; pass --size",
                    p.display()
                )),
                e => e.into(),
            })?;
        }
        let mean = stack.mean().expect("at least one residual");
        let spec = fft2_spectrum(mean)?;
        let stem = format!("spectrum_{}_{}", file_token(&concept), file_token(&source));
        save_gray_png(
            spec.width,
            spec.height,
            &spec.render(),
            &ctx.path(&format!("{stem}.png")),
        )?;
        io::write_json(
            &SpectrumMeta {
                count: stack.count(),
                method: method.to_string(),
                dims: [spec.height, spec.width],
                max_magnitude: spec.max_magnitude(),
            },
            &ctx.path(&format!("{stem}.json")),
        )?;
        ctx.log(format!("spectra: {concept}/{source} from {} images", stack.count()));
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs, ctx: &Ctx) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => {
            require(p)?;
            io::read_json(p)?
        }
        None => ctx.config.spec.clone().unwrap_or_default(),
    };
    spec.validate()?;
    let mut cfg = ctx
        .config
        .bench
        .clone()
        .unwrap_or_else(|| ExperimentConfig::scaled_to(&spec));
    if let Some(n) = a.seeds {
        let base = ctx.seed_or(0);
        cfg.seeds = (0..n as u64).map(|i| base + i).collect();
    } else if let Some(base) = ctx.seed {
        let n = cfg.seeds.len() as u64;
        cfg.seeds = (0..n).map(|i| base + i).collect();
    }
    let runs: Vec<_> = cfg
        .seeds
        .par_iter()
        .map(|&s| bench::run_single_seed(&spec, &cfg, s))
        .collect();
    let mut runs = runs.into_iter();
    let report = bench::run_experiment_with(&spec, &cfg, |_| runs.next().expect("one run per seed"))?;
    let s = &report.summary;
    ctx.log(format!(
        "bench: cross qc {:.4} random {:.4} (delta {:+.4}); intra delta {:+.4}",
        s.cross_qc, s.cross_random, s.cross_delta, s.intra_delta
    ));
    io::write_text(&report.to_csv(), &ctx.path("report.csv"))?;
    io::write_text(&report.to_markdown(), &ctx.path("report.md"))?;
    io::write_json(&report.summary, &ctx.path("summary.json"))?;
    io::write_json(&report.diagnostics, &ctx.path("diagnostics.json"))?;
    io::write_json(&report.provenance, &ctx.path("provenance.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_parsing() {
        assert_eq!(parse_hidden("none").unwrap(), Vec::<usize>::new());
        assert_eq!(parse_hidden("").unwrap(), Vec::<usize>::new());
        assert_eq!(parse_hidden("64, 32").unwrap(), vec![64, 32]);
        assert!(parse_hidden("64,x").is_err());
    }

    #[test]
    fn file_tokens_are_path_safe() {
        assert_eq!(file_token("ffhq/style gan2"), "ffhq_style_gan2");
    }

    #[test]
    fn config_rejects_unknown_sections() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 3, "em": {"components": 2}}"#).is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 3}"#).is_err());
    }

    #[test]
    fn parser_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
