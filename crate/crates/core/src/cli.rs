//! Command-line front end. [`run`] executes a parsed command and
//! [`main_with_args`] maps errors to exit codes.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::alignnet::{map_embeddings, train_with_hook, EpochRecord, MlpParams, TrainConfig, TrainReport};
use crate::dataio::{
    generate_synthetic, load_checkpoint, load_embeddings, load_features, load_split, random_split,
    save_checkpoint, save_embeddings, save_features, save_split, ClassEmbeddingTable,
    LabeledFeatureSet, SynthConfig, ZslSplit,
};
use crate::error::{Result, VaweError};
use crate::miner::mine_triplets;
use crate::neighborhood::{consistency, detect_hubs, neighbor_lists, visual_signatures, VisualSignatureTable};
use crate::numerics::Rng;
use crate::zsl::{run_zsl, ConseParams, EszslParams, EvalReport, TargetEncoding, ZslMethod};

pub const SCHEMA_VERSION: u32 = 1;

/// Salt separating the split stream from the generator stream.
const SPLIT_SALT: u64 = 0x5EED_5917;

#[derive(Debug, Parser)]
#[command(name = "vawe", version, about = "Visually aligned word embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate a synthetic dataset (features, embeddings, signatures, split).
    Synth(SynthCmd),
    /// Neighborhood consistency between embeddings and visual signatures.
    Consistency(ConsistencyCmd),
    /// Dump one epoch of disagreement triplets as `a p n` lines.
    Mine(MineCmd),
    /// Train the mapping network on the seen classes.
    Train(TrainCmd),
    /// Map an embedding table through a trained checkpoint.
    Map(MapCmd),
    /// Fit a zero-shot model on seen classes and score unseen ones.
    ZslEval(ZslEvalCmd),
    /// Run every stage end to end and emit a comparison report.
    Pipeline(PipelineCmd),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthFlags {
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub images_per_class: Option<usize>,
    #[arg(long)]
    pub visual_dim: Option<usize>,
    #[arg(long)]
    pub semantic_dim: Option<usize>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub discrepancy_rho: Option<f64>,
    /// Rank of the class-center subspace (0: full visual dimension).
    #[arg(long)]
    pub visual_rank: Option<usize>,
    /// Rank of the discrepancy (0: full semantic dimension).
    #[arg(long)]
    pub discrepancy_rank: Option<usize>,
    /// Number of classes held out as unseen.
    #[arg(long, default_value_t = 10)]
    pub num_unseen: usize,
}

impl SynthFlags {
    fn config(&self, seed: u64) -> SynthConfig {
        let d = SynthConfig::default();
        let rank = |v: Option<usize>, dflt: Option<usize>| match v {
            Some(0) => None,
            Some(r) => Some(r),
            None => dflt,
        };
        SynthConfig {
            num_classes: self.num_classes.unwrap_or(d.num_classes),
            images_per_class: self.images_per_class.unwrap_or(d.images_per_class),
            visual_dim: self.visual_dim.unwrap_or(d.visual_dim),
            semantic_dim: self.semantic_dim.unwrap_or(d.semantic_dim),
            noise_sigma: self.noise_sigma.unwrap_or(d.noise_sigma),
            discrepancy_rho: self.discrepancy_rho.unwrap_or(d.discrepancy_rho),
            visual_rank: rank(self.visual_rank, d.visual_rank),
            discrepancy_rank: rank(self.discrepancy_rank, d.discrepancy_rank),
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub out_dim: Option<usize>,
    /// Both hidden widths, as `H1,H2`.
    #[arg(long, value_parser = parse_hidden)]
    pub hidden: Option<[usize; 2]>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub min_delta: Option<f64>,
    #[arg(long)]
    pub norm_eps: Option<f64>,
    #[arg(long)]
    pub recompute_ns_per_epoch: bool,
}

fn parse_hidden(s: &str) -> std::result::Result<[usize; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected H1,H2")?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok([p(a)?, p(b)?])
}

impl TrainFlags {
    fn config(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            k1: self.k1.unwrap_or(d.k1),
            k2: self.k2.or(d.k2),
            alpha: self.alpha.unwrap_or(d.alpha),
            lambda: self.lambda.unwrap_or(d.lambda),
            out_dim: self.out_dim.unwrap_or(d.out_dim),
            hidden: self.hidden.or(d.hidden),
            lr: self.lr.unwrap_or(d.lr),
            momentum: self.momentum.unwrap_or(d.momentum),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            patience: self.patience.unwrap_or(d.patience),
            min_delta: self.min_delta.unwrap_or(d.min_delta),
            norm_eps: self.norm_eps.unwrap_or(d.norm_eps),
            seed,
            recompute_ns_per_epoch: self.recompute_ns_per_epoch || d.recompute_ns_per_epoch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    /// +1 / −1 targets.
    PlusMinusOne,
    /// 1 / 0 targets.
    ZeroOne,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ZslFlags {
    /// ESZSL feature-side ridge weight.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// ESZSL embedding-side ridge weight.
    #[arg(long)]
    pub lam: Option<f64>,
    #[arg(long, value_enum)]
    pub encoding: Option<EncodingArg>,
    /// ConSE number of combined seen classes.
    #[arg(long)]
    pub t_top: Option<usize>,
    /// ConSE softmax temperature.
    #[arg(long)]
    pub temperature: Option<f64>,
}

impl ZslFlags {
    fn eszsl(&self) -> EszslParams {
        let d = EszslParams::default();
        EszslParams {
            gamma: self.gamma.unwrap_or(d.gamma),
            lam: self.lam.unwrap_or(d.lam),
            encoding: match self.encoding {
                Some(EncodingArg::PlusMinusOne) => TargetEncoding::PlusMinusOne,
                Some(EncodingArg::ZeroOne) => TargetEncoding::ZeroOne,
                None => d.encoding,
            },
        }
    }

    fn conse(&self) -> ConseParams {
        let d = ConseParams::default();
        ConseParams {
            t_top: self.t_top.or(d.t_top),
            temperature: self.temperature.unwrap_or(d.temperature),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[command(flatten)]
    pub synth: SynthFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving features.txt, embeddings.txt, signatures.txt and split.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("visual").required(true).args(["features", "signatures"]))]
pub struct ConsistencyCmd {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Visual signatures in embedding-file format.
    #[arg(long)]
    pub signatures: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct MineCmd {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Restrict to the seen classes of this split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k1: usize,
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON-lines training report (default: stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Stream per-epoch rows to stderr.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct MapCmd {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ZslEvalCmd {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    #[command(flatten)]
    pub zsl: ZslFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Eszsl,
    Conse,
}

impl From<MethodArg> for ZslMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Eszsl => ZslMethod::Eszsl,
            MethodArg::Conse => ZslMethod::Conse,
        }
    }
}

#[derive(Debug, Args)]
pub struct PipelineCmd {
    /// Directory for intermediates and report.json.
    #[arg(long)]
    pub workdir: PathBuf,
    /// Rerun the configuration stored in an earlier report.
    #[arg(long, conflicts_with_all = ["embeddings", "features", "split"])]
    pub replay: Option<PathBuf>,
    /// Use existing data instead of generating it (needs --features and --split too).
    #[arg(long, requires_all = ["features", "split"])]
    pub embeddings: Option<PathBuf>,
    #[arg(long, requires_all = ["embeddings", "split"])]
    pub features: Option<PathBuf>,
    #[arg(long, requires_all = ["embeddings", "features"])]
    pub split: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub zsl: ZslFlags,
    /// Neighborhood size for the consistency figures.
    #[arg(long, default_value_t = 10)]
    pub consistency_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub verbose: bool,
}

/// Where the pipeline's data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic { synth: SynthConfig, num_unseen: usize },
    Files { embeddings: PathBuf, features: PathBuf, split: PathBuf },
}

/// Everything needed to reproduce a pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub consistency_k: usize,
    pub train: TrainConfig,
    pub eszsl: EszslParams,
    pub conse: ConseParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPair {
    pub k: usize,
    pub raw: f64,
    pub vawe: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZslPair {
    pub raw: EvalReport,
    pub vawe: EvalReport,
    /// Change in mean per-class accuracy.
    pub delta_mean_per_class: f64,
    pub delta_overall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub stop_reason: String,
    pub best_epoch: Option<usize>,
    pub best_mean_loss: Option<f64>,
    pub final_consistency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub config: RunConfig,
    /// Over all classes, seen and unseen.
    pub consistency: ConsistencyPair,
    pub train: TrainSummary,
    /// Set when training stopped before any update and the raw embeddings
    /// were used as the aligned ones.
    pub vawe_is_raw: bool,
    pub eszsl: ZslPair,
    pub conse: ZslPair,
}

fn check_same_classes(a: &[String], b: &[String], what: &str) -> Result<()> {
    let sa: BTreeSet<&String> = a.iter().collect();
    let sb: BTreeSet<&String> = b.iter().collect();
    if sa != sb {
        let only_a = sa.difference(&sb).next();
        let only_b = sb.difference(&sa).next();
        return Err(VaweError::Protocol(format!(
            "class sets differ between {what} (e.g. {:?} / {:?})",
            only_a, only_b
        )));
    }
    Ok(())
}

/// Seen/unseen split drawn from the same seed as the generator but on a
/// separate stream.
pub fn synthetic_split(cfg: &SynthConfig, names: &[String], num_unseen: usize) -> Result<ZslSplit> {
    random_split(names, num_unseen, &mut Rng::new(cfg.seed ^ SPLIT_SALT))
}

/// Labels must belong to the split, and the embedding table must cover it.
fn check_split(split: &ZslSplit, emb: &ClassEmbeddingTable, feats: &LabeledFeatureSet) -> Result<()> {
    let known: BTreeSet<&str> = split.seen().iter().chain(split.unseen()).map(String::as_str).collect();
    if let Some(l) = feats.class_labels().iter().find(|l| !known.contains(l.as_str())) {
        return Err(VaweError::Protocol(format!("feature label `{l}` is not in the split")));
    }
    for c in split.seen().iter().chain(split.unseen()) {
        if emb.index_of(c).is_none() {
            return Err(VaweError::MissingClass(format!("split class `{c}` has no embedding")));
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| VaweError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| VaweError::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Consistency at `k` of `emb` against `signatures`, over the classes of `emb`.
pub fn table_consistency(emb: &ClassEmbeddingTable, signatures: &VisualSignatureTable, k: usize) -> Result<f64> {
    let sig = signatures.subset(emb.class_names())?;
    consistency(&neighbor_lists(sig.signatures(), k)?, &neighbor_lists(emb.vectors(), k)?)
}

fn cmd_synth(c: &SynthCmd) -> Result<String> {
    let cfg = c.synth.config(c.seed);
    let data = generate_synthetic(&cfg)?;
    let split = synthetic_split(&cfg, data.embeddings.class_names(), c.synth.num_unseen)?;
    let sig = visual_signatures(&data.features, data.embeddings.class_names())?;
    create_dir(&c.out_dir)?;
    save_features(&data.features, c.out_dir.join("features.txt"))?;
    save_embeddings(&data.embeddings, c.out_dir.join("embeddings.txt"))?;
    save_embeddings(&sig.to_table()?, c.out_dir.join("signatures.txt"))?;
    save_split(&split, c.out_dir.join("split.txt"))?;
    to_json(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "num_unseen": c.synth.num_unseen,
    }))
}

fn cmd_consistency(c: &ConsistencyCmd) -> Result<String> {
    let emb = load_embeddings(&c.embeddings)?;
    let sig = match (&c.features, &c.signatures) {
        (Some(f), _) => {
            let feats = load_features(f)?;
            check_same_classes(emb.class_names(), &feats.classes(), "embeddings and features")?;
            visual_signatures(&feats, emb.class_names())?
        }
        (None, Some(s)) => {
            let t = load_embeddings(s)?;
            check_same_classes(emb.class_names(), t.class_names(), "embeddings and signatures")?;
            VisualSignatureTable::new(t.class_names().to_vec(), t.vectors().clone())?
        }
        (None, None) => return Err(VaweError::Config("need --features or --signatures".into())),
    };
    let value = table_consistency(&emb, &sig, c.k)?;
    to_json(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "k": c.k,
        "num_classes": emb.len(),
        "consistency": value,
        "embeddings": c.embeddings,
        "features": c.features,
        "signatures": c.signatures,
    }))
}

/// Seen-class embeddings and signatures, in split order.
fn seen_inputs(
    emb: &ClassEmbeddingTable,
    feats: &LabeledFeatureSet,
    classes: &[String],
) -> Result<(ClassEmbeddingTable, VisualSignatureTable)> {
    let e = emb.subset(classes)?;
    let s = visual_signatures(&feats.restrict_to(classes), classes)?;
    Ok((e, s))
}

fn cmd_mine(c: &MineCmd) -> Result<String> {
    let emb = load_embeddings(&c.embeddings)?;
    let feats = load_features(&c.features)?;
    let classes = match &c.split {
        Some(p) => {
            let split = load_split(p)?;
            check_split(&split, &emb, &feats)?;
            split.seen().to_vec()
        }
        None => {
            check_same_classes(emb.class_names(), &feats.classes(), "embeddings and features")?;
            emb.class_names().to_vec()
        }
    };
    let (e, s) = seen_inputs(&emb, &feats, &classes)?;
    let cfg = TrainConfig { k1: c.k1, k2: c.k2, ..TrainConfig::default() };
    cfg.validate(e.len())?;
    let k2 = cfg.resolved_k2(e.len());
    let hubs = detect_hubs(&e, c.k1)?;
    let batch = mine_triplets(
        &neighbor_lists(s.signatures(), c.k1)?,
        &neighbor_lists(s.signatures(), k2)?,
        &neighbor_lists(e.vectors(), c.k1)?,
        &neighbor_lists(e.vectors(), k2)?,
        &hubs,
        &mut Rng::new(c.seed),
    )?;
    let text = batch.to_text();
    match &c.out {
        Some(p) => {
            write_text(p, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn epoch_printer(verbose: bool) -> impl FnMut(&EpochRecord) {
    move |r: &EpochRecord| {
        if verbose {
            if let Ok(s) = serde_json::to_string(r) {
                eprintln!("{s}");
            }
        }
    }
}

fn cmd_train(c: &TrainCmd) -> Result<String> {
    let emb = load_embeddings(&c.embeddings)?;
    let feats = load_features(&c.features)?;
    let split = load_split(&c.split)?;
    check_split(&split, &emb, &feats)?;
    let cfg = c.train.config(c.seed);
    let (e, s) = seen_inputs(&emb, &feats, split.seen())?;
    let mut hook = epoch_printer(c.verbose);
    let (params, report) = train_with_hook(&e, &s, &cfg, Some(&mut hook))?;
    save_checkpoint(&params, &cfg, &c.checkpoint)?;
    let header = serde_json::to_string(&serde_json::json!({
        "kind": "config",
        "schema_version": SCHEMA_VERSION,
        "train": cfg,
        "embeddings": c.embeddings,
        "features": c.features,
        "split": c.split,
    }))?;
    let text = format!("{header}\n{}", report.to_json_lines()?);
    match &c.report {
        Some(p) => {
            write_text(p, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn cmd_map(c: &MapCmd) -> Result<String> {
    let (params, cfg) = load_checkpoint(&c.checkpoint)?;
    let emb = load_embeddings(&c.embeddings)?;
    let mapped = map_embeddings(&params, &emb, cfg.norm_eps)?;
    save_embeddings(&mapped, &c.out)?;
    Ok(String::new())
}

struct ZslInputs {
    x_seen: LabeledFeatureSet,
    x_unseen: LabeledFeatureSet,
}

fn zsl_inputs(split: &ZslSplit, feats: &LabeledFeatureSet) -> ZslInputs {
    ZslInputs {
        x_seen: feats.restrict_to(split.seen()),
        x_unseen: feats.restrict_to(split.unseen()),
    }
}

fn eval_pair(
    method: ZslMethod,
    split: &ZslSplit,
    inputs: &ZslInputs,
    emb: &ClassEmbeddingTable,
    eszsl: &EszslParams,
    conse: &ConseParams,
) -> Result<EvalReport> {
    run_zsl(
        method,
        &inputs.x_seen,
        &emb.subset(split.seen())?,
        &inputs.x_unseen,
        &emb.subset(split.unseen())?,
        eszsl,
        conse,
    )
}

#[derive(Serialize)]
struct ZslEvalOutput<'a> {
    schema_version: u32,
    embeddings: &'a Path,
    features: &'a Path,
    split: &'a Path,
    #[serde(flatten)]
    report: EvalReport,
}

fn cmd_zsl_eval(c: &ZslEvalCmd) -> Result<String> {
    let emb = load_embeddings(&c.embeddings)?;
    let feats = load_features(&c.features)?;
    let split = load_split(&c.split)?;
    check_split(&split, &emb, &feats)?;
    let inputs = zsl_inputs(&split, &feats);
    let report = eval_pair(c.method.into(), &split, &inputs, &emb, &c.zsl.eszsl(), &c.zsl.conse())?;
    to_json(&ZslEvalOutput {
        schema_version: SCHEMA_VERSION,
        embeddings: &c.embeddings,
        features: &c.features,
        split: &c.split,
        report,
    })
}

impl PipelineCmd {
    fn run_config(&self) -> Result<RunConfig> {
        if let Some(p) = &self.replay {
            let text = fs::read_to_string(p).map_err(|e| VaweError::io(p, e))?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| VaweError::Parse {
                path: Some(p.clone()),
                line: e.line(),
                msg: e.to_string(),
            })?;
            let cfg = v.get("config").cloned().ok_or_else(|| {
                VaweError::Config(format!("{} has no `config` object", p.display()))
            })?;
            return serde_json::from_value(cfg).map_err(|e| VaweError::Config(format!("bad stored config: {e}")));
        }
        let data = match (&self.embeddings, &self.features, &self.split) {
            (Some(e), Some(f), Some(s)) => DataSource::Files {
                embeddings: e.clone(),
                features: f.clone(),
                split: s.clone(),
            },
            _ => DataSource::Synthetic {
                synth: self.synth.config(self.seed),
                num_unseen: self.synth.num_unseen,
            },
        };
        Ok(RunConfig {
            data,
            consistency_k: self.consistency_k,
            train: self.train.config(self.seed),
            eszsl: self.zsl.eszsl(),
            conse: self.zsl.conse(),
        })
    }
}

/// Runs every stage for `cfg`, keeping intermediates in `workdir`.
pub fn run_pipeline(
    cfg: &RunConfig,
    workdir: &Path,
    hook: &mut dyn FnMut(&EpochRecord),
) -> Result<(PipelineReport, MlpParams)> {
    create_dir(workdir)?;
    let (emb, feats, split) = match &cfg.data {
        DataSource::Synthetic { synth, num_unseen } => {
            let data = generate_synthetic(synth)?;
            let split = synthetic_split(synth, data.embeddings.class_names(), *num_unseen)?;
            save_features(&data.features, workdir.join("features.txt"))?;
            save_embeddings(&data.embeddings, workdir.join("embeddings.txt"))?;
            save_split(&split, workdir.join("split.txt"))?;
            (data.embeddings, data.features, split)
        }
        DataSource::Files { embeddings, features, split } => {
            (load_embeddings(embeddings)?, load_features(features)?, load_split(split)?)
        }
    };
    check_split(&split, &emb, &feats)?;
    let all: Vec<String> = split.seen().iter().chain(split.unseen()).cloned().collect();
    let emb = emb.subset(&all)?;
    let signatures = visual_signatures(&feats, &all)?;
    save_embeddings(&signatures.to_table()?, workdir.join("signatures.txt"))?;

    let k = cfg.consistency_k;
    let raw_consistency = table_consistency(&emb, &signatures, k)?;

    let (e_seen, s_seen) = seen_inputs(&emb, &feats, split.seen())?;
    let (params, report): (MlpParams, TrainReport) = train_with_hook(&e_seen, &s_seen, &cfg.train, Some(hook))?;
    save_checkpoint(&params, &cfg.train, workdir.join("checkpoint.bin"))?;
    write_text(&workdir.join("train_report.jsonl"), &report.to_json_lines()?)?;

    // No step was taken, so the raw table already agrees with the visual
    // neighborhoods and an untrained network would only scramble it.
    let vawe_is_raw = report.best_epoch.is_none();
    let vawe = if vawe_is_raw {
        emb.clone()
    } else {
        map_embeddings(&params, &emb, cfg.train.norm_eps)?
    };
    save_embeddings(&vawe, workdir.join("vawe.txt"))?;
    let vawe_consistency = table_consistency(&vawe, &signatures, k)?;

    let inputs = zsl_inputs(&split, &feats);
    let pair = |method| -> Result<ZslPair> {
        let raw = eval_pair(method, &split, &inputs, &emb, &cfg.eszsl, &cfg.conse)?;
        let vawe = eval_pair(method, &split, &inputs, &vawe, &cfg.eszsl, &cfg.conse)?;
        Ok(ZslPair {
            delta_mean_per_class: vawe.mean_per_class_accuracy - raw.mean_per_class_accuracy,
            delta_overall: vawe.overall_accuracy - raw.overall_accuracy,
            raw,
            vawe,
        })
    };
    let report = PipelineReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        consistency: ConsistencyPair {
            k,
            raw: raw_consistency,
            vawe: vawe_consistency,
            delta: vawe_consistency - raw_consistency,
        },
        train: TrainSummary {
            epochs: report.epochs.len(),
            stop_reason: report.stop_reason.as_str().to_string(),
            best_epoch: report.best_epoch,
            best_mean_loss: report.best_mean_loss,
            final_consistency: report.final_consistency,
        },
        vawe_is_raw,
        eszsl: pair(ZslMethod::Eszsl)?,
        conse: pair(ZslMethod::Conse)?,
    };
    write_text(&workdir.join("report.json"), &to_json(&report)?)?;
    Ok((report, params))
}

fn cmd_pipeline(c: &PipelineCmd) -> Result<String> {
    let cfg = c.run_config()?;
    let mut hook = epoch_printer(c.verbose);
    let (report, _) = run_pipeline(&cfg, &c.workdir, &mut hook)?;
    to_json(&report)
}

/// Executes a parsed command and returns what should go to stdout.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Synth(c) => cmd_synth(c),
        Command::Consistency(c) => cmd_consistency(c),
        Command::Mine(c) => cmd_mine(c),
        Command::Train(c) => cmd_train(c),
        Command::Map(c) => cmd_map(c),
        Command::ZslEval(c) => cmd_zsl_eval(c),
        Command::Pipeline(c) => cmd_pipeline(c),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures print a single `error[category]: message` line on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {}", one_line(first));
            return 2;
        }
    };
    match run(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return 1;
            }
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), one_line(&e.to_string()));
            e.exit_code()
        }
    }
}
