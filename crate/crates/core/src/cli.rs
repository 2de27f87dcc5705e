//! Command-line front end. Every command is a thin wrapper over library
//! calls; reports are JSON with fixed key order.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{self, StoredScene};
use crate::losses::{total_loss, LossConfig, LossReport, LossWeights};
use crate::metrics::{evaluate_scene, EvalConfig, MetricReport};
use crate::neural::{forward, ModelConfig, ModelInputs, ModelWeights};
use crate::synth::{gen_scene, SynthParams};
use crate::viewgraph::{
    build_adjacency, covisibility, random_walk_sample, CovisGraph, InputConfig, ViewInputs,
    DEFAULT_COVIS_THRESHOLD, DEFAULT_REL_DEPTH_TOL,
};

#[derive(Debug, Parser)]
#[command(
    name = "mapfactor",
    version,
    about = "Factored multi-view metric scene toolkit"
)]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an analytic sphere scene with exact ground truth.
    Synth(SynthArgs),
    /// Pairwise covisibility matrix of a scene.
    Covis(CovisArgs),
    /// Sample a connected view set from a covisibility matrix.
    Sample(SampleArgs),
    /// Evaluate the training losses of a prediction.
    Loss(LossArgs),
    /// Evaluate benchmark metrics of a prediction.
    Eval(EvalArgs),
    /// Run the reference network on a scene.
    Forward(ForwardArgs),
    /// Write seeded initial network weights.
    InitWeights(InitWeightsArgs),
    /// Export metric world points as binary PLY.
    ExportPly(ExportPlyArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub views: usize,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long, default_value = "64x64", value_parser = parse_size)]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 4)]
    pub spheres: usize,
    #[arg(long, default_value_t = 1.0)]
    pub metric_scale: f64,
    #[arg(long)]
    pub no_ground: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CovisArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REL_DEPTH_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub covis: PathBuf,
    #[arg(long, default_value_t = DEFAULT_COVIS_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Enable the normal and gradient-matching terms.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub align_points: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Model config JSON; missing fields take toy defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Weights directory from `init-weights`; otherwise weights are seeded.
    #[arg(long, conflicts_with = "config")]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated: rays, pose, depth, sparse-depth, metric. Empty means
    /// images only.
    #[arg(long, default_value = "")]
    pub inputs: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InitWeightsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportPlyArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(w)?, p(h)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Modalities {
    pub rays: bool,
    pub pose: bool,
    pub depth: bool,
    pub sparse_depth: bool,
    pub metric: bool,
}

pub fn parse_modalities(s: &str) -> Result<Modalities> {
    let mut m = Modalities::default();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match tok {
            "rays" => m.rays = true,
            "pose" => m.pose = true,
            "depth" => m.depth = true,
            "sparse-depth" => m.sparse_depth = true,
            "metric" => m.metric = true,
            other => return Err(Error::InvalidModality(other.to_string())),
        }
    }
    if m.depth && m.sparse_depth {
        return Err(Error::InvalidArgument(
            "choose one of depth and sparse-depth".into(),
        ));
    }
    Ok(m)
}

impl Modalities {
    pub fn input_config(&self, n_views: usize) -> InputConfig {
        let depth = self.depth || self.sparse_depth;
        let v = ViewInputs {
            rays_given: self.rays,
            pose_given: self.pose,
            depth_given: depth,
            depth_sparse: self.sparse_depth,
        };
        InputConfig {
            views: vec![v; n_views],
            metric_pose_scale_given: self.metric && self.pose,
            metric_depth_scale_given: self.metric && depth,
            ..Default::default()
        }
    }
}

#[derive(Serialize)]
struct CovisOutput<'a> {
    rel_depth_tol: f64,
    n_views: usize,
    fraction: &'a [Vec<f64>],
}

#[derive(serde::Deserialize)]
struct CovisInput {
    fraction: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SampleOutput {
    threshold: f64,
    n: usize,
    seed: u64,
    views: Vec<usize>,
}

#[derive(Serialize)]
struct RobustEcho {
    alpha: f64,
    c: f64,
}

#[derive(Serialize)]
struct LossConfigEcho {
    robust: RobustEcho,
    exclude_top: f64,
    alpha_conf: f64,
    gm_scales: usize,
    synthetic: bool,
}

#[derive(Serialize)]
struct LossOutput {
    config: LossConfigEcho,
    weights: LossWeights,
    report: LossReport,
}

#[derive(Serialize)]
struct EvalConfigEcho {
    align_points: bool,
    tau_ratio: f64,
    auc_threshold_deg: f64,
}

#[derive(Serialize)]
struct EvalOutput {
    config: EvalConfigEcho,
    report: MetricReport,
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => io::write_json(p, value),
        None => {
            print!("{}", io::to_json_string(value)?);
            Ok(())
        }
    }
}

fn load_model_config(path: Option<&Path>) -> Result<ModelConfig> {
    let cfg = match path {
        Some(p) => io::read_json(p)?,
        None => ModelConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn loss_report(gt: &Path, pred: &Path, synthetic: bool) -> Result<(LossConfig, LossReport)> {
    let g = io::read_sample(gt)?;
    let p = io::read_factored(pred)?;
    let cfg = LossConfig {
        synthetic,
        ..Default::default()
    };
    let r = total_loss(&p, &g, &cfg)?;
    Ok((cfg, r))
}

pub fn execute(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::InvalidArgument("--jobs must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(a) => {
            let params = SynthParams {
                n_views: a.views,
                width: a.size.0,
                height: a.size.1,
                n_spheres: a.spheres,
                seed: a.seed,
                metric_scale: a.metric_scale,
                ground_plane: !a.no_ground,
            };
            let (_, sample) = gen_scene(&params)?;
            io::write_sample(&a.out, &sample)
        }
        Command::Covis(a) => {
            let s = io::read_sample(&a.scene)?;
            let g = covisibility(&s, a.tol)?;
            emit(
                a.out.as_deref(),
                &CovisOutput {
                    rel_depth_tol: a.tol,
                    n_views: g.n,
                    fraction: &g.fraction,
                },
            )
        }
        Command::Sample(a) => {
            let input: CovisInput = io::read_json(&a.covis)?;
            let g = CovisGraph::new(input.fraction)?;
            let views = random_walk_sample(&build_adjacency(&g, a.threshold), a.n, a.seed)?;
            emit(
                a.out.as_deref(),
                &SampleOutput {
                    threshold: a.threshold,
                    n: a.n,
                    seed: a.seed,
                    views,
                },
            )
        }
        Command::Loss(a) => {
            let (cfg, report) = loss_report(&a.gt, &a.pred, a.synthetic)?;
            emit(
                a.out.as_deref(),
                &LossOutput {
                    config: LossConfigEcho {
                        robust: RobustEcho {
                            alpha: cfg.robust.alpha,
                            c: cfg.robust.c,
                        },
                        exclude_top: cfg.exclude_top,
                        alpha_conf: cfg.alpha_conf,
                        gm_scales: cfg.gm_scales,
                        synthetic: cfg.synthetic,
                    },
                    weights: cfg.weights,
                    report,
                },
            )
        }
        Command::Eval(a) => {
            let g = io::read_sample(&a.gt)?;
            let p = io::read_factored(&a.pred)?;
            let cfg = EvalConfig {
                align_points: a.align_points,
                ..Default::default()
            };
            let report = evaluate_scene(&p, &g, &cfg)?;
            emit(
                a.out.as_deref(),
                &EvalOutput {
                    config: EvalConfigEcho {
                        align_points: cfg.align_points,
                        tau_ratio: cfg.tau_ratio,
                        auc_threshold_deg: cfg.auc_threshold_deg,
                    },
                    report,
                },
            )
        }
        Command::Forward(a) => {
            let modalities = parse_modalities(&a.inputs)?;
            let weights = match &a.weights {
                Some(dir) => io::load_weights(dir)?,
                None => ModelWeights::init(load_model_config(a.config.as_deref())?, a.seed)?,
            };
            let stored = io::read_scene(&a.scene)?;
            let sample = stored.to_sample(&a.scene)?;
            let cfg = modalities.input_config(sample.n_views());
            let inputs = ModelInputs::from_sample(&sample, &cfg, a.seed)?;
            let out = forward(&inputs, &weights)?.to_factored_scene();
            let images = stored.images();
            io::write_scene(
                &a.out,
                &StoredScene::from_factored(&out, images.as_deref())?,
            )
        }
        Command::InitWeights(a) => {
            let w = ModelWeights::init(load_model_config(a.config.as_deref())?, a.seed)?;
            io::save_weights(&a.out, &w)
        }
        Command::ExportPly(a) => {
            let stored = io::read_scene(&a.scene)?;
            let images = stored.images();
            let pts = io::scene_points(&stored.to_factored(), images.as_deref())?;
            io::write_ply(&a.out, &pts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modality_parsing() {
        assert_eq!(parse_modalities("").unwrap(), Modalities::default());
        let m = parse_modalities("rays, pose,metric").unwrap();
        assert!(m.rays && m.pose && m.metric && !m.depth);
        let e = parse_modalities("rays,lidar").unwrap_err();
        assert_eq!(e.category(), "invalid-modality");
        assert!(parse_modalities("depth,sparse-depth").is_err());
        let c = parse_modalities("sparse-depth,metric")
            .unwrap()
            .input_config(2);
        assert!(c
            .views
            .iter()
            .all(|v| v.depth_given && v.depth_sparse && !v.rays_given));
        assert!(c.metric_depth_scale_given && !c.metric_pose_scale_given);
    }

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("64x48").unwrap(), (64, 48));
        assert!(parse_size("64").is_err());
        assert!(parse_size("ax4").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
