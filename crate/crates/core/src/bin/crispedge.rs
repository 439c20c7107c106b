//! Command-line surface: dataset synthesis, training, prediction,
//! evaluation, and classical baselines.
//!
//! Exit codes: 0 success, 2 usage error (argument parsing), 1 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crispedge::classic::{
    canny, gradient_magnitude, laplacian_response, zero_crossings, GradientOperator, GrayImage,
};
use crispedge::config::RunConfig;
use crispedge::data::{gen_synthetic, load_dataset, load_probmap, save_probmap, save_sample};
use crispedge::eval::{default_thresholds, default_tolerance, evaluate, report_to_csv, EvalMode, GroundTruthSet};
use crispedge::net::EdgeNet;
use crispedge::train::{predict_probmap, train};

#[derive(Parser)]
#[command(name = "crispedge", version, about = "Crisp edge detection toolkit")]
struct Cli {
    /// Worker threads for parallel per-image work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    SEval,
    CEval,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> EvalMode {
        match m {
            ModeArg::SEval => EvalMode::SEval,
            ModeArg::CEval => EvalMode::CEval,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineOp {
    Sobel,
    Scharr,
    Roberts,
    Laplacian,
    Canny,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic shape dataset with exact 1-pixel boundaries.
    Synth {
        /// Number of samples.
        n: usize,
        /// Square image size in pixels.
        size: usize,
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the edge network per a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for checkpoints and the training log.
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run eval-mode inference, writing one probability PNG per image.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset root (images/ subdirectory) or a directory of PNGs.
        in_dir: PathBuf,
        out_dir: PathBuf,
    },
    /// Score probability maps against ground truth.
    Eval {
        /// Directory of probability PNGs named <id>.png.
        pred_dir: PathBuf,
        /// Directory of binary maps <id>.png or <id>.a<k>.png.
        gt_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::CEval)]
        mode: ModeArg,
        /// Matching tolerance in pixels; default 0.0075 x image diagonal.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Number of evenly spaced thresholds i/(N+1), i = 1..N.
        #[arg(long, default_value_t = 99)]
        thresholds: usize,
        /// Report CSV path.
        #[arg(long, default_value = "eval_report.csv")]
        out: PathBuf,
    },
    /// Run a classical operator over a directory of images.
    Baseline {
        #[arg(value_enum)]
        op: BaselineOp,
        /// Dataset root (images/ subdirectory) or a directory of PNGs.
        in_dir: PathBuf,
        out_dir: PathBuf,
        /// Gaussian sigma for canny.
        #[arg(long, default_value_t = 1.4)]
        sigma: f64,
        /// Hysteresis thresholds for canny (fractions of max gradient).
        #[arg(long, default_value_t = 0.1)]
        low: f64,
        #[arg(long, default_value_t = 0.3)]
        high: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Cmd) -> Result<(), String> {
    match cmd {
        Cmd::Synth { n, size, out_dir, seed } => {
            let pairs = gen_synthetic(n, size, seed).map_err(|e| e.to_string())?;
            for p in &pairs {
                save_sample(p, &out_dir).map_err(|e| e.to_string())?;
            }
            println!("wrote {} samples to {}", pairs.len(), out_dir.display());
            Ok(())
        }
        Cmd::Train { config, out_dir, seed } => {
            let mut cfg = RunConfig::load(&config).map_err(|e| e.to_string())?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            let data = load_dataset(&cfg.data.train_dir).map_err(|e| e.to_string())?;
            let val = match &cfg.data.val_dir {
                Some(d) => load_dataset(d).map_err(|e| e.to_string())?,
                None => Vec::new(),
            };
            let outcome = train(&cfg, &data, &val, &out_dir).map_err(|e| e.to_string())?;
            println!(
                "trained {} epochs; final loss {:.6}; checkpoint {}",
                outcome.epoch_losses.len(),
                outcome.epoch_losses.last().unwrap(),
                outcome.final_checkpoint.display()
            );
            println!("log: {}", outcome.log_path.display());
            Ok(())
        }
        Cmd::Predict { config, checkpoint, in_dir, out_dir } => {
            let cfg = RunConfig::load(&config).map_err(|e| e.to_string())?;
            let net = EdgeNet::new(cfg.net.clone(), cfg.train.seed).map_err(|e| e.to_string())?;
            let params = net.params();
            params.load(&checkpoint).map_err(|e| e.to_string())?;
            let pairs = load_images(&in_dir)?;
            for (id, pair) in &pairs {
                let p = predict_probmap(&net, pair).map_err(|e| e.to_string())?;
                save_probmap(&p, &out_dir.join(format!("{id}.png"))).map_err(|e| e.to_string())?;
            }
            println!("wrote {} probability maps to {}", pairs.len(), out_dir.display());
            Ok(())
        }
        Cmd::Eval { pred_dir, gt_dir, mode, tolerance, thresholds, out } => {
            let (preds, gts) = load_eval_pairs(&pred_dir, &gt_dir)?;
            if preds.is_empty() {
                return Err(format!("no predictions found in {}", pred_dir.display()));
            }
            let grid: Vec<f64> = if thresholds == 99 {
                default_thresholds()
            } else {
                (1..=thresholds).map(|i| i as f64 / (thresholds + 1) as f64).collect()
            };
            let tol =
                tolerance.unwrap_or_else(|| default_tolerance(preds[0].h, preds[0].w));
            let report =
                evaluate(&preds, &gts, mode.into(), &grid, tol).map_err(|e| e.to_string())?;
            println!(
                "mode={} ODS={:.4} (t={:.2}) OIS={:.4} AP={:.4}",
                report.mode, report.ods_f, report.ods_threshold, report.ois_f, report.ap
            );
            std::fs::write(&out, report_to_csv(&report))
                .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            println!("report: {}", out.display());
            Ok(())
        }
        Cmd::Baseline { op, in_dir, out_dir, sigma, low, high } => {
            let pairs = load_images(&in_dir)?;
            for (id, pair) in &pairs {
                let gray = to_gray(pair);
                let map = match op {
                    BaselineOp::Sobel => run_gradient(&gray, GradientOperator::Sobel)?,
                    BaselineOp::Scharr => run_gradient(&gray, GradientOperator::Scharr)?,
                    BaselineOp::Roberts => run_gradient(&gray, GradientOperator::Roberts)?,
                    BaselineOp::Laplacian => {
                        let zc = zero_crossings(&laplacian_response(&gray), 0.01);
                        binary_to_prob(&zc)
                    }
                    BaselineOp::Canny => {
                        let b = canny(&gray, sigma, low, high).map_err(|e| e.to_string())?;
                        binary_to_prob(&b)
                    }
                };
                save_probmap(&map, &out_dir.join(format!("{id}.png"))).map_err(|e| e.to_string())?;
            }
            println!("wrote {} edge maps to {}", pairs.len(), out_dir.display());
            Ok(())
        }
    }
}

fn run_gradient(gray: &GrayImage, op: GradientOperator) -> Result<GrayImage, String> {
    gradient_magnitude(gray, op).map_err(|e| e.to_string())
}

fn binary_to_prob(b: &crispedge::classic::BinaryMap) -> GrayImage {
    GrayImage::new(b.h, b.w, b.values.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect())
}

fn to_gray(pair: &crispedge::data::SamplePair) -> GrayImage {
    let n = pair.h * pair.w;
    let mut vals = vec![0.0; n];
    for c in 0..3 {
        let ch = pair.channel(c);
        for i in 0..n {
            vals[i] += ch[i] / 3.0;
        }
    }
    GrayImage::new(pair.h, pair.w, vals)
}

/// Accept either a dataset root (with images/) or a flat directory of PNGs.
/// Ground truth is not required; missing gt yields empty placeholder maps.
fn load_images(dir: &Path) -> Result<Vec<(String, crispedge::data::SamplePair)>, String> {
    let img_dir = if dir.join("images").is_dir() { dir.join("images") } else { dir.to_path_buf() };
    let mut ids: Vec<String> = std::fs::read_dir(&img_dir)
        .map_err(|e| format!("cannot read {}: {e}", img_dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_suffix(".png").map(str::to_owned)
        })
        .collect();
    ids.sort();
    ids.into_iter()
        .map(|id| {
            let path = img_dir.join(format!("{id}.png"));
            let img = image::open(&path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?
                .to_rgb8();
            let (w, h) = (img.width() as usize, img.height() as usize);
            let mut data = vec![0.0; 3 * h * w];
            for i in 0..h {
                for j in 0..w {
                    let px = img.get_pixel(j as u32, i as u32);
                    for c in 0..3 {
                        data[c * h * w + i * w + j] = px.0[c] as f64 / 255.0;
                    }
                }
            }
            Ok((
                id.clone(),
                crispedge::data::SamplePair {
                    id,
                    h,
                    w,
                    image: data,
                    gt: GroundTruthSet::single(crispedge::classic::BinaryMap::empty(h, w)),
                },
            ))
        })
        .collect()
}

/// Pair prediction PNGs with ground-truth maps by id.
fn load_eval_pairs(
    pred_dir: &Path,
    gt_dir: &Path,
) -> Result<(Vec<GrayImage>, Vec<GroundTruthSet>), String> {
    let mut ids: Vec<String> = std::fs::read_dir(pred_dir)
        .map_err(|e| format!("cannot read {}: {e}", pred_dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_suffix(".png").map(str::to_owned)
        })
        .collect();
    ids.sort();
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for id in ids {
        preds.push(
            load_probmap(&pred_dir.join(format!("{id}.png"))).map_err(|e| e.to_string())?,
        );
        let single = gt_dir.join(format!("{id}.png"));
        let mut maps = Vec::new();
        if single.is_file() {
            maps.push(load_binary(&single)?);
        } else {
            for k in 0.. {
                let p = gt_dir.join(format!("{id}.a{k}.png"));
                if !p.is_file() {
                    break;
                }
                maps.push(load_binary(&p)?);
            }
        }
        if maps.is_empty() {
            return Err(format!("no ground truth for id '{id}' in {}", gt_dir.display()));
        }
        gts.push(GroundTruthSet::new(maps).map_err(|e| e.to_string())?);
    }
    Ok((preds, gts))
}

fn load_binary(path: &Path) -> Result<crispedge::classic::BinaryMap, String> {
    let img = image::open(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut vals = vec![false; h * w];
    for i in 0..h {
        for j in 0..w {
            vals[i * w + j] = img.get_pixel(j as u32, i as u32).0[0] > 127;
        }
    }
    Ok(crispedge::classic::BinaryMap::new(h, w, vals))
}
