//! Command implementations behind the `salsynth` binary.
//!
//! Every command takes a validated [`RunConfig`] (or explicit paths) and writes plain files:
//! PNG, CSV, SVG, JSON and JSONL.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use salsynth_core::config::{PseudoConfig, RoundSchedule, ShiftConfig, TrainConfig};
use salsynth_core::imaging::{decode_png, encode_gray, BinaryMask, PngImage, ResizeBilinear};
use salsynth_core::metrics::{evaluate, load_eval_samples, EvalResult};
use salsynth_core::model::pipeline::{history_csv, EVAL_SPLIT};
use salsynth_core::model::{
    decode_checkpoint, encode_checkpoint, run_pipeline, PipelineData, PipelineOutput, Predictor,
    PredictorParams, RoundArtifacts, RoundObserver, Sample,
};
use salsynth_core::synth::assets::ProceduralSpec;
use salsynth_core::synth::stats::size_histogram;
use salsynth_core::synth::store::{load_asset_dirs, write_assets, write_dataset, MANIFEST_FILE};
use salsynth_core::synth::{
    center_bias_map, generate_dataset, generate_target_domain, object_size_ratio,
    procedural_assets, AssetSource, LabelAccess, Split, SplitReader,
};
use salsynth_core::upl::TargetImage;

pub const SOURCE_DIR: &str = "source";
pub const TARGET_DIR: &str = "target";
pub const CONFIG_ECHO: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Holds `foregrounds/` and `backgrounds/`.
    pub assets: PathBuf,
    /// Holds the `source/` and `target/` datasets.
    pub datasets: PathBuf,
    pub run_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            assets: "work/assets".into(),
            datasets: "work/data".into(),
            run_dir: "work/run".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetOptions {
    pub n_fg: usize,
    pub n_bg: usize,
    pub fg_size: usize,
    pub bg_height: usize,
    pub bg_width: usize,
}

impl Default for AssetOptions {
    fn default() -> Self {
        let spec = ProceduralSpec::default();
        Self {
            n_fg: 1000,
            n_bg: 1000,
            fg_size: spec.fg_size,
            bg_height: spec.bg_height,
            bg_width: spec.bg_width,
        }
    }
}

impl AssetOptions {
    pub fn spec(&self) -> ProceduralSpec {
        ProceduralSpec {
            fg_size: self.fg_size,
            bg_height: self.bg_height,
            bg_width: self.bg_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetOptions {
    pub n_source: usize,
    pub n_target_train: usize,
    pub n_target_eval: usize,
    pub scale_range: [f64; 2],
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            n_source: 500,
            n_target_train: 300,
            n_target_eval: 200,
            scale_range: [0.5, 1.1],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    /// Also write `pr.svg` next to the CSV files.
    pub svg: bool,
}

/// The single declarative config driving every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub seed: u64,
    /// 0 means all available cores.
    pub workers: usize,
    pub paths: Paths,
    pub assets: AssetOptions,
    pub dataset: DatasetOptions,
    pub shift: ShiftConfig,
    pub train: TrainConfig,
    pub metrics: MetricOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Apply a seed override to every seeded component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.shift.validate()?;
        let d = &self.dataset;
        if d.n_source == 0 {
            bail!("dataset.n_source: must be at least 1");
        }
        if d.n_target_eval == 0 {
            bail!("dataset.n_target_eval: must be at least 1");
        }
        if !(d.scale_range[0] > 0.0 && d.scale_range[0] <= d.scale_range[1]) {
            bail!("dataset.scale_range: must satisfy 0 < lo <= hi");
        }
        let n_target = d.n_target_train + d.n_target_eval;
        if self.assets.n_fg < d.n_source + n_target {
            bail!(
                "assets.n_fg: {} foregrounds cannot cover {} source and {} target images",
                self.assets.n_fg,
                d.n_source,
                n_target
            );
        }
        if self.assets.n_bg < d.n_source + n_target {
            bail!(
                "assets.n_bg: {} backgrounds cannot give every image a unique background",
                self.assets.n_bg
            );
        }
        Ok(())
    }

    fn seed_for(&self, tag: &str) -> u64 {
        salsynth_core::rng::derive_seed(self.seed, tag, 0)
    }
}

/// Cap rayon's global pool; only the first call in a process takes effect.
pub fn init_workers(workers: usize) {
    if workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        bail!("{what} directory {} does not exist", path.display());
    }
    Ok(())
}

pub fn cmd_gen_assets(
    n_fg: usize,
    n_bg: usize,
    spec: ProceduralSpec,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    let (fgs, bgs) = procedural_assets(n_fg, n_bg, seed, spec)?;
    write_assets(out_dir, &fgs, &bgs)?;
    Ok(())
}

/// Source and target datasets over disjoint slices of the asset folders.
pub fn cmd_gen_dataset(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let fg_dir = cfg.paths.assets.join("foregrounds");
    let bg_dir = cfg.paths.assets.join("backgrounds");
    require_dir(&fg_dir, "foreground")?;
    require_dir(&bg_dir, "background")?;
    let (fgs, bgs) = load_asset_dirs(&fg_dir, &bg_dir, (1, 1))?;
    let d = &cfg.dataset;
    let n_target = d.n_target_train + d.n_target_eval;
    if fgs.len() < d.n_source + n_target || bgs.len() < d.n_source + n_target {
        bail!(
            "{} holds {} foregrounds and {} backgrounds; {} of each are needed",
            cfg.paths.assets.display(),
            fgs.len(),
            bgs.len(),
            d.n_source + n_target
        );
    }
    let assets = AssetSource::Directory {
        foregrounds: fg_dir.display().to_string(),
        backgrounds: bg_dir.display().to_string(),
    };
    let (bg_src, bg_trg) = bgs.split_at(bgs.len() / 2);
    let (bg_src, bg_trg) = if bg_src.len() >= d.n_source && bg_trg.len() >= n_target {
        (bg_src, bg_trg)
    } else {
        bgs.split_at(d.n_source)
    };
    let source = generate_dataset(
        &fgs[..d.n_source],
        bg_src,
        assets.clone(),
        d.scale_range,
        cfg.seed_for("source"),
    )?;
    let target = generate_target_domain(
        &fgs[d.n_source..d.n_source + n_target],
        bg_trg,
        assets,
        d.scale_range,
        &cfg.shift,
        d.n_target_train,
        cfg.seed_for("target"),
    )?;
    write_dataset(&cfg.paths.datasets.join(SOURCE_DIR), &source)?;
    write_dataset(&cfg.paths.datasets.join(TARGET_DIR), &target)?;
    Ok(())
}

/// Object-size histogram (`size_hist.csv`) and mean-mask heatmap (`center_bias.png`).
pub fn cmd_stats(dataset_dir: &Path, bins: usize, out_dir: &Path) -> Result<()> {
    let reader = SplitReader::new(dataset_dir, LabelAccess::Allowed);
    let manifest = reader.manifest()?;
    let labels = manifest
        .entries
        .par_iter()
        .map(|e| reader.load_label(e))
        .collect::<salsynth_core::Result<Vec<BinaryMask>>>()?;
    let Some(first) = labels.first() else {
        bail!(
            "{} lists no records",
            dataset_dir.join(MANIFEST_FILE).display()
        );
    };
    let dims = first.dims();
    let ratios: Vec<f64> = labels.iter().map(object_size_ratio).collect();
    let hist = size_histogram(&ratios, bins);
    let mut csv = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in hist.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{}\n",
            i as f64 / bins as f64,
            (i + 1) as f64 / bins as f64,
            c
        ));
    }
    write(&out_dir.join("size_hist.csv"), csv)?;
    let heat = center_bias_map(&labels, dims)?;
    write(
        &out_dir.join("center_bias.png"),
        encode_gray(dims.0, dims.1, &heat.to_u8())?,
    )?;
    Ok(())
}

/// Inputs of one pipeline run, loaded without touching target-train labels.
pub fn load_pipeline_data(datasets: &Path, train: &TrainConfig) -> Result<PipelineData> {
    let dims = (train.train_input_dims[0], train.train_input_dims[1]);
    let src_reader = SplitReader::new(datasets.join(SOURCE_DIR), LabelAccess::Denied);
    let src_manifest = src_reader.manifest()?;
    let source = src_manifest
        .split(Split::Source)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|e| -> Result<Sample> {
            let image = src_reader.load_image(e)?;
            let label = src_reader.load_label(e)?;
            Ok(Sample::resized(&e.id, &image, &label.to_gray(), dims)?)
        })
        .collect::<Result<Vec<_>>>()?;
    // training reader: labels of eval-only records are refused outright
    let trg_reader = SplitReader::new(datasets.join(TARGET_DIR), LabelAccess::Denied);
    let trg_manifest = trg_reader.manifest()?;
    let target_train = trg_manifest
        .split(Split::TargetTrain)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|e| -> Result<TargetImage> {
            Ok(TargetImage {
                id: e.id.clone(),
                image: trg_reader.load_image(e)?.resize_bilinear(dims.0, dims.1)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let eval_reader = SplitReader::new(datasets.join(TARGET_DIR), LabelAccess::Allowed);
    let target_eval = load_eval_samples(&eval_reader, &trg_manifest, |e| {
        e.split == Split::TargetEval
    })?;
    Ok(PipelineData {
        source,
        target_train,
        target_eval,
    })
}

/// Writes checkpoints, pseudo-label audits and the metric history as rounds finish.
pub struct RunWriter {
    dir: PathBuf,
    csv: String,
}

impl RunWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        ensure_dir(dir)?;
        let w = Self {
            dir: dir.to_path_buf(),
            csv: history_csv(&[]),
        };
        write(&w.dir.join(METRICS_FILE), &w.csv)?;
        Ok(w)
    }

    fn write_round(&mut self, a: &RoundArtifacts<'_>) -> Result<()> {
        let round_dir = self.dir.join("rounds").join(a.round.to_string());
        write(
            &round_dir.join("checkpoint.ckpt"),
            encode_checkpoint(a.params),
        )?;
        let pseudo_dir = round_dir.join("pseudo");
        a.pseudo.par_iter().try_for_each(|r| -> Result<()> {
            let (h, w) = r.pseudo_label.dims();
            write(
                &pseudo_dir.join(format!("{}_label.png", r.target_id)),
                encode_gray(h, w, &r.pseudo_label.to_u8())?,
            )?;
            // variance spans [0, 0.25]; stretch to the full 8-bit range
            let var = r.variance.map().map(|v| (v * 4.0).min(1.0))?;
            write(
                &pseudo_dir.join(format!("{}_variance.png", r.target_id)),
                encode_gray(h, w, &var.to_u8())?,
            )?;
            write(
                &pseudo_dir.join(format!("{}_weights.png", r.target_id)),
                encode_gray(h, w, &r.weights.map().to_u8())?,
            )
        })?;
        if !a.pseudo.is_empty() {
            let mut lines = String::new();
            for r in a.pseudo {
                lines.push_str(&serde_json_line(&r.sidecar())?);
            }
            write(&pseudo_dir.join("records.jsonl"), lines)?;
        }
        let loss = format!(
            "{{\"round\":{},\"source\":{},\"target\":{},\"total\":{},\"n_source\":{},\"n_target\":{}}}\n",
            a.round, a.loss.source, a.loss.target, a.loss.total, a.n_source, a.n_target
        );
        write(&round_dir.join("loss.json"), loss)?;
        if let Some(e) = a.eval {
            self.csv.push_str(&format!(
                "{},{},{},{}\n",
                a.round, EVAL_SPLIT, e.mae, e.f_beta
            ));
            write(&self.dir.join(METRICS_FILE), &self.csv)?;
        }
        Ok(())
    }
}

fn serde_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value)?;
    s.push('\n');
    Ok(s)
}

impl RoundObserver for RunWriter {
    fn round_finished(&mut self, artifacts: &RoundArtifacts<'_>) -> salsynth_core::Result<()> {
        self.write_round(artifacts).map_err(|e| {
            salsynth_core::Error::Manifest(format!("writing round {}: {e:#}", artifacts.round))
        })
    }
}

/// Summary of a finished run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub checksum: String,
    pub final_mae: f64,
    pub final_f_beta: f64,
    pub rounds: usize,
}

fn run_with_data(
    cfg: &RunConfig,
    data: &PipelineData,
    run_dir: &Path,
    source_text: Option<&str>,
) -> Result<RunSummary> {
    ensure_dir(run_dir)?;
    write(&run_dir.join(CONFIG_ECHO), cfg.to_toml()?)?;
    if let Some(text) = source_text {
        write(&run_dir.join("config.input.toml"), text)?;
    }
    let mut writer = RunWriter::new(run_dir)?;
    let PipelineOutput { params, history } = run_pipeline(&cfg.train, data, &mut writer)?;
    write(&run_dir.join(FINAL_CHECKPOINT), encode_checkpoint(&params))?;
    let last = history.last().context("pipeline produced no evaluation")?;
    let summary = RunSummary {
        checksum: params.checksum(),
        final_mae: last.mae,
        final_f_beta: last.f_beta,
        rounds: history.len(),
    };
    write(
        &run_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(summary)
}

/// Train per `cfg.train` into `cfg.paths.run_dir`. `source_text` is the config file as
/// written by the user, echoed next to the resolved config.
pub fn cmd_train(cfg: &RunConfig, source_text: Option<&str>) -> Result<RunSummary> {
    cfg.validate()?;
    require_dir(&cfg.paths.datasets, "dataset")?;
    let data = load_pipeline_data(&cfg.paths.datasets, &cfg.train)?;
    run_with_data(cfg, &data, &cfg.paths.run_dir, source_text)
}

pub fn load_checkpoint(path: &Path) -> Result<PredictorParams> {
    let bytes = fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    decode_checkpoint(&bytes).with_context(|| format!("in {}", path.display()))
}

/// Score a checkpoint on every labelled, non-training record of a dataset.
pub fn cmd_eval(
    checkpoint: &Path,
    dataset_dir: &Path,
    test_dims: (usize, usize),
    svg: bool,
    out_dir: &Path,
) -> Result<EvalResult> {
    let params = load_checkpoint(checkpoint)?;
    let reader = SplitReader::new(dataset_dir, LabelAccess::Allowed);
    let manifest = reader.manifest()?;
    let samples = load_eval_samples(&reader, &manifest, |e| e.split != Split::TargetTrain)?;
    let result = evaluate(&params, &samples, test_dims)?;
    write(&out_dir.join("summary.csv"), result.summary_csv())?;
    write(&out_dir.join("pr.csv"), result.pr_csv())?;
    if svg {
        write(&out_dir.join("pr.svg"), result.pr_svg())?;
    }
    Ok(result)
}

/// Saliency PNGs at each input's native size, named after the input file.
pub fn cmd_infer(
    checkpoint: &Path,
    images: &[PathBuf],
    test_dims: (usize, usize),
    out_dir: &Path,
) -> Result<()> {
    let params = load_checkpoint(checkpoint)?;
    ensure_dir(out_dir)?;
    images.par_iter().try_for_each(|path| -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let image = decode_png(&bytes)
            .with_context(|| format!("decoding {}", path.display()))?
            .into_rgb();
        let (h, w) = image.dims();
        let pred = params
            .predict(&image.resize_bilinear(test_dims.0, test_dims.1)?)?
            .resize_bilinear(h, w)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        write(&out_dir.join(format!("{name}.png")), pred.encode_png()?)
    })
}

pub const ARMS: [&str; 3] = ["source-only", "vanilla-pl", "upl"];

/// The training config of one ablation arm.
pub fn arm_config(train: &TrainConfig, arm: &str) -> Result<TrainConfig> {
    let mut t = train.clone();
    match arm {
        "source-only" => t.schedule = RoundSchedule::source_only(),
        "vanilla-pl" => {
            t.schedule = RoundSchedule::vanilla();
            t.pseudo = PseudoConfig {
                hard_labels: train.pseudo.hard_labels,
                ..PseudoConfig::vanilla()
            };
        }
        "upl" => {}
        other => bail!("unknown ablation arm `{other}`"),
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmResult {
    pub arm: String,
    pub summary: RunSummary,
}

/// Run the three arms on the same data into `<run_dir>/<arm>/` and write `comparison.csv`.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<ArmResult>> {
    cfg.validate()?;
    require_dir(&cfg.paths.datasets, "dataset")?;
    let data = load_pipeline_data(&cfg.paths.datasets, &cfg.train)?;
    let mut results = Vec::new();
    let mut csv = String::from("arm,final_mae,final_f_beta,rounds,checksum\n");
    for arm in ARMS {
        let mut arm_cfg = cfg.clone();
        arm_cfg.train = arm_config(&cfg.train, arm)?;
        let dir = cfg.paths.run_dir.join(arm);
        arm_cfg.paths.run_dir = dir.clone();
        let summary =
            run_with_data(&arm_cfg, &data, &dir, None).with_context(|| format!("arm {arm}"))?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            arm, summary.final_mae, summary.final_f_beta, summary.rounds, summary.checksum
        ));
        results.push(ArmResult {
            arm: arm.into(),
            summary,
        });
    }
    write(&cfg.paths.run_dir.join(CONFIG_ECHO), cfg.to_toml()?)?;
    write(&cfg.paths.run_dir.join("comparison.csv"), csv)?;
    Ok(results)
}
