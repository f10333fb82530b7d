//! Dataset generation and the line-delimited JSON manifest that replays it.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assets::{BackgroundAsset, ForegroundAsset, ProceduralSpec};
use super::compose::compose;
use super::shift::{apply_shift, ShiftParams};
use crate::config::ShiftConfig;
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, RgbImage};
use crate::rng::{derive_seed, stream};

pub const GENERATOR_VERSION: &str = concat!("salsynth-gen/", env!("CARGO_PKG_VERSION"));

const PLACEMENT_ATTEMPTS: usize = 64;

/// Where the assets behind a manifest come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssetSource {
    Procedural {
        seed: u64,
        n_fg: usize,
        n_bg: usize,
        spec: ProceduralSpec,
    },
    Directory {
        foregrounds: String,
        backgrounds: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Source,
    TargetTrain,
    TargetEval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub generator_version: String,
    pub seed: u64,
    pub assets: AssetSource,
    pub scale_range: [f64; 2],
    pub shift: Option<ShiftConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: String,
    pub label: String,
    pub split: Split,
    /// Labels of target splits exist for evaluation only and must not feed training.
    pub label_eval_only: bool,
    pub fg_id: String,
    pub bg_id: String,
    pub scale_ratio: f64,
    pub center: [f64; 2],
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(ManifestHeader),
    Record(ManifestEntry),
}

impl DatasetManifest {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&Line::Header(self.header.clone()))?;
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(&Line::Record(e.clone()))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let mut entries = Vec::new();
        for (n, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            match serde_json::from_str::<Line>(line)
                .map_err(|e| Error::Manifest(format!("line {}: {e}", n + 1)))?
            {
                Line::Header(h) if header.is_none() => header = Some(h),
                Line::Header(_) => {
                    return Err(Error::Manifest(format!("line {}: duplicate header", n + 1)))
                }
                Line::Record(e) => entries.push(e),
            }
        }
        let manifest = Self {
            header: header.ok_or_else(|| Error::Manifest("missing header line".into()))?,
            entries,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate record id `{}`", e.id)));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

/// One composited sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthRecord {
    pub id: String,
    pub image: RgbImage,
    pub label: BinaryMask,
    pub scale_ratio: f64,
    pub center: (f64, f64),
    pub fg_id: String,
    pub bg_id: String,
    pub seed: u64,
}

/// Manifest plus the rendered samples it describes.
#[derive(Clone, Debug)]
pub struct GeneratedDataset {
    pub manifest: DatasetManifest,
    pub records: Vec<SynthRecord>,
}

fn sample_ratio(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..=range[1])
    }
}

fn compose_record(
    id: String,
    fg: &ForegroundAsset,
    bg: &BackgroundAsset,
    scale_range: [f64; 2],
    seed: u64,
) -> Result<SynthRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale_ratio = sample_ratio(&mut rng, scale_range);
    let (h, w) = bg.image.dims();
    for _ in 0..PLACEMENT_ATTEMPTS {
        let center = (
            rng.random_range(0.0..h as f64),
            rng.random_range(0.0..w as f64),
        );
        let (image, label) = match compose(fg, bg, scale_ratio, center) {
            Ok(out) => out,
            Err(Error::InvalidPlacement { .. }) => continue,
            Err(e) => return Err(e),
        };
        if label.count_ones() > 0 {
            return Ok(SynthRecord {
                id,
                image,
                label,
                scale_ratio,
                center,
                fg_id: fg.id.clone(),
                bg_id: bg.id.clone(),
                seed,
            });
        }
    }
    Err(Error::invalid(format!(
        "no placement of `{}` on `{}` leaves a labelled pixel on the canvas",
        fg.id, bg.id
    )))
}

fn check_ranges(scale_range: [f64; 2]) -> Result<()> {
    if !(scale_range[0] > 0.0 && scale_range[0] <= scale_range[1]) {
        return Err(Error::invalid(format!(
            "scale range [{}, {}] must satisfy 0 < lo <= hi",
            scale_range[0], scale_range[1]
        )));
    }
    Ok(())
}

/// Composite every record without persisting; `prefix` names the ids.
fn composite_all(
    fgs: &[ForegroundAsset],
    bgs: &[BackgroundAsset],
    scale_range: [f64; 2],
    seed: u64,
    prefix: &str,
) -> Result<Vec<SynthRecord>> {
    check_ranges(scale_range)?;
    if bgs.len() < fgs.len() {
        return Err(Error::InsufficientBackgrounds {
            foregrounds: fgs.len(),
            backgrounds: bgs.len(),
        });
    }
    let mut order: Vec<usize> = (0..bgs.len()).collect();
    order.shuffle(&mut stream(seed, "match", 0));
    (0..fgs.len())
        .into_par_iter()
        .map(|i| {
            compose_record(
                format!("{prefix}_{i:05}"),
                &fgs[i],
                &bgs[order[i]],
                scale_range,
                derive_seed(seed, "record", i as u64),
            )
        })
        .collect()
}

fn entry_for(record: &SynthRecord, split: Split, shift: Option<ShiftParams>) -> ManifestEntry {
    ManifestEntry {
        id: record.id.clone(),
        image: format!("images/{}.png", record.id),
        label: format!("labels/{}.png", record.id),
        split,
        label_eval_only: split != Split::Source,
        fg_id: record.fg_id.clone(),
        bg_id: record.bg_id.clone(),
        scale_ratio: record.scale_ratio,
        center: [record.center.0, record.center.1],
        seed: record.seed,
        shift,
    }
}

/// Match each foreground with a distinct background and composite one sample per foreground.
pub fn generate_dataset(
    fgs: &[ForegroundAsset],
    bgs: &[BackgroundAsset],
    assets: AssetSource,
    scale_range: [f64; 2],
    seed: u64,
) -> Result<GeneratedDataset> {
    let records = composite_all(fgs, bgs, scale_range, seed, "src")?;
    let entries = records
        .iter()
        .map(|r| entry_for(r, Split::Source, None))
        .collect();
    Ok(GeneratedDataset {
        manifest: DatasetManifest {
            header: ManifestHeader {
                generator_version: GENERATOR_VERSION.into(),
                seed,
                assets,
                scale_range,
                shift: None,
            },
            entries,
        },
        records,
    })
}

/// Fresh composites passed through a photometric shift. The first `n_train` records form
/// the unlabeled training split, the rest the evaluation split.
pub fn generate_target_domain(
    fgs: &[ForegroundAsset],
    bgs: &[BackgroundAsset],
    assets: AssetSource,
    scale_range: [f64; 2],
    shift: &ShiftConfig,
    n_train: usize,
    seed: u64,
) -> Result<GeneratedDataset> {
    shift.validate()?;
    let mut records = composite_all(fgs, bgs, scale_range, seed, "trg")?;
    let params: Vec<ShiftParams> = (0..records.len())
        .map(|i| ShiftParams::sample(shift, &mut stream(seed, "shift", i as u64)))
        .collect();
    records
        .par_iter_mut()
        .zip(params.par_iter())
        .try_for_each(|(r, p)| -> Result<()> {
            r.image = apply_shift(&r.image, p)?;
            Ok(())
        })?;
    let entries = records
        .iter()
        .zip(params)
        .enumerate()
        .map(|(i, (r, p))| {
            let split = if i < n_train {
                Split::TargetTrain
            } else {
                Split::TargetEval
            };
            entry_for(r, split, Some(p))
        })
        .collect();
    Ok(GeneratedDataset {
        manifest: DatasetManifest {
            header: ManifestHeader {
                generator_version: GENERATOR_VERSION.into(),
                seed,
                assets,
                scale_range,
                shift: Some(shift.clone()),
            },
            entries,
        },
        records,
    })
}

/// Rebuild every record from stored metadata alone.
pub fn regenerate(
    manifest: &DatasetManifest,
    fgs: &[ForegroundAsset],
    bgs: &[BackgroundAsset],
) -> Result<Vec<SynthRecord>> {
    let fg_by_id: HashMap<&str, &ForegroundAsset> =
        fgs.iter().map(|f| (f.id.as_str(), f)).collect();
    let bg_by_id: HashMap<&str, &BackgroundAsset> =
        bgs.iter().map(|b| (b.id.as_str(), b)).collect();
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let fg = fg_by_id
                .get(e.fg_id.as_str())
                .ok_or_else(|| Error::Manifest(format!("unknown foreground `{}`", e.fg_id)))?;
            let bg = bg_by_id
                .get(e.bg_id.as_str())
                .ok_or_else(|| Error::Manifest(format!("unknown background `{}`", e.bg_id)))?;
            let center = (e.center[0], e.center[1]);
            let (mut image, label) = compose(fg, bg, e.scale_ratio, center)?;
            if let Some(p) = &e.shift {
                image = apply_shift(&image, p)?;
            }
            Ok(SynthRecord {
                id: e.id.clone(),
                image,
                label,
                scale_ratio: e.scale_ratio,
                center,
                fg_id: e.fg_id.clone(),
                bg_id: e.bg_id.clone(),
                seed: e.seed,
            })
        })
        .collect()
}
