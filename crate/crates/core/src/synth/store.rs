//! On-disk layout: `images/`, `labels/`, `manifest.jsonl`, plus asset folders.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::assets::{procedural_assets, BackgroundAsset, ForegroundAsset};
use super::dataset::{AssetSource, DatasetManifest, GeneratedDataset, ManifestEntry};
use crate::error::{Error, Result};
use crate::imaging::{decode_png, encode_gray, encode_png, encode_rgba, BinaryMask, RgbImage};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_dataset(dir: &Path, data: &GeneratedDataset) -> Result<()> {
    data.manifest
        .entries
        .par_iter()
        .zip(data.records.par_iter())
        .try_for_each(|(entry, record)| -> Result<()> {
            write_file(&dir.join(&entry.image), &encode_png(&record.image)?)?;
            let (h, w) = record.label.dims();
            write_file(
                &dir.join(&entry.label),
                &encode_gray(h, w, &record.label.to_u8_levels())?,
            )
        })?;
    write_file(
        &dir.join(MANIFEST_FILE),
        data.manifest.to_jsonl()?.as_bytes(),
    )
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetManifest::from_jsonl(&text)
}

pub fn write_assets(dir: &Path, fgs: &[ForegroundAsset], bgs: &[BackgroundAsset]) -> Result<()> {
    fgs.par_iter().try_for_each(|f| {
        write_file(
            &dir.join("foregrounds").join(format!("{}.png", f.id)),
            &encode_rgba(&f.image)?,
        )
    })?;
    bgs.par_iter().try_for_each(|b| {
        write_file(
            &dir.join("backgrounds").join(format!("{}.png", b.id)),
            &encode_png(&b.image)?,
        )
    })
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Ingest `foregrounds/*.png` and `backgrounds/*.png`; ids are file stems, sorted.
pub fn load_asset_dirs(
    fg_dir: &Path,
    bg_dir: &Path,
    min_bg_dims: (usize, usize),
) -> Result<(Vec<ForegroundAsset>, Vec<BackgroundAsset>)> {
    let fgs = png_files(fg_dir)?
        .par_iter()
        .map(|p| {
            let img = decode_png(&read_file(p)?)?.into_rgba();
            ForegroundAsset::new(stem(p), img)
                .map_err(|e| Error::Manifest(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let bgs = png_files(bg_dir)?
        .par_iter()
        .map(|p| {
            let img = decode_png(&read_file(p)?)?.into_rgb();
            BackgroundAsset::new(stem(p), img, min_bg_dims)
                .map_err(|e| Error::Manifest(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    if fgs.is_empty() || bgs.is_empty() {
        return Err(Error::invalid(format!(
            "asset folders {} / {} must each hold at least one PNG",
            fg_dir.display(),
            bg_dir.display()
        )));
    }
    Ok((fgs, bgs))
}

/// Rebuild the asset lists a manifest header points at.
pub fn resolve_assets(
    source: &AssetSource,
) -> Result<(Vec<ForegroundAsset>, Vec<BackgroundAsset>)> {
    match source {
        AssetSource::Procedural {
            seed,
            n_fg,
            n_bg,
            spec,
        } => procedural_assets(*n_fg, *n_bg, *seed, *spec),
        AssetSource::Directory {
            foregrounds,
            backgrounds,
        } => load_asset_dirs(Path::new(foregrounds), Path::new(backgrounds), (1, 1)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelAccess {
    /// Training view of an unlabeled split: any label read is an error.
    Denied,
    Allowed,
}

/// Loader scoped to one dataset directory and one label-access policy.
pub struct SplitReader {
    root: PathBuf,
    access: LabelAccess,
    label_reads: AtomicUsize,
}

impl SplitReader {
    pub fn new(root: impl Into<PathBuf>, access: LabelAccess) -> Self {
        Self {
            root: root.into(),
            access,
            label_reads: AtomicUsize::new(0),
        }
    }

    pub fn manifest(&self) -> Result<DatasetManifest> {
        read_manifest(&self.root.join(MANIFEST_FILE))
    }

    pub fn load_image(&self, entry: &ManifestEntry) -> Result<RgbImage> {
        Ok(decode_png(&read_file(&self.root.join(&entry.image))?)?.into_rgb())
    }

    pub fn load_label(&self, entry: &ManifestEntry) -> Result<BinaryMask> {
        if self.access == LabelAccess::Denied && entry.label_eval_only {
            return Err(Error::LabelAccessDenied {
                id: entry.id.clone(),
            });
        }
        let path = self.root.join(&entry.label);
        if !path.is_file() {
            return Err(Error::MissingLabel {
                id: entry.id.clone(),
            });
        }
        self.label_reads.fetch_add(1, Ordering::Relaxed);
        let (h, w, data) = decode_png(&read_file(&path)?)?.into_gray();
        BinaryMask::from_u8_levels(h, w, &data)
    }

    /// Number of label files opened so far.
    pub fn label_reads(&self) -> usize {
        self.label_reads.load(Ordering::Relaxed)
    }
}
