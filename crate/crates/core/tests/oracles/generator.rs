use std::collections::HashSet;

use salsynth_core::imaging::ResizeBilinear;
use salsynth_core::synth::{
    generate_dataset, procedural_assets, regenerate, store::write_dataset, AssetSource,
    ForegroundAsset, LabelAccess, ProceduralSpec, SplitReader,
};
use salsynth_core::BinaryMask;

use super::{ensure, fail, Check};

const RECORDS: usize = 200;

/// Label from first principles: scale the object, place its top-left at
/// `round(center - size / 2)`, crop to the canvas, and mark alpha >= 128 (alpha/255 >= 0.5).
pub fn expected_label(
    fg: &ForegroundAsset,
    canvas: (usize, usize),
    ratio: f64,
    center: [f64; 2],
) -> Vec<u8> {
    let (fh, fw) = fg.image.dims();
    let sh = ((fh as f64 * ratio).round() as usize).max(1);
    let sw = ((fw as f64 * ratio).round() as usize).max(1);
    let scaled = fg.image.resize_bilinear(sh, sw).unwrap();
    let oy = (center[0] - sh as f64 / 2.0).round() as i64;
    let ox = (center[1] - sw as f64 / 2.0).round() as i64;
    let (h, w) = canvas;
    let mut out = vec![0u8; h * w];
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = (y as i64 - oy, x as i64 - ox);
            if sy >= 0 && sx >= 0 && (sy as usize) < sh && (sx as usize) < sw {
                out[y * w + x] = u8::from(scaled.pixel(sy as usize, sx as usize)[3] >= 128);
            }
        }
    }
    out
}

/// Stored labels, fg/bg matching, scale ratios and regeneration for 200 records.
pub fn check(seed: u64) -> Check {
    let spec = ProceduralSpec::default();
    let (fgs, bgs) =
        procedural_assets(RECORDS, RECORDS + 20, seed, spec).map_err(fail("assets"))?;
    let source = AssetSource::Procedural {
        seed,
        n_fg: RECORDS,
        n_bg: RECORDS + 20,
        spec,
    };
    let data =
        generate_dataset(&fgs, &bgs, source.clone(), [0.5, 1.1], seed).map_err(fail("generate"))?;
    let dir = tempfile::tempdir().map_err(fail("tempdir"))?;
    write_dataset(dir.path(), &data).map_err(fail("write"))?;
    let reader = SplitReader::new(dir.path(), LabelAccess::Allowed);
    let manifest = reader.manifest().map_err(fail("manifest"))?;
    ensure!(
        manifest.entries.len() == RECORDS,
        "{} entries",
        manifest.entries.len()
    );

    let mut bg_seen = HashSet::new();
    let mut fg_seen = HashSet::new();
    for e in &manifest.entries {
        let fg = fgs
            .iter()
            .find(|f| f.id == e.fg_id)
            .ok_or(format!("{}: unknown fg {}", e.id, e.fg_id))?;
        let bg = bgs
            .iter()
            .find(|b| b.id == e.bg_id)
            .ok_or(format!("{}: unknown bg {}", e.id, e.bg_id))?;
        ensure!(
            fg_seen.insert(e.fg_id.clone()),
            "foreground {} used twice",
            e.fg_id
        );
        ensure!(
            bg_seen.insert(e.bg_id.clone()),
            "background {} used twice",
            e.bg_id
        );
        ensure!(
            (0.5..=1.1).contains(&e.scale_ratio),
            "{}: scale ratio {}",
            e.id,
            e.scale_ratio
        );
        let canvas = bg.image.dims();
        ensure!(
            (0.0..canvas.0 as f64).contains(&e.center[0])
                && (0.0..canvas.1 as f64).contains(&e.center[1]),
            "{}: center {:?} off canvas",
            e.id,
            e.center
        );
        let stored = reader.load_label(e).map_err(fail("label"))?;
        let want = BinaryMask::new(
            canvas.0,
            canvas.1,
            expected_label(fg, canvas, e.scale_ratio, e.center),
        )
        .unwrap();
        ensure!(
            stored == want,
            "{}: stored label differs from re-derived alpha mask",
            e.id
        );
        ensure!(stored.count_ones() > 0, "{}: empty label", e.id);
    }

    let rebuilt = regenerate(&manifest, &fgs, &bgs).map_err(fail("regenerate"))?;
    for (r, e) in rebuilt.iter().zip(&manifest.entries) {
        let image = reader.load_image(e).map_err(fail("image"))?;
        let label = reader.load_label(e).map_err(fail("label"))?;
        ensure!(
            r.image == image && r.label == label,
            "{}: regeneration is not bit-identical",
            e.id
        );
    }
    let again = generate_dataset(&fgs, &bgs, source, [0.5, 1.1], seed).map_err(fail("generate"))?;
    let (a, b) = (
        again.manifest.to_jsonl().map_err(fail("jsonl"))?,
        data.manifest.to_jsonl().map_err(fail("jsonl"))?,
    );
    ensure!(a == b, "rerun with the same seed changed the manifest");
    Ok(format!(
        "{RECORDS} records re-derived bit-exactly, matching injective, regeneration identical"
    ))
}
