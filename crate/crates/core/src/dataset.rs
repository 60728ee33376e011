//! On-disk dataset layout: `<root>/<split>/annotations.json` plus one
//! `<id>.dpg` pixel grid per image.

use std::fs;
use std::path::{Path, PathBuf};

use crate::annotation::{load_annotations, store_annotations, ImageRecord};
use crate::error::{Error, Result};
use crate::io::{load_grid, store_grid};

pub const ANNOTATION_FILE: &str = "annotations.json";

pub fn pixel_path(split_dir: &Path, id: &str) -> PathBuf {
    split_dir.join(format!("{id}.dpg"))
}

/// Writes records (and their pixels, when present) under `split_dir`.
/// Returns the written paths in write order.
pub fn store_records(split_dir: &Path, records: &[ImageRecord]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(split_dir).map_err(|e| Error::io(split_dir, e))?;
    let mut written = Vec::with_capacity(records.len() + 1);
    let ann = split_dir.join(ANNOTATION_FILE);
    store_annotations(records, &ann)?;
    written.push(ann);
    for r in records {
        if let Some(px) = &r.pixels {
            let p = pixel_path(split_dir, &r.id);
            store_grid(px, &p)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Loads the annotations of `split_dir` and attaches each image's pixels.
pub fn load_records(split_dir: &Path) -> Result<Vec<ImageRecord>> {
    let mut records = load_annotations(split_dir.join(ANNOTATION_FILE))?;
    for r in &mut records {
        r.pixels = Some(load_grid(pixel_path(split_dir, &r.id))?);
        r.validate()?;
    }
    Ok(records)
}
