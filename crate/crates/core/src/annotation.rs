//! Point annotations (head centers with box extents) and the JSON
//! annotation file format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DenseGrid;

/// A labelled head: center `(x, y)` in pixel units (x = column, y = row,
/// origin at the center of the top-left pixel) plus the head box extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointAnnotation {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "w")]
    pub box_w: f64,
    #[serde(rename = "h")]
    pub box_h: f64,
}

impl PointAnnotation {
    pub fn new(x: f64, y: f64, box_w: f64, box_h: f64) -> Self {
        Self { x, y, box_w, box_h }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    fn check(&self, width: usize, height: usize) -> std::result::Result<(), String> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(format!("non-finite point ({}, {})", self.x, self.y));
        }
        if !(self.x >= 0.0 && self.x < width as f64 && self.y >= 0.0 && self.y < height as f64) {
            return Err(format!(
                "point ({}, {}) outside {width}x{height}",
                self.x, self.y
            ));
        }
        if !(self.box_w > 0.0 && self.box_h > 0.0 && self.box_w.is_finite() && self.box_h.is_finite())
        {
            return Err(format!(
                "box extent must be positive, got w={} h={}",
                self.box_w, self.box_h
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub points: Vec<PointAnnotation>,
    /// Grayscale intensities in `[0, 1]`; stored separately from the JSON.
    #[serde(skip)]
    pub pixels: Option<DenseGrid>,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, width: usize, height: usize, points: Vec<PointAnnotation>) -> Self {
        Self {
            id: id.into(),
            width,
            height,
            points,
            pixels: None,
        }
    }

    pub fn with_pixels(mut self, pixels: DenseGrid) -> Self {
        self.pixels = Some(pixels);
        self
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Validation {
            id: self.id.clone(),
            message,
        };
        if self.width == 0 || self.height == 0 {
            return Err(fail(format!(
                "image dimensions must be >= 1, got {}x{}",
                self.width, self.height
            )));
        }
        for (i, p) in self.points.iter().enumerate() {
            p.check(self.width, self.height)
                .map_err(|m| fail(format!("point {i}: {m}")))?;
        }
        if let Some(px) = &self.pixels {
            if px.shape() != (self.height, self.width) {
                return Err(fail(format!(
                    "pixel grid is {}x{}, record declares {}x{}",
                    px.width(),
                    px.height(),
                    self.width,
                    self.height
                )));
            }
        }
        Ok(())
    }
}

/// Parses an annotation JSON document. `origin` is only used in error messages.
pub fn parse_annotations(text: &str, origin: &Path) -> Result<Vec<ImageRecord>> {
    let records: Vec<ImageRecord> = serde_json::from_str(text).map_err(|e| Error::Format {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    for r in &records {
        r.validate()?;
    }
    Ok(records)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, path)
}

pub fn store_annotations(records: &[ImageRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(records).expect("records serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
