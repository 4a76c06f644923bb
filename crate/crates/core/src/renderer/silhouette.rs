//! Rendered silhouette image container.

use std::path::Path;

use crate::autodiff::Value;
use crate::imageproc::MaskImage;

use super::RenderError;

/// H x W grid of coverage values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl SilhouetteImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "silhouette data length mismatch");
        SilhouetteImage { width, height, data }
    }

    pub fn from_value(v: &Value) -> Self {
        SilhouetteImage { width: v.cols(), height: v.rows(), data: v.data().to_vec() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Pixels with coverage strictly above the threshold.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.data.iter().filter(|&&v| v > threshold).count()
    }

    pub fn to_mask(&self, threshold: f64) -> MaskImage {
        MaskImage::from_fn(self.width, self.height, |i, j| self.at(i, j) > threshold)
    }

    /// Debug export: 8-bit grayscale with values `round(255 * S)`.
    pub fn save(&self, path: &Path) -> Result<(), RenderError> {
        let raw: Vec<u8> = self.data.iter().map(|&v| (255.0 * v).round() as u8).collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer size matches dimensions");
        img.save(path).map_err(|e| RenderError::Io(format!("{}: {e}", path.display())))
    }
}
