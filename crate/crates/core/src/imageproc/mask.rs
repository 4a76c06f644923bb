//! Binary mask storage and 8-bit grayscale I/O.

use std::path::Path;

use crate::autodiff::Value;

use super::ImageProcError;

/// H x W binary grid with values exactly 0 or 1, indexed `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl MaskImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        MaskImage { width, height, data: vec![0; width * height] }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height, "mask data length mismatch");
        assert!(data.iter().all(|&v| v <= 1), "mask values must be 0 or 1");
        MaskImage { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j) as u8);
            }
        }
        MaskImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn get(&self, row: i64, col: i64) -> u8 {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            0
        } else {
            self.data[row as usize * self.width + col as usize]
        }
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        assert!(v <= 1);
        self.data[row * self.width + col] = v;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count_positive(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.count_positive() == 0
    }

    /// Positive pixel coordinates as `(row, col)` in scan order.
    pub fn positive_pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.height {
            for j in 0..self.width {
                if self.at(i, j) == 1 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Dense float view for loss evaluation.
    pub fn to_value(&self) -> Value {
        Value::new(self.data.iter().map(|&v| v as f64).collect(), self.height, self.width)
    }

    /// Load an 8-bit grayscale image, thresholding at 128.
    pub fn load(path: &Path) -> Result<Self, ImageProcError> {
        let img = image::open(path)
            .map_err(|e| ImageProcError::Io(format!("{}: {e}", path.display())))?
            .into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img.into_raw().into_iter().map(|v| (v >= 128) as u8).collect();
        Ok(MaskImage { width: w, height: h, data })
    }

    /// Write as 8-bit grayscale with values 0 / 255 (format from extension).
    pub fn save(&self, path: &Path) -> Result<(), ImageProcError> {
        let raw: Vec<u8> = self.data.iter().map(|&v| if v == 1 { 255 } else { 0 }).collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer size matches dimensions");
        img.save(path).map_err(|e| ImageProcError::Io(format!("{}: {e}", path.display())))
    }
}
