//! HSV color segmentation with component filtering and hole filling.

use serde::{Deserialize, Serialize};

use super::{ImageProcError, MaskImage};

/// Per-channel inclusive HSV ranges. Hue is in degrees [0, 360) and wraps
/// when `lo > hi`; saturation and value are in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsvRange {
    pub hue: [f64; 2],
    pub saturation: [f64; 2],
    pub value: [f64; 2],
}

impl HsvRange {
    pub fn validate(&self) -> Result<(), ImageProcError> {
        for h in self.hue {
            if !(0.0..360.0).contains(&h) {
                return Err(ImageProcError::InvalidRange(format!("hue bound {h} outside [0, 360)")));
            }
        }
        for (name, r) in [("saturation", self.saturation), ("value", self.value)] {
            if r[0] > r[1] || r[0] < 0.0 || r[1] > 1.0 {
                return Err(ImageProcError::InvalidRange(format!(
                    "{name} range [{}, {}] invalid",
                    r[0], r[1]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, hsv: [f64; 3]) -> bool {
        let hue_ok = if self.hue[0] <= self.hue[1] {
            hsv[0] >= self.hue[0] && hsv[0] <= self.hue[1]
        } else {
            hsv[0] >= self.hue[0] || hsv[0] <= self.hue[1]
        };
        hue_ok
            && hsv[1] >= self.saturation[0]
            && hsv[1] <= self.saturation[1]
            && hsv[2] >= self.value[0]
            && hsv[2] <= self.value[1]
    }
}

/// RGB in [0, 255] to (hue degrees, saturation, value).
pub fn rgb_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    [h, s, max]
}

/// Threshold an RGB image in HSV space, keep the largest 4-connected
/// component, and fill interior holes. An empty result is an error: the
/// frame carries no robot to estimate against.
pub fn color_segment(rgb: &image::RgbImage, range: &HsvRange) -> Result<MaskImage, ImageProcError> {
    range.validate()?;
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut mask = MaskImage::zeros(w, h);
    for i in 0..h {
        for j in 0..w {
            let px = rgb.get_pixel(j as u32, i as u32).0;
            if range.contains(rgb_to_hsv(px)) {
                mask.set(i, j, 1);
            }
        }
    }
    if mask.is_empty_mask() {
        return Err(ImageProcError::EmptyMask);
    }
    Ok(fill_holes(&largest_component(&mask)))
}

/// Keep only the largest 4-connected positive component (first in scan order
/// on ties).
pub fn largest_component(mask: &MaskImage) -> MaskImage {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut best_label = 0u32;
    let mut best_size = 0usize;
    let mut next = 1u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if mask.data()[start] == 0 || labels[start] != 0 {
            continue;
        }
        let label = next;
        next += 1;
        let mut size = 0usize;
        stack.push(start);
        labels[start] = label;
        while let Some(idx) = stack.pop() {
            size += 1;
            let (i, j) = (idx / w, idx % w);
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= h as i64 || nj >= w as i64 {
                    continue;
                }
                let nidx = ni as usize * w + nj as usize;
                if mask.data()[nidx] == 1 && labels[nidx] == 0 {
                    labels[nidx] = label;
                    stack.push(nidx);
                }
            }
        }
        if size > best_size {
            best_size = size;
            best_label = label;
        }
    }
    let data = labels.iter().map(|&l| (l != 0 && l == best_label) as u8).collect();
    MaskImage::from_raw(w, h, data)
}

/// Set to 1 every zero pixel not 4-connected to the image border background.
pub fn fill_holes(mask: &MaskImage) -> MaskImage {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; w * h];
    let mut stack = Vec::new();
    let seed = |idx: usize, outside: &mut Vec<bool>, stack: &mut Vec<usize>| {
        if mask.data()[idx] == 0 && !outside[idx] {
            outside[idx] = true;
            stack.push(idx);
        }
    };
    for j in 0..w {
        seed(j, &mut outside, &mut stack);
        seed((h - 1) * w + j, &mut outside, &mut stack);
    }
    for i in 0..h {
        seed(i * w, &mut outside, &mut stack);
        seed(i * w + w - 1, &mut outside, &mut stack);
    }
    while let Some(idx) = stack.pop() {
        let (i, j) = (idx / w, idx % w);
        for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni >= h as i64 || nj >= w as i64 {
                continue;
            }
            let nidx = ni as usize * w + nj as usize;
            if mask.data()[nidx] == 0 && !outside[nidx] {
                outside[nidx] = true;
                stack.push(nidx);
            }
        }
    }
    let data = (0..w * h).map(|idx| (mask.data()[idx] == 1 || !outside[idx]) as u8).collect();
    MaskImage::from_raw(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_rgb(w: u32, h: u32, px: [u8; 3]) -> image::RgbImage {
        image::RgbImage::from_pixel(w, h, image::Rgb(px))
    }

    fn red_range() -> HsvRange {
        HsvRange { hue: [340.0, 20.0], saturation: [0.4, 1.0], value: [0.2, 1.0] }
    }

    #[test]
    fn uniform_image_inside_range_is_all_ones() {
        let img = uniform_rgb(6, 4, [200, 20, 30]);
        let mask = color_segment(&img, &red_range()).unwrap();
        assert_eq!(mask.count_positive(), 24);
    }

    #[test]
    fn uniform_image_outside_range_is_rejected() {
        let img = uniform_rgb(6, 4, [20, 200, 30]);
        assert!(matches!(color_segment(&img, &red_range()), Err(ImageProcError::EmptyMask)));
    }

    #[test]
    fn only_largest_blob_survives() {
        // 20x10 image: a 10x10 red block and a separate 6x5 red block.
        let mut img = uniform_rgb(20, 10, [0, 0, 0]);
        for i in 0..10 {
            for j in 0..10 {
                img.put_pixel(j, i, image::Rgb([220, 10, 10]));
            }
        }
        for i in 0..5 {
            for j in 12..18 {
                img.put_pixel(j, i, image::Rgb([220, 10, 10]));
            }
        }
        let mask = color_segment(&img, &red_range()).unwrap();
        assert_eq!(mask.count_positive(), 100);
        assert_eq!(mask.at(2, 13), 0);
        assert_eq!(mask.at(2, 3), 1);
    }

    #[test]
    fn interior_holes_are_filled() {
        let mut mask = MaskImage::from_fn(7, 7, |i, j| (1..6).contains(&i) && (1..6).contains(&j));
        mask.set(3, 3, 0);
        let filled = fill_holes(&mask);
        assert_eq!(filled.at(3, 3), 1);
        assert_eq!(filled.at(0, 0), 0);
    }

    #[test]
    fn hue_wraparound_contains_red() {
        let r = red_range();
        assert!(r.contains([355.0, 0.9, 0.8]));
        assert!(r.contains([10.0, 0.9, 0.8]));
        assert!(!r.contains([180.0, 0.9, 0.8]));
    }
}
