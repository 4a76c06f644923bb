//! Exact Euclidean distance transform, scaled by a discount factor.

use crate::autodiff::Value;

use super::{ImageProcError, MaskImage};

/// Per-pixel distance to the nearest positive mask pixel, divided by gamma.
/// Zero exactly on the mask, strictly positive elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DistanceMap {
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

    pub fn to_value(&self) -> Value {
        Value::new(self.data.clone(), self.height, self.width)
    }
}

/// Exact Euclidean distance transform by the two-pass separable
/// lower-envelope algorithm on squared distances, then `sqrt(.)/gamma`.
pub fn distance_map(mask: &MaskImage, gamma: f64) -> Result<DistanceMap, ImageProcError> {
    if !(gamma > 0.0) {
        return Err(ImageProcError::InvalidRange(format!("gamma must be positive, got {gamma}")));
    }
    if mask.is_empty_mask() {
        return Err(ImageProcError::EmptyMask);
    }
    let (w, h) = (mask.width(), mask.height());
    let mut sq: Vec<f64> = mask.data().iter().map(|&v| if v == 1 { 0.0 } else { f64::INFINITY }).collect();

    // Columns first.
    let mut col_in = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for j in 0..w {
        for i in 0..h {
            col_in[i] = sq[i * w + j];
        }
        edt_1d(&col_in, &mut col_out);
        for i in 0..h {
            sq[i * w + j] = col_out[i];
        }
    }
    // Then rows.
    let mut row_out = vec![0.0; w];
    for i in 0..h {
        edt_1d(&sq[i * w..(i + 1) * w].to_vec(), &mut row_out);
        sq[i * w..(i + 1) * w].copy_from_slice(&row_out);
    }

    let data = sq.iter().map(|&d| d.sqrt() / gamma).collect();
    Ok(DistanceMap { width: w, height: h, data })
}

/// 1-D squared-distance transform of a sampled function: the lower envelope
/// of parabolas `f[k] + (x - k)^2`.
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    debug_assert_eq!(out.len(), n);
    let mut v = vec![0usize; n]; // parabola vertices
    let mut z = vec![0.0f64; n + 1]; // boundaries
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = if f[p].is_infinite() {
                // Parabola at p is absent; replace it.
                f64::NEG_INFINITY
            } else {
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64)
            };
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *o = if f[p].is_infinite() { f64::INFINITY } else { (q as f64 - p as f64).powi(2) + f[p] };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(mask: &MaskImage, gamma: f64) -> Vec<f64> {
        let (w, h) = (mask.width(), mask.height());
        let positives = mask.positive_pixels();
        let mut out = vec![0.0; w * h];
        for i in 0..h {
            for j in 0..w {
                if mask.at(i, j) == 1 {
                    continue;
                }
                let best = positives
                    .iter()
                    .map(|&(pi, pj)| {
                        ((i as f64 - pi as f64).powi(2) + (j as f64 - pj as f64).powi(2)).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                out[i * w + j] = best / gamma;
            }
        }
        out
    }

    #[test]
    fn all_ones_mask_is_all_zeros() {
        let mask = MaskImage::from_fn(6, 4, |_, _| true);
        let dm = distance_map(&mask, 1.0).unwrap();
        assert!(dm.data().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn single_pixel_neighbors() {
        let mut mask = MaskImage::zeros(3, 3);
        mask.set(1, 1, 1);
        let dm = distance_map(&mask, 1.0).unwrap();
        assert_eq!(dm.at(1, 1), 0.0);
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((dm.at(i, j) - 1.0).abs() < 1e-12);
        }
        for (i, j) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert!((dm.at(i, j) - std::f64::consts::SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_scales_linearly() {
        let mask = MaskImage::from_fn(9, 7, |i, j| i == 3 && j == 4);
        let base = distance_map(&mask, 1.0).unwrap();
        let scaled = distance_map(&mask, 100.0).unwrap();
        for (a, b) in base.data().iter().zip(scaled.data()) {
            assert!((a / 100.0 - b).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_brute_force_on_random_masks() {
        let mut seed = 12345_u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as u32
        };
        for _ in 0..25 {
            let cells: Vec<bool> = (0..16 * 16).map(|_| next() % 5 == 0).collect();
            let mask = MaskImage::from_fn(16, 16, |i, j| cells[i * 16 + j]);
            if mask.is_empty_mask() {
                continue;
            }
            let dm = distance_map(&mask, 1.0).unwrap();
            let brute = brute_force(&mask, 1.0);
            for (a, b) in dm.data().iter().zip(&brute) {
                assert!((a - b).abs() < 1e-9, "edt {a} vs brute {b}");
            }
        }
    }

    #[test]
    fn zero_exactly_on_mask_positive_elsewhere() {
        let mask = MaskImage::from_fn(10, 10, |i, j| (3..6).contains(&i) && (4..7).contains(&j));
        let dm = distance_map(&mask, 2.0).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                if mask.at(i, j) == 1 {
                    assert_eq!(dm.at(i, j), 0.0);
                } else {
                    assert!(dm.at(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(matches!(
            distance_map(&MaskImage::zeros(4, 4), 1.0),
            Err(ImageProcError::EmptyMask)
        ));
    }
}
