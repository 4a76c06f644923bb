//! Zhang–Suen thinning to a one-pixel-wide skeleton.

use super::{ImageProcError, MaskImage};

/// Iterative two-subpass thinning until no pixel is removed. The result is a
/// subset of the input mask, roughly one pixel wide and 8-connected.
pub fn skeletonize(mask: &MaskImage) -> Result<MaskImage, ImageProcError> {
    if mask.is_empty_mask() {
        return Err(ImageProcError::EmptyMask);
    }
    let mut skel = mask.clone();
    loop {
        let removed_a = thin_pass(&mut skel, true);
        let removed_b = thin_pass(&mut skel, false);
        if !removed_a && !removed_b {
            return Ok(skel);
        }
    }
}

/// Neighbors P2..P9 clockwise from north.
fn neighbors(m: &MaskImage, i: i64, j: i64) -> [u8; 8] {
    [
        m.get(i - 1, j),
        m.get(i - 1, j + 1),
        m.get(i, j + 1),
        m.get(i + 1, j + 1),
        m.get(i + 1, j),
        m.get(i + 1, j - 1),
        m.get(i, j - 1),
        m.get(i - 1, j - 1),
    ]
}

fn thin_pass(skel: &mut MaskImage, first: bool) -> bool {
    let mut to_delete = Vec::new();
    for (i, j) in skel.positive_pixels() {
        let p = neighbors(skel, i as i64, j as i64);
        let b: u8 = p.iter().sum();
        if !(2..=6).contains(&b) {
            continue;
        }
        let a = (0..8).filter(|&k| p[k] == 0 && p[(k + 1) % 8] == 1).count();
        if a != 1 {
            continue;
        }
        // Indices: P2=p[0], P4=p[2], P6=p[4], P8=p[6].
        let ok = if first {
            p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0
        } else {
            p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0
        };
        if ok {
            to_delete.push((i, j));
        }
    }
    for &(i, j) in &to_delete {
        skel.set(i, j, 0);
    }
    !to_delete.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_bar_thins_to_midline() {
        // 3x21 bar inside a 25x7 canvas.
        let mask = MaskImage::from_fn(25, 7, |i, j| (2..5).contains(&i) && (2..23).contains(&j));
        let skel = skeletonize(&mask).unwrap();
        // Single-row horizontal skeleton in the middle row, length 19 +- 1.
        let positives = skel.positive_pixels();
        assert!(positives.iter().all(|&(i, _)| i == 3), "skeleton not on midline: {positives:?}");
        let len = positives.len();
        assert!((18..=20).contains(&len), "bar skeleton length {len}");
    }

    #[test]
    fn single_pixel_is_its_own_skeleton() {
        let mut mask = MaskImage::zeros(5, 5);
        mask.set(2, 2, 1);
        let skel = skeletonize(&mask).unwrap();
        assert_eq!(skel.count_positive(), 1);
        assert_eq!(skel.at(2, 2), 1);
    }

    #[test]
    fn disk_collapses_near_center() {
        let r = 5.0;
        let mask = MaskImage::from_fn(15, 15, |i, j| {
            let (di, dj) = (i as f64 - 7.0, j as f64 - 7.0);
            (di * di + dj * dj).sqrt() <= r
        });
        let skel = skeletonize(&mask).unwrap();
        for (i, j) in skel.positive_pixels() {
            let (di, dj) = (i as f64 - 7.0, j as f64 - 7.0);
            assert!(
                (di * di + dj * dj).sqrt() <= 1.5,
                "skeleton pixel ({i},{j}) far from disk center"
            );
        }
    }

    #[test]
    fn skeleton_is_subset_of_mask() {
        let mask = MaskImage::from_fn(30, 20, |i, j| {
            let (y, x) = (i as f64, j as f64);
            (y - 0.4 * x - 3.0).abs() < 3.0 && x > 2.0 && x < 27.0
        });
        let skel = skeletonize(&mask).unwrap();
        for (i, j) in skel.positive_pixels() {
            assert_eq!(mask.at(i, j), 1);
        }
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(matches!(skeletonize(&MaskImage::zeros(4, 4)), Err(ImageProcError::EmptyMask)));
    }
}
