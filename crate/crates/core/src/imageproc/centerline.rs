//! Ordering the skeleton into a base-to-tip centerline and sampling
//! keypoints at fixed arc-length fractions.

use std::collections::HashMap;

use super::{ImageProcError, MaskImage};

/// Ordered centerline pixels `(row, col)` with cumulative arc length in
/// pixels (8-connected steps of 1 or sqrt(2)).
#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    pub points: Vec<(usize, usize)>,
    pub arc_length: Vec<f64>,
}

impl Centerline {
    pub fn total_length(&self) -> f64 {
        *self.arc_length.last().unwrap_or(&0.0)
    }

    /// Pixel center `(u, v)` of point `k`.
    pub fn pixel_center(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.points[k];
        [j as f64 + 0.5, i as f64 + 0.5]
    }
}

/// Extract the longest endpoint-to-endpoint path through the skeleton graph
/// and orient it so the first point lies nearest `base_hint` (pixel
/// coordinates `(u, v)`). Side spurs are dropped by the path selection.
pub fn order_centerline(
    skeleton: &MaskImage,
    base_hint: [f64; 2],
) -> Result<Centerline, ImageProcError> {
    let pixels = skeleton.positive_pixels();
    if pixels.is_empty() {
        return Err(ImageProcError::EmptyMask);
    }
    let index: HashMap<(usize, usize), usize> =
        pixels.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); pixels.len()];
    for (k, &(i, j)) in pixels.iter().enumerate() {
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 {
                    continue;
                }
                if let Some(&n) = index.get(&(ni as usize, nj as usize)) {
                    adj[k].push(n);
                }
            }
        }
    }

    // Endpoints: degree <= 1 (an isolated pixel is its own endpoint).
    let endpoints: Vec<usize> =
        (0..pixels.len()).filter(|&k| adj[k].len() <= 1).collect();
    if endpoints.is_empty() {
        return Err(ImageProcError::CyclicSkeleton);
    }

    // Longest shortest-path between endpoint pairs; arc length as the metric.
    let mut best: Option<(f64, Vec<usize>)> = None;
    for &start in &endpoints {
        let (dist, prev) = dijkstra_arcs(&pixels, &adj, start);
        for &end in &endpoints {
            if end == start || dist[end].is_infinite() {
                continue;
            }
            if best.as_ref().map_or(true, |(d, _)| dist[end] > *d) {
                let mut path = Vec::new();
                let mut cur = end;
                loop {
                    path.push(cur);
                    if cur == start {
                        break;
                    }
                    cur = prev[cur];
                }
                path.reverse();
                best = Some((dist[end], path));
            }
        }
    }
    let path = match best {
        Some((_, p)) => p,
        // Single pixel: a zero-length path.
        None => vec![endpoints[0]],
    };

    let mut points: Vec<(usize, usize)> = path.iter().map(|&k| pixels[k]).collect();
    // Orient toward the base hint.
    let d_to = |p: (usize, usize)| {
        let c = [p.1 as f64 + 0.5, p.0 as f64 + 0.5];
        (c[0] - base_hint[0]).powi(2) + (c[1] - base_hint[1]).powi(2)
    };
    if d_to(*points.last().unwrap()) < d_to(points[0]) {
        points.reverse();
    }

    let mut arc = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    arc.push(0.0);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let step = if a.0 != b.0 && a.1 != b.1 { std::f64::consts::SQRT_2 } else { 1.0 };
        acc += step;
        arc.push(acc);
    }
    Ok(Centerline { points, arc_length: arc })
}

fn dijkstra_arcs(
    pixels: &[(usize, usize)],
    adj: &[Vec<usize>],
    start: usize,
) -> (Vec<f64>, Vec<usize>) {
    // Small graphs: a simple O(n^2) scan keeps this dependency-free.
    let n = pixels.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    dist[start] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for k in 0..n {
            if !done[k] && dist[k] < best {
                best = dist[k];
                u = k;
            }
        }
        if u == usize::MAX {
            break;
        }
        done[u] = true;
        let (ui, uj) = pixels[u];
        for &v in &adj[u] {
            let (vi, vj) = pixels[v];
            let w = if ui != vi && uj != vj { std::f64::consts::SQRT_2 } else { 1.0 };
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
                prev[v] = u;
            }
        }
    }
    (dist, prev)
}

/// Points at arc-length fractions `i/k` for `i = 1..=k`, each returned with
/// its fraction for pairing against the curve parameter. The last keypoint
/// (fraction 1) is the tip endpoint.
pub fn extract_keypoints(
    centerline: &Centerline,
    k: usize,
) -> Result<Vec<(f64, [f64; 2])>, ImageProcError> {
    assert!(k >= 1, "keypoint count must be at least 1");
    if centerline.points.len() < k + 1 {
        return Err(ImageProcError::DegenerateCenterline {
            points: centerline.points.len(),
            needed: k + 1,
        });
    }
    let total = centerline.total_length();
    let mut out = Vec::with_capacity(k);
    for i in 1..=k {
        let frac = i as f64 / k as f64;
        let target = frac * total;
        out.push((frac, point_at_arc(centerline, target)));
    }
    Ok(out)
}

fn point_at_arc(c: &Centerline, target: f64) -> [f64; 2] {
    let arc = &c.arc_length;
    if target >= *arc.last().unwrap() {
        return c.pixel_center(c.points.len() - 1);
    }
    let mut lo = 0;
    let mut hi = arc.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if arc[mid] <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let seg = arc[hi] - arc[lo];
    let t = if seg > 0.0 { (target - arc[lo]) / seg } else { 0.0 };
    let a = c.pixel_center(lo);
    let b = c.pixel_center(hi);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}
