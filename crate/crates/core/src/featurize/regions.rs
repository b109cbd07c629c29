use std::collections::HashMap;

use crate::corpus::{DrawingPoint, View};
use crate::error::{Error, Result};

pub const DEFAULT_BANDWIDTH: f64 = 0.08;
pub const MIN_LABELS: usize = 5;
pub const MAX_LABELS: usize = 50;

const SHIFT_TOL: f64 = 1e-6;
const MAX_SHIFT_ITER: usize = 500;

/// One discomfort region found by mean shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMode {
    pub view: View,
    pub x: f64,
    pub y: f64,
    /// Number of drawing points that converged to this mode.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionCount {
    pub clusters: Vec<RegionMode>,
    pub n: usize,
}

/// Uniform grid over the plane with cells of side `cell`.
struct Grid<'a> {
    cell: f64,
    points: &'a [[f64; 2]],
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> Grid<'a> {
    fn new(points: &'a [[f64; 2]], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(cell, *p)).or_default().push(i);
        }
        Self { cell, points, buckets }
    }

    fn key(cell: f64, p: [f64; 2]) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    /// Mean of all points within `radius` of `c`, summed in index order.
    fn window_mean(&self, c: [f64; 2], radius: f64) -> Option<[f64; 2]> {
        let (cx, cy) = Self::key(self.cell, c);
        let r2 = radius * radius;
        let mut idx: Vec<usize> = Vec::new();
        for gx in cx - 1..=cx + 1 {
            for gy in cy - 1..=cy + 1 {
                if let Some(b) = self.buckets.get(&(gx, gy)) {
                    idx.extend(b.iter().copied().filter(|&i| {
                        let p = self.points[i];
                        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
                        dx * dx + dy * dy <= r2
                    }));
                }
            }
        }
        if idx.is_empty() {
            return None;
        }
        idx.sort_unstable();
        let (mut sx, mut sy) = (0.0, 0.0);
        for &i in &idx {
            sx += self.points[i][0];
            sy += self.points[i][1];
        }
        let n = idx.len() as f64;
        Some([sx / n, sy / n])
    }
}

struct Cluster {
    centre: [f64; 2],
    weight: usize,
}

fn merge_modes(mut modes: Vec<[f64; 2]>, radius: f64) -> Vec<Cluster> {
    modes.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let r2 = radius * radius;
    let close = |a: [f64; 2], b: [f64; 2]| {
        let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
        dx * dx + dy * dy <= r2
    };
    let mut clusters: Vec<Cluster> = Vec::new();
    for m in modes {
        match clusters.iter_mut().find(|c| close(c.centre, m)) {
            Some(c) => {
                let w = c.weight as f64;
                c.centre = [
                    (c.centre[0] * w + m[0]) / (w + 1.0),
                    (c.centre[1] * w + m[1]) / (w + 1.0),
                ];
                c.weight += 1;
            }
            None => clusters.push(Cluster { centre: m, weight: 1 }),
        }
    }
    // running means can drift towards each other; merge until separated
    loop {
        let mut pair = None;
        'outer: for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if close(clusters[i].centre, clusters[j].centre) {
                    pair = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = pair else { break };
        let b = clusters.remove(j);
        let a = &mut clusters[i];
        let (wa, wb) = (a.weight as f64, b.weight as f64);
        a.centre = [
            (a.centre[0] * wa + b.centre[0] * wb) / (wa + wb),
            (a.centre[1] * wa + b.centre[1] * wb) / (wa + wb),
        ];
        a.weight += b.weight;
    }
    clusters
}

/// Flat-kernel mean shift on the points of one view.
fn shift_view(points: &[[f64; 2]], bandwidth: f64) -> Vec<Cluster> {
    let grid = Grid::new(points, bandwidth);
    let modes: Vec<[f64; 2]> = points
        .iter()
        .map(|&start| {
            let mut m = start;
            for _ in 0..MAX_SHIFT_ITER {
                let Some(next) = grid.window_mean(m, bandwidth) else { break };
                let shift = ((next[0] - m[0]).powi(2) + (next[1] - m[1]).powi(2)).sqrt();
                m = next;
                if shift < SHIFT_TOL {
                    break;
                }
            }
            m
        })
        .collect();
    merge_modes(modes, bandwidth / 2.0)
}

/// Counts discomfort regions with flat-kernel mean shift, each body view
/// clustered independently.
pub fn count_regions(points: &[DrawingPoint], bandwidth: f64) -> Result<RegionCount> {
    if points.is_empty() {
        return Err(Error::EmptyDrawing);
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let mut out = RegionCount::default();
    for view in View::ALL {
        let mut pts: Vec<[f64; 2]> = points
            .iter()
            .filter(|p| p.view == view)
            .map(|p| [p.x, p.y])
            .collect();
        if pts.is_empty() {
            continue;
        }
        // canonical order makes the result independent of input order
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        for c in shift_view(&pts, bandwidth) {
            out.clusters.push(RegionMode {
                view,
                x: c.centre[0],
                y: c.centre[1],
                support: c.weight,
            });
        }
    }
    out.n = out.clusters.len();
    Ok(out)
}

/// Number of labels to predict for a drawing with `n_clusters` regions.
pub fn label_budget(n_clusters: usize) -> usize {
    n_clusters.saturating_mul(2).clamp(MIN_LABELS, MAX_LABELS)
}
