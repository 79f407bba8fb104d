//! Independent reference implementations used to check the models. None of
//! these share code paths with the library's sweeps.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use percepta_core::topology::{Component, MergeTree, Unit};
use percepta_core::GenParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Naive O(n^3) single-linkage agglomeration: repeatedly merge the two
/// clusters with the smallest inter-point distance. Returns merge heights in
/// ascending order.
pub fn single_linkage_heights(pts: &[[f64; 2]]) -> Vec<f64> {
    let mut clusters: Vec<Vec<usize>> = (0..pts.len()).map(|i| vec![i]).collect();
    let mut heights = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        let d = dist(pts[i], pts[j]);
                        if d < best.0 {
                            best = (d, a, b);
                        }
                    }
                }
            }
        }
        let (h, a, b) = best;
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        heights.push(h);
    }
    heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    heights
}

/// Connected components of the graph with an edge for every pair at
/// distance `<= t`, by breadth-first search.
pub fn bfs_components(pts: &[[f64; 2]], t: f64) -> usize {
    let n = pts.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && dist(pts[u], pts[v]) <= t {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    count
}

/// 8-connected components of the cells where `mask` is set, as a per-cell
/// component index (`usize::MAX` outside the mask).
fn label_components(cols: usize, rows: usize, mask: &[bool]) -> (Vec<usize>, usize) {
    let mut label = vec![usize::MAX; cols * rows];
    let mut next = 0;
    for start in 0..cols * rows {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let (c, r) = ((u % cols) as i64, (u / cols) as i64);
            for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    let (nc, nr) = (c + dc, r + dr);
                    if nc < 0 || nr < 0 || nc >= cols as i64 || nr >= rows as i64 {
                        continue;
                    }
                    let v = nr as usize * cols + nc as usize;
                    if mask[v] && label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
        }
        next += 1;
    }
    (label, next)
}

/// Exhaustive sublevel-set sweep. At every distinct value level, the
/// 8-connected components of `{f <= level}` are extracted from scratch and
/// matched against the previous level's components to track births and
/// elder-rule deaths. Returns `(birth, death)` pairs sorted.
pub fn sublevel_pairs(cols: usize, rows: usize, vals: &[f64]) -> Vec<(f64, f64)> {
    let mut levels: Vec<f64> = vals.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();

    // Previous level: per-cell lineage id, and births per lineage.
    let mut prev_lineage: Vec<Option<usize>> = vec![None; vals.len()];
    let mut births: Vec<f64> = Vec::new();
    let mut pairs = Vec::new();

    for &level in &levels {
        let mask: Vec<bool> = vals.iter().map(|v| *v <= level).collect();
        let (label, count) = label_components(cols, rows, &mask);
        let mut lineage_of_comp: Vec<Option<usize>> = vec![None; count];
        for (comp, slot) in lineage_of_comp.iter_mut().enumerate() {
            let ancestors: BTreeSet<usize> = (0..vals.len())
                .filter(|i| label[*i] == comp)
                .filter_map(|i| prev_lineage[i])
                .collect();
            let lineage = if ancestors.is_empty() {
                births.push(level);
                births.len() - 1
            } else {
                let elder = *ancestors
                    .iter()
                    .min_by(|a, b| {
                        births[**a]
                            .partial_cmp(&births[**b])
                            .unwrap()
                            .then(a.cmp(b))
                    })
                    .unwrap();
                for &a in &ancestors {
                    if a != elder {
                        pairs.push((births[a], level));
                    }
                }
                elder
            };
            *slot = Some(lineage);
        }
        for i in 0..vals.len() {
            prev_lineage[i] = if mask[i] {
                lineage_of_comp[label[i]]
            } else {
                None
            };
        }
    }
    let survivor = prev_lineage.iter().flatten().next().copied();
    if let Some(s) = survivor {
        pairs.push((births[s], f64::INFINITY));
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pairs
}

/// Number of births the exhaustive sweep sees.
pub fn sublevel_birth_count(cols: usize, rows: usize, vals: &[f64]) -> usize {
    sublevel_pairs(cols, rows, vals).len()
}

/// Replays the generator's documented random stream and returns, per
/// cluster, how many draws fell outside the image.
pub fn replay_discards(p: &GenParams, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h, s) = (p.width as f64, p.height as f64, p.distribution_size);
    let centers: Vec<(f64, f64)> = (0..p.cluster_count)
        .map(|_| {
            let ux: f64 = rng.random();
            let uy: f64 = rng.random();
            (s + ux * (w - 2.0 * s), s + uy * (h - 2.0 * s))
        })
        .collect();
    let base = p.point_count / p.cluster_count;
    let extra = p.point_count % p.cluster_count;
    centers
        .iter()
        .enumerate()
        .map(|(i, (cx, cy))| {
            let share = base + usize::from(i < extra);
            (0..share)
                .filter(|_| {
                    let zx: f64 = rng.sample(StandardNormal);
                    let zy: f64 = rng.sample(StandardNormal);
                    let (x, y) = (cx + s * zx, cy + s * zy);
                    !(x >= 0.0 && x < w && y >= 0.0 && y < h)
                })
                .count()
        })
        .collect()
}

/// Pixels of a `w x h` image whose centers lie within `sqrt(area / pi)` of
/// `(x, y)`, checked over every pixel.
pub fn disk_pixel_count(x: f64, y: f64, area: f64, w: u32, h: u32) -> usize {
    let r2 = area / std::f64::consts::PI;
    (0..h)
        .flat_map(|py| (0..w).map(move |px| (px, py)))
        .filter(|(px, py)| {
            let dx = *px as f64 + 0.5 - x;
            let dy = *py as f64 + 0.5 - y;
            dx * dx + dy * dy <= r2
        })
        .count()
}

/// Tree with all births at zero and the given finite deaths.
pub fn tree_from_persistences(p: &[f64]) -> MergeTree<f64> {
    let mut comps = vec![Component {
        id: 0,
        birth: 0.0,
        death: f64::INFINITY,
        survivor_of: None,
    }];
    comps.extend(p.iter().enumerate().map(|(i, d)| Component {
        id: i + 1,
        birth: 0.0,
        death: *d,
        survivor_of: Some(0),
    }));
    MergeTree::new(Unit::Distance, comps).unwrap()
}

/// Random tree with varied births, frequent ties and some zero
/// persistences.
pub fn random_tree(rng: &mut ChaCha8Rng) -> MergeTree<f64> {
    let m = rng.random_range(0..15);
    let mut comps = vec![Component {
        id: 0,
        birth: rng.random_range(0.0..1.0),
        death: f64::INFINITY,
        survivor_of: None,
    }];
    for i in 1..=m {
        let birth: f64 = rng.random_range(0.0..1.0);
        let persistence = match rng.random_range(0..4) {
            0 => 0.0,
            1 => (rng.random_range(0..4) as f64) * 0.25,
            _ => rng.random_range(0.0..2.0),
        };
        comps.push(Component {
            id: i,
            birth,
            death: birth + persistence,
            survivor_of: Some(0),
        });
    }
    MergeTree::new(Unit::Density, comps).unwrap()
}

/// Random points in a box, used for center sets.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random_range(0.0..extent), rng.random_range(0.0..extent)])
        .collect()
}

/// Random grid of distinct values in `[0, 1]`.
pub fn random_distinct_grid(rng: &mut ChaCha8Rng, cols: usize, rows: usize) -> Vec<f64> {
    let n = cols * rows;
    let mut ranks: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ranks.swap(i, rng.random_range(0..=i));
    }
    ranks
        .iter()
        .map(|r| (*r as f64 + rng.random::<f64>() * 0.5) / n as f64)
        .collect()
}
