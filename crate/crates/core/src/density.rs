//! Density-based model: join tree of a binned whiteness field.
//!
//! The stimulus is divided into `B x B` pixel bins. Each bin stores the mean
//! whiteness of its pixels, so dense regions of ink are minima. Sweeping the
//! value upward, a bin with no already-swept 8-neighbor starts a component;
//! a bin touching several components joins them, and all but the oldest
//! (lowest birth) die at that bin's value.

use serde::{Deserialize, Serialize};

use crate::serde_util::SchemaVersion;
use crate::synth::StimulusImage;
use crate::topology::{Component, MergeTree, ThresholdChoice, Unit};
use crate::{DisjointSet, Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramMode {
    /// Fraction of pixels that are exactly white.
    Coverage,
    /// Mean pixel intensity; accounts for partial opacity.
    IntensitySum,
}

impl std::str::FromStr for HistogramMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(Self::Coverage),
            "intensity_sum" | "intensity-sum" => Ok(Self::IntensitySum),
            other => Err(Error::param(
                "mode",
                format!("unknown histogram mode `{other}` (expected coverage or intensity_sum)"),
            )),
        }
    }
}

/// Row-major grid of per-bin whiteness fractions in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "RawHistogram<T>")]
pub struct DensityHistogram<T> {
    schema: SchemaVersion,
    bin_size: u32,
    cols: usize,
    rows: usize,
    mode: HistogramMode,
    values: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawHistogram<T> {
    #[serde(default)]
    #[allow(dead_code)]
    schema: SchemaVersion,
    bin_size: u32,
    cols: usize,
    rows: usize,
    mode: HistogramMode,
    values: Vec<T>,
}

impl<T: Scalar> TryFrom<RawHistogram<T>> for DensityHistogram<T> {
    type Error = Error;

    fn try_from(raw: RawHistogram<T>) -> Result<Self> {
        if raw.bin_size == 0 {
            return Err(Error::param("bin_size", "must be >= 1"));
        }
        DensityHistogram::from_values(raw.cols, raw.rows, raw.values, raw.mode).map(|h| {
            DensityHistogram {
                bin_size: raw.bin_size,
                ..h
            }
        })
    }
}

impl<T: Scalar> DensityHistogram<T> {
    /// Builds a histogram directly from bin values (bin size recorded as 1).
    pub fn from_values(
        cols: usize,
        rows: usize,
        values: Vec<T>,
        mode: HistogramMode,
    ) -> Result<Self> {
        if values.len() != cols * rows {
            return Err(Error::param("values", "length must equal cols * rows"));
        }
        if values
            .iter()
            .any(|v| v.is_nan() || *v < T::zero() || *v > T::one())
        {
            return Err(Error::param("values", "bin values must lie in [0, 1]"));
        }
        Ok(Self {
            schema: SchemaVersion,
            bin_size: 1,
            cols,
            rows,
            mode,
            values,
        })
    }

    pub fn bin_size(&self) -> u32 {
        self.bin_size
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn mode(&self) -> HistogramMode {
        self.mode
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> T {
        self.values[row * self.cols + col]
    }

    fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (c, r) = ((idx % self.cols) as isize, (idx / self.cols) as isize);
        let (cols, rows) = (self.cols as isize, self.rows as isize);
        (-1..=1)
            .flat_map(move |dr| (-1..=1).map(move |dc| (dc, dr)))
            .filter(|d| *d != (0, 0))
            .map(move |(dc, dr)| (c + dc, r + dr))
            .filter(move |(nc, nr)| *nc >= 0 && *nr >= 0 && *nc < cols && *nr < rows)
            .map(move |(nc, nr)| (nr * cols + nc) as usize)
    }
}

/// Bins `image` into `bin_size` squares. Bins on the right and bottom edges
/// may be partial; their mean uses their true pixel count.
pub fn compute_histogram<T: Scalar>(
    image: &StimulusImage<T>,
    bin_size: u32,
    mode: HistogramMode,
) -> Result<DensityHistogram<T>> {
    if bin_size == 0 {
        return Err(Error::param("bin_size", "must be >= 1"));
    }
    let (w, h) = (image.width() as usize, image.height() as usize);
    let b = bin_size as usize;
    let cols = w.div_ceil(b);
    let rows = h.div_ceil(b);
    let mut sums = vec![T::zero(); cols * rows];
    let mut counts = vec![0usize; cols * rows];
    let px = image.intensity();
    for y in 0..h {
        let row_off = (y / b) * cols;
        for x in 0..w {
            let v = px[y * w + x];
            let bin = row_off + x / b;
            counts[bin] += 1;
            sums[bin] = sums[bin]
                + match mode {
                    HistogramMode::Coverage if v == T::one() => T::one(),
                    HistogramMode::Coverage => T::zero(),
                    HistogramMode::IntensitySum => v,
                };
        }
    }
    let values = sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| (s / T::from_count(n)).min(T::one()))
        .collect();
    Ok(DensityHistogram {
        schema: SchemaVersion,
        bin_size,
        cols,
        rows,
        mode,
        values,
    })
}

/// Join tree of the sublevel sets of `hist` under 8-connectivity.
///
/// Bins are swept by ascending value, ties by row-major index. Component ids
/// are the row-major index of the bin where the component was born. On a
/// merge the component with the lowest birth survives, ties going to the
/// lower id.
pub fn build_density_tree<T: Scalar>(hist: &DensityHistogram<T>) -> Result<MergeTree<T>> {
    let n = hist.values.len();
    if n == 0 {
        return Err(Error::param("histogram", "histogram has no bins"));
    }
    let vals = &hist.values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| {
        vals[*a]
            .partial_cmp(&vals[*b])
            .expect("bin values are never NaN")
            .then(a.cmp(b))
    });

    let mut sets = DisjointSet::new(n);
    let mut swept = vec![false; n];
    // Indexed by birth bin; only entries for born components are used.
    let mut comps: Vec<Option<Component<T>>> = vec![None; n];
    let mut touching: Vec<usize> = Vec::with_capacity(8);

    for &v in &order {
        swept[v] = true;
        touching.clear();
        for nb in hist.neighbors(v) {
            if swept[nb] {
                let label = sets.label_of(nb);
                if !touching.contains(&label) {
                    touching.push(label);
                }
            }
        }
        if touching.is_empty() {
            comps[v] = Some(Component {
                id: v,
                birth: vals[v],
                death: T::infinity(),
                survivor_of: None,
            });
            continue;
        }
        let elder = *touching
            .iter()
            .min_by(|a, b| {
                let ba = comps[**a].as_ref().expect("live component").birth;
                let bb = comps[**b].as_ref().expect("live component").birth;
                ba.partial_cmp(&bb).expect("finite births").then(a.cmp(b))
            })
            .expect("non-empty");
        for &label in &touching {
            if label != elder {
                let c = comps[label].as_mut().expect("live component");
                c.death = vals[v];
                c.survivor_of = Some(elder);
            }
        }
        for nb in hist.neighbors(v) {
            if swept[nb] {
                sets.union_labeled(v, nb, elder);
            }
        }
        sets.set_label(v, elder);
    }

    MergeTree::new(Unit::Density, comps.into_iter().flatten().collect())
}

pub fn estimate_count_density<T: Scalar>(
    image: &StimulusImage<T>,
    bin_size: u32,
    mode: HistogramMode,
    threshold: T,
) -> Result<usize> {
    build_density_tree(&compute_histogram(image, bin_size, mode)?)?.count_at(threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ScanEntry<T> {
    pub bin_size: u32,
    #[serde(flatten)]
    pub choice: ThresholdChoice<T>,
}

/// Threshold yielding `k` clusters at each bin size. Values are whiteness
/// fractions and thus already normalized by bin area, so they compare
/// directly across bin sizes.
pub fn resolution_scan<T: Scalar>(
    image: &StimulusImage<T>,
    bins: &[u32],
    k: usize,
    mode: HistogramMode,
) -> Result<Vec<ScanEntry<T>>> {
    if k == 0 {
        return Err(Error::param("count", "cluster count must be >= 1"));
    }
    bins.iter()
        .map(|&b| {
            let tree = build_density_tree(&compute_histogram(image, b, mode)?)?;
            Ok(ScanEntry {
                bin_size: b,
                choice: tree.threshold_for_count(k)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{rasterize, Dataset, GenParams, Origin, Point, RenderParams};

    fn grid(cols: usize, rows: usize, v: &[f64]) -> DensityHistogram<f64> {
        DensityHistogram::from_values(cols, rows, v.to_vec(), HistogramMode::Coverage).unwrap()
    }

    fn pairs(tree: &MergeTree<f64>) -> Vec<(f64, f64)> {
        let mut p: Vec<_> = tree
            .persistence_pairs()
            .iter()
            .map(|p| (p.birth, p.death))
            .collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p
    }

    /// Two dense square blobs of ink in an otherwise white 40x20 image.
    fn two_blobs() -> StimulusImage<f64> {
        let mut px = vec![1.0; 40 * 20];
        for y in 5..15 {
            for x in (4..12).chain(28..36) {
                px[y * 40 + x] = 0.0;
            }
        }
        StimulusImage::from_intensity(40, 20, px).unwrap()
    }

    #[test]
    fn white_image_histogram() {
        let img = StimulusImage::<f64>::white(40, 40);
        let h = compute_histogram(&img, 20, HistogramMode::Coverage).unwrap();
        assert_eq!((h.cols(), h.rows()), (2, 2));
        assert!(h.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn four_ink_pixels_single_bin() {
        let data = Dataset::new(
            GenParams {
                width: 10,
                height: 10,
                cluster_count: 1,
                distribution_size: 1.0,
                point_count: 1,
                snr: 10.0,
            },
            vec![[5.0, 5.0]],
            vec![Point {
                x: 5.0,
                y: 5.0,
                origin: Origin::Cluster(0),
            }],
        )
        .unwrap();
        let img = rasterize(
            &data,
            &RenderParams {
                point_area: std::f64::consts::PI,
                opacity: 1.0,
            },
        )
        .unwrap();
        let h = compute_histogram(&img, 10, HistogramMode::Coverage).unwrap();
        assert_eq!(h.values(), &[0.96]);
        let s = compute_histogram(&img, 10, HistogramMode::IntensitySum).unwrap();
        assert_eq!(s.values(), h.values());
    }

    #[test]
    fn partial_edge_bins() {
        let mut px = vec![1.0; 550 * 550];
        // Ink the bottom-right corner pixel; it sits in a 10x10 edge bin.
        px[550 * 550 - 1] = 0.0;
        let img = StimulusImage::from_intensity(550, 550, px).unwrap();
        let h = compute_histogram(&img, 20, HistogramMode::Coverage).unwrap();
        assert_eq!((h.cols(), h.rows()), (28, 28));
        assert_eq!(h.get(27, 27), 0.99);
        assert_eq!(h.get(26, 27), 1.0);
    }

    #[test]
    fn oversized_bins_and_invalid_bin() {
        let img = StimulusImage::<f64>::white(30, 10);
        let h = compute_histogram(&img, 100, HistogramMode::Coverage).unwrap();
        assert_eq!((h.cols(), h.rows()), (1, 1));
        assert!(compute_histogram(&img, 0, HistogramMode::Coverage).is_err());
    }

    #[test]
    fn modes_differ_on_translucent_ink() {
        let img = StimulusImage::from_intensity(2, 1, vec![1.0, 0.5]).unwrap();
        let cov = compute_histogram(&img, 2, HistogramMode::Coverage).unwrap();
        let sum = compute_histogram(&img, 2, HistogramMode::IntensitySum).unwrap();
        assert_eq!(cov.values(), &[0.5]);
        assert_eq!(sum.values(), &[0.75]);
    }

    #[test]
    fn constant_grid_single_component() {
        let tree = build_density_tree(&grid(3, 3, &[0.4; 9])).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.components()[0].id, 0);
    }

    #[test]
    fn one_by_three() {
        let tree = build_density_tree(&grid(3, 1, &[0.1, 0.9, 0.2])).unwrap();
        assert_eq!(pairs(&tree), vec![(0.1, f64::INFINITY), (0.2, 0.9)]);
        let finite = tree.finite_persistences();
        assert!((finite[0] - 0.7).abs() < 1e-12);
        let dying = tree.components().iter().find(|c| c.id == 2).unwrap();
        assert_eq!(dying.survivor_of, Some(0));
    }

    #[test]
    fn diagonal_adjacency_joins() {
        let tree = build_density_tree(&grid(2, 2, &[0.1, 0.8, 0.8, 0.2])).unwrap();
        assert_eq!(pairs(&tree), vec![(0.1, f64::INFINITY)]);
    }

    #[test]
    fn three_way_merge_kills_two() {
        // Minima at the three corners of the top row and bottom middle,
        // all joined through the center bin.
        let v = [0.1, 0.9, 0.3, 0.9, 0.5, 0.9, 0.9, 0.2, 0.9];
        let tree = build_density_tree(&grid(3, 3, &v)).unwrap();
        assert_eq!(
            pairs(&tree),
            vec![(0.1, f64::INFINITY), (0.2, 0.5), (0.3, 0.5)]
        );
    }

    #[test]
    fn equal_births_lower_index_survives() {
        let tree = build_density_tree(&grid(3, 1, &[0.2, 0.6, 0.2])).unwrap();
        let immortal = tree
            .components()
            .iter()
            .find(|c| c.death.is_infinite())
            .unwrap();
        assert_eq!(immortal.id, 0);
    }

    #[test]
    fn empty_histogram_rejected() {
        let h =
            DensityHistogram::<f64>::from_values(0, 0, vec![], HistogramMode::Coverage).unwrap();
        assert!(build_density_tree(&h).is_err());
    }

    #[test]
    fn estimate_on_white_and_blobs() {
        let white = StimulusImage::<f64>::white(60, 60);
        assert_eq!(
            estimate_count_density(&white, 20, HistogramMode::Coverage, 0.3).unwrap(),
            1
        );
        let blobs = two_blobs();
        assert_eq!(
            estimate_count_density(&blobs, 5, HistogramMode::Coverage, 0.5).unwrap(),
            2
        );
        assert_eq!(
            estimate_count_density(&blobs, 5, HistogramMode::Coverage, 10.0).unwrap(),
            1
        );
    }

    #[test]
    fn scan_on_constant_and_blobs() {
        let white = StimulusImage::<f64>::white(80, 80);
        let scan = resolution_scan(&white, &[5, 10, 20], 1, HistogramMode::Coverage).unwrap();
        assert!(scan
            .iter()
            .all(|e| e.choice.threshold == 0.0 && e.choice.exact));

        let scan = resolution_scan(&two_blobs(), &[5, 10], 2, HistogramMode::Coverage).unwrap();
        assert!(scan
            .iter()
            .all(|e| e.choice.threshold > 0.0 && e.choice.exact));
        assert!(resolution_scan(&white, &[5], 0, HistogramMode::Coverage).is_err());
    }

    #[test]
    fn histogram_json() {
        let h = compute_histogram(&two_blobs(), 10, HistogramMode::IntensitySum).unwrap();
        let json = serde_json::to_value(&h).unwrap();
        assert_eq!(json["mode"], "intensity_sum");
        assert_eq!(json["bin_size"], 10);
        let back: DensityHistogram<f64> = serde_json::from_value(json).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "coverage".parse::<HistogramMode>().unwrap(),
            HistogramMode::Coverage
        );
        assert_eq!(
            "intensity_sum".parse::<HistogramMode>().unwrap(),
            HistogramMode::IntensitySum
        );
        assert!("dense".parse::<HistogramMode>().is_err());
    }
}
