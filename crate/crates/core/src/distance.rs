//! Distance-based model: persistent homology of cluster centers.
//!
//! Balls of growing diameter are centered on each cluster center; two
//! components merge once the balls of any of their members touch, which
//! happens at the Euclidean distance between those members. All components
//! are born at diameter zero, so every persistence equals a death value and
//! the finite deaths are exactly the single-linkage merge heights.

use serde::{Deserialize, Serialize};

use crate::topology::{Component, MergeTree, Unit};
use crate::{DisjointSet, Error, Result, Scalar};

/// Cluster-center positions in pixel coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "Vec<[T; 2]>", into = "Vec<[T; 2]>")]
pub struct CenterSet<T> {
    centers: Vec<[T; 2]>,
}

impl<T: Scalar> TryFrom<Vec<[T; 2]>> for CenterSet<T> {
    type Error = Error;

    fn try_from(centers: Vec<[T; 2]>) -> Result<Self> {
        Self::new(centers)
    }
}

impl<T: Scalar> From<CenterSet<T>> for Vec<[T; 2]> {
    fn from(set: CenterSet<T>) -> Self {
        set.centers
    }
}

impl<T: Scalar> CenterSet<T> {
    pub fn new(centers: Vec<[T; 2]>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::param("centers", "at least one center is required"));
        }
        if let Some(i) = centers
            .iter()
            .position(|c| !c[0].is_finite() || !c[1].is_finite())
        {
            return Err(Error::param("centers", format!("center {i} is not finite")));
        }
        Ok(Self { centers })
    }

    pub fn as_slice(&self) -> &[[T; 2]] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

fn distance<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Builds the distance merge tree over all `O(n^2)` center pairs.
///
/// Component ids are center indices. When two components merge, the one
/// holding the lower original index survives; equal-distance edges are
/// processed in lexicographic `(i, j)` order.
pub fn build_distance_tree<T: Scalar>(centers: &CenterSet<T>) -> MergeTree<T> {
    let pts = centers.as_slice();
    let n = pts.len();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push((distance(&pts[i], &pts[j]), i, j));
        }
    }
    // Stable sort keeps lexicographic order among equal distances.
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));

    let mut components: Vec<Component<T>> = (0..n)
        .map(|id| Component {
            id,
            birth: T::zero(),
            death: T::infinity(),
            survivor_of: None,
        })
        .collect();

    let mut sets = DisjointSet::new(n);
    let mut merges = 0;
    for (d, i, j) in edges {
        if merges + 1 == n {
            break;
        }
        let (li, lj) = (sets.label_of(i), sets.label_of(j));
        if li == lj {
            continue;
        }
        let (keep, die) = if li < lj { (li, lj) } else { (lj, li) };
        components[die].death = d;
        components[die].survivor_of = Some(keep);
        sets.union_labeled(i, j, keep);
        merges += 1;
    }

    MergeTree::new(Unit::Distance, components).expect("distance sweep yields a valid tree")
}

/// Number of clusters the distance model predicts at `threshold`, i.e. the
/// number of connected components of the graph joining centers at distance
/// `<= threshold`.
pub fn estimate_count_distance<T: Scalar>(centers: &CenterSet<T>, threshold: T) -> Result<usize> {
    build_distance_tree(centers).count_at(threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pts: &[[f64; 2]]) -> CenterSet<f64> {
        CenterSet::new(pts.to_vec()).unwrap()
    }

    fn finite_deaths(tree: &MergeTree<f64>) -> Vec<f64> {
        let mut d = tree.finite_persistences();
        d.reverse();
        d
    }

    #[test]
    fn two_centers() {
        let tree = build_distance_tree(&set(&[[0.0, 0.0], [6.0, 8.0]]));
        assert_eq!(finite_deaths(&tree), vec![10.0]);
        assert_eq!(tree.components()[1].survivor_of, Some(0));
        assert!(tree.components()[0].death.is_infinite());
    }

    #[test]
    fn collinear_centers() {
        let c = set(&[[0.0, 0.0], [10.0, 0.0], [25.0, 0.0]]);
        let tree = build_distance_tree(&c);
        assert_eq!(finite_deaths(&tree), vec![10.0, 15.0]);
        assert_eq!(tree.count_at(12.0).unwrap(), 2);
    }

    #[test]
    fn unit_square() {
        let c = set(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let tree = build_distance_tree(&c);
        assert_eq!(finite_deaths(&tree), vec![1.0, 1.0, 1.0]);
        let plot = tree.threshold_plot();
        assert_eq!(plot.count_at(0.5).unwrap(), 4);
        assert_eq!(plot.count_at(1.0).unwrap(), 1);
    }

    #[test]
    fn inclusive_edge_at_threshold() {
        let c = set(&[[0.0, 0.0], [10.0, 0.0]]);
        assert_eq!(estimate_count_distance(&c, 10.0).unwrap(), 1);
        assert_eq!(estimate_count_distance(&c, 9.99).unwrap(), 2);
        assert!(estimate_count_distance(&c, -0.1).is_err());
    }

    #[test]
    fn duplicate_center_adds_zero_persistence() {
        let base = [[3.0, 4.0], [50.0, 9.0], [20.0, 30.0]];
        let mut dup = base.to_vec();
        dup.push([50.0, 9.0]);
        let a = finite_deaths(&build_distance_tree(&set(&base)));
        let b = finite_deaths(&build_distance_tree(&set(&dup)));
        assert_eq!(b[0], 0.0);
        assert_eq!(&b[1..], &a[..]);
    }

    #[test]
    fn single_center_is_immortal() {
        let tree = build_distance_tree(&set(&[[1.0, 1.0]]));
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.count_at(0.0).unwrap(), 1);
    }

    #[test]
    fn rejects_bad_centers() {
        assert!(CenterSet::<f64>::new(vec![]).is_err());
        assert!(CenterSet::new(vec![[f64::NAN, 0.0]]).is_err());
        assert!(serde_json::from_str::<CenterSet<f64>>("[]").is_err());
        let ok: CenterSet<f64> = serde_json::from_str("[[1,2],[3,4]]").unwrap();
        assert_eq!(ok.len(), 2);
    }

    #[test]
    fn single_precision_matches_double_on_exact_inputs() {
        let c32 = CenterSet::new(vec![[0.0f32, 0.0], [3.0, 4.0], [3.0, 10.0]]).unwrap();
        let t = build_distance_tree(&c32);
        assert_eq!(t.finite_persistences(), vec![6.0f32, 5.0]);
    }
}
