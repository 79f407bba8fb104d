//! Merge trees, persistence pairs and persistence threshold plots.
//!
//! A merge tree records, for every connected component seen during a sweep,
//! the value at which it appeared (birth) and the value at which it was
//! absorbed by an older component (death). Exactly one component never dies.
//! The persistence `death - birth` of each component drives the threshold
//! plot: at threshold `t` the model predicts as many clusters as there are
//! components with persistence strictly greater than `t`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::serde_util::{extended_real, SchemaVersion};
use crate::{Error, Result, Scalar};

/// Which model produced a tree, and therefore the unit of its values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    /// Ball diameter in pixels.
    Distance,
    /// Bin whiteness fraction in `[0, 1]`.
    Density,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Distance => "distance",
            Unit::Density => "density",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Component<T> {
    pub id: usize,
    #[serde(with = "extended_real")]
    pub birth: T,
    #[serde(with = "extended_real")]
    pub death: T,
    /// Component that absorbed this one when it died.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survivor_of: Option<usize>,
}

impl<T: Scalar> Component<T> {
    pub fn persistence(&self) -> T {
        self.death - self.birth
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "RawMergeTree<T>")]
pub struct MergeTree<T> {
    schema: SchemaVersion,
    unit: Unit,
    components: Vec<Component<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawMergeTree<T> {
    #[serde(default)]
    #[allow(dead_code)]
    schema: SchemaVersion,
    unit: Unit,
    components: Vec<Component<T>>,
}

impl<T: Scalar> TryFrom<RawMergeTree<T>> for MergeTree<T> {
    type Error = Error;

    fn try_from(raw: RawMergeTree<T>) -> Result<Self> {
        MergeTree::new(raw.unit, raw.components)
    }
}

impl<T: Scalar> MergeTree<T> {
    /// Builds a tree after checking its invariants: at least one component,
    /// unique ids, finite births, `death >= birth`, exactly one infinite
    /// death, and `survivor_of` references that resolve.
    pub fn new(unit: Unit, components: Vec<Component<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Structure("tree has no components".into()));
        }
        let mut ids: Vec<usize> = components.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Structure("duplicate component id".into()));
        }
        let mut infinite = 0;
        for c in &components {
            if !c.birth.is_finite() {
                return Err(Error::Structure(format!(
                    "component {} has non-finite birth",
                    c.id
                )));
            }
            if c.death.is_nan() || c.death < c.birth {
                return Err(Error::Structure(format!(
                    "component {} dies before it is born",
                    c.id
                )));
            }
            if c.death.is_infinite() {
                infinite += 1;
                if c.survivor_of.is_some() {
                    return Err(Error::Structure(format!(
                        "immortal component {} cannot have a survivor",
                        c.id
                    )));
                }
            }
            if let Some(s) = c.survivor_of {
                if ids.binary_search(&s).is_err() || s == c.id {
                    return Err(Error::Structure(format!(
                        "component {} names unknown survivor {s}",
                        c.id
                    )));
                }
            }
        }
        if infinite != 1 {
            return Err(Error::Structure(format!(
                "expected exactly one component with infinite death, found {infinite}"
            )));
        }
        Ok(Self {
            schema: SchemaVersion,
            unit,
            components,
        })
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// One pair per component, in component order.
    pub fn persistence_pairs(&self) -> Vec<PersistencePair<T>> {
        self.components
            .iter()
            .map(|c| PersistencePair {
                id: c.id,
                birth: c.birth,
                death: c.death,
                persistence: c.persistence(),
            })
            .collect()
    }

    /// Finite persistences sorted descending.
    pub fn finite_persistences(&self) -> Vec<T> {
        let mut p: Vec<T> = self
            .components
            .iter()
            .filter(|c| c.death.is_finite())
            .map(Component::persistence)
            .collect();
        sort_descending(&mut p);
        p
    }

    /// Number of components whose persistence exceeds `threshold`; the
    /// immortal component always counts.
    pub fn count_at(&self, threshold: T) -> Result<usize> {
        check_threshold(threshold)?;
        Ok(1 + self
            .components
            .iter()
            .filter(|c| c.death.is_finite() && c.persistence() > threshold)
            .count())
    }

    pub fn threshold_for_count(&self, k: usize) -> Result<ThresholdChoice<T>> {
        choose_threshold(&self.finite_persistences(), k)
    }

    pub fn threshold_plot(&self) -> ThresholdPlot<T> {
        ThresholdPlot::from_breakpoints(self.unit, self.finite_persistences())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PersistencePair<T> {
    pub id: usize,
    #[serde(with = "extended_real")]
    pub birth: T,
    #[serde(with = "extended_real")]
    pub death: T,
    #[serde(with = "extended_real")]
    pub persistence: T,
}

impl<T: Scalar> PersistencePair<T> {
    pub fn is_infinite(&self) -> bool {
        self.death.is_infinite()
    }
}

/// Result of back-solving a threshold from a desired cluster count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ThresholdChoice<T> {
    /// Representative threshold inside the interval.
    pub threshold: T,
    /// Count the model yields at `threshold`.
    pub achieved_count: usize,
    /// False when the requested count is unattainable and the nearest
    /// attainable count was used instead.
    pub exact: bool,
    /// Half-open interval `[lo, hi)` of thresholds giving `achieved_count`.
    #[serde(with = "extended_real")]
    pub interval_lo: T,
    #[serde(with = "extended_real")]
    pub interval_hi: T,
}

/// Step function from persistence threshold to cluster count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "RawThresholdPlot<T>")]
pub struct ThresholdPlot<T> {
    schema: SchemaVersion,
    unit: Unit,
    /// Finite persistences, descending.
    breakpoints: Vec<T>,
    count_at_zero: usize,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawThresholdPlot<T> {
    #[serde(default)]
    #[allow(dead_code)]
    schema: SchemaVersion,
    unit: Unit,
    breakpoints: Vec<T>,
    count_at_zero: usize,
}

impl<T: Scalar> TryFrom<RawThresholdPlot<T>> for ThresholdPlot<T> {
    type Error = Error;

    fn try_from(raw: RawThresholdPlot<T>) -> Result<Self> {
        if raw
            .breakpoints
            .iter()
            .any(|b| !b.is_finite() || *b < T::zero())
        {
            return Err(Error::Structure(
                "breakpoints must be finite and non-negative".into(),
            ));
        }
        if raw.breakpoints.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Structure("breakpoints must be descending".into()));
        }
        let plot = ThresholdPlot::from_breakpoints(raw.unit, raw.breakpoints);
        if plot.count_at_zero != raw.count_at_zero {
            return Err(Error::Structure(format!(
                "count_at_zero {} disagrees with breakpoints (expected {})",
                raw.count_at_zero, plot.count_at_zero
            )));
        }
        Ok(plot)
    }
}

/// One constant piece `[start, end)` of a threshold plot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Step<T> {
    pub start: T,
    #[serde(with = "extended_real")]
    pub end: T,
    pub count: usize,
}

impl<T: Scalar> ThresholdPlot<T> {
    fn from_breakpoints(unit: Unit, mut breakpoints: Vec<T>) -> Self {
        sort_descending(&mut breakpoints);
        let count_at_zero = 1 + breakpoints.iter().filter(|b| **b > T::zero()).count();
        Self {
            schema: SchemaVersion,
            unit,
            breakpoints,
            count_at_zero,
        }
    }

    /// Rebuilds a plot from serialized persistence pairs, checking that
    /// exactly one pair is infinite and each persistence equals
    /// `death - birth`.
    pub fn from_pairs(unit: Unit, pairs: &[PersistencePair<T>]) -> Result<Self> {
        let infinite = pairs.iter().filter(|p| p.is_infinite()).count();
        if infinite != 1 {
            return Err(Error::Structure(format!(
                "expected exactly one infinite pair, found {infinite}"
            )));
        }
        let mut breakpoints = Vec::with_capacity(pairs.len() - 1);
        for p in pairs.iter().filter(|p| !p.is_infinite()) {
            if !(p.birth.is_finite() && p.death >= p.birth && p.persistence == p.death - p.birth) {
                return Err(Error::Structure(format!("pair {} is inconsistent", p.id)));
            }
            breakpoints.push(p.persistence);
        }
        Ok(Self::from_breakpoints(unit, breakpoints))
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn count_at_zero(&self) -> usize {
        self.count_at_zero
    }

    pub fn count_at(&self, threshold: T) -> Result<usize> {
        check_threshold(threshold)?;
        // Breakpoints are descending: count the prefix strictly above.
        let above = self.breakpoints.partition_point(|b| *b > threshold);
        Ok(1 + above)
    }

    pub fn threshold_for_count(&self, k: usize) -> Result<ThresholdChoice<T>> {
        choose_threshold(&self.breakpoints, k)
    }

    /// Constant pieces in ascending threshold order; the last piece is
    /// `[max breakpoint, inf)` with count 1.
    pub fn steps(&self) -> Vec<Step<T>> {
        let mut edges: Vec<T> = self
            .breakpoints
            .iter()
            .rev()
            .copied()
            .filter(|b| *b > T::zero())
            .collect();
        edges.dedup();
        let mut steps = Vec::with_capacity(edges.len() + 1);
        let mut start = T::zero();
        let mut count = self.count_at_zero;
        for edge in edges {
            steps.push(Step {
                start,
                end: edge,
                count,
            });
            count -= self.breakpoints.iter().filter(|b| **b == edge).count();
            start = edge;
        }
        steps.push(Step {
            start,
            end: T::infinity(),
            count,
        });
        steps
    }
}

fn check_threshold<T: Scalar>(t: T) -> Result<()> {
    if t.is_nan() || t < T::zero() {
        return Err(Error::param("threshold", format!("must be >= 0, got {t}")));
    }
    Ok(())
}

fn sort_descending<T: Scalar>(v: &mut [T]) {
    v.sort_by(|a, b| b.partial_cmp(a).expect("persistences are never NaN"));
}

/// Interval of thresholds yielding count `k` for descending finite
/// persistences `p`, or `None` when the interval is empty.
fn count_interval<T: Scalar>(p: &[T], k: usize) -> Option<(T, T)> {
    let m = p.len();
    if k == 0 || k > m + 1 {
        return None;
    }
    let hi = if k == 1 { T::infinity() } else { p[k - 2] };
    let lo = if k == m + 1 { T::zero() } else { p[k - 1] };
    (hi > lo).then_some((lo, hi))
}

fn choose_threshold<T: Scalar>(p: &[T], k: usize) -> Result<ThresholdChoice<T>> {
    if k == 0 {
        return Err(Error::param("count", "cluster count must be >= 1"));
    }
    let achieved = if count_interval(p, k).is_some() {
        k
    } else {
        // Count 1 is always attainable. Ascending scan keeps the smaller
        // count on equal distance.
        (1..=p.len() + 1)
            .filter(|c| count_interval(p, *c).is_some())
            .min_by_key(|c| c.abs_diff(k))
            .expect("count 1 is always attainable")
    };
    let (lo, hi) = count_interval(p, achieved).expect("attainable count has an interval");
    let threshold = if hi.is_infinite() {
        lo
    } else {
        (lo + hi) / T::lit(2.0)
    };
    Ok(ThresholdChoice {
        threshold,
        achieved_count: achieved,
        exact: achieved == k,
        interval_lo: lo,
        interval_hi: hi,
    })
}
