//! Linear threshold models fitted from viewer responses.
//!
//! Each response names how many clusters a viewer saw (`U`) in a stimulus.
//! Back-solving that count on the stimulus' merge tree gives a threshold;
//! regressing thresholds on an encoding factor gives a model that predicts
//! the threshold, and so the cluster count, for unseen factor values.

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::serde_util::SchemaVersion;
use crate::topology::{MergeTree, ThresholdChoice, Unit};
use crate::{Error, Result, Scalar};

/// Encoding factors of one stimulus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Factors<T> {
    /// Distribution size, pixels.
    #[serde(rename = "S")]
    pub s: T,
    /// Number of points.
    #[serde(rename = "N")]
    pub n: usize,
    /// Point area, square pixels.
    #[serde(rename = "P")]
    pub p: T,
    /// Opacity.
    #[serde(rename = "O")]
    pub o: T,
    /// Generated cluster count.
    #[serde(rename = "C")]
    pub c: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predictor {
    S,
    N,
    P,
    #[serde(rename = "N_and_P")]
    NAndP,
    O,
}

impl Predictor {
    pub fn arity(self) -> usize {
        match self {
            Predictor::NAndP => 2,
            _ => 1,
        }
    }

    fn values<T: Scalar>(self, f: &Factors<T>) -> [T; 2] {
        let n = T::from_count(f.n);
        match self {
            Predictor::S => [f.s, T::zero()],
            Predictor::N => [n, T::zero()],
            Predictor::P => [f.p, T::zero()],
            Predictor::NAndP => [n, f.p],
            Predictor::O => [f.o, T::zero()],
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Predictor::S => "S",
            Predictor::N => "N",
            Predictor::P => "P",
            Predictor::NAndP => "N_and_P",
            Predictor::O => "O",
        })
    }
}

impl std::str::FromStr for Predictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" => Ok(Predictor::S),
            "N" => Ok(Predictor::N),
            "P" => Ok(Predictor::P),
            "N_and_P" | "NP" | "N*P" => Ok(Predictor::NAndP),
            "O" => Ok(Predictor::O),
            other => Err(Error::param(
                "predictor",
                format!("unknown predictor `{other}` (expected S, N, P, N_and_P or O)"),
            )),
        }
    }
}

/// Threshold back-solved from a response, with the model unit it is in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Extraction<T> {
    pub unit: Unit,
    #[serde(flatten)]
    pub choice: ThresholdChoice<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ResponseRecord<T> {
    #[serde(default)]
    pub participant: String,
    #[serde(flatten)]
    pub factors: Factors<T>,
    /// Cluster count the viewer reported.
    #[serde(rename = "U")]
    pub user_count: usize,
    /// Seed of the stimulus the viewer saw, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<Extraction<T>>,
}

impl<T: Scalar> ResponseRecord<T> {
    pub fn new(factors: Factors<T>, user_count: usize) -> Result<Self> {
        let r = Self {
            participant: String::new(),
            factors,
            user_count,
            seed: None,
            extraction: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_count == 0 {
            return Err(Error::param("U", "reported cluster count must be >= 1"));
        }
        if self.factors.c == 0 {
            return Err(Error::param("C", "generated cluster count must be >= 1"));
        }
        Ok(())
    }

    pub fn extracted_threshold(&self) -> Option<T> {
        self.extraction.map(|e| e.choice.threshold)
    }
}

/// Reads response rows with header `participant,S,N,P,O,C,U` and an optional
/// trailing `seed` column.
pub fn read_responses<T: Scalar, R: Read>(reader: R) -> Result<Vec<ResponseRecord<T>>> {
    #[derive(Deserialize)]
    struct Row {
        participant: String,
        #[serde(rename = "S")]
        s: f64,
        #[serde(rename = "N")]
        n: usize,
        #[serde(rename = "P")]
        p: f64,
        #[serde(rename = "O")]
        o: f64,
        #[serde(rename = "C")]
        c: usize,
        #[serde(rename = "U")]
        u: usize,
        #[serde(default)]
        seed: Option<u64>,
    }

    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::data("header", e))?.clone();
    let expected = ["participant", "S", "N", "P", "O", "C", "U"];
    if headers.len() < expected.len() || expected.iter().zip(headers.iter()).any(|(a, b)| *a != b) {
        return Err(Error::data(
            "header",
            format!(
                "expected `{}`, found `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| {
            let field = e
                .position()
                .and_then(|_| match e.kind() {
                    csv::ErrorKind::Deserialize { err, .. } => {
                        err.field().and_then(|f| headers.get(f as usize))
                    }
                    _ => None,
                })
                .unwrap_or("row");
            Error::data(format!("line {line}: {field}"), e)
        })?;
        let rec = ResponseRecord {
            participant: row.participant,
            factors: Factors {
                s: T::lit(row.s),
                n: row.n,
                p: T::lit(row.p),
                o: T::lit(row.o),
                c: row.c,
            },
            user_count: row.u,
            seed: row.seed,
            extraction: None,
        };
        rec.validate()
            .map_err(|e| Error::data(format!("line {line}"), e))?;
        out.push(rec);
    }
    Ok(out)
}

/// Back-solves each record's reported count on its tree.
pub fn extract_thresholds<T: Scalar>(
    records: &[ResponseRecord<T>],
    trees: &[MergeTree<T>],
) -> Result<Vec<ResponseRecord<T>>> {
    if records.len() != trees.len() {
        return Err(Error::param(
            "trees",
            format!("{} records but {} trees", records.len(), trees.len()),
        ));
    }
    records
        .iter()
        .zip(trees)
        .map(|(r, t)| {
            r.validate()?;
            let choice = t.threshold_for_count(r.user_count)?;
            Ok(ResponseRecord {
                extraction: Some(Extraction {
                    unit: t.unit(),
                    choice,
                }),
                ..r.clone()
            })
        })
        .collect()
}

/// Number of records whose extraction fell back to a different count.
pub fn inexact_count<T: Scalar>(records: &[ResponseRecord<T>]) -> usize {
    records
        .iter()
        .filter(|r| r.extraction.is_some_and(|e| !e.choice.exact))
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "RawModel<T>")]
pub struct LinearThresholdModel<T> {
    schema: SchemaVersion,
    pub predictor: Predictor,
    pub unit: Unit,
    /// Slopes in predictor order, then the intercept.
    pub coefficients: Vec<T>,
    pub n_obs: usize,
    pub residual_rms: T,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawModel<T> {
    #[serde(default)]
    #[allow(dead_code)]
    schema: SchemaVersion,
    predictor: Predictor,
    unit: Unit,
    coefficients: Vec<T>,
    n_obs: usize,
    residual_rms: T,
}

impl<T: Scalar> TryFrom<RawModel<T>> for LinearThresholdModel<T> {
    type Error = Error;

    fn try_from(raw: RawModel<T>) -> Result<Self> {
        let m = LinearThresholdModel {
            schema: SchemaVersion,
            predictor: raw.predictor,
            unit: raw.unit,
            coefficients: raw.coefficients,
            n_obs: raw.n_obs,
            residual_rms: raw.residual_rms,
        };
        m.check_arity()?;
        Ok(m)
    }
}

impl<T: Scalar> LinearThresholdModel<T> {
    pub fn new(predictor: Predictor, unit: Unit, coefficients: Vec<T>) -> Result<Self> {
        let m = Self {
            schema: SchemaVersion,
            predictor,
            unit,
            coefficients,
            n_obs: 0,
            residual_rms: T::zero(),
        };
        m.check_arity()?;
        Ok(m)
    }

    fn check_arity(&self) -> Result<()> {
        if self.coefficients.len() != self.predictor.arity() + 1 {
            return Err(Error::param(
                "coefficients",
                format!(
                    "predictor {} needs {} coefficients, got {}",
                    self.predictor,
                    self.predictor.arity() + 1,
                    self.coefficients.len()
                ),
            ));
        }
        Ok(())
    }

    pub fn intercept(&self) -> T {
        *self.coefficients.last().expect("arity checked")
    }

    /// Predicted threshold; may be negative when extrapolating.
    pub fn predict(&self, factors: &Factors<T>) -> T {
        let x = self.predictor.values(factors);
        let k = self.predictor.arity();
        (0..k).fold(self.intercept(), |acc, j| acc + self.coefficients[j] * x[j])
    }
}

/// Ordinary least squares of extracted thresholds on `predictor`, solved by
/// Householder QR.
pub fn fit_threshold_model<T: Scalar>(
    records: &[ResponseRecord<T>],
    predictor: Predictor,
) -> Result<LinearThresholdModel<T>> {
    let k = predictor.arity() + 1;
    if records.len() < k + 1 {
        return Err(Error::param(
            "records",
            format!("need at least {} records, got {}", k + 1, records.len()),
        ));
    }
    let mut unit = None;
    let mut design = Vec::with_capacity(records.len() * k);
    let mut target = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let e = r.extraction.ok_or_else(|| {
            Error::param("records", format!("record {i} has no extracted threshold"))
        })?;
        match unit {
            None => unit = Some(e.unit),
            Some(u) if u != e.unit => {
                return Err(Error::param(
                    "records",
                    "records mix distance and density thresholds",
                ))
            }
            _ => {}
        }
        let x = predictor.values(&r.factors);
        design.extend_from_slice(&x[..k - 1]);
        design.push(T::one());
        target.push(e.choice.threshold);
    }

    let coefficients = least_squares(&design, &target, k)?;
    let mut model = LinearThresholdModel::new(predictor, unit.expect("non-empty"), coefficients)?;
    let n = records.len();
    let sse: T = records
        .iter()
        .zip(&target)
        .map(|(r, t)| {
            let e = *t - model.predict(&r.factors);
            e * e
        })
        .sum();
    model.n_obs = n;
    model.residual_rms = (sse / T::from_count(n)).sqrt();
    Ok(model)
}

/// Solves `min |A x - b|` for row-major `A` with `k` columns.
fn least_squares<T: Scalar>(a: &[T], b: &[T], k: usize) -> Result<Vec<T>> {
    let n = b.len();
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let col_norm = |a: &[T], j: usize| {
        (0..n)
            .map(|i| a[i * k + j] * a[i * k + j])
            .sum::<T>()
            .sqrt()
    };
    let scale = (0..k).map(|j| col_norm(&a, j)).fold(T::zero(), T::max);
    let tol = T::epsilon() * T::from_count(n.max(k)) * T::lit(100.0);

    for j in 0..k {
        let norm = (j..n)
            .map(|i| a[i * k + j] * a[i * k + j])
            .sum::<T>()
            .sqrt();
        if norm <= tol * scale.max(T::min_positive_value()) {
            return Err(Error::Degenerate(
                "predictor values are collinear with the intercept or each other".into(),
            ));
        }
        let alpha = if a[j * k + j] > T::zero() {
            -norm
        } else {
            norm
        };
        // v = x - alpha * e1, stored in a scratch vector.
        let mut v: Vec<T> = (j..n).map(|i| a[i * k + j]).collect();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|x| *x * *x).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for c in j..k {
            let dot: T = (j..n).map(|i| v[i - j] * a[i * k + c]).sum();
            let f = two * dot / vnorm2;
            for i in j..n {
                a[i * k + c] = a[i * k + c] - f * v[i - j];
            }
        }
        let dot: T = (j..n).map(|i| v[i - j] * b[i]).sum();
        let f = two * dot / vnorm2;
        for i in j..n {
            b[i] = b[i] - f * v[i - j];
        }
    }

    let mut x = vec![T::zero(); k];
    for j in (0..k).rev() {
        let s = (j + 1..k).fold(b[j], |acc, c| acc - a[j * k + c] * x[c]);
        x[j] = s / a[j * k + j];
    }
    Ok(x)
}

/// `U - C_model(T(factors))`, the reported count minus the count the model
/// predicts on this stimulus' tree. Negative predicted thresholds count as 0.
pub fn model_differential<T: Scalar>(
    record: &ResponseRecord<T>,
    model: &LinearThresholdModel<T>,
    tree: &MergeTree<T>,
) -> Result<i64> {
    model.check_arity()?;
    if tree.unit() != model.unit {
        return Err(Error::param(
            "model",
            format!(
                "model predicts {} thresholds but tree is {}",
                model.unit,
                tree.unit()
            ),
        ));
    }
    let t = model.predict(&record.factors).max(T::zero());
    let predicted = tree.count_at(t)?;
    Ok(record.user_count as i64 - predicted as i64)
}

/// `U - C`, the reported count minus the generated cluster count.
pub fn raw_differential<T: Scalar>(record: &ResponseRecord<T>) -> i64 {
    record.user_count as i64 - record.factors.c as i64
}

/// Unit-width integer histogram starting at `min`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntHistogram {
    pub min: i64,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DifferentialSummary<T> {
    #[serde(default)]
    schema: SchemaVersion,
    pub n_obs: usize,
    pub mean: T,
    /// Sample standard deviation (`n - 1`); 0 when `n_obs == 1`.
    pub std: T,
    pub single_observation: bool,
    pub histogram: IntHistogram,
}

pub fn summarize_differentials<T: Scalar>(values: &[i64]) -> Result<DifferentialSummary<T>> {
    let n = values.len();
    let (Some(&min), Some(&max)) = (values.iter().min(), values.iter().max()) else {
        return Err(Error::param("values", "cannot summarize an empty list"));
    };
    let as_t = |v: i64| T::from_i64(v).expect("differential converts to scalar");
    let mean = values.iter().map(|v| as_t(*v)).sum::<T>() / T::from_count(n);
    let std = if n > 1 {
        let ss: T = values
            .iter()
            .map(|v| {
                let d = as_t(*v) - mean;
                d * d
            })
            .sum();
        (ss / T::from_count(n - 1)).sqrt()
    } else {
        T::zero()
    };
    let mut counts = vec![0; (max - min) as usize + 1];
    for v in values {
        counts[(v - min) as usize] += 1;
    }
    Ok(DifferentialSummary {
        schema: SchemaVersion,
        n_obs: n,
        mean,
        std,
        single_observation: n == 1,
        histogram: IntHistogram { min, counts },
    })
}
