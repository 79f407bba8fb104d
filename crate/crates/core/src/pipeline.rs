//! End-to-end compositions shared by the CLI and the HTTP service.

use serde::{Deserialize, Serialize};

use crate::calibration::{
    extract_thresholds, fit_threshold_model, inexact_count, model_differential, raw_differential,
    summarize_differentials, DifferentialSummary, Factors, LinearThresholdModel, Predictor,
    ResponseRecord,
};
use crate::density::{build_density_tree, compute_histogram, HistogramMode};
use crate::distance::build_distance_tree;
use crate::synth::{generate_dataset, rasterize, Dataset, GenParams, RenderParams, StimulusImage};
use crate::topology::MergeTree;
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityOptions {
    pub bin_size: u32,
    pub mode: HistogramMode,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            bin_size: 20,
            mode: HistogramMode::Coverage,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelSpec {
    Distance,
    Density(DensityOptions),
}

pub fn image_tree<T: Scalar>(
    image: &StimulusImage<T>,
    opts: DensityOptions,
) -> Result<MergeTree<T>> {
    build_density_tree(&compute_histogram(image, opts.bin_size, opts.mode)?)
}

/// Tree of a dataset under either model; `render` is only used by the
/// density model.
pub fn dataset_tree<T: Scalar>(
    dataset: &Dataset<T>,
    render: &RenderParams<T>,
    model: ModelSpec,
) -> Result<MergeTree<T>> {
    match model {
        ModelSpec::Distance => Ok(build_distance_tree(&dataset.center_set()?)),
        ModelSpec::Density(opts) => image_tree(&rasterize(dataset, render)?, opts),
    }
}

/// Fixed stimulus settings for regenerating response stimuli from factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StimulusSetup<T> {
    pub width: u32,
    pub height: u32,
    pub snr: T,
    /// Seed for records that do not carry their own.
    pub default_seed: u64,
    pub model: ModelSpec,
}

impl<T: Scalar> StimulusSetup<T> {
    pub fn gen_params(&self, f: &Factors<T>) -> GenParams<T> {
        GenParams {
            width: self.width,
            height: self.height,
            cluster_count: f.c,
            distribution_size: f.s,
            point_count: f.n,
            snr: self.snr,
        }
    }

    /// Regenerates the stimulus a record describes and builds its tree.
    pub fn tree_for(&self, record: &ResponseRecord<T>) -> Result<MergeTree<T>> {
        let f = &record.factors;
        let data = generate_dataset(
            &self.gen_params(f),
            record.seed.unwrap_or(self.default_seed),
        )?;
        dataset_tree(
            &data,
            &RenderParams {
                point_area: f.p,
                opacity: f.o,
            },
            self.model,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct CalibrationReport<T> {
    pub model: LinearThresholdModel<T>,
    pub inexact_extractions: usize,
    pub model_differential: DifferentialSummary<T>,
    pub raw_differential: DifferentialSummary<T>,
    pub records: Vec<ResponseRecord<T>>,
}

/// Extracts thresholds against `trees`, fits `predictor`, and summarizes
/// both the model and the raw differentials.
pub fn calibrate_with_trees<T: Scalar>(
    records: &[ResponseRecord<T>],
    trees: &[MergeTree<T>],
    predictor: Predictor,
) -> Result<CalibrationReport<T>> {
    let records = extract_thresholds(records, trees)?;
    let model = fit_threshold_model(&records, predictor)?;
    let model_diffs = records
        .iter()
        .zip(trees)
        .map(|(r, t)| model_differential(r, &model, t))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<i64> = records.iter().map(raw_differential).collect();
    Ok(CalibrationReport {
        inexact_extractions: inexact_count(&records),
        model_differential: summarize_differentials(&model_diffs)?,
        raw_differential: summarize_differentials(&raw)?,
        model,
        records,
    })
}

pub fn calibrate<T: Scalar>(
    records: &[ResponseRecord<T>],
    setup: &StimulusSetup<T>,
    predictor: Predictor,
) -> Result<CalibrationReport<T>> {
    if records.is_empty() {
        return Err(Error::param("records", "no responses to calibrate"));
    }
    let trees = records
        .iter()
        .map(|r| setup.tree_for(r))
        .collect::<Result<Vec<_>>>()?;
    calibrate_with_trees(records, &trees, predictor)
}
