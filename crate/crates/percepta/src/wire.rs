//! Request and response documents shared by the CLI and the HTTP service.
//! Both front ends call [`estimate`] and serialize with
//! [`percepta_core::io::to_json`], so identical requests yield identical
//! bytes.

use std::path::PathBuf;

use base64::Engine;
use percepta_core::density::HistogramMode;
use percepta_core::distance::build_distance_tree;
use percepta_core::io::{decode_image, read_image};
use percepta_core::pipeline::{image_tree, DensityOptions};
use percepta_core::serde_util::SchemaVersion;
use percepta_core::synth::{generate_dataset, rasterize};
use percepta_core::topology::Unit;
use percepta_core::{
    Dataset, GenParams, MergeTree, PersistencePair, RenderParams, StimulusImage, ThresholdPlot,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RequestError {
    /// The request is well-formed JSON but breaks the request contract.
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] percepta_core::Error),
}

fn invalid(msg: impl Into<String>) -> RequestError {
    RequestError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Distance,
    Density,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    /// Local file; accepted by the CLI only.
    Path(PathBuf),
    /// Base64-encoded PGM or PNG bytes.
    Base64(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Dataset(Dataset),
    Image(ImageSource),
    Generate { params: GenParams, seed: u64 },
}

/// Factor changes applied on top of the source before estimation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Keep a uniform random subset of this many points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opacity: Option<f64>,
    /// Subsampling seed, 0 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRequest {
    #[serde(default)]
    pub schema: SchemaVersion,
    pub source: Source,
    pub model: ModelKind,
    /// Required for the density model, rejected for the distance model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderParams>,
    #[serde(default, skip_serializing_if = "Overrides::is_empty")]
    pub overrides: Overrides,
    /// Threshold at which to report a count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl EstimateRequest {
    pub fn new(source: Source, model: ModelKind) -> Self {
        Self {
            schema: SchemaVersion,
            source,
            model,
            density: None,
            render: None,
            overrides: Overrides::default(),
            threshold: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountAt {
    pub threshold: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Dataset,
    Image,
    Generate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsample {
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

/// Everything needed to reproduce a response from the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<GenParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<Subsample>,
    /// Points analysed after subsampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageSize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResponse {
    #[serde(default)]
    pub schema: SchemaVersion,
    pub unit: Unit,
    pub threshold_plot: ThresholdPlot,
    pub persistence_pairs: Vec<PersistencePair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count_at: Option<CountAt>,
    pub provenance: Provenance,
}

impl EstimateResponse {
    /// Recomputes the plot and the reported count from the returned pairs.
    pub fn revalidate(&self) -> percepta_core::Result<()> {
        let plot = ThresholdPlot::from_pairs(self.unit, &self.persistence_pairs)?;
        if plot != self.threshold_plot {
            return Err(percepta_core::Error::Structure(
                "threshold plot disagrees with persistence pairs".into(),
            ));
        }
        if let Some(c) = self.count_at {
            if plot.count_at(c.threshold)? != c.count {
                return Err(percepta_core::Error::Structure(
                    "reported count disagrees with persistence pairs".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Body of `POST /api/generate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    #[serde(default)]
    pub schema: SchemaVersion,
    pub params: GenParams,
    pub seed: u64,
}

/// Body of `POST /api/render`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    #[serde(default)]
    pub schema: SchemaVersion,
    pub dataset: Dataset,
    pub render: RenderParams,
}

fn load_image(source: &ImageSource, allow_paths: bool) -> Result<StimulusImage, RequestError> {
    match source {
        ImageSource::Path(path) if allow_paths => Ok(read_image(path)?),
        ImageSource::Path(_) => Err(invalid(
            "`source.image.path` is not accepted here; send `base64` image data",
        )),
        ImageSource::Base64(data) => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(data.trim())
                .map_err(|e| invalid(format!("`source.image.base64`: {e}")))?;
            Ok(decode_image(&bytes)?)
        }
    }
}

fn resolve_render(req: &EstimateRequest) -> Result<RenderParams, RequestError> {
    let o = &req.overrides;
    let point_area = o.point_area.or(req.render.map(|r| r.point_area));
    let opacity = o.opacity.or(req.render.map(|r| r.opacity));
    match (point_area, opacity) {
        (Some(point_area), Some(opacity)) => Ok(RenderParams {
            point_area,
            opacity,
        }),
        _ => Err(invalid(
            "the density model on points needs `render` (point_area and opacity) or both overrides",
        )),
    }
}

/// Runs one estimate. `allow_paths` controls whether image sources may name
/// local files.
pub fn estimate(
    req: &EstimateRequest,
    allow_paths: bool,
) -> Result<EstimateResponse, RequestError> {
    let density = match (req.model, req.density) {
        (ModelKind::Density, None) => {
            return Err(invalid(
                "`density` options are required for the density model",
            ))
        }
        (ModelKind::Distance, Some(_)) => {
            return Err(invalid("`density` options only apply to the density model"))
        }
        (_, d) => d,
    };
    let mut prov = Provenance {
        source: SourceKind::Dataset,
        params: None,
        seed: None,
        model: req.model,
        density,
        render: None,
        subsample: None,
        points: None,
        image: None,
    };

    let tree: MergeTree = match &req.source {
        Source::Image(img) => {
            prov.source = SourceKind::Image;
            if req.model == ModelKind::Distance {
                return Err(invalid(
                    "the distance model needs cluster centers; an image source has none",
                ));
            }
            if req.render.is_some() || !req.overrides.is_empty() {
                return Err(invalid(
                    "an image source cannot be re-rendered; drop `render` and `overrides`",
                ));
            }
            let image = load_image(img, allow_paths)?;
            prov.image = Some(ImageSize {
                width: image.width(),
                height: image.height(),
            });
            image_tree(&image, density.expect("checked above"))?
        }
        Source::Dataset(_) | Source::Generate { .. } => {
            let mut data = match &req.source {
                Source::Generate { params, seed } => {
                    prov.source = SourceKind::Generate;
                    prov.seed = Some(*seed);
                    generate_dataset(params, *seed)?
                }
                Source::Dataset(d) => d.clone(),
                Source::Image(_) => unreachable!(),
            };
            prov.params = Some(data.params.clone());
            if let Some(n) = req.overrides.subsample {
                let seed = req.overrides.seed.unwrap_or(0);
                data = data.subsample(n, seed);
                prov.subsample = Some(Subsample { n, seed });
            }
            prov.points = Some(data.points.len());
            match density {
                None => build_distance_tree(&data.center_set()?),
                Some(opts) => {
                    let render = resolve_render(req)?;
                    prov.render = Some(render);
                    let image = rasterize(&data, &render)?;
                    prov.image = Some(ImageSize {
                        width: image.width(),
                        height: image.height(),
                    });
                    image_tree(&image, opts)?
                }
            }
        }
    };

    let plot = tree.threshold_plot();
    let count_at = match req.threshold {
        Some(t) => Some(CountAt {
            threshold: t,
            count: plot.count_at(t)?,
        }),
        None => None,
    };
    Ok(EstimateResponse {
        schema: SchemaVersion,
        unit: tree.unit(),
        threshold_plot: plot,
        persistence_pairs: tree.persistence_pairs(),
        count_at,
        provenance: prov,
    })
}

/// Density options with the usual defaults.
pub fn density_options(bin_size: Option<u32>, mode: Option<HistogramMode>) -> DensityOptions {
    let d = DensityOptions::default();
    DensityOptions {
        bin_size: bin_size.unwrap_or(d.bin_size),
        mode: mode.unwrap_or(d.mode),
    }
}
