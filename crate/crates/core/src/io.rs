//! File formats: 8-bit grayscale PGM (P5) and PNG stimuli, centers CSV, and
//! JSON documents.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use image::{GrayImage, ImageFormat};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::distance::CenterSet;
use crate::synth::StimulusImage;
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageKind {
    Pgm,
    Png,
}

impl ImageKind {
    /// Picks the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("pgm") => Ok(ImageKind::Pgm),
            Some("png") => Ok(ImageKind::Png),
            _ => Err(Error::data(
                path.display().to_string(),
                "image path must end in .pgm or .png",
            )),
        }
    }

    fn format(self) -> ImageFormat {
        match self {
            ImageKind::Pgm => ImageFormat::Pnm,
            ImageKind::Png => ImageFormat::Png,
        }
    }
}

fn gray<T: Scalar>(img: &StimulusImage<T>) -> GrayImage {
    GrayImage::from_raw(img.width(), img.height(), img.to_gray8())
        .expect("buffer matches dimensions")
}

/// Encodes with intensity 1.0 mapped to 255.
pub fn encode_image<T: Scalar>(img: &StimulusImage<T>, kind: ImageKind) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    match kind {
        ImageKind::Pgm => {
            use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
            let enc =
                PnmEncoder::new(&mut buf).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
            gray(img)
                .write_with_encoder(enc)
                .map_err(|e| Error::data("image", e))?;
        }
        ImageKind::Png => gray(img)
            .write_to(&mut buf, kind.format())
            .map_err(|e| Error::data("image", e))?,
    }
    Ok(buf.into_inner())
}

/// Decodes a PGM or PNG (format sniffed from content). Color images are
/// converted to luma.
pub fn decode_image<T: Scalar>(bytes: &[u8]) -> Result<StimulusImage<T>> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::data("image", e))?;
    let luma = img.to_luma8();
    StimulusImage::from_gray8(luma.width(), luma.height(), luma.as_raw())
}

pub fn read_image<T: Scalar>(path: &Path) -> Result<StimulusImage<T>> {
    let bytes = fs::read(path)?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Data { reason, .. } => Error::data(path.display().to_string(), reason),
        other => other,
    })
}

pub fn write_image<T: Scalar>(img: &StimulusImage<T>, path: &Path) -> Result<()> {
    let kind = ImageKind::from_path(path)?;
    fs::write(path, encode_image(img, kind)?)?;
    Ok(())
}

/// Reads centers from CSV with header `x,y`.
pub fn read_centers_csv<T: Scalar, R: Read>(reader: R) -> Result<CenterSet<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::data("header", e))?;
    if headers.iter().collect::<Vec<_>>() != ["x", "y"] {
        return Err(Error::data("header", "expected `x,y`"));
    }
    let mut centers = Vec::new();
    for (i, row) in rdr.deserialize::<(f64, f64)>().enumerate() {
        let (x, y) = row.map_err(|e| Error::data(format!("line {}", i + 2), e))?;
        centers.push([T::lit(x), T::lit(y)]);
    }
    CenterSet::new(centers)
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(path.display().to_string(), e))
}

pub fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("schema types serialize");
    s.push('\n');
    s
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    fs::write(path, to_json(value))?;
    Ok(())
}
