use alseg::geom::Region;
use alseg::volume::{Dtype, VoxelSource, VoxelVolume};
use axum::http::StatusCode;

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self, ApiError> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(ApiError::bad_request(format!("axis {s:?} is not x, y or z"))),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Gray,
    Confidence,
    Uncertainty,
}

impl Layer {
    pub fn parse(s: &str) -> Result<Self, ApiError> {
        match s {
            "gray" => Ok(Layer::Gray),
            "confidence" => Ok(Layer::Confidence),
            "uncertainty" => Ok(Layer::Uncertainty),
            _ => Err(ApiError::bad_request(format!("unknown layer {s:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layer::Gray => "gray",
            Layer::Confidence => "confidence",
            Layer::Uncertainty => "uncertainty",
        }
    }
}

/// One slice as rows of values: `(width, height, values)`. The image
/// x axis is the lower remaining volume axis.
pub fn slice_values(vol: &VoxelVolume, axis: Axis, index: usize) -> Result<(usize, usize, Vec<f64>), ApiError> {
    let dims = vol.dims();
    let a = axis.index();
    if index >= dims[a] {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "out_of_bounds",
            format!("slice {index} outside 0..{}", dims[a]),
        ));
    }
    let mut lo = [0; 3];
    let mut hi = dims;
    lo[a] = index;
    hi[a] = index + 1;
    let mut buf = Vec::new();
    vol.read_region(&Region::new(lo, hi), &mut buf)?;
    let (w, h) = match axis {
        Axis::X => (dims[1], dims[2]),
        Axis::Y => (dims[0], dims[2]),
        Axis::Z => (dims[0], dims[1]),
    };
    Ok((w, h, buf))
}

/// Window used when the request gives none.
pub fn default_window(layer: Layer, dtype: Dtype, values: &[f64]) -> (f64, f64) {
    match layer {
        Layer::Confidence => (0.0, 100.0),
        Layer::Uncertainty => (0.0, 1.0),
        Layer::Gray => match dtype {
            Dtype::F32 => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    (lo, hi)
                } else {
                    (lo, lo + 1.0)
                }
            }
            _ => (0.0, dtype.max_value()),
        },
    }
}

/// `round(255·(v − min)/(max − min))`, clamped.
pub fn window_to_u8(values: &[f64], min: f64, max: f64) -> Result<Vec<u8>, ApiError> {
    if !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(ApiError::bad_request(format!("window [{min}, {max}] is empty")));
    }
    let scale = 255.0 / (max - min);
    Ok(values
        .iter()
        .map(|&v| ((v - min) * scale).round().clamp(0.0, 255.0) as u8)
        .collect())
}

/// 8-bit grayscale PNG.
pub fn encode_png(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory png header");
        w.write_image_data(pixels).expect("in-memory png data");
    }
    out
}
