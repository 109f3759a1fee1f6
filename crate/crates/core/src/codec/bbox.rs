//! Pixel <-> 0..=1000 grid conversion for bounding boxes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::NormalizedBBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl PixelBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BBoxError {
    #[error("degenerate image extent {width}x{height}")]
    DegenerateImage { width: f64, height: f64 },
    #[error("box ({x1}, {y1}, {x2}, {y2}) lies outside the {width}x{height} image or is inverted")]
    OutOfBounds { x1: f64, y1: f64, x2: f64, y2: f64, width: f64, height: f64 },
}

fn check_extent(width: f64, height: f64) -> Result<(), BBoxError> {
    // NaN fails both comparisons
    if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(BBoxError::DegenerateImage { width, height });
    }
    Ok(())
}

/// round-half-up of `v / extent * 1000`, clamped to the grid.
fn to_grid(v: f64, extent: f64) -> u16 {
    let scaled = (v / extent * f64::from(NormalizedBBox::GRID) + 0.5).floor();
    scaled.clamp(0.0, f64::from(NormalizedBBox::GRID)) as u16
}

/// Maps a pixel-space box onto the integer 0..=1000 grid.
pub fn normalize_bbox(px: PixelBox, width: f64, height: f64) -> Result<NormalizedBBox, BBoxError> {
    check_extent(width, height)?;
    let PixelBox { x1, y1, x2, y2 } = px;
    let inside = 0.0 <= x1 && x1 <= x2 && x2 <= width && 0.0 <= y1 && y1 <= y2 && y2 <= height;
    if !inside {
        return Err(BBoxError::OutOfBounds { x1, y1, x2, y2, width, height });
    }
    Ok(NormalizedBBox::new(to_grid(x1, width), to_grid(y1, height), to_grid(x2, width), to_grid(y2, height)))
}

/// Maps a grid box back to pixel coordinates.
pub fn denormalize_bbox(nb: NormalizedBBox, width: f64, height: f64) -> Result<PixelBox, BBoxError> {
    check_extent(width, height)?;
    let grid = f64::from(NormalizedBBox::GRID);
    // grid edges map exactly onto the image edges so the result stays in bounds
    let f = |v: u16, extent: f64| match v {
        0 => 0.0,
        NormalizedBBox::GRID => extent,
        _ => f64::from(v) * extent / grid,
    };
    Ok(PixelBox::new(f(nb.x1, width), f(nb.y1, height), f(nb.x2, width), f(nb.y2, height)))
}
