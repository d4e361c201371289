//! Grayscale images, PGM I/O and the non-overlapping patch decomposition.
//!
//! Every patch carries a 66-dim feature: an 8x8 grid of block means over the
//! patch's luminance followed by its normalized grid row and column.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Blocks per side used for feature pooling.
pub const POOL_SIDE: usize = 8;
/// Length of a visual patch feature.
pub const VISUAL_FEATURE_DIM: usize = POOL_SIDE * POOL_SIDE + 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("image has an empty dimension ({height}x{width})")]
    EmptyImage { height: usize, width: usize },
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    PixelCount { expected: usize, actual: usize },
    #[error("pixel {index} is outside [0, 1] or not finite")]
    PixelRange { index: usize },
    #[error("patch size must be positive")]
    ZeroPatchSize,
    #[error("{height}x{width} is not divisible by patch size {patch_size}")]
    NonDivisibleDimensions { height: usize, width: usize, patch_size: usize },
    #[error("malformed PGM: {0}")]
    MalformedPgm(String),
}

/// Single-channel image, row-major, luminance in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    height: usize,
    width: usize,
    pixels: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(height: usize, width: usize, pixels: Vec<T>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyImage { height, width });
        }
        if pixels.len() != height * width {
            return Err(ImageError::PixelCount { expected: height * width, actual: pixels.len() });
        }
        if let Some(index) = pixels.iter().position(|p| !p.is_finite() || *p < T::zero() || *p > T::one()) {
            return Err(ImageError::PixelRange { index });
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Result<Self, ImageError> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.pixels[row * self.width + col]
    }

    /// Parse a binary 8-bit PGM (`P5`). Pixel `p` becomes `p / maxval`.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut pos = 0usize;
        let magic = pgm_token(bytes, &mut pos)?;
        if magic != b"P5" {
            return Err(ImageError::MalformedPgm("magic is not P5".into()));
        }
        let width = pgm_number(bytes, &mut pos)?;
        let height = pgm_number(bytes, &mut pos)?;
        let maxval = pgm_number(bytes, &mut pos)?;
        if maxval == 0 || maxval > 255 {
            return Err(ImageError::MalformedPgm(format!("unsupported maxval {maxval}")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(ImageError::MalformedPgm("missing raster separator".into())),
        }
        let count = width.checked_mul(height).ok_or_else(|| ImageError::MalformedPgm("dimensions overflow".into()))?;
        let raster = bytes
            .get(pos..pos + count)
            .ok_or_else(|| ImageError::MalformedPgm(format!("raster truncated, need {count} bytes")))?;
        let scale = maxval as f64;
        let pixels = raster.iter().map(|&p| T::of((p as f64 / scale).min(1.0))).collect();
        Self::new(height, width, pixels)
    }

    /// Binary PGM with maxval 255; values are rounded to the nearest level.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() + 20);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height).expect("write to Vec");
        out.extend(self.pixels.iter().map(|p| (p.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8));
        out
    }
}

fn skip_whitespace_and_comments(bytes: &[u8], pos: &mut usize) {
    while let Some(&b) = bytes.get(*pos) {
        if b == b'#' {
            while let Some(&c) = bytes.get(*pos) {
                *pos += 1;
                if c == b'\n' || c == b'\r' {
                    break;
                }
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], ImageError> {
    skip_whitespace_and_comments(bytes, pos);
    let start = *pos;
    while let Some(&b) = bytes.get(*pos) {
        if b.is_ascii_whitespace() || b == b'#' {
            break;
        }
        *pos += 1;
    }
    if start == *pos {
        return Err(ImageError::MalformedPgm("unexpected end of header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize) -> Result<usize, ImageError> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| ImageError::MalformedPgm(format!("bad header field {:?}", String::from_utf8_lossy(tok))))
}

/// Fixed-length real feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    /// Panics on non-finite entries; features are always built from validated data.
    pub fn new(values: Vec<T>) -> Self {
        assert!(values.iter().all(|v| v.is_finite()), "feature values must be finite");
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![T::zero(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Keep the leading `dim` entries, zero-padding at the tail when shorter.
    pub fn fit_to(&self, dim: usize) -> Self {
        let mut values: Vec<T> = self.values.iter().copied().take(dim).collect();
        values.resize(dim, T::zero());
        Self { values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch<T> {
    pub index: usize,
    pub grid_row: usize,
    pub grid_col: usize,
    pub feature: FeatureVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid<T> {
    rows: usize,
    cols: usize,
    patch_size: usize,
    patches: Vec<Patch<T>>,
}

impl<T: Scalar> PatchGrid<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[Patch<T>] {
        &self.patches
    }

    pub fn patch(&self, index: usize) -> Option<&Patch<T>> {
        self.patches.get(index)
    }
}

fn check_tiling<T: Scalar>(image: &GrayImage<T>, patch_size: usize) -> Result<(usize, usize), ImageError> {
    if patch_size == 0 {
        return Err(ImageError::ZeroPatchSize);
    }
    let (h, w) = (image.height(), image.width());
    if h % patch_size != 0 || w % patch_size != 0 {
        return Err(ImageError::NonDivisibleDimensions { height: h, width: w, patch_size });
    }
    Ok((h / patch_size, w / patch_size))
}

/// Split `image` into row-major `patch_size` squares and compute their features.
pub fn tile_image<T: Scalar>(image: &GrayImage<T>, patch_size: usize) -> Result<PatchGrid<T>, ImageError> {
    let (rows, cols) = check_tiling(image, patch_size)?;
    let patches = (0..rows * cols)
        .map(|index| {
            let (grid_row, grid_col) = (index / cols, index % cols);
            Patch {
                index,
                grid_row,
                grid_col,
                feature: pooled_feature(image, grid_row, grid_col, patch_size, rows, cols),
            }
        })
        .collect();
    Ok(PatchGrid { rows, cols, patch_size, patches })
}

/// Feature of the patch at `(grid_row, grid_col)`.
///
/// The patch is split into an 8x8 grid of pixel blocks with boundaries at
/// `floor(i * patch_size / 8)`; when `patch_size < 8` a block that would be empty
/// takes the single pixel at its start. Means are accumulated in `f64`.
pub fn patch_feature<T: Scalar>(
    image: &GrayImage<T>,
    grid_row: usize,
    grid_col: usize,
    patch_size: usize,
) -> Result<FeatureVector<T>, ImageError> {
    let (rows, cols) = check_tiling(image, patch_size)?;
    assert!(grid_row < rows && grid_col < cols, "patch ({grid_row}, {grid_col}) outside {rows}x{cols} grid");
    Ok(pooled_feature(image, grid_row, grid_col, patch_size, rows, cols))
}

fn block_span(i: usize, patch_size: usize) -> (usize, usize) {
    let start = i * patch_size / POOL_SIDE;
    let end = ((i + 1) * patch_size / POOL_SIDE).max(start + 1);
    (start, end.min(patch_size))
}

fn pooled_feature<T: Scalar>(
    image: &GrayImage<T>,
    grid_row: usize,
    grid_col: usize,
    patch_size: usize,
    rows: usize,
    cols: usize,
) -> FeatureVector<T> {
    let y0 = grid_row * patch_size;
    let x0 = grid_col * patch_size;
    let mut values = Vec::with_capacity(VISUAL_FEATURE_DIM);
    for by in 0..POOL_SIDE {
        let (ys, ye) = block_span(by, patch_size);
        for bx in 0..POOL_SIDE {
            let (xs, xe) = block_span(bx, patch_size);
            let mut acc = 0.0f64;
            for y in ys..ye {
                for x in xs..xe {
                    acc += image.get(y0 + y, x0 + x).as_f64();
                }
            }
            values.push(T::of(acc / ((ye - ys) * (xe - xs)) as f64));
        }
    }
    let norm = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    values.push(T::of(norm(grid_row, rows)));
    values.push(T::of(norm(grid_col, cols)));
    FeatureVector::new(values)
}
