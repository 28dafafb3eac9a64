//! Intensity projection and Sobel gradient magnitude.

use crate::colorspace::ColorSpaceTag;
use crate::image::{RasterImage, SampleRange};
use crate::{Error, Result, Scalar};

/// Horizontal Sobel kernel; applied by correlation (no kernel flip). The
/// vertical kernel is its transpose.
pub const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

/// How the two directional responses combine into a magnitude.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SobelMode {
    /// `sqrt(gx^2 + gy^2)`.
    #[default]
    Exact,
    /// `|gx| + |gy|`, the cheaper form.
    Approximate,
}

impl SobelMode {
    pub fn name(self) -> &'static str {
        match self {
            SobelMode::Exact => "exact",
            SobelMode::Approximate => "approx",
        }
    }

    fn magnitude<T: Scalar>(self, gx: T, gy: T) -> T {
        match self {
            SobelMode::Exact => (gx * gx + gy * gy).sqrt(),
            SobelMode::Approximate => gx.abs() + gy.abs(),
        }
    }
}

/// Gradient magnitudes of a single-channel raster.
#[derive(Clone, Debug)]
pub struct GradientField<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> GradientField<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::contract(format!(
                "gradient buffer length {} does not match {width}x{height}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::contract(
                "gradient magnitudes must be finite and nonnegative",
            ));
        }
        Ok(GradientField {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_value(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| if v > acc { v } else { acc })
    }

    /// Renders the field as a single-channel unit-range raster, scaling by
    /// the maximum magnitude (an all-zero field stays zero).
    pub fn to_raster(&self) -> RasterImage<T> {
        let max = self.max_value();
        let values = if max > T::zero() {
            self.values.iter().map(|&v| v / max).collect()
        } else {
            self.values.clone()
        };
        RasterImage::new(
            self.width,
            self.height,
            1,
            SampleRange::unit(),
            ColorSpaceTag::Rgb,
            values,
        )
        .expect("scaled magnitudes are finite and in [0, 1]")
    }
}

/// Collapses a 3-channel raster to intensity: the unweighted mean of the
/// channels, pixel by pixel. Single-channel input passes through.
pub fn intensity<T: Scalar>(img: &RasterImage<T>) -> Result<RasterImage<T>> {
    if img.channels() == 1 {
        return RasterImage::new(
            img.width(),
            img.height(),
            1,
            img.range(),
            img.space(),
            img.plane(0).to_vec(),
        );
    }
    let npx = img.pixel_count();
    let third = T::one() / T::c(3.0);
    let mut values = vec![T::zero(); npx];
    for c in 0..3 {
        let plane = img.plane(c);
        for (v, &s) in values.iter_mut().zip(plane) {
            *v = *v + s;
        }
    }
    for v in values.iter_mut() {
        *v = *v * third;
    }
    RasterImage::new(
        img.width(),
        img.height(),
        1,
        img.range(),
        img.space(),
        values,
    )
}

/// Reads a sample with replicate (clamp-to-edge) padding.
fn sample_clamped<T: Scalar>(plane: &[T], width: usize, height: usize, x: isize, y: isize) -> T {
    let x = x.clamp(0, width as isize - 1) as usize;
    let y = y.clamp(0, height as isize - 1) as usize;
    plane[y * width + x]
}

/// Sobel gradient magnitude of a single-channel raster, with replicate
/// padding at the borders.
pub fn sobel_gradient<T: Scalar>(img: &RasterImage<T>, mode: SobelMode) -> Result<GradientField<T>> {
    if img.channels() != 1 {
        return Err(Error::contract("sobel expects a single-channel raster"));
    }
    let (w, h) = (img.width(), img.height());
    let plane = img.plane(0);
    let two = T::c(2.0);
    let mut values = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let (x, y) = (x as isize, y as isize);
            // Weighted row differences and sums; grouping terms this way
            // makes the kernel's cancellations exact in floating point.
            let row_diff = |dy: isize| {
                sample_clamped(plane, w, h, x + 1, y + dy)
                    - sample_clamped(plane, w, h, x - 1, y + dy)
            };
            let row_sum = |dy: isize| {
                sample_clamped(plane, w, h, x - 1, y + dy)
                    + two * sample_clamped(plane, w, h, x, y + dy)
                    + sample_clamped(plane, w, h, x + 1, y + dy)
            };
            let gx = row_diff(-1) + two * row_diff(0) + row_diff(1);
            let gy = row_sum(1) - row_sum(-1);
            values[y as usize * w + x as usize] = mode.magnitude(gx, gy);
        }
    }
    GradientField::new(w, h, values)
}
