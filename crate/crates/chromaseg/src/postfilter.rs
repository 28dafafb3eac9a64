//! Median filtering, the final cleanup stage.

use crate::image::RasterImage;
use crate::{Error, Result, Scalar};

/// Square filter window; the side must be odd so the median is the middle
/// order statistic of the side² samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    side: usize,
}

impl WindowSpec {
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 || side % 2 == 0 {
            return Err(Error::contract(format!(
                "median window side must be odd and positive, got {side}"
            )));
        }
        Ok(WindowSpec { side })
    }

    pub fn side(self) -> usize {
        self.side
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { side: 3 }
    }
}

/// Filters each channel independently: every sample becomes the exact
/// median of its side×side neighborhood, with replicate padding at the
/// borders. The output only ever contains values present in the input.
pub fn median_filter<T: Scalar>(img: &RasterImage<T>, window: WindowSpec) -> Result<RasterImage<T>> {
    let (w, h) = (img.width(), img.height());
    let side = window.side();
    let r = (side / 2) as isize;
    let mut samples = vec![T::zero(); img.channels() * w * h];
    let mut buffer: Vec<T> = Vec::with_capacity(side * side);
    for c in 0..img.channels() {
        let plane = img.plane(c);
        let out = &mut samples[c * w * h..(c + 1) * w * h];
        for y in 0..h {
            for x in 0..w {
                buffer.clear();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let nx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        let ny = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        buffer.push(plane[ny * w + nx]);
                    }
                }
                buffer.sort_by(|a, b| a.partial_cmp(b).expect("samples are finite"));
                out[y * w + x] = buffer[buffer.len() / 2];
            }
        }
    }
    RasterImage::new(w, h, img.channels(), img.range(), img.space(), samples)
}
