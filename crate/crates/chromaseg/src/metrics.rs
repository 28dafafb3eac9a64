//! Per-channel MSE and PSNR, the comparison instrument.

use crate::image::RasterImage;
use crate::{Error, Result, Scalar};

/// Default PSNR peak for 8-bit images.
pub const MAX_I_DEFAULT: f64 = 255.0;
/// Peak that reproduces the legacy comparison tables (their MSE/PSNR pairs
/// back-solve only with a peak of 256).
pub const MAX_I_PAPER_COMPAT: f64 = 256.0;

/// Per-channel error metrics between two images.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMetrics {
    /// Mean squared error per channel.
    pub mse: Vec<f64>,
    /// PSNR in dB per channel; `None` where the MSE is zero (infinite).
    pub psnr_db: Vec<Option<f64>>,
    /// True where the PSNR is +infinity (zero MSE).
    pub psnr_infinite: Vec<bool>,
    /// Peak sample value the PSNR used.
    pub max_i: f64,
}

impl ChannelMetrics {
    pub fn from_images<T: Scalar>(
        a: &RasterImage<T>,
        b: &RasterImage<T>,
        max_i: f64,
    ) -> Result<Self> {
        let mse = mse_per_channel(a, b)?;
        Self::from_mse(mse, max_i)
    }

    pub fn from_mse(mse: Vec<f64>, max_i: f64) -> Result<Self> {
        let mut psnr_db = Vec::with_capacity(mse.len());
        let mut psnr_infinite = Vec::with_capacity(mse.len());
        for &m in &mse {
            let p = psnr_from_mse(m, max_i)?;
            if p.is_infinite() {
                psnr_db.push(None);
                psnr_infinite.push(true);
            } else {
                psnr_db.push(Some(p));
                psnr_infinite.push(false);
            }
        }
        Ok(ChannelMetrics {
            mse,
            psnr_db,
            psnr_infinite,
            max_i,
        })
    }
}

/// Per-channel mean squared sample difference, accumulated in row-major
/// order so results are bit-stable.
pub fn mse_per_channel<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>) -> Result<Vec<f64>> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::contract(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.channels() != b.channels() {
        return Err(Error::contract("channel counts differ"));
    }
    if a.range() != b.range() {
        return Err(Error::contract(format!(
            "sample ranges differ: [{:?}, {:?}] vs [{:?}, {:?}]",
            a.range().lo(),
            a.range().hi(),
            b.range().lo(),
            b.range().hi()
        )));
    }
    let count = a.pixel_count() as f64;
    let mut out = Vec::with_capacity(a.channels());
    for c in 0..a.channels() {
        let mut acc = 0.0f64;
        for (&x, &y) in a.plane(c).iter().zip(b.plane(c)) {
            let d = x.to_f64().unwrap() - y.to_f64().unwrap();
            acc += d * d;
        }
        out.push(acc / count);
    }
    Ok(out)
}

/// `10 * log10(max_i^2 / mse)` in dB; +infinity for a zero MSE.
pub fn psnr_from_mse(mse: f64, max_i: f64) -> Result<f64> {
    if mse < 0.0 || !mse.is_finite() {
        return Err(Error::NegativeMse { mse });
    }
    if max_i <= 0.0 || !max_i.is_finite() {
        return Err(Error::contract(format!(
            "max_i must be positive and finite, got {max_i}"
        )));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * ((max_i * max_i) / mse).log10())
}
