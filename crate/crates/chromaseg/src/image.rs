//! Raster storage and 8-bit PPM (P6) / PGM (P5) serialization.
//!
//! Samples are stored planar row-major: plane `c` occupies
//! `samples[c*w*h .. (c+1)*w*h]`, and within a plane pixel `(x, y)` sits at
//! `y*w + x`. PPM bytes are interleaved on disk and converted on load/save.

use std::fmt;

use crate::colorspace::ColorSpaceTag;
use crate::{Error, Result, Scalar};

/// Closed interval `[lo, hi]` every sample of a raster must lie in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRange<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> SampleRange<T> {
    /// Builds a range; `lo` and `hi` must be finite with `lo <= hi`.
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::contract(format!(
                "invalid sample range [{lo:?}, {hi:?}]"
            )));
        }
        Ok(SampleRange { lo, hi })
    }

    /// The unit range `[0, 1]`.
    pub fn unit() -> Self {
        SampleRange {
            lo: T::zero(),
            hi: T::one(),
        }
    }

    /// The 8-bit range `[0, 255]`.
    pub fn byte() -> Self {
        SampleRange {
            lo: T::zero(),
            hi: T::c(255.0),
        }
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, v: T) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn is_unit(&self) -> bool {
        self.lo == T::zero() && self.hi == T::one()
    }
}

/// Pipeline stages in flow order.
///
/// The variant order is the processing order; it also numbers the emitted
/// stage files (`00-input.ppm` .. `05-filtered.ppm`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StageName {
    Input,
    Converted,
    Clustered,
    Gradient,
    Watershed,
    Filtered,
}

impl StageName {
    pub const ALL: [StageName; 6] = [
        StageName::Input,
        StageName::Converted,
        StageName::Clustered,
        StageName::Gradient,
        StageName::Watershed,
        StageName::Filtered,
    ];

    /// Zero-based position in the flow, used as the file prefix.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn slug(self) -> &'static str {
        match self {
            StageName::Input => "input",
            StageName::Converted => "converted",
            StageName::Clustered => "clustered",
            StageName::Gradient => "gradient",
            StageName::Watershed => "watershed",
            StageName::Filtered => "filtered",
        }
    }

    /// File name for this stage, e.g. `03-gradient.ppm`.
    pub fn file_name(self) -> String {
        format!("{:02}-{}.ppm", self.index(), self.slug())
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// A width x height raster with 1 or 3 planes of `T` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage<T> {
    width: usize,
    height: usize,
    channels: usize,
    range: SampleRange<T>,
    space: ColorSpaceTag,
    samples: Vec<T>,
}

impl<T: Scalar> RasterImage<T> {
    /// Builds a raster, validating dimensions and that every sample is
    /// finite and inside `range`.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        range: SampleRange<T>,
        space: ColorSpaceTag,
        samples: Vec<T>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract(format!(
                "raster dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::contract(format!(
                "raster must have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|px| px.checked_mul(channels))
            .ok_or_else(|| Error::contract("raster dimensions overflow".to_string()))?;
        if samples.len() != expected {
            return Err(Error::contract(format!(
                "sample buffer length {} does not match {width}x{height}x{channels}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|v| !range.contains(**v)) {
            return Err(Error::contract(format!(
                "sample {bad:?} outside declared range [{:?}, {:?}]",
                range.lo(),
                range.hi()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            range,
            space,
            samples,
        })
    }

    /// Constant raster filled with `value`.
    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        range: SampleRange<T>,
        space: ColorSpaceTag,
        value: T,
    ) -> Result<Self> {
        RasterImage::new(
            width,
            height,
            channels,
            range,
            space,
            vec![value; width * height * channels],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn range(&self) -> SampleRange<T> {
        self.range
    }

    pub fn space(&self) -> ColorSpaceTag {
        self.space
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    /// One plane, row-major.
    pub fn plane(&self, c: usize) -> &[T] {
        assert!(c < self.channels, "plane {c} out of range");
        let n = self.pixel_count();
        &self.samples[c * n..(c + 1) * n]
    }

    pub fn sample(&self, x: usize, y: usize, c: usize) -> T {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.samples[c * self.pixel_count() + y * self.width + x]
    }
}

/// Remaps samples affinely from the declared range onto `[0, 1]`.
///
/// Results are clamped to `[0, 1]` to absorb end-point rounding.
pub fn to_unit_range<T: Scalar>(img: &RasterImage<T>) -> Result<RasterImage<T>> {
    let range = img.range();
    let w = range.width();
    if w == T::zero() {
        return Err(Error::DegenerateRange {
            lo: range.lo().to_f64().unwrap_or(f64::NAN),
            hi: range.hi().to_f64().unwrap_or(f64::NAN),
        });
    }
    let samples = img
        .samples()
        .iter()
        .map(|&v| clamp((v - range.lo()) / w, T::zero(), T::one()))
        .collect();
    RasterImage::new(
        img.width(),
        img.height(),
        img.channels(),
        SampleRange::unit(),
        img.space(),
        samples,
    )
}

/// Remaps a unit-range raster affinely onto `range`.
pub fn from_unit_range<T: Scalar>(
    img: &RasterImage<T>,
    range: SampleRange<T>,
) -> Result<RasterImage<T>> {
    if !img.range().is_unit() {
        return Err(Error::contract(
            "from_unit_range expects a raster with range [0, 1]".to_string(),
        ));
    }
    let w = range.width();
    if w == T::zero() {
        return Err(Error::DegenerateRange {
            lo: range.lo().to_f64().unwrap_or(f64::NAN),
            hi: range.hi().to_f64().unwrap_or(f64::NAN),
        });
    }
    let samples = img
        .samples()
        .iter()
        .map(|&v| clamp(range.lo() + v * w, range.lo(), range.hi()))
        .collect();
    RasterImage::new(
        img.width(),
        img.height(),
        img.channels(),
        range,
        img.space(),
        samples,
    )
}

pub(crate) fn clamp<T: Scalar>(v: T, lo: T, hi: T) -> T {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// Converts one sample to an output byte: unit-range samples are scaled by
/// 255, anything else is taken at face value; the result is clamped to
/// `[0, 255]` and rounded half-up.
pub(crate) fn sample_to_byte<T: Scalar>(v: T, range: SampleRange<T>) -> u8 {
    let t = if range.is_unit() { v * T::c(255.0) } else { v };
    let t = clamp(t, T::zero(), T::c(255.0));
    let rounded = (t + T::c(0.5)).floor();
    rounded.to_u8().unwrap_or(255)
}

fn round_half_up_f64(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Parses an 8-bit binary PPM (`P6`) or PGM (`P5`).
///
/// Header whitespace is arbitrary and `#` comments are skipped; after the
/// maxval exactly one whitespace byte separates header from pixel data.
/// Samples keep their raw byte values, with declared range `[0, maxval]`.
pub fn load_ppm<T: Scalar>(bytes: &[u8]) -> Result<RasterImage<T>> {
    let mut p = HeaderParser { bytes, pos: 0 };
    let channels = p.magic()?;
    let width = p.number("width")?;
    let height = p.number("height")?;
    let maxval = p.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::PpmParse {
            offset: p.pos,
            message: format!("image dimensions must be positive, got {width}x{height}"),
        });
    }
    if maxval > 255 {
        return Err(Error::UnsupportedDepth { maxval });
    }
    if maxval == 0 {
        return Err(Error::PpmParse {
            offset: p.pos,
            message: "maxval must be at least 1".to_string(),
        });
    }
    p.single_whitespace()?;

    let (width, height) = (width as usize, height as usize);
    let expected = width
        .checked_mul(height)
        .and_then(|px| px.checked_mul(channels))
        .ok_or(Error::PpmParse {
            offset: p.pos,
            message: "image dimensions overflow".to_string(),
        })?;
    let data = &bytes[p.pos..];
    if data.len() < expected {
        return Err(Error::PpmTruncated {
            expected,
            actual: data.len(),
        });
    }

    // Interleaved bytes to planar samples.
    let px = width * height;
    let mut samples = vec![T::zero(); expected];
    for i in 0..px {
        for c in 0..channels {
            samples[c * px + i] = T::c(f64::from(data[i * channels + c]));
        }
    }
    RasterImage::new(
        width,
        height,
        channels,
        SampleRange::new(T::zero(), T::c(maxval as f64))?,
        ColorSpaceTag::Rgb,
        samples,
    )
}

/// Serializes a raster as a canonical-header binary PPM (3 channels) or PGM
/// (1 channel): `P6\n<w> <h>\n255\n` followed by interleaved bytes.
///
/// Unit-range rasters are scaled by 255; any other declared range must
/// already round into `[0, 255]` and is written at face value. Individual
/// samples are clamped to `[0, 255]` and rounded half-up.
pub fn save_ppm<T: Scalar>(img: &RasterImage<T>) -> Result<Vec<u8>> {
    let range = img.range();
    if !range.is_unit() {
        let hi = range.hi().to_f64().unwrap_or(f64::NAN);
        if round_half_up_f64(hi) > 255.0 {
            return Err(Error::contract(format!(
                "cannot save raster with range upper bound {hi} > 255"
            )));
        }
    }
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.samples().len());
    for y in 0..img.height() {
        for x in 0..img.width() {
            for c in 0..img.channels() {
                out.push(sample_to_byte(img.sample(x, y, c), range));
            }
        }
    }
    Ok(out)
}

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderParser<'_> {
    fn magic(&mut self) -> Result<usize> {
        let channels = match (self.bytes.first(), self.bytes.get(1)) {
            (Some(b'P'), Some(b'6')) => 3,
            (Some(b'P'), Some(b'5')) => 1,
            _ => {
                return Err(Error::PpmParse {
                    offset: 0,
                    message: "expected magic P6 or P5".to_string(),
                })
            }
        };
        self.pos = 2;
        Ok(channels)
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(b - b'0')))
                .ok_or(Error::PpmParse {
                    offset: start,
                    message: format!("{what} is too large"),
                })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::PpmParse {
                offset: start,
                message: format!("expected {what} digit"),
            });
        }
        Ok(value)
    }

    fn single_whitespace(&mut self) -> Result<()> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(Error::PpmParse {
                offset: self.pos,
                message: "expected single whitespace after maxval".to_string(),
            }),
        }
    }
}
