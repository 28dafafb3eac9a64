//! Conversions between sRGB, CIELAB (D65, 2 degree observer), and HSV.
//!
//! RGB samples are unit-range sRGB. HSV stores hue as angle/2pi in
//! `[0, 1)`, so red sits at 0, green at 1/3, blue at 2/3. CIELAB uses the
//! standard sRGB linearization and the D65 primaries matrix; the white
//! point is taken as the matrix row sums so the gray axis maps to
//! a* = b* = 0 at working precision.

use crate::image::{clamp, RasterImage, SampleRange};
use crate::{Error, Result, Scalar};

/// Color space a raster's samples are expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColorSpaceTag {
    Rgb,
    Lab,
    Hsv,
}

impl ColorSpaceTag {
    /// Nominal per-channel value ranges, used for feature normalization and
    /// for rendering converted images back to bytes.
    pub fn nominal_channel_ranges(self) -> [(f64, f64); 3] {
        match self {
            ColorSpaceTag::Rgb | ColorSpaceTag::Hsv => [(0.0, 1.0); 3],
            ColorSpaceTag::Lab => [(0.0, 100.0), (-128.0, 127.0), (-128.0, 127.0)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColorSpaceTag::Rgb => "rgb",
            ColorSpaceTag::Lab => "lab",
            ColorSpaceTag::Hsv => "hsv",
        }
    }
}

/// Declared sample range for a raster in `space`.
///
/// For LAB this is the loosest of the per-channel nominal ranges, since a
/// raster declares a single interval for all planes.
pub fn space_range<T: Scalar>(space: ColorSpaceTag) -> SampleRange<T> {
    match space {
        ColorSpaceTag::Rgb | ColorSpaceTag::Hsv => SampleRange::unit(),
        ColorSpaceTag::Lab => SampleRange::new(T::c(-128.0), T::c(127.0))
            .expect("static range is valid"),
    }
}

fn expect_space<T: Scalar>(
    img: &RasterImage<T>,
    space: ColorSpaceTag,
    op: &str,
) -> Result<()> {
    if img.space() != space {
        return Err(Error::contract(format!(
            "{op} expects a {} raster, got {}",
            space.name(),
            img.space().name()
        )));
    }
    if img.channels() != 3 {
        return Err(Error::contract(format!(
            "{op} expects 3 channels, got {}",
            img.channels()
        )));
    }
    if space != ColorSpaceTag::Lab && !img.range().is_unit() {
        return Err(Error::contract(format!(
            "{op} expects unit-range samples"
        )));
    }
    Ok(())
}

/// Converts one unit-range sRGB pixel to HSV with hue in `[0, 1)`.
///
/// Zero-saturation pixels (including black) get hue 0 by convention.
pub fn rgb_pixel_to_hsv<T: Scalar>(r: T, g: T, b: T) -> [T; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max == T::zero() {
        T::zero()
    } else {
        delta / max
    };
    if delta == T::zero() {
        return [T::zero(), T::zero(), v];
    }
    let six = T::c(6.0);
    let mut h6 = if max == r {
        let t = (g - b) / delta;
        if t < T::zero() {
            t + six
        } else {
            t
        }
    } else if max == g {
        (b - r) / delta + T::c(2.0)
    } else {
        (r - g) / delta + T::c(4.0)
    };
    // A tiny negative (g-b)/delta can round h6 up to exactly 6; hue wraps.
    if h6 >= six {
        h6 = T::zero();
    }
    [h6 / six, s, v]
}

/// Converts one HSV pixel (hue in `[0, 1]`, hue 1 wrapping to 0) back to
/// unit-range sRGB.
pub fn hsv_pixel_to_rgb<T: Scalar>(h: T, s: T, v: T) -> [T; 3] {
    if s == T::zero() {
        return [v, v, v];
    }
    let h6 = h * T::c(6.0);
    let mut sector = h6.floor();
    if sector >= T::c(6.0) {
        sector = T::zero();
    }
    let f = h6 - sector;
    let p = v * (T::one() - s);
    let q = v * (T::one() - s * f);
    let t = v * (T::one() - s * (T::one() - f));
    match sector.to_u8().unwrap_or(0) {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// sRGB linear-light matrix (rows produce X, Y, Z from linear r, g, b).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

struct LabContext<T> {
    fwd: [[T; 3]; 3],
    inv: [[T; 3]; 3],
    white: [T; 3],
}

impl<T: Scalar> LabContext<T> {
    fn new() -> Self {
        let fwd_f64 = RGB_TO_XYZ;
        let inv_f64 = invert3(&fwd_f64);
        let mut fwd = [[T::zero(); 3]; 3];
        let mut inv = [[T::zero(); 3]; 3];
        let mut white = [T::zero(); 3];
        for i in 0..3 {
            for j in 0..3 {
                fwd[i][j] = T::c(fwd_f64[i][j]);
                inv[i][j] = T::c(inv_f64[i][j]);
            }
            // Row sum is the value the matrix maps pure white to; using it as
            // the white point keeps neutral grays exactly neutral.
            white[i] = fwd[i][0] + fwd[i][1] + fwd[i][2];
        }
        LabContext { fwd, inv, white }
    }
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    inv
}

fn srgb_decompand<T: Scalar>(c: T) -> T {
    if c <= T::c(0.04045) {
        c / T::c(12.92)
    } else {
        ((c + T::c(0.055)) / T::c(1.055)).powf(T::c(2.4))
    }
}

fn srgb_compand<T: Scalar>(c: T) -> T {
    if c <= T::c(0.0031308) {
        c * T::c(12.92)
    } else {
        T::c(1.055) * c.powf(T::one() / T::c(2.4)) - T::c(0.055)
    }
}

fn lab_f<T: Scalar>(t: T) -> T {
    if t > T::c(LAB_EPSILON) {
        t.cbrt()
    } else {
        (T::c(LAB_KAPPA) * t + T::c(16.0)) / T::c(116.0)
    }
}

fn lab_f_inv<T: Scalar>(f: T) -> T {
    let f3 = f * f * f;
    if f3 > T::c(LAB_EPSILON) {
        f3
    } else {
        (T::c(116.0) * f - T::c(16.0)) / T::c(LAB_KAPPA)
    }
}

fn rgb_pixel_to_lab_ctx<T: Scalar>(ctx: &LabContext<T>, r: T, g: T, b: T) -> [T; 3] {
    let rl = srgb_decompand(r);
    let gl = srgb_decompand(g);
    let bl = srgb_decompand(b);
    let mut fxyz = [T::zero(); 3];
    for i in 0..3 {
        let v = ctx.fwd[i][0] * rl + ctx.fwd[i][1] * gl + ctx.fwd[i][2] * bl;
        fxyz[i] = lab_f(v / ctx.white[i]);
    }
    let l = T::c(116.0) * fxyz[1] - T::c(16.0);
    let a = T::c(500.0) * (fxyz[0] - fxyz[1]);
    let b_star = T::c(200.0) * (fxyz[1] - fxyz[2]);
    [l, a, b_star]
}

fn lab_pixel_to_rgb_ctx<T: Scalar>(ctx: &LabContext<T>, l: T, a: T, b_star: T) -> [T; 3] {
    let fy = (l + T::c(16.0)) / T::c(116.0);
    let fx = fy + a / T::c(500.0);
    let fz = fy - b_star / T::c(200.0);
    let xyz = [
        lab_f_inv(fx) * ctx.white[0],
        lab_f_inv(fy) * ctx.white[1],
        lab_f_inv(fz) * ctx.white[2],
    ];
    let mut rgb = [T::zero(); 3];
    for (i, out) in rgb.iter_mut().enumerate() {
        let lin = ctx.inv[i][0] * xyz[0] + ctx.inv[i][1] * xyz[1] + ctx.inv[i][2] * xyz[2];
        *out = clamp(srgb_compand(lin), T::zero(), T::one());
    }
    rgb
}

/// Converts one unit-range sRGB pixel to L*a*b*.
pub fn rgb_pixel_to_lab<T: Scalar>(r: T, g: T, b: T) -> [T; 3] {
    rgb_pixel_to_lab_ctx(&LabContext::new(), r, g, b)
}

/// Converts one L*a*b* pixel to unit-range sRGB, clamping out-of-gamut
/// channels to `[0, 1]`.
pub fn lab_pixel_to_rgb<T: Scalar>(l: T, a: T, b_star: T) -> [T; 3] {
    lab_pixel_to_rgb_ctx(&LabContext::new(), l, a, b_star)
}

fn convert_image<T: Scalar>(
    img: &RasterImage<T>,
    out_space: ColorSpaceTag,
    out_range: SampleRange<T>,
    f: impl Fn(T, T, T) -> [T; 3],
) -> Result<RasterImage<T>> {
    let n = img.pixel_count();
    let (p0, p1, p2) = (img.plane(0), img.plane(1), img.plane(2));
    let mut samples = vec![T::zero(); 3 * n];
    for i in 0..n {
        let out = f(p0[i], p1[i], p2[i]);
        samples[i] = out[0];
        samples[n + i] = out[1];
        samples[2 * n + i] = out[2];
    }
    RasterImage::new(img.width(), img.height(), 3, out_range, out_space, samples)
}

/// Converts a unit-range RGB raster to HSV.
pub fn rgb_to_hsv<T: Scalar>(img: &RasterImage<T>) -> Result<RasterImage<T>> {
    expect_space(img, ColorSpaceTag::Rgb, "rgb_to_hsv")?;
    convert_image(img, ColorSpaceTag::Hsv, SampleRange::unit(), |r, g, b| {
        rgb_pixel_to_hsv(r, g, b)
    })
}

/// Converts an HSV raster to unit-range RGB.
pub fn hsv_to_rgb<T: Scalar>(img: &RasterImage<T>) -> Result<RasterImage<T>> {
    expect_space(img, ColorSpaceTag::Hsv, "hsv_to_rgb")?;
    convert_image(img, ColorSpaceTag::Rgb, SampleRange::unit(), |h, s, v| {
        hsv_pixel_to_rgb(h, s, v)
    })
}

/// Converts a unit-range RGB raster to CIELAB.
pub fn rgb_to_lab<T: Scalar>(img: &RasterImage<T>) -> Result<RasterImage<T>> {
    expect_space(img, ColorSpaceTag::Rgb, "rgb_to_lab")?;
    let ctx = LabContext::new();
    convert_image(img, ColorSpaceTag::Lab, space_range(ColorSpaceTag::Lab), |r, g, b| {
        rgb_pixel_to_lab_ctx(&ctx, r, g, b)
    })
}

/// Converts a CIELAB raster to unit-range RGB; out-of-gamut channels clamp
/// to `[0, 1]`.
pub fn lab_to_rgb<T: Scalar>(img: &RasterImage<T>) -> Result<RasterImage<T>> {
    expect_space(img, ColorSpaceTag::Lab, "lab_to_rgb")?;
    let ctx = LabContext::new();
    convert_image(img, ColorSpaceTag::Rgb, SampleRange::unit(), |l, a, b| {
        lab_pixel_to_rgb_ctx(&ctx, l, a, b)
    })
}
