//! Clustering-based color image segmentation.
//!
//! `chromaseg` segments an RGB image by converting it to a perceptual color
//! space (CIELAB or HSV), clustering the pixels with K-means under a cosine
//! or squared-Euclidean distance, and refining the cluster map with a
//! marker-controlled watershed on the Sobel gradient. The final composite is
//! median-filtered and scored against the input with per-channel MSE/PSNR,
//! so the two color spaces can be compared on equal footing.
//!
//! The pipeline stages, in order: `input`, `converted`, `clustered`,
//! `gradient`, `watershed`, `filtered`. Every stage is deterministic for a
//! fixed seed, including across worker-thread counts.
//!
//! ```
//! use chromaseg::colorspace::ColorSpaceTag;
//! use chromaseg::pipeline::{run_pipeline, PipelineConfig};
//!
//! let ppm = b"P6\n2 2\n255\n\x00\x00\x00\xff\xff\xff\x20\x40\x60\x80\x80\x80";
//! let img: chromaseg::Raster = chromaseg::image::load_ppm(ppm).unwrap();
//! let mut cfg = PipelineConfig::default();
//! cfg.space = ColorSpaceTag::Hsv;
//! cfg.kmeans.k = 1;
//! cfg.min_area = 1;
//! cfg.erosion_radius = 0;
//! let out = run_pipeline(&img, &cfg).unwrap();
//! assert_eq!(out.metrics.mse.len(), 3);
//! ```

pub mod cli;
pub mod clustering;
pub mod colorspace;
mod error;
pub mod edge;
pub mod image;
pub mod metrics;
pub mod pipeline;
pub mod postfilter;
pub mod watershed;

pub use error::{Error, Result};

use core::fmt::Debug;
use num_traits::{Float, FromPrimitive};

/// Floating-point sample type the numeric modules operate on.
///
/// Implemented for `f32` and `f64`. Everything under [`image`],
/// [`colorspace`], [`clustering`], [`edge`], [`watershed`], [`postfilter`],
/// and [`metrics`] is generic over this trait; the pipeline and CLI run at
/// `f64` via the aliases below.
pub trait Scalar: Float + FromPrimitive + Debug + Send + Sync + 'static {
    /// Converts an `f64` constant into `Self`.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }

    /// Converts a count or index into `Self`.
    fn from_index(v: usize) -> Self {
        Self::from_usize(v).expect("index not representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// [`image::RasterImage`] at the pipeline's working precision.
pub type Raster = image::RasterImage<f64>;
/// [`clustering::FeatureMatrix`] at the pipeline's working precision.
pub type Features = clustering::FeatureMatrix<f64>;
/// [`edge::GradientField`] at the pipeline's working precision.
pub type Gradient = edge::GradientField<f64>;
