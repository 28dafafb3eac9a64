//! Pixel feature extraction and K-means under cosine or squared-Euclidean
//! distance.
//!
//! Cosine mode is spherical K-means: rows are compared by direction, the
//! direction centroid of a cluster is the normalized mean of its unit-
//! normalized rows (the minimizer of summed cosine distance over unit
//! vectors), and a separate color centroid keeps the plain arithmetic mean
//! for recoloring. Under squared-Euclidean distance the two centroid sets
//! coincide. All reductions run in row-major order so results are
//! bit-identical across runs and worker counts.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorspace::ColorSpaceTag;
use crate::image::RasterImage;
use crate::{Error, Result, Scalar};

/// Norm floor used when a vector's length underflows toward zero; rows at
/// or below this norm are direction-neutral (cosine distance 1 to
/// everything).
pub const NORM_EPSILON: f64 = 1e-12;

/// Distance used for assignment and the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Cosine,
    SquaredEuclidean,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::SquaredEuclidean => "sqeuclidean",
        }
    }
}

/// K-means configuration.
#[derive(Clone, Debug)]
pub struct KMeansConfig<T> {
    pub k: usize,
    pub metric: Metric,
    pub max_iters: usize,
    pub seed: u64,
    /// Extra stop: converge once one iteration improves the objective by at
    /// most `tol`. Zero (the default) stops only when labels stabilize.
    pub tol: T,
    /// Independent seeded runs; the one with the lowest final objective
    /// wins, earliest run on ties.
    pub restarts: usize,
    pub norm_epsilon: T,
}

impl<T: Scalar> Default for KMeansConfig<T> {
    fn default() -> Self {
        KMeansConfig {
            k: 3,
            metric: Metric::Cosine,
            max_iters: 100,
            seed: 42,
            tol: T::zero(),
            restarts: 1,
            norm_epsilon: T::c(NORM_EPSILON),
        }
    }
}

/// Row-major m x n matrix of pixel features plus the raster provenance
/// needed to map rows back onto pixels.
#[derive(Clone, Debug)]
pub struct FeatureMatrix<T> {
    data: Vec<T>,
    rows: usize,
    cols: usize,
    width: usize,
    height: usize,
    space: ColorSpaceTag,
    mask: [bool; 3],
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(
        data: Vec<T>,
        rows: usize,
        cols: usize,
        width: usize,
        height: usize,
        space: ColorSpaceTag,
        mask: [bool; 3],
    ) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(Error::contract("feature matrix must be nonempty"));
        }
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "feature buffer length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("feature values must be finite"));
        }
        Ok(FeatureMatrix {
            data,
            rows,
            cols,
            width,
            height,
            space,
            mask,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn space(&self) -> ColorSpaceTag {
        self.space
    }

    pub fn mask(&self) -> [bool; 3] {
        self.mask
    }
}

/// Per-pixel cluster assignments laid out row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::contract(format!(
                "label buffer length {} does not match {width}x{height}",
                labels.len()
            )));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

/// Cluster centroids: `direction` drives cosine assignment (unit vectors,
/// or zero for an all-zero cluster), `color` is the plain member mean used
/// for recoloring. Under squared-Euclidean distance the two are identical.
#[derive(Clone, Debug)]
pub struct CentroidSet<T> {
    direction: Vec<T>,
    color: Vec<T>,
    k: usize,
    n: usize,
}

impl<T: Scalar> CentroidSet<T> {
    pub fn new(direction: Vec<T>, color: Vec<T>, k: usize, n: usize) -> Result<Self> {
        if direction.len() != k * n || color.len() != k * n {
            return Err(Error::contract("centroid buffers must be k x n"));
        }
        Ok(CentroidSet {
            direction,
            color,
            k,
            n,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn direction_row(&self, j: usize) -> &[T] {
        &self.direction[j * self.n..(j + 1) * self.n]
    }

    pub fn color_row(&self, j: usize) -> &[T] {
        &self.color[j * self.n..(j + 1) * self.n]
    }
}

/// Outcome of a K-means fit.
#[derive(Clone, Debug)]
pub struct KMeansResult<T> {
    pub labels: Vec<u32>,
    pub centroids: CentroidSet<T>,
    /// Objective after each completed iteration; nonincreasing.
    pub objective_history: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Row indices that seeded the winning run's initial centroids.
    pub init_rows: Vec<usize>,
}

impl<T: Scalar> KMeansResult<T> {
    /// Final objective value.
    pub fn objective(&self) -> T {
        *self
            .objective_history
            .last()
            .expect("fit always records at least one iteration")
    }
}

/// Cosine distance `1 - cos(a, b)` in `[0, 2]`, with vector norms floored
/// at [`NORM_EPSILON`].
pub fn cosine_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    cosine_distance_eps(a, b, T::c(NORM_EPSILON))
}

pub(crate) fn cosine_distance_eps<T: Scalar>(a: &[T], b: &[T], eps: T) -> T {
    assert_eq!(a.len(), b.len(), "cosine distance needs equal lengths");
    assert!(!a.is_empty(), "cosine distance needs nonzero length");
    let mut dot = T::zero();
    let mut aa = T::zero();
    let mut bb = T::zero();
    for i in 0..a.len() {
        dot = dot + a[i] * b[i];
        aa = aa + a[i] * a[i];
        bb = bb + b[i] * b[i];
    }
    let floor = eps * eps;
    let cos = dot / (aa.max(floor) * bb.max(floor)).sqrt();
    // Clamp rounding spill so the distance stays inside [0, 2].
    let cos = cos.min(T::one()).max(-T::one());
    T::one() - cos
}

/// Squared Euclidean distance.
pub fn squared_euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len(), "squared euclidean needs equal lengths");
    let mut acc = T::zero();
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc = acc + d * d;
    }
    acc
}

/// Extracts per-pixel features from a converted raster.
///
/// Row `r` is pixel `r` in row-major order; columns are the masked channels
/// in channel order. With `normalize` set, each channel is affinely mapped
/// from its nominal range onto `[0, 1]` (LAB: L/100, (a+128)/255,
/// (b+128)/255; HSV values already live there).
pub fn features_from_image<T: Scalar>(
    img: &RasterImage<T>,
    mask: [bool; 3],
    normalize: bool,
) -> Result<FeatureMatrix<T>> {
    if img.space() != ColorSpaceTag::Lab && img.space() != ColorSpaceTag::Hsv {
        return Err(Error::contract(format!(
            "features require a lab or hsv raster, got {}",
            img.space().name()
        )));
    }
    if img.channels() != 3 {
        return Err(Error::contract("features require 3 channels"));
    }
    let cols = mask.iter().filter(|&&m| m).count();
    if cols == 0 {
        return Err(Error::contract("channel mask selects no channels"));
    }
    let ranges = img.space().nominal_channel_ranges();
    let m = img.pixel_count();
    let mut data = vec![T::zero(); m * cols];
    let mut col = 0;
    for c in 0..3 {
        if !mask[c] {
            continue;
        }
        let plane = img.plane(c);
        let (lo, hi) = ranges[c];
        let (lo, w) = (T::c(lo), T::c(hi - lo));
        for (r, &v) in plane.iter().enumerate() {
            data[r * cols + col] = if normalize { (v - lo) / w } else { v };
        }
        col += 1;
    }
    FeatureMatrix::new(data, m, cols, img.width(), img.height(), img.space(), mask)
}

/// Maps feature-scale color centroids back to image-space values, undoing
/// the [`features_from_image`] normalization. Direction centroids are
/// copied through unchanged (they are scale-free).
pub fn denormalize_centroids<T: Scalar>(
    set: &CentroidSet<T>,
    space: ColorSpaceTag,
    mask: [bool; 3],
) -> Result<CentroidSet<T>> {
    let enabled: Vec<usize> = (0..3).filter(|&c| mask[c]).collect();
    if enabled.len() != set.n() {
        return Err(Error::contract(
            "channel mask width does not match centroid dimension",
        ));
    }
    let ranges = space.nominal_channel_ranges();
    let mut color = set.color.clone();
    for j in 0..set.k() {
        for (col, &c) in enabled.iter().enumerate() {
            let (lo, hi) = ranges[c];
            let v = color[j * set.n() + col];
            color[j * set.n() + col] = v * T::c(hi - lo) + T::c(lo);
        }
    }
    CentroidSet::new(set.direction.clone(), color, set.k(), set.n())
}

/// Runs K-means and returns the best result over `cfg.restarts` seeded runs.
pub fn kmeans_fit<T: Scalar>(
    features: &FeatureMatrix<T>,
    cfg: &KMeansConfig<T>,
) -> Result<KMeansResult<T>> {
    if cfg.k == 0 {
        return Err(Error::contract("k must be at least 1"));
    }
    if features.rows() < cfg.k {
        return Err(Error::TooFewSamples {
            rows: features.rows(),
            k: cfg.k,
        });
    }
    if cfg.max_iters == 0 {
        return Err(Error::contract("max_iters must be at least 1"));
    }
    if cfg.restarts == 0 {
        return Err(Error::contract("restarts must be at least 1"));
    }
    if cfg.tol < T::zero() || !cfg.tol.is_finite() {
        return Err(Error::contract("tol must be finite and nonnegative"));
    }
    if cfg.norm_epsilon <= T::zero() {
        return Err(Error::contract("norm_epsilon must be positive"));
    }

    let mut best: Option<KMeansResult<T>> = None;
    for restart in 0..cfg.restarts {
        let run = kmeans_single(features, cfg, restart as u64);
        let better = match &best {
            None => true,
            Some(b) => run.objective() < b.objective(),
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart ran"))
}

fn kmeans_single<T: Scalar>(
    features: &FeatureMatrix<T>,
    cfg: &KMeansConfig<T>,
    stream: u64,
) -> KMeansResult<T> {
    let m = features.rows();
    let n = features.cols();
    let k = cfg.k;
    let eps = cfg.norm_epsilon;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let init_rows = sample_distinct_rows(&mut rng, m, k);

    let mut color = vec![T::zero(); k * n];
    let mut direction = vec![T::zero(); k * n];
    for (j, &r) in init_rows.iter().enumerate() {
        let row = features.row(r);
        color[j * n..(j + 1) * n].copy_from_slice(row);
        direction[j * n..(j + 1) * n].copy_from_slice(row);
        if cfg.metric == Metric::Cosine {
            normalize_in_place(&mut direction[j * n..(j + 1) * n], eps);
        }
    }

    let assign_dist = |row: &[T], direction: &[T], color: &[T], j: usize| -> T {
        match cfg.metric {
            Metric::Cosine => cosine_distance_eps(row, &direction[j * n..(j + 1) * n], eps),
            Metric::SquaredEuclidean => squared_euclidean(row, &color[j * n..(j + 1) * n]),
        }
    };

    let mut labels = vec![0u32; m];
    let mut labels_prev: Option<Vec<u32>> = None;
    let mut history: Vec<T> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;

        // Assignment against the centroids from the previous update; ties go
        // to the lowest cluster index.
        for i in 0..m {
            let row = features.row(i);
            let mut best = T::infinity();
            let mut best_j = 0u32;
            for j in 0..k {
                let d = assign_dist(row, &direction, &color, j);
                if d < best {
                    best = d;
                    best_j = j as u32;
                }
            }
            labels[i] = best_j;
        }

        // Reseed empty clusters (ascending id) from the row farthest from
        // its assigned centroid; ties take the lowest row index. Donors are
        // restricted to clusters that keep at least one member.
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l as usize] += 1;
        }
        for j in 0..k {
            if sizes[j] > 0 {
                continue;
            }
            let mut best_i = usize::MAX;
            let mut best_d = T::neg_infinity();
            for i in 0..m {
                if sizes[labels[i] as usize] < 2 {
                    continue;
                }
                let d = assign_dist(features.row(i), &direction, &color, labels[i] as usize);
                if d > best_d {
                    best_d = d;
                    best_i = i;
                }
            }
            debug_assert_ne!(best_i, usize::MAX);
            sizes[labels[best_i] as usize] -= 1;
            labels[best_i] = j as u32;
            sizes[j] = 1;
        }

        // Update both centroid sets, accumulating rows in row-major order.
        let mut counts = vec![0usize; k];
        color.iter_mut().for_each(|v| *v = T::zero());
        direction.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..m {
            let j = labels[i] as usize;
            counts[j] += 1;
            let row = features.row(i);
            let norm = row_norm(row).max(eps);
            for c in 0..n {
                color[j * n + c] = color[j * n + c] + row[c];
                if cfg.metric == Metric::Cosine {
                    direction[j * n + c] = direction[j * n + c] + row[c] / norm;
                }
            }
        }
        for j in 0..k {
            let count = T::from_index(counts[j]);
            for c in 0..n {
                color[j * n + c] = color[j * n + c] / count;
            }
            if cfg.metric == Metric::Cosine {
                normalize_in_place(&mut direction[j * n..(j + 1) * n], eps);
            }
        }
        if cfg.metric == Metric::SquaredEuclidean {
            direction.copy_from_slice(&color);
        }

        // Objective against the fresh centroids.
        let mut objective = T::zero();
        for i in 0..m {
            objective = objective + assign_dist(features.row(i), &direction, &color, labels[i] as usize);
        }
        history.push(objective);

        if labels_prev.as_deref() == Some(&labels[..]) {
            converged = true;
            break;
        }
        if cfg.tol > T::zero() && history.len() >= 2 {
            let prev = history[history.len() - 2];
            if prev - objective <= cfg.tol {
                converged = true;
                break;
            }
        }
        labels_prev = Some(labels.clone());
    }

    KMeansResult {
        labels,
        centroids: CentroidSet {
            direction,
            color,
            k,
            n,
        },
        objective_history: history,
        iterations,
        converged,
        init_rows,
    }
}

fn sample_distinct_rows(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = Vec::with_capacity(k);
    while rows.len() < k {
        let idx = (rng.next_u64() % m as u64) as usize;
        if !rows.contains(&idx) {
            rows.push(idx);
        }
    }
    rows
}

fn row_norm<T: Scalar>(row: &[T]) -> T {
    let mut acc = T::zero();
    for &v in row {
        acc = acc + v * v;
    }
    acc.sqrt()
}

fn normalize_in_place<T: Scalar>(row: &mut [T], eps: T) {
    let norm = row_norm(row).max(eps);
    for v in row.iter_mut() {
        *v = *v / norm;
    }
}

/// Replaces every pixel with its cluster's color centroid.
///
/// The centroids must already be in the image's color space (see
/// [`denormalize_centroids`]); the output therefore has at most `k`
/// distinct colors.
pub fn recolor_by_cluster<T: Scalar>(
    img: &RasterImage<T>,
    labels: &LabelMap,
    centroids: &CentroidSet<T>,
) -> Result<RasterImage<T>> {
    if img.channels() != 3 || centroids.n() != 3 {
        return Err(Error::contract("recolor requires 3-channel data"));
    }
    if labels.width() != img.width() || labels.height() != img.height() {
        return Err(Error::contract("label map dimensions do not match image"));
    }
    if let Some(&bad) = labels.labels().iter().find(|&&l| l as usize >= centroids.k()) {
        return Err(Error::contract(format!(
            "label {bad} out of range for k={}",
            centroids.k()
        )));
    }
    let npx = img.pixel_count();
    let mut samples = vec![T::zero(); 3 * npx];
    for (i, &label) in labels.labels().iter().enumerate() {
        let color = centroids.color_row(label as usize);
        for c in 0..3 {
            samples[c * npx + i] = color[c];
        }
    }
    RasterImage::new(
        img.width(),
        img.height(),
        3,
        img.range(),
        img.space(),
        samples,
    )
}
