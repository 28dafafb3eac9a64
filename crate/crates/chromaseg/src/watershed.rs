//! Marker-controlled watershed: marker derivation from cluster labels,
//! exact Euclidean distance transform, minima imposition by morphological
//! reconstruction, and Meyer's priority flood.
//!
//! Tie-breaking is pinned down everywhere so outputs are bit-identical
//! across runs: the flood pops the lowest `(value, insertion sequence)`
//! pair, seeds and neighbor visits follow raster order, and marker ids are
//! assigned in raster order of component anchors.

use std::collections::{BinaryHeap, VecDeque};

use crate::clustering::LabelMap;
use crate::colorspace::ColorSpaceTag;
use crate::image::{RasterImage, SampleRange};
use crate::{Error, Result, Scalar};

/// Pixel adjacency used for components, plateaus, and flooding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    /// Neighbor offsets in raster order.
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }

    /// Offsets that precede the center in raster order.
    fn backward_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0)],
            Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0)],
        }
    }

    /// Offsets that follow the center in raster order.
    fn forward_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(1, 0), (0, 1)],
            Connectivity::Eight => &[(1, 0), (-1, 1), (0, 1), (1, 1)],
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::contract(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

fn for_each_neighbor(
    width: usize,
    height: usize,
    index: usize,
    conn: Connectivity,
    mut f: impl FnMut(usize),
) {
    let x = (index % width) as isize;
    let y = (index / width) as isize;
    for &(dx, dy) in conn.offsets() {
        let nx = x + dx;
        let ny = y + dy;
        if nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height {
            f(ny as usize * width + nx as usize);
        }
    }
}

/// Seed regions for the flood: 0 = unmarked, ids form a contiguous range
/// `1..=M`. `M = 0` (no marker at all) is representable because background
/// derivation can legitimately come up empty; the flood itself rejects it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkerMap {
    width: usize,
    height: usize,
    marks: Vec<u32>,
    count: u32,
}

impl MarkerMap {
    pub fn new(width: usize, height: usize, marks: Vec<u32>) -> Result<Self> {
        if marks.len() != width * height {
            return Err(Error::contract(format!(
                "marker buffer length {} does not match {width}x{height}",
                marks.len()
            )));
        }
        let count = marks.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; count as usize];
        for &m in &marks {
            if m != 0 {
                seen[(m - 1) as usize] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::contract(format!(
                "marker ids must be contiguous 1..={count}; id {} is absent",
                missing + 1
            )));
        }
        Ok(MarkerMap {
            width,
            height,
            marks,
            count,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn marks(&self) -> &[u32] {
        &self.marks
    }

    /// Number of distinct marker ids.
    pub fn marker_count(&self) -> u32 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Flood output: 0 = ridge (watershed line), `1..=M` = region keyed by the
/// marker that flooded it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WatershedLabels {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl WatershedLabels {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::contract(format!(
                "label buffer length {} does not match {width}x{height}",
                labels.len()
            )));
        }
        Ok(WatershedLabels {
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

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

/// Erosion by a `(2r+1)`-sided square, with pixels outside the frame
/// counting as background (so a full frame shrinks by `r` on each side).
/// Decomposed into a horizontal and a vertical segment pass.
fn erode_mask(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return mask.to_vec();
    }
    let r = radius as isize;
    let mut horizontal = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            let mut keep = true;
            for dx in -r..=r {
                let nx = x as isize + dx;
                if nx < 0 || nx >= width as isize || !mask[y * width + nx as usize] {
                    keep = false;
                    break;
                }
            }
            horizontal[y * width + x] = keep;
        }
    }
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            let mut keep = true;
            for dy in -r..=r {
                let ny = y as isize + dy;
                if ny < 0 || ny >= height as isize || !horizontal[ny as usize * width + x] {
                    keep = false;
                    break;
                }
            }
            out[y * width + x] = keep;
        }
    }
    out
}

/// Connected components of a binary mask, in raster order of their anchor
/// (first) pixel.
fn components(mask: &[bool], width: usize, height: usize, conn: Connectivity) -> Vec<Vec<usize>> {
    let mut visited = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || visited[start] {
            continue;
        }
        let mut pixels = vec![start];
        visited[start] = true;
        let mut cursor = 0;
        while cursor < pixels.len() {
            let p = pixels[cursor];
            cursor += 1;
            for_each_neighbor(width, height, p, conn, |q| {
                if mask[q] && !visited[q] {
                    visited[q] = true;
                    pixels.push(q);
                }
            });
        }
        out.push(pixels);
    }
    out
}

/// Derives foreground markers from the cluster label map: per cluster, the
/// mask is eroded by a square of the given radius and the surviving
/// components of area >= `min_area` become markers, ids in raster order of
/// component anchors across all clusters.
pub fn foreground_markers(
    labels: &LabelMap,
    min_area: usize,
    erosion_radius: usize,
    conn: Connectivity,
) -> Result<MarkerMap> {
    let (width, height) = (labels.width(), labels.height());
    let mut clusters: Vec<u32> = labels.labels().to_vec();
    clusters.sort_unstable();
    clusters.dedup();

    let mut survivors: Vec<Vec<usize>> = Vec::new();
    for cluster in clusters {
        let mask: Vec<bool> = labels.labels().iter().map(|&l| l == cluster).collect();
        let eroded = erode_mask(&mask, width, height, erosion_radius);
        for component in components(&eroded, width, height, conn) {
            if component.len() >= min_area {
                survivors.push(component);
            }
        }
    }
    if survivors.is_empty() {
        return Err(Error::NoForegroundMarkers {
            erosion_radius,
            min_area,
        });
    }
    survivors.sort_by_key(|pixels| pixels[0]);

    let mut marks = vec![0u32; width * height];
    for (id, pixels) in survivors.iter().enumerate() {
        for &p in pixels {
            marks[p] = id as u32 + 1;
        }
    }
    MarkerMap::new(width, height, marks)
}

const EDT_INF: f64 = f64::INFINITY;

/// Exact squared Euclidean distance to the nearest nonzero marker pixel
/// (Felzenszwalb–Huttenlocher lower-envelope transform, column pass then
/// row pass). Distances are exact integers in f64.
fn exact_edt_squared(width: usize, height: usize, marks: &[u32]) -> Vec<f64> {
    let mut field: Vec<f64> = marks
        .iter()
        .map(|&m| if m != 0 { 0.0 } else { EDT_INF })
        .collect();

    let mut line = vec![0.0f64; width.max(height)];
    let mut out_line = vec![0.0f64; width.max(height)];
    for x in 0..width {
        for y in 0..height {
            line[y] = field[y * width + x];
        }
        dt1d(&line[..height], &mut out_line[..height]);
        for y in 0..height {
            field[y * width + x] = out_line[y];
        }
    }
    for y in 0..height {
        line[..width].copy_from_slice(&field[y * width..(y + 1) * width]);
        dt1d(&line[..width], &mut out_line[..width]);
        field[y * width..(y + 1) * width].copy_from_slice(&out_line[..width]);
    }
    field
}

/// One-dimensional squared-distance transform `out[q] = min_p (q-p)^2 + f[p]`.
/// Infinite entries contribute no parabola; an all-infinite line stays
/// infinite.
fn dt1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut sites = vec![0usize; n];
    let mut bounds = vec![0.0f64; n + 1];
    let mut k = usize::MAX;
    for q in 0..n {
        if f[q] == EDT_INF {
            continue;
        }
        if k == usize::MAX {
            k = 0;
            sites[0] = q;
            bounds[0] = f64::NEG_INFINITY;
            bounds[1] = f64::INFINITY;
            continue;
        }
        // Intersection of the parabola at q with the rightmost kept one.
        let mut s;
        loop {
            let p = sites[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= bounds[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        sites[k] = q;
        bounds[k] = s;
        bounds[k + 1] = f64::INFINITY;
    }
    if k == usize::MAX {
        out[..n].copy_from_slice(&f[..n]);
        return;
    }
    let mut j = 0;
    for q in 0..n {
        while bounds[j + 1] < q as f64 {
            j += 1;
        }
        let p = sites[j];
        let d = q as isize - p as isize;
        out[q] = (d * d) as f64 + f[p];
    }
}

/// Regional minima of a scalar field: connected plateaus whose neighbors
/// are all strictly higher, returned as markers in raster-anchor order.
fn regional_minima(width: usize, height: usize, f: &[f64], conn: Connectivity) -> MarkerMap {
    let mut marks = vec![0u32; f.len()];
    let mut visited = vec![false; f.len()];
    let mut next_id = 0u32;
    for start in 0..f.len() {
        if visited[start] {
            continue;
        }
        // Flood the plateau of equal value containing `start`.
        let value = f[start];
        let mut plateau = vec![start];
        visited[start] = true;
        let mut is_minimum = true;
        let mut cursor = 0;
        while cursor < plateau.len() {
            let p = plateau[cursor];
            cursor += 1;
            for_each_neighbor(width, height, p, conn, |q| {
                if f[q] == value {
                    if !visited[q] {
                        visited[q] = true;
                        plateau.push(q);
                    }
                } else if f[q] < value {
                    is_minimum = false;
                }
            });
        }
        if is_minimum {
            next_id += 1;
            for &p in &plateau {
                marks[p] = next_id;
            }
        }
    }
    MarkerMap::new(width, height, marks).expect("plateau ids are contiguous by construction")
}

/// Derives the background marker: the watershed ridge of the exact
/// Euclidean distance transform away from the foreground markers, all
/// ridge pixels sharing one id. With fewer than two distance basins there
/// is no ridge and the result is empty (documented degenerate case).
pub fn background_markers(fg: &MarkerMap, conn: Connectivity) -> Result<MarkerMap> {
    if fg.is_empty() {
        return Err(Error::EmptyMarkers);
    }
    let (width, height) = (fg.width(), fg.height());
    let squared = exact_edt_squared(width, height, fg.marks());
    let distances: Vec<f64> = squared.iter().map(|d| d.sqrt()).collect();
    let minima = regional_minima(width, height, &distances, conn);
    let max = distances.iter().fold(0.0f64, |a, &b| a.max(b));
    let raster = RasterImage::new(
        width,
        height,
        1,
        SampleRange::new(0.0, max)?,
        ColorSpaceTag::Rgb,
        distances,
    )?;
    let flooded = marker_watershed(&raster, &minima, conn)?;
    let marks: Vec<u32> = flooded
        .labels()
        .iter()
        .map(|&l| if l == 0 { 1 } else { 0 })
        .collect();
    MarkerMap::new(width, height, marks)
}

/// Merges foreground and background markers into one map; background ids
/// are shifted past the foreground range.
pub fn combine_markers(fg: &MarkerMap, bg: &MarkerMap) -> Result<MarkerMap> {
    if fg.width() != bg.width() || fg.height() != bg.height() {
        return Err(Error::contract("marker maps differ in dimensions"));
    }
    let offset = fg.marker_count();
    let mut marks = Vec::with_capacity(fg.marks().len());
    for (&f, &b) in fg.marks().iter().zip(bg.marks()) {
        if f != 0 && b != 0 {
            return Err(Error::contract(
                "foreground and background markers overlap",
            ));
        }
        marks.push(if f != 0 {
            f
        } else if b != 0 {
            offset + b
        } else {
            0
        });
    }
    MarkerMap::new(fg.width(), fg.height(), marks)
}

/// Forces the marked pixels to sit strictly below every other value, then
/// rebuilds the rest of the field by reconstruction-by-erosion so that the
/// connected marker sets are the only regional minima left.
pub fn impose_minima<T: Scalar>(
    f: &RasterImage<T>,
    markers: &MarkerMap,
    conn: Connectivity,
) -> Result<RasterImage<T>> {
    if f.channels() != 1 {
        return Err(Error::contract("impose_minima expects a single channel"));
    }
    if markers.width() != f.width() || markers.height() != f.height() {
        return Err(Error::contract("marker map dimensions do not match image"));
    }
    if markers.is_empty() {
        return Err(Error::EmptyMarkers);
    }
    let (width, height) = (f.width(), f.height());
    let values = f.plane(0);
    let mut min = values[0];
    let mut max = values[0];
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    let lo = min - T::one();
    if !(lo < min) {
        return Err(Error::contract(
            "cannot place markers strictly below the field minimum at this scale",
        ));
    }

    // Mask keeps the original field off the markers; the marker image sits
    // at the ceiling off the markers and at `lo` on them.
    let marked: Vec<bool> = markers.marks().iter().map(|&m| m != 0).collect();
    let mask: Vec<T> = values
        .iter()
        .zip(&marked)
        .map(|(&v, &m)| if m { lo } else { v })
        .collect();
    let mut recon: Vec<T> = marked.iter().map(|&m| if m { lo } else { max }).collect();

    reconstruct_by_erosion(&mut recon, &mask, width, height, conn);

    let mut out_min = recon[0];
    let mut out_max = recon[0];
    for &v in &recon {
        out_min = out_min.min(v);
        out_max = out_max.max(v);
    }
    RasterImage::new(
        width,
        height,
        1,
        SampleRange::new(out_min, out_max)?,
        f.space(),
        recon,
    )
}

/// Morphological reconstruction by erosion of `recon` above `mask`
/// (pointwise `recon >= mask` on entry), using the two-sweep-plus-queue
/// hybrid schedule. The result is the unique fixpoint of
/// `recon = max(mask, erode(recon))`.
fn reconstruct_by_erosion<T: Scalar>(
    recon: &mut [T],
    mask: &[T],
    width: usize,
    height: usize,
    conn: Connectivity,
) {
    let at = |x: isize, y: isize| y as usize * width + x as usize;
    let mut queue: VecDeque<usize> = VecDeque::new();

    for y in 0..height as isize {
        for x in 0..width as isize {
            let p = at(x, y);
            let mut v = recon[p];
            for &(dx, dy) in conn.backward_offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < width as isize && ny < height as isize {
                    v = v.min(recon[at(nx, ny)]);
                }
            }
            recon[p] = v.max(mask[p]);
        }
    }
    for y in (0..height as isize).rev() {
        for x in (0..width as isize).rev() {
            let p = at(x, y);
            let mut v = recon[p];
            for &(dx, dy) in conn.forward_offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < width as isize && ny < height as isize {
                    v = v.min(recon[at(nx, ny)]);
                }
            }
            let updated = v.max(mask[p]);
            recon[p] = updated;
            // The queue test runs against the settled value of p.
            let mut enqueue = false;
            for &(dx, dy) in conn.forward_offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < width as isize && ny < height as isize {
                    let q = at(nx, ny);
                    if recon[q] > updated && recon[q] > mask[q] {
                        enqueue = true;
                        break;
                    }
                }
            }
            if enqueue {
                queue.push_back(p);
            }
        }
    }
    while let Some(p) = queue.pop_front() {
        let base = recon[p];
        for_each_neighbor(width, height, p, conn, |q| {
            if recon[q] > base && mask[q] != recon[q] {
                recon[q] = base.max(mask[q]);
                queue.push_back(q);
            }
        });
    }
}

struct FloodEntry<T> {
    priority: T,
    seq: u64,
    index: usize,
}

impl<T: Scalar> PartialEq for FloodEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl<T: Scalar> Eq for FloodEntry<T> {}

impl<T: Scalar> PartialOrd for FloodEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for FloodEntry<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Inverted: BinaryHeap pops its greatest element and the flood needs
        // the lowest (value, sequence) pair.
        other
            .priority
            .partial_cmp(&self.priority)
            .expect("flood priorities are finite")
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Meyer's priority flood from the given markers.
///
/// The queue is seeded with marker pixels bordering unmarked ones, in
/// raster order. Popping the lowest `(value, sequence)` entry labels each
/// undecided neighbor with the popping region, unless that neighbor
/// already touches two distinct regions, in which case it becomes ridge
/// (label 0) and never floods further.
pub fn marker_watershed<T: Scalar>(
    f: &RasterImage<T>,
    markers: &MarkerMap,
    conn: Connectivity,
) -> Result<WatershedLabels> {
    if f.channels() != 1 {
        return Err(Error::contract("watershed expects a single channel"));
    }
    if markers.width() != f.width() || markers.height() != f.height() {
        return Err(Error::contract("marker map dimensions do not match image"));
    }
    if markers.is_empty() {
        return Err(Error::EmptyMarkers);
    }
    let (width, height) = (f.width(), f.height());
    let values = f.plane(0);
    let mut labels: Vec<u32> = markers.marks().to_vec();
    let mut decided: Vec<bool> = labels.iter().map(|&m| m != 0).collect();

    let mut heap: BinaryHeap<FloodEntry<T>> = BinaryHeap::new();
    let mut seq = 0u64;
    for p in 0..labels.len() {
        if labels[p] == 0 {
            continue;
        }
        let mut borders_unmarked = false;
        for_each_neighbor(width, height, p, conn, |q| {
            if labels[q] == 0 {
                borders_unmarked = true;
            }
        });
        if borders_unmarked {
            heap.push(FloodEntry {
                priority: values[p],
                seq,
                index: p,
            });
            seq += 1;
        }
    }

    while let Some(FloodEntry { index: p, .. }) = heap.pop() {
        let region = labels[p];
        let x = (p % width) as isize;
        let y = (p / width) as isize;
        for &(dx, dy) in conn.offsets() {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                continue;
            }
            let q = ny as usize * width + nx as usize;
            if decided[q] {
                continue;
            }
            let mut first = 0u32;
            let mut multiple = false;
            for_each_neighbor(width, height, q, conn, |r| {
                let l = labels[r];
                if l != 0 {
                    if first == 0 {
                        first = l;
                    } else if l != first {
                        multiple = true;
                    }
                }
            });
            decided[q] = true;
            if !multiple {
                labels[q] = region;
                heap.push(FloodEntry {
                    priority: values[q],
                    seq,
                    index: q,
                });
                seq += 1;
            }
        }
    }
    WatershedLabels::new(width, height, labels)
}
