//! End-to-end orchestration: one color space per run, two runs per
//! comparison, stage artifacts, and the JSON report.
//!
//! Every stage artifact is quantized to integer byte values before it is
//! kept, so the in-memory rasters are byte-for-byte what the `.ppm` stage
//! files contain. The median filter runs on the quantized composite and the
//! metrics compare quantized rasters, which means re-running `metrics` on
//! the emitted stage files reproduces the report numbers exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::clustering::{self, KMeansConfig, LabelMap};
use crate::colorspace::{self, ColorSpaceTag};
use crate::edge::{self, GradientField, SobelMode};
use crate::image::{sample_to_byte, save_ppm, to_unit_range, RasterImage, SampleRange, StageName};
use crate::metrics::{ChannelMetrics, MAX_I_DEFAULT};
use crate::postfilter::{median_filter, WindowSpec};
use crate::watershed::{self, Connectivity, WatershedLabels};
use crate::{Error, Raster, Result};

/// Full configuration of one segmentation run.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    /// Working color space; must not be RGB.
    pub space: ColorSpaceTag,
    pub kmeans: KMeansConfig<f64>,
    pub sobel_mode: SobelMode,
    pub connectivity: Connectivity,
    pub erosion_radius: usize,
    pub min_area: usize,
    pub median_window: WindowSpec,
    /// Peak sample value for PSNR (255 by default, 256 for paper-compat).
    pub max_i: f64,
    pub emit_intermediates: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            space: ColorSpaceTag::Lab,
            kmeans: KMeansConfig::default(),
            sobel_mode: SobelMode::Exact,
            connectivity: Connectivity::Four,
            erosion_radius: 1,
            min_area: 20,
            median_window: WindowSpec::default(),
            max_i: MAX_I_DEFAULT,
            emit_intermediates: true,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.space == ColorSpaceTag::Rgb {
            return Err(Error::contract("pipeline space must be lab or hsv"));
        }
        if self.max_i <= 0.0 || !self.max_i.is_finite() {
            return Err(Error::contract(format!(
                "max_i must be positive and finite, got {}",
                self.max_i
            )));
        }
        Ok(())
    }
}

/// The six stage rasters, indexed by [`StageName`], each already quantized
/// to the byte values its `.ppm` file will contain.
#[derive(Clone, Debug, PartialEq)]
pub struct StageArtifacts {
    stages: Vec<Raster>,
}

impl StageArtifacts {
    fn new(stages: Vec<Raster>) -> Self {
        debug_assert_eq!(stages.len(), StageName::ALL.len());
        StageArtifacts { stages }
    }

    pub fn get(&self, stage: StageName) -> &Raster {
        &self.stages[stage.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (StageName, &Raster)> {
        StageName::ALL.iter().map(move |&s| (s, self.get(s)))
    }
}

/// Result of one single-space run.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub artifacts: StageArtifacts,
    pub metrics: ChannelMetrics,
}

/// Quantizes a raster to integer byte values (the exact bytes `save_ppm`
/// would write), declared on the `[0, 255]` range.
fn quantize_to_bytes(img: &Raster) -> Raster {
    let samples: Vec<f64> = img
        .samples()
        .iter()
        .map(|&v| sample_to_byte(v, img.range()) as f64)
        .collect();
    RasterImage::new(
        img.width(),
        img.height(),
        img.channels(),
        SampleRange::byte(),
        img.space(),
        samples,
    )
    .expect("byte samples are finite and in range")
}

/// The canonical byte-valued form of an input image: unit-scaled, then
/// quantized. This is the raster the `input` stage file contains, the MSE
/// reference, and the basis of the report checksum.
pub fn canonical_input_bytes(img: &Raster) -> Result<Raster> {
    if img.space() != ColorSpaceTag::Rgb || img.channels() != 3 {
        return Err(Error::contract("input must be a 3-channel RGB raster"));
    }
    Ok(quantize_to_bytes(&to_unit_range(img)?))
}

/// False-color byte rendering of a converted-space raster: each channel is
/// mapped from its nominal range onto bytes. A visualization only — the
/// pipeline keeps computing on the full-precision raster.
fn render_space_bytes(img: &Raster) -> Raster {
    let ranges = img.space().nominal_channel_ranges();
    let npx = img.pixel_count();
    let mut samples = vec![0.0f64; 3 * npx];
    for c in 0..3 {
        let (lo, hi) = ranges[c];
        let w = hi - lo;
        for (i, &v) in img.plane(c).iter().enumerate() {
            let v01 = ((v - lo) / w).clamp(0.0, 1.0);
            samples[c * npx + i] = sample_to_byte(v01, SampleRange::unit()) as f64;
        }
    }
    RasterImage::new(
        img.width(),
        img.height(),
        3,
        SampleRange::byte(),
        ColorSpaceTag::Rgb,
        samples,
    )
    .expect("byte samples are finite and in range")
}

/// Wraps raw gradient magnitudes in a raster without rescaling them.
fn gradient_raster_raw(g: &GradientField<f64>) -> Raster {
    let max = g.max_value();
    RasterImage::new(
        g.width(),
        g.height(),
        1,
        SampleRange::new(0.0, max).expect("gradient extrema are finite"),
        ColorSpaceTag::Rgb,
        g.values().to_vec(),
    )
    .expect("gradient magnitudes lie in [0, max]")
}

/// Paints each watershed region with the mean color its pixels have in the
/// recolored raster; ridge pixels (label 0) become the space's black.
fn composite_image(recolored: &Raster, ws: &WatershedLabels) -> Result<Raster> {
    if recolored.width() != ws.width() || recolored.height() != ws.height() {
        return Err(Error::contract("label dimensions do not match image"));
    }
    let regions = ws.max_label() as usize;
    let mut sums = vec![[0.0f64; 3]; regions + 1];
    let mut counts = vec![0usize; regions + 1];
    for (i, &label) in ws.labels().iter().enumerate() {
        if label == 0 {
            continue;
        }
        let r = label as usize;
        counts[r] += 1;
        for c in 0..3 {
            sums[r][c] += recolored.plane(c)[i];
        }
    }
    let mut means = vec![[0.0f64; 3]; regions + 1];
    for r in 1..=regions {
        if counts[r] > 0 {
            for c in 0..3 {
                means[r][c] = sums[r][c] / counts[r] as f64;
            }
        }
    }
    let npx = recolored.pixel_count();
    let mut samples = vec![0.0f64; 3 * npx];
    for (i, &label) in ws.labels().iter().enumerate() {
        // Label 0 keeps the zero fill: black in both LAB and HSV.
        let color = &means[label as usize];
        for c in 0..3 {
            samples[c * npx + i] = color[c];
        }
    }
    RasterImage::new(
        recolored.width(),
        recolored.height(),
        3,
        recolored.range(),
        recolored.space(),
        samples,
    )
}

/// Runs the full single-space pipeline: convert, cluster, recolor, Sobel,
/// markers, watershed, composite, median filter, metrics.
pub fn run_pipeline(img: &Raster, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let stage = |s: StageName| move |e: Error| e.at_stage(s);

    let input_bytes = canonical_input_bytes(img).map_err(stage(StageName::Input))?;
    let unit = to_unit_range(img).map_err(stage(StageName::Input))?;

    let converted = match cfg.space {
        ColorSpaceTag::Lab => colorspace::rgb_to_lab(&unit),
        ColorSpaceTag::Hsv => colorspace::rgb_to_hsv(&unit),
        ColorSpaceTag::Rgb => unreachable!("validated above"),
    }
    .map_err(stage(StageName::Converted))?;
    let converted_stage = render_space_bytes(&converted);

    let features = clustering::features_from_image(&converted, [true; 3], true)
        .map_err(stage(StageName::Clustered))?;
    let fit = clustering::kmeans_fit(&features, &cfg.kmeans).map_err(stage(StageName::Clustered))?;
    let labels = LabelMap::new(img.width(), img.height(), fit.labels.clone())
        .map_err(stage(StageName::Clustered))?;
    let centroids = clustering::denormalize_centroids(&fit.centroids, cfg.space, [true; 3])
        .map_err(stage(StageName::Clustered))?;
    let recolored = clustering::recolor_by_cluster(&converted, &labels, &centroids)
        .map_err(stage(StageName::Clustered))?;
    let clustered_stage = render_space_bytes(&recolored);

    let intensity = edge::intensity(&recolored).map_err(stage(StageName::Gradient))?;
    let gradient =
        edge::sobel_gradient(&intensity, cfg.sobel_mode).map_err(stage(StageName::Gradient))?;
    let gradient_stage = quantize_to_bytes(&gradient.to_raster());

    let fg = watershed::foreground_markers(
        &labels,
        cfg.min_area,
        cfg.erosion_radius,
        cfg.connectivity,
    )
    .map_err(stage(StageName::Watershed))?;
    let bg = watershed::background_markers(&fg, cfg.connectivity)
        .map_err(stage(StageName::Watershed))?;
    let markers = watershed::combine_markers(&fg, &bg).map_err(stage(StageName::Watershed))?;
    let raw = gradient_raster_raw(&gradient);
    let imposed = watershed::impose_minima(&raw, &markers, cfg.connectivity)
        .map_err(stage(StageName::Watershed))?;
    let flooded = watershed::marker_watershed(&imposed, &markers, cfg.connectivity)
        .map_err(stage(StageName::Watershed))?;
    let composite = composite_image(&recolored, &flooded).map_err(stage(StageName::Watershed))?;
    let composite_rgb = match cfg.space {
        ColorSpaceTag::Lab => colorspace::lab_to_rgb(&composite),
        ColorSpaceTag::Hsv => colorspace::hsv_to_rgb(&composite),
        ColorSpaceTag::Rgb => unreachable!("validated above"),
    }
    .map_err(stage(StageName::Watershed))?;
    let watershed_stage = quantize_to_bytes(&composite_rgb);

    let filtered = median_filter(&watershed_stage, cfg.median_window)
        .map_err(stage(StageName::Filtered))?;

    let metrics = ChannelMetrics::from_images(&input_bytes, &filtered, cfg.max_i)?;
    Ok(PipelineOutput {
        artifacts: StageArtifacts::new(vec![
            input_bytes,
            converted_stage,
            clustered_stage,
            gradient_stage,
            watershed_stage,
            filtered,
        ]),
        metrics,
    })
}

/// Both-space outcome; a failed space carries its error while the other
/// side's results are preserved.
#[derive(Debug)]
pub struct CompareOutcome {
    pub lab: Result<PipelineOutput>,
    pub hsv: Result<PipelineOutput>,
}

/// Runs the LAB and HSV pipelines with identical settings (and therefore
/// identical K-means seeding). With `threads >= 2` the two runs execute on
/// worker threads; results are byte-identical either way.
pub fn compare_spaces(img: &Raster, base: &PipelineConfig, threads: usize) -> CompareOutcome {
    let mut lab_cfg = base.clone();
    lab_cfg.space = ColorSpaceTag::Lab;
    let mut hsv_cfg = base.clone();
    hsv_cfg.space = ColorSpaceTag::Hsv;

    if threads >= 2 {
        std::thread::scope(|scope| {
            let lab = scope.spawn(|| run_pipeline(img, &lab_cfg));
            let hsv = scope.spawn(|| run_pipeline(img, &hsv_cfg));
            CompareOutcome {
                lab: lab.join().expect("lab worker panicked"),
                hsv: hsv.join().expect("hsv worker panicked"),
            }
        })
    } else {
        CompareOutcome {
            lab: run_pipeline(img, &lab_cfg),
            hsv: run_pipeline(img, &hsv_cfg),
        }
    }
}

/// Winner of a PSNR comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winner {
    Lab,
    Hsv,
    Tie,
    /// A side failed; no comparison is possible.
    NotAvailable,
}

impl Winner {
    pub fn as_str(self) -> &'static str {
        match self {
            Winner::Lab => "lab",
            Winner::Hsv => "hsv",
            Winner::Tie => "tie",
            Winner::NotAvailable => "n/a",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub per_channel: [Winner; 3],
    pub overall: Winner,
}

/// Pure function of the recorded metrics: per channel the higher PSNR wins
/// (an infinite PSNR beats any finite one), and the overall winner is the
/// per-channel majority.
pub fn verdict_from_metrics(
    lab: Option<&ChannelMetrics>,
    hsv: Option<&ChannelMetrics>,
) -> Verdict {
    let (lab, hsv) = match (lab, hsv) {
        (Some(l), Some(h)) => (l, h),
        _ => {
            return Verdict {
                per_channel: [Winner::NotAvailable; 3],
                overall: Winner::NotAvailable,
            }
        }
    };
    let mut per_channel = [Winner::Tie; 3];
    for c in 0..3 {
        per_channel[c] = match (lab.psnr_infinite[c], hsv.psnr_infinite[c]) {
            (true, true) => Winner::Tie,
            (true, false) => Winner::Lab,
            (false, true) => Winner::Hsv,
            (false, false) => {
                let l = lab.psnr_db[c].expect("finite PSNR recorded");
                let h = hsv.psnr_db[c].expect("finite PSNR recorded");
                if l > h {
                    Winner::Lab
                } else if h > l {
                    Winner::Hsv
                } else {
                    Winner::Tie
                }
            }
        };
    }
    let labs = per_channel.iter().filter(|&&w| w == Winner::Lab).count();
    let hsvs = per_channel.iter().filter(|&&w| w == Winner::Hsv).count();
    let overall = if labs > hsvs {
        Winner::Lab
    } else if hsvs > labs {
        Winner::Hsv
    } else {
        Winner::Tie
    };
    Verdict {
        per_channel,
        overall,
    }
}

/// What the report records about the input image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputDescriptor {
    pub path: String,
    pub width: usize,
    pub height: usize,
    /// `sha256:` + hex digest of the canonical byte-valued PPM encoding.
    pub checksum: String,
}

pub fn describe_input(path: &str, img: &Raster) -> Result<InputDescriptor> {
    let canonical = canonical_input_bytes(img)?;
    let encoded = save_ppm(&canonical)?;
    let digest = Sha256::digest(&encoded);
    let mut checksum = String::with_capacity(7 + 64);
    checksum.push_str("sha256:");
    for byte in digest.iter() {
        write!(checksum, "{byte:02x}").expect("writing to a String cannot fail");
    }
    Ok(InputDescriptor {
        path: path.to_string(),
        width: img.width(),
        height: img.height(),
        checksum,
    })
}

/// Writes the six stage files (`00-input.ppm` .. `05-filtered.ppm`) into
/// `dir`, creating it if needed.
pub fn write_stage_files(artifacts: &StageArtifacts, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (stage, raster) in artifacts.iter() {
        std::fs::write(dir.join(stage.file_name()), save_ppm(raster)?)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Report serialization. Hand-rolled so the byte layout is fully pinned:
// UTF-8, two-space indentation, keys sorted at every level, floats in
// C-style `%.6e`.

/// Formats a float like C's `%.6e` (six fractional digits, signed two-digit
/// exponent), the fixed float format of all report files.
pub fn fmt_e6(v: f64) -> String {
    let s = format!("{v:.6e}");
    let (mantissa, exponent) = s.split_once('e').expect("exponential format always has 'e'");
    let (sign, digits) = match exponent.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exponent),
    };
    format!("{mantissa}e{sign}{digits:0>2}")
}

enum Json {
    Null,
    Bool(bool),
    Num(String),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(&'static str, Json)>),
}

fn escape_into(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                write!(out, "\\u{:04x}", c as u32).expect("writing to a String cannot fail")
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn render_json(value: &Json, indent: usize, out: &mut String) {
    const STEP: usize = 2;
    match value {
        Json::Null => out.push_str("null"),
        Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Json::Num(n) => out.push_str(n),
        Json::Str(s) => escape_into(s, out),
        Json::Arr(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&" ".repeat(indent + STEP));
                render_json(item, indent + STEP, out);
            }
            out.push('\n');
            out.push_str(&" ".repeat(indent));
            out.push(']');
        }
        Json::Obj(pairs) => {
            if pairs.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut sorted: Vec<&(&'static str, Json)> = pairs.iter().collect();
            sorted.sort_by_key(|(k, _)| *k);
            out.push('{');
            for (i, (key, item)) in sorted.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&" ".repeat(indent + STEP));
                escape_into(key, out);
                out.push_str(": ");
                render_json(item, indent + STEP, out);
            }
            out.push('\n');
            out.push_str(&" ".repeat(indent));
            out.push('}');
        }
    }
}

fn render_document(root: Json) -> String {
    let mut out = String::new();
    render_json(&root, 0, &mut out);
    out.push('\n');
    out
}

fn config_json(cfg: &PipelineConfig, include_space: bool) -> Json {
    let mut pairs = vec![
        (
            "connectivity",
            Json::Num(cfg.connectivity.as_u8().to_string()),
        ),
        ("distance", Json::Str(cfg.kmeans.metric.name().to_string())),
        ("emit_intermediates", Json::Bool(cfg.emit_intermediates)),
        ("erosion_radius", Json::Num(cfg.erosion_radius.to_string())),
        ("k", Json::Num(cfg.kmeans.k.to_string())),
        ("max_i", Json::Num(fmt_e6(cfg.max_i))),
        ("max_iters", Json::Num(cfg.kmeans.max_iters.to_string())),
        (
            "median_window",
            Json::Num(cfg.median_window.side().to_string()),
        ),
        ("min_area", Json::Num(cfg.min_area.to_string())),
        ("restarts", Json::Num(cfg.kmeans.restarts.to_string())),
        ("seed", Json::Num(cfg.kmeans.seed.to_string())),
        ("sobel_mode", Json::Str(cfg.sobel_mode.name().to_string())),
        ("tol", Json::Num(fmt_e6(cfg.kmeans.tol))),
    ];
    if include_space {
        pairs.push(("space", Json::Str(cfg.space.name().to_string())));
    }
    Json::Obj(pairs)
}

fn metrics_json_value(m: &ChannelMetrics) -> Json {
    Json::Obj(vec![
        (
            "mse",
            Json::Arr(m.mse.iter().map(|&v| Json::Num(fmt_e6(v))).collect()),
        ),
        (
            "psnr_db",
            Json::Arr(
                m.psnr_db
                    .iter()
                    .map(|p| match p {
                        Some(v) => Json::Num(fmt_e6(*v)),
                        None => Json::Null,
                    })
                    .collect(),
            ),
        ),
        (
            "psnr_infinite",
            Json::Arr(m.psnr_infinite.iter().map(|&b| Json::Bool(b)).collect()),
        ),
    ])
}

fn outcome_json(result: &Result<PipelineOutput>) -> Json {
    match result {
        Ok(out) => metrics_json_value(&out.metrics),
        Err(e) => Json::Obj(vec![("error", Json::Str(e.to_string()))]),
    }
}

fn input_json(input: &InputDescriptor) -> Json {
    Json::Obj(vec![
        ("checksum", Json::Str(input.checksum.clone())),
        ("height", Json::Num(input.height.to_string())),
        ("path", Json::Str(input.path.clone())),
        ("width", Json::Num(input.width.to_string())),
    ])
}

fn verdict_json(v: &Verdict) -> Json {
    Json::Obj(vec![
        ("overall", Json::Str(v.overall.as_str().to_string())),
        (
            "per_channel",
            Json::Arr(
                v.per_channel
                    .iter()
                    .map(|w| Json::Str(w.as_str().to_string()))
                    .collect(),
            ),
        ),
    ])
}

/// The two-space comparison report (the `report.json` payload).
pub fn comparison_report_json(
    input: &InputDescriptor,
    cfg: &PipelineConfig,
    outcome: &CompareOutcome,
) -> String {
    let verdict = verdict_from_metrics(
        outcome.lab.as_ref().ok().map(|o| &o.metrics),
        outcome.hsv.as_ref().ok().map(|o| &o.metrics),
    );
    render_document(Json::Obj(vec![
        ("config", config_json(cfg, false)),
        ("input", input_json(input)),
        (
            "results",
            Json::Obj(vec![
                ("hsv", outcome_json(&outcome.hsv)),
                ("lab", outcome_json(&outcome.lab)),
            ]),
        ),
        ("verdict", verdict_json(&verdict)),
        ("version", Json::Str(env!("CARGO_PKG_VERSION").to_string())),
    ]))
}

/// Single-space metrics report (the `metrics.json` payload of `segment`).
pub fn segment_report_json(
    input: &InputDescriptor,
    cfg: &PipelineConfig,
    metrics: &ChannelMetrics,
) -> String {
    render_document(Json::Obj(vec![
        ("config", config_json(cfg, true)),
        ("input", input_json(input)),
        ("metrics", metrics_json_value(metrics)),
        ("version", Json::Str(env!("CARGO_PKG_VERSION").to_string())),
    ]))
}

/// Standalone metrics payload (the `metrics` subcommand's stdout).
pub fn metrics_stdout_json(metrics: &ChannelMetrics) -> String {
    let Json::Obj(mut pairs) = metrics_json_value(metrics) else {
        unreachable!("metrics_json_value returns an object")
    };
    pairs.push(("max_i", Json::Num(fmt_e6(metrics.max_i))));
    render_document(Json::Obj(pairs))
}
