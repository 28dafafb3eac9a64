//! Command-line interface: `segment`, `compare`, and `metrics` subcommands.
//!
//! Exit codes: 0 success, 1 usage error (bad flags), 2 runtime error
//! (I/O, malformed images, pipeline failures).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::clustering::Metric;
use crate::colorspace::ColorSpaceTag;
use crate::edge::SobelMode;
use crate::image::load_ppm;
use crate::metrics::{ChannelMetrics, MAX_I_PAPER_COMPAT};
use crate::pipeline::{
    self, compare_spaces, describe_input, run_pipeline, write_stage_files, PipelineConfig,
};
use crate::postfilter::WindowSpec;
use crate::watershed::Connectivity;
use crate::{Raster, Result};

#[derive(Parser, Debug)]
#[command(
    name = "chromaseg",
    version,
    about = "Clustering-based color image segmentation, with an L*a*b* vs HSV comparison mode"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment one image in a single working color space
    Segment(SegmentArgs),
    /// Segment in both LAB and HSV and report the PSNR verdict
    Compare(CompareArgs),
    /// Compute per-channel MSE/PSNR between two PPM images
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
struct SegmentArgs {
    /// Working color space
    #[arg(long, value_enum)]
    space: SpaceArg,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Input image (binary PPM, P6)
    #[arg(long)]
    input: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Number of clusters
    #[arg(long, default_value_t = 3, value_parser = parse_positive_usize)]
    k: usize,
    /// Clustering distance
    #[arg(long, value_enum, default_value_t = DistanceArg::Cosine)]
    distance: DistanceArg,
    /// RNG seed for centroid initialization
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// K-means iteration cap
    #[arg(long, default_value_t = 100, value_parser = parse_positive_usize)]
    max_iters: usize,
    /// Gradient magnitude formula
    #[arg(long, value_enum, default_value_t = SobelArg::Exact)]
    sobel: SobelArg,
    /// Pixel connectivity for markers and flooding
    #[arg(long, value_enum, default_value_t = ConnectivityArg::Four)]
    connectivity: ConnectivityArg,
    /// Marker erosion radius in pixels
    #[arg(long, default_value_t = 1)]
    erosion: usize,
    /// Minimum surviving marker area in pixels
    #[arg(long, default_value_t = 20)]
    min_area: usize,
    /// Median filter window side (odd)
    #[arg(long, default_value_t = 3, value_parser = parse_odd_window)]
    median_window: usize,
    /// Peak sample value for PSNR
    #[arg(long, default_value_t = 255.0, value_parser = parse_max_i)]
    max_i: f64,
    /// Use the 256 PSNR peak (overrides --max-i)
    #[arg(long)]
    paper_compat: bool,
    /// Write the six stage PPMs
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, value_name = "BOOL")]
    emit_intermediates: bool,
    /// Report format
    #[arg(long, value_enum, default_value_t = ReportArg::Json)]
    report: ReportArg,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Reference image (binary PPM, P6)
    #[arg(long)]
    a: PathBuf,
    /// Test image (binary PPM, P6)
    #[arg(long)]
    b: PathBuf,
    /// Peak sample value for PSNR
    #[arg(long, default_value_t = 255.0, value_parser = parse_max_i)]
    max_i: f64,
    /// Use the 256 PSNR peak (overrides --max-i)
    #[arg(long)]
    paper_compat: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SpaceArg {
    Lab,
    Hsv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum DistanceArg {
    Cosine,
    Sqeuclidean,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SobelArg {
    Exact,
    Approx,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ConnectivityArg {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ReportArg {
    Json,
}

fn parse_positive_usize(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v == 0 {
        return Err("value must be at least 1".to_string());
    }
    Ok(v)
}

fn parse_odd_window(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v == 0 || v % 2 == 0 {
        return Err("window side must be odd and positive".to_string());
    }
    Ok(v)
}

fn parse_max_i(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !v.is_finite() || v <= 0.0 {
        return Err("peak value must be positive and finite".to_string());
    }
    Ok(v)
}

impl CommonArgs {
    fn to_config(&self, space: ColorSpaceTag) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        cfg.space = space;
        cfg.kmeans.k = self.k;
        cfg.kmeans.metric = match self.distance {
            DistanceArg::Cosine => Metric::Cosine,
            DistanceArg::Sqeuclidean => Metric::SquaredEuclidean,
        };
        cfg.kmeans.seed = self.seed;
        cfg.kmeans.max_iters = self.max_iters;
        cfg.sobel_mode = match self.sobel {
            SobelArg::Exact => SobelMode::Exact,
            SobelArg::Approx => SobelMode::Approximate,
        };
        cfg.connectivity = match self.connectivity {
            ConnectivityArg::Four => Connectivity::Four,
            ConnectivityArg::Eight => Connectivity::Eight,
        };
        cfg.erosion_radius = self.erosion;
        cfg.min_area = self.min_area;
        cfg.median_window = WindowSpec::new(self.median_window)?;
        cfg.max_i = if self.paper_compat {
            MAX_I_PAPER_COMPAT
        } else {
            self.max_i
        };
        cfg.emit_intermediates = self.emit_intermediates;
        cfg.output_dir = Some(self.out.clone());
        Ok(cfg)
    }
}

fn load_input(path: &PathBuf) -> Result<Raster> {
    let bytes = std::fs::read(path)?;
    load_ppm(&bytes)
}

/// Worker cap from `CHROMASEG_THREADS`; `compare` uses at most two workers
/// (one per color space) either way.
fn thread_cap() -> Result<usize> {
    match std::env::var("CHROMASEG_THREADS") {
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                crate::Error::contract(format!(
                    "CHROMASEG_THREADS must be a positive integer, got {raw:?}"
                ))
            })?;
            if n == 0 {
                return Err(crate::Error::contract(
                    "CHROMASEG_THREADS must be a positive integer, got \"0\"",
                ));
            }
            Ok(n)
        }
        Err(std::env::VarError::NotPresent) => Ok(2),
        Err(std::env::VarError::NotUnicode(_)) => Err(crate::Error::contract(
            "CHROMASEG_THREADS is not valid unicode",
        )),
    }
}

fn run_segment(args: &SegmentArgs) -> Result<()> {
    let space = match args.space {
        SpaceArg::Lab => ColorSpaceTag::Lab,
        SpaceArg::Hsv => ColorSpaceTag::Hsv,
    };
    let cfg = args.common.to_config(space)?;
    let img = load_input(&args.common.input)?;
    let input = describe_input(&args.common.input.display().to_string(), &img)?;
    let out = run_pipeline(&img, &cfg)?;
    std::fs::create_dir_all(&args.common.out)?;
    if cfg.emit_intermediates {
        write_stage_files(&out.artifacts, &args.common.out)?;
    }
    let report = pipeline::segment_report_json(&input, &cfg, &out.metrics);
    std::fs::write(args.common.out.join("metrics.json"), report)?;
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<()> {
    let cfg = args.common.to_config(ColorSpaceTag::Lab)?;
    let img = load_input(&args.common.input)?;
    let input = describe_input(&args.common.input.display().to_string(), &img)?;
    let threads = thread_cap()?.min(2);
    let outcome = compare_spaces(&img, &cfg, threads);
    std::fs::create_dir_all(&args.common.out)?;
    if cfg.emit_intermediates {
        if let Ok(lab) = &outcome.lab {
            write_stage_files(&lab.artifacts, &args.common.out.join("lab"))?;
        }
        if let Ok(hsv) = &outcome.hsv {
            write_stage_files(&hsv.artifacts, &args.common.out.join("hsv"))?;
        }
    }
    let report = pipeline::comparison_report_json(&input, &cfg, &outcome);
    std::fs::write(args.common.out.join("report.json"), report)?;
    Ok(())
}

fn run_metrics(args: &MetricsArgs) -> Result<()> {
    let a = load_input(&args.a)?;
    let b = load_input(&args.b)?;
    let max_i = if args.paper_compat {
        MAX_I_PAPER_COMPAT
    } else {
        args.max_i
    };
    let m = ChannelMetrics::from_images(&a, &b, max_i)?;
    print!("{}", pipeline::metrics_stdout_json(&m));
    Ok(())
}

/// Parses `argv` (including the program name), runs the subcommand, and
/// returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if informational { 0 } else { 1 };
        }
    };
    let result = match &cli.command {
        Command::Segment(args) => run_segment(args),
        Command::Compare(args) => run_compare(args),
        Command::Metrics(args) => run_metrics(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{RasterImage, SampleRange};
    use crate::metrics::MAX_I_DEFAULT;

    fn parse(argv: &[&str]) -> Cli {
        Cli::try_parse_from(argv).unwrap()
    }

    #[test]
    fn segment_defaults_mirror_the_experiment() {
        let cli = parse(&[
            "chromaseg", "segment", "--input", "a.ppm", "--space", "hsv", "--out", "d",
        ]);
        let Command::Segment(args) = cli.command else {
            panic!("expected segment");
        };
        let cfg = args.common.to_config(ColorSpaceTag::Hsv).unwrap();
        assert_eq!(cfg.kmeans.k, 3);
        assert_eq!(cfg.kmeans.metric, Metric::Cosine);
        assert_eq!(cfg.kmeans.seed, 42);
        assert_eq!(cfg.kmeans.max_iters, 100);
        assert_eq!(cfg.sobel_mode, SobelMode::Exact);
        assert_eq!(cfg.connectivity, Connectivity::Four);
        assert_eq!(cfg.erosion_radius, 1);
        assert_eq!(cfg.min_area, 20);
        assert_eq!(cfg.median_window.side(), 3);
        assert_eq!(cfg.max_i, MAX_I_DEFAULT);
        assert!(cfg.emit_intermediates);
    }

    #[test]
    fn paper_compat_overrides_max_i() {
        let cli = parse(&[
            "chromaseg",
            "compare",
            "--input",
            "a.ppm",
            "--out",
            "d",
            "--max-i",
            "200",
            "--paper-compat",
        ]);
        let Command::Compare(args) = cli.command else {
            panic!("expected compare");
        };
        let cfg = args.common.to_config(ColorSpaceTag::Lab).unwrap();
        assert_eq!(cfg.max_i, MAX_I_PAPER_COMPAT);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli_main(["chromaseg", "segment", "--bogus"]), 1);
        assert_eq!(cli_main(["chromaseg"]), 1);
        assert_eq!(
            cli_main([
                "chromaseg", "segment", "--input", "a.ppm", "--space", "rgb", "--out", "d",
            ]),
            1
        );
        assert_eq!(
            cli_main([
                "chromaseg",
                "compare",
                "--input",
                "a.ppm",
                "--out",
                "d",
                "--median-window",
                "4",
            ]),
            1
        );
        assert_eq!(
            cli_main([
                "chromaseg", "compare", "--input", "a.ppm", "--out", "d", "--k", "0",
            ]),
            1
        );
        assert_eq!(
            cli_main([
                "chromaseg", "compare", "--input", "a.ppm", "--out", "d", "--max-i", "-3",
            ]),
            1
        );
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(cli_main(["chromaseg", "--help"]), 0);
        assert_eq!(cli_main(["chromaseg", "--version"]), 0);
        assert_eq!(cli_main(["chromaseg", "segment", "--help"]), 0);
    }

    #[test]
    fn missing_input_file_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert_eq!(
            cli_main([
                "chromaseg",
                "compare",
                "--input",
                "/nonexistent/x.ppm",
                "--out",
                out.to_str().unwrap(),
            ]),
            2
        );
    }

    fn write_flat_ppm(path: &std::path::Path, w: usize, h: usize, rgb: [f64; 3]) {
        let npx = w * h;
        let mut samples = vec![0.0; 3 * npx];
        for c in 0..3 {
            samples[c * npx..(c + 1) * npx].fill(rgb[c]);
        }
        let img = RasterImage::new(
            w,
            h,
            3,
            SampleRange::byte(),
            ColorSpaceTag::Rgb,
            samples,
        )
        .unwrap();
        std::fs::write(path, crate::image::save_ppm(&img).unwrap()).unwrap();
    }

    #[test]
    fn metrics_subcommand_runs_on_real_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ppm");
        let b = dir.path().join("b.ppm");
        write_flat_ppm(&a, 6, 4, [10.0, 20.0, 30.0]);
        write_flat_ppm(&b, 6, 4, [12.0, 20.0, 30.0]);
        assert_eq!(
            cli_main([
                "chromaseg",
                "metrics",
                "--a",
                a.to_str().unwrap(),
                "--b",
                b.to_str().unwrap(),
            ]),
            0
        );
        // Mismatched dimensions are a runtime error.
        let c = dir.path().join("c.ppm");
        write_flat_ppm(&c, 3, 4, [12.0, 20.0, 30.0]);
        assert_eq!(
            cli_main([
                "chromaseg",
                "metrics",
                "--a",
                a.to_str().unwrap(),
                "--b",
                c.to_str().unwrap(),
            ]),
            2
        );
    }

    #[test]
    fn segment_writes_stages_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.ppm");
        // Two-tone image so clustering has structure to find.
        let npx = 24 * 16;
        let mut samples = vec![0.0; 3 * npx];
        for y in 0..16 {
            for x in 0..24 {
                let i = y * 24 + x;
                let c = if x < 12 {
                    [200.0, 30.0, 40.0]
                } else {
                    [40.0, 180.0, 90.0]
                };
                for ch in 0..3 {
                    samples[ch * npx + i] = c[ch];
                }
            }
        }
        let img = RasterImage::new(
            24,
            16,
            3,
            SampleRange::byte(),
            ColorSpaceTag::Rgb,
            samples,
        )
        .unwrap();
        std::fs::write(&input, crate::image::save_ppm(&img).unwrap()).unwrap();

        let out = dir.path().join("seg");
        assert_eq!(
            cli_main([
                "chromaseg",
                "segment",
                "--input",
                input.to_str().unwrap(),
                "--space",
                "hsv",
                "--min-area",
                "4",
                "--out",
                out.to_str().unwrap(),
            ]),
            0
        );
        for name in [
            "00-input.ppm",
            "01-converted.ppm",
            "02-clustered.ppm",
            "03-gradient.ppm",
            "04-watershed.ppm",
            "05-filtered.ppm",
            "metrics.json",
        ] {
            assert!(out.join(name).is_file(), "missing {name}");
        }
        let report = std::fs::read_to_string(out.join("metrics.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
        assert_eq!(parsed["config"]["space"], "hsv");
        assert_eq!(parsed["config"]["k"], 3);
        assert_eq!(parsed["metrics"]["mse"].as_array().unwrap().len(), 3);

        // emit-intermediates=false suppresses the stage files.
        let out2 = dir.path().join("seg2");
        assert_eq!(
            cli_main([
                "chromaseg",
                "segment",
                "--input",
                input.to_str().unwrap(),
                "--space",
                "hsv",
                "--min-area",
                "4",
                "--emit-intermediates",
                "false",
                "--out",
                out2.to_str().unwrap(),
            ]),
            0
        );
        assert!(out2.join("metrics.json").is_file());
        assert!(!out2.join("00-input.ppm").exists());
    }

    #[test]
    fn thread_cap_rejects_junk() {
        // Env-var handling is tested through the parse helper to avoid
        // mutating process state in parallel tests.
        assert!(parse_positive_usize("2").is_ok());
        assert!(parse_positive_usize("0").is_err());
        assert!(parse_positive_usize("x").is_err());
    }
}
