//! Acceptance suite: one test per release criterion, each printing a single
//! `criterion N (<name>): PASS|FAIL` line before asserting. The oracles here
//! are re-derived from the definitions rather than shared with the library
//! internals, so a library regression cannot silently re-verify itself.

mod common;

use std::collections::VecDeque;
use std::process::Command;
use std::time::Instant;

use chromaseg::clustering::{cosine_distance, kmeans_fit, FeatureMatrix, KMeansConfig};
use chromaseg::colorspace::{
    hsv_pixel_to_rgb, lab_pixel_to_rgb, rgb_pixel_to_hsv, rgb_pixel_to_lab, ColorSpaceTag,
};
use chromaseg::edge::{sobel_gradient, SobelMode, SOBEL_X};
use chromaseg::image::{RasterImage, SampleRange, StageName};
use chromaseg::metrics::psnr_from_mse;
use chromaseg::pipeline::{
    compare_spaces, comparison_report_json, describe_input, verdict_from_metrics, PipelineConfig,
    Winner,
};
use chromaseg::postfilter::{median_filter, WindowSpec};
use chromaseg::watershed::{impose_minima, marker_watershed, Connectivity, MarkerMap};
use chromaseg::Raster;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict_line(n: usize, name: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("criterion {n} ({name}): PASS");
    } else {
        println!("criterion {n} ({name}): FAIL");
        for f in failures {
            println!("  - {f}");
        }
    }
    assert!(failures.is_empty(), "criterion {n} ({name}) failed");
}

/// Frozen reference MSE -> PSNR pairs under the legacy 256 peak convention,
/// three per color space (L*a*b* first, HSV second); tolerance 0.005 dB.
#[test]
fn criterion_1_reference_metrics() {
    let pairs: [(f64, f64); 6] = [
        (2.3740e6, -15.5901),
        (4.1124e5, -7.9762),
        (3.2296e4, 3.0734),
        (2.3709e6, -15.5844),
        (4.0902e5, -7.9527),
        (3.1285e4, 3.2115),
    ];
    let start = Instant::now();
    let mut failures = Vec::new();
    for (i, &(mse, expected)) in pairs.iter().enumerate() {
        match psnr_from_mse(mse, 256.0) {
            Ok(psnr) => {
                let err = (psnr - expected).abs();
                if err > 0.005 {
                    failures.push(format!(
                        "pair {i}: mse {mse:e} -> psnr {psnr:.6} dB, expected {expected} +/- 0.005"
                    ));
                }
            }
            Err(e) => failures.push(format!("pair {i}: psnr_from_mse failed: {e}")),
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 1.0 {
        failures.push(format!("metric reproduction took {elapsed:?}, budget 1s"));
    }
    verdict_line(1, "reference metric reproduction", &failures);
}

fn check_metrics_block(v: &serde_json::Value, space: &str, failures: &mut Vec<String>) {
    let Some(obj) = v.as_object() else {
        failures.push(format!("results.{space} is not an object"));
        return;
    };
    if obj.contains_key("error") {
        if !obj["error"].is_string() || obj.len() != 1 {
            failures.push(format!("results.{space} error form must be a lone string"));
        }
        return;
    }
    let keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
    if keys != ["mse", "psnr_db", "psnr_infinite"] {
        failures.push(format!("results.{space} keys {keys:?}"));
        return;
    }
    let mse = obj["mse"].as_array();
    if mse.map(|a| a.len() != 3 || a.iter().any(|x| !x.is_number())) != Some(false) {
        failures.push(format!("results.{space}.mse must be 3 numbers"));
    }
    let psnr = obj["psnr_db"].as_array();
    if psnr.map(|a| a.len() != 3 || a.iter().any(|x| !(x.is_number() || x.is_null())))
        != Some(false)
    {
        failures.push(format!("results.{space}.psnr_db must be 3 numbers-or-nulls"));
    }
    let inf = obj["psnr_infinite"].as_array();
    if inf.map(|a| a.len() != 3 || a.iter().any(|x| !x.is_boolean())) != Some(false) {
        failures.push(format!("results.{space}.psnr_infinite must be 3 booleans"));
    }
}

fn check_report_schema(report: &str, failures: &mut Vec<String>) -> Option<String> {
    let parsed: serde_json::Value = match serde_json::from_str(report) {
        Ok(v) => v,
        Err(e) => {
            failures.push(format!("report is not valid JSON: {e}"));
            return None;
        }
    };
    let Some(top) = parsed.as_object() else {
        failures.push("report top level is not an object".into());
        return None;
    };
    let top_keys: Vec<&str> = top.keys().map(|k| k.as_str()).collect();
    if top_keys != ["config", "input", "results", "verdict", "version"] {
        failures.push(format!("top-level keys {top_keys:?}"));
        return None;
    }
    let config_keys: Vec<&str> = top["config"]
        .as_object()
        .map(|o| o.keys().map(|k| k.as_str()).collect())
        .unwrap_or_default();
    let expected_config = [
        "connectivity",
        "distance",
        "emit_intermediates",
        "erosion_radius",
        "k",
        "max_i",
        "max_iters",
        "median_window",
        "min_area",
        "restarts",
        "seed",
        "sobel_mode",
        "tol",
    ];
    if config_keys != expected_config {
        failures.push(format!("config keys {config_keys:?}"));
    }
    let Some(input) = top["input"].as_object() else {
        failures.push("input is not an object".into());
        return None;
    };
    let input_keys: Vec<&str> = input.keys().map(|k| k.as_str()).collect();
    if input_keys != ["checksum", "height", "path", "width"] {
        failures.push(format!("input keys {input_keys:?}"));
    }
    let checksum = input["checksum"].as_str().unwrap_or_default();
    if !(checksum.len() == 71
        && checksum.starts_with("sha256:")
        && checksum[7..].bytes().all(|b| b.is_ascii_hexdigit()))
    {
        failures.push(format!("checksum {checksum:?} is not sha256:<64 hex>"));
    }
    if !input["width"].is_u64() || !input["height"].is_u64() {
        failures.push("input width/height must be unsigned integers".into());
    }
    let Some(results) = top["results"].as_object() else {
        failures.push("results is not an object".into());
        return None;
    };
    let result_keys: Vec<&str> = results.keys().map(|k| k.as_str()).collect();
    if result_keys != ["hsv", "lab"] {
        failures.push(format!("results keys {result_keys:?}"));
    } else {
        check_metrics_block(&results["hsv"], "hsv", failures);
        check_metrics_block(&results["lab"], "lab", failures);
    }
    let Some(verdict) = top["verdict"].as_object() else {
        failures.push("verdict is not an object".into());
        return None;
    };
    let verdict_keys: Vec<&str> = verdict.keys().map(|k| k.as_str()).collect();
    if verdict_keys != ["overall", "per_channel"] {
        failures.push(format!("verdict keys {verdict_keys:?}"));
        return None;
    }
    let allowed = ["lab", "hsv", "tie", "n/a"];
    let overall = verdict["overall"].as_str().unwrap_or_default().to_string();
    if !allowed.contains(&overall.as_str()) {
        failures.push(format!("verdict.overall {overall:?}"));
    }
    match verdict["per_channel"].as_array() {
        Some(pc) if pc.len() == 3 => {
            for (i, w) in pc.iter().enumerate() {
                let s = w.as_str().unwrap_or_default();
                if !allowed.contains(&s) {
                    failures.push(format!("verdict.per_channel[{i}] {s:?}"));
                }
            }
        }
        _ => failures.push("verdict.per_channel must be 3 strings".into()),
    }
    if !top["version"].is_string() {
        failures.push("version must be a string".into());
    }
    Some(overall)
}

/// Comparison runs on the bundled synthetic peppers-class image across five
/// seeds: every run must yield a schema-valid report, and the HSV pipeline
/// must win the overall PSNR verdict in the majority of runs.
#[test]
fn criterion_2_space_comparison() {
    let img = common::peppers(160, 160);
    let input = describe_input("peppers.ppm", &img).expect("describe fixture");
    let mut failures = Vec::new();
    let mut hsv_wins = 0usize;
    for seed in 42u64..=46 {
        let mut cfg = PipelineConfig::default();
        cfg.kmeans.seed = seed;
        let outcome = compare_spaces(&img, &cfg, 1);
        let report = comparison_report_json(&input, &cfg, &outcome);
        if report.is_empty() {
            failures.push(format!("seed {seed}: no report produced"));
            continue;
        }
        match check_report_schema(&report, &mut failures) {
            Some(overall) if overall == "hsv" => hsv_wins += 1,
            Some(_) => {}
            None => failures.push(format!("seed {seed}: report rejected")),
        }
        let lab = outcome.lab.as_ref().ok().map(|o| &o.metrics);
        let hsv = outcome.hsv.as_ref().ok().map(|o| &o.metrics);
        let recomputed = verdict_from_metrics(lab, hsv);
        if (recomputed.overall == Winner::Hsv) != report.contains("\"overall\": \"hsv\"") {
            failures.push(format!("seed {seed}: report verdict disagrees with metrics"));
        }
    }
    if hsv_wins < 3 {
        failures.push(format!("hsv won {hsv_wins}/5 seeds, expected a majority"));
    }
    verdict_line(2, "hsv wins comparison majority", &failures);
}

/// Byte-identical outputs across repeat runs and across CHROMASEG_THREADS
/// settings, checked through the installed binary.
#[test]
fn criterion_3_determinism() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("peppers.ppm");
    common::write_ppm(&common::peppers(96, 96), &input);
    let bin = env!("CARGO_BIN_EXE_chromaseg");
    let mut failures = Vec::new();
    let runs = [("one", "1"), ("four", "4"), ("repeat", "1")];
    for (name, threads) in runs {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .arg("compare")
            .arg("--input")
            .arg(&input)
            .arg("--out")
            .arg(&out)
            .env("CHROMASEG_THREADS", threads)
            .status()
            .expect("spawn compare");
        if !status.success() {
            failures.push(format!("run {name}: exit {status}"));
        }
    }
    let mut names = vec!["report.json".to_string()];
    for space in ["lab", "hsv"] {
        for stage in StageName::ALL {
            names.push(format!("{space}/{}", stage.file_name()));
        }
    }
    for name in &names {
        let base = std::fs::read(dir.path().join("one").join(name));
        for other in ["four", "repeat"] {
            let candidate = std::fs::read(dir.path().join(other).join(name));
            match (&base, &candidate) {
                (Ok(a), Ok(b)) if a == b => {}
                (Ok(_), Ok(_)) => failures.push(format!("{name}: differs between one/{other}")),
                _ => failures.push(format!("{name}: missing in one/{other}")),
            }
        }
    }
    verdict_line(3, "byte-identical determinism", &failures);
}

fn raster_1ch(width: usize, height: usize, values: Vec<f64>) -> Raster {
    let (mut lo, mut hi) = (values[0], values[0]);
    for &v in &values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    RasterImage::new(
        width,
        height,
        1,
        SampleRange::new(lo, hi).unwrap(),
        ColorSpaceTag::Rgb,
        values,
    )
    .unwrap()
}

fn neighbors(width: usize, height: usize, p: usize, conn: Connectivity) -> Vec<usize> {
    let x = (p % width) as isize;
    let y = (p / width) as isize;
    let mut out = Vec::new();
    for &(dx, dy) in conn.offsets() {
        let (nx, ny) = (x + dx, y + dy);
        if nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height {
            out.push(ny as usize * width + nx as usize);
        }
    }
    out
}

/// Priority flood re-derived from the definition with a linear-scan frontier
/// instead of a heap: lowest value first, insertion order among ties.
fn reference_flood(
    values: &[f64],
    width: usize,
    height: usize,
    marks: &[u32],
    conn: Connectivity,
) -> Vec<u32> {
    let mut labels = marks.to_vec();
    let mut decided: Vec<bool> = labels.iter().map(|&m| m != 0).collect();
    let mut frontier: Vec<(f64, u64, usize)> = Vec::new();
    let mut seq = 0u64;
    for p in 0..labels.len() {
        if labels[p] != 0 && neighbors(width, height, p, conn).iter().any(|&q| labels[q] == 0) {
            frontier.push((values[p], seq, p));
            seq += 1;
        }
    }
    while !frontier.is_empty() {
        let mut best = 0;
        for i in 1..frontier.len() {
            let (v, s, _) = frontier[i];
            let (bv, bs, _) = frontier[best];
            if v < bv || (v == bv && s < bs) {
                best = i;
            }
        }
        let (_, _, p) = frontier.swap_remove(best);
        let region = labels[p];
        for q in neighbors(width, height, p, conn) {
            if decided[q] {
                continue;
            }
            let mut first = 0u32;
            let mut multiple = false;
            for r in neighbors(width, height, q, conn) {
                let l = labels[r];
                if l != 0 {
                    if first == 0 {
                        first = l;
                    } else if l != first {
                        multiple = true;
                    }
                }
            }
            decided[q] = true;
            if !multiple {
                labels[q] = region;
                frontier.push((values[q], seq, q));
                seq += 1;
            }
        }
    }
    labels
}

/// Connected components of a boolean support set.
fn support_components(support: &[bool], width: usize, height: usize, conn: Connectivity) -> usize {
    let mut seen = vec![false; support.len()];
    let mut count = 0;
    for start in 0..support.len() {
        if !support[start] || seen[start] {
            continue;
        }
        count += 1;
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            for q in neighbors(width, height, p, conn) {
                if support[q] && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    count
}

/// Counts regional minima: constant-value plateaus with no lower neighbor.
fn regional_minima_count(values: &[f64], width: usize, height: usize, conn: Connectivity) -> usize {
    let mut seen = vec![false; values.len()];
    let mut count = 0;
    for start in 0..values.len() {
        if seen[start] {
            continue;
        }
        let level = values[start];
        let mut plateau = vec![start];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            for q in neighbors(width, height, p, conn) {
                if !seen[q] && values[q] == level {
                    seen[q] = true;
                    plateau.push(q);
                    queue.push_back(q);
                }
            }
        }
        let is_minimum = plateau.iter().all(|&p| {
            neighbors(width, height, p, conn)
                .iter()
                .all(|&q| values[q] >= level)
        });
        if is_minimum {
            count += 1;
        }
    }
    count
}

fn check_color_round_trips(failures: &mut Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut unit = || (rng.next_u32() as f64) / (u32::MAX as f64);
    let (mut hsv_worst, mut lab_worst) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let rgb = [unit(), unit(), unit()];
        let [h, s, v] = rgb_pixel_to_hsv(rgb[0], rgb[1], rgb[2]);
        let back = hsv_pixel_to_rgb(h, s, v);
        for c in 0..3 {
            hsv_worst = hsv_worst.max((back[c] - rgb[c]).abs());
        }
        let [l, a, b] = rgb_pixel_to_lab(rgb[0], rgb[1], rgb[2]);
        let back = lab_pixel_to_rgb(l, a, b);
        for c in 0..3 {
            lab_worst = lab_worst.max((back[c] - rgb[c]).abs());
        }
    }
    if hsv_worst > 1e-6 {
        failures.push(format!("hsv round trip error {hsv_worst:e} > 1e-6"));
    }
    if lab_worst > 1e-4 {
        failures.push(format!("lab round trip error {lab_worst:e} > 1e-4"));
    }
}

fn random_features(rng: &mut ChaCha8Rng, rows: usize) -> FeatureMatrix<f64> {
    let data: Vec<f64> = (0..rows * 3)
        .map(|_| 0.05 + 0.9 * (rng.next_u32() as f64) / (u32::MAX as f64))
        .collect();
    FeatureMatrix::new(data, rows, 3, rows, 1, ColorSpaceTag::Hsv, [true; 3]).unwrap()
}

fn check_kmeans_monotonicity(failures: &mut Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for trial in 0..100 {
        let rows = 20 + (rng.next_u32() as usize) % 41;
        let features = random_features(&mut rng, rows);
        let cfg = KMeansConfig::<f64> {
            seed: 1000 + trial,
            ..KMeansConfig::default()
        };
        let result = kmeans_fit(&features, &cfg).expect("fit");
        let h = &result.objective_history;
        for i in 1..h.len() {
            if h[i] > h[i - 1] + 1e-9 {
                failures.push(format!(
                    "trial {trial}: objective rose {} -> {} at iteration {i}",
                    h[i - 1],
                    h[i]
                ));
                return;
            }
        }
    }
}

/// Exhaustive best objective over all assignments with nonempty clusters,
/// using the spherical (normalized mean direction) centroid definition.
fn exhaustive_optimum(features: &FeatureMatrix<f64>, k: usize) -> f64 {
    let m = features.rows();
    let mut assign = vec![0usize; m];
    let mut best = f64::INFINITY;
    loop {
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        if counts.iter().all(|&c| c > 0) {
            let mut objective = 0.0;
            for j in 0..k {
                let mut dir = [0.0f64; 3];
                for i in 0..m {
                    if assign[i] == j {
                        let row = features.row(i);
                        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                        for c in 0..3 {
                            dir[c] += row[c] / norm;
                        }
                    }
                }
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                for d in dir.iter_mut() {
                    *d /= norm;
                }
                for i in 0..m {
                    if assign[i] == j {
                        objective += cosine_distance(features.row(i), &dir);
                    }
                }
            }
            best = best.min(objective);
        }
        let mut pos = 0;
        loop {
            if pos == m {
                return best;
            }
            assign[pos] += 1;
            if assign[pos] < k {
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
    }
}

fn check_kmeans_against_exhaustive(failures: &mut Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut attained = 0usize;
    let mut trials = 0usize;
    for trial in 0..12u64 {
        let k = if trial % 2 == 0 { 3 } else { 2 };
        let rows = if k == 3 {
            6 + (rng.next_u32() as usize) % 4
        } else {
            8 + (rng.next_u32() as usize) % 5
        };
        let features = random_features(&mut rng, rows);
        let optimum = exhaustive_optimum(&features, k);
        let cfg = KMeansConfig::<f64> {
            k,
            restarts: 12,
            seed: 500 + trial,
            ..KMeansConfig::default()
        };
        let result = kmeans_fit(&features, &cfg).expect("fit");
        let objective = result.objective();
        if objective < optimum - 1e-9 {
            failures.push(format!(
                "trial {trial}: objective {objective} beat the exhaustive optimum {optimum}"
            ));
        }
        trials += 1;
        if (objective - optimum).abs() <= 1e-7 {
            attained += 1;
        }
    }
    if attained * 4 < trials * 3 {
        failures.push(format!(
            "optimum attained on {attained}/{trials} instances, expected >= 75%"
        ));
    }
}

fn check_cosine_axioms(failures: &mut Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut unit = || 0.1 + 0.9 * (rng.next_u32() as f64) / (u32::MAX as f64);
    for _ in 0..50 {
        let a = [unit(), unit(), unit()];
        let b = [unit(), unit(), unit()];
        let d_ab = cosine_distance(&a, &b);
        let d_ba = cosine_distance(&b, &a);
        if (d_ab - d_ba).abs() > 1e-12 {
            failures.push("cosine distance is asymmetric".into());
        }
        if !(-1e-12..=2.0 + 1e-12).contains(&d_ab) {
            failures.push(format!("cosine distance {d_ab} outside [0, 2]"));
        }
        if cosine_distance(&a, &a) > 1e-12 {
            failures.push("cosine distance d(x, x) != 0".into());
        }
    }
    let cases: [(&[f64], &[f64], f64); 4] = [
        (&[1.0, 0.0], &[0.0, 1.0], 1.0),
        (&[1.0, 0.0], &[-1.0, 0.0], 2.0),
        (&[1.0, 0.0], &[1.0, 1.0], 1.0 - 1.0 / 2.0f64.sqrt()),
        (&[2.0, 0.0], &[4.0, 0.0], 0.0),
    ];
    for (a, b, expected) in cases {
        let d = cosine_distance(a, b);
        if (d - expected).abs() > 1e-12 {
            failures.push(format!("cosine_distance({a:?}, {b:?}) = {d}, expected {expected}"));
        }
    }
}

fn check_sobel(failures: &mut Vec<String>) {
    // Constant input: exactly zero everywhere, no rounding residue allowed.
    let constant = raster_1ch(11, 7, vec![0.66; 77]);
    for mode in [SobelMode::Exact, SobelMode::Approximate] {
        let g = sobel_gradient(&constant, mode).expect("sobel");
        if g.values().iter().any(|&v| v != 0.0) {
            failures.push(format!("{} gradient of a constant is nonzero", mode.name()));
        }
    }
    // Plane with slope (3s/8, 4s/8): kernel weights sum to 8 per axis, so the
    // interior responses are exactly 3s and 4s -> magnitudes 5s and 7s.
    let s = 0.125;
    let (w, h) = (16usize, 12usize);
    let plane: Vec<f64> = (0..w * h)
        .map(|p| ((p % w) as f64 * 3.0 + (p / w) as f64 * 4.0) * s / 8.0)
        .collect();
    let img = raster_1ch(w, h, plane);
    for (mode, expected) in [(SobelMode::Exact, 5.0 * s), (SobelMode::Approximate, 7.0 * s)] {
        let g = sobel_gradient(&img, mode).expect("sobel");
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let v = g.values()[y * w + x];
                if (v - expected).abs() > 1e-12 {
                    failures.push(format!(
                        "{} ramp response {v} at ({x}, {y}), expected {expected}",
                        mode.name()
                    ));
                    return;
                }
            }
        }
    }
    // Random field against a naive clamped 3x3 correlation.
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let values: Vec<f64> = (0..256).map(|_| (rng.next_u32() % 1000) as f64 / 999.0).collect();
    let img = raster_1ch(16, 16, values.clone());
    let sample = |x: isize, y: isize| {
        let cx = x.clamp(0, 15) as usize;
        let cy = y.clamp(0, 15) as usize;
        values[cy * 16 + cx]
    };
    for mode in [SobelMode::Exact, SobelMode::Approximate] {
        let g = sobel_gradient(&img, mode).expect("sobel");
        for y in 0..16isize {
            for x in 0..16isize {
                let mut gx = 0.0;
                let mut gy = 0.0;
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let weight = SOBEL_X[(dy + 1) as usize][(dx + 1) as usize];
                        gx += weight * sample(x + dx, y + dy);
                        // The vertical kernel is the transpose.
                        gy += SOBEL_X[(dx + 1) as usize][(dy + 1) as usize] * sample(x + dx, y + dy);
                    }
                }
                let expected = match mode {
                    SobelMode::Exact => (gx * gx + gy * gy).sqrt(),
                    SobelMode::Approximate => gx.abs() + gy.abs(),
                };
                let got = g.values()[(y * 16 + x) as usize];
                if (got - expected).abs() > 1e-12 {
                    failures.push(format!(
                        "{} sobel {got} vs naive {expected} at ({x}, {y})",
                        mode.name()
                    ));
                    return;
                }
            }
        }
    }
}

fn check_watershed_flood(failures: &mut Vec<String>) {
    // Canonical two-valley profile.
    let profile = raster_1ch(5, 1, vec![1.0, 5.0, 1.0, 2.0, 1.0]);
    let mut marks = vec![0u32; 5];
    marks[0] = 1;
    marks[2] = 2;
    marks[4] = 3;
    let markers = MarkerMap::new(5, 1, marks.clone()).unwrap();
    let labels = marker_watershed(&profile, &markers, Connectivity::Four).expect("flood");
    if labels.labels() != [1, 0, 2, 0, 3] {
        failures.push(format!("profile flood produced {:?}", labels.labels()));
    }
    // Random small fields with coarse plateaus, both connectivities.
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for trial in 0..100 {
        let conn = if trial % 2 == 0 {
            Connectivity::Four
        } else {
            Connectivity::Eight
        };
        let values: Vec<f64> = (0..64).map(|_| (rng.next_u32() % 6) as f64).collect();
        let marker_count = 2 + (rng.next_u32() % 2) as usize;
        let mut positions = Vec::new();
        while positions.len() < marker_count {
            let p = (rng.next_u32() % 64) as usize;
            if !positions.contains(&p) {
                positions.push(p);
            }
        }
        let mut marks = vec![0u32; 64];
        for (id, &p) in positions.iter().enumerate() {
            marks[p] = id as u32 + 1;
        }
        let img = raster_1ch(8, 8, values.clone());
        let markers = MarkerMap::new(8, 8, marks.clone()).unwrap();
        let got = marker_watershed(&img, &markers, conn).expect("flood");
        let expected = reference_flood(&values, 8, 8, &marks, conn);
        if got.labels() != expected.as_slice() {
            failures.push(format!("trial {trial}: flood disagrees with reference"));
            return;
        }
    }
}

fn check_median(failures: &mut Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let npx = 256;
    let samples: Vec<f64> = (0..3 * npx).map(|_| (rng.next_u32() % 256) as f64).collect();
    let img = RasterImage::new(
        16,
        16,
        3,
        SampleRange::byte(),
        ColorSpaceTag::Rgb,
        samples.clone(),
    )
    .unwrap();
    let filtered = median_filter(&img, WindowSpec::new(3).unwrap()).expect("median");
    for c in 0..3 {
        for y in 0..16isize {
            for x in 0..16isize {
                let mut window = Vec::with_capacity(9);
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let cx = (x + dx).clamp(0, 15) as usize;
                        let cy = (y + dy).clamp(0, 15) as usize;
                        window.push(samples[c * npx + cy * 16 + cx]);
                    }
                }
                window.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let expected = window[4];
                let got = filtered.plane(c)[(y * 16 + x) as usize];
                if got != expected {
                    failures.push(format!(
                        "median at ({x}, {y}) channel {c}: {got} vs sorted oracle {expected}"
                    ));
                    return;
                }
            }
        }
    }
    // A lone impulse in a constant field vanishes entirely.
    let mut flat = vec![10.0f64; npx];
    flat[8 * 16 + 8] = 200.0;
    let impulse = raster_1ch(16, 16, flat);
    let cleaned = median_filter(&impulse, WindowSpec::new(3).unwrap()).expect("median");
    if cleaned.plane(0).iter().any(|&v| v != 10.0) {
        failures.push("median failed to remove a lone impulse".into());
    }
}

fn check_minima_imposition(failures: &mut Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for trial in 0..20 {
        let conn = if trial % 2 == 0 {
            Connectivity::Four
        } else {
            Connectivity::Eight
        };
        let values: Vec<f64> = (0..144).map(|_| (rng.next_u32() % 200) as f64).collect();
        let marker_count = 2 + (rng.next_u32() % 3) as usize;
        let mut positions = Vec::new();
        while positions.len() < marker_count {
            let p = (rng.next_u32() % 144) as usize;
            if !positions.contains(&p) {
                positions.push(p);
            }
        }
        let mut marks = vec![0u32; 144];
        for (id, &p) in positions.iter().enumerate() {
            marks[p] = id as u32 + 1;
        }
        let img = raster_1ch(12, 12, values);
        let markers = MarkerMap::new(12, 12, marks.clone()).unwrap();
        let imposed = impose_minima(&img, &markers, conn).expect("impose");
        let support: Vec<bool> = marks.iter().map(|&m| m != 0).collect();
        let expected = support_components(&support, 12, 12, conn);
        let got = regional_minima_count(imposed.plane(0), 12, 12, conn);
        if got != expected {
            failures.push(format!(
                "trial {trial}: {got} regional minima for {expected} marker components"
            ));
            return;
        }
    }
}

/// Property-style invariants re-checked against definition-level oracles.
#[test]
fn criterion_4_property_suites() {
    let mut failures = Vec::new();
    check_color_round_trips(&mut failures);
    check_kmeans_monotonicity(&mut failures);
    check_kmeans_against_exhaustive(&mut failures);
    check_cosine_axioms(&mut failures);
    check_sobel(&mut failures);
    check_watershed_flood(&mut failures);
    check_median(&mut failures);
    check_minima_imposition(&mut failures);
    verdict_line(4, "property suites", &failures);
}

/// Full two-space comparison of a 512x512 image on one thread inside 10s.
#[test]
fn criterion_5_performance() {
    let img = common::peppers(512, 512);
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    let outcome = compare_spaces(&img, &cfg, 1);
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    if let Err(e) = &outcome.lab {
        failures.push(format!("lab pipeline failed: {e}"));
    }
    if let Err(e) = &outcome.hsv {
        failures.push(format!("hsv pipeline failed: {e}"));
    }
    if elapsed.as_secs_f64() >= 10.0 {
        failures.push(format!("512x512 comparison took {elapsed:?}, budget 10s"));
    }
    println!("  512x512 single-threaded comparison: {elapsed:?}");
    verdict_line(5, "512x512 comparison under 10s", &failures);
}
