//! The subcommands, as library functions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vic_core::beam_oracle::{rescale_to_pixels, solve_elastica, CantileverSpec};
use vic_core::export::{
    save_overlay_png, write_elastica_csv, write_mean_line_csv, write_polyline_csv, write_profile_csv,
};
use vic_core::geometry::mean_line;
use vic_core::image::unwrap;
use vic_core::synth::Scene;
use vic_core::{fit, Raster, VicError};

use crate::config::{FitConfig, Overrides};
use crate::error::{kind, CliError};
use crate::pipeline::{run_fit, RunReport};

/// Mean-line samples written per pixel of arc.
const CSV_SAMPLES_PER_PIXEL: f64 = 2.0;

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| {
        CliError::Core(VicError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| {
        CliError::Core(VicError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| {
        CliError::Core(VicError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

/// Reads the optional configuration file and applies the flag overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<FitConfig, CliError> {
    let base = match path {
        Some(p) => parse_json::<Value>(&read_text(p)?, "configuration")?,
        None => Value::Null,
    };
    FitConfig::from_value(base, overrides)
}

/// Fits the image and writes the artifacts into `out_dir`.
pub fn cmd_fit(image: &Path, cfg: &FitConfig, out_dir: &Path) -> Result<RunReport, CliError> {
    // configuration problems are reported before any image work
    vic_core::CurvatureBasis::new(cfg.basis, cfg.order)?;
    let raster = Raster::load(image, cfg.polarity)?;
    let outcome = run_fit(&raster, cfg)?;
    create_dir(out_dir)?;

    let report = RunReport::new(cfg, &outcome);
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(&out_dir.join("report.json"), &json)?;

    let p = &outcome.report.params;
    let n = ((p.length * CSV_SAMPLES_PER_PIXEL).ceil() as usize + 1).max(3);
    let frames = mean_line(p, &outcome.basis, n)?;
    write_mean_line_csv(out_dir.join("mean_line.csv"), &frames)?;
    write_polyline_csv(out_dir.join("polyline.csv"), &outcome.polyline)?;
    if let Some(profile) = &outcome.profile {
        write_profile_csv(out_dir.join("profile.csv"), profile)?;
    }
    let points: Vec<_> = frames.iter().map(|f| f.x).collect();
    save_overlay_png(out_dir.join("overlay.png"), &raster, &points)?;
    Ok(report)
}

pub fn cmd_synth(scene: &Path, out: &Path, truth: Option<&Path>, eight_bit: bool) -> Result<(), CliError> {
    let scene: Scene = parse_json(&read_text(scene)?, "scene")?;
    if scene.schema_version != crate::config::SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported scene schema_version {}",
            scene.schema_version
        )));
    }
    let (raster, frames) = scene.render()?;
    if eight_bit {
        raster.save_png(out)?;
    } else {
        raster.save_png16(out)?;
    }
    if let Some(t) = truth {
        write_mean_line_csv(t, &frames)?;
    }
    Ok(())
}

pub fn cmd_oracle(spec: &Path, out: &Path, px_per_meter: Option<f64>, origin: [f64; 2]) -> Result<(), CliError> {
    let spec: CantileverSpec = parse_json(&read_text(spec)?, "oracle spec")?;
    let mut shape = solve_elastica(&spec)?;
    if let Some(ppm) = px_per_meter {
        shape = rescale_to_pixels(&shape, ppm, vic_core::Vec2::new(origin[0], origin[1]))?;
    }
    write_elastica_csv(out, &shape)?;
    Ok(())
}

/// Writes the strip and returns its mirror asymmetry.
pub fn cmd_unwrap(image: &Path, report: &Path, out: &Path, max_asymmetry: Option<f64>) -> Result<f64, CliError> {
    let report: RunReport = parse_json(&read_text(report)?, "report")?;
    let raster = Raster::load(image, report.polarity)?;
    let basis = report.curvature_basis()?;
    let beam = report.beam()?;
    let u = unwrap(&raster, &report.params, &basis, &beam)?;
    u.strip.save_png(out)?;
    if let Some(bound) = max_asymmetry {
        if u.asymmetry > bound {
            return Err(CliError::AsymmetryBound {
                value: u.asymmetry,
                bound,
            });
        }
    }
    Ok(u.asymmetry)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub order: usize,
    pub phi_final: f64,
    pub converged: bool,
    pub iterations: usize,
    pub condition_estimate: f64,
    /// `ok`, or the error that ended the sweep.
    pub status: String,
}

/// Fits at `n_min` through the full pipeline, then at each higher order
/// starting from the previous result padded with a zero amplitude. The sweep
/// ends at `n_max` or at the first failing fit, which gets its own row.
pub fn cmd_sweep_order(
    image: &Path,
    cfg: &FitConfig,
    n_min: usize,
    n_max: usize,
    out: &Path,
) -> Result<Vec<SweepRow>, CliError> {
    if n_min > n_max {
        return Err(CliError::Config(format!("empty order range {n_min}..={n_max}")));
    }
    let first_cfg = FitConfig {
        order: n_min,
        ..cfg.clone()
    };
    vic_core::CurvatureBasis::new(cfg.basis, n_min)?;
    let raster = Raster::load(image, cfg.polarity)?;
    let outcome = run_fit(&raster, &first_cfg)?;
    let opts = cfg.fit_options()?;

    let row = |order: usize, r: &vic_core::FitReport, status: &str| SweepRow {
        order,
        phi_final: r.final_phi().unwrap_or(f64::NAN),
        converged: r.converged,
        iterations: r.iterations,
        condition_estimate: r.condition_estimate,
        status: status.to_string(),
    };
    let mut rows = vec![row(n_min, &outcome.report, "ok")];
    let mut params = outcome.report.params;
    for order in n_min + 1..=n_max {
        let basis = vic_core::CurvatureBasis::new(cfg.basis, order)?;
        let p0 = params.with_order(order);
        match fit(&raster, &p0, &basis, &outcome.beam, &opts) {
            Ok(r) => {
                rows.push(row(order, &r, "ok"));
                params = r.params;
            }
            Err(f) => {
                rows.push(row(order, &f.report, kind(&f.error)));
                break;
            }
        }
    }

    let mut w = csv::Writer::from_path(out).map_err(|e| csv_error(out, e))?;
    for r in &rows {
        w.serialize(r).map_err(|e| csv_error(out, e))?;
    }
    w.flush().map_err(|source| {
        CliError::Core(VicError::Io {
            path: out.to_path_buf(),
            source,
        })
    })?;
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Core(VicError::Io {
            path: path.to_path_buf(),
            source,
        }),
        other => CliError::Config(format!("csv: {other:?}")),
    }
}
