//! Trace, initial series, correlation, then optionally end detection and a
//! refit on the detected length.

use serde::{Deserialize, Serialize};
use vic_core::init::{fit_series_with_length, restrict_length, trace, Polyline, TraceOptions};
use vic_core::length_detect::{detect_end, phi_profile, EndDetection};
use vic_core::{
    build_mesh, fit, BasisFamily, CurvatureBasis, FitReport, Polarity, Raster, ShapeParams, Vec2, VirtualBeam,
};

use crate::config::{FitConfig, SCHEMA_VERSION};
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub polyline: Polyline,
    pub basis: CurvatureBasis,
    pub beam: VirtualBeam,
    /// Starting point produced from the polyline.
    pub init: ShapeParams,
    pub report: FitReport,
    pub end: Option<EndDetection>,
    /// Residual per unit length along the first fit, when end detection ran.
    pub profile: Option<Vec<(f64, f64)>>,
}

/// Series order used to fit the polyline when the configuration does not
/// say: at most `N`, and leaving twice as many segments as unknowns.
fn init_order(cfg: &FitConfig, used_segments: usize) -> usize {
    cfg.init_order
        .unwrap_or_else(|| cfg.order.min((used_segments / 2).saturating_sub(2)))
        .min(cfg.order)
}

pub fn run_fit(raster: &Raster, cfg: &FitConfig) -> Result<FitOutcome, CliError> {
    let basis = CurvatureBasis::new(cfg.basis, cfg.order)?;
    let opts = cfg.fit_options()?;
    let h = cfg.segment_length();
    let mut topts = TraceOptions::new(h, cfg.half_width);
    topts.max_segments = cfg.max_segments;
    topts.refine = cfg.refine;
    let polyline = trace(raster, Vec2::new(cfg.seed[0], cfg.seed[1]), cfg.seed_angle(), &topts)?;

    let length = match (cfg.length, cfg.detect_end) {
        (Some(l), _) => l,
        (None, true) => polyline.length() + cfg.end_margin.unwrap_or(h),
        (None, false) => polyline.length(),
    };
    let used = polyline.abscissae().iter().filter(|&&s| s <= length).count();
    let init_basis = basis.with_order(init_order(cfg, used))?;
    let init = fit_series_with_length(&polyline, &init_basis, length)?.with_order(cfg.order);
    let beam = build_mesh(length, cfg.half_width, cfg.refine)?;
    let report = fit(raster, &init, &basis, &beam, &opts)?;

    let mut outcome = FitOutcome {
        polyline,
        basis,
        beam,
        init,
        report,
        end: None,
        profile: None,
    };
    if !cfg.detect_end {
        return Ok(outcome);
    }
    let profile = phi_profile(raster, &outcome.report.params, &outcome.basis, &outcome.beam)?;
    let end = detect_end(&profile, cfg.half_width);
    if let EndDetection::End(s) = end {
        let p = restrict_length(&outcome.report.params, &outcome.basis, s)?;
        let beam = build_mesh(s, cfg.half_width, cfg.refine)?;
        outcome.report = fit(raster, &p, &outcome.basis, &beam, &opts)?;
        outcome.beam = beam;
    }
    outcome.end = Some(end);
    outcome.profile = Some(profile);
    Ok(outcome)
}

/// Contents of `report.json`; enough to rebuild the mean line and the beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub basis: BasisFamily,
    pub order: usize,
    /// px
    pub half_width: f64,
    pub refine: f64,
    pub polarity: Polarity,
    pub frozen: Vec<String>,
    pub params: ShapeParams,
    pub converged: bool,
    pub iterations: usize,
    pub phi_history: Vec<f64>,
    pub phi_final: f64,
    pub condition_estimate: f64,
    pub step_norms: Vec<f64>,
    pub trace_segments: usize,
    /// px
    pub traced_length: f64,
    pub end_detection: Option<EndDetection>,
}

impl RunReport {
    pub fn new(cfg: &FitConfig, outcome: &FitOutcome) -> Self {
        let r = &outcome.report;
        Self {
            schema_version: SCHEMA_VERSION,
            basis: cfg.basis,
            order: cfg.order,
            half_width: cfg.half_width,
            refine: cfg.refine,
            polarity: cfg.polarity,
            frozen: cfg.freeze.clone(),
            params: r.params.clone(),
            converged: r.converged,
            iterations: r.iterations,
            phi_history: r.phi_history.clone(),
            phi_final: r.final_phi().unwrap_or(f64::NAN),
            condition_estimate: r.condition_estimate,
            step_norms: r.step_norms.clone(),
            trace_segments: outcome.polyline.n_segments(),
            traced_length: outcome.polyline.length(),
            end_detection: outcome.end,
        }
    }

    pub fn curvature_basis(&self) -> Result<CurvatureBasis, CliError> {
        Ok(CurvatureBasis::new(self.basis, self.order)?)
    }

    pub fn beam(&self) -> Result<VirtualBeam, CliError> {
        Ok(build_mesh(self.params.length, self.half_width, self.refine)?)
    }
}
