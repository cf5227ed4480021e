//! Correlation functional and its Gauss-Newton minimization.
//!
//! `Phi(V) = sum over the (s, r) mesh of (f(X) - l(r))^2 (1 - gamma r) dr ds`
//! where `X = x(s) + r nu(s)` is the surface point of the virtual beam.
//!
//! The normal matrix uses the virtual-image kernel
//! `c_k = -l'(r) nu . dx/dV_k` (the derivative of the virtual image at a
//! fixed physical point), which depends on the geometry only. The right-hand
//! side defaults to the exact `-1/2 dPhi/dV` of the discrete functional; the
//! virtual-image form `sum c_k (f - g) dS` is available through
//! [`GradientForm::VirtualImage`]. The two agree when the beam border lies
//! on a uniform background.
//!
//! Sliding the beam along itself (`dtheta = a gamma(s)`, `dx0 = a tau(0)`)
//! is representable in either basis and changes the virtual image only at
//! the two beam ends, which the normal matrix does not see. It is therefore
//! a null direction of `M` for every curve: freeze the start coordinate
//! along the fiber (`x0_1` for a fiber leaving `x0` roughly horizontally),
//! otherwise the step fails as ill-conditioned.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::CurvatureBasis;
use crate::error::{Result, VicError};
use crate::exec::Exec;
use crate::geometry::{BasisTable, FrameSample, MeanLine, ParamId, Sensitivities, ShapeParams, Vec2, A0, THETA0};
use crate::image::{Boundary, Raster};
use crate::virtual_beam::{luminance_slope_unchecked, luminance_unchecked, VirtualBeam, DEFAULT_REFINE};

/// Default bound on the condition estimate of the normal matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Right-hand side used in the normal equations.
///
/// The exact form includes what happens at the two beam ends, which has no
/// counterpart in the normal matrix; at high orders it pushes the step along
/// nearly singular directions. Iterations therefore default to the
/// virtual-image form.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientForm {
    /// `-1/2` times the exact gradient of the discrete functional.
    Exact,
    /// `sum c_k (f - g) dS`, dropping the contour terms of the beam border.
    #[default]
    VirtualImage,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Stop once `(Phi_prev - Phi) / Phi_initial` falls below this.
    pub rel_tol: f64,
    pub frozen: Vec<ParamId>,
    pub backtracking: bool,
    pub max_halvings: usize,
    /// Mesh density used when the caller builds the beam from these options.
    pub refine: f64,
    pub max_condition: f64,
    pub boundary: Boundary,
    pub gradient: GradientForm,
    pub exec: Exec,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            rel_tol: 1e-6,
            frozen: Vec::new(),
            backtracking: true,
            max_halvings: 20,
            refine: DEFAULT_REFINE,
            max_condition: MAX_CONDITION,
            boundary: Boundary::Abort,
            gradient: GradientForm::VirtualImage,
            exec: Exec::default(),
        }
    }
}

/// Per-station transverse sums.
#[derive(Debug, Clone, Copy, Default)]
struct StationSums {
    /// `sum (f - g)^2 (1 - gamma r) dr`
    phi: f64,
    /// `sum l'(r)^2 (1 - gamma r) dr`
    kernel: f64,
    /// `sum -l'(r) (f - g) (1 - gamma r) dr`
    rhs_virtual: f64,
    /// `sum (f - g) grad f (1 - gamma r) dr`
    p: Vec2,
    /// `sum (f - g) r (tau . grad f) (1 - gamma r) dr`
    q: f64,
    /// `sum (f - g)^2 r dr`
    t: f64,
}

/// Assembled normal equations `M dV = L` restricted to the free parameters.
#[derive(Debug, Clone)]
pub struct NormalSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Parameter index of each row.
    pub free: Vec<usize>,
    /// Characteristic unit of each free parameter (`L` for `x0`, 1 for
    /// `theta0`, `1/L` for amplitudes); conditioning is measured on the
    /// system expressed in these dimensionless units.
    pub scale: DVector<f64>,
    pub phi: f64,
}

/// Solution of one normal system.
#[derive(Debug, Clone)]
pub struct Step {
    /// Increment of the free parameters, natural units.
    pub delta: DVector<f64>,
    pub condition: f64,
    /// Euclidean norm of the increment in dimensionless units.
    pub scaled_norm: f64,
}

/// Evaluates the functional and its derivatives for one image, basis and
/// mesh.
pub struct Correlator<'a> {
    raster: &'a Raster,
    basis: &'a CurvatureBasis,
    beam: VirtualBeam,
    table: BasisTable,
    r_nodes: Vec<f64>,
    boundary: Boundary,
    exec: Exec,
}

impl<'a> Correlator<'a> {
    pub fn new(raster: &'a Raster, basis: &'a CurvatureBasis, beam: &VirtualBeam) -> Result<Self> {
        Ok(Self {
            raster,
            basis,
            beam: *beam,
            table: BasisTable::new(basis, beam.n_s)?,
            r_nodes: beam.r_nodes(),
            boundary: Boundary::Abort,
            exec: Exec::default(),
        })
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn beam(&self) -> &VirtualBeam {
        &self.beam
    }

    pub fn basis(&self) -> &CurvatureBasis {
        self.basis
    }

    /// Mean line of `p` on the longitudinal mesh, after admissibility checks.
    pub fn mean_line(&self, p: &ShapeParams) -> Result<MeanLine> {
        p.check(self.basis)?;
        if (p.length - self.beam.length).abs() > 1e-9 * self.beam.length {
            return Err(VicError::InvalidParameter(format!(
                "shape length {} does not match the mesh length {}",
                p.length, self.beam.length
            )));
        }
        let line = MeanLine::compute(p, &self.table)?;
        line.check_admissible(self.beam.half_width)?;
        Ok(line)
    }

    fn station(&self, frame: &FrameSample, with_gradient: bool) -> Result<StationSums> {
        let half = self.beam.half_width;
        let dr = self.beam.dr();
        let n_r = self.r_nodes.len();
        let mut acc = StationSums::default();
        for (j, &r) in self.r_nodes.iter().enumerate() {
            let wr = VirtualBeam::end_weight(j, n_r) * dr;
            let metric = 1.0 - frame.gamma * r;
            debug_assert!(metric > 0.0, "surface element must stay positive");
            let x = frame.x + frame.nu * r;
            let g = luminance_unchecked(r, half);
            if with_gradient {
                let (f, grad) = self.raster.sample_with_gradient(x, self.boundary)?;
                let res = f - g;
                let w = wr * metric;
                let lp = luminance_slope_unchecked(r, half);
                acc.phi += res * res * w;
                acc.kernel += lp * lp * w;
                acc.rhs_virtual -= lp * res * w;
                acc.p += grad * (res * w);
                acc.q += res * r * frame.tau.dot(&grad) * w;
                acc.t += res * res * r * wr;
            } else {
                let f = self.raster.sample_with(x, self.boundary)?;
                let res = f - g;
                acc.phi += res * res * wr * metric;
            }
        }
        Ok(acc)
    }

    fn stations(&self, line: &MeanLine, with_gradient: bool) -> Result<Vec<StationSums>> {
        self.exec
            .try_map(line.len(), |i| self.station(&line.frames[i], with_gradient))
    }

    /// Quadrature weight of longitudinal station `i`.
    #[inline]
    fn ds_weight(&self, i: usize) -> f64 {
        VirtualBeam::end_weight(i, self.beam.n_s) * self.beam.ds()
    }

    pub fn phi(&self, p: &ShapeParams) -> Result<f64> {
        let line = self.mean_line(p)?;
        let sums = self.stations(&line, false)?;
        Ok(sums
            .iter()
            .enumerate()
            .map(|(i, s)| self.ds_weight(i) * s.phi)
            .sum())
    }

    /// Residual per unit length `(s_i, phi_i)` at every longitudinal station;
    /// `Phi` equals the trapezoid sum of `phi_i` over `s`.
    pub fn phi_profile(&self, p: &ShapeParams) -> Result<Vec<(f64, f64)>> {
        let line = self.mean_line(p)?;
        let sums = self.stations(&line, false)?;
        Ok(line
            .frames
            .iter()
            .zip(&sums)
            .map(|(f, s)| (f.s, s.phi))
            .collect())
    }

    /// Exact gradient `dPhi/dV` of the discrete functional, all parameters.
    pub fn gradient(&self, p: &ShapeParams) -> Result<DVector<f64>> {
        let line = self.mean_line(p)?;
        let sums = self.stations(&line, true)?;
        let sens = Sensitivities::compute(p, &line, &self.table);
        Ok(self.exact_gradient(&sums, &sens))
    }

    fn exact_gradient(&self, sums: &[StationSums], sens: &Sensitivities) -> DVector<f64> {
        let nk = sens.dx.len();
        DVector::from_fn(nk, |k, _| {
            let (dx, dth, dga) = (&sens.dx[k], &sens.dtheta[k], &sens.dgamma[k]);
            sums.iter()
                .enumerate()
                .map(|(i, s)| {
                    self.ds_weight(i)
                        * (2.0 * dx[i].dot(&s.p) - 2.0 * dth[i] * s.q - dga[i] * s.t)
                })
                .sum()
        })
    }

    /// Normal equations over the `free` parameter indices.
    pub fn assemble(&self, p: &ShapeParams, free: &[usize], form: GradientForm) -> Result<NormalSystem> {
        let line = self.mean_line(p)?;
        let sums = self.stations(&line, true)?;
        let sens = Sensitivities::compute(p, &line, &self.table);
        let n_s = line.len();
        let nf = free.len();

        // h_k(s) = nu . dx/dV_k; the virtual-image kernel factorizes as -l'(r) h_k(s)
        let h: Vec<Vec<f64>> = free
            .iter()
            .map(|&k| {
                (0..n_s)
                    .map(|i| line.frames[i].nu.dot(&sens.dx[k][i]))
                    .collect()
            })
            .collect();
        let weight: Vec<f64> = (0..n_s).map(|i| self.ds_weight(i) * sums[i].kernel).collect();

        let mut matrix = DMatrix::zeros(nf, nf);
        for a in 0..nf {
            for b in a..nf {
                let v: f64 = (0..n_s).map(|i| weight[i] * h[a][i] * h[b][i]).sum();
                matrix[(a, b)] = v;
                matrix[(b, a)] = v;
            }
        }
        let rhs = match form {
            GradientForm::Exact => {
                let g = self.exact_gradient(&sums, &sens);
                DVector::from_iterator(nf, free.iter().map(|&k| -0.5 * g[k]))
            }
            GradientForm::VirtualImage => DVector::from_iterator(
                nf,
                h.iter().map(|hk| {
                    (0..n_s)
                        .map(|i| self.ds_weight(i) * hk[i] * sums[i].rhs_virtual)
                        .sum::<f64>()
                }),
            ),
        };
        let l = p.length;
        let scale = DVector::from_iterator(
            nf,
            free.iter().map(|&k| match k {
                k if k < THETA0 => l,
                THETA0 => 1.0,
                _ => 1.0 / l,
            }),
        );
        let phi = sums
            .iter()
            .enumerate()
            .map(|(i, s)| self.ds_weight(i) * s.phi)
            .sum();
        Ok(NormalSystem {
            matrix,
            rhs,
            free: free.to_vec(),
            scale,
            phi,
        })
    }
}

/// `Phi` at `p`.
pub fn phi(raster: &Raster, p: &ShapeParams, basis: &CurvatureBasis, beam: &VirtualBeam) -> Result<f64> {
    Correlator::new(raster, basis, beam)?.phi(p)
}

/// Normal equations over all parameters with the default right-hand side.
pub fn assemble(
    raster: &Raster,
    p: &ShapeParams,
    basis: &CurvatureBasis,
    beam: &VirtualBeam,
) -> Result<NormalSystem> {
    let free: Vec<usize> = (0..p.n_params()).collect();
    Correlator::new(raster, basis, beam)?.assemble(p, &free, GradientForm::Exact)
}

/// Solves `M x = b` for symmetric `M` by Cholesky factorization after a
/// diagonal change of units `x = S y`, reporting the 2-norm condition number
/// of `S M S`. Fails with [`VicError::IllConditioned`] above `max_condition`.
pub fn solve_scaled(
    matrix: &DMatrix<f64>,
    rhs: &DVector<f64>,
    scale: &DVector<f64>,
    max_condition: f64,
    order: usize,
) -> Result<Step> {
    let n = matrix.nrows();
    let scaled = DMatrix::from_fn(n, n, |i, j| scale[i] * matrix[(i, j)] * scale[j]);
    let b = rhs.component_mul(scale);
    let eig = SymmetricEigen::new(scaled.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= max_condition) {
        return Err(VicError::IllConditioned { condition, order });
    }
    let chol = Cholesky::new(scaled).ok_or(VicError::IllConditioned {
        condition: f64::INFINITY,
        order,
    })?;
    let y = chol.solve(&b);
    let scaled_norm = y.norm();
    Ok(Step {
        delta: y.component_mul(scale),
        condition,
        scaled_norm,
    })
}

/// Solves an assembled system in its dimensionless units.
pub fn step(system: &NormalSystem, max_condition: f64, order: usize) -> Result<Step> {
    solve_scaled(&system.matrix, &system.rhs, &system.scale, max_condition, order)
}

/// Plain symmetric solve `M dV = L` in the given units with the default
/// condition bound.
pub fn solve(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<Step> {
    let n = matrix.nrows();
    solve_scaled(matrix, rhs, &DVector::from_element(n, 1.0), MAX_CONDITION, n.saturating_sub(A0 + 1))
}

/// Convergence trace of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: ShapeParams,
    /// `Phi` at the initial point, then after every accepted iteration.
    pub phi_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub condition_estimate: f64,
    pub step_norms: Vec<f64>,
}

impl FitReport {
    pub fn final_phi(&self) -> Option<f64> {
        self.phi_history.last().copied()
    }
}

/// A fit that stopped on an error; `report` holds the best parameters
/// reached before it.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct FitFailure {
    #[source]
    pub error: VicError,
    pub report: Box<FitReport>,
}

fn fail(error: VicError, report: FitReport) -> FitFailure {
    FitFailure {
        error,
        report: Box::new(report),
    }
}

/// Iterates assemble, solve, update from `p0` until the relative decrease of
/// `Phi` drops below `opts.rel_tol`.
pub fn fit(
    raster: &Raster,
    p0: &ShapeParams,
    basis: &CurvatureBasis,
    beam: &VirtualBeam,
    opts: &FitOptions,
) -> std::result::Result<FitReport, FitFailure> {
    let mut report = FitReport {
        params: p0.clone(),
        phi_history: Vec::new(),
        iterations: 0,
        converged: false,
        condition_estimate: f64::NAN,
        step_norms: Vec::new(),
    };
    if !(opts.rel_tol > 0.0) {
        return Err(fail(
            VicError::InvalidParameter("rel_tol must be positive".into()),
            report,
        ));
    }
    let corr = match Correlator::new(raster, basis, beam) {
        Ok(c) => c.with_boundary(opts.boundary).with_exec(opts.exec),
        Err(e) => return Err(fail(e, report)),
    };
    let n = p0.n_params();
    let mut frozen = vec![false; n];
    for id in &opts.frozen {
        match frozen.get_mut(id.index()) {
            Some(slot) => *slot = true,
            None => {
                return Err(fail(
                    VicError::InvalidParameter(format!("cannot freeze {id}: no such parameter")),
                    report,
                ))
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|&k| !frozen[k]).collect();
    if free.is_empty() {
        return Err(fail(
            VicError::InvalidParameter("every parameter is frozen".into()),
            report,
        ));
    }

    let phi0 = match corr.phi(p0) {
        Ok(v) => v,
        Err(e) => return Err(fail(e, report)),
    };
    report.phi_history.push(phi0);
    if phi0 == 0.0 {
        report.converged = true;
        return Ok(report);
    }
    let mut p = p0.clone();
    let mut phi_cur = phi0;

    for it in 1..=opts.max_iters {
        let system = match corr.assemble(&p, &free, opts.gradient) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, report)),
        };
        let step = match step(&system, opts.max_condition, basis.order()) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, report)),
        };
        report.condition_estimate = step.condition;
        let candidate = |t: f64| {
            let mut c = p.clone();
            for (row, &k) in free.iter().enumerate() {
                c.set(k, p.get(k) + t * step.delta[row]);
            }
            c
        };

        let (next, phi_next, t) = if opts.backtracking {
            let mut t = 1.0;
            let mut last_trial = f64::INFINITY;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let c = candidate(t);
                match corr.phi(&c) {
                    Ok(v) => {
                        last_trial = v;
                        if v <= phi_cur {
                            accepted = Some((c, v, t));
                            break;
                        }
                    }
                    Err(VicError::OutOfBounds { .. }) | Err(VicError::Overlap { .. }) => {
                        last_trial = f64::INFINITY;
                    }
                    Err(e) => return Err(fail(e, report)),
                }
                t *= 0.5;
            }
            match accepted {
                Some(a) => a,
                None => {
                    report.iterations = it;
                    // the shortest step still changes Phi by less than the
                    // tolerance: stationary up to rounding in the sums
                    if (last_trial - phi_cur) / phi0 < opts.rel_tol {
                        report.converged = true;
                        return Ok(report);
                    }
                    return Err(fail(
                        VicError::NoDescent {
                            iteration: it,
                            halvings: opts.max_halvings,
                        },
                        report,
                    ));
                }
            }
        } else {
            let c = candidate(1.0);
            match corr.phi(&c) {
                Ok(v) => (c, v, 1.0),
                Err(e) => {
                    report.iterations = it;
                    return Err(fail(e, report));
                }
            }
        };

        report.iterations = it;
        report.step_norms.push(t * step.scaled_norm);
        let decrease = (phi_cur - phi_next) / phi0;
        if phi_next > phi_cur {
            // plain iteration overshot; keep the better point and stop
            report.phi_history.push(phi_next);
            return Ok(report);
        }
        p = next;
        phi_cur = phi_next;
        report.params = p.clone();
        report.phi_history.push(phi_cur);
        if decrease < opts.rel_tol {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}
