//! Damped second-order flow `u_tt + η u_t = div(a(u) ∇u)` integrated with a
//! damped Störmer-Verlet scheme, plus the first-order explicit baseline.
//!
//! One SV-DDF step from `(u^k, v^k)` with coefficient matrices `F^{k-1}`
//! (carried in the state) and `F^k` (assembled from `u^k`):
//!
//! ```text
//! v^{k+1/2} = (v^k + Δt/2 F^{k-1} u^k) / (1 + η Δt/2)
//! u^{k+1}   = u^k + Δt v^{k+1/2}
//! v^{k+1}   = v^{k+1/2} + Δt/2 (F^k u^{k+1} - η v^{k+1/2})
//! ```
//!
//! At start-up `F^{-1} = F^0`. `Δt_k` is derived from the largest eigenvalue
//! of `-F^k`.

use std::io::{self, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::diffusivity::{check_params, diffusivity_half, GaussianKernel};
use crate::error::{Error, Result};
use crate::grid::{norm2, ImageGrid, StackedVector};
use crate::operator::{assemble, lambda_max_seeded, SparseOperator, SpectralBound, POWER_SEED};
use crate::stopping::{a_priori_time, discrepancy, HighFreqIndex, RdeSignal, SpectralEnergy, StoppingRule};

/// Below this `λ_max` the spectral step rules need an explicit `dt_max`.
pub const TINY_LAMBDA: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// `safety · η / sqrt(λ_max)`. Only a stability bound for `η <= 2`.
    TheoremBound,
    /// `safety · min(η, 2) / sqrt(λ_max)`: the theorem bound capped at the
    /// Störmer-Verlet limit `2 / sqrt(λ_max)`.
    Stable,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralEstimate {
    /// Falls back to Gershgorin when not converged.
    PowerIteration {
        tol: f64,
        max_iter: usize,
        seed: u64,
    },
    Gershgorin,
}

impl SpectralEstimate {
    pub fn estimate(self, f: &SparseOperator) -> SpectralBound {
        match self {
            Self::PowerIteration { tol, max_iter, seed } => lambda_max_seeded(f, tol, max_iter, seed),
            Self::Gershgorin => SpectralBound::gershgorin(f),
        }
    }
}

impl Default for SpectralEstimate {
    fn default() -> Self {
        Self::PowerIteration { tol: 1e-6, max_iter: 200, seed: POWER_SEED }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Exponent in `[1, 2]`.
    pub p: f64,
    /// Damping `η > 0`.
    pub eta: f64,
    pub epsilon: f64,
    /// Gaussian pre-smoothing variance (pixels²).
    pub sigma: f64,
    /// Grid spacing `h`.
    pub spacing: f64,
    pub step_rule: StepRule,
    /// Multiplier in `(0, 1]` applied to the spectral step rules.
    pub safety: f64,
    /// Cap on `Δt`; required when `λ_max` vanishes.
    pub dt_max: Option<f64>,
    pub max_steps: usize,
    pub stopping: StoppingRule,
    /// Reassemble `F` every `reuse_every` steps (1 = every step).
    pub reuse_every: usize,
    pub spectral: SpectralEstimate,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            eta: 1.0,
            epsilon: 1e-2,
            sigma: 1.0,
            spacing: 1.0,
            step_rule: StepRule::Stable,
            safety: 0.9,
            dt_max: None,
            max_steps: 500,
            stopping: StoppingRule::Rde { tol: 1e-4, n0: HighFreqIndex::default() },
            reuse_every: 1,
            spectral: SpectralEstimate::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_params(self.epsilon, self.p)?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::param(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::param(format!("safety must lie in (0, 1], got {}", self.safety)));
        }
        if let StepRule::Fixed(dt) = self.step_rule {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::param(format!("fixed step must be positive, got {dt}")));
            }
        }
        if let Some(cap) = self.dt_max {
            if cap.is_nan() || cap <= 0.0 {
                return Err(Error::param(format!("dt_max must be positive, got {cap}")));
            }
        }
        if self.reuse_every == 0 {
            return Err(Error::param("reuse_every must be at least 1"));
        }
        if let SpectralEstimate::PowerIteration { tol, max_iter, .. } = self.spectral {
            if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
                return Err(Error::param("power iteration needs tol > 0 and max_iter >= 1"));
            }
        }
        self.stopping.validate()
    }

    pub fn kernel(&self) -> Result<GaussianKernel> {
        GaussianKernel::new(self.sigma)
    }

    /// `F` for the image `u` under this configuration.
    pub fn operator_for(&self, u: &ImageGrid, kernel: &GaussianKernel) -> Result<SparseOperator> {
        let field = diffusivity_half(u, self.epsilon, self.p, kernel)?;
        Ok(assemble(&field, self.spacing))
    }
}

fn spectral_step(bound: &SpectralBound, config: &SolverConfig, numerator: f64, sqrt: bool) -> Result<f64> {
    let lambda = bound.lambda_max;
    let dt = if lambda < TINY_LAMBDA {
        config
            .dt_max
            .ok_or_else(|| Error::param(format!("lambda_max = {lambda:e} vanishes and no dt_max is configured")))?
    } else {
        let scale = if sqrt { lambda.sqrt() } else { lambda };
        config.safety * numerator / scale
    };
    Ok(config.dt_max.map_or(dt, |cap| dt.min(cap)))
}

/// Time step of the SV-DDF scheme for the given spectral bound.
pub fn step_size(bound: &SpectralBound, config: &SolverConfig) -> Result<f64> {
    match config.step_rule {
        StepRule::Fixed(dt) => Ok(dt),
        StepRule::TheoremBound => spectral_step(bound, config, config.eta, true),
        StepRule::Stable => spectral_step(bound, config, config.eta.min(2.0), true),
    }
}

/// Explicit Euler step `safety · 2 / λ_max` for the first-order baseline.
pub fn first_order_step_size(bound: &SpectralBound, config: &SolverConfig) -> Result<f64> {
    match config.step_rule {
        StepRule::Fixed(dt) => Ok(dt),
        StepRule::TheoremBound | StepRule::Stable => spectral_step(bound, config, 2.0, false),
    }
}

/// Iteration matrix of one SV-DDF step restricted to an eigenmode of `F`
/// with eigenvalue `-lambda`, acting on `(u, v)`.
pub fn mode_iteration_matrix(lambda: f64, eta: f64, dt: f64) -> [[f64; 2]; 2] {
    let c = 1.0 + 0.5 * eta * dt;
    // first kick + drift
    let a = [[(c - 0.5 * dt * dt * lambda) / c, dt / c], [-0.5 * dt * lambda / c, 1.0 / c]];
    // second kick: v' = -dt/2 λ u' + (1 - η dt/2) v
    let b = [[1.0, 0.0], [-0.5 * dt * lambda, 1.0 - 0.5 * eta * dt]];
    [
        [b[0][0] * a[0][0] + b[0][1] * a[1][0], b[0][0] * a[0][1] + b[0][1] * a[1][1]],
        [b[1][0] * a[0][0] + b[1][1] * a[1][0], b[1][0] * a[0][1] + b[1][1] * a[1][1]],
    ]
}

fn eig2(m: [[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
    [(tr + disc) / 2.0, (tr - disc) / 2.0]
}

/// Spectral radius of [`mode_iteration_matrix`].
pub fn mode_spectral_radius(lambda: f64, eta: f64, dt: f64) -> f64 {
    let [a, b] = eig2(mode_iteration_matrix(lambda, eta, dt));
    a.norm().max(b.norm())
}

/// Closed-form eigenvalues of the first-kick-and-drift matrix for a mode with
/// eigenvalue `-lambda`:
/// `2/(2+ηΔt) (1 + Δt/4 (η - Δtλ ± sqrt((η - Δtλ)² - 8λ)))`.
pub fn kick_drift_eigenvalues(lambda: f64, eta: f64, dt: f64) -> [Complex64; 2] {
    let pre = 2.0 / (2.0 + eta * dt);
    let b = eta - dt * lambda;
    let root = Complex64::new(b * b - 8.0 * lambda, 0.0).sqrt();
    [
        (Complex64::new(1.0 + dt / 4.0 * b, 0.0) + root * (dt / 4.0)) * pre,
        (Complex64::new(1.0 + dt / 4.0 * b, 0.0) - root * (dt / 4.0)) * pre,
    ]
}

/// Position, velocity and lagged operator of a run.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub rows: usize,
    pub cols: usize,
    pub u: StackedVector,
    pub v: StackedVector,
    pub k: usize,
    pub t: f64,
    /// `F^{k-1}`, assembled from the previous iterate.
    pub f_prev: Arc<SparseOperator>,
    /// Spectral bound of `f_prev`.
    pub bound_prev: SpectralBound,
}

impl FlowState {
    /// Initial state `(u^0, 0)` with `F^{-1} = F^0`.
    pub fn new(u0: &ImageGrid, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        if u0.rows() < 2 || u0.cols() < 2 {
            return Err(Error::param(format!("the flow needs at least a 2x2 grid, got {}x{}", u0.rows(), u0.cols())));
        }
        let u0 = u0.clone().with_spacing(config.spacing)?;
        let f0 = config.operator_for(&u0, &config.kernel()?)?;
        let bound = config.spectral.estimate(&f0);
        Ok(Self {
            rows: u0.rows(),
            cols: u0.cols(),
            u: u0.vec(),
            v: StackedVector::zeros(u0.len()),
            k: 0,
            t: 0.0,
            f_prev: Arc::new(f0),
            bound_prev: bound,
        })
    }

    pub fn image(&self, spacing: f64) -> ImageGrid {
        ImageGrid::array(&self.u, self.rows, self.cols)
            .and_then(|g| g.with_spacing(spacing))
            .expect("state vector matches its shape")
    }

    /// `‖(u, v)‖₂`
    pub fn norm(&self) -> f64 {
        (self.u.dot(&self.u) + self.v.dot(&self.v)).sqrt()
    }
}

/// Quantities produced by one step besides the new state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub bound: SpectralBound,
}

fn current_operator(
    state: &FlowState,
    config: &SolverConfig,
    kernel: &GaussianKernel,
) -> Result<(Arc<SparseOperator>, SpectralBound)> {
    if state.k == 0 || state.k % config.reuse_every != 0 {
        return Ok((Arc::clone(&state.f_prev), state.bound_prev));
    }
    let f = config.operator_for(&state.image(config.spacing), kernel)?;
    let bound = config.spectral.estimate(&f);
    Ok((Arc::new(f), bound))
}

fn diverged(step: usize) -> Error {
    Error::Diverged { step, log: Box::default() }
}

/// One damped Störmer-Verlet step.
pub fn sv_step(state: &FlowState, config: &SolverConfig) -> Result<(FlowState, StepInfo)> {
    sv_step_with(state, config, &config.kernel()?)
}

fn sv_step_with(state: &FlowState, config: &SolverConfig, kernel: &GaussianKernel) -> Result<(FlowState, StepInfo)> {
    let (f_k, bound) = current_operator(state, config, kernel)?;
    let dt = step_size(&bound, config)?;
    let half = 0.5 * dt;
    let eta = config.eta;
    let n = state.u.len();

    let mut work = vec![0.0; n];
    state.f_prev.apply_into(&state.u, &mut work);
    let denom = 1.0 + half * eta;
    let v_half: Vec<f64> = state.v.iter().zip(&work).map(|(v, fu)| (v + half * fu) / denom).collect();
    let u_next: Vec<f64> = state.u.iter().zip(&v_half).map(|(u, vh)| u + dt * vh).collect();
    f_k.apply_into(&u_next, &mut work);
    let v_next: Vec<f64> = v_half.iter().zip(&work).map(|(vh, fu)| vh + half * (fu - eta * vh)).collect();

    if !(u_next.iter().chain(&v_next).all(|x| x.is_finite())) {
        return Err(diverged(state.k + 1));
    }
    Ok((
        FlowState {
            rows: state.rows,
            cols: state.cols,
            u: StackedVector(u_next),
            v: StackedVector(v_next),
            k: state.k + 1,
            t: state.t + dt,
            f_prev: f_k,
            bound_prev: bound,
        },
        StepInfo { dt, bound },
    ))
}

/// One explicit Euler step of `u_t = F(u) u`; `v` holds `F^k u^k`.
pub fn first_order_step(state: &FlowState, config: &SolverConfig) -> Result<(FlowState, StepInfo)> {
    first_order_step_with(state, config, &config.kernel()?)
}

fn first_order_step_with(
    state: &FlowState,
    config: &SolverConfig,
    kernel: &GaussianKernel,
) -> Result<(FlowState, StepInfo)> {
    let (f_k, bound) = current_operator(state, config, kernel)?;
    let dt = first_order_step_size(&bound, config)?;
    let mut fu = vec![0.0; state.u.len()];
    f_k.apply_into(&state.u, &mut fu);
    let u_next: Vec<f64> = state.u.iter().zip(&fu).map(|(u, d)| u + dt * d).collect();
    if !(u_next.iter().chain(&fu).all(|x| x.is_finite())) {
        return Err(diverged(state.k + 1));
    }
    Ok((
        FlowState {
            rows: state.rows,
            cols: state.cols,
            u: StackedVector(u_next),
            v: StackedVector(fu),
            k: state.k + 1,
            t: state.t + dt,
            f_prev: f_k,
            bound_prev: bound,
        },
        StepInfo { dt, bound },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies {
    /// `h²/2 ‖v‖²`
    pub kinetic: f64,
    /// `h² Σ (1/p)(|∇u|² + ε)^{p/2}` with central differences and reflected
    /// ghost nodes.
    pub potential: f64,
}

pub fn energies(state: &FlowState, config: &SolverConfig) -> Energies {
    let h = config.spacing;
    let (m, n) = (state.rows, state.cols);
    let u = &state.u;
    let at = |i: isize, j: isize| {
        let i = i.clamp(0, m as isize - 1) as usize;
        let j = j.clamp(0, n as isize - 1) as usize;
        u[j * m + i]
    };
    let p = config.p;
    let mut potential = 0.0;
    for j in 0..n as isize {
        for i in 0..m as isize {
            let dx = (at(i + 1, j) - at(i - 1, j)) / (2.0 * h);
            let dy = (at(i, j + 1) - at(i, j - 1)) / (2.0 * h);
            potential += (dx * dx + dy * dy + config.epsilon).powf(p / 2.0) / p;
        }
    }
    Energies { kinetic: 0.5 * h * h * state.v.dot(&state.v), potential: h * h * potential }
}

/// `h²/2 uᵀ(-F)u`, the potential of the linearized flow.
pub fn quadratic_potential(f: &SparseOperator, u: &[f64], h: f64) -> f64 {
    let fu = f.apply(u).expect("operator and vector sizes agree");
    -0.5 * h * h * u.iter().zip(&fu).map(|(a, b)| a * b).sum::<f64>()
}

/// One row of the trajectory log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub lambda_max: f64,
    pub vnorm: f64,
    /// Relative high-frequency energy change; NaN when degenerate.
    pub rde: f64,
    /// `‖u^k - u0‖ / ‖u0‖`
    pub sigma: f64,
    pub kinetic: f64,
    pub potential: f64,
}

pub const TRAJECTORY_HEADER: &str = "step,t,dt,lambda_max,vnorm,rde,sigma,kinetic,potential";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog {
    pub records: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.step, r.t, r.dt, r.lambda_max, r.vnorm, r.rde, r.sigma, r.kinetic, r.potential
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("CSV is ASCII")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopReason {
    Rde(f64),
    /// Previous high-frequency energy was zero.
    DegenerateRde,
    Discrepancy {
        sigma: f64,
    },
    APriori {
        t: f64,
    },
    MaxSteps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Svddf,
    FirstOrder,
}

/// Step-by-step driver shared by [`run_svddf`] and [`run_first_order`].
#[derive(Debug)]
pub struct Solver {
    config: SolverConfig,
    method: Method,
    kernel: GaussianKernel,
    data: StackedVector,
    data_norm: f64,
    state: FlowState,
    spectral: SpectralEnergy,
    n0: usize,
    high_freq: f64,
    stop_time: Option<f64>,
    log: TrajectoryLog,
    stopped: Option<StopReason>,
}

impl Solver {
    pub fn new(u0: &ImageGrid, config: SolverConfig, method: Method) -> Result<Self> {
        let state = FlowState::new(u0, &config)?;
        let data = state.u.clone();
        let data_norm = norm2(&data);
        let (rows, cols) = (state.rows, state.cols);
        let n0 = match config.stopping {
            StoppingRule::Rde { n0, .. } => n0,
            _ => HighFreqIndex::default(),
        }
        .resolve(rows, cols);
        let spectral = SpectralEnergy::new(rows, cols);
        let high_freq = spectral.high_freq_energy(&state.image(config.spacing), n0);
        let stop_time = match config.stopping {
            StoppingRule::APriori { c1, c2, gamma, delta } => Some(a_priori_time(delta, c1, c2, gamma)),
            StoppingRule::Discrepancy { .. } if data_norm == 0.0 => {
                return Err(Error::Degenerate("noisy data has zero norm".into()))
            }
            _ => None,
        };
        let mut solver = Self {
            kernel: config.kernel()?,
            config,
            method,
            data,
            data_norm,
            state,
            spectral,
            n0,
            high_freq,
            stop_time,
            log: TrajectoryLog::default(),
            stopped: None,
        };
        solver.stopped = solver.initial_stop();
        Ok(solver)
    }

    fn initial_stop(&self) -> Option<StopReason> {
        match self.config.stopping {
            StoppingRule::Discrepancy { delta } if delta <= 0.0 => Some(StopReason::Discrepancy { sigma: 0.0 }),
            StoppingRule::APriori { .. } if self.stop_time.is_some_and(|t| t <= 0.0) => {
                Some(StopReason::APriori { t: 0.0 })
            }
            _ if self.config.max_steps == 0 => Some(StopReason::MaxSteps),
            _ => None,
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn into_log(self) -> TrajectoryLog {
        self.log
    }

    pub fn image(&self) -> ImageGrid {
        self.state.image(self.config.spacing)
    }

    /// High-frequency threshold `N0` in use.
    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stopped
    }

    /// Advance one step and evaluate the stopping rule. Stepping after a
    /// stop is allowed; the stop reason is kept from the first stop.
    pub fn step(&mut self) -> Result<StepRecord> {
        let stepped = match self.method {
            Method::Svddf => sv_step_with(&self.state, &self.config, &self.kernel),
            Method::FirstOrder => first_order_step_with(&self.state, &self.config, &self.kernel),
        };
        let (next, info) = match stepped {
            Ok(ok) => ok,
            Err(Error::Diverged { step, .. }) => return Err(Error::Diverged { step, log: Box::new(self.log.clone()) }),
            Err(e) => return Err(e),
        };
        self.state = next;

        let image = self.image();
        let high_freq = self.spectral.high_freq_energy(&image, self.n0);
        let rde = RdeSignal::from_energies(high_freq, self.high_freq);
        self.high_freq = high_freq;
        let sigma = if self.data_norm > 0.0 { discrepancy(&self.state.u, &self.data, 0.0)?.sigma } else { f64::NAN };
        let e = match self.method {
            Method::Svddf => energies(&self.state, &self.config),
            Method::FirstOrder => Energies { kinetic: 0.0, ..energies(&self.state, &self.config) },
        };
        let record = StepRecord {
            step: self.state.k,
            t: self.state.t,
            dt: info.dt,
            lambda_max: info.bound.lambda_max,
            vnorm: self.state.v.norm(),
            rde: rde.value(),
            sigma,
            kinetic: e.kinetic,
            potential: e.potential,
        };
        self.log.records.push(record);

        if self.stopped.is_none() {
            self.stopped = match self.config.stopping {
                StoppingRule::Rde { tol, .. } if rde.should_stop(tol) => Some(match rde {
                    RdeSignal::Value(v) => StopReason::Rde(v),
                    RdeSignal::Degenerate => StopReason::DegenerateRde,
                }),
                StoppingRule::Discrepancy { delta } if sigma - delta >= 0.0 => Some(StopReason::Discrepancy { sigma }),
                StoppingRule::APriori { .. } if self.stop_time.is_some_and(|t| self.state.t >= t) => {
                    Some(StopReason::APriori { t: self.state.t })
                }
                _ if self.state.k >= self.config.max_steps => Some(StopReason::MaxSteps),
                _ => None,
            };
        }
        Ok(record)
    }

    /// Step until the stopping rule fires or `max_steps` is reached.
    pub fn run(mut self) -> Result<RunOutput> {
        while self.stopped.is_none() {
            self.step()?;
        }
        Ok(RunOutput {
            image: self.image(),
            steps: self.state.k,
            stop: self.stopped.unwrap_or(StopReason::MaxSteps),
            log: self.log,
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub image: ImageGrid,
    pub log: TrajectoryLog,
    pub stop: StopReason,
    pub steps: usize,
}

/// Denoise `u0` with the damped Störmer-Verlet flow.
pub fn run_svddf(u0: &ImageGrid, config: &SolverConfig) -> Result<RunOutput> {
    Solver::new(u0, *config, Method::Svddf)?.run()
}

/// Explicit first-order p-Laplacian flow with the same operator and
/// stopping rules.
pub fn run_first_order(u0: &ImageGrid, config: &SolverConfig) -> Result<RunOutput> {
    Solver::new(u0, *config, Method::FirstOrder)?.run()
}
