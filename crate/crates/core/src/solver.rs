//! Newton iterations with fixed or Walton-style relaxation, the damped Picard
//! initializer, and the four composed strategies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AirflowSystem, AssemblyError, BoundaryState, LinkFlow, PressureVector};
use crate::linalg::lu_solve;
use crate::network::Network;
use crate::physics::DEFAULT_DP_LIN;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Largest acceptable per-zone mass imbalance, kg/s.
    pub tolerance: f64,
    pub max_newton_iters: usize,
    /// Relaxation factor of the fixed-relaxation Newton method.
    pub fixed_relax: f64,
    /// Picard iteration budget.
    pub picard_iters: usize,
    /// Picard damping: `p_next = a·p + (1 − a)·p*`.
    pub accel: f64,
    /// Largest change of any zone pressure in one Picard update, Pa.
    pub trunc_dp_max: f64,
    /// Linearization threshold of the flow laws, Pa.
    pub dp_lin: f64,
    /// Clamp for the adaptive relaxation factor.
    pub relax_min: f64,
    pub relax_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_newton_iters: 500,
            fixed_relax: 0.1,
            picard_iters: 10,
            accel: 0.5,
            trunc_dp_max: 60.0,
            dp_lin: DEFAULT_DP_LIN,
            relax_min: 0.1,
            relax_max: 1.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid solver configuration: {0}")]
pub struct ConfigError(pub String);

impl SolverConfig {
    // Negated comparisons so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError(msg.to_owned()));
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.fixed_relax > 0.0 && self.fixed_relax <= 1.0) {
            return bad("relaxation factor must lie in (0, 1]");
        }
        if !(self.accel > 0.0 && self.accel < 1.0) {
            return bad("acceleration factor must lie in (0, 1)");
        }
        if !(self.trunc_dp_max > 0.0) {
            return bad("truncation must be positive");
        }
        if !(self.dp_lin > 0.0) {
            return bad("linearization threshold must be positive");
        }
        if !(self.relax_min > 0.0 && self.relax_min <= self.relax_max && self.relax_max <= 1.0) {
            return bad("relaxation clamp must satisfy 0 < min <= max <= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "NR")]
    Newton,
    #[serde(rename = "WM")]
    Walton,
    #[serde(rename = "PNR")]
    PicardNewton,
    #[serde(rename = "PWM")]
    PicardWalton,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Newton,
        Strategy::PicardNewton,
        Strategy::Walton,
        Strategy::PicardWalton,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Newton => "NR",
            Strategy::Walton => "WM",
            Strategy::PicardNewton => "PNR",
            Strategy::PicardWalton => "PWM",
        }
    }

    pub fn uses_picard(self) -> bool {
        matches!(self, Strategy::PicardNewton | Strategy::PicardWalton)
    }

    pub fn relax_mode(self) -> RelaxMode {
        match self {
            Strategy::Newton | Strategy::PicardNewton => RelaxMode::Fixed,
            Strategy::Walton | Strategy::PicardWalton => RelaxMode::Walton,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown strategy \"{0}\" (expected nr, wm, pnr or pwm)")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nr" => Ok(Strategy::Newton),
            "wm" => Ok(Strategy::Walton),
            "pnr" => Ok(Strategy::PicardNewton),
            "pwm" => Ok(Strategy::PicardWalton),
            _ => Err(UnknownStrategy(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxMode {
    /// Every correction scaled by `fixed_relax`.
    Fixed,
    /// Full steps, damped per zone when the correction changes sign.
    Walton,
}

/// Why the Picard initializer stopped early.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PicardAbort {
    Singular,
    ReciprocalFlow { link: String },
}

impl PicardAbort {
    pub fn label(&self) -> &'static str {
        match self {
            PicardAbort::Singular => "singular",
            PicardAbort::ReciprocalFlow { .. } => "reciprocal-flow",
        }
    }
}

impl fmt::Display for PicardAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PicardAbort::Singular => f.write_str("singular"),
            PicardAbort::ReciprocalFlow { link } => write!(f, "reciprocal-flow ({link})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    pub pressures: PressureVector,
    pub iterations: usize,
    pub converged: bool,
    pub aborted: Option<PicardAbort>,
    /// Starting point followed by every accepted iterate.
    pub history: Vec<PressureVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub strategy: Strategy,
    pub pressures: PressureVector,
    pub link_flows: Vec<LinkFlow>,
    pub newton_iters: usize,
    pub picard_iters_used: usize,
    pub converged_in_picard: bool,
    pub picard_aborted: Option<PicardAbort>,
    pub max_residual: f64,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(
        "no convergence after {iterations} Newton iterations (max residual {max_residual:.3e} kg/s)"
    )]
    NonConvergence {
        iterations: usize,
        max_residual: f64,
        pressures: PressureVector,
        picard_iters_used: usize,
        picard_aborted: Option<PicardAbort>,
    },
    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian {
        iteration: usize,
        pressures: PressureVector,
        picard_iters_used: usize,
        picard_aborted: Option<PicardAbort>,
    },
    #[error("initial pressures must be finite and match the zone count")]
    BadInitialPressures,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

impl SolveError {
    /// Short machine-readable reason.
    pub fn kind(&self) -> &'static str {
        match self {
            SolveError::NonConvergence { .. } => "non-convergence",
            SolveError::SingularJacobian { .. } => "singular-jacobian",
            SolveError::BadInitialPressures => "bad-initial-pressures",
            SolveError::Config(_) => "config",
            SolveError::Assembly(_) => "assembly",
        }
    }

    fn with_picard(mut self, used: usize, abort: Option<PicardAbort>) -> Self {
        match &mut self {
            SolveError::NonConvergence {
                picard_iters_used,
                picard_aborted,
                ..
            }
            | SolveError::SingularJacobian {
                picard_iters_used,
                picard_aborted,
                ..
            } => {
                *picard_iters_used = used;
                *picard_aborted = abort;
            }
            _ => {}
        }
        self
    }
}

fn check_start(sys: &AirflowSystem<'_>, p0: &[f64]) -> Result<(), SolveError> {
    if p0.len() != sys.zone_count() || p0.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::BadInitialPressures);
    }
    Ok(())
}

/// Walton-style relaxation for one zone: full step unless the correction
/// reversed sign, in which case the secant estimate `c_prev / (c_prev − c)`
/// places the step between the last two iterates.
pub fn walton_relaxation(correction: f64, previous: Option<f64>, min: f64, max: f64) -> f64 {
    match previous {
        Some(prev) if correction * prev < 0.0 => (prev / (prev - correction)).clamp(min, max),
        _ => max,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub pressures: PressureVector,
    pub iterations: usize,
    pub max_residual: f64,
}

/// Newton iterations from `p0` on an assembled system.
pub fn newton(
    sys: &AirflowSystem<'_>,
    p0: &[f64],
    cfg: &SolverConfig,
    mode: RelaxMode,
) -> Result<NewtonOutcome, SolveError> {
    check_start(sys, p0)?;
    let n = sys.zone_count();
    let mut p = p0.to_vec();
    let mut previous: Option<Vec<f64>> = None;
    let mut iterations = 0;

    loop {
        let f = sys.residual(&p);
        let max_residual = f.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if max_residual <= cfg.tolerance {
            return Ok(NewtonOutcome {
                pressures: p,
                iterations,
                max_residual,
            });
        }
        if iterations >= cfg.max_newton_iters || !max_residual.is_finite() {
            return Err(SolveError::NonConvergence {
                iterations,
                max_residual,
                pressures: p,
                picard_iters_used: 0,
                picard_aborted: None,
            });
        }

        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let report = lu_solve(&sys.jacobian(&p), &neg_f).expect("jacobian is square");
        let Some(correction) = report.solution else {
            return Err(SolveError::SingularJacobian {
                iteration: iterations + 1,
                pressures: p,
                picard_iters_used: 0,
                picard_aborted: None,
            });
        };
        iterations += 1;

        for i in 0..n {
            let omega = match mode {
                RelaxMode::Fixed => cfg.fixed_relax,
                RelaxMode::Walton => walton_relaxation(
                    correction[i],
                    previous.as_ref().map(|c| c[i]),
                    cfg.relax_min,
                    cfg.relax_max,
                ),
            };
            p[i] += omega * correction[i];
        }
        previous = Some(correction);
    }
}

/// Damped Picard iterations on an assembled system.
pub fn picard(
    sys: &AirflowSystem<'_>,
    p0: &[f64],
    cfg: &SolverConfig,
) -> Result<PicardOutcome, SolveError> {
    check_start(sys, p0)?;
    let mut p = p0.to_vec();
    let mut history = vec![p.clone()];
    let done = |p: PressureVector, iterations, converged, aborted, history| {
        Ok(PicardOutcome {
            pressures: p,
            iterations,
            converged,
            aborted,
            history,
        })
    };

    if sys.max_residual(&p) <= cfg.tolerance {
        return done(p, 0, true, None, history);
    }

    for k in 0..cfg.picard_iters {
        let system = match sys.picard_system(&p) {
            Ok(s) => s,
            Err(e) => {
                return done(
                    p,
                    k,
                    false,
                    Some(PicardAbort::ReciprocalFlow { link: e.link }),
                    history,
                )
            }
        };
        let report = lu_solve(&system.matrix, &system.rhs).expect("picard matrix is square");
        let Some(target) = report.solution else {
            return done(p, k, false, Some(PicardAbort::Singular), history);
        };

        for (pi, ti) in p.iter_mut().zip(&target) {
            let step = (1.0 - cfg.accel) * (ti - *pi);
            *pi += step.clamp(-cfg.trunc_dp_max, cfg.trunc_dp_max);
        }
        history.push(p.clone());

        if sys.max_residual(&p) <= cfg.tolerance {
            return done(p, k + 1, true, None, history);
        }
    }
    let used = cfg.picard_iters;
    done(p, used, false, None, history)
}

/// Newton iterations (NR or WM) from `p0`.
pub fn solve_newton(
    net: &Network,
    bc: &BoundaryState,
    p0: &[f64],
    cfg: &SolverConfig,
    mode: RelaxMode,
) -> Result<SolveOutcome, SolveError> {
    let strategy = match mode {
        RelaxMode::Fixed => Strategy::Newton,
        RelaxMode::Walton => Strategy::Walton,
    };
    solve(net, bc, p0, strategy, cfg)
}

/// Picard initialization alone.
pub fn picard_init(
    net: &Network,
    bc: &BoundaryState,
    p0: &[f64],
    cfg: &SolverConfig,
) -> Result<PicardOutcome, SolveError> {
    cfg.validate()?;
    let sys = AirflowSystem::new(net, bc, cfg.dp_lin)?;
    picard(&sys, p0, cfg)
}

/// Solves the network with the chosen strategy starting from `p0`.
pub fn solve(
    net: &Network,
    bc: &BoundaryState,
    p0: &[f64],
    strategy: Strategy,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolveError> {
    cfg.validate()?;
    let sys = AirflowSystem::new(net, bc, cfg.dp_lin)?;
    solve_system(&sys, p0, strategy, cfg)
}

/// As [`solve`], on an already assembled system.
pub fn solve_system(
    sys: &AirflowSystem<'_>,
    p0: &[f64],
    strategy: Strategy,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolveError> {
    let (start, picard_iters_used, aborted) = if strategy.uses_picard() {
        let init = picard(sys, p0, cfg)?;
        if init.converged {
            return Ok(outcome(
                sys,
                strategy,
                init.pressures,
                0,
                init.iterations,
                true,
                None,
            ));
        }
        (init.pressures, init.iterations, init.aborted)
    } else {
        (p0.to_vec(), 0, None)
    };

    let result = newton(sys, &start, cfg, strategy.relax_mode())
        .map_err(|e| e.with_picard(picard_iters_used, aborted.clone()))?;
    Ok(outcome(
        sys,
        strategy,
        result.pressures,
        result.iterations,
        picard_iters_used,
        false,
        aborted,
    ))
}

fn outcome(
    sys: &AirflowSystem<'_>,
    strategy: Strategy,
    pressures: PressureVector,
    newton_iters: usize,
    picard_iters_used: usize,
    converged_in_picard: bool,
    picard_aborted: Option<PicardAbort>,
) -> SolveOutcome {
    SolveOutcome {
        strategy,
        link_flows: sys.link_flows(&pressures),
        max_residual: sys.max_residual(&pressures),
        pressures,
        newton_iters,
        picard_iters_used,
        converged_in_picard,
        picard_aborted,
    }
}
