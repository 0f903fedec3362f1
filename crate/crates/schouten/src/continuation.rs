//! Homotopy continuation for the deformed prescribed-curvature equation:
//! the C¹ ramp ψ, the constant `ς = (nϱ)⁻¹ vol(M)^{2/(n+1)}`, a damped
//! Newton corrector with an admissibility safeguard, adaptive stepping in
//! t, and the interior-estimate monitor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conformal::{
    assemble_w_unchecked, eval_residual, linearize, ProblemSpec, ResidualEval,
};
use crate::error::{Error, Result};
use crate::field::{max_value, min_value, random_smooth_field, sup_norm};
use crate::manifold::{cell_volumes, curvature, MetricField};
use crate::symfuncs::SymFuncSpec;

/// The homotopy ramp: a cubic smoothstep on `[0, ramp_end]` clamped to 1
/// beyond, so ψ(0) = 0, ψ(t) = 1 for t ≥ ramp_end, and ψ is C¹.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PsiSchedule {
    pub ramp_end: f64,
}

impl PsiSchedule {
    pub fn standard() -> Self {
        Self { ramp_end: 0.5 }
    }

    /// The ramp must be complete by t = 1/2.
    pub fn new(ramp_end: f64) -> Result<Self> {
        if !(ramp_end > 0.0 && ramp_end <= 0.5) {
            return Err(Error::Argument(format!("ramp_end must lie in (0, 1/2], got {ramp_end}")));
        }
        Ok(Self { ramp_end })
    }

    pub fn psi(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Argument(format!("t = {t} outside [0, 1]")));
        }
        let s = (t / self.ramp_end).min(1.0);
        Ok(s * s * (3.0 - 2.0 * s))
    }

    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Argument(format!("t = {t} outside [0, 1]")));
        }
        if t >= self.ramp_end {
            return Ok(0.0);
        }
        let s = t / self.ramp_end;
        Ok(6.0 * s * (1.0 - s) / self.ramp_end)
    }
}

pub(crate) fn varsigma_from_volume(volume: f64, spec: &SymFuncSpec) -> f64 {
    volume.powf(2.0 / (spec.n as f64 + 1.0)) / (spec.n as f64 * spec.rho)
}

/// `ς = (nϱ)⁻¹ vol(M)^{2/(n+1)}` with the volume taken from the chart
/// quadrature.
pub fn varsigma(metric: &MetricField, spec: &SymFuncSpec) -> Result<f64> {
    let curv = curvature(metric)?;
    let volume: f64 = cell_volumes(metric, &curv).iter().sum();
    Ok(varsigma_from_volume(volume, spec))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NewtonOpts {
    /// Convergence threshold on the residual max-norm.
    pub tol: f64,
    pub max_iters: usize,
    /// Minimum admissibility margin a trial iterate must keep.
    pub safeguard: f64,
    pub max_backtracks: usize,
}

impl Default for NewtonOpts {
    fn default() -> Self {
        Self { tol: 1e-9, max_iters: 30, safeguard: 1e-8, max_backtracks: 20 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonStats {
    pub iters: usize,
    /// Residual max-norm after each iteration, starting with the initial one.
    pub residual_norms: Vec<f64>,
    pub final_residual: f64,
    pub min_margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FailReason {
    LineSearchStall,
    /// Every trial step lost the admissibility safeguard: the iterate is
    /// likely approaching the cone boundary.
    AdmissibilityLoss,
    MaxIters,
    LinearSolve,
}

#[derive(Clone, Debug)]
pub enum NewtonOutcome {
    Converged { u: Vec<f64>, stats: NewtonStats },
    Failed { u_last: Vec<f64>, stats: NewtonStats, reason: FailReason },
}

/// Damped Newton with backtracking on the residual max-norm. Iterates
/// satisfy the Neumann condition exactly through the ghost stencil; trial
/// steps are rejected when the admissibility margin drops below the
/// safeguard. Errors only on a bad initial iterate; solver failures are
/// reported as an outcome.
pub fn newton_solve(
    u0: &[f64],
    t: f64,
    problem: &ProblemSpec,
    opts: &NewtonOpts,
) -> Result<NewtonOutcome> {
    let mut u = u0.to_vec();
    let mut current = match eval_residual(&u, t, problem) {
        Ok(ev) => ev,
        Err(Error::Inadmissible { node, margin }) => {
            return Err(Error::Precondition(format!(
                "initial iterate inadmissible at node {node} (margin {margin:.3e})"
            )))
        }
        Err(e) => return Err(e),
    };
    if current.min_margin < opts.safeguard {
        return Err(Error::Precondition(format!(
            "initial iterate margin {:.3e} below safeguard {:.3e}",
            current.min_margin, opts.safeguard
        )));
    }
    let mut rnorm = sup_norm(&current.values);
    let mut stats = NewtonStats {
        iters: 0,
        residual_norms: vec![rnorm],
        final_residual: rnorm,
        min_margin: current.min_margin,
    };

    for iter in 0..opts.max_iters {
        if rnorm <= opts.tol {
            stats.final_residual = rnorm;
            return Ok(NewtonOutcome::Converged { u, stats });
        }
        let op = match linearize(&u, t, problem) {
            Ok(op) => op,
            Err(_) => {
                return Ok(NewtonOutcome::Failed {
                    u_last: u,
                    stats,
                    reason: FailReason::LinearSolve,
                })
            }
        };
        let rhs: Vec<f64> = current.values.iter().map(|v| -v).collect();
        let delta = match op.solve(&rhs) {
            Ok(d) => d,
            Err(_) => {
                return Ok(NewtonOutcome::Failed {
                    u_last: u,
                    stats,
                    reason: FailReason::LinearSolve,
                })
            }
        };

        let mut alpha = 1.0;
        let mut accepted = false;
        let mut saw_admissible_trial = false;
        for _ in 0..opts.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(ui, di)| ui + alpha * di).collect();
            if let Ok(ev) = eval_residual(&trial, t, problem) {
                if ev.min_margin >= opts.safeguard {
                    saw_admissible_trial = true;
                    let tn = sup_norm(&ev.values);
                    if tn <= (1.0 - 1e-4 * alpha) * rnorm {
                        u = trial;
                        current = ev;
                        rnorm = tn;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }

        stats.iters = iter + 1;
        stats.residual_norms.push(rnorm);
        stats.min_margin = current.min_margin;
        stats.final_residual = rnorm;
        if !accepted {
            let reason = if saw_admissible_trial {
                FailReason::LineSearchStall
            } else {
                FailReason::AdmissibilityLoss
            };
            return Ok(NewtonOutcome::Failed { u_last: u, stats, reason });
        }
    }

    if rnorm <= opts.tol {
        Ok(NewtonOutcome::Converged { u, stats })
    } else {
        Ok(NewtonOutcome::Failed { u_last: u, stats, reason: FailReason::MaxIters })
    }
}

/// Summary of one accepted point of the homotopy path.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuationState {
    pub t: f64,
    pub dt: f64,
    pub residual_max: f64,
    pub residual_l2: f64,
    pub newton_iters: usize,
    pub min_u: f64,
    pub max_u: f64,
    /// `(∫ e^{-(n+1)u} dV)^{2/(n+1)}`.
    pub integral_value: f64,
    pub margin: f64,
    pub worst_node: usize,
    pub admissible: bool,
}

fn state_from(t: f64, dt: f64, u: &[f64], ev: &ResidualEval, iters: usize, problem: &ProblemSpec) -> ContinuationState {
    let l2: f64 = ev
        .values
        .iter()
        .zip(&problem.cell_volumes)
        .map(|(v, w)| v * v * w)
        .sum::<f64>()
        .sqrt();
    ContinuationState {
        t,
        dt,
        residual_max: sup_norm(&ev.values),
        residual_l2: l2,
        newton_iters: iters,
        min_u: min_value(u),
        max_u: max_value(u),
        integral_value: ev.integral_pow,
        margin: ev.min_margin,
        worst_node: ev.worst_node,
        admissible: ev.min_margin > 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    ConvergedT1,
    BlowupDetected,
    StepFailure,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub kind: OutcomeKind,
    pub final_u: Vec<f64>,
    pub history: Vec<ContinuationState>,
}

impl RunOutcome {
    pub fn final_state(&self) -> &ContinuationState {
        self.history.last().expect("history never empty")
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RunOpts {
    pub newton: NewtonOpts,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Stop the path here; 1.0 for full runs, smaller for diagnostics.
    pub t_end: f64,
    /// A state with min u below this while Δt has collapsed under dt_min
    /// classifies as blow-up: e^{-2u} has outgrown double precision's
    /// useful range.
    pub blowup_threshold: f64,
    pub max_steps: usize,
}

impl Default for RunOpts {
    fn default() -> Self {
        Self {
            newton: NewtonOpts::default(),
            dt_init: 0.02,
            dt_min: 1e-4,
            dt_max: 0.25,
            t_end: 1.0,
            blowup_threshold: -12.0,
            max_steps: 100_000,
        }
    }
}

/// Drive the homotopy from `(t, u) = (0, 0)` toward `t_end` with a secant
/// predictor and adaptive Δt: halved on corrector failure, grown on easy
/// success. All failure modes are outcome kinds, not errors.
pub fn run_path(problem: &ProblemSpec, opts: &RunOpts) -> Result<RunOutcome> {
    let nodes = problem.num_nodes();
    let mut u = vec![0.0; nodes];
    let ev0 = eval_residual(&u, 0.0, problem)?;
    let mut history = vec![state_from(0.0, 0.0, &u, &ev0, 0, problem)];

    let mut t = 0.0;
    let mut dt = opts.dt_init;
    let mut prev: Option<(f64, Vec<f64>)> = None;

    for _ in 0..opts.max_steps {
        if t >= opts.t_end - 1e-14 {
            return Ok(RunOutcome { kind: OutcomeKind::ConvergedT1, final_u: u, history });
        }
        let t_next = (t + dt).min(opts.t_end);

        let predictor: Vec<f64> = match &prev {
            Some((tp, up)) if t > *tp => {
                let scale = (t_next - t) / (t - tp);
                u.iter().zip(up).map(|(ui, upi)| ui + scale * (ui - upi)).collect()
            }
            _ => u.clone(),
        };

        let attempt = newton_solve(&predictor, t_next, problem, &opts.newton)
            .or_else(|_| newton_solve(&u, t_next, problem, &opts.newton));

        match attempt {
            Ok(NewtonOutcome::Converged { u: unew, stats }) => {
                let ev = eval_residual(&unew, t_next, problem)?;
                history.push(state_from(t_next, dt, &unew, &ev, stats.iters, problem));
                prev = Some((t, std::mem::replace(&mut u, unew)));
                t = t_next;
                if stats.iters <= 3 {
                    dt = (dt * 1.5).min(opts.dt_max);
                }
            }
            _ => {
                dt *= 0.5;
                if dt < opts.dt_min {
                    let kind = if min_value(&u) < opts.blowup_threshold {
                        OutcomeKind::BlowupDetected
                    } else {
                        OutcomeKind::StepFailure
                    };
                    return Ok(RunOutcome { kind, final_u: u, history });
                }
            }
        }
    }

    Ok(RunOutcome { kind: OutcomeKind::StepFailure, final_u: u, history })
}

#[derive(Clone, Debug, Serialize)]
pub struct T0Trial {
    pub final_sup_u: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct T0Report {
    /// Sup-norm of the residual of u ≡ 0 at t = 0.
    pub residual_sup: f64,
    pub trials: Vec<T0Trial>,
    pub all_returned: bool,
}

/// Check that u ≡ 0 solves the t = 0 problem to quadrature accuracy, and
/// that Newton pulls random small perturbations back to zero — the
/// numerical surrogate of the uniqueness argument.
pub fn verify_t0(
    problem: &ProblemSpec,
    trials: usize,
    amplitude: f64,
    seed: u64,
    opts: &NewtonOpts,
) -> Result<T0Report> {
    let zero = vec![0.0; problem.num_nodes()];
    let ev = eval_residual(&zero, 0.0, problem)?;
    let residual_sup = sup_norm(&ev.values);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    let mut all = true;
    for _ in 0..trials {
        let u0 = random_smooth_field(problem.chart(), amplitude, &mut rng);
        match newton_solve(&u0, 0.0, problem, opts)? {
            NewtonOutcome::Converged { u, stats } => {
                let sup = sup_norm(&u);
                all &= sup <= 1e-9;
                out.push(T0Trial { final_sup_u: sup, iters: stats.iters, converged: true });
            }
            NewtonOutcome::Failed { u_last, stats, .. } => {
                all = false;
                out.push(T0Trial {
                    final_sup_u: sup_norm(&u_last),
                    iters: stats.iters,
                    converged: false,
                });
            }
        }
    }
    Ok(T0Report { residual_sup, trials: out, all_returned: all })
}

#[derive(Clone, Debug, Serialize)]
pub struct MonitorSample {
    pub center: usize,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonitorReport {
    /// Empirical constant: the largest observed ratio.
    pub max_ratio: f64,
    pub samples: Vec<MonitorSample>,
}

#[derive(Clone, Debug)]
pub struct MonitorOpts {
    /// Ball radii in chart units; fixed physical values keep the report
    /// comparable across resolutions.
    pub radii: Vec<f64>,
    pub center_stride: usize,
}

impl MonitorOpts {
    pub fn for_chart(chart: &crate::manifold::GridChart) -> Self {
        let r = chart.injectivity_safe_radius();
        Self {
            radii: vec![r / 8.0, r / 4.0, r / 2.0],
            center_stride: (chart.num_nodes() / 16).max(1),
        }
    }
}

/// Interior-estimate monitor: the ratio of `|∇²u| + |∇u|²` over
/// `r⁻² + exp(-2 inf u)` with the infimum over the enlarged ball
/// `B(x, 2√10 r)`, maximized over centers, radii and ball points. Balls
/// are truncated at the chart's safe radius.
pub fn estimate_monitor(
    u: &[f64],
    problem: &ProblemSpec,
    opts: &MonitorOpts,
) -> Result<MonitorReport> {
    if u.len() != problem.num_nodes() {
        return Err(Error::Argument("field length does not match chart".into()));
    }
    let chart = problem.chart();
    let state = assemble_w_unchecked(u, &problem.metric, &problem.curv);
    let mags: Vec<f64> = (0..problem.num_nodes())
        .map(|p| state.second_order_magnitude(&problem.metric, p))
        .collect();

    let safe = chart.injectivity_safe_radius();
    let mut samples = Vec::new();
    let mut max_ratio = 0.0f64;
    for center in (0..problem.num_nodes()).step_by(opts.center_stride) {
        for &r in &opts.radii {
            let r = r.min(safe);
            let big = (2.0 * 10.0f64.sqrt() * r).min(safe);
            let inf_u = chart
                .ball(center, big)
                .iter()
                .map(|(i, _)| u[*i])
                .fold(f64::INFINITY, f64::min);
            let denom = r.powi(-2) + (-2.0 * inf_u).exp();
            let num = chart
                .ball(center, r)
                .iter()
                .map(|(i, _)| mags[*i])
                .fold(0.0f64, f64::max);
            let ratio = num / denom;
            max_ratio = max_ratio.max(ratio);
            samples.push(MonitorSample { center, radius: r, ratio });
        }
    }
    Ok(MonitorReport { max_ratio, samples })
}
