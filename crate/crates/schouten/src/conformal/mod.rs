//! The conformally transformed Schouten tensor
//! `W = ∇²u + du⊗du - ½|∇u|² g + A_g`, pointwise eigenvalues of `g⁻¹W`,
//! the nonlinear residual of the deformed equation
//!
//! ```text
//! F(λ(g⁻¹[ς(1-ψ(t))g + ψ(t)A_g + ∇²u + du⊗du - ½|∇u|²g]))
//!     = ψ(t) f e^{-2u} + (1-t) (∫ e^{-(n+1)u} dV)^{2/(n+1)}
//! ```
//!
//! its linearization, and admissibility checks.

mod linearize;

pub use linearize::{linearize, LinearOperator, RankOne};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::continuation::PsiSchedule;
use crate::error::{Error, Result};
use crate::manifold::{
    cell_volumes, curvature, Backend, CurvatureBundle, GridChart, MetricField,
};
use crate::symfuncs::{
    cone_margin, f_eval_slice, ConeSpec, EigenTuple, SymFuncSpec,
};

/// Eigen-decomposition of `g⁻¹W` via Cholesky symmetrization: with
/// `g = LLᵀ`, the eigenvalues of the symmetric `L⁻¹WL⁻ᵀ`.
pub(crate) struct GenEig {
    pub evals: Vec<f64>,
    /// Columns are `L⁻ᵀ q_m`; the coefficient matrix of a symmetric
    /// function of the eigenvalues is `Σ_m f_m v_m v_mᵀ`.
    pub vecs_back: DMatrix<f64>,
}

pub(crate) fn gen_eig_pair(g: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<GenEig> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Precondition("metric not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(w)
        .ok_or_else(|| Error::LinearSolve("triangular solve".into()))?;
    let y = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::LinearSolve("triangular solve".into()))?;
    let m = (y.clone() + y.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(m);
    let vecs_back = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| Error::LinearSolve("triangular solve".into()))?;
    Ok(GenEig { evals: eig.eigenvalues.as_slice().to_vec(), vecs_back })
}

/// Eigenvalues of `g⁻¹W` in the order the decomposition produces them.
pub fn generalized_sym_eigs(g: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(gen_eig_pair(g, w)?.evals)
}

/// Eigenvalues of `g⁻¹W` at a node, sorted ascending.
pub fn eigen_pointwise(g: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<EigenTuple> {
    let mut evals = generalized_sym_eigs(g, w)?;
    evals.sort_by(f64::total_cmp);
    EigenTuple::new(evals)
}

/// The scalar field u with its derived gradient, covariant Hessian and the
/// transformed Schouten tensor W.
#[derive(Clone, Debug)]
pub enum ConformalState {
    Grid {
        u: Vec<f64>,
        /// ∂_a u per node.
        du: Vec<f64>,
        /// Covariant Hessian per node, row-major n×n.
        hess: Vec<f64>,
        /// W per node, row-major n×n.
        w: Vec<f64>,
    },
    Warped {
        u: Vec<f64>,
        /// u' per node.
        du: Vec<f64>,
        /// Hessian eigen-components: radial u'' and tangential (φ'/φ) u'.
        hess_rad: Vec<f64>,
        hess_tan: Vec<f64>,
        /// W eigen-components in the orthonormal frame.
        w_rad: Vec<f64>,
        w_tan: Vec<f64>,
    },
}

impl ConformalState {
    /// Eigenvalues of `g⁻¹W` at a node, unsorted.
    pub fn w_eigs(&self, metric: &MetricField, node: usize) -> Result<Vec<f64>> {
        match self {
            ConformalState::Warped { w_rad, w_tan, .. } => {
                let n = metric.chart.n;
                let mut eigs = vec![w_tan[node]; n];
                eigs[0] = w_rad[node];
                Ok(eigs)
            }
            ConformalState::Grid { w, .. } => {
                let n = metric.chart.n;
                let g = metric.g_at(node);
                let wm = DMatrix::from_row_slice(n, n, &w[node * n * n..(node + 1) * n * n]);
                generalized_sym_eigs(&g, &wm)
            }
        }
    }

    /// `|∇²u| + |∇u|²` at a node, with norms taken in the metric g.
    pub fn second_order_magnitude(&self, metric: &MetricField, node: usize) -> f64 {
        match self {
            ConformalState::Warped { du, hess_rad, hess_tan, .. } => {
                let n = metric.chart.n as f64;
                let h2 = hess_rad[node] * hess_rad[node]
                    + (n - 1.0) * hess_tan[node] * hess_tan[node];
                h2.sqrt() + du[node] * du[node]
            }
            ConformalState::Grid { du, hess, .. } => {
                let n = metric.chart.n;
                let g = metric.g_at(node);
                let ginv = g.clone().try_inverse().expect("metric invertible");
                let h = DMatrix::from_row_slice(n, n, &hess[node * n * n..(node + 1) * n * n]);
                let m = &ginv * &h;
                let hnorm = (&m * &m).trace().max(0.0).sqrt();
                let dv = nalgebra::DVector::from_row_slice(&du[node * n..(node + 1) * n]);
                let gradsq = (&ginv * &dv).dot(&dv);
                hnorm + gradsq
            }
        }
    }
}

/// First derivative of u along an axis with the chart's ghost handling.
#[inline]
pub(crate) fn d1(chart: &GridChart, u: &[f64], p: usize, axis: usize) -> f64 {
    let plus = chart.neighbor(p, axis, 1);
    let minus = chart.neighbor(p, axis, -1);
    (u[plus] - u[minus]) * 0.5 / chart.spacing[axis]
}

/// Second derivative of u along an axis.
#[inline]
pub(crate) fn d2(chart: &GridChart, u: &[f64], p: usize, axis: usize) -> f64 {
    let plus = chart.neighbor(p, axis, 1);
    let minus = chart.neighbor(p, axis, -1);
    (u[plus] - 2.0 * u[p] + u[minus]) / (chart.spacing[axis] * chart.spacing[axis])
}

/// Mixed second derivative along two distinct axes.
#[inline]
pub(crate) fn d1d1(chart: &GridChart, u: &[f64], p: usize, a: usize, b: usize) -> f64 {
    let pp = chart.neighbor(chart.neighbor(p, a, 1), b, 1);
    let pm = chart.neighbor(chart.neighbor(p, a, 1), b, -1);
    let mp = chart.neighbor(chart.neighbor(p, a, -1), b, 1);
    let mm = chart.neighbor(chart.neighbor(p, a, -1), b, -1);
    (u[pp] - u[pm] - u[mp] + u[mm]) * 0.25 / (chart.spacing[a] * chart.spacing[b])
}

/// Assemble the conformal Schouten tensor W of `e^{-2u} g`. Slab and
/// warped-boundary fields must satisfy the discrete Neumann condition
/// within `neumann_tol`.
pub fn assemble_w(
    u: &[f64],
    metric: &MetricField,
    curv: &CurvatureBundle,
    neumann_tol: f64,
) -> Result<ConformalState> {
    let violation = crate::manifold::neumann_violation(&metric.chart, u)?;
    if violation > neumann_tol {
        return Err(Error::Precondition(format!(
            "Neumann defect {violation:.3e} exceeds tolerance {neumann_tol:.3e}"
        )));
    }
    Ok(assemble_w_unchecked(u, metric, curv))
}

pub(crate) fn assemble_w_unchecked(
    u: &[f64],
    metric: &MetricField,
    curv: &CurvatureBundle,
) -> ConformalState {
    let chart = &metric.chart;
    let nodes = chart.num_nodes();
    match curv {
        CurvatureBundle::Warped(wc) => {
            let mut du = vec![0.0; nodes];
            let mut hess_rad = vec![0.0; nodes];
            let mut hess_tan = vec![0.0; nodes];
            let mut w_rad = vec![0.0; nodes];
            let mut w_tan = vec![0.0; nodes];
            for p in 0..nodes {
                let up = d1(chart, u, p, 0);
                let upp = d2(chart, u, p, 0);
                du[p] = up;
                hess_rad[p] = upp;
                hess_tan[p] = wc.dlog_phi[p] * up;
                w_rad[p] = upp + 0.5 * up * up + wc.a_rad[p];
                w_tan[p] = hess_tan[p] - 0.5 * up * up + wc.a_tan[p];
            }
            ConformalState::Warped { u: u.to_vec(), du, hess_rad, hess_tan, w_rad, w_tan }
        }
        CurvatureBundle::Grid(gc) => {
            let n = chart.n;
            let nn = n * n;
            let mut du = vec![0.0; nodes * n];
            let mut hess = vec![0.0; nodes * nn];
            let mut w = vec![0.0; nodes * nn];
            for p in 0..nodes {
                let grad: Vec<f64> = (0..n).map(|a| d1(chart, u, p, a)).collect();
                du[p * n..(p + 1) * n].copy_from_slice(&grad);
                // |∇u|² = g^{ab} ∂_a u ∂_b u
                let mut gradsq = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        gradsq += gc.ginv[p * nn + a * n + b] * grad[a] * grad[b];
                    }
                }
                let g = metric.g_at(p);
                for a in 0..n {
                    for b in a..n {
                        let dd = if a == b {
                            d2(chart, u, p, a)
                        } else {
                            d1d1(chart, u, p, a, b)
                        };
                        let mut cov = dd;
                        for c in 0..n {
                            cov -= gc.christoffel[p * n * nn + (c * n + a) * n + b] * grad[c];
                        }
                        hess[p * nn + a * n + b] = cov;
                        hess[p * nn + b * n + a] = cov;
                        let wab = cov + grad[a] * grad[b] - 0.5 * gradsq * g[(a, b)]
                            + gc.schouten[p * nn + a * n + b];
                        w[p * nn + a * n + b] = wab;
                        w[p * nn + b * n + a] = wab;
                    }
                }
            }
            ConformalState::Grid { u: u.to_vec(), du, hess, w }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub all_admissible: bool,
    pub worst_node: usize,
    /// Minimum over nodes of the cone margin of λ(g⁻¹W).
    pub worst_margin: f64,
    /// Minimum eigenvalue of `W + σ₁(W) g/(n-2)` over nodes.
    pub ineq_min_eig: f64,
    /// Whether `W + σ₁(W) g/(n-2) ≥ 0` holds within the given slack.
    pub ineq_holds: bool,
}

/// Evaluate λ(g⁻¹W) per node against a cone, and the nonnegativity of
/// `W + σ₁(W) g/(n-2)` within `ineq_tol`.
pub fn admissibility(
    u: &[f64],
    problem: &ProblemSpec,
    cone: ConeSpec,
    ineq_tol: f64,
) -> Result<AdmissibilityReport> {
    let state = assemble_w_unchecked(u, &problem.metric, &problem.curv);
    admissibility_of_state(&state, &problem.metric, cone, ineq_tol)
}

pub fn admissibility_of_state(
    state: &ConformalState,
    metric: &MetricField,
    cone: ConeSpec,
    ineq_tol: f64,
) -> Result<AdmissibilityReport> {
    let n = metric.chart.n as f64;
    let mut worst_margin = f64::INFINITY;
    let mut worst_node = 0;
    let mut ineq_min = f64::INFINITY;
    for p in 0..metric.chart.num_nodes() {
        let eigs = state.w_eigs(metric, p)?;
        let margin = cone_margin(&eigs, cone);
        if margin < worst_margin {
            worst_margin = margin;
            worst_node = p;
        }
        let s1: f64 = eigs.iter().sum();
        let min_shifted = eigs
            .iter()
            .map(|&l| l + s1 / (n - 2.0))
            .fold(f64::INFINITY, f64::min);
        ineq_min = ineq_min.min(min_shifted);
    }
    Ok(AdmissibilityReport {
        all_admissible: worst_margin > 0.0,
        worst_node,
        worst_margin,
        ineq_min_eig: ineq_min,
        ineq_holds: ineq_min >= -ineq_tol,
    })
}

/// Everything the deformed equation needs: the background geometry, the
/// curvature function, the prescribed f, the ramp ψ and the constant ς.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub metric: MetricField,
    pub curv: CurvatureBundle,
    pub fspec: SymFuncSpec,
    pub cone: ConeSpec,
    pub f: Vec<f64>,
    pub psi: PsiSchedule,
    pub varsigma: f64,
    pub cell_volumes: Vec<f64>,
    pub volume: f64,
}

impl ProblemSpec {
    pub fn new(
        metric: MetricField,
        fspec: SymFuncSpec,
        f: Vec<f64>,
        psi: PsiSchedule,
    ) -> Result<Self> {
        let nodes = metric.chart.num_nodes();
        if f.len() != nodes {
            return Err(Error::Argument("f must have one value per node".into()));
        }
        if f.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Argument("prescribed f must be positive everywhere".into()));
        }
        if fspec.n != metric.chart.n {
            return Err(Error::Argument(format!(
                "function dimension {} does not match chart dimension {}",
                fspec.n, metric.chart.n
            )));
        }
        let curv = curvature(&metric)?;
        let cv = cell_volumes(&metric, &curv);
        let volume: f64 = cv.iter().sum();
        let varsigma = crate::continuation::varsigma_from_volume(volume, &fspec);
        let cone = fspec.cone();
        Ok(Self { metric, curv, fspec, cone, f, psi, varsigma, cell_volumes: cv, volume })
    }

    pub fn num_nodes(&self) -> usize {
        self.metric.chart.num_nodes()
    }

    pub fn chart(&self) -> &GridChart {
        &self.metric.chart
    }

    /// `∫ e^{-(n+1)u} dV_g` by the chart quadrature.
    pub fn conformal_integral(&self, u: &[f64]) -> f64 {
        let np1 = self.metric.chart.n as f64 + 1.0;
        u.iter()
            .zip(&self.cell_volumes)
            .map(|(&ui, &v)| (-np1 * ui).exp() * v)
            .sum()
    }

    pub(crate) fn is_warped(&self) -> bool {
        matches!(self.metric.chart.backend, Backend::Warped { .. })
    }
}

/// Residual values plus the diagnostics the Newton safeguard needs.
#[derive(Clone, Debug)]
pub struct ResidualEval {
    pub values: Vec<f64>,
    pub min_margin: f64,
    pub worst_node: usize,
    /// `∫ e^{-(n+1)u} dV`.
    pub integral: f64,
    /// The same integral raised to `2/(n+1)`.
    pub integral_pow: f64,
}

/// Eigenvalue tuple of the augmented tensor at one node of a warped chart.
#[inline]
pub(crate) fn warped_augmented_eigs(
    problem: &ProblemSpec,
    p: usize,
    base: f64,
    psi_t: f64,
    up: f64,
    upp: f64,
    out: &mut [f64],
) {
    let wc = problem.curv.as_warped();
    let b_rad = base + psi_t * wc.a_rad[p] + upp + 0.5 * up * up;
    let b_tan = base + psi_t * wc.a_tan[p] + wc.dlog_phi[p] * up - 0.5 * up * up;
    out[0] = b_rad;
    for v in out.iter_mut().skip(1) {
        *v = b_tan;
    }
}

/// Augmented tensor at one node of a grid chart, together with the metric.
pub(crate) fn grid_augmented_tensor(
    problem: &ProblemSpec,
    u: &[f64],
    p: usize,
    base: f64,
    psi_t: f64,
) -> (DMatrix<f64>, Vec<f64>, f64) {
    let chart = &problem.metric.chart;
    let gc = problem.curv.as_grid();
    let n = chart.n;
    let nn = n * n;
    let grad: Vec<f64> = (0..n).map(|a| d1(chart, u, p, a)).collect();
    let mut gradsq = 0.0;
    for a in 0..n {
        for b in 0..n {
            gradsq += gc.ginv[p * nn + a * n + b] * grad[a] * grad[b];
        }
    }
    let g = problem.metric.g_at(p);
    let mut bmat: DMatrix<f64> = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let dd = if a == b { d2(chart, u, p, a) } else { d1d1(chart, u, p, a, b) };
            let mut cov = dd;
            for c in 0..n {
                cov -= gc.christoffel[p * n * nn + (c * n + a) * n + b] * grad[c];
            }
            let v = base * g[(a, b)] + psi_t * gc.schouten[p * nn + a * n + b] + cov
                + grad[a] * grad[b]
                - 0.5 * gradsq * g[(a, b)];
            bmat[(a, b)] = v;
            bmat[(b, a)] = v;
        }
    }
    (bmat, grad, gradsq)
}

/// Evaluate the residual of the deformed equation at parameter `t`,
/// together with the worst cone margin of the augmented tensor. Fails with
/// an inadmissibility error as soon as a node leaves the cone, since F is
/// undefined there.
pub fn eval_residual(u: &[f64], t: f64, problem: &ProblemSpec) -> Result<ResidualEval> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Argument(format!("homotopy parameter t = {t} outside [0, 1]")));
    }
    if u.len() != problem.num_nodes() {
        return Err(Error::Argument("field length does not match chart".into()));
    }
    let n = problem.metric.chart.n;
    let psi_t = problem.psi.psi(t)?;
    let base = problem.varsigma * (1.0 - psi_t);
    let integral = problem.conformal_integral(u);
    let integral_pow = integral.powf(2.0 / (n as f64 + 1.0));
    let nonlocal = (1.0 - t) * integral_pow;

    let nodes = problem.num_nodes();
    let mut values = vec![0.0; nodes];
    let mut min_margin = f64::INFINITY;
    let mut worst_node = 0;

    if problem.is_warped() {
        let chart = &problem.metric.chart;
        let mut eigs = vec![0.0; n];
        for p in 0..nodes {
            let up = d1(chart, u, p, 0);
            let upp = d2(chart, u, p, 0);
            warped_augmented_eigs(problem, p, base, psi_t, up, upp, &mut eigs);
            let margin = cone_margin(&eigs, problem.cone);
            if margin < min_margin {
                min_margin = margin;
                worst_node = p;
            }
            if margin <= 0.0 {
                return Err(Error::Inadmissible { node: p, margin });
            }
            let fv = f_eval_slice(&problem.fspec, &eigs)?;
            values[p] = fv - psi_t * problem.f[p] * (-2.0 * u[p]).exp() - nonlocal;
        }
    } else {
        for p in 0..nodes {
            let (bmat, _, _) = grid_augmented_tensor(problem, u, p, base, psi_t);
            let g = problem.metric.g_at(p);
            let eigs = generalized_sym_eigs(&g, &bmat)?;
            let margin = cone_margin(&eigs, problem.cone);
            if margin < min_margin {
                min_margin = margin;
                worst_node = p;
            }
            if margin <= 0.0 {
                return Err(Error::Inadmissible { node: p, margin });
            }
            let fv = f_eval_slice(&problem.fspec, &eigs)?;
            values[p] = fv - psi_t * problem.f[p] * (-2.0 * u[p]).exp() - nonlocal;
        }
    }

    Ok(ResidualEval { values, min_margin, worst_node, integral, integral_pow })
}

/// Residual field of the deformed equation.
pub fn residual(u: &[f64], t: f64, problem: &ProblemSpec) -> Result<Vec<f64>> {
    Ok(eval_residual(u, t, problem)?.values)
}
