//! Fréchet derivative of the deformed residual: an elliptic second-order
//! part `F^{ab} ∂_a∂_b` with coefficients from the spectral decomposition
//! of the augmented tensor, first-order transport from the gradient terms,
//! a zeroth-order reaction `+2ψ f e^{-2u}`, and the rank-one update from
//! differentiating the volume integral.

use nalgebra::DMatrix;

use crate::conformal::{gen_eig_pair, grid_augmented_tensor, warped_augmented_eigs, ProblemSpec};
use crate::error::{Error, Result};
use crate::symfuncs::f_gradient_slice;

/// Rank-one update `left · rightᵀ`.
#[derive(Clone, Debug)]
pub struct RankOne {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Sparse rows plus an optional rank-one update.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    pub dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
    pub rank_one: Option<RankOne>,
}

impl LinearOperator {
    fn new(dim: usize) -> Self {
        Self { dim, rows: vec![Vec::new(); dim], rank_one: None }
    }

    fn add(&mut self, row: usize, col: usize, value: f64) {
        for entry in &mut self.rows[row] {
            if entry.0 == col {
                entry.1 += value;
                return;
            }
        }
        self.rows[row].push((col, value));
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for (i, row) in self.rows.iter().enumerate() {
            let mut s = 0.0;
            for &(j, v) in row {
                s += v * x[j];
            }
            y[i] = s;
        }
        if let Some(r1) = &self.rank_one {
            let inner: f64 = r1.right.iter().zip(x).map(|(a, b)| a * b).sum();
            for (yi, li) in y.iter_mut().zip(&r1.left) {
                *yi += li * inner;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        if let Some(r1) = &self.rank_one {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    m[(i, j)] += r1.left[i] * r1.right[j];
                }
            }
        }
        m
    }

    /// Direct dense solve; the systems are desk-scale.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.to_dense().lu();
        let b = nalgebra::DVector::from_row_slice(rhs);
        let x = lu
            .solve(&b)
            .ok_or_else(|| Error::LinearSolve("singular Jacobian".into()))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite solution".into()));
        }
        Ok(x.as_slice().to_vec())
    }
}

/// Assemble the Jacobian of the residual at `(u, t)`.
pub fn linearize(u: &[f64], t: f64, problem: &ProblemSpec) -> Result<LinearOperator> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Argument(format!("homotopy parameter t = {t} outside [0, 1]")));
    }
    if u.len() != problem.num_nodes() {
        return Err(Error::Argument("field length does not match chart".into()));
    }
    let chart = problem.chart().clone();
    let n = chart.n;
    let nodes = problem.num_nodes();
    let psi_t = problem.psi.psi(t)?;
    let base = problem.varsigma * (1.0 - psi_t);

    let mut op = LinearOperator::new(nodes);

    if problem.is_warped() {
        let wc = problem.curv.as_warped();
        let h = chart.spacing[0];
        let invh2 = 1.0 / (h * h);
        let inv2h = 0.5 / h;
        let mut eigs = vec![0.0; n];
        for p in 0..nodes {
            let up = crate::conformal::d1(&chart, u, p, 0);
            let upp = crate::conformal::d2(&chart, u, p, 0);
            warped_augmented_eigs(problem, p, base, psi_t, up, upp, &mut eigs);
            let grad = f_gradient_slice(&problem.fspec, &eigs).map_err(|e| match e {
                Error::Cone(_) => Error::Inadmissible {
                    node: p,
                    margin: crate::symfuncs::cone_margin(&eigs, problem.cone),
                },
                other => other,
            })?;
            let f_rad = grad[0];
            let f_tan: f64 = grad[1..].iter().sum();
            // ∂b_rad = u'' -stencil + u' D, ∂b_tan = (φ'/φ - u') D.
            let first = f_rad * up + f_tan * (wc.dlog_phi[p] - up);
            let plus = chart.neighbor(p, 0, 1);
            let minus = chart.neighbor(p, 0, -1);
            op.add(p, plus, f_rad * invh2 + first * inv2h);
            op.add(p, minus, f_rad * invh2 - first * inv2h);
            op.add(p, p, -2.0 * f_rad * invh2);
            op.add(p, p, 2.0 * psi_t * problem.f[p] * (-2.0 * u[p]).exp());
        }
    } else {
        let gc = problem.curv.as_grid();
        let nn = n * n;
        for p in 0..nodes {
            let (bmat, du, _) = grid_augmented_tensor(problem, u, p, base, psi_t);
            let g = problem.metric.g_at(p);
            let pair = gen_eig_pair(&g, &bmat)?;
            let fgrad = f_gradient_slice(&problem.fspec, &pair.evals)?;
            // F^{ab} = Σ_m f_m v_m v_mᵀ with v_m = L⁻ᵀ q_m.
            let mut fab: DMatrix<f64> = DMatrix::zeros(n, n);
            for m in 0..n {
                let v = pair.vecs_back.column(m);
                for a in 0..n {
                    for b in 0..n {
                        fab[(a, b)] += fgrad[m] * v[a] * v[b];
                    }
                }
            }

            // First-order coefficient: -Σ F^{ab}Γ^c_{ab} + 2(F du)_c
            //                          - (F : g)(g⁻¹du)_c.
            let mut coeff1 = vec![0.0; n];
            let mut fg = 0.0;
            for a in 0..n {
                for b in 0..n {
                    fg += fab[(a, b)] * g[(a, b)];
                    for c in 0..n {
                        coeff1[c] -= fab[(a, b)] * gc.christoffel[p * n * nn + (c * n + a) * n + b];
                    }
                }
            }
            for c in 0..n {
                let mut fdu = 0.0;
                let mut ginvdu = 0.0;
                for b in 0..n {
                    fdu += fab[(c, b)] * du[b];
                    ginvdu += gc.ginv[p * nn + c * n + b] * du[b];
                }
                coeff1[c] += 2.0 * fdu - fg * ginvdu;
            }

            let mut center = 2.0 * psi_t * problem.f[p] * (-2.0 * u[p]).exp();
            for a in 0..n {
                let h = chart.spacing[a];
                let invh2 = 1.0 / (h * h);
                let inv2h = 0.5 / h;
                let plus = chart.neighbor(p, a, 1);
                let minus = chart.neighbor(p, a, -1);
                op.add(p, plus, fab[(a, a)] * invh2 + coeff1[a] * inv2h);
                op.add(p, minus, fab[(a, a)] * invh2 - coeff1[a] * inv2h);
                center -= 2.0 * fab[(a, a)] * invh2;
                for b in a + 1..n {
                    let cross = fab[(a, b)] * 0.5 / (chart.spacing[a] * chart.spacing[b]);
                    let pp = chart.offset(p, &offset_pair(n, a, 1, b, 1));
                    let pm = chart.offset(p, &offset_pair(n, a, 1, b, -1));
                    let mp = chart.offset(p, &offset_pair(n, a, -1, b, 1));
                    let mm = chart.offset(p, &offset_pair(n, a, -1, b, -1));
                    op.add(p, pp, cross);
                    op.add(p, mm, cross);
                    op.add(p, pm, -cross);
                    op.add(p, mp, -cross);
                }
            }
            op.add(p, p, center);
        }
    }

    // Nonlocal rank-one term from -(1-t)(∫e^{-(n+1)u})^{2/(n+1)}; the
    // coefficient vanishes identically at t = 1.
    if t < 1.0 {
        let np1 = n as f64 + 1.0;
        let beta = 2.0 / np1;
        let integral = problem.conformal_integral(u);
        let scale = 2.0 * (1.0 - t) * integral.powf(beta - 1.0);
        let right: Vec<f64> = u
            .iter()
            .zip(&problem.cell_volumes)
            .map(|(&ui, &v)| scale * (-np1 * ui).exp() * v)
            .collect();
        op.rank_one = Some(RankOne { left: vec![1.0; nodes], right });
    }

    Ok(op)
}

fn offset_pair(n: usize, a: usize, da: isize, b: usize, db: isize) -> Vec<isize> {
    let mut off = vec![0isize; n];
    off[a] = da;
    off[b] = db;
    off
}
