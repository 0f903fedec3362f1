//! Curvature tensors of a metric field: Christoffel symbols, Ricci, scalar
//! curvature and the Schouten tensor `A = (Ric - R g / (2(n-1))) / (n-2)`.
//!
//! Grid backends differentiate the stored metric components with
//! second-order central differences and assemble `∂Γ` analytically from
//! `∂g` and `∂²g`. Warped backends use the closed-form eigenvalues of the
//! profile: one radial direction `-φ''/φ - (1-φ'²)/(2φ²)` and `n-1`
//! tangential directions `(1-φ'²)/(2φ²)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::manifold::chart::GridChart;
use crate::manifold::metric::{MetricData, MetricField};

#[derive(Clone, Debug)]
pub struct GridCurvature {
    /// Γ^k_{ij} per node, layout `[((node*n + k)*n + i)*n + j]`.
    pub christoffel: Vec<f64>,
    /// Ric_{ij} per node, row-major n×n.
    pub ricci: Vec<f64>,
    pub scalar: Vec<f64>,
    /// Schouten A_{ij} per node, row-major n×n.
    pub schouten: Vec<f64>,
    pub ginv: Vec<f64>,
    pub sqrt_det: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct WarpedCurvature {
    /// Radial Schouten eigenvalue of `g⁻¹A` per node.
    pub a_rad: Vec<f64>,
    /// Tangential Schouten eigenvalue (multiplicity n-1) per node.
    pub a_tan: Vec<f64>,
    /// Orthonormal-frame Ricci components.
    pub ric_rad: Vec<f64>,
    pub ric_tan: Vec<f64>,
    pub scalar: Vec<f64>,
    /// φ'/φ, the tangential Hessian coefficient.
    pub dlog_phi: Vec<f64>,
    /// φ^{n-1}, the radial volume density without the sphere factor.
    pub weight: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum CurvatureBundle {
    Grid(GridCurvature),
    Warped(WarpedCurvature),
}

impl CurvatureBundle {
    pub fn as_grid(&self) -> &GridCurvature {
        match self {
            CurvatureBundle::Grid(g) => g,
            _ => panic!("grid curvature expected"),
        }
    }

    pub fn as_warped(&self) -> &WarpedCurvature {
        match self {
            CurvatureBundle::Warped(w) => w,
            _ => panic!("warped curvature expected"),
        }
    }

    /// Schouten eigenvalues of `g⁻¹A` at a node, unsorted (radial first on
    /// warped charts).
    pub fn schouten_eigs(&self, metric: &MetricField, node: usize) -> Result<Vec<f64>> {
        match self {
            CurvatureBundle::Warped(w) => {
                let n = metric.chart.n;
                let mut eigs = vec![w.a_tan[node]; n];
                eigs[0] = w.a_rad[node];
                Ok(eigs)
            }
            CurvatureBundle::Grid(gc) => {
                let n = metric.chart.n;
                let g = metric.g_at(node);
                let a = DMatrix::from_row_slice(
                    n,
                    n,
                    &gc.schouten[node * n * n..(node + 1) * n * n],
                );
                crate::conformal::generalized_sym_eigs(&g, &a)
                    .map_err(|_| Error::DegenerateMetric { node })
            }
        }
    }
}

/// Surface area of the unit d-sphere, `2 π^{(d+1)/2} / Γ((d+1)/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let k = d + 1;
    let mut gamma = if k % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut arg = if k % 2 == 0 { 2 } else { 1 };
    while arg < k {
        gamma *= arg as f64 / 2.0;
        arg += 2;
    }
    2.0 * std::f64::consts::PI.powf(k as f64 / 2.0) / gamma
}

#[inline]
fn gc(gdata: &[f64], n: usize, node: usize, i: usize, j: usize) -> f64 {
    gdata[node * n * n + i * n + j]
}

/// First derivatives `∂_k g_{ij}` at a node by central differences.
fn dg_at(chart: &GridChart, gdata: &[f64], p: usize) -> Vec<f64> {
    let n = chart.n;
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        let plus = chart.neighbor(p, k, 1);
        let minus = chart.neighbor(p, k, -1);
        let inv2h = 0.5 / chart.spacing[k];
        for i in 0..n {
            for j in 0..n {
                out[(k * n + i) * n + j] =
                    (gc(gdata, n, plus, i, j) - gc(gdata, n, minus, i, j)) * inv2h;
            }
        }
    }
    out
}

/// Second derivatives `∂_k ∂_l g_{ij}` (including mixed) at a node.
fn ddg_at(chart: &GridChart, gdata: &[f64], p: usize) -> Vec<f64> {
    let n = chart.n;
    let mut out = vec![0.0; n * n * n * n];
    for k in 0..n {
        for l in k..n {
            let vals: Vec<f64> = if k == l {
                let plus = chart.neighbor(p, k, 1);
                let minus = chart.neighbor(p, k, -1);
                let invh2 = 1.0 / (chart.spacing[k] * chart.spacing[k]);
                (0..n * n)
                    .map(|ij| {
                        (gdata[plus * n * n + ij] - 2.0 * gdata[p * n * n + ij]
                            + gdata[minus * n * n + ij])
                            * invh2
                    })
                    .collect()
            } else {
                let pp = chart.neighbor(chart.neighbor(p, k, 1), l, 1);
                let pm = chart.neighbor(chart.neighbor(p, k, 1), l, -1);
                let mp = chart.neighbor(chart.neighbor(p, k, -1), l, 1);
                let mm = chart.neighbor(chart.neighbor(p, k, -1), l, -1);
                let scale = 0.25 / (chart.spacing[k] * chart.spacing[l]);
                (0..n * n)
                    .map(|ij| {
                        (gdata[pp * n * n + ij] - gdata[pm * n * n + ij]
                            - gdata[mp * n * n + ij]
                            + gdata[mm * n * n + ij])
                            * scale
                    })
                    .collect()
            };
            for (ij, v) in vals.iter().enumerate() {
                out[(k * n + l) * n * n + ij] = *v;
                out[(l * n + k) * n * n + ij] = *v;
            }
        }
    }
    out
}

#[inline]
fn dg_get(dg: &[f64], n: usize, k: usize, i: usize, j: usize) -> f64 {
    dg[(k * n + i) * n + j]
}

#[inline]
fn ddg_get(ddg: &[f64], n: usize, k: usize, l: usize, i: usize, j: usize) -> f64 {
    ddg[(k * n + l) * n * n + i * n + j]
}

/// Γ^m_{ij} = ½ g^{ml} (∂_i g_{jl} + ∂_j g_{il} - ∂_l g_{ij}).
pub(crate) fn christoffel_from(n: usize, ginv: &DMatrix<f64>, dg: &[f64]) -> Vec<f64> {
    let mut gamma = vec![0.0; n * n * n];
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(m, l)]
                        * (dg_get(dg, n, i, j, l) + dg_get(dg, n, j, i, l)
                            - dg_get(dg, n, l, i, j));
                }
                gamma[(m * n + i) * n + j] = 0.5 * s;
            }
        }
    }
    gamma
}

pub fn curvature(metric: &MetricField) -> Result<CurvatureBundle> {
    match &metric.data {
        MetricData::Warped { phi, dphi, ddphi, .. } => {
            let chart = &metric.chart;
            let n = chart.n as f64;
            let nodes = chart.num_nodes();
            let mut out = WarpedCurvature {
                a_rad: vec![0.0; nodes],
                a_tan: vec![0.0; nodes],
                ric_rad: vec![0.0; nodes],
                ric_tan: vec![0.0; nodes],
                scalar: vec![0.0; nodes],
                dlog_phi: vec![0.0; nodes],
                weight: vec![0.0; nodes],
            };
            for i in 0..nodes {
                let (p, dp, ddp) = (phi[i], dphi[i], ddphi[i]);
                if p <= 0.0 {
                    return Err(Error::DegenerateMetric { node: i });
                }
                let xi = (1.0 - dp * dp) / (p * p);
                out.a_rad[i] = -ddp / p - 0.5 * xi;
                out.a_tan[i] = 0.5 * xi;
                out.ric_rad[i] = -(n - 1.0) * ddp / p;
                out.ric_tan[i] = -ddp / p + (n - 2.0) * xi;
                out.scalar[i] = -2.0 * (n - 1.0) * ddp / p + (n - 1.0) * (n - 2.0) * xi;
                out.dlog_phi[i] = dp / p;
                out.weight[i] = p.powi(chart.n as i32 - 1);
            }
            Ok(CurvatureBundle::Warped(out))
        }
        MetricData::Grid { g } => {
            let chart = &metric.chart;
            let n = chart.n;
            let nodes = chart.num_nodes();
            let nn = n * n;
            let mut gridc = GridCurvature {
                christoffel: vec![0.0; nodes * n * nn],
                ricci: vec![0.0; nodes * nn],
                scalar: vec![0.0; nodes],
                schouten: vec![0.0; nodes * nn],
                ginv: vec![0.0; nodes * nn],
                sqrt_det: vec![0.0; nodes],
            };
            for p in 0..nodes {
                let gm = metric.g_at(p);
                let chol = gm
                    .clone()
                    .cholesky()
                    .ok_or(Error::DegenerateMetric { node: p })?;
                let ginv = chol.inverse();
                gridc.sqrt_det[p] = chol.l().diagonal().iter().product::<f64>();

                let dg = dg_at(chart, g, p);
                let ddg = ddg_at(chart, g, p);
                let gamma = christoffel_from(n, &ginv, &dg);

                // ∂_k g^{ml} = -g^{ma} ∂_k g_{ab} g^{bl}
                let mut dginv = vec![0.0; n * nn];
                for k in 0..n {
                    for m in 0..n {
                        for l in 0..n {
                            let mut s = 0.0;
                            for a in 0..n {
                                for b in 0..n {
                                    s -= ginv[(m, a)] * dg_get(&dg, n, k, a, b) * ginv[(b, l)];
                                }
                            }
                            dginv[(k * n + m) * n + l] = s;
                        }
                    }
                }

                // ∂_k Γ^m_{ij} assembled from ∂g and ∂²g.
                let mut dgamma = vec![0.0; nn * nn];
                for k in 0..n {
                    for m in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                let mut s = 0.0;
                                for l in 0..n {
                                    s += dginv[(k * n + m) * n + l]
                                        * (dg_get(&dg, n, i, j, l) + dg_get(&dg, n, j, i, l)
                                            - dg_get(&dg, n, l, i, j));
                                    s += ginv[(m, l)]
                                        * (ddg_get(&ddg, n, k, i, j, l)
                                            + ddg_get(&ddg, n, k, j, i, l)
                                            - ddg_get(&ddg, n, k, l, i, j));
                                }
                                dgamma[((k * n + m) * n + i) * n + j] = 0.5 * s;
                            }
                        }
                    }
                }

                // Ric_{ij} = ∂_k Γ^k_{ij} - ∂_j Γ^k_{ik}
                //          + Γ^k_{kl} Γ^l_{ij} - Γ^k_{jl} Γ^l_{ik}
                let gam = |m: usize, i: usize, j: usize| gamma[(m * n + i) * n + j];
                let contracted: Vec<f64> =
                    (0..n).map(|l| (0..n).map(|k| gam(k, k, l)).sum()).collect();
                let mut ric: DMatrix<f64> = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for k in 0..n {
                            s += dgamma[((k * n + k) * n + i) * n + j];
                            s -= dgamma[((j * n + k) * n + i) * n + k];
                        }
                        for l in 0..n {
                            s += contracted[l] * gam(l, i, j);
                            for k in 0..n {
                                s -= gam(k, j, l) * gam(l, i, k);
                            }
                        }
                        ric[(i, j)] = s;
                    }
                }
                // Symmetrize away rounding.
                let ric = (ric.clone() + ric.transpose()) * 0.5;
                let r_scal = (&ginv * &ric).trace();
                let schouten =
                    (ric.clone() - gm.clone() * (r_scal / (2.0 * (n as f64 - 1.0))))
                        / (n as f64 - 2.0);

                gridc.christoffel[p * n * nn..(p + 1) * n * nn].copy_from_slice(&gamma);
                for i in 0..n {
                    for j in 0..n {
                        gridc.ricci[p * nn + i * n + j] = ric[(i, j)];
                        gridc.schouten[p * nn + i * n + j] = schouten[(i, j)];
                        gridc.ginv[p * nn + i * n + j] = ginv[(i, j)];
                    }
                }
                gridc.scalar[p] = r_scal;
            }
            Ok(CurvatureBundle::Grid(gridc))
        }
    }
}

/// Quadrature cell volumes per node: `√det g · Π h` on grids,
/// `|S^{n-1}| φ^{n-1} h` on warped charts.
pub fn cell_volumes(metric: &MetricField, curv: &CurvatureBundle) -> Vec<f64> {
    let chart = &metric.chart;
    match curv {
        CurvatureBundle::Warped(w) => {
            let area = unit_sphere_area(chart.n - 1);
            let h = chart.spacing[0];
            w.weight.iter().map(|&wi| area * wi * h).collect()
        }
        CurvatureBundle::Grid(gc) => {
            let cell: f64 = chart.spacing.iter().product();
            gc.sqrt_det.iter().map(|&s| s * cell).collect()
        }
    }
}
