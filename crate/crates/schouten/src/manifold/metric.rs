use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::chart::{Backend, GridChart};

/// Built-in background metrics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum MetricRecipe {
    /// g = δ on torus or slab charts.
    Flat,
    /// φ(r) = sin r; the round unit sphere when the chart covers `[0, π]`.
    RoundSphere,
    /// φ(r) = sin r on `[0, π/2]`: the unit hemisphere with totally geodesic
    /// equator boundary.
    Hemisphere,
    /// Multiplicative perturbation of a base recipe. Warped bases become
    /// `φ = sin r (1 + a sin^{2m} r)`, which keeps pole regularity and
    /// `φ'(π/2) = 0`; grid bases become `(1 + a q(x)) δ` with a cosine
    /// profile `q` that is even across slab faces.
    Perturbed { base: Box<MetricRecipe>, amplitude: f64, mode: u32 },
}

#[derive(Clone, Debug)]
pub enum MetricData {
    /// Row-major n×n metric components per node.
    Grid { g: Vec<f64> },
    /// Warping profile samples and their first two derivatives at the nodes.
    /// Derivatives come from the recipe in closed form: near a pole the
    /// tangential curvature `(1 - φ'²)/(2φ²)` loses all accuracy if φ' is
    /// replaced by an O(h²) difference of the samples.
    Warped { phi: Vec<f64>, dphi: Vec<f64>, ddphi: Vec<f64>, unit_sphere_factor: bool },
}

#[derive(Clone, Debug)]
pub struct MetricField {
    pub chart: GridChart,
    pub recipe: MetricRecipe,
    pub data: MetricData,
}

impl MetricField {
    /// Metric matrix at a node. Warped charts work in the orthonormal
    /// radial/tangential frame, where the metric is the identity.
    pub fn g_at(&self, node: usize) -> DMatrix<f64> {
        match &self.data {
            MetricData::Grid { g } => {
                let n = self.chart.n;
                DMatrix::from_row_slice(n, n, &g[node * n * n..(node + 1) * n * n])
            }
            MetricData::Warped { .. } => DMatrix::identity(self.chart.n, self.chart.n),
        }
    }
}

fn warped_profile(recipe: &MetricRecipe, r: f64) -> Result<(f64, f64, f64)> {
    match recipe {
        MetricRecipe::RoundSphere | MetricRecipe::Hemisphere => {
            Ok((r.sin(), r.cos(), -r.sin()))
        }
        MetricRecipe::Perturbed { base, amplitude, mode } => {
            let (pb, dpb, ddpb) = warped_profile(base, r)?;
            // Perturbation factor 1 + a sin^{2m} r, differentiated in closed
            // form so curvature formulas stay exact.
            let a = *amplitude;
            let m = *mode as f64;
            let s = r.sin();
            let c = r.cos();
            let p = 1.0 + a * s.powf(2.0 * m);
            let dp = a * 2.0 * m * s.powf(2.0 * m - 1.0) * c;
            let ddp = a * 2.0 * m
                * ((2.0 * m - 1.0) * s.powf(2.0 * m - 2.0) * c * c
                    - s.powf(2.0 * m));
            Ok((pb * p, dpb * p + pb * dp, ddpb * p + 2.0 * dpb * dp + pb * ddp))
        }
        MetricRecipe::Flat => Err(Error::Argument(
            "flat recipe is not available on warped charts (the boundary sphere would not be totally geodesic)"
                .into(),
        )),
    }
}

fn grid_conformal_factor(recipe: &MetricRecipe, chart: &GridChart, x: &[f64]) -> Result<f64> {
    match recipe {
        MetricRecipe::Flat => Ok(1.0),
        MetricRecipe::Perturbed { base, amplitude, mode } => {
            let fb = grid_conformal_factor(base, chart, x)?;
            let m = *mode as f64;
            let mut q = 1.0;
            for a in 0..chart.axes() {
                let l = chart.extent(a);
                let arg = if chart.is_periodic_axis(a) {
                    2.0 * std::f64::consts::PI * m * x[a] / l
                } else {
                    // Even across both faces of the slab axis.
                    std::f64::consts::PI * m * x[a] / l
                };
                q *= arg.cos();
            }
            Ok(fb * (1.0 + amplitude * q))
        }
        _ => Err(Error::Argument(format!(
            "recipe {recipe:?} is not available on grid charts"
        ))),
    }
}

/// Build a metric field for a chart, validating recipe/backend
/// compatibility and positive definiteness at every node.
pub fn build_metric(chart: &GridChart, recipe: &MetricRecipe) -> Result<MetricField> {
    let nodes = chart.num_nodes();
    match &chart.backend {
        Backend::Warped { .. } => {
            let mut phi = vec![0.0; nodes];
            let mut dphi = vec![0.0; nodes];
            let mut ddphi = vec![0.0; nodes];
            for i in 0..nodes {
                let r = chart.coords(i)[0];
                let (p, dp, ddp) = warped_profile(recipe, r)?;
                if p <= 0.0 {
                    return Err(Error::DegenerateMetric { node: i });
                }
                phi[i] = p;
                dphi[i] = dp;
                ddphi[i] = ddp;
            }
            Ok(MetricField {
                chart: chart.clone(),
                recipe: recipe.clone(),
                data: MetricData::Warped { phi, dphi, ddphi, unit_sphere_factor: true },
            })
        }
        _ => {
            let n = chart.n;
            let mut g = vec![0.0; nodes * n * n];
            for i in 0..nodes {
                let x = chart.coords(i);
                let c = grid_conformal_factor(recipe, chart, &x)?;
                if c <= 0.0 {
                    return Err(Error::DegenerateMetric { node: i });
                }
                for a in 0..n {
                    g[i * n * n + a * n + a] = c;
                }
            }
            let field = MetricField {
                chart: chart.clone(),
                recipe: recipe.clone(),
                data: MetricData::Grid { g },
            };
            for i in 0..nodes {
                if field.g_at(i).clone().cholesky().is_none() {
                    return Err(Error::DegenerateMetric { node: i });
                }
            }
            Ok(field)
        }
    }
}
