//! Doubling across totally geodesic boundary faces by even reflection.
//! On the cell-centered grid the doubled field of a slab is periodic with
//! twice the extent, so the reflected stencil at a face and the doubled
//! stencil at the seam are literally the same arithmetic.

use crate::error::{Error, Result};
use crate::manifold::chart::{Backend, EndKind, GridChart};
use crate::manifold::metric::{MetricData, MetricField};

/// Discrete Neumann defect at the boundary faces: the one-sided quadratic
/// estimate of the normal derivative at the face, `(3u₁ - 2u₀ - u₂)/h`
/// from the first three cell centers. Exact for quadratics, so an
/// even-compatible smooth field registers only O(h²) here while a genuine
/// slope s registers as s.
pub fn neumann_violation(chart: &GridChart, data: &[f64]) -> Result<f64> {
    if data.len() != chart.num_nodes() {
        return Err(Error::Argument("field length does not match chart".into()));
    }
    let face_slope = |u0: f64, u1: f64, u2: f64, h: f64| (3.0 * u1 - 2.0 * u0 - u2) / h;
    let mut worst = 0.0f64;
    match &chart.backend {
        Backend::Slab { boundary_axis } => {
            let axis = *boundary_axis;
            let len = chart.shape[axis];
            let h = chart.spacing[axis];
            for idx in 0..chart.num_nodes() {
                let b = chart.multi(idx)[axis];
                if b == 0 || b == len - 1 {
                    let step = if b == 0 { 1 } else { -1 };
                    let n1 = chart.neighbor(idx, axis, step);
                    let n2 = chart.neighbor(n1, axis, step);
                    worst = worst.max(face_slope(data[idx], data[n1], data[n2], h).abs());
                }
            }
        }
        Backend::Warped { ends, .. } => {
            let res = chart.shape[0];
            let h = chart.spacing[0];
            if ends[0] == EndKind::Boundary {
                worst = worst.max(face_slope(data[0], data[1], data[2], h).abs());
            }
            if ends[1] == EndKind::Boundary {
                worst = worst
                    .max(face_slope(data[res - 1], data[res - 2], data[res - 3], h).abs());
            }
        }
        Backend::Torus => {}
    }
    Ok(worst)
}

fn doubled_chart(chart: &GridChart) -> Result<GridChart> {
    match &chart.backend {
        Backend::Slab { boundary_axis } => {
            let mut shape = chart.shape.clone();
            shape[*boundary_axis] *= 2;
            Ok(GridChart {
                n: chart.n,
                shape,
                spacing: chart.spacing.clone(),
                backend: Backend::Torus,
            })
        }
        Backend::Warped { r_min, r_max, ends } => {
            if ends[1] != EndKind::Boundary {
                return Err(Error::Argument(
                    "warped doubling needs a boundary at the outer end".into(),
                ));
            }
            let outer_end = match ends[0] {
                EndKind::Pole => EndKind::Pole,
                EndKind::Boundary => EndKind::Boundary,
            };
            Ok(GridChart {
                n: chart.n,
                shape: vec![chart.shape[0] * 2],
                spacing: chart.spacing.clone(),
                backend: Backend::Warped {
                    r_min: *r_min,
                    r_max: 2.0 * r_max - r_min,
                    ends: [ends[0], outer_end],
                },
            })
        }
        Backend::Torus => Err(Error::Argument("torus charts have no boundary to double".into())),
    }
}

fn reflect_index(chart: &GridChart, doubled: &GridChart, idx: usize) -> usize {
    match &chart.backend {
        Backend::Slab { boundary_axis } => {
            let axis = *boundary_axis;
            let len = chart.shape[axis];
            let mut multi = doubled.multi(idx);
            // Doubled coordinate runs over [-L, L]; the lower half mirrors.
            multi[axis] = if multi[axis] >= len {
                multi[axis] - len
            } else {
                len - 1 - multi[axis]
            };
            chart.flat(&multi)
        }
        Backend::Warped { .. } => {
            let len = chart.shape[0];
            let j = doubled.multi(idx)[0];
            if j < len {
                j
            } else {
                2 * len - 1 - j
            }
        }
        Backend::Torus => unreachable!(),
    }
}

/// Even reflection of a scalar field across the boundary faces. The input
/// must carry discrete Neumann data within `neumann_tol`; the restriction
/// of the output to the original chart reproduces the input exactly.
pub fn double_field(
    chart: &GridChart,
    data: &[f64],
    neumann_tol: f64,
) -> Result<(GridChart, Vec<f64>)> {
    let violation = neumann_violation(chart, data)?;
    if violation > neumann_tol {
        return Err(Error::Precondition(format!(
            "Neumann defect {violation:.3e} exceeds tolerance {neumann_tol:.3e}"
        )));
    }
    let doubled = doubled_chart(chart)?;
    let out = (0..doubled.num_nodes())
        .map(|idx| data[reflect_index(chart, &doubled, idx)])
        .collect();
    Ok((doubled, out))
}

/// Even reflection of a metric field. The doubled metric is only C^{2,1}
/// at the seam in general, so curvature near the seam carries O(h²) error.
pub fn double_metric(metric: &MetricField) -> Result<MetricField> {
    let chart = &metric.chart;
    let doubled = doubled_chart(chart)?;
    let data = match &metric.data {
        MetricData::Grid { g } => {
            let n = chart.n;
            let mut out = vec![0.0; doubled.num_nodes() * n * n];
            for idx in 0..doubled.num_nodes() {
                let src = reflect_index(chart, &doubled, idx);
                out[idx * n * n..(idx + 1) * n * n]
                    .copy_from_slice(&g[src * n * n..(src + 1) * n * n]);
            }
            MetricData::Grid { g: out }
        }
        MetricData::Warped { phi, dphi, ddphi, unit_sphere_factor } => {
            let len = chart.shape[0];
            let nodes = doubled.num_nodes();
            let mut p = vec![0.0; nodes];
            let mut dp = vec![0.0; nodes];
            let mut ddp = vec![0.0; nodes];
            for idx in 0..nodes {
                let src = reflect_index(chart, &doubled, idx);
                p[idx] = phi[src];
                // φ is extended evenly, so φ' flips sign on the mirror side.
                let sign = if idx < len { 1.0 } else { -1.0 };
                dp[idx] = sign * dphi[src];
                ddp[idx] = ddphi[src];
            }
            MetricData::Warped { phi: p, dphi: dp, ddphi: ddp, unit_sphere_factor: *unit_sphere_factor }
        }
    };
    Ok(MetricField { chart: doubled, recipe: metric.recipe.clone(), data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::metric::{build_metric, MetricRecipe};

    fn slab_chart() -> GridChart {
        GridChart::slab(3, 16, &[1.0, 1.0, 1.0], 2).unwrap()
    }

    fn even_field(chart: &GridChart) -> Vec<f64> {
        (0..chart.num_nodes())
            .map(|i| {
                let x = chart.coords(i);
                (std::f64::consts::PI * x[2]).cos() + 0.3 * (2.0 * std::f64::consts::PI * x[0]).sin()
            })
            .collect()
    }

    #[test]
    fn restriction_is_bit_exact() {
        let chart = slab_chart();
        let data = even_field(&chart);
        let (doubled, out) = double_field(&chart, &data, 1e-1).unwrap();
        assert_eq!(doubled.num_nodes(), 2 * chart.num_nodes());
        for idx in 0..doubled.num_nodes() {
            let mut multi = doubled.multi(idx);
            if multi[2] >= chart.shape[2] {
                let orig = {
                    multi[2] -= chart.shape[2];
                    chart.flat(&multi)
                };
                assert_eq!(out[idx].to_bits(), data[orig].to_bits());
            }
        }
    }

    #[test]
    fn constant_field_doubles_to_constant() {
        let chart = slab_chart();
        let data = vec![2.5; chart.num_nodes()];
        let (_, out) = double_field(&chart, &data, 1e-12).unwrap();
        assert!(out.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn neumann_violation_rejected() {
        let chart = slab_chart();
        // Slope 0.1 along the boundary axis.
        let data: Vec<f64> =
            (0..chart.num_nodes()).map(|i| 0.1 * chart.coords(i)[2]).collect();
        let v = neumann_violation(&chart, &data).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
        assert!(double_field(&chart, &data, 1e-3).is_err());
    }

    #[test]
    fn seam_differences_vanish() {
        let chart = slab_chart();
        let data = even_field(&chart);
        let (doubled, out) = double_field(&chart, &data, 1e-1).unwrap();
        let len = chart.shape[2];
        // First normal difference across the seam is exactly zero and the
        // one-sided second differences from both sides agree.
        for (i0, i1) in [(0usize, 1usize), (2, 5)] {
            let a = doubled.flat(&[i0, i1, len - 1]);
            let b = doubled.flat(&[i0, i1, len]);
            assert_eq!(out[a].to_bits(), out[b].to_bits());
            let a2 = doubled.flat(&[i0, i1, len - 2]);
            let b2 = doubled.flat(&[i0, i1, len + 1]);
            let left = out[a2] - 2.0 * out[a] + out[b];
            let right = out[b2] - 2.0 * out[b] + out[a];
            assert!((left - right).abs() < 1e-14);
        }
    }

    #[test]
    fn hemisphere_doubles_to_round_sphere() {
        let chart = GridChart::warped(
            3,
            32,
            0.0,
            std::f64::consts::FRAC_PI_2,
            [EndKind::Pole, EndKind::Boundary],
        )
        .unwrap();
        let metric = build_metric(&chart, &MetricRecipe::Hemisphere).unwrap();
        let doubled = double_metric(&metric).unwrap();
        let sphere_chart = GridChart::warped(
            3,
            64,
            0.0,
            std::f64::consts::PI,
            [EndKind::Pole, EndKind::Pole],
        )
        .unwrap();
        let sphere = build_metric(&sphere_chart, &MetricRecipe::RoundSphere).unwrap();
        if let (MetricData::Warped { phi: a, .. }, MetricData::Warped { phi: b, .. }) =
            (&doubled.data, &sphere.data)
        {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-13);
            }
        } else {
            panic!("expected warped data");
        }
    }
}
