//! Blow-up diagnostics: descent to a local extremum through shrinking
//! balls, the rescaled field `w = u - sup u`, spherical-supremum radial
//! profiles, and the least-squares fit of `ŵ` against `2 log r`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{argmin, max_value};
use crate::manifold::GridChart;

/// `w = u - sup u`, so `max w = 0`.
pub fn rescale(u: &[f64]) -> Vec<f64> {
    let m = max_value(u);
    u.iter().map(|v| v - m).collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DescentStep {
    pub node: usize,
    pub u_value: f64,
}

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub point: usize,
    pub chain: Vec<DescentStep>,
    /// Some search ball exceeded the chart's safe radius and was clipped.
    pub truncated_ball: bool,
    /// Radius of the final ball on which `u >= u(point) - 1` is certified.
    pub certified_radius: f64,
}

/// Descend from `start` through balls of radius `√ε`, `ε = e^{u(x_j)}`:
/// hop whenever some ball point drops u by more than 1, stop otherwise.
/// Terminates because u is bounded below on the grid and every hop drops
/// the value by more than 1.
pub fn locate_blowup(chart: &GridChart, u: &[f64], start: usize) -> DescentResult {
    let safe = chart.injectivity_safe_radius();
    let mut x = start;
    let mut chain = vec![DescentStep { node: x, u_value: u[x] }];
    let mut truncated = false;
    loop {
        let radius = (u[x].exp()).sqrt();
        if radius > safe {
            truncated = true;
        }
        let r_eff = radius.min(safe);
        let ball = chart.ball(x, r_eff);
        let (node, value) = ball
            .iter()
            .map(|(i, _)| (*i, u[*i]))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("ball contains its center");
        if value < u[x] - 1.0 {
            x = node;
            chain.push(DescentStep { node: x, u_value: u[x] });
        } else {
            return DescentResult { point: x, chain, truncated_ball: truncated, certified_radius: r_eff };
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileSample {
    pub r: f64,
    pub w_hat: f64,
}

/// Spherical supremum profile `ŵ(r) = sup{ w(y) : d(y, center) ∈ bin(r) }`
/// with bins of one grid spacing centered on multiples of the spacing.
/// Despite the usual name "minimal radial function", this is a supremum;
/// monotonicity is not enforced.
pub fn minimal_radial(
    chart: &GridChart,
    w: &[f64],
    center: usize,
    r_max: f64,
) -> Result<Vec<ProfileSample>> {
    if w.len() != chart.num_nodes() {
        return Err(Error::Argument("field length does not match chart".into()));
    }
    if !(r_max > 0.0) {
        return Err(Error::Argument("profile radius must be positive".into()));
    }
    if r_max > chart.injectivity_safe_radius() + 1e-12 {
        return Err(Error::Argument(format!(
            "profile radius {r_max:.3} exceeds the chart-safe radius {:.3}",
            chart.injectivity_safe_radius()
        )));
    }
    let width = chart.spacing.iter().cloned().fold(0.0f64, f64::max);
    let nbins = (r_max / width).round() as usize + 1;
    let mut sup = vec![f64::NEG_INFINITY; nbins];
    for (node, d) in chart.ball(center, r_max) {
        let bin = (d / width).round() as usize;
        if bin < nbins {
            sup[bin] = sup[bin].max(w[node]);
        }
    }
    Ok(sup
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(k, &v)| ProfileSample { r: k as f64 * width, w_hat: v })
        .collect())
}

/// Least-squares fit of `ŵ` against `log r` over a radial window; returns
/// (slope, intercept, rms residual). A blow-up profile has slope → 2.
pub fn profile_fit(
    profile: &[ProfileSample],
    window: (f64, f64),
) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|s| s.r > 0.0 && s.r >= window.0 && s.r <= window.1)
        .map(|s| (s.r.ln(), s.w_hat))
        .collect();
    if pts.len() < 5 {
        return Err(Error::Argument(format!(
            "fit window [{:.3}, {:.3}] holds {} samples, need >= 5",
            window.0,
            window.1,
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = m * sxx - sx * sx;
    if det.abs() < 1e-14 * m * sxx.abs().max(1.0) {
        return Err(Error::Argument("degenerate fit window".into()));
    }
    let slope = (m * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / m;
    let rms = (pts
        .iter()
        .map(|p| {
            let e = p.1 - slope * p.0 - intercept;
            e * e
        })
        .sum::<f64>()
        / m)
        .sqrt();
    Ok((slope, intercept, rms))
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupReport {
    /// Node index of the located blow-up candidate.
    pub point: usize,
    pub point_coords: Vec<f64>,
    /// `v = e^{-(n-2)u/2}` at the located point.
    pub v_max: f64,
    pub u_at_point: f64,
    pub descent_chain: Vec<DescentStep>,
    pub truncated_ball: bool,
    pub certified_radius: f64,
    pub profile: Vec<ProfileSample>,
    pub fitted_slope: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub fit_residual: f64,
    /// Whether u at the located point is deep enough to treat as blow-up.
    pub blowup_suspected: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct BlowupOpts {
    /// Override for the profile radius (default: chart-safe radius).
    pub profile_radius: Option<f64>,
    /// Override for the fit window (default `[4h, R/2]`: the innermost
    /// cells break the log, the far field is outside the asymptotic range).
    pub fit_window: Option<(f64, f64)>,
    /// Depth below which the located point counts as suspected blow-up.
    pub depth_threshold: f64,
}

impl Default for BlowupOpts {
    fn default() -> Self {
        Self { profile_radius: None, fit_window: None, depth_threshold: -8.0 }
    }
}

/// Full diagnostic pass: rescale, descend from the global minimizer, bin
/// the radial profile around the located point and fit the log slope.
pub fn analyze(chart: &GridChart, u: &[f64], opts: &BlowupOpts) -> Result<BlowupReport> {
    if u.len() != chart.num_nodes() {
        return Err(Error::Argument("field length does not match chart".into()));
    }
    let w = rescale(u);
    let descent = locate_blowup(chart, u, argmin(u));
    let center = descent.point;
    let r_max = opts
        .profile_radius
        .unwrap_or_else(|| chart.injectivity_safe_radius())
        .min(chart.injectivity_safe_radius());
    let profile = minimal_radial(chart, &w, center, r_max)?;
    let h = chart.spacing.iter().cloned().fold(0.0f64, f64::max);
    let window = opts.fit_window.unwrap_or((4.0 * h, r_max / 2.0));
    let (slope, intercept, rms) = profile_fit(&profile, window)?;
    let nm2 = chart.n as f64 - 2.0;
    Ok(BlowupReport {
        point: center,
        point_coords: chart.coords(center),
        v_max: (-0.5 * nm2 * u[center]).exp(),
        u_at_point: u[center],
        descent_chain: descent.chain,
        truncated_ball: descent.truncated_ball,
        certified_radius: descent.certified_radius,
        profile,
        fitted_slope: slope,
        intercept,
        fit_window: window,
        fit_residual: rms,
        blowup_suspected: u[center] < opts.depth_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::EndKind;

    fn torus() -> GridChart {
        GridChart::torus(3, 16, &[1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn rescale_examples() {
        let u = vec![5.0; 10];
        let w = rescale(&u);
        assert!(w.iter().all(|&v| v == 0.0));
        let u = vec![-1.0, 3.0, 0.5];
        let w = rescale(&u);
        assert_eq!(max_value(&w), 0.0);
        // Idempotent.
        assert_eq!(rescale(&w), w);
    }

    #[test]
    fn locate_constant_field_stays_put() {
        let chart = torus();
        let u = vec![-0.3; chart.num_nodes()];
        let res = locate_blowup(&chart, &u, 5);
        assert_eq!(res.point, 5);
        assert_eq!(res.chain.len(), 1);
    }

    #[test]
    fn locate_hops_to_deeper_well() {
        let chart = torus();
        let c_shallow = [0.3, 0.3, 0.3];
        let c_deep = [0.55, 0.55, 0.55];
        let mut u = vec![0.0; chart.num_nodes()];
        let well = |x: &[f64], c: &[f64; 3], depth: f64| -> f64 {
            let mut d2 = 0.0;
            for a in 0..3 {
                let d = (x[a] - c[a]).abs().min(1.0 - (x[a] - c[a]).abs());
                d2 += d * d;
            }
            -depth * (-d2 / 0.02).exp()
        };
        for i in 0..chart.num_nodes() {
            let x = chart.coords(i);
            u[i] = well(&x, &c_shallow, 1.3) + well(&x, &c_deep, 2.6);
        }
        // Start at the shallow minimum: ε = e^{-1.3}, √ε ≈ 0.52 clips to the
        // safe radius 0.5, which still reaches the deep well at distance
        // 0.25·√3 ≈ 0.43.
        let start = (0..chart.num_nodes())
            .filter(|&i| {
                let x = chart.coords(i);
                (x[0] - 0.3).abs() < 0.05 && (x[1] - 0.3).abs() < 0.05 && (x[2] - 0.3).abs() < 0.05
            })
            .min_by(|&a, &b| u[a].total_cmp(&u[b]))
            .unwrap();
        let res = locate_blowup(&chart, &u, start);
        assert!(res.chain.len() >= 2, "chain: {:?}", res.chain);
        // Hops drop u by more than 1.
        for pair in res.chain.windows(2) {
            assert!(pair[1].u_value < pair[0].u_value - 1.0);
        }
        // The final certificate holds.
        let ball = chart.ball(res.point, res.certified_radius);
        for (i, _) in ball {
            assert!(u[i] >= u[res.point] - 1.0);
        }
        let x = chart.coords(res.point);
        assert!((x[0] - 0.55).abs() < 0.1 && (x[1] - 0.55).abs() < 0.1);
    }

    #[test]
    fn minimal_radial_constant_field() {
        let chart = torus();
        let w = vec![1.5; chart.num_nodes()];
        let profile = minimal_radial(&chart, &w, 0, 0.4).unwrap();
        assert!(profile.iter().all(|s| s.w_hat == 1.5));
    }

    #[test]
    fn minimal_radial_exact_log_profile() {
        // On the 1-D radial chart every distance is a whole number of grid
        // spacings, so the log profile is reproduced exactly at bin centers.
        let chart =
            GridChart::warped(3, 64, 0.0, 1.0, [EndKind::Pole, EndKind::Boundary]).unwrap();
        let center = 0usize;
        let w: Vec<f64> = (0..chart.num_nodes())
            .map(|i| {
                let d = chart.distance(center, i);
                if d == 0.0 {
                    -100.0
                } else {
                    2.0 * d.ln()
                }
            })
            .collect();
        let profile = minimal_radial(&chart, &w, center, 0.9).unwrap();
        for s in profile.iter().filter(|s| s.r > 0.0) {
            assert!((s.w_hat - 2.0 * s.r.ln()).abs() < 1e-12, "r={} w={}", s.r, s.w_hat);
        }
        let (slope, _, rms) = profile_fit(&profile, (4.0 / 64.0, 0.45)).unwrap();
        assert!((slope - 2.0).abs() < 1e-9);
        assert!(rms < 1e-9);
    }

    #[test]
    fn minimal_radial_shift_invariance() {
        let chart = torus();
        let w: Vec<f64> = (0..chart.num_nodes()).map(|i| (i as f64 * 0.37).sin()).collect();
        let shifted: Vec<f64> = w.iter().map(|v| v + 2.5).collect();
        let a = minimal_radial(&chart, &w, 3, 0.4).unwrap();
        let b = minimal_radial(&chart, &shifted, 3, 0.4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y.w_hat - x.w_hat - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn minimal_radial_rejects_oversized_radius() {
        let chart = torus();
        let w = vec![0.0; chart.num_nodes()];
        assert!(minimal_radial(&chart, &w, 0, 10.0).is_err());
    }

    #[test]
    fn profile_fit_examples() {
        let prof: Vec<ProfileSample> = (1..40)
            .map(|k| {
                let r = k as f64 * 0.02;
                ProfileSample { r, w_hat: 2.0 * r.ln() }
            })
            .collect();
        let (slope, _, rms) = profile_fit(&prof, (0.02, 0.8)).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!(rms < 1e-12);

        // Perturbed log profile stays near slope 2.
        let prof2: Vec<ProfileSample> = (1..40)
            .map(|k| {
                let r = k as f64 * 0.02;
                ProfileSample { r, w_hat: 2.0 * r.ln() + 0.1 * (r.ln()).sin() }
            })
            .collect();
        let (slope2, _, _) = profile_fit(&prof2, (0.02, 0.8)).unwrap();
        assert!((slope2 - 2.0).abs() < 0.15, "slope {slope2}");

        // Constant profile fits slope 0.
        let prof3: Vec<ProfileSample> = (1..40)
            .map(|k| ProfileSample { r: k as f64 * 0.02, w_hat: 1.0 })
            .collect();
        let (slope3, _, _) = profile_fit(&prof3, (0.02, 0.8)).unwrap();
        assert!(slope3.abs() < 1e-12);

        // Too few samples.
        assert!(profile_fit(&prof[..3], (0.0, 1.0)).is_err());
    }
}
