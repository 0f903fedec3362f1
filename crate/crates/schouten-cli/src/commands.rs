//! The five subcommands. Every report embeds the fully resolved config;
//! wall-clock information goes only to the `run.log` sidecar so reports
//! stay byte-identical across reruns.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use schouten::blowup::{analyze, BlowupOpts, BlowupReport};
use schouten::conformal::generalized_sym_eigs;
use schouten::continuation::{run_path, ContinuationState, OutcomeKind};
use schouten::manifold::{
    build_metric, curvature, fd_curvature_oracle, Backend, GridChart, MetricRecipe,
};
use schouten::symfuncs::{verify_conditions, ConditionReport};

use crate::config::Config;
use crate::io;

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn log_line(dir: &Path, line: &str) {
    use std::io::Write;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    if let Ok(mut f) =
        std::fs::OpenOptions::new().create(true).append(true).open(dir.join("run.log"))
    {
        let _ = writeln!(f, "[{stamp}] {line}");
    }
}

#[derive(Serialize)]
struct VerifySymfuncReport<'a> {
    config: &'a Config,
    report: ConditionReport,
}

pub fn verify_symfunc(config: &Config) -> anyhow::Result<i32> {
    let spec = config.sym_spec()?;
    let report = verify_conditions(&spec, config.verify.samples, config.seed)?;
    let dir = config.output_dir();
    ensure_dir(&dir)?;
    let pass = report.all_pass;
    io::write_json(&dir.join("verify_symfunc_report.json"), &VerifySymfuncReport {
        config,
        report,
    })?;
    log_line(&dir, &format!("verify-symfunc pass={pass}"));
    println!("verify-symfunc: {}", if pass { "pass" } else { "FAIL" });
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct CurvatureCheckReport<'a> {
    config: &'a Config,
    coarse_resolution: usize,
    fine_resolution: usize,
    /// Max |A| over nodes for flat recipes (must be ~0).
    flat_residue: Option<f64>,
    deviation_coarse: Option<f64>,
    deviation_fine: Option<f64>,
    observed_order: Option<f64>,
    /// Max |λ - 1/2| over sampled nodes for the round-sphere profile.
    sphere_eig_error: Option<f64>,
    pass: bool,
}

/// Max deviation of Schouten eigenvalues between the analytic assembly and
/// the finite-difference Riemann oracle, over a fixed set of interior
/// nodes.
fn oracle_deviation(config: &Config, resolution: usize) -> anyhow::Result<f64> {
    let chart = config.chart_at(resolution)?;
    let metric = build_metric(&chart, &config.recipe()?)?;
    let curv = curvature(&metric)?;
    let nodes: Vec<usize> = match chart.backend {
        Backend::Warped { .. } => {
            (0..6).map(|k| resolution / 5 + k * resolution / 10).collect()
        }
        _ => {
            // A spread of interior multi-indices.
            (0..5)
                .map(|k| {
                    let mut multi = vec![2 + k; chart.axes()];
                    for (a, m) in multi.iter_mut().enumerate() {
                        *m = (*m + a) % (chart.shape[a] - 4) + 2;
                    }
                    chart.flat(&multi)
                })
                .collect()
        }
    };
    let mut worst = 0.0f64;
    for node in nodes {
        let at = fd_curvature_oracle(&metric, node)?;
        let mut from_oracle = generalized_sym_eigs(&at.metric, &at.schouten)?;
        let mut analytic = curv.schouten_eigs(&metric, node)?;
        from_oracle.sort_by(f64::total_cmp);
        analytic.sort_by(f64::total_cmp);
        for (a, b) in from_oracle.iter().zip(&analytic) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

pub fn curvature_check(config: &Config) -> anyhow::Result<i32> {
    let recipe = config.recipe()?;
    let dir = config.output_dir();
    ensure_dir(&dir)?;

    let coarse = config.manifold.resolution;
    let fine = coarse * 2;

    let mut flat_residue = None;
    let mut deviation_coarse = None;
    let mut deviation_fine = None;
    let mut observed_order = None;
    let mut sphere_eig_error = None;

    let is_flat = matches!(recipe, MetricRecipe::Flat);
    if is_flat {
        let metric = config.metric()?;
        let curv = curvature(&metric)?;
        let gc = curv.as_grid();
        let residue = gc.schouten.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        flat_residue = Some(residue);
    } else {
        let dev_c = oracle_deviation(config, coarse)?;
        let dev_f = oracle_deviation(config, fine)?;
        deviation_coarse = Some(dev_c);
        deviation_fine = Some(dev_f);
        observed_order = Some((dev_c / dev_f).log2());

        if matches!(recipe, MetricRecipe::RoundSphere | MetricRecipe::Hemisphere) {
            let metric = config.metric()?;
            let curv = curvature(&metric)?;
            let mut worst = 0.0f64;
            for node in 0..metric.chart.num_nodes() {
                for ev in curv.schouten_eigs(&metric, node)? {
                    worst = worst.max((ev - 0.5).abs());
                }
            }
            sphere_eig_error = Some(worst);
        }
    }

    let h = config.chart()?.spacing[0];
    let pass = if is_flat {
        flat_residue.unwrap() <= 1e-10
    } else {
        let order_ok = observed_order.unwrap() >= 1.8;
        let sphere_ok = sphere_eig_error.map_or(true, |e| e <= 10.0 * h * h);
        order_ok && sphere_ok
    };

    if config.outputs.dump_metric {
        let metric = config.metric()?;
        let curv = curvature(&metric)?;
        io::write_metric_csv(&dir.join("metric_curvature.csv"), &metric, &curv)?;
    }

    io::write_json(&dir.join("curvature_check_report.json"), &CurvatureCheckReport {
        config,
        coarse_resolution: coarse,
        fine_resolution: fine,
        flat_residue,
        deviation_coarse,
        deviation_fine,
        observed_order,
        sphere_eig_error,
        pass,
    })?;
    log_line(&dir, &format!("curvature-check pass={pass}"));
    println!(
        "curvature-check: {} (order {:?}, flat residue {:?})",
        if pass { "pass" } else { "FAIL" },
        observed_order,
        flat_residue
    );
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a Config,
    outcome: OutcomeKind,
    final_state: ContinuationState,
    history_len: usize,
    volume: f64,
    varsigma: f64,
}

pub fn continue_run(config: &Config) -> anyhow::Result<i32> {
    let problem = config.problem()?;
    let dir = config.output_dir();
    ensure_dir(&dir)?;
    log_line(&dir, "continue: start");

    let out = run_path(&problem, &config.run_opts())?;

    io::write_jsonl(&dir.join("history.jsonl"), &out.history)?;
    if config.outputs.dump_fields {
        io::write_field_csv(&dir.join("final_field.csv"), problem.chart(), &out.final_u, "u")?;
    }
    if config.outputs.dump_metric {
        io::write_metric_csv(&dir.join("metric_curvature.csv"), &problem.metric, &problem.curv)?;
    }
    io::write_json(&dir.join("run_report.json"), &RunReport {
        config,
        outcome: out.kind,
        final_state: out.final_state().clone(),
        history_len: out.history.len(),
        volume: problem.volume,
        varsigma: problem.varsigma,
    })?;
    log_line(&dir, &format!("continue: outcome {:?}", out.kind));

    let last = out.final_state();
    println!(
        "continue: {:?} at t = {:.6} (min u = {:.4}, residual = {:.2e}, {} accepted states)",
        out.kind,
        last.t,
        last.min_u,
        last.residual_max,
        out.history.len()
    );
    Ok(match out.kind {
        OutcomeKind::ConvergedT1 => 0,
        OutcomeKind::StepFailure => 1,
        OutcomeKind::BlowupDetected => 2,
    })
}

#[derive(Serialize)]
struct BlowupAnalyzeReport<'a> {
    config: &'a Config,
    report: &'a BlowupReport,
}

fn load_run(input: &Path, config_path: Option<&Path>) -> anyhow::Result<(Config, GridChart, Vec<f64>, PathBuf)> {
    if input.is_dir() {
        let report_path = input.join("run_report.json");
        let text = std::fs::read_to_string(&report_path)
            .with_context(|| format!("reading {}", report_path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let config: Config = serde_json::from_value(
            value.get("config").cloned().context("run_report.json lacks a config")?,
        )?;
        config.validate()?;
        let chart = config.chart()?;
        let field = io::read_field_csv(&input.join("final_field.csv"), &chart)?;
        Ok((config, chart, field, input.to_path_buf()))
    } else {
        let config_path = config_path
            .context("analyzing a bare field CSV needs --config for the chart")?;
        let config = Config::from_path(config_path)?;
        let chart = config.chart()?;
        let field = io::read_field_csv(input, &chart)?;
        let dir = config.output_dir();
        Ok((config, chart, field, dir))
    }
}

pub fn blowup_analyze(
    input: &Path,
    config_path: Option<&Path>,
    depth_threshold: Option<f64>,
) -> anyhow::Result<i32> {
    let (config, chart, field, dir) = load_run(input, config_path)?;
    ensure_dir(&dir)?;
    let opts = BlowupOpts {
        depth_threshold: depth_threshold.unwrap_or(-8.0),
        ..Default::default()
    };
    let report = analyze(&chart, &field, &opts)?;

    // Plot-ready profile: radius, spherical supremum, reference 2 log r.
    let mut csv = String::from("r,w_hat,two_log_r\n");
    for s in report.profile.iter().filter(|s| s.r > 0.0) {
        csv.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", s.r, s.w_hat, 2.0 * s.r.ln()));
    }
    std::fs::write(dir.join("profile.csv"), csv)?;
    io::write_json(&dir.join("blowup_report.json"), &BlowupAnalyzeReport {
        config: &config,
        report: &report,
    })?;
    log_line(&dir, &format!("blowup-analyze suspected={}", report.blowup_suspected));

    println!(
        "blowup-analyze: {} (point r-index {}, u = {:.4}, slope = {:.3})",
        if report.blowup_suspected { "blow-up suspected" } else { "no blow-up" },
        report.point,
        report.u_at_point,
        report.fitted_slope
    );
    Ok(0)
}

pub fn double_field_cmd(
    field_path: &Path,
    config: &Config,
    neumann_tol: Option<f64>,
    output: Option<&Path>,
) -> anyhow::Result<i32> {
    let chart = config.chart()?;
    let field = io::read_field_csv(field_path, &chart)?;
    let tol = neumann_tol.unwrap_or(config.verify.neumann_tol);
    let (doubled_chart, doubled) = schouten::manifold::double_field(&chart, &field, tol)?;
    let dir = config.output_dir();
    ensure_dir(&dir)?;
    let out_path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join("doubled_field.csv"));
    io::write_field_csv(&out_path, &doubled_chart, &doubled, "u")?;
    println!(
        "double: {} nodes -> {} nodes, wrote {}",
        chart.num_nodes(),
        doubled_chart.num_nodes(),
        out_path.display()
    );
    Ok(0)
}

