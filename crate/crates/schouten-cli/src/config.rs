//! TOML run configuration. Missing sections fall back to defaults; the
//! fully resolved structure is embedded in every report for provenance.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use schouten::conformal::ProblemSpec;
use schouten::continuation::{NewtonOpts, PsiSchedule, RunOpts};
use schouten::manifold::{build_metric, EndKind, GridChart, MetricField, MetricRecipe};
use schouten::symfuncs::SymFuncSpec;

fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub manifold: ManifoldConfig,
    pub function: FunctionConfig,
    #[serde(default)]
    pub f: FConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    /// "torus", "slab" or "warped".
    pub backend: String,
    pub n: usize,
    pub resolution: usize,
    /// "flat", "round_sphere", "hemisphere" or "perturbed".
    pub recipe: String,
    /// Base recipe for "perturbed".
    #[serde(default)]
    pub base: Option<String>,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one_u32")]
    pub mode: u32,
    /// Axis extents for grid backends (default: unit).
    #[serde(default)]
    pub extent: Option<Vec<f64>>,
    /// Boundary axis for slab charts (default: last).
    #[serde(default)]
    pub boundary_axis: Option<usize>,
}

fn one_u32() -> u32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    /// "ricci_det" or "sigma_k_root".
    pub family: String,
    #[serde(default)]
    pub k: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FConfig {
    /// "constant", "radial_cosine" (warped) or "axis_cosine" (grid).
    #[serde(default = "constant_kind")]
    pub kind: String,
    #[serde(default = "one_f64")]
    pub value: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub axis: usize,
    #[serde(default = "one_u32")]
    pub mode: u32,
}

fn constant_kind() -> String {
    "constant".into()
}

fn one_f64() -> f64 {
    1.0
}

impl Default for FConfig {
    fn default() -> Self {
        Self { kind: constant_kind(), value: 1.0, amplitude: 0.0, axis: 0, mode: 1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub ramp_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { ramp_end: 0.5 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub safeguard_margin: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub blowup_threshold: f64,
    pub t_end: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-9,
            max_newton_iters: 30,
            safeguard_margin: 1e-8,
            dt_init: 0.02,
            dt_min: 1e-4,
            dt_max: 0.25,
            blowup_threshold: -12.0,
            t_end: 1.0,
            max_steps: 100_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub dump_fields: bool,
    pub dump_metric: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: "out".into(), dump_fields: true, dump_metric: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Cone samples for the condition suite.
    pub samples: usize,
    /// Trials and amplitude for the t = 0 uniqueness surrogate.
    pub t0_trials: usize,
    pub t0_amplitude: f64,
    /// Neumann tolerance for doubling.
    pub neumann_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: 1000, t0_trials: 3, t0_amplitude: 1e-3, neumann_tol: 1e-3 }
    }
}

impl Config {
    pub fn from_path(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> anyhow::Result<Self> {
        let config: Config = toml::from_str(text).context("parsing config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.manifold.n < 3 {
            bail!("manifold.n must be >= 3");
        }
        match self.function.family.as_str() {
            "ricci_det" => {}
            "sigma_k_root" => {
                if self.function.k == 0 || self.function.k > self.manifold.n {
                    bail!(
                        "function.k must satisfy 1 <= k <= n = {}, got {}",
                        self.manifold.n,
                        self.function.k
                    );
                }
            }
            other => bail!("unknown function family {other:?}"),
        }
        if !(self.f.value > 0.0) {
            bail!("f.value must be positive");
        }
        for (name, v) in [
            ("solver.newton_tol", self.solver.newton_tol),
            ("solver.safeguard_margin", self.solver.safeguard_margin),
            ("solver.dt_init", self.solver.dt_init),
            ("solver.dt_min", self.solver.dt_min),
            ("solver.dt_max", self.solver.dt_max),
        ] {
            if !(v > 0.0) {
                bail!("{name} must be positive");
            }
        }
        Ok(())
    }

    pub fn recipe(&self) -> anyhow::Result<MetricRecipe> {
        fn named(name: &str) -> anyhow::Result<MetricRecipe> {
            Ok(match name {
                "flat" => MetricRecipe::Flat,
                "round_sphere" => MetricRecipe::RoundSphere,
                "hemisphere" => MetricRecipe::Hemisphere,
                other => bail!("unknown recipe {other:?}"),
            })
        }
        if self.manifold.recipe == "perturbed" {
            let base = self.manifold.base.as_deref().unwrap_or("flat");
            Ok(MetricRecipe::Perturbed {
                base: Box::new(named(base)?),
                amplitude: self.manifold.amplitude,
                mode: self.manifold.mode,
            })
        } else {
            named(&self.manifold.recipe)
        }
    }

    fn warped_interval(&self) -> anyhow::Result<(f64, f64, [EndKind; 2])> {
        let name = if self.manifold.recipe == "perturbed" {
            self.manifold.base.as_deref().unwrap_or("flat")
        } else {
            self.manifold.recipe.as_str()
        };
        Ok(match name {
            "hemisphere" => {
                (0.0, std::f64::consts::FRAC_PI_2, [EndKind::Pole, EndKind::Boundary])
            }
            "round_sphere" => (0.0, std::f64::consts::PI, [EndKind::Pole, EndKind::Pole]),
            other => bail!("recipe {other:?} has no warped-chart realization"),
        })
    }

    pub fn chart(&self) -> anyhow::Result<GridChart> {
        let m = &self.manifold;
        let extent = m.extent.clone().unwrap_or_else(|| vec![1.0; m.n]);
        Ok(match m.backend.as_str() {
            "torus" => GridChart::torus(m.n, m.resolution, &extent)?,
            "slab" => {
                GridChart::slab(m.n, m.resolution, &extent, m.boundary_axis.unwrap_or(m.n - 1))?
            }
            "warped" => {
                let (r_min, r_max, ends) = self.warped_interval()?;
                GridChart::warped(m.n, m.resolution, r_min, r_max, ends)?
            }
            other => bail!("unknown backend {other:?}"),
        })
    }

    /// Chart at a different resolution (refinement studies).
    pub fn chart_at(&self, resolution: usize) -> anyhow::Result<GridChart> {
        let mut scaled = self.clone();
        scaled.manifold.resolution = resolution;
        scaled.chart()
    }

    pub fn metric(&self) -> anyhow::Result<MetricField> {
        Ok(build_metric(&self.chart()?, &self.recipe()?)?)
    }

    pub fn sym_spec(&self) -> anyhow::Result<SymFuncSpec> {
        Ok(match self.function.family.as_str() {
            "ricci_det" => SymFuncSpec::ricci_det(self.manifold.n)?,
            "sigma_k_root" => SymFuncSpec::sigma_k_root(self.manifold.n, self.function.k)?,
            other => bail!("unknown function family {other:?}"),
        })
    }

    pub fn f_values(&self, chart: &GridChart) -> anyhow::Result<Vec<f64>> {
        let f = &self.f;
        let values: Vec<f64> = match f.kind.as_str() {
            "constant" => vec![f.value; chart.num_nodes()],
            "radial_cosine" => (0..chart.num_nodes())
                .map(|i| f.value + f.amplitude * (f.mode as f64 * chart.coords(i)[0]).cos())
                .collect(),
            "axis_cosine" => {
                let axis = f.axis;
                if axis >= chart.axes() {
                    bail!("f.axis {axis} out of range");
                }
                let l = chart.extent(axis);
                (0..chart.num_nodes())
                    .map(|i| {
                        let x = chart.coords(i)[axis];
                        f.value
                            + f.amplitude
                                * (2.0 * std::f64::consts::PI * f.mode as f64 * x / l).cos()
                    })
                    .collect()
            }
            other => bail!("unknown f profile {other:?}"),
        };
        if values.iter().any(|v| !(*v > 0.0)) {
            bail!("prescribed f must be positive everywhere");
        }
        Ok(values)
    }

    pub fn problem(&self) -> anyhow::Result<ProblemSpec> {
        let metric = self.metric()?;
        let f = self.f_values(&metric.chart)?;
        let psi = PsiSchedule::new(self.schedule.ramp_end)?;
        Ok(ProblemSpec::new(metric, self.sym_spec()?, f, psi)?)
    }

    pub fn newton_opts(&self) -> NewtonOpts {
        NewtonOpts {
            tol: self.solver.newton_tol,
            max_iters: self.solver.max_newton_iters,
            safeguard: self.solver.safeguard_margin,
            max_backtracks: 20,
        }
    }

    pub fn run_opts(&self) -> RunOpts {
        RunOpts {
            newton: self.newton_opts(),
            dt_init: self.solver.dt_init,
            dt_min: self.solver.dt_min,
            dt_max: self.solver.dt_max,
            t_end: self.solver.t_end,
            blowup_threshold: self.solver.blowup_threshold,
            max_steps: self.solver.max_steps,
        }
    }

    /// Output directory, honoring the `SCHOUTEN_OUTPUT_DIR` override.
    pub fn output_dir(&self) -> std::path::PathBuf {
        std::env::var("SCHOUTEN_OUTPUT_DIR")
            .map(std::path::PathBuf::from)
            .unwrap_or_else(|_| std::path::PathBuf::from(&self.outputs.directory))
    }
}
