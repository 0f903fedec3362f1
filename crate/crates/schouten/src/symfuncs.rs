//! Elementary symmetric polynomials, admissibility cones, and the two
//! curvature function families `σ_k^{1/k}` and the Ricci determinant
//! `σ_n^{1/n}((n-2)λ + Σλ_i)`, with first and second derivatives and a
//! numerical verification harness for the structural conditions
//! (positivity, concavity, symmetry, 1-homogeneity, the gradient lower
//! bound and the Newton-Maclaurin bound `F ≤ ϱ σ₁`).

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};

/// An ordered tuple of eigenvalues of `g⁻¹W` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenTuple {
    values: Vec<f64>,
}

impl EigenTuple {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Argument(format!(
                "eigenvalue tuple needs dimension >= 3, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite eigenvalue".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// All elementary symmetric polynomials `σ_0..σ_n` of `x`, by incremental
/// accumulation of the coefficients of `Π (s + x_i)`. O(n²) and stable,
/// unlike subset enumeration.
pub fn sigma_all(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (m, &xi) in x.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            e[j] += xi * e[j - 1];
        }
    }
    e
}

pub(crate) fn sigma_k_slice(x: &[f64], k: usize) -> f64 {
    sigma_all(x)[k]
}

/// `σ_k` of an eigenvalue tuple.
pub fn sigma_k(lam: &EigenTuple, k: usize) -> Result<f64> {
    let n = lam.n();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("sigma_k needs 1 <= k <= {n}, got {k}")));
    }
    Ok(sigma_k_slice(lam.values(), k))
}

fn without(x: &[f64], skip: usize) -> Vec<f64> {
    x.iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, &v)| v)
        .collect()
}

fn without2(x: &[f64], a: usize, b: usize) -> Vec<f64> {
    x.iter()
        .enumerate()
        .filter(|(i, _)| *i != a && *i != b)
        .map(|(_, &v)| v)
        .collect()
}

/// Gradient of `σ_k`: the i-th entry is `σ_{k-1}` of the tuple with entry i
/// removed.
pub fn sigma_k_gradient(lam: &EigenTuple, k: usize) -> Result<Vec<f64>> {
    let n = lam.n();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("sigma_k needs 1 <= k <= {n}, got {k}")));
    }
    Ok(sigma_k_gradient_slice(lam.values(), k))
}

pub(crate) fn sigma_k_gradient_slice(x: &[f64], k: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            if k == 1 {
                1.0
            } else {
                sigma_k_slice(&without(x, i), k - 1)
            }
        })
        .collect()
}

/// Admissibility cone: `Γ_k`, the trace-shifted cone `Σ_θ`, or the region of
/// nonnegative Ricci eigenvalues (which coincides with `Σ_{1/(n-2)}`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ConeSpec {
    GammaK(usize),
    SigmaTheta(f64),
    RicciPositive,
}

/// Signed cone margin: the minimum over the defining strict inequalities of
/// their left-hand sides. Positive iff strictly inside.
pub fn cone_margin(x: &[f64], cone: ConeSpec) -> f64 {
    let n = x.len();
    match cone {
        ConeSpec::GammaK(k) => {
            let e = sigma_all(x);
            let k = k.min(n);
            e[1..=k].iter().cloned().fold(f64::INFINITY, f64::min)
        }
        ConeSpec::SigmaTheta(theta) => {
            let s1: f64 = x.iter().sum();
            let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
            min + theta * s1
        }
        ConeSpec::RicciPositive => {
            let s1: f64 = x.iter().sum();
            x.iter()
                .map(|&v| (n as f64 - 2.0) * v + s1)
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Strict membership test for an admissibility cone.
pub fn cone_contains(lam: &EigenTuple, cone: ConeSpec) -> bool {
    cone_margin(lam.values(), cone) > 0.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SymFamily {
    SigmaKRoot,
    RicciDet,
}

/// One of the two built-in curvature functions, with its cone and the
/// Newton-Maclaurin constant `ϱ` (so `F(1,…,1) = n ϱ`).
#[derive(Clone, Debug, Serialize)]
pub struct SymFuncSpec {
    pub family: SymFamily,
    /// Root order; only meaningful for `SigmaKRoot`.
    pub k: usize,
    pub n: usize,
    pub rho: f64,
    /// Empirically certified lower bound for the gradient condition
    /// `∂F/∂x_i >= ε F/σ₁`, filled in by [`verify_conditions`].
    pub epsilon_c5: Option<f64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

impl SymFuncSpec {
    pub fn sigma_k_root(n: usize, k: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!("dimension must be >= 3, got {n}")));
        }
        if k == 0 || k > n {
            return Err(Error::Argument(format!("sigma_k_root needs 1 <= k <= {n}, got {k}")));
        }
        // F(1,…,1) = binom(n,k)^{1/k} = n ϱ.
        let rho = binomial(n, k).powf(1.0 / k as f64) / n as f64;
        Ok(Self { family: SymFamily::SigmaKRoot, k, n, rho, epsilon_c5: None })
    }

    pub fn ricci_det(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!("dimension must be >= 3, got {n}")));
        }
        let rho = (2 * n - 2) as f64 / n as f64;
        Ok(Self { family: SymFamily::RicciDet, k: n, n, rho, epsilon_c5: None })
    }

    pub fn cone(&self) -> ConeSpec {
        match self.family {
            SymFamily::SigmaKRoot => ConeSpec::GammaK(self.k),
            SymFamily::RicciDet => ConeSpec::RicciPositive,
        }
    }
}

fn check_dim(spec: &SymFuncSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.n {
        return Err(Error::Argument(format!(
            "tuple has length {}, spec dimension is {}",
            x.len(),
            spec.n
        )));
    }
    Ok(())
}

fn cone_error(spec: &SymFuncSpec, x: &[f64]) -> Error {
    match spec.family {
        SymFamily::SigmaKRoot => {
            let e = sigma_all(x);
            for i in 1..=spec.k {
                if e[i] <= 0.0 {
                    return Error::Cone(format!("sigma_{i} = {:.6e} <= 0", e[i]));
                }
            }
            Error::Cone("on cone boundary".into())
        }
        SymFamily::RicciDet => {
            let m = cone_margin(x, ConeSpec::RicciPositive);
            Error::Cone(format!("min Ricci eigenvalue (n-2)x_i + sigma_1 = {m:.6e} <= 0"))
        }
    }
}

/// Ricci eigenvalue map `μ_i = (n-2) x_i + Σ x_j`.
pub fn mu_map(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let s1: f64 = x.iter().sum();
    x.iter().map(|&v| (n - 2.0) * v + s1).collect()
}

/// σ_k^{1/k} at a point of Γ_k; no cone check.
fn sigma_root_eval(k: usize, x: &[f64]) -> f64 {
    sigma_k_slice(x, k).powf(1.0 / k as f64)
}

fn sigma_root_gradient(k: usize, x: &[f64]) -> Vec<f64> {
    let s = sigma_k_slice(x, k);
    let kf = k as f64;
    let scale = s.powf(1.0 / kf - 1.0) / kf;
    sigma_k_gradient_slice(x, k).iter().map(|p| scale * p).collect()
}

fn sigma_root_hessian(k: usize, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let s = sigma_k_slice(x, k);
    let kf = k as f64;
    let p: Vec<f64> = sigma_k_gradient_slice(x, k);
    let c1 = (1.0 / kf) * (1.0 / kf - 1.0) * s.powf(1.0 / kf - 2.0);
    let c2 = (1.0 / kf) * s.powf(1.0 / kf - 1.0);
    DMatrix::from_fn(n, n, |i, j| {
        let q = if i == j || k < 2 {
            0.0
        } else if k == 2 {
            1.0
        } else {
            sigma_k_slice(&without2(x, i, j), k - 2)
        };
        c1 * p[i] * p[j] + c2 * q
    })
}

/// Evaluate the curvature function at an admissible eigenvalue tuple.
pub fn f_eval(spec: &SymFuncSpec, lam: &EigenTuple) -> Result<f64> {
    f_eval_slice(spec, lam.values())
}

pub(crate) fn f_eval_slice(spec: &SymFuncSpec, x: &[f64]) -> Result<f64> {
    check_dim(spec, x)?;
    if cone_margin(x, spec.cone()) <= 0.0 {
        return Err(cone_error(spec, x));
    }
    Ok(match spec.family {
        SymFamily::SigmaKRoot => sigma_root_eval(spec.k, x),
        SymFamily::RicciDet => sigma_root_eval(spec.n, &mu_map(x)),
    })
}

/// Gradient `∂F/∂λ_i` strictly inside the cone; entries are positive there.
pub fn f_gradient(spec: &SymFuncSpec, lam: &EigenTuple) -> Result<Vec<f64>> {
    f_gradient_slice(spec, lam.values())
}

pub(crate) fn f_gradient_slice(spec: &SymFuncSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(spec, x)?;
    if cone_margin(x, spec.cone()) <= 0.0 {
        return Err(cone_error(spec, x));
    }
    Ok(match spec.family {
        SymFamily::SigmaKRoot => sigma_root_gradient(spec.k, x),
        SymFamily::RicciDet => {
            // Chain rule through μ: ∂F/∂x_i = Σ_s ∂G/∂μ_s (1 + (n-2)δ_si).
            let g = sigma_root_gradient(spec.n, &mu_map(x));
            let total: f64 = g.iter().sum();
            let nm2 = spec.n as f64 - 2.0;
            g.iter().map(|&gs| total + nm2 * gs).collect::<Vec<_>>()
        }
    })
}

/// Hessian `∂²F/∂λ_i∂λ_j`; negative semidefinite inside the cone.
pub fn f_hessian(spec: &SymFuncSpec, lam: &EigenTuple) -> Result<DMatrix<f64>> {
    f_hessian_slice(spec, lam.values())
}

pub(crate) fn f_hessian_slice(spec: &SymFuncSpec, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(spec, x)?;
    if cone_margin(x, spec.cone()) <= 0.0 {
        return Err(cone_error(spec, x));
    }
    Ok(match spec.family {
        SymFamily::SigmaKRoot => sigma_root_hessian(spec.k, x),
        SymFamily::RicciDet => {
            let n = spec.n;
            let nm2 = n as f64 - 2.0;
            let hg = sigma_root_hessian(n, &mu_map(x));
            // H_F = P H_G P with P = (n-2) I + 1 1ᵀ.
            let row: Vec<f64> = (0..n).map(|i| hg.row(i).sum()).collect();
            let total: f64 = row.iter().sum();
            DMatrix::from_fn(n, n, |i, j| {
                nm2 * nm2 * hg[(i, j)] + nm2 * (row[i] + row[j]) + total
            })
        }
    })
}

/// A symmetric curvature function that the verification harness can check.
/// The solver itself only supports the two built-in families, but plug-in
/// evaluators can be run through [`verify_conditions`].
pub trait SymmetricFunction {
    fn dim(&self) -> usize;
    fn cone(&self) -> ConeSpec;
    fn rho(&self) -> f64;
    fn eval(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>>;
    fn label(&self) -> String;
}

impl SymmetricFunction for SymFuncSpec {
    fn dim(&self) -> usize {
        self.n
    }
    fn cone(&self) -> ConeSpec {
        SymFuncSpec::cone(self)
    }
    fn rho(&self) -> f64 {
        self.rho
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        f_eval_slice(self, x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        f_gradient_slice(self, x)
    }
    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        f_hessian_slice(self, x)
    }
    fn label(&self) -> String {
        match self.family {
            SymFamily::SigmaKRoot => format!("sigma_{}^(1/{}) n={}", self.k, self.k, self.n),
            SymFamily::RicciDet => format!("ricci_det n={}", self.n),
        }
    }
}

/// Rejection-sample a point strictly inside the cone from a Gaussian
/// centered at (1,…,1). Points hugging the cone boundary are rejected too:
/// there the Hessian norm grows without bound and both the concavity
/// eigenvalue test and finite-difference comparisons lose their meaning.
pub fn sample_cone_point<R: Rng>(n: usize, cone: ConeSpec, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(1.0, 0.5).unwrap();
    for _ in 0..100_000 {
        let x: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        if cone_margin(&x, cone) > 1e-2 {
            return x;
        }
    }
    // The acceptance region around (1,…,1) has large probability for every
    // supported cone, so this is unreachable in practice.
    vec![1.0; n]
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub pass: bool,
    /// Worst observed value of the quantity the condition bounds.
    pub worst: f64,
}

/// Result of the numerical condition suite over a cone sample set.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub function: String,
    pub n: usize,
    pub sample_count: usize,
    pub seed: u64,
    /// Positivity of F on the sample set (worst = min F).
    pub positivity: ConditionCheck,
    /// Concavity: largest Hessian eigenvalue over samples.
    pub concavity: ConditionCheck,
    /// Symmetry: worst relative |F(perm x) - F(x)|, plus bitwise equality
    /// after sorting both inputs.
    pub symmetry: ConditionCheck,
    pub symmetry_bitwise: bool,
    /// Euler relation: worst relative |Σ x_i ∂_i F - F|.
    pub euler: ConditionCheck,
    /// Gradient lower bound: empirical ε = min (∂_iF σ₁ / F) (worst = ε).
    pub gradient_bound: ConditionCheck,
    pub epsilon_empirical: f64,
    /// Newton-Maclaurin bound: worst = max F/σ₁, compared against ϱ.
    pub maclaurin: ConditionCheck,
    pub rho: f64,
    /// Relative error of F(1,…,1) against n·ϱ.
    pub normalization_error: f64,
    pub all_pass: bool,
}

const CONCAVITY_TOL: f64 = 1e-10;
const EULER_TOL: f64 = 1e-8;
const MACLAURIN_TOL: f64 = 1e-12;

/// Draw points in the cone and check the six structural conditions; the
/// failures are report content, not errors.
pub fn verify_conditions<F: SymmetricFunction>(
    func: &F,
    sample_count: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if sample_count == 0 {
        return Err(Error::Argument("sample_count must be >= 1".into()));
    }
    let n = func.dim();
    let cone = func.cone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut min_f = f64::INFINITY;
    let mut max_hess_eig = f64::NEG_INFINITY;
    let mut worst_sym = 0.0f64;
    let mut bitwise = true;
    let mut worst_euler = 0.0f64;
    let mut eps = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;

    for _ in 0..sample_count {
        let x = sample_cone_point(n, cone, &mut rng);
        let fval = func.eval(&x)?;
        min_f = min_f.min(fval);

        let hess = func.hessian(&x)?;
        let sym = nalgebra::SymmetricEigen::new(hess);
        for ev in sym.eigenvalues.iter() {
            max_hess_eig = max_hess_eig.max(*ev);
        }

        let mut perm = x.clone();
        perm.shuffle(&mut rng);
        let fperm = func.eval(&perm)?;
        worst_sym = worst_sym.max((fperm - fval).abs() / fval.abs().max(1e-300));
        let mut xs = x.clone();
        let mut ps = perm.clone();
        xs.sort_by(f64::total_cmp);
        ps.sort_by(f64::total_cmp);
        let (fs, fps) = (func.eval(&xs)?, func.eval(&ps)?);
        bitwise &= fs.to_bits() == fps.to_bits();

        let grad = func.gradient(&x)?;
        let euler: f64 = x.iter().zip(&grad).map(|(xi, gi)| xi * gi).sum::<f64>() - fval;
        worst_euler = worst_euler.max(euler.abs() / fval.abs().max(1e-300));

        let s1: f64 = x.iter().sum();
        for &gi in &grad {
            eps = eps.min(gi * s1 / fval);
        }
        max_ratio = max_ratio.max(fval / s1);
    }

    let ones = vec![1.0; n];
    let f_ones = func.eval(&ones)?;
    let rho = func.rho();
    let norm_err = (f_ones - n as f64 * rho).abs() / (n as f64 * rho);

    let positivity = ConditionCheck { pass: min_f > 0.0, worst: min_f };
    let concavity = ConditionCheck { pass: max_hess_eig <= CONCAVITY_TOL, worst: max_hess_eig };
    let symmetry = ConditionCheck { pass: bitwise && worst_sym <= 1e-12, worst: worst_sym };
    let euler = ConditionCheck { pass: worst_euler <= EULER_TOL, worst: worst_euler };
    let gradient_bound = ConditionCheck { pass: eps > 0.0, worst: eps };
    let maclaurin = ConditionCheck {
        pass: max_ratio <= rho * (1.0 + MACLAURIN_TOL) && norm_err <= MACLAURIN_TOL,
        worst: max_ratio,
    };
    let all_pass = positivity.pass
        && concavity.pass
        && symmetry.pass
        && euler.pass
        && gradient_bound.pass
        && maclaurin.pass;

    Ok(ConditionReport {
        function: func.label(),
        n,
        sample_count,
        seed,
        positivity,
        concavity,
        symmetry,
        symmetry_bitwise: bitwise,
        euler,
        gradient_bound,
        epsilon_empirical: eps,
        maclaurin,
        rho,
        normalization_error: norm_err,
        all_pass,
    })
}
