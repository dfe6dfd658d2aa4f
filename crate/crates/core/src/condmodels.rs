//! Conditional models `F(x | z~)` for one chained variable.
//!
//! Families and their optimizers:
//!
//! | family                 | fit                                               |
//! |------------------------|---------------------------------------------------|
//! | `linear_residual_ecdf` | least squares, error law = ECDF of raw residuals  |
//! | `gaussian_linear`      | least squares, `sigma^2 = RSS / n`                |
//! | `logistic`             | IRLS with step halving                            |
//! | `poisson`              | IRLS with step halving                            |
//! | `negbin`               | IRLS on the mean alternated with Newton on `log theta`, then a joint Newton polish |
//! | `zip`, `zinb`          | EM (logistic zero component, count component), then a joint Newton polish |
//!
//! Every optimizer only accepts steps that do not decrease the log-likelihood,
//! and records the log-likelihood after every iteration in
//! [`ConditionalModel::loglik_trace`].
//!
//! Parameter layout used by [`ConditionalModel::params`] and
//! [`loglik_and_score`]: linear families `[beta.., ln sigma]`, logistic and
//! poisson `[beta..]`, negbin `[beta.., ln theta]`, zip `[beta.., gamma..]`,
//! zinb `[beta.., gamma.., ln theta]`, where `gamma` are the logit coefficients
//! of the structural-zero probability.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::empdist::{DiscreteCdfPair, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::tabular::ColumnKind;

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-6;
const REL_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 50;
/// EM hands over to the joint Newton polish once an iteration improves the
/// log-likelihood by less than this relative amount.
const EM_HANDOVER_TOL: f64 = 1e-6;
const EM_MAX_ITER: usize = 30;
/// Count CDFs stop summing pmf terms once this much mass is covered.
const TAIL_MASS: f64 = 1e-12;
const ETA_MAX: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LinearResidualEcdf,
    GaussianLinear,
    Logistic,
    Poisson,
    #[serde(rename = "negbin")]
    NegBin,
    Zip,
    Zinb,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::LinearResidualEcdf,
        Family::GaussianLinear,
        Family::Logistic,
        Family::Poisson,
        Family::NegBin,
        Family::Zip,
        Family::Zinb,
    ];

    pub const COUNT: [Family; 4] = [Family::Poisson, Family::NegBin, Family::Zip, Family::Zinb];

    pub fn is_discrete(self) -> bool {
        !matches!(self, Family::LinearResidualEcdf | Family::GaussianLinear)
    }

    pub fn is_count(self) -> bool {
        matches!(self, Family::Poisson | Family::NegBin | Family::Zip | Family::Zinb)
    }

    pub fn accepts(self, kind: ColumnKind) -> bool {
        match self {
            Family::LinearResidualEcdf | Family::GaussianLinear => kind == ColumnKind::Continuous,
            Family::Logistic => kind == ColumnKind::Binary,
            _ => kind == ColumnKind::Count,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::LinearResidualEcdf => "linear_residual_ecdf",
            Family::GaussianLinear => "gaussian_linear",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
            Family::NegBin => "negbin",
            Family::Zip => "zip",
            Family::Zinb => "zinb",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Regressors for one conditional model; column 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    x: DMatrix<f64>,
}

impl DesignMatrix {
    pub const INTERCEPT: &'static str = "(intercept)";

    pub fn intercept_only(n_rows: usize) -> Self {
        DesignMatrix {
            names: vec![Self::INTERCEPT.to_string()],
            x: DMatrix::from_element(n_rows, 1, 1.0),
        }
    }

    /// Intercept followed by the given columns.
    pub fn from_columns(n_rows: usize, columns: &[(String, Vec<f64>)]) -> Result<Self> {
        let mut names = vec![Self::INTERCEPT.to_string()];
        let mut x = DMatrix::from_element(n_rows, columns.len() + 1, 1.0);
        for (j, (name, values)) in columns.iter().enumerate() {
            if values.len() != n_rows {
                return Err(Error::LengthMismatch(format!(
                    "design column `{name}` has {} rows, expected {n_rows}",
                    values.len()
                )));
            }
            names.push(name.clone());
            x.column_mut(j + 1).copy_from_slice(values);
        }
        Ok(DesignMatrix { names, x })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_cols()).map(|j| self.x[(i, j)]).collect()
    }

    /// Fails when the columns are (numerically) linearly dependent.
    pub fn check_rank(&self) -> Result<()> {
        let (n, p) = self.x.shape();
        if n < p {
            return Err(Error::RankDeficient(format!("{n} rows for {p} columns")));
        }
        let mut scaled = self.x.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::RankDeficient(format!(
                    "column `{}` is identically zero",
                    self.names[j]
                )));
            }
            col /= norm;
        }
        let gram = scaled.transpose() * &scaled;
        let eig = SymmetricEigen::new(gram);
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if min <= max * 1e-11 {
            return Err(Error::RankDeficient(format!(
                "condition ratio {:.3e} over columns {:?}",
                min / max,
                self.names
            )));
        }
        Ok(())
    }
}

/// AIC of one candidate in a count-model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateAic {
    pub family: Family,
    /// `None` when the candidate failed to fit.
    pub aic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalModel {
    pub family: Family,
    pub design_names: Vec<String>,
    /// Mean (linear families), logit (logistic) or log-mean (count families) coefficients.
    pub coefficients: Vec<f64>,
    /// Logit coefficients of the structural-zero probability (zip/zinb).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_dist: Option<EmpiricalDistribution>,
    pub loglik: f64,
    pub aic: f64,
    pub n_obs: usize,
    pub iterations: usize,
    pub gradient_sup_norm: f64,
    /// Asymptotic standard errors in [`params`](Self::params) order.
    pub std_errors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Vec<CandidateAic>>,
    #[serde(skip)]
    pub loglik_trace: Vec<f64>,
}

impl ConditionalModel {
    fn base(family: Family, design: &DesignMatrix, coefficients: Vec<f64>) -> Self {
        ConditionalModel {
            family,
            design_names: design.names().to_vec(),
            coefficients,
            zero_coefficients: None,
            sigma: None,
            theta: None,
            residual_dist: None,
            loglik: f64::NAN,
            aic: f64::NAN,
            n_obs: design.n_rows(),
            iterations: 0,
            gradient_sup_norm: f64::NAN,
            std_errors: Vec::new(),
            selection: None,
            loglik_trace: Vec::new(),
        }
    }

    /// Flattened parameter vector (see module docs for the layout).
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.coefficients.clone();
        if let Some(g) = &self.zero_coefficients {
            p.extend_from_slice(g);
        }
        if let Some(s) = self.sigma {
            p.push(s.ln());
        }
        if let Some(t) = self.theta {
            p.push(t.ln());
        }
        p
    }

    pub fn n_params(&self) -> usize {
        self.params().len()
    }

    fn check_layout(&self, covariates: &[f64]) -> Result<()> {
        if covariates.len() != self.coefficients.len() {
            return Err(Error::LayoutMismatch {
                expected: self.coefficients.len(),
                got: covariates.len(),
            });
        }
        Ok(())
    }

    /// Linear predictor of the mean / count component.
    pub fn linear_predictor(&self, covariates: &[f64]) -> Result<f64> {
        self.check_layout(covariates)?;
        Ok(dot(covariates, &self.coefficients))
    }

    fn zero_prob(&self, covariates: &[f64]) -> f64 {
        match &self.zero_coefficients {
            Some(g) => sigmoid(dot(covariates, g)),
            None => 0.0,
        }
    }

    fn count_mean(&self, covariates: &[f64]) -> f64 {
        dot(covariates, &self.coefficients).min(ETA_MAX).exp()
    }

    /// `P[X = k | covariates]` for discrete families.
    pub fn pmf(&self, k: f64, covariates: &[f64]) -> Result<f64> {
        self.check_layout(covariates)?;
        self.check_support(k)?;
        Ok(match self.family {
            Family::Logistic => {
                let p1 = sigmoid(dot(covariates, &self.coefficients));
                if k == 1.0 {
                    p1
                } else {
                    1.0 - p1
                }
            }
            _ => {
                let mu = self.count_mean(covariates);
                let pi = self.zero_prob(covariates);
                let f = count_log_pmf(k, mu, self.theta).exp();
                if k == 0.0 {
                    pi + (1.0 - pi) * f
                } else {
                    (1.0 - pi) * f
                }
            }
        })
    }

    fn check_support(&self, x: f64) -> Result<()> {
        let ok = match self.family {
            Family::Logistic => x == 0.0 || x == 1.0,
            f if f.is_count() => x >= 0.0 && x.fract() == 0.0 && x.is_finite(),
            family => return Err(Error::ContinuousFamily { family }),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutsideSupport {
                family: self.family,
                value: x,
            })
        }
    }

    /// `F(x | covariates)`.
    pub fn cdf(&self, x: f64, covariates: &[f64]) -> Result<f64> {
        self.check_layout(covariates)?;
        let eta = dot(covariates, &self.coefficients);
        Ok(match self.family {
            Family::LinearResidualEcdf => {
                let dist = self.residual_dist.as_ref().expect("residual ecdf present");
                dist.cdf(snap_residual(x - eta, self.residual_quantum()))
            }
            Family::GaussianLinear => {
                let z = (x - eta) / self.sigma.expect("sigma present");
                0.5 * erfc(-z / std::f64::consts::SQRT_2)
            }
            Family::Logistic => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - sigmoid(eta)
                } else {
                    1.0
                }
            }
            _ => {
                if x < 0.0 {
                    0.0
                } else {
                    self.count_cdf_pair(x.floor(), covariates).1
                }
            }
        })
    }

    /// `(F(x-), F(x))` where `x-` is the largest support point below `x`.
    pub fn cdf_pair(&self, x: f64, covariates: &[f64]) -> Result<DiscreteCdfPair> {
        self.check_layout(covariates)?;
        self.check_support(x)?;
        let (lower, upper) = match self.family {
            Family::Logistic => {
                let p0 = 1.0 - sigmoid(dot(covariates, &self.coefficients));
                if x == 0.0 {
                    (0.0, p0)
                } else {
                    (p0, 1.0)
                }
            }
            _ => self.count_cdf_pair(x, covariates),
        };
        DiscreteCdfPair::new(lower, upper.min(1.0))
    }

    fn count_cdf_pair(&self, x: f64, covariates: &[f64]) -> (f64, f64) {
        let mu = self.count_mean(covariates);
        let pi = self.zero_prob(covariates);
        let mut cum = 0.0;
        let mut k = 0.0;
        let mut log_f = count_log_pmf(0.0, mu, self.theta);
        loop {
            let f = log_f.exp();
            let p = if k == 0.0 { pi + (1.0 - pi) * f } else { (1.0 - pi) * f };
            if k == x {
                return (cum, cum + p);
            }
            cum += p;
            if cum > 1.0 - TAIL_MASS {
                return (1.0, 1.0);
            }
            log_f += count_log_ratio(k, mu, self.theta);
            k += 1.0;
        }
    }

    fn residual_quantum(&self) -> f64 {
        self.sigma.map_or(0.0, residual_quantum_for)
    }
}

/// Fits `family` to `response` given `design`.
pub fn fit(family: Family, response: &[f64], design: &DesignMatrix) -> Result<ConditionalModel> {
    if response.len() != design.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "response has {} values, design has {} rows",
            response.len(),
            design.n_rows()
        )));
    }
    if response.is_empty() {
        return Err(Error::EmptyInput("response"));
    }
    check_response(family, response)?;
    design.check_rank()?;
    let mut model = match family {
        Family::LinearResidualEcdf | Family::GaussianLinear => fit_linear(family, response, design)?,
        Family::Logistic => fit_logistic(response, design)?,
        Family::Poisson => fit_poisson(response, design)?,
        Family::NegBin => fit_negbin(response, design)?,
        Family::Zip | Family::Zinb => fit_zero_inflated(family, response, design)?,
    };
    model.aic = 2.0 * model.n_params() as f64 - 2.0 * model.loglik;
    Ok(model)
}

/// Fits every count family and keeps the one with the smallest AIC.
pub fn select_count_model(response: &[f64], design: &DesignMatrix) -> Result<ConditionalModel> {
    let mut best: Option<ConditionalModel> = None;
    let mut table = Vec::new();
    for family in Family::COUNT {
        match fit(family, response, design) {
            Ok(m) => {
                table.push(CandidateAic {
                    family,
                    aic: Some(m.aic),
                    error: None,
                });
                if best.as_ref().is_none_or(|b| m.aic < b.aic) {
                    best = Some(m);
                }
            }
            Err(e) => table.push(CandidateAic {
                family,
                aic: None,
                error: Some(e.to_string()),
            }),
        }
    }
    match best {
        Some(mut m) => {
            m.selection = Some(table);
            Ok(m)
        }
        None => Err(Error::AllFitsFailed(
            table
                .iter()
                .map(|c| format!("{}: {}", c.family, c.error.as_deref().unwrap_or("?")))
                .collect::<Vec<_>>()
                .join("; "),
        )),
    }
}

pub fn conditional_cdf(model: &ConditionalModel, x: f64, covariates: &[f64]) -> Result<f64> {
    model.cdf(x, covariates)
}

pub fn discrete_cdf_pair(
    model: &ConditionalModel,
    x: f64,
    covariates: &[f64],
) -> Result<DiscreteCdfPair> {
    model.cdf_pair(x, covariates)
}

/// Log-likelihood and its gradient at `params` (module-doc layout).
pub fn loglik_and_score(
    family: Family,
    params: &[f64],
    response: &[f64],
    design: &DesignMatrix,
) -> Result<(f64, Vec<f64>)> {
    let x = design.matrix();
    let p = design.n_cols();
    let expected = match family {
        Family::LinearResidualEcdf | Family::GaussianLinear | Family::NegBin => p + 1,
        Family::Logistic | Family::Poisson => p,
        Family::Zip => 2 * p,
        Family::Zinb => 2 * p + 1,
    };
    if params.len() != expected {
        return Err(Error::LayoutMismatch {
            expected,
            got: params.len(),
        });
    }
    let out = match family {
        Family::LinearResidualEcdf | Family::GaussianLinear => {
            Some(gaussian_loglik_score(x, response, &params[..p], params[p]))
        }
        Family::Logistic => Some(glm_loglik_score(Glm::Logit, x, response, None, params)),
        Family::Poisson => Some(glm_loglik_score(Glm::Poisson, x, response, None, params)),
        Family::NegBin => negbin_loglik_score(x, response, None, &params[..p], params[p]),
        Family::Zip | Family::Zinb => zi_loglik_score(family, x, response, params),
    };
    out.ok_or_else(|| Error::InvalidParameter("log-likelihood is not finite at these parameters".into()))
}

fn check_response(family: Family, y: &[f64]) -> Result<()> {
    let bad = |reason: &str| Error::IncompatibleResponse {
        family,
        reason: reason.to_string(),
    };
    match family {
        Family::LinearResidualEcdf | Family::GaussianLinear => {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite value"));
            }
        }
        Family::Logistic => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(bad("values must be 0 or 1"));
            }
        }
        _ => {
            if y.iter().any(|&v| !(v >= 0.0 && v.fract() == 0.0 && v.is_finite())) {
                return Err(bad("values must be non-negative integers"));
            }
            if y.iter().all(|&v| v == 0.0) {
                return Err(bad("all values are zero"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// numerical helpers
// ---------------------------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Row-wise linear predictor; same summation order as [`dot`].
fn linpred(x: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    let mut eta = vec![0.0; x.nrows()];
    for (j, b) in beta.iter().enumerate() {
        for (i, e) in eta.iter_mut().enumerate() {
            *e += x[(i, j)] * b;
        }
    }
    eta
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn ln_factorial(k: f64) -> f64 {
    const CACHED: usize = 1024;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    if k >= 0.0 && k < CACHED as f64 && k.fract() == 0.0 {
        let table = TABLE.get_or_init(|| (0..CACHED).map(|i| ln_gamma(i as f64 + 1.0)).collect());
        table[k as usize]
    } else {
        ln_gamma(k + 1.0)
    }
}

/// `ln Gamma(y + theta) - ln Gamma(theta)` for integer `y`.
fn ln_gamma_ratio(y: f64, theta: f64) -> f64 {
    if y <= 1000.0 {
        (0..y as u64).map(|k| (theta + k as f64).ln()).sum()
    } else {
        ln_gamma(y + theta) - ln_gamma(theta)
    }
}

/// `digamma(y + theta) - digamma(theta)` for integer `y`.
fn digamma_diff(y: f64, theta: f64) -> f64 {
    if y <= 1000.0 {
        (0..y as u64).map(|k| 1.0 / (theta + k as f64)).sum()
    } else {
        digamma(y + theta) - digamma(theta)
    }
}

/// `trigamma(y + theta) - trigamma(theta)` for integer `y`.
fn trigamma_diff(y: f64, theta: f64) -> f64 {
    if y <= 1000.0 {
        -(0..y as u64).map(|k| (theta + k as f64).powi(-2)).sum::<f64>()
    } else {
        trigamma(y + theta) - trigamma(theta)
    }
}

fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x + x2 / 2.0
        + (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0))) / (x * x * x)
}

fn negbin_log_pmf(y: f64, mu: f64, theta: f64) -> f64 {
    ln_gamma_ratio(y, theta) - y * (theta + mu).ln() + y * mu.ln()
        - ln_factorial(y)
        - theta * (mu / theta).ln_1p()
}

fn count_log_pmf(k: f64, mu: f64, theta: Option<f64>) -> f64 {
    match theta {
        None => k * mu.ln() - mu - ln_factorial(k),
        Some(t) => negbin_log_pmf(k, mu, t),
    }
}

/// `ln f(k+1) - ln f(k)`.
fn count_log_ratio(k: f64, mu: f64, theta: Option<f64>) -> f64 {
    match theta {
        None => mu.ln() - (k + 1.0).ln(),
        Some(t) => ((k + t) / (k + 1.0)).ln() + (mu / (t + mu)).ln(),
    }
}

fn residual_quantum_for(scale: f64) -> f64 {
    if scale <= 0.0 || !scale.is_finite() {
        return 0.0;
    }
    2f64.powi((scale * 1e-9).log2().floor() as i32)
}

/// Rounds to a power-of-two grid so that residuals equal in exact arithmetic
/// compare equal after floating-point rounding.
fn snap_residual(r: f64, quantum: f64) -> f64 {
    if quantum == 0.0 {
        r
    } else {
        (r / quantum).round() * quantum
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn xt_vec(x: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..x.ncols())
        .map(|j| {
            let mut acc = 0.0;
            for (i, vi) in v.iter().enumerate() {
                acc += x[(i, j)] * vi;
            }
            acc
        })
        .collect()
}

fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let p = x.ncols();
    let mut g = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..=a {
            let mut acc = 0.0;
            for (i, wi) in w.iter().enumerate() {
                acc += x[(i, a)] * x[(i, b)] * wi;
            }
            g[(a, b)] = acc;
            g[(b, a)] = acc;
        }
    }
    g
}

fn solve_spd(a: DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let chol = a.cholesky()?;
    Some(chol.solve(&DVector::from_column_slice(b)).iter().copied().collect())
}

fn spd_inverse_diag(a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    match a.cholesky() {
        Some(c) => {
            let inv = c.inverse();
            (0..n).map(|i| inv[(i, i)]).collect()
        }
        None => vec![f64::NAN; n],
    }
}

fn rel_change(old: f64, new: f64) -> f64 {
    (new - old).abs() / old.abs().max(1.0)
}

/// Rounding noise in a log-likelihood summed over many rows.
fn loglik_resolution(ll: f64) -> f64 {
    64.0 * f64::EPSILON * ll.abs().max(1.0)
}

/// Line-search acceptance. Near the optimum the achievable gain drops below the
/// rounding noise of `ll`, so a step that leaves `ll` unchanged to within that
/// noise is taken when it shrinks the gradient.
fn accept_step(ll: f64, ll_new: f64, grad: f64, grad_new: f64) -> bool {
    ll_new >= ll || (ll_new >= ll - loglik_resolution(ll) && grad_new < grad)
}

/// Tracks the "two consecutive tiny relative changes" stopping rule.
#[derive(Default)]
struct Stall(usize);

impl Stall {
    fn update(&mut self, old: f64, new: f64) -> bool {
        if rel_change(old, new) < REL_TOL {
            self.0 += 1;
        } else {
            self.0 = 0;
        }
        self.0 >= 2
    }

    /// As [`update`](Self::update), but an iteration that still halves the
    /// gradient counts as progress even when the log-likelihood barely moves.
    fn update_with_gradient(&mut self, old: f64, new: f64, old_grad: f64, new_grad: f64) -> bool {
        if new_grad < 0.5 * old_grad {
            self.0 = 0;
            return false;
        }
        self.update(old, new)
    }
}

// ---------------------------------------------------------------------------
// linear families
// ---------------------------------------------------------------------------

fn gaussian_loglik_score(x: &DMatrix<f64>, y: &[f64], beta: &[f64], ln_sigma: f64) -> (f64, Vec<f64>) {
    let n = y.len() as f64;
    let eta = linpred(x, beta);
    let resid: Vec<f64> = y.iter().zip(&eta).map(|(a, b)| a - b).collect();
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let s2 = (2.0 * ln_sigma).exp();
    let ll = -0.5 * n * (2.0 * std::f64::consts::PI).ln() - n * ln_sigma - rss / (2.0 * s2);
    let mut g: Vec<f64> = xt_vec(x, &resid).into_iter().map(|v| v / s2).collect();
    g.push(-n + rss / s2);
    (ll, g)
}

fn fit_linear(family: Family, y: &[f64], design: &DesignMatrix) -> Result<ConditionalModel> {
    let x = design.matrix();
    let n = y.len();
    let gram = weighted_gram(x, &vec![1.0; n]);
    let beta = solve_spd(gram.clone(), &xt_vec(x, y))
        .ok_or_else(|| Error::RankDeficient("normal equations are singular".into()))?;
    let eta = linpred(x, &beta);
    let resid: Vec<f64> = y.iter().zip(&eta).map(|(a, b)| a - b).collect();
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let sigma = (rss / n as f64).sqrt();
    if !(sigma > 0.0) {
        return Err(Error::IncompatibleResponse {
            family,
            reason: "response is an exact linear function of the design (zero residual variance)".into(),
        });
    }
    let (ll, g) = gaussian_loglik_score(x, y, &beta, sigma.ln());
    let inv_diag = spd_inverse_diag(gram);
    let mut se: Vec<f64> = inv_diag.iter().map(|d| sigma * d.sqrt()).collect();
    se.push((0.5 / n as f64).sqrt());

    let mut model = ConditionalModel::base(family, design, beta);
    model.sigma = Some(sigma);
    model.loglik = ll;
    model.iterations = 1;
    model.gradient_sup_norm = sup_norm(&g);
    model.std_errors = se;
    model.loglik_trace = vec![ll];
    if family == Family::LinearResidualEcdf {
        let q = residual_quantum_for(sigma);
        let snapped: Vec<f64> = resid.iter().map(|&r| snap_residual(r, q)).collect();
        model.residual_dist = Some(EmpiricalDistribution::new(&snapped)?);
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// GLMs: logistic, poisson, negative binomial with known theta
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Glm {
    Logit,
    Poisson,
    NegBin(f64),
}

/// Per-observation log-likelihood terms, scores `d ll / d eta`, and Fisher weights.
fn glm_terms(glm: Glm, y: &[f64], eta: &[f64], w: Option<&[f64]>) -> (f64, Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut ll = 0.0;
    let mut score = Vec::with_capacity(n);
    let mut info = Vec::with_capacity(n);
    for i in 0..n {
        let wi = w.map_or(1.0, |w| w[i]);
        let e = eta[i].min(ETA_MAX);
        let (l, s, f) = match glm {
            Glm::Logit => {
                let mu = sigmoid(e);
                (y[i] * e - softplus(e), y[i] - mu, mu * (1.0 - mu))
            }
            Glm::Poisson => {
                let mu = e.exp();
                (y[i] * e - mu - ln_factorial(y[i]), y[i] - mu, mu)
            }
            Glm::NegBin(theta) => {
                let mu = e.exp();
                let r = theta / (theta + mu);
                (negbin_log_pmf(y[i], mu, theta), (y[i] - mu) * r, mu * r)
            }
        };
        ll += wi * l;
        score.push(wi * s);
        info.push(wi * f);
    }
    (ll, score, info)
}

fn glm_loglik_score(glm: Glm, x: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>, beta: &[f64]) -> (f64, Vec<f64>) {
    let (ll, s, _) = glm_terms(glm, y, &linpred(x, beta), w);
    (ll, xt_vec(x, &s))
}

struct GlmFit {
    beta: Vec<f64>,
    ll: f64,
    grad_sup: f64,
    iterations: usize,
    converged: bool,
    info: DMatrix<f64>,
    trace: Vec<f64>,
}

/// Fisher scoring (IRLS) with step halving.
fn glm_newton(
    glm: Glm,
    x: &DMatrix<f64>,
    y: &[f64],
    w: Option<&[f64]>,
    beta0: Vec<f64>,
    max_iter: usize,
) -> Result<GlmFit> {
    let mut beta = beta0;
    let (mut ll, mut score, mut weights) = glm_terms(glm, y, &linpred(x, &beta), w);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut stall = Stall::default();
    while iterations < max_iter {
        let g = xt_vec(x, &score);
        if sup_norm(&g) < GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let step = solve_spd(weighted_gram(x, &weights), &g)
            .ok_or_else(|| Error::RankDeficient("weighted normal equations are singular".into()))?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, d)| b + t * d).collect();
            let terms = glm_terms(glm, y, &linpred(x, &cand), w);
            if terms.0.is_finite() && accept_step(ll, terms.0, sup_norm(&g), sup_norm(&xt_vec(x, &terms.1))) {
                accepted = Some((cand, terms));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, (ll_new, s_new, w_new))) = accepted else {
            // no ascent direction left at floating-point resolution
            converged = true;
            break;
        };
        let done = stall.update_with_gradient(ll, ll_new, sup_norm(&g), sup_norm(&xt_vec(x, &s_new)));
        beta = cand;
        ll = ll_new;
        score = s_new;
        weights = w_new;
        trace.push(ll);
        if done {
            converged = true;
            break;
        }
    }
    let g = xt_vec(x, &score);
    Ok(GlmFit {
        grad_sup: sup_norm(&g),
        converged: converged || sup_norm(&g) < GRAD_TOL,
        info: weighted_gram(x, &weights),
        beta,
        ll,
        iterations,
        trace,
    })
}

fn intercept_start(p: usize, intercept: f64) -> Vec<f64> {
    let mut b = vec![0.0; p];
    b[0] = intercept;
    b
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fit_logistic(y: &[f64], design: &DesignMatrix) -> Result<ConditionalModel> {
    let ybar = mean(y);
    if ybar == 0.0 || ybar == 1.0 {
        return Err(Error::Separation);
    }
    let x = design.matrix();
    let fit = glm_newton(
        Glm::Logit,
        x,
        y,
        None,
        intercept_start(design.n_cols(), (ybar / (1.0 - ybar)).ln()),
        MAX_ITER,
    )?;
    let eta = linpred(x, &fit.beta);
    let mut saturated = 0usize;
    let mut all_exact = true;
    for (e, yi) in eta.iter().zip(y) {
        let mu = sigmoid(*e);
        if (yi - mu).abs() > 1e-8 {
            all_exact = false;
        }
        if !(1e-12..=1.0 - 1e-12).contains(&mu) {
            saturated += 1;
        }
    }
    if all_exact || (saturated > 0 && sup_norm(&fit.beta) > 15.0) {
        return Err(Error::Separation);
    }
    if !fit.converged {
        return Err(Error::NonConvergence {
            family: Family::Logistic,
            iterations: fit.iterations,
        });
    }
    Ok(glm_model(Family::Logistic, design, fit))
}

fn glm_model(family: Family, design: &DesignMatrix, fit: GlmFit) -> ConditionalModel {
    let se = spd_inverse_diag(fit.info).into_iter().map(f64::sqrt).collect();
    let mut model = ConditionalModel::base(family, design, fit.beta);
    model.loglik = fit.ll;
    model.iterations = fit.iterations;
    model.gradient_sup_norm = fit.grad_sup;
    model.std_errors = se;
    model.loglik_trace = fit.trace;
    model
}

fn poisson_fit(y: &[f64], x: &DMatrix<f64>, w: Option<&[f64]>, beta0: Vec<f64>, max_iter: usize) -> Result<GlmFit> {
    glm_newton(Glm::Poisson, x, y, w, beta0, max_iter)
}

fn fit_poisson(y: &[f64], design: &DesignMatrix) -> Result<ConditionalModel> {
    let fit = poisson_fit(y, design.matrix(), None, intercept_start(design.n_cols(), mean(y).ln()), MAX_ITER)?;
    if !fit.converged {
        return Err(Error::NonConvergence {
            family: Family::Poisson,
            iterations: fit.iterations,
        });
    }
    Ok(glm_model(Family::Poisson, design, fit))
}

// ---------------------------------------------------------------------------
// negative binomial (NB2: Var = mu + mu^2 / theta)
// ---------------------------------------------------------------------------

/// Log-likelihood and derivatives with respect to `ln theta` for fixed means.
fn negbin_phi_terms(y: &[f64], mu: &[f64], w: Option<&[f64]>, theta: f64) -> (f64, f64, f64) {
    let mut ll = 0.0;
    let mut g = 0.0;
    let mut h = 0.0;
    for i in 0..y.len() {
        let wi = w.map_or(1.0, |w| w[i]);
        let (yi, m) = (y[i], mu[i]);
        ll += wi * negbin_log_pmf(yi, m, theta);
        g += wi * (digamma_diff(yi, theta) - (m / theta).ln_1p() + (m - yi) / (theta + m));
        h += wi
            * (trigamma_diff(yi, theta) + m / (theta * (theta + m)) + (yi - m) / (theta + m).powi(2));
    }
    // chain rule to phi = ln theta
    (ll, theta * g, theta * theta * h + theta * g)
}

/// One safeguarded Newton step on `ln theta`; returns the new `ln theta` and log-likelihood.
fn negbin_phi_step(y: &[f64], mu: &[f64], w: Option<&[f64]>, phi: f64) -> (f64, f64) {
    let (ll, g, h) = negbin_phi_terms(y, mu, w, phi.exp());
    let mut step = if h < 0.0 { -g / h } else { g.signum() };
    step = step.clamp(-5.0, 5.0);
    for _ in 0..MAX_HALVINGS {
        let cand = phi + step;
        let ll_c = negbin_phi_terms(y, mu, w, cand.exp()).0;
        if ll_c.is_finite() && ll_c >= ll {
            return (cand, ll_c);
        }
        step *= 0.5;
    }
    (phi, ll)
}

fn negbin_loglik_score(
    x: &DMatrix<f64>,
    y: &[f64],
    w: Option<&[f64]>,
    beta: &[f64],
    phi: f64,
) -> Option<(f64, Vec<f64>)> {
    let theta = phi.exp();
    if !(theta.is_finite() && theta > 0.0) {
        return None;
    }
    let eta = linpred(x, beta);
    let (ll, s, _) = glm_terms(Glm::NegBin(theta), y, &eta, w);
    let mu: Vec<f64> = eta.iter().map(|e| e.min(ETA_MAX).exp()).collect();
    let (_, g_phi, _) = negbin_phi_terms(y, &mu, w, theta);
    let mut g = xt_vec(x, &s);
    g.push(g_phi);
    ll.is_finite().then_some((ll, g))
}

fn moment_theta(y: &[f64]) -> f64 {
    let m = mean(y);
    let var = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (y.len().max(2) - 1) as f64;
    if var > m * 1.01 {
        (m * m / (var - m)).clamp(1e-3, 1e4)
    } else {
        100.0
    }
}

/// Weighted NB regression by alternating IRLS on `beta` and Newton on `ln theta`.
fn negbin_alternate(
    x: &DMatrix<f64>,
    y: &[f64],
    w: Option<&[f64]>,
    mut beta: Vec<f64>,
    mut phi: f64,
    rounds: usize,
    trace: &mut Vec<f64>,
) -> Result<(Vec<f64>, f64, f64)> {
    let mut ll = negbin_loglik_score(x, y, w, &beta, phi).map_or(f64::NEG_INFINITY, |v| v.0);
    let mut stall = Stall::default();
    for _ in 0..rounds {
        let fit = glm_newton(Glm::NegBin(phi.exp()), x, y, w, beta, 1)?;
        beta = fit.beta;
        let mu: Vec<f64> = linpred(x, &beta).iter().map(|e| e.min(ETA_MAX).exp()).collect();
        let (new_phi, ll_new) = negbin_phi_step(y, &mu, w, phi);
        phi = new_phi;
        trace.push(ll_new);
        let done = stall.update(ll, ll_new);
        ll = ll_new;
        if done {
            break;
        }
        if let Some((_, g)) = negbin_loglik_score(x, y, w, &beta, phi) {
            if sup_norm(&g) < GRAD_TOL {
                break;
            }
        }
    }
    Ok((beta, phi, ll))
}

fn fit_negbin(y: &[f64], design: &DesignMatrix) -> Result<ConditionalModel> {
    let x = design.matrix();
    let p = design.n_cols();
    let beta0 = match poisson_fit(y, x, None, intercept_start(p, mean(y).ln()), 25) {
        Ok(f) if f.ll.is_finite() => f.beta,
        _ => intercept_start(p, mean(y).ln()),
    };
    let mut trace = Vec::new();
    let (beta, phi, _) = negbin_alternate(x, y, None, beta0, moment_theta(y).ln(), MAX_ITER, &mut trace)?;
    let mut params = beta;
    params.push(phi);
    let alternations = trace.len();
    let polished = newton_polish(|q| negbin_loglik_score(x, y, None, &q[..p], q[p]), params, &mut trace);
    finish_polished(Family::NegBin, design, polished, trace, alternations)
}

// ---------------------------------------------------------------------------
// zero-inflated poisson / negative binomial
// ---------------------------------------------------------------------------

fn zi_loglik_score(family: Family, x: &DMatrix<f64>, y: &[f64], params: &[f64]) -> Option<(f64, Vec<f64>)> {
    let p = x.ncols();
    let beta = &params[..p];
    let gamma = &params[p..2 * p];
    let theta = (family == Family::Zinb).then(|| params[2 * p].exp());
    if let Some(t) = theta {
        if !(t.is_finite() && t > 0.0) {
            return None;
        }
    }
    let eta = linpred(x, beta);
    let zeta = linpred(x, gamma);
    let n = y.len();
    let mut ll = 0.0;
    let mut s_eta = vec![0.0; n];
    let mut s_zeta = vec![0.0; n];
    let mut s_phi = 0.0;
    for i in 0..n {
        let e = eta[i].min(ETA_MAX);
        let mu = e.exp();
        let z = zeta[i];
        let pi = sigmoid(z);
        let (count_score, theta_score) = match theta {
            None => (y[i] - mu, 0.0),
            Some(t) => (
                (y[i] - mu) * t / (t + mu),
                digamma_diff(y[i], t) - (mu / t).ln_1p() + (mu - y[i]) / (t + mu),
            ),
        };
        if y[i] == 0.0 {
            let ln_f0 = count_log_pmf(0.0, mu, theta);
            let l0 = log_add_exp(z, ln_f0);
            ll += l0 - softplus(z);
            let r = (ln_f0 - l0).exp();
            s_zeta[i] = (1.0 - r) - pi;
            s_eta[i] = r * count_score;
            s_phi += r * theta_score;
        } else {
            ll += -softplus(z) + count_log_pmf(y[i], mu, theta);
            s_zeta[i] = -pi;
            s_eta[i] = count_score;
            s_phi += theta_score;
        }
    }
    if !ll.is_finite() {
        return None;
    }
    let mut g = xt_vec(x, &s_eta);
    g.extend(xt_vec(x, &s_zeta));
    if let Some(t) = theta {
        g.push(t * s_phi);
    }
    Some((ll, g))
}

/// Posterior probability that each observation is a structural zero.
fn zi_e_step(x: &DMatrix<f64>, y: &[f64], beta: &[f64], gamma: &[f64], theta: Option<f64>) -> Vec<f64> {
    let eta = linpred(x, beta);
    let zeta = linpred(x, gamma);
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            if yi > 0.0 {
                0.0
            } else {
                let ln_f0 = count_log_pmf(0.0, eta[i].min(ETA_MAX).exp(), theta);
                (zeta[i] - log_add_exp(zeta[i], ln_f0)).exp()
            }
        })
        .collect()
}

fn fit_zero_inflated(family: Family, y: &[f64], design: &DesignMatrix) -> Result<ConditionalModel> {
    let x = design.matrix();
    let p = design.n_cols();
    let n = y.len() as f64;
    let positives: Vec<f64> = y.iter().copied().filter(|&v| v > 0.0).collect();
    let zero_frac = 1.0 - positives.len() as f64 / n;
    if zero_frac == 0.0 {
        return Err(Error::IncompatibleResponse {
            family,
            reason: "no zeros observed; zero inflation is not identifiable".into(),
        });
    }
    // starting values: count part from the positive values, zero part from the
    // excess of observed zeros over what the count part implies
    let mu0 = mean(&positives).max(0.5);
    let mut theta = (family == Family::Zinb).then(|| moment_theta(&positives));
    let f0 = count_log_pmf(0.0, mu0, theta).exp();
    let pi0 = ((zero_frac - f0) / (1.0 - f0)).clamp(0.05, 0.95);
    let mut beta = intercept_start(p, mu0.ln());
    let mut gamma = intercept_start(p, (pi0 / (1.0 - pi0)).ln());

    let pack = |beta: &[f64], gamma: &[f64], theta: Option<f64>| {
        let mut q = beta.to_vec();
        q.extend_from_slice(gamma);
        if let Some(t) = theta {
            q.push(t.ln());
        }
        q
    };
    let observed = |q: &[f64]| zi_loglik_score(family, x, y, q).map_or(f64::NEG_INFINITY, |v| v.0);

    let mut ll = observed(&pack(&beta, &gamma, theta));
    let mut trace = vec![ll];
    for _ in 0..EM_MAX_ITER {
        let w = zi_e_step(x, y, &beta, &gamma, theta);
        let count_w: Vec<f64> = w.iter().map(|v| 1.0 - v).collect();
        // M-step, zero component: logistic regression on fractional responses
        let zfit = glm_newton(Glm::Logit, x, &w, None, gamma.clone(), 10)?;
        // M-step, count component: weighted count regression
        let (new_beta, new_theta) = match theta {
            None => (poisson_fit(y, x, Some(&count_w), beta.clone(), 10)?.beta, None),
            Some(t) => {
                let mut scratch = Vec::new();
                let (b, phi, _) = negbin_alternate(x, y, Some(&count_w), beta.clone(), t.ln(), 2, &mut scratch)?;
                (b, Some(phi.exp()))
            }
        };
        let ll_new = observed(&pack(&new_beta, &zfit.beta, new_theta));
        if !(ll_new >= ll) {
            break;
        }
        beta = new_beta;
        gamma = zfit.beta;
        theta = new_theta;
        trace.push(ll_new);
        let done = rel_change(ll, ll_new) < EM_HANDOVER_TOL;
        ll = ll_new;
        if done {
            break;
        }
    }
    let em_len = trace.len();
    let polished = newton_polish(|q| zi_loglik_score(family, x, y, q), pack(&beta, &gamma, theta), &mut trace);
    finish_polished(family, design, polished, trace, em_len)
}

// ---------------------------------------------------------------------------
// joint Newton polish with a finite-difference Hessian of the analytic score
// ---------------------------------------------------------------------------

struct Polished {
    params: Vec<f64>,
    ll: f64,
    grad_sup: f64,
    iterations: usize,
    converged: bool,
    neg_hessian: DMatrix<f64>,
}

/// Hessian by central differences of the analytic score.
fn fd_hessian<F>(f: &F, q: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let k = q.len();
    let mut h = DMatrix::zeros(k, k);
    let mut work = q.to_vec();
    for j in 0..k {
        let step = 1e-5 * q[j].abs().max(1.0);
        work[j] = q[j] + step;
        let up = f(&work)?.1;
        work[j] = q[j] - step;
        let down = f(&work)?.1;
        work[j] = q[j];
        for i in 0..k {
            h[(i, j)] = (up[i] - down[i]) / (2.0 * step);
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    Some(sym)
}

/// Solves `A d = g` for the positive-definite `A = -H`, adding a ridge when needed.
fn damped_solve(neg_h: &DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let k = neg_h.nrows();
    let scale = (0..k).map(|i| neg_h[(i, i)].abs()).fold(1e-12, f64::max);
    let mut ridge = 0.0;
    for _ in 0..20 {
        let a = neg_h + DMatrix::identity(k, k) * ridge;
        if let Some(d) = solve_spd(a, g) {
            return Some(d);
        }
        ridge = if ridge == 0.0 { scale * 1e-8 } else { ridge * 10.0 };
    }
    None
}

fn newton_polish<F>(f: F, start: Vec<f64>, trace: &mut Vec<f64>) -> Result<Polished>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let mut q = start;
    let (mut ll, mut g) = f(&q).ok_or_else(|| Error::InvalidParameter("non-finite log-likelihood at start".into()))?;
    let mut converged = false;
    let mut iterations = 0;
    let mut stall = Stall::default();
    while iterations < MAX_ITER {
        if sup_norm(&g) < GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let Some(h) = fd_hessian(&f, &q) else { break };
        let neg_h = -h;
        let Some(step) = damped_solve(&neg_h, &g) else { break };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = q.iter().zip(&step).map(|(a, d)| a + t * d).collect();
            if let Some((ll_c, g_c)) = f(&cand) {
                if accept_step(ll, ll_c, sup_norm(&g), sup_norm(&g_c)) {
                    accepted = Some((cand, ll_c, g_c));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, ll_new, g_new)) = accepted else {
            converged = true;
            break;
        };
        let done = stall.update_with_gradient(ll, ll_new, sup_norm(&g), sup_norm(&g_new));
        q = cand;
        ll = ll_new;
        g = g_new;
        trace.push(ll);
        if done {
            converged = true;
            break;
        }
    }
    let neg_hessian = fd_hessian(&f, &q).map(|h| -h).unwrap_or_else(|| DMatrix::from_element(q.len(), q.len(), f64::NAN));
    Ok(Polished {
        grad_sup: sup_norm(&g),
        converged: converged || sup_norm(&g) < GRAD_TOL,
        params: q,
        ll,
        iterations,
        neg_hessian,
    })
}

fn finish_polished(
    family: Family,
    design: &DesignMatrix,
    polished: Result<Polished>,
    trace: Vec<f64>,
    phase_one_len: usize,
) -> Result<ConditionalModel> {
    let polished = polished?;
    if !polished.converged {
        return Err(Error::NonConvergence {
            family,
            iterations: polished.iterations + phase_one_len,
        });
    }
    let p = design.n_cols();
    let q = &polished.params;
    let mut model = ConditionalModel::base(family, design, q[..p].to_vec());
    match family {
        Family::NegBin => model.theta = Some(q[p].exp()),
        Family::Zip => model.zero_coefficients = Some(q[p..2 * p].to_vec()),
        Family::Zinb => {
            model.zero_coefficients = Some(q[p..2 * p].to_vec());
            model.theta = Some(q[2 * p].exp());
        }
        _ => unreachable!("polish is used for negbin and zero-inflated families"),
    }
    if let Some(t) = model.theta {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::NonConvergence {
                family,
                iterations: polished.iterations,
            });
        }
    }
    model.loglik = polished.ll;
    model.iterations = polished.iterations + phase_one_len;
    model.gradient_sup_norm = polished.grad_sup;
    model.std_errors = spd_inverse_diag(polished.neg_hessian)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    model.loglik_trace = trace;
    Ok(model)
}
