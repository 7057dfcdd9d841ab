//! Closed-form asymptotic predictions as `eps -> 0`.
//!
//! Formulas are written for `A < B`. The case `A > B` is obtained by swapping
//! `(A, p)` with `(B, q)` and negating the potential, its derivative and the
//! charge density.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Regime};

/// Orientation used to reduce `A > B` to `A < B`: the parameters to evaluate
/// with and the sign to apply to `U`, `U'` and `rho`.
fn oriented(params: &ModelParams) -> Result<(ModelParams, f64)> {
    match params.regime() {
        Regime::Depleted => Ok((params.clone(), 1.0)),
        Regime::Enriched => Ok((params.mirrored(), -1.0)),
        Regime::Neutral => Err(Error::EqualConcentrations),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientLimits {
    pub ip: f64,
    pub iq: f64,
    /// `A = B`: both limits equal the ball measure and nothing concentrates.
    pub neutral: bool,
}

/// Limits of `I_p` and `I_q`. A nonzero `mean` of `U` shifts them by
/// `e^{p m}` and `e^{-q m}`.
pub fn coefficient_limits(params: &ModelParams, mean: Option<f64>) -> CoefficientLimits {
    let k = params.ball_measure();
    let (ip, iq) = match params.regime() {
        Regime::Depleted => (k, params.b / params.a * k),
        Regime::Enriched => (params.a / params.b * k, k),
        Regime::Neutral => (k, k),
    };
    let m = mean.unwrap_or(0.0);
    CoefficientLimits {
        ip: ip * (params.p * m).exp(),
        iq: iq * (-params.q * m).exp(),
        neutral: params.regime() == Regime::Neutral,
    }
}

/// `U(R) = leading log(1/eps) + second + o(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryExpansion {
    pub leading: f64,
    pub second: f64,
}

impl BoundaryExpansion {
    pub fn value(&self, eps: f64) -> f64 {
        self.leading * (1.0 / eps).ln() + self.second
    }
}

pub fn boundary_expansion(params: &ModelParams) -> Result<BoundaryExpansion> {
    let (p, sign) = oriented(params)?;
    let n = p.dim as f64;
    let r = p.radius;
    let d = p.b - p.a;
    Ok(BoundaryExpansion {
        leading: sign * (-2.0 / p.q),
        second: sign * (2.0 * p.a * n * n * p.g_boundary() / (p.q * r * r * d * d)).ln() / p.q,
    })
}

/// Whether `pi(eps) / eps^beta0` tends to zero or to infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitClass {
    Zero,
    Infinite,
}

/// Distance `R - r` of the evaluation point from the boundary.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum PiFunction {
    /// `c eps^beta0 (log 1/eps)^l`
    LogPower { c: f64, l: f64 },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl PiFunction {
    pub fn eval(&self, beta0: f64, eps: f64) -> f64 {
        match self {
            PiFunction::LogPower { c, l } => c * eps.powf(beta0) * (1.0 / eps).ln().powf(*l),
            PiFunction::Custom(f) => f(eps),
        }
    }
}

impl fmt::Debug for PiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PiFunction::LogPower { c, l } => write!(f, "LogPower {{ c: {c}, l: {l} }}"),
            PiFunction::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpansionCase {
    /// `r = R - eps^kappa`: only a decay bound is available.
    Interior { kappa: f64 },
    /// `r = R - gamma eps^beta`.
    Power {
        beta: f64,
        #[serde(default)]
        gamma: f64,
    },
    /// `r = R - pi(eps)` with `pi(eps) / eps^beta0` in the given limit class.
    PiSpec {
        beta0: f64,
        limit: LimitClass,
        pi: PiFunction,
    },
    /// `r = R - eps^{1 + gamma (log 1/eps)^{-theta}}`.
    Theta { theta: f64, gamma: f64 },
    /// `r = R - eps^{1 + (gamma log^(n)(1/eps) + tau) / log(1/eps)}`.
    IteratedLog { n: u32, gamma: f64, tau: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionQuery {
    pub case: ExpansionCase,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UExpansion {
    /// Term that blows up as `eps -> 0`.
    pub leading: f64,
    /// Bounded correction.
    pub second: f64,
    pub total: f64,
}

/// `|U|, |U'| <= C eps^kappa log(1/eps)` with an unknown constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayBound {
    pub kappa: f64,
    /// `eps^kappa log(1/eps)`
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionResult {
    pub epsilon: f64,
    /// Radius the prediction refers to.
    pub r: f64,
    pub u: Option<UExpansion>,
    pub du: Option<f64>,
    pub rho: Option<f64>,
    /// Flags selecting the `gamma q` and curvature terms inside the logarithm.
    pub chi: Option<(u8, u8)>,
    pub bound: Option<DecayBound>,
}

fn chi_flags(beta: f64) -> (u8, u8) {
    if beta < 2.0 {
        (1, 0)
    } else if beta == 2.0 {
        (1, 1)
    } else {
        (0, 1)
    }
}

/// Iterates the natural logarithm `n` times; `None` once an argument is not positive.
fn iterated_log(n: u32, x: f64) -> Option<f64> {
    let mut v = x;
    for _ in 0..n {
        if !(v > 0.0) {
            return None;
        }
        v = v.ln();
    }
    Some(v)
}

fn u_expansion(sign: f64, leading: f64, second: f64) -> Option<UExpansion> {
    Some(UExpansion {
        leading: sign * leading,
        second: sign * second,
        total: sign * (leading + second),
    })
}

fn check_point(params: &ModelParams, distance: f64) -> Result<f64> {
    if !(distance >= 0.0 && distance <= params.radius && distance.is_finite()) {
        return Err(Error::MalformedQuery(format!(
            "evaluation point R - {distance} lies outside [0, R]"
        )));
    }
    Ok(params.radius - distance)
}

/// Power-law distance `R - gamma eps^beta`, in the oriented (`A < B`) frame.
fn power_case(
    p: &ModelParams,
    eps: f64,
    beta: f64,
    gamma: f64,
    sign: f64,
) -> Result<ExpansionResult> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::MalformedQuery(format!(
            "beta must exceed 1 (got {beta})"
        )));
    }
    if beta <= 2.0 && !(gamma > 0.0) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    let n = p.dim as f64;
    let g = p.g_boundary();
    let q = p.q;
    let d = p.b - p.a;
    let curv = 2.0 * n * g / (p.radius * d);
    let (c1, c2) = chi_flags(beta);
    let log_inv = (1.0 / eps).ln();
    let leading = -(2.0 / q) * (beta - 1.0).min(1.0) * log_inv;
    let inner = (p.a / (2.0 * q * g)).sqrt() * (gamma * q * c1 as f64 + curv * c2 as f64);
    let second = (2.0 / q) * inner.ln();
    let (du, rho) = if beta < 2.0 {
        (
            -2.0 / (gamma * q) * eps.powf(-beta),
            2.0 * g / (gamma * gamma * q) * eps.powf(-2.0 * (beta - 1.0)),
        )
    } else if beta == 2.0 {
        let s = gamma * q + curv;
        (
            -2.0 / s * eps.powi(-2),
            2.0 * q * g / (s * s) * eps.powi(-2),
        )
    } else {
        (
            -p.radius * d / (n * g) * eps.powi(-2),
            q * p.radius * p.radius * d * d / (2.0 * n * n * g) * eps.powi(-2),
        )
    };
    let distance = if beta > 2.0 && gamma == 0.0 {
        0.0
    } else {
        gamma * eps.powf(beta)
    };
    Ok(ExpansionResult {
        epsilon: eps,
        r: check_point(p, distance)?,
        u: u_expansion(sign, leading, second),
        du: Some(sign * du),
        rho: Some(sign * rho),
        chi: Some((c1, c2)),
        bound: None,
    })
}

pub fn interior_expansion(params: &ModelParams, query: &ExpansionQuery) -> Result<ExpansionResult> {
    let eps = query.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::MalformedQuery(format!(
            "epsilon must lie in (0, 1) (got {eps})"
        )));
    }
    let (p, sign) = oriented(params)?;
    let log_inv = (1.0 / eps).ln();
    let g = p.g_boundary();
    let q = p.q;
    let boundary_log = (q * p.a / (2.0 * g)).ln() / q;
    match &query.case {
        ExpansionCase::Interior { kappa } => {
            if !(*kappa > 0.0 && *kappa < 1.0) {
                return Err(Error::KappaOutOfRange(*kappa));
            }
            Ok(ExpansionResult {
                epsilon: eps,
                r: check_point(&p, eps.powf(*kappa))?,
                u: None,
                du: None,
                rho: None,
                chi: None,
                bound: Some(DecayBound {
                    kappa: *kappa,
                    scale: eps.powf(*kappa) * log_inv,
                }),
            })
        }
        ExpansionCase::Power { beta, gamma } => power_case(&p, eps, *beta, *gamma, sign),
        ExpansionCase::PiSpec { beta0, limit, pi } => {
            if !(*beta0 > 1.0 && beta0.is_finite()) {
                return Err(Error::MalformedQuery(format!(
                    "beta0 must exceed 1 (got {beta0})"
                )));
            }
            let dist = pi.eval(*beta0, eps);
            if !(dist > 0.0 && dist.is_finite()) {
                return Err(Error::MalformedQuery(format!(
                    "pi(eps) = {dist} must be positive"
                )));
            }
            let r = check_point(&p, dist)?;
            let inner = *beta0 < 2.0 || (*beta0 == 2.0 && *limit == LimitClass::Infinite);
            if !inner {
                let mut res = power_case(&p, eps, 3.0, 0.0, sign)?;
                res.r = r;
                return Ok(res);
            }
            let leading = -(2.0 / q) * (beta0 - 1.0) * log_inv;
            let second = (2.0 / q) * (dist / eps.powf(*beta0)).ln()
                + (2.0 / q) * (q * p.a / (2.0 * g)).sqrt().ln();
            Ok(ExpansionResult {
                epsilon: eps,
                r,
                u: u_expansion(sign, leading, second),
                du: Some(sign * (-2.0 / (q * dist))),
                rho: Some(sign * 2.0 * g / q * (eps / dist).powi(2)),
                chi: None,
                bound: None,
            })
        }
        ExpansionCase::Theta { theta, gamma } => {
            if !(*theta > 0.0 && *theta < 1.0) {
                return Err(Error::MalformedQuery(format!(
                    "theta must lie in (0, 1) (got {theta})"
                )));
            }
            if !(*gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::NonPositiveGamma(*gamma));
            }
            let beta1 = 1.0 + gamma * log_inv.powf(-theta);
            let leading = -(2.0 * gamma / q) * log_inv.powf(1.0 - theta);
            Ok(ExpansionResult {
                epsilon: eps,
                r: check_point(&p, eps.powf(beta1))?,
                u: u_expansion(sign, leading, boundary_log),
                du: Some(sign * (-2.0 / q) * eps.powf(-beta1)),
                rho: Some(sign * 2.0 * g / q * eps.powf(-2.0 * (beta1 - 1.0))),
                chi: None,
                bound: None,
            })
        }
        ExpansionCase::IteratedLog { n, gamma, tau } => {
            if *n < 2 {
                return Err(Error::MalformedQuery(format!(
                    "n must be at least 2 (got {n})"
                )));
            }
            if !(*gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::NonPositiveGamma(*gamma));
            }
            if !tau.is_finite() {
                return Err(Error::MalformedQuery("tau must be finite".into()));
            }
            let logn = iterated_log(*n, 1.0 / eps).ok_or_else(|| {
                Error::MalformedQuery(format!("log^({n})(1/eps) undefined at eps = {eps}"))
            })?;
            let beta2 = 1.0 + (gamma * logn + tau) / log_inv;
            if !(beta2 > 1.0) {
                return Err(Error::MalformedQuery(format!(
                    "exponent {beta2} does not exceed 1 at eps = {eps}"
                )));
            }
            let leading = -(2.0 * gamma / q) * logn;
            let second = (-2.0 * tau) / q + boundary_log;
            let (du, rho) = if *n == 2 && *gamma > 2.0 {
                (
                    Some(sign * (-2.0 / q) * eps.powf(-beta2)),
                    Some(sign * 2.0 * g / q * eps.powf(-2.0 * (beta2 - 1.0))),
                )
            } else {
                (None, None)
            };
            Ok(ExpansionResult {
                epsilon: eps,
                r: check_point(&p, eps.powf(beta2))?,
                u: u_expansion(sign, leading, second),
                du,
                rho,
                chi: None,
                bound: None,
            })
        }
    }
}

/// Weights of the boundary point masses that `rho`, `(eps U')^2` and
/// `e^{-qU} - 1` (resp. `e^{pU} - 1`) concentrate into, in the plain measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaWeights {
    pub rho: f64,
    pub energy: f64,
    pub exp: f64,
}

pub fn delta_weights(params: &ModelParams) -> DeltaWeights {
    let n = params.dim as f64;
    let d = (params.b - params.a).abs();
    let r = params.radius;
    let (valence, conc) = match params.regime() {
        Regime::Depleted => (params.q, params.a),
        Regime::Enriched => (params.p, params.b),
        Regime::Neutral => {
            return DeltaWeights {
                rho: 0.0,
                energy: 0.0,
                exp: 0.0,
            }
        }
    };
    DeltaWeights {
        rho: r * d / n,
        energy: 2.0 * r * d / (valence * n * params.g_boundary()),
        exp: r * d / (conc * n),
    }
}

/// 8-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// `int_r^R g(t)^{-1/2} dt`.
fn inverse_sqrt_g_integral(params: &ModelParams, r: f64) -> f64 {
    use crate::model::DielectricProfile;
    let len = params.radius - r;
    if len <= 0.0 {
        return 0.0;
    }
    if let DielectricProfile::Constant { g0 } = params.dielectric {
        return len / g0.sqrt();
    }
    let panels = 64;
    let h = len / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = r + (k as f64 + 0.5) * h;
        for (x, w) in GAUSS8 {
            total += w * 0.5 * h / params.g(mid + 0.5 * h * x).sqrt();
        }
    }
    total
}

/// Boundary-layer profile `U(r)`, accurate for `R - r = O(eps)`.
pub fn layer_profile(params: &ModelParams, r: f64) -> Result<f64> {
    if !(0.0..=params.radius).contains(&r) {
        return Err(Error::OutOfDomain {
            r,
            radius: params.radius,
        });
    }
    let (p, sign) = oriented(params)?;
    let n = p.dim as f64;
    let eps = p.epsilon;
    let seed = n * (2.0 * p.a * p.g_boundary() / p.q).sqrt() / (p.radius * (p.b - p.a));
    let psi = seed + (p.q * p.a / 2.0).sqrt() * inverse_sqrt_g_integral(&p, r) / (eps * eps);
    Ok(sign * (2.0 / p.q) * (eps.ln() + psi.ln()))
}

/// Predicted `eps^2 U'(r)` given the value of `U` at `r`.
pub fn gradient_closure(params: &ModelParams, u_value: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= params.radius) {
        return Err(Error::OutOfDomain {
            r,
            radius: params.radius,
        });
    }
    let eps = params.epsilon;
    let g = params.g(r);
    Ok(match params.regime() {
        Regime::Depleted => {
            -(2.0 * params.a / (params.q * g)).sqrt() * eps * (-params.q * u_value / 2.0).exp()
        }
        Regime::Enriched => {
            (2.0 * params.b / (params.p * g)).sqrt() * eps * (params.p * u_value / 2.0).exp()
        }
        Regime::Neutral => 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacitanceReport {
    pub gamma: f64,
    /// Limit of the capacitance of `[R - gamma eps^2, R]`.
    pub exact: f64,
    /// Parallel-plate term `R^{N-1} g(R) / gamma`.
    pub c1: f64,
    /// Diffuse-layer term `C^b q / (2N)`.
    pub c2: f64,
    /// `(1/c1 + 1/c2)^{-1}`.
    pub series: f64,
    /// Supremum over `gamma`, equal to `c2`.
    pub supremum: f64,
}

pub fn capacitance_limit(params: &ModelParams, gamma: f64) -> Result<CapacitanceReport> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    let (p, _) = oriented(params)?;
    let n = p.dim as f64;
    let cb = p.radius.powi(p.dim as i32) * (p.b - p.a);
    let plate = p.radius.powi(p.dim as i32 - 1) * p.g_boundary();
    let c2 = cb * p.q / (2.0 * n);
    let x = cb * gamma * p.q / (2.0 * n * plate);
    let exact = c2 * x / ((1.0 + x) * x.ln_1p());
    let c1 = plate / gamma;
    Ok(CapacitanceReport {
        gamma,
        exact,
        c1,
        c2,
        series: 1.0 / (1.0 / c1 + 1.0 / c2),
        supremum: c2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_params, DielectricProfile, RawParams};

    fn p0(eps: f64) -> ModelParams {
        ModelParams::reference(eps)
    }

    fn mirror_p0(eps: f64) -> ModelParams {
        let mut raw = RawParams::reference(eps);
        raw.a = 2.0;
        raw.b = 1.0;
        validate_params(&raw).unwrap()
    }

    fn power(beta: f64, gamma: f64, eps: f64) -> ExpansionQuery {
        ExpansionQuery {
            case: ExpansionCase::Power { beta, gamma },
            epsilon: eps,
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn coefficient_limit_values() {
        let c = coefficient_limits(&p0(0.1), None);
        assert_eq!((c.ip, c.iq, c.neutral), (0.5, 1.0, false));
        let c = coefficient_limits(&mirror_p0(0.1), None);
        assert_eq!((c.ip, c.iq), (1.0, 0.5));
        let c = coefficient_limits(&p0(0.1), Some(0.3));
        assert!(close(c.ip, 0.5 * 0.3f64.exp(), 1e-15));
        let mut raw = RawParams::reference(0.1);
        raw.b = 1.0;
        let c = coefficient_limits(&validate_params(&raw).unwrap(), None);
        assert!(c.neutral && c.ip == 0.5 && c.iq == 0.5);
    }

    #[test]
    fn boundary_expansion_values() {
        let b = boundary_expansion(&p0(1e-3)).unwrap();
        assert_eq!(b.leading, -2.0);
        assert!(close(b.second, 8f64.ln(), 1e-14));
        assert!(close(b.value(1e-3), -11.736_1, 1e-5));

        let mut raw = RawParams::reference(1e-3);
        raw.dielectric = DielectricProfile::constant(2.0);
        let b2 = boundary_expansion(&validate_params(&raw).unwrap()).unwrap();
        assert!(close(b2.second - b.second, 2f64.ln(), 1e-14));

        let m = boundary_expansion(&mirror_p0(1e-3)).unwrap();
        assert_eq!(m.leading, 2.0);
        assert!(close(m.second, -(8f64.ln()), 1e-14));
    }

    #[test]
    fn equal_concentrations_rejected() {
        let mut raw = RawParams::reference(0.1);
        raw.b = 1.0;
        let params = validate_params(&raw).unwrap();
        assert!(matches!(
            boundary_expansion(&params),
            Err(Error::EqualConcentrations)
        ));
        assert!(matches!(
            capacitance_limit(&params, 1.0),
            Err(Error::EqualConcentrations)
        ));
        let w = delta_weights(&params);
        assert_eq!((w.rho, w.energy, w.exp), (0.0, 0.0, 0.0));
    }

    #[test]
    fn power_case_examples() {
        let eps: f64 = 1e-3;
        let li = (1.0 / eps).ln();
        let r = interior_expansion(&p0(eps), &power(1.5, 1.0, eps)).unwrap();
        let u = r.u.unwrap();
        assert!(close(u.leading, -li, 1e-14));
        assert!(close(u.second, -(2f64.ln()), 1e-14));
        assert!(close(r.du.unwrap(), -2.0 * eps.powf(-1.5), 1e-12));
        assert!(close(r.rho.unwrap(), 2.0 / eps, 1e-12));
        assert_eq!(r.chi, Some((1, 0)));

        let r = interior_expansion(&p0(eps), &power(2.0, 4.0, eps)).unwrap();
        let u = r.u.unwrap();
        assert!(close(u.total, -2.0 * li + 32f64.ln(), 1e-14));
        assert!(close(u.second, 3.4657, 1e-4));
        assert!(close(r.du.unwrap(), -0.25 / (eps * eps), 1e-12));
        assert!(close(r.rho.unwrap(), 0.03125 / (eps * eps), 1e-12));
        assert_eq!(r.chi, Some((1, 1)));
        assert!(close(r.r, 1.0 - 4.0 * eps * eps, 1e-15));

        for gamma in [0.0, 1.0, 17.0] {
            let r = interior_expansion(&p0(eps), &power(3.0, gamma, eps)).unwrap();
            assert!(close(r.u.unwrap().second, 8f64.ln(), 1e-14));
            assert!(close(r.du.unwrap(), -0.5 / (eps * eps), 1e-12));
            assert!(close(r.rho.unwrap(), 0.125 / (eps * eps), 1e-12));
            assert_eq!(r.chi, Some((0, 1)));
        }
    }

    #[test]
    fn theta_case_example() {
        let eps: f64 = 1e-4;
        let q = ExpansionQuery {
            case: ExpansionCase::Theta {
                theta: 0.5,
                gamma: 1.0,
            },
            epsilon: eps,
        };
        let r = interior_expansion(&p0(eps), &q).unwrap();
        let u = r.u.unwrap();
        assert!(close(
            u.total,
            -2.0 * (1.0 / eps).ln().sqrt() + 0.5f64.ln(),
            1e-14
        ));
    }

    #[test]
    fn iterated_log_case() {
        let eps: f64 = 1e-6;
        let li = (1.0 / eps).ln();
        let q = ExpansionQuery {
            case: ExpansionCase::IteratedLog {
                n: 2,
                gamma: 3.0,
                tau: 0.5,
            },
            epsilon: eps,
        };
        let r = interior_expansion(&p0(eps), &q).unwrap();
        let u = r.u.unwrap();
        assert!(close(u.leading, -6.0 * li.ln(), 1e-14));
        assert!(close(u.second, -1.0 + 0.5f64.ln(), 1e-14));
        assert!(r.du.is_some() && r.rho.is_some());
        let q = ExpansionQuery {
            case: ExpansionCase::IteratedLog {
                n: 3,
                gamma: 3.0,
                tau: 0.5,
            },
            epsilon: eps,
        };
        let r = interior_expansion(&p0(eps), &q).unwrap();
        assert!(r.du.is_none());
        assert!(close(r.u.unwrap().leading, -6.0 * li.ln().ln(), 1e-14));
    }

    #[test]
    fn pi_spec_cases() {
        let eps: f64 = 1e-4;
        let li = (1.0 / eps).ln();
        let q = ExpansionQuery {
            case: ExpansionCase::PiSpec {
                beta0: 1.5,
                limit: LimitClass::Infinite,
                pi: PiFunction::LogPower { c: 1.0, l: 1.0 },
            },
            epsilon: eps,
        };
        let r = interior_expansion(&p0(eps), &q).unwrap();
        let dist = eps.powf(1.5) * li;
        assert!(close(r.r, 1.0 - dist, 1e-15));
        let u = r.u.unwrap();
        assert!(close(u.total, -li + 2.0 * li.ln() + 0.5f64.ln(), 1e-13));
        assert!(close(r.du.unwrap(), -2.0 / dist, 1e-13));

        // beta0 = 2 with pi/eps^2 -> 0 falls back to the boundary terms
        let q = ExpansionQuery {
            case: ExpansionCase::PiSpec {
                beta0: 2.0,
                limit: LimitClass::Zero,
                pi: PiFunction::Custom(Arc::new(|e: f64| e * e / (1.0 / e).ln())),
            },
            epsilon: eps,
        };
        let r = interior_expansion(&p0(eps), &q).unwrap();
        assert!(close(r.u.unwrap().second, 8f64.ln(), 1e-14));
    }

    #[test]
    fn malformed_queries() {
        let params = p0(0.01);
        assert!(matches!(
            interior_expansion(&params, &power(0.9, 1.0, 0.01)),
            Err(Error::MalformedQuery(_))
        ));
        assert!(matches!(
            interior_expansion(&params, &power(1.5, 0.0, 0.01)),
            Err(Error::NonPositiveGamma(_))
        ));
        let q = ExpansionQuery {
            case: ExpansionCase::Interior { kappa: 1.2 },
            epsilon: 0.01,
        };
        assert!(matches!(
            interior_expansion(&params, &q),
            Err(Error::KappaOutOfRange(_))
        ));
        let q = ExpansionQuery {
            case: ExpansionCase::IteratedLog {
                n: 1,
                gamma: 1.0,
                tau: 0.0,
            },
            epsilon: 0.01,
        };
        assert!(matches!(
            interior_expansion(&params, &q),
            Err(Error::MalformedQuery(_))
        ));
    }

    #[test]
    fn interior_returns_bound_only() {
        let q = ExpansionQuery {
            case: ExpansionCase::Interior { kappa: 0.5 },
            epsilon: 0.01,
        };
        let r = interior_expansion(&p0(0.01), &q).unwrap();
        assert!(r.u.is_none());
        let b = r.bound.unwrap();
        assert!(close(b.scale, 0.1 * 100f64.ln(), 1e-14));
    }

    #[test]
    fn mirrored_power_case_negates() {
        let eps: f64 = 1e-3;
        let a = interior_expansion(&p0(eps), &power(2.0, 4.0, eps)).unwrap();
        let b = interior_expansion(&mirror_p0(eps), &power(2.0, 4.0, eps)).unwrap();
        assert_eq!(a.u.unwrap().total, -b.u.unwrap().total);
        assert_eq!(a.du.unwrap(), -b.du.unwrap());
        assert_eq!(a.rho.unwrap(), -b.rho.unwrap());
    }

    #[test]
    fn delta_weight_values() {
        let w = delta_weights(&p0(0.1));
        assert_eq!((w.rho, w.energy, w.exp), (0.5, 1.0, 0.5));
        let mut raw = RawParams::reference(0.1);
        raw.a = 2.0;
        raw.b = 1.0;
        raw.p = 2.0;
        let w = delta_weights(&validate_params(&raw).unwrap());
        assert_eq!((w.rho, w.energy, w.exp), (0.5, 0.5, 0.5));
    }

    #[test]
    fn layer_profile_examples() {
        let eps: f64 = 1e-3;
        let params = p0(eps);
        let li = (1.0 / eps).ln();
        let at_r = layer_profile(&params, 1.0).unwrap();
        assert!(close(at_r, -2.0 * li + 8f64.ln(), 1e-13));
        let at_4 = layer_profile(&params, 1.0 - 4.0 * eps * eps).unwrap();
        let pw = interior_expansion(&params, &power(2.0, 4.0, eps)).unwrap();
        assert!((at_4 - pw.u.unwrap().total).abs() < 1e-9);
        assert!(matches!(
            layer_profile(&params, 1.1),
            Err(Error::OutOfDomain { .. })
        ));
        let mut prev = f64::INFINITY;
        for e in [1e-2, 1e-3, 1e-5, 1e-7] {
            let v = layer_profile(&p0(e), 1.0 - e.powf(1.5)).unwrap() + (1.0 / e).ln();
            let gap = (v + 2f64.ln()).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 3e-3);
    }

    #[test]
    fn layer_profile_matches_power_case_for_general_gamma() {
        let eps = 0.01;
        let params = p0(eps);
        for gamma in [0.1, 1.0, 3.0, 10.0] {
            let lp = layer_profile(&params, 1.0 - gamma * eps * eps).unwrap();
            let pw = interior_expansion(&params, &power(2.0, gamma, eps)).unwrap();
            assert!((lp - pw.u.unwrap().total).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_profile_quadrature_for_variable_dielectric() {
        let mut raw = RawParams::reference(0.01);
        raw.dielectric = DielectricProfile::polynomial(vec![1.0, 1.0]);
        let params = validate_params(&raw).unwrap();
        // int_r^1 (1+t)^{-1/2} dt = 2(sqrt 2 - sqrt(1+r))
        let r: f64 = 0.3;
        let exact = 2.0 * (2f64.sqrt() - (1.0 + r).sqrt());
        assert!((inverse_sqrt_g_integral(&params, r) - exact).abs() < 1e-14);
    }

    #[test]
    fn gradient_closure_examples() {
        let eps: f64 = 1e-3;
        let params = p0(eps);
        let u = boundary_expansion(&params).unwrap().value(eps);
        assert!(close(
            gradient_closure(&params, u, 1.0).unwrap(),
            -0.5,
            1e-12
        ));
        assert!(close(
            gradient_closure(&params, 0.0, 0.5).unwrap(),
            -(2f64.sqrt()) * eps,
            1e-14
        ));
        let mut raw = RawParams::reference(eps);
        raw.a = 2.0;
        raw.b = 4.0;
        let doubled = validate_params(&raw).unwrap();
        let ratio = gradient_closure(&doubled, 0.3, 0.7).unwrap()
            / gradient_closure(&params, 0.3, 0.7).unwrap();
        assert!(close(ratio, 2f64.sqrt(), 1e-14));
        assert!(matches!(
            gradient_closure(&params, 0.0, 0.0),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn capacitance_examples() {
        let params = p0(0.01);
        let c = capacitance_limit(&params, 4.0).unwrap();
        assert!(close(c.exact, 1.0 / (8.0 * 2f64.ln()), 1e-14));
        assert!(close(c.exact, 0.180_337, 1e-5));
        let c = capacitance_limit(&params, 0.1).unwrap();
        assert!((c.exact - 0.24694).abs() < 5e-5);
        assert!((c.series - 0.24390).abs() < 5e-5);
        assert_eq!(c.supremum, 0.25);
        let small = capacitance_limit(&params, 1e-8).unwrap();
        assert!(close(small.exact, 0.25, 1e-6));
        assert!(matches!(
            capacitance_limit(&params, 0.0),
            Err(Error::NonPositiveGamma(_))
        ));
    }

    #[test]
    fn capacitance_increases_with_radius() {
        for gamma in [0.1, 1.0, 4.0, 20.0] {
            let mut raw = RawParams::reference(0.01);
            let c1 = capacitance_limit(&validate_params(&raw).unwrap(), gamma)
                .unwrap()
                .exact;
            raw.radius = 2.0;
            let c2 = capacitance_limit(&validate_params(&raw).unwrap(), gamma)
                .unwrap()
                .exact;
            assert!(c2 > c1);
        }
    }
}
