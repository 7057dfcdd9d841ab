//! Problem parameters for the radial charge-conserving Poisson-Boltzmann model.
//!
//! Everything is dimensionless. The ball has radius `R` in dimension `N`, the
//! radial measure is `r^{N-1} dr` with the unit sphere's area normalized to one,
//! so the ball's measure is `R^N / N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamViolation, Result};

/// Number of sample points used to certify positivity of a dielectric profile.
pub const DIELECTRIC_SAMPLES: usize = 1001;

/// Spatially varying dielectric coefficient `g(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DielectricProfile {
    Constant {
        g0: f64,
    },
    /// `g(r) = c[0] + c[1] r + c[2] r^2 + ...`
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// Monotone piecewise-cubic Hermite interpolant through `(r[i], g[i])`.
    Tabulated {
        r: Vec<f64>,
        g: Vec<f64>,
        #[serde(skip)]
        slopes: Vec<f64>,
    },
}

impl DielectricProfile {
    pub fn constant(g0: f64) -> Self {
        DielectricProfile::Constant { g0 }
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        DielectricProfile::Polynomial { coefficients }
    }

    /// Builds a tabulated profile. Abscissae must be strictly increasing and at
    /// least two samples are required.
    pub fn tabulated(r: Vec<f64>, g: Vec<f64>) -> std::result::Result<Self, ParamViolation> {
        if r.len() != g.len() {
            return Err(ParamViolation::MalformedDielectric(format!(
                "{} abscissae but {} values",
                r.len(),
                g.len()
            )));
        }
        if r.len() < 2 {
            return Err(ParamViolation::MalformedDielectric(
                "need at least two samples".into(),
            ));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ParamViolation::MalformedDielectric(
                "abscissae must be strictly increasing".into(),
            ));
        }
        let slopes = pchip_slopes(&r, &g);
        Ok(DielectricProfile::Tabulated { r, g, slopes })
    }

    /// Recomputes derived interpolation data (needed after deserialization).
    pub fn prepared(self) -> std::result::Result<Self, ParamViolation> {
        match self {
            DielectricProfile::Tabulated { r, g, .. } => Self::tabulated(r, g),
            other => Ok(other),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            DielectricProfile::Constant { g0 } => *g0,
            DielectricProfile::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * r + c)
            }
            DielectricProfile::Tabulated { r: xs, g, slopes } => {
                let (k, t, h) = locate(xs, r);
                let (h00, h10, h01, h11) = hermite_basis(t);
                h00 * g[k] + h10 * h * slopes[k] + h01 * g[k + 1] + h11 * h * slopes[k + 1]
            }
        }
    }

    pub fn deriv(&self, r: f64) -> f64 {
        match self {
            DielectricProfile::Constant { .. } => 0.0,
            DielectricProfile::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * r + k as f64 * c),
            DielectricProfile::Tabulated { r: xs, g, slopes } => {
                let (k, t, h) = locate(xs, r);
                let d00 = 6.0 * t * t - 6.0 * t;
                let d10 = 3.0 * t * t - 4.0 * t + 1.0;
                let d01 = -d00;
                let d11 = 3.0 * t * t - 2.0 * t;
                (d00 * g[k] + d01 * g[k + 1]) / h + d10 * slopes[k] + d11 * slopes[k + 1]
            }
        }
    }

    /// Min and max over `DIELECTRIC_SAMPLES` uniform points of `[0, radius]`.
    pub fn sampled_range(&self, radius: f64) -> (f64, f64) {
        (0..DIELECTRIC_SAMPLES)
            .map(|i| self.eval(radius * i as f64 / (DIELECTRIC_SAMPLES - 1) as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    fn check(&self, radius: f64, out: &mut Vec<ParamViolation>) {
        if let DielectricProfile::Tabulated { r, .. } = self {
            if r[0] > 0.0 || *r.last().unwrap() < radius {
                out.push(ParamViolation::MalformedDielectric(format!(
                    "table covers [{}, {}] but [0, {radius}] is required",
                    r[0],
                    r.last().unwrap()
                )));
                return;
            }
        }
        for i in 0..DIELECTRIC_SAMPLES {
            let r = radius * i as f64 / (DIELECTRIC_SAMPLES - 1) as f64;
            let v = self.eval(r);
            if !v.is_finite() || !self.deriv(r).is_finite() {
                out.push(ParamViolation::DielectricNotFinite { r });
                return;
            }
            if v <= 0.0 {
                out.push(ParamViolation::DielectricNotPositive { r, value: v });
                return;
            }
        }
    }
}

fn locate(xs: &[f64], r: f64) -> (usize, f64, f64) {
    let n = xs.len();
    let r = r.clamp(xs[0], xs[n - 1]);
    let k = match xs.partition_point(|&x| x <= r) {
        0 => 0,
        i => (i - 1).min(n - 2),
    };
    let h = xs[k + 1] - xs[k];
    (k, (r - xs[k]) / h, h)
}

fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

/// Fritsch-Carlson slopes with the usual one-sided three-point end conditions.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let edge = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if d.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            d
        }
    };
    m[0] = edge(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

/// Unvalidated parameter bundle, e.g. as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub epsilon: f64,
    pub radius: f64,
    pub dim: f64,
    pub dielectric: DielectricProfile,
    pub eta: Option<f64>,
}

impl RawParams {
    /// Reference configuration: `A=1, B=2, p=q=1, R=1, N=2, g=1`.
    pub fn reference(epsilon: f64) -> Self {
        RawParams {
            a: 1.0,
            b: 2.0,
            p: 1.0,
            q: 1.0,
            epsilon,
            radius: 1.0,
            dim: 2.0,
            dielectric: DielectricProfile::constant(1.0),
            eta: None,
        }
    }
}

/// Which species dominates, i.e. the sign of `A - B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `A < B`: the potential decreases towards the boundary.
    Depleted,
    /// `A > B`: the potential increases towards the boundary.
    Enriched,
    /// `A = B`: only the trivial solution exists.
    Neutral,
}

/// Validated model parameters. Construct with [`validate_params`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub epsilon: f64,
    pub radius: f64,
    pub dim: usize,
    pub dielectric: DielectricProfile,
    pub eta: Option<f64>,
    g_min: f64,
    g_max: f64,
}

/// Checks every constraint and reports all violations at once.
pub fn validate_params(raw: &RawParams) -> Result<ModelParams> {
    let mut bad = Vec::new();
    for (name, value) in [
        ("A", raw.a),
        ("B", raw.b),
        ("p", raw.p),
        ("q", raw.q),
        ("epsilon", raw.epsilon),
        ("R", raw.radius),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            bad.push(ParamViolation::NonPositiveParameter { name, value });
        }
    }
    if let Some(eta) = raw.eta {
        if !(eta >= 0.0 && eta.is_finite()) {
            bad.push(ParamViolation::NonPositiveParameter {
                name: "eta",
                value: eta,
            });
        }
    }
    if !(raw.dim >= 2.0 && raw.dim.fract() == 0.0 && raw.dim.is_finite()) {
        bad.push(ParamViolation::InvalidDimension(raw.dim));
    }
    let dielectric = match raw.dielectric.clone().prepared() {
        Ok(d) => Some(d),
        Err(v) => {
            bad.push(v);
            None
        }
    };
    if let Some(d) = &dielectric {
        if raw.radius > 0.0 && raw.radius.is_finite() {
            d.check(raw.radius, &mut bad);
        }
    }
    if !bad.is_empty() {
        return Err(Error::InvalidParams(bad));
    }
    let dielectric = dielectric.expect("checked above");
    let (g_min, g_max) = dielectric.sampled_range(raw.radius);
    Ok(ModelParams {
        a: raw.a,
        b: raw.b,
        p: raw.p,
        q: raw.q,
        epsilon: raw.epsilon,
        radius: raw.radius,
        dim: raw.dim as usize,
        dielectric,
        eta: raw.eta,
        g_min,
        g_max,
    })
}

impl ModelParams {
    pub fn reference(epsilon: f64) -> Self {
        validate_params(&RawParams::reference(epsilon)).expect("reference parameters are valid")
    }

    pub fn to_raw(&self) -> RawParams {
        RawParams {
            a: self.a,
            b: self.b,
            p: self.p,
            q: self.q,
            epsilon: self.epsilon,
            radius: self.radius,
            dim: self.dim as f64,
            dielectric: self.dielectric.clone(),
            eta: self.eta,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParams(vec![
                ParamViolation::NonPositiveParameter {
                    name: "epsilon",
                    value: epsilon,
                },
            ]));
        }
        Ok(ModelParams {
            epsilon,
            ..self.clone()
        })
    }

    pub fn with_eta(&self, eta: Option<f64>) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.eta = eta;
        validate_params(&raw)
    }

    pub fn regime(&self) -> Regime {
        if self.a < self.b {
            Regime::Depleted
        } else if self.a > self.b {
            Regime::Enriched
        } else {
            Regime::Neutral
        }
    }

    /// `R^N / N`, the measure of the ball under `r^{N-1} dr`.
    pub fn ball_measure(&self) -> f64 {
        self.radius.powi(self.dim as i32) / self.dim as f64
    }

    pub fn g(&self, r: f64) -> f64 {
        self.dielectric.eval(r)
    }

    pub fn g_prime(&self, r: f64) -> f64 {
        self.dielectric.deriv(r)
    }

    pub fn g_boundary(&self) -> f64 {
        self.dielectric.eval(self.radius)
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    /// Swaps `(A, p)` with `(B, q)`; the solution of the swapped problem is `-U`.
    pub fn mirrored(&self) -> ModelParams {
        ModelParams {
            a: self.b,
            b: self.a,
            p: self.q,
            q: self.p,
            ..self.clone()
        }
    }

    /// `r^{N-1}`.
    pub fn radial_factor(&self, r: f64) -> f64 {
        r.powi(self.dim as i32 - 1)
    }

    /// `eps^2 g(R) R^{N-1} U'(R) = R^N (A - B) / N`, the prescribed boundary flux.
    pub fn boundary_flux(&self) -> f64 {
        self.ball_measure() * (self.a - self.b)
    }
}

/// Constants obtained from the parameters by direct substitution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// `U'(R) = R (A - B) / (eps^2 N g(R))`.
    pub boundary_slope: f64,
    /// `U(R) = eta R (B - A) / (eps^2 N g(R))` for the Robin problem.
    pub robin_boundary_value: Option<f64>,
    /// Interior gradient decay rate.
    pub decay_rate: f64,
    /// `C^b = R^N |A - B|`.
    pub total_charge: f64,
}

pub fn derived_constants(params: &ModelParams) -> DerivedConstants {
    let n = params.dim as f64;
    let r = params.radius;
    let eps2 = params.epsilon * params.epsilon;
    let gr = params.g_boundary();
    let (p, q) = (params.p, params.q);
    let decay_rate = (params.a.min(params.b) * (p + q) / params.g_max()
        * (q / p).powf((p - q) / (p + q)))
    .sqrt();
    DerivedConstants {
        boundary_slope: r * (params.a - params.b) / (eps2 * n * gr),
        robin_boundary_value: params
            .eta
            .map(|eta| eta * r * (params.b - params.a) / (eps2 * n * gr)),
        decay_rate,
        total_charge: r.powi(params.dim as i32) * (params.a - params.b).abs(),
    }
}
