use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Weight;
use crate::model::Regime;
use crate::solver::{interp_linear, Solution};

/// Density tested against `h` in [`delta_weight_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaTarget {
    /// Net charge density.
    Rho,
    /// `(eps U')^2`
    Energy,
    /// `e^{-qU} - 1` for `A < B`, `e^{pU} - 1` for `A > B`.
    Exp,
    /// The other exponential, which vanishes in the limit.
    ExpComplement,
}

/// `int_0^R h(r) f(r) dr` in the plain measure.
pub fn delta_weight_estimate(sol: &Solution, h: &dyn Fn(f64) -> f64, target: DeltaTarget) -> f64 {
    let p = &sol.params;
    let anion = |u: f64| (-p.q * u).exp() - 1.0;
    let cation = |u: f64| (p.p * u).exp() - 1.0;
    let enriched = p.regime() == Regime::Enriched;
    let f: Vec<f64> = match target {
        DeltaTarget::Rho => sol.rho_nodal(),
        DeltaTarget::Energy => sol
            .du_nodal()
            .iter()
            .map(|d| (p.epsilon * d).powi(2))
            .collect(),
        DeltaTarget::Exp => sol
            .u
            .iter()
            .map(|&u| if enriched { cation(u) } else { anion(u) })
            .collect(),
        DeltaTarget::ExpComplement => sol
            .u
            .iter()
            .map(|&u| if enriched { anion(u) } else { cation(u) })
            .collect(),
    };
    let weighted: Vec<f64> = sol
        .mesh
        .nodes()
        .iter()
        .zip(&f)
        .map(|(&r, v)| h(r) * v)
        .collect();
    sol.mesh
        .integrate(&weighted, Weight::Plain)
        .expect("lengths match")
}

/// Charge in `[r_lo, R]` over the potential drop across it.
pub fn capacitance_numeric(sol: &Solution, r_lo: f64) -> Result<f64> {
    let p = &sol.params;
    if !(r_lo > 0.0 && r_lo < p.radius) {
        return Err(Error::OutOfDomain {
            r: r_lo,
            radius: p.radius,
        });
    }
    let charge = p.boundary_flux() - p.epsilon * p.epsilon * sol.flux_at(r_lo);
    let drop = sol.u_boundary() - interp_linear(sol.mesh.nodes(), &sol.u, r_lo);
    if !(drop.abs() > f64::EPSILON * sol.u_boundary().abs().max(1.0)) {
        return Err(Error::DegenerateDenominator);
    }
    Ok((charge / drop).abs())
}

/// `||eps U'||_{L^theta(0, R)}` in the plain measure.
pub fn gradient_norm(sol: &Solution, theta: f64) -> f64 {
    let eps = sol.params.epsilon;
    let f: Vec<f64> = sol
        .du_nodal()
        .iter()
        .map(|d| (eps * d).abs().powf(theta))
        .collect();
    sol.mesh
        .integrate(&f, Weight::Plain)
        .expect("lengths match")
        .powf(1.0 / theta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormFit {
    pub theta: f64,
    /// Least-squares slope of `log norm` against `log eps`.
    pub slope: f64,
    /// `min{1, 2/theta - 1}`
    pub expected: f64,
    /// `(eps, norm)` pairs, the norm divided by `log(1/eps)` when `theta <= 1`.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares slope through `(x, y)` pairs.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn norm_decay_fit(sols: &[Solution], theta: f64) -> Result<NormFit> {
    if !(theta > 0.0 && theta < 2.0) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    if sols.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            found: sols.len(),
        });
    }
    let points: Vec<(f64, f64)> = sols
        .iter()
        .map(|s| {
            let eps = s.params.epsilon;
            let mut norm = gradient_norm(s, theta);
            if theta <= 1.0 {
                norm /= (1.0 / eps).ln();
            }
            (eps, norm)
        })
        .collect();
    let logs: Vec<(f64, f64)> = points.iter().map(|(e, v)| (e.ln(), v.ln())).collect();
    Ok(NormFit {
        theta,
        slope: fit_slope(&logs),
        expected: (2.0 / theta - 1.0).min(1.0),
        points,
    })
}
