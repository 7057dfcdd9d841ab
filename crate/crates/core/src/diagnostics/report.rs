use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    boundary_expansion, capacitance_limit, coefficient_limits, delta_weights, interior_expansion,
    ExpansionCase, ExpansionQuery,
};
use crate::error::Result;
use crate::model::{ModelParams, Regime};
use crate::solver::{
    solve_continuation, validate_ladder, MeshPolicy, NewtonOptions, Seed, Solution,
};

use super::measures::{
    capacitance_numeric, delta_weight_estimate, gradient_norm, norm_decay_fit, DeltaTarget, NormFit,
};
use super::pohozaev::pohozaev_check;

/// Pass/fail thresholds. Defaults are sized for the reference configuration
/// at `eps = 2^-12` on the default geometric mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// `|U(R) - prediction|` at the smallest epsilon.
    pub boundary_gap: f64,
    /// Number of trailing rows over which the boundary gap must shrink.
    pub gap_window: usize,
    /// Absolute error of `I_p`, `I_q`.
    pub coefficients: f64,
    /// Relative error of the `rho` and energy weights.
    pub weights: f64,
    /// Absolute error of `U(R - gamma eps^2)`.
    pub layer_value: f64,
    /// Relative error of `eps^2 U'(R - gamma eps^2)`.
    pub layer_flux: f64,
    /// Relative error of the capacitance of `[R - gamma eps^2, R]`.
    pub capacitance: f64,
    /// Upper bound for the capacitance of `[R/2, R]`.
    pub interior_capacitance: f64,
    /// Absolute error of the fitted norm-decay slopes.
    pub slope: f64,
    /// Relative residual of the whole-ball integral identity. The default
    /// suits the unrefined default mesh, where the residual is second-order
    /// in the cell size and sits near `3e-3`.
    pub pohozaev: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            boundary_gap: 0.15,
            gap_window: 5,
            coefficients: 0.05,
            weights: 0.05,
            layer_value: 0.15,
            layer_flux: 0.1,
            capacitance: 0.05,
            interior_capacitance: 0.05,
            slope: 0.15,
            pohozaev: 5e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationOptions {
    pub newton: NewtonOptions,
    pub mesh: MeshPolicy,
    pub seed: Seed,
    /// Exponent of the inner radius `eps^kappa` for the second identity.
    pub kappa: f64,
    /// Exponents of the gradient norms to fit.
    pub thetas: Vec<f64>,
    /// Layer offset `gamma` in `R - gamma eps^2` for pointwise and capacitance rows.
    pub gamma: f64,
    /// Only epsilons at or below this value enter the slope fits.
    pub fit_max_eps: f64,
    pub tolerances: Tolerances,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            newton: NewtonOptions::default(),
            mesh: MeshPolicy::default(),
            seed: Seed::Zero,
            kappa: 0.5,
            thetas: vec![1.0, 1.5],
            gamma: 4.0,
            fit_max_eps: 2f64.powi(-6),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub epsilon: f64,
    pub nodes: usize,
    pub u_boundary: f64,
    pub u_boundary_predicted: Option<f64>,
    /// `|U(R) - prediction|`
    pub gap: Option<f64>,
    pub ip: f64,
    pub iq: f64,
    pub ip_limit: f64,
    pub iq_limit: f64,
    pub weight_rho: f64,
    pub weight_energy: f64,
    pub weight_exp: f64,
    pub weight_rho_limit: f64,
    pub weight_energy_limit: f64,
    pub weight_exp_limit: f64,
    pub layer_value: f64,
    pub layer_value_predicted: Option<f64>,
    /// `eps^2 U'` at `R - gamma eps^2`.
    pub layer_flux: f64,
    pub layer_flux_predicted: Option<f64>,
    pub capacitance: Option<f64>,
    pub capacitance_limit: Option<f64>,
    pub capacitance_interior: Option<f64>,
    /// `||eps U'||_{L^theta}`, one per requested theta.
    pub norms: Vec<f64>,
    pub pohozaev_residual1: f64,
    pub pohozaev_residual2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn within(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            value,
            target,
            tolerance,
            passed: (value - target).abs() < tolerance,
        }
    }

    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            value,
            target: 0.0,
            tolerance,
            passed: value < tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub thetas: Vec<f64>,
    pub fits: Vec<NormFit>,
    pub checks: Vec<CheckResult>,
    /// `A = B`: only the trivial solution exists and nothing is predicted.
    pub neutral: bool,
}

fn row_for(sol: &Solution, opts: &ValidationOptions) -> Result<ValidationRow> {
    let p = &sol.params;
    let eps = p.epsilon;
    let neutral = p.regime() == Regime::Neutral;
    let limits = coefficient_limits(p, None);
    let weights = delta_weights(p);
    let one = |_: f64| 1.0;
    let r_layer = p.radius - opts.gamma * eps * eps;
    let at_layer = sol.evaluate(r_layer.max(0.0))?;
    let (u_pred, layer_u_pred, layer_flux_pred, cap, cap_limit, cap_interior) = if neutral {
        (None, None, None, None, None, None)
    } else {
        let layer = interior_expansion(
            p,
            &ExpansionQuery {
                case: ExpansionCase::Power {
                    beta: 2.0,
                    gamma: opts.gamma,
                },
                epsilon: eps,
            },
        )
        .ok();
        (
            Some(boundary_expansion(p)?.value(eps)),
            layer.as_ref().and_then(|l| l.u.map(|u| u.total)),
            layer.as_ref().and_then(|l| l.du.map(|d| d * eps * eps)),
            capacitance_numeric(sol, r_layer).ok(),
            Some(capacitance_limit(p, opts.gamma)?.exact),
            capacitance_numeric(sol, 0.5 * p.radius).ok(),
        )
    };
    let poho = pohozaev_check(sol, opts.kappa)?;
    Ok(ValidationRow {
        epsilon: eps,
        nodes: sol.mesh.len(),
        u_boundary: sol.u_boundary(),
        u_boundary_predicted: u_pred,
        gap: u_pred.map(|v| (sol.u_boundary() - v).abs()),
        ip: sol.ip(),
        iq: sol.iq(),
        ip_limit: limits.ip,
        iq_limit: limits.iq,
        weight_rho: delta_weight_estimate(sol, &one, DeltaTarget::Rho),
        weight_energy: delta_weight_estimate(sol, &one, DeltaTarget::Energy),
        weight_exp: delta_weight_estimate(sol, &one, DeltaTarget::Exp),
        weight_rho_limit: weights.rho,
        weight_energy_limit: weights.energy,
        weight_exp_limit: weights.exp,
        layer_value: at_layer.u,
        layer_value_predicted: layer_u_pred,
        layer_flux: eps * eps * at_layer.du,
        layer_flux_predicted: layer_flux_pred,
        capacitance: cap,
        capacitance_limit: cap_limit,
        capacitance_interior: cap_interior,
        norms: opts.thetas.iter().map(|&t| gradient_norm(sol, t)).collect(),
        pohozaev_residual1: poho.residual1,
        pohozaev_residual2: poho.residual2,
    })
}

fn relative_check(name: &str, value: f64, target: f64, tol: f64) -> CheckResult {
    let mut c = CheckResult::within(name, value, target, tol * target.abs());
    c.tolerance = tol;
    c
}

fn checks_for(
    rows: &[ValidationRow],
    fits: &[NormFit],
    tol: &Tolerances,
    newton_tol: f64,
    neutral: bool,
) -> Vec<CheckResult> {
    let last = rows.last().expect("at least one row");
    if neutral {
        return vec![CheckResult::below(
            "trivial_solution",
            last.u_boundary.abs(),
            10.0 * newton_tol,
        )];
    }
    let mut out = Vec::new();
    if let Some(pred) = last.u_boundary_predicted {
        out.push(CheckResult::within(
            "boundary_value",
            last.u_boundary,
            pred,
            tol.boundary_gap,
        ));
    }
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap).collect();
    if gaps.len() >= tol.gap_window && tol.gap_window >= 2 {
        let tail = &gaps[gaps.len() - tol.gap_window..];
        let worst = tail
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min);
        out.push(CheckResult {
            name: "boundary_gap_decreasing".into(),
            value: worst,
            target: 0.0,
            tolerance: 0.0,
            passed: worst > 0.0,
        });
    }
    out.push(CheckResult::within(
        "ip_limit",
        last.ip,
        last.ip_limit,
        tol.coefficients,
    ));
    out.push(CheckResult::within(
        "iq_limit",
        last.iq,
        last.iq_limit,
        tol.coefficients,
    ));
    out.push(relative_check(
        "weight_rho",
        last.weight_rho,
        last.weight_rho_limit,
        tol.weights,
    ));
    out.push(relative_check(
        "weight_energy",
        last.weight_energy,
        last.weight_energy_limit,
        tol.weights,
    ));
    if let Some(pred) = last.layer_value_predicted {
        out.push(CheckResult::within(
            "layer_value",
            last.layer_value,
            pred,
            tol.layer_value,
        ));
    }
    if let Some(pred) = last.layer_flux_predicted {
        out.push(relative_check(
            "layer_flux",
            last.layer_flux,
            pred,
            tol.layer_flux,
        ));
    }
    if let (Some(c), Some(l)) = (last.capacitance, last.capacitance_limit) {
        out.push(relative_check("capacitance_layer", c, l, tol.capacitance));
    }
    if let Some(c) = last.capacitance_interior {
        out.push(CheckResult::below(
            "capacitance_interior",
            c,
            tol.interior_capacitance,
        ));
    }
    for fit in fits {
        out.push(CheckResult::within(
            &format!("norm_slope_theta_{}", fit.theta),
            fit.slope,
            fit.expected,
            tol.slope,
        ));
    }
    let worst_poho = rows
        .iter()
        .map(|r| r.pohozaev_residual1)
        .fold(0.0, f64::max);
    out.push(CheckResult::below(
        "pohozaev_identity",
        worst_poho,
        tol.pohozaev,
    ));
    out
}

/// Solves along the ladder and compares every computed quantity with its
/// asymptotic prediction.
pub fn validate_report(
    params: &ModelParams,
    ladder: &[f64],
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    validate_ladder(ladder)?;
    let sols = solve_continuation(params, ladder, &opts.mesh, &opts.newton, opts.seed)?;
    report_from_solutions(&sols, opts)
}

/// Builds the report from an already computed continuation.
pub fn report_from_solutions(
    sols: &[Solution],
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    let rows = sols
        .iter()
        .map(|s| row_for(s, opts))
        .collect::<Result<Vec<_>>>()?;
    let neutral = sols[0].params.regime() == Regime::Neutral;
    let fit_set: Vec<Solution> = sols
        .iter()
        .filter(|s| s.eps() <= opts.fit_max_eps * (1.0 + 1e-12))
        .cloned()
        .collect();
    let fits = if neutral || fit_set.len() < 4 {
        vec![]
    } else {
        opts.thetas
            .iter()
            .map(|&t| norm_decay_fit(&fit_set, t))
            .collect::<Result<Vec<_>>>()?
    };
    let checks = checks_for(&rows, &fits, &opts.tolerances, opts.newton.tol, neutral);
    Ok(ValidationReport {
        rows,
        thetas: opts.thetas.clone(),
        fits,
        checks,
        neutral,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}"))
        .unwrap_or_else(|| "nan".into())
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One line per epsilon.
    pub fn write_rows_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from(
            "epsilon,nodes,u_boundary,u_boundary_predicted,gap,ip,iq,ip_limit,iq_limit,\
             weight_rho,weight_energy,weight_exp,weight_rho_limit,weight_energy_limit,weight_exp_limit,\
             layer_value,layer_value_predicted,layer_flux,layer_flux_predicted,\
             capacitance,capacitance_limit,capacitance_interior",
        );
        for t in &self.thetas {
            header.push_str(&format!(",norm_theta_{t}"));
        }
        header.push_str(",pohozaev_residual1,pohozaev_residual2");
        writeln!(out, "{header}")?;
        for r in &self.rows {
            let mut line = format!(
                "{:.16e},{},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{},{},{},{}",
                r.epsilon,
                r.nodes,
                r.u_boundary,
                opt(r.u_boundary_predicted),
                opt(r.gap),
                r.ip,
                r.iq,
                r.ip_limit,
                r.iq_limit,
                r.weight_rho,
                r.weight_energy,
                r.weight_exp,
                r.weight_rho_limit,
                r.weight_energy_limit,
                r.weight_exp_limit,
                r.layer_value,
                opt(r.layer_value_predicted),
                r.layer_flux,
                opt(r.layer_flux_predicted),
                opt(r.capacitance),
                opt(r.capacitance_limit),
                opt(r.capacitance_interior),
            );
            for n in &r.norms {
                line.push_str(&format!(",{n:.16e}"));
            }
            line.push_str(&format!(
                ",{:.16e},{:.16e}",
                r.pohozaev_residual1, r.pohozaev_residual2
            ));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn write_checks_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "check,value,target,tolerance,passed")?;
        for c in &self.checks {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{}",
                c.name, c.value, c.target, c.tolerance, c.passed
            )?;
        }
        Ok(())
    }
}
