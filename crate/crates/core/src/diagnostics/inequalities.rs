use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::mesh::Weight;
use crate::model::{ModelParams, Regime};
use crate::solver::{ladder_to, solve_continuation, MeshPolicy, NewtonOptions, Seed, Solution};

/// Relative slack granted to every bound, for rounding in the quadratures.
pub const INEQUALITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Distance to the nearest bound, negative when violated.
    pub margin: f64,
    /// False when the hypotheses of the bound do not hold for these parameters.
    pub applicable: bool,
    pub passed: bool,
}

impl InequalityCheck {
    fn new(name: &'static str, value: f64, lower: f64, upper: f64) -> Self {
        let slack = INEQUALITY_SLACK * value.abs().max(1.0);
        let margin = (value - lower).min(upper - value);
        InequalityCheck {
            name,
            value,
            lower,
            upper,
            margin,
            applicable: true,
            passed: margin >= -slack,
        }
    }

    fn not_applicable(name: &'static str) -> Self {
        InequalityCheck {
            name,
            value: f64::NAN,
            lower: f64::NAN,
            upper: f64::NAN,
            margin: f64::NAN,
            applicable: false,
            passed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityLedger {
    pub epsilon: f64,
    pub checks: Vec<InequalityCheck>,
}

impl InequalityLedger {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&InequalityCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Evaluates the a priori bounds on a converged zero-mean solution.
///
/// The ball's measure is taken as the mesh quadrature of `r^{N-1}`, which
/// equals `R^N / N` whenever the trapezoid rule is exact for it (`N = 2`).
pub fn inequality_suite(sol: &Solution) -> InequalityLedger {
    let p = &sol.params;
    let measure = sol
        .mesh
        .integrate(&vec![1.0; sol.mesh.len()], Weight::Radial)
        .expect("lengths match");
    let (a, b, pp, qq) = (p.a, p.b, p.p, p.q);
    let mut checks = Vec::new();

    let product = (sol.log_ip / pp + sol.log_iq / qq).exp();
    let base = measure.powf(1.0 / pp + 1.0 / qq);
    checks.push(InequalityCheck::new(
        "inverse_holder",
        product,
        base,
        base * (b / a).powf(1.0 / qq).max((a / b).powf(1.0 / pp)),
    ));
    checks.push(InequalityCheck::new(
        "mean_ip",
        sol.ip() / measure,
        1.0,
        (a / b).max((b / a).powf(pp / qq)),
    ));
    checks.push(InequalityCheck::new(
        "mean_iq",
        sol.iq() / measure,
        1.0,
        (b / a).max((a / b).powf(qq / pp)),
    ));

    // the bracket with mean-normalized integrals equals -rho
    let rho = sol.rho_nodal();
    let bracket: Vec<f64> = rho.iter().map(|r| -r).collect();
    let bmax = bracket.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bmin = bracket.iter().cloned().fold(f64::INFINITY, f64::min);
    match p.regime() {
        Regime::Depleted => checks.push(InequalityCheck::new("bracket_sign", bmax, a - b, 0.0)),
        Regime::Enriched => checks.push(InequalityCheck::new("bracket_sign", bmin, 0.0, a - b)),
        Regime::Neutral => checks.push(InequalityCheck::new(
            "bracket_sign",
            bmax.abs().max(bmin.abs()),
            0.0,
            0.0,
        )),
    }

    let u0 = sol.u_center();
    match p.regime() {
        Regime::Depleted if pp <= qq => {
            let mut c = InequalityCheck::new("center_value", u0, 0.0, (b / a).ln() / qq);
            c.passed = c.passed && u0 > 0.0;
            checks.push(c);
        }
        Regime::Enriched if pp >= qq => {
            let mut c = InequalityCheck::new("center_value", u0, -(a / b).ln() / pp, 0.0);
            c.passed = c.passed && u0 < 0.0;
            checks.push(c);
        }
        _ => checks.push(InequalityCheck::not_applicable("center_value")),
    }

    let worst_step = sol
        .u
        .windows(2)
        .map(|w| match p.regime() {
            Regime::Depleted => w[0] - w[1],
            Regime::Enriched => w[1] - w[0],
            Regime::Neutral => -(w[1] - w[0]).abs(),
        })
        .fold(f64::INFINITY, f64::min);
    let scale = sol.u.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut mono = InequalityCheck::new("monotonicity", worst_step / scale, 0.0, f64::INFINITY);
    mono.passed = worst_step >= -1e-12 * scale;
    checks.push(mono);

    let bound = p.dim as f64 * (pp + qq) * a.min(b) / p.radius.powi(p.dim as i32)
        * (qq / pp).powf((pp - qq) / (pp + qq));
    let lowest = sol
        .u
        .iter()
        .map(|&u| sol.weighted_sum(u))
        .fold(f64::INFINITY, f64::min);
    checks.push(InequalityCheck::new(
        "pointwise_sum",
        lowest,
        bound,
        f64::INFINITY,
    ));

    InequalityLedger {
        epsilon: p.epsilon,
        checks,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEntry {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub ledgers: Vec<InequalityLedger>,
}

/// Runs [`inequality_suite`] over every combination of `A/B` ratios (with
/// `B` fixed from `base`), valences `p`, `q` and the given epsilons.
/// Each parameter set is solved by continuation from `eps = 0.5`, in parallel.
pub fn inequality_grid(
    base: &ModelParams,
    ratios: &[f64],
    valences: &[f64],
    epsilons: &[f64],
    policy: &MeshPolicy,
    opts: &NewtonOptions,
) -> Result<Vec<GridEntry>> {
    let mut cases = Vec::new();
    for &ratio in ratios {
        for &p in valences {
            for &q in valences {
                cases.push((ratio, p, q));
            }
        }
    }
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let start = sorted[0].max(0.5);
    cases
        .par_iter()
        .map(|&(ratio, p, q)| {
            let mut raw = base.to_raw();
            raw.a = ratio * raw.b;
            raw.p = p;
            raw.q = q;
            let params = crate::model::validate_params(&raw)?;
            let mut ladder = ladder_to(start, *sorted.last().unwrap());
            ladder.extend_from_slice(&sorted);
            ladder.sort_by(|x, y| y.partial_cmp(x).unwrap());
            ladder.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs());
            let sols = solve_continuation(&params, &ladder, policy, opts, Seed::Zero)?;
            let ledgers = sols
                .iter()
                .filter(|s| sorted.iter().any(|e| (e - s.eps()).abs() <= 1e-12 * e))
                .map(inequality_suite)
                .collect();
            Ok(GridEntry {
                a: params.a,
                b: params.b,
                p,
                q,
                ledgers,
            })
        })
        .collect()
}
