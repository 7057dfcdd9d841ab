use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::Solution;

/// Both sides of the two integral identities obtained by testing the equation
/// against `r^N U'`, on the whole ball and on `[eps^kappa, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PohozaevReport {
    pub lhs1: f64,
    pub rhs1: f64,
    /// `|lhs1 - rhs1| / max(|lhs1|, |rhs1|)`
    pub residual1: f64,
    pub lhs2: f64,
    pub rhs2: f64,
    pub residual2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub kappa: f64,
    /// Mesh node used in place of `eps^kappa`.
    pub inner_radius: f64,
    /// `|inner_radius - eps^kappa|`
    pub snap_error: f64,
}

fn relative(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn pohozaev_check(sol: &Solution, kappa: f64) -> Result<PohozaevReport> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::KappaOutOfRange(kappa));
    }
    let p = &sol.params;
    let mesh = &sol.mesh;
    let n = p.dim as f64;
    let k = p.ball_measure();
    let eps2 = p.epsilon * p.epsilon;
    let nodes = mesh.nodes();

    let side = |u: f64| {
        k * (p.a / p.p * (p.p * u - sol.log_ip).exp() + p.b / p.q * (-p.q * u - sol.log_iq).exp())
    };
    // midpoint rule on cell gradients
    let cell = |j: usize| {
        let m = mesh.midpoint(j);
        let h = mesh.spacing(j);
        let du = (sol.u[j + 1] - sol.u[j]) / h;
        (m, h, du * du)
    };

    let lambda1 = 0.5 * eps2 / p.radius.powi(p.dim as i32)
        * (0..mesh.cells())
            .map(|j| {
                let (m, h, d2) = cell(j);
                ((n - 2.0) * p.g(m) + m * p.g_prime(m)) * p.radial_factor(m) * d2 * h
            })
            .sum::<f64>();
    let d = p.a - p.b;
    let lhs1 = side(sol.u_boundary());
    let rhs1 = p.radius * p.radius * d * d / (2.0 * n * n * eps2 * p.g_boundary())
        + p.a / p.p
        + p.b / p.q
        + lambda1;

    let target = p.epsilon.powf(kappa).min(p.radius);
    let i0 = mesh.nearest_node(target).max(1).min(mesh.len() - 2);
    let r0 = nodes[i0];
    let du0 = sol.du_nodal()[i0];
    let lambda2 = -0.5 * eps2 * p.g(r0) * du0 * du0
        + 0.5
            * eps2
            * (i0..mesh.cells())
                .map(|j| {
                    let (m, h, d2) = cell(j);
                    (2.0 * (n - 1.0) * p.g(m) + m * p.g_prime(m)) / m * d2 * h
                })
                .sum::<f64>();
    let lhs2 = side(sol.u[i0]);
    let rhs2 = p.a / p.p + p.b / p.q + lambda1 - lambda2;

    Ok(PohozaevReport {
        lhs1,
        rhs1,
        residual1: relative(lhs1, rhs1),
        lhs2,
        rhs2,
        residual2: relative(lhs2, rhs2),
        lambda1,
        lambda2,
        kappa,
        inner_radius: r0,
        snap_error: (r0 - target).abs(),
    })
}
