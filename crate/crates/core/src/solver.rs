//! Conservative finite-volume discretization of the radial problem and its
//! Newton/continuation solvers.
//!
//! Node `i` owns the control volume between the neighbouring cell midpoints.
//! The face flux is `V = g r^{N-1} U'`, zero at `r = 0` and prescribed at `r = R`.
//! The source term is integrated with the mesh's radial trapezoid weights, and
//! the same weights define the non-local integrals, so the discrete charge
//! balance holds exactly for every state.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::linalg::{BorderedJacobian, Tridiagonal};
use crate::mesh::{build_mesh, Mesh, MeshSpec, Weight};
use crate::model::{ModelParams, Regime};

/// Residual, Jacobian and non-local integrals at a given nodal state.
#[derive(Debug, Clone)]
pub struct Assembly {
    /// Finite-volume residual per node (without the gauge multiplier).
    pub residual: Vec<f64>,
    /// `sum_i c_i U_i`, the discrete `int r^{N-1} U dr`.
    pub gauge: f64,
    pub jacobian: BorderedJacobian,
    pub log_ip: f64,
    pub log_iq: f64,
    /// Face fluxes `g r^{N-1} U'` at `0`, every cell midpoint, and `R`.
    pub face_flux: Vec<f64>,
}

impl Assembly {
    pub fn ip(&self) -> f64 {
        self.log_ip.exp()
    }

    pub fn iq(&self) -> f64 {
        self.log_iq.exp()
    }
}

/// `(A e^{pU_i} / I_p, B e^{-qU_i} / I_q)` at every node, with max-shifted exponents.
fn species_terms(
    params: &ModelParams,
    weights: &[f64],
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    let umax = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let umin = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let ea: Vec<f64> = u.iter().map(|x| (params.p * (x - umax)).exp()).collect();
    let eb: Vec<f64> = u.iter().map(|x| (-params.q * (x - umin)).exp()).collect();
    let sp: f64 = weights.iter().zip(&ea).map(|(c, e)| c * e).sum();
    let sq: f64 = weights.iter().zip(&eb).map(|(c, e)| c * e).sum();
    if !(sp > 0.0 && sq > 0.0 && sp.is_finite() && sq.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    let a = ea.iter().map(|e| params.a * e / sp).collect();
    let b = eb.iter().map(|e| params.b * e / sq).collect();
    Ok((a, b, params.p * umax + sp.ln(), -params.q * umin + sq.ln()))
}

/// Face knots: `0`, every cell midpoint, `R`.
pub fn face_knots(mesh: &Mesh) -> Vec<f64> {
    let mut k = Vec::with_capacity(mesh.cells() + 2);
    k.push(0.0);
    k.extend((0..mesh.cells()).map(|j| mesh.midpoint(j)));
    k.push(mesh.radius());
    k
}

pub fn assemble_system(params: &ModelParams, mesh: &Mesh, u: &[f64]) -> Result<Assembly> {
    let n = mesh.len();
    if u.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: u.len(),
        });
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    let c = mesh.weights(Weight::Radial);
    let (a, b, log_ip, log_iq) = species_terms(params, c, u)?;
    let k = params.ball_measure();
    let eps2 = params.epsilon * params.epsilon;

    let conductance: Vec<f64> = (0..mesh.cells())
        .map(|j| {
            let m = mesh.midpoint(j);
            params.g(m) * params.radial_factor(m) / mesh.spacing(j)
        })
        .collect();
    let mut face_flux = Vec::with_capacity(n + 1);
    face_flux.push(0.0);
    face_flux.extend((0..mesh.cells()).map(|j| conductance[j] * (u[j + 1] - u[j])));
    face_flux.push(params.boundary_flux() / eps2);

    let mut residual = Vec::with_capacity(n);
    let mut local = Tridiagonal::zeros(n);
    for i in 0..n {
        let right = if i + 1 == n {
            params.boundary_flux()
        } else {
            eps2 * face_flux[i + 1]
        };
        let left = eps2 * face_flux[i];
        residual.push(right - left - c[i] * k * (a[i] - b[i]));

        let mut d = -c[i] * k * (params.p * a[i] + params.q * b[i]);
        if i > 0 {
            d -= eps2 * conductance[i - 1];
            local.lower[i - 1] = eps2 * conductance[i - 1];
        }
        if i + 1 < n {
            d -= eps2 * conductance[i];
            local.upper[i] = eps2 * conductance[i];
        }
        local.diag[i] = d;
    }
    if residual.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    let ca: Vec<f64> = c.iter().zip(&a).map(|(c, a)| c * a).collect();
    let cb: Vec<f64> = c.iter().zip(&b).map(|(c, b)| c * b).collect();
    let jacobian = BorderedJacobian {
        local,
        low_rank: vec![
            (
                ca.iter().map(|x| k * params.p * x).collect(),
                ca.iter().map(|x| x / params.a).collect(),
            ),
            (
                cb.iter().map(|x| k * params.q * x).collect(),
                cb.iter().map(|x| x / params.b).collect(),
            ),
        ],
        border: c.to_vec(),
    };
    Ok(Assembly {
        residual,
        gauge: c.iter().zip(u).map(|(c, u)| c * u).sum(),
        jacobian,
        log_ip,
        log_iq,
        face_flux,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Tridiagonal factorization plus low-rank/border elimination.
    Structured,
    /// Dense LU of the full bordered Jacobian.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Tolerance on the residual infinity norm relative to the boundary flux.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest line-search step before giving up.
    pub min_step: f64,
    pub linear: LinearSolver,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            min_step: 2f64.powi(-20),
            linear: LinearSolver::Structured,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gauge {
    /// `int r^{N-1} U dr = 0`, the Neumann problem.
    ZeroMean,
    /// `U(R) = 0`.
    BoundaryPinned,
    /// `U(R) + eta U'(R) = 0`.
    Robin { eta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonDiagnostics {
    pub iterations: usize,
    /// Final residual infinity norm relative to the residual scale.
    pub residual: f64,
    /// Final `|int r^{N-1} U dr|` relative to the ball measure.
    pub gauge_residual: f64,
    /// Epsilons solved so far along the continuation, ending with this one.
    pub path: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub params: ModelParams,
    pub mesh: Mesh,
    pub u: Vec<f64>,
    /// Flux `g r^{N-1} U'` at [`face_knots`].
    pub face_flux: Vec<f64>,
    pub log_ip: f64,
    pub log_iq: f64,
    pub gauge: Gauge,
    pub diagnostics: NewtonDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointValue {
    pub u: f64,
    pub du: f64,
    pub rho: f64,
}

fn residual_scale(params: &ModelParams) -> f64 {
    let f = params.boundary_flux().abs();
    if f > 0.0 {
        f
    } else {
        params.ball_measure() * params.a.max(params.b)
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn trivial_solution(params: &ModelParams, mesh: &Mesh) -> Solution {
    let log_measure = mesh
        .integrate(&vec![1.0; mesh.len()], Weight::Radial)
        .unwrap()
        .ln();
    Solution {
        params: params.clone(),
        mesh: mesh.clone(),
        u: vec![0.0; mesh.len()],
        face_flux: vec![0.0; mesh.cells() + 2],
        log_ip: log_measure,
        log_iq: log_measure,
        gauge: Gauge::ZeroMean,
        diagnostics: NewtonDiagnostics {
            iterations: 0,
            residual: 0.0,
            gauge_residual: 0.0,
            path: vec![params.epsilon],
        },
    }
}

/// Damped Newton iteration on the bordered zero-mean system.
pub fn solve_newton(
    params: &ModelParams,
    mesh: &Mesh,
    init: &[f64],
    opts: &NewtonOptions,
) -> Result<Solution> {
    if init.len() != mesh.len() {
        return Err(Error::LengthMismatch {
            expected: mesh.len(),
            found: init.len(),
        });
    }
    if init.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    if params.regime() == Regime::Neutral {
        return Ok(trivial_solution(params, mesh));
    }
    let scale = residual_scale(params);
    let measure = params.ball_measure();
    let merit = |asm: &Assembly| (norm_inf(&asm.residual) / scale).max(asm.gauge.abs() / measure);
    let mut u = init.to_vec();
    let mut asm = assemble_system(params, mesh, &u)?;
    let mut iterations = 0;
    loop {
        let current = merit(&asm);
        if current <= opts.tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NewtonDiverged {
                eps: params.epsilon,
                iterations,
                residual: current,
            });
        }
        iterations += 1;
        let f: Vec<f64> = asm.residual.iter().map(|x| -x).collect();
        let (step, _) = match opts.linear {
            LinearSolver::Structured => asm.jacobian.solve(&f, -asm.gauge)?,
            LinearSolver::Dense => asm.jacobian.solve_dense(&f, -asm.gauge)?,
        };
        let phi0 = norm2(&asm.residual) / scale + asm.gauge.abs() / measure;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(x, d)| x + alpha * d).collect();
            if let Ok(next) = assemble_system(params, mesh, &trial) {
                let phi = norm2(&next.residual) / scale + next.gauge.abs() / measure;
                if phi <= (1.0 - 1e-4 * alpha) * phi0 || merit(&next) <= opts.tol {
                    u = trial;
                    asm = next;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < opts.min_step {
                return Err(Error::NewtonDiverged {
                    eps: params.epsilon,
                    iterations,
                    residual: current,
                });
            }
        }
    }
    Ok(Solution {
        params: params.clone(),
        mesh: mesh.clone(),
        face_flux: asm.face_flux.clone(),
        log_ip: asm.log_ip,
        log_iq: asm.log_iq,
        gauge: Gauge::ZeroMean,
        diagnostics: NewtonDiagnostics {
            iterations,
            residual: norm_inf(&asm.residual) / scale,
            gauge_residual: asm.gauge.abs() / measure,
            path: vec![params.epsilon],
        },
        u,
    })
}

/// How the mesh is chosen for each epsilon of a continuation ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshPolicy {
    /// `h0 = h0_factor eps^2 R`, `cap = cap_factor R`, rebuilt per epsilon,
    /// then every cell split `refinements` times.
    Geometric {
        h0_factor: f64,
        ratio: f64,
        cap_factor: f64,
        #[serde(default)]
        refinements: u32,
    },
    /// The same mesh spec for every epsilon.
    Fixed { spec: MeshSpec },
}

impl Default for MeshPolicy {
    fn default() -> Self {
        MeshPolicy::Geometric {
            h0_factor: 1.0 / 20.0,
            ratio: 1.15,
            cap_factor: 1.0 / 200.0,
            refinements: 0,
        }
    }
}

impl MeshPolicy {
    pub fn refined(&self, times: u32) -> MeshPolicy {
        match self.clone() {
            MeshPolicy::Geometric {
                h0_factor,
                ratio,
                cap_factor,
                refinements,
            } => MeshPolicy::Geometric {
                h0_factor,
                ratio,
                cap_factor,
                refinements: refinements + times,
            },
            fixed => fixed,
        }
    }

    pub fn mesh_for(&self, params: &ModelParams) -> Result<Mesh> {
        match self {
            MeshPolicy::Geometric {
                h0_factor,
                ratio,
                cap_factor,
                refinements,
            } => {
                let eps = params.epsilon;
                let r = params.radius;
                let spec = MeshSpec::Geometric {
                    h0: (h0_factor * eps * eps * r).min(cap_factor * r),
                    ratio: *ratio,
                    cap: cap_factor * r,
                };
                let mut mesh = build_mesh(params, &spec)?;
                for _ in 0..*refinements {
                    mesh = mesh.refined();
                }
                Ok(mesh)
            }
            MeshPolicy::Fixed { spec } => build_mesh(params, spec),
        }
    }
}

/// Initial guess for the first rung of a continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seed {
    #[default]
    Zero,
    /// Boundary-layer profile clipped at zero, shifted to zero mean.
    LayerProfile,
}

/// `eps_k = start * factor^k` for `k = 0..count`.
pub fn geometric_ladder(start: f64, factor: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * factor.powi(k as i32)).collect()
}

/// Default ladder `eps_start * 2^{-k/2}` stopping at (and including) `target`.
pub fn ladder_to(start: f64, target: f64) -> Vec<f64> {
    let factor = 0.5f64.sqrt();
    let mut out = vec![];
    let mut e = start;
    while e > target * (1.0 + 1e-9) {
        out.push(e);
        e *= factor;
    }
    if out.last().map(|&l| l / target < 1.2).unwrap_or(false) && out.len() > 1 {
        out.pop();
    }
    out.push(target);
    out
}

pub fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidLadder("empty ladder".into()));
    }
    if ladder.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidLadder("epsilons must be positive".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidLadder(
            "ladder must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

fn seed_profile(params: &ModelParams, mesh: &Mesh, seed: Seed) -> Vec<f64> {
    match (seed, params.regime()) {
        (Seed::Zero, _) | (_, Regime::Neutral) => vec![0.0; mesh.len()],
        (Seed::LayerProfile, regime) => {
            let mut u: Vec<f64> = mesh
                .nodes()
                .iter()
                .map(|&r| {
                    let v = asymptotics::layer_profile(params, r).unwrap_or(0.0);
                    match regime {
                        Regime::Depleted => v.min(0.0),
                        _ => v.max(0.0),
                    }
                })
                .collect();
            let mean = mesh.integrate(&u, Weight::Radial).unwrap() / params.ball_measure();
            u.iter_mut().for_each(|x| *x -= mean);
            u
        }
    }
}

/// Solves a decreasing ladder of epsilons, seeding each rung with the previous
/// solution interpolated onto the new mesh.
pub fn solve_continuation(
    params: &ModelParams,
    ladder: &[f64],
    policy: &MeshPolicy,
    opts: &NewtonOptions,
    seed: Seed,
) -> Result<Vec<Solution>> {
    validate_ladder(ladder)?;
    let mut out: Vec<Solution> = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let p = params.with_epsilon(eps)?;
        let mesh = policy.mesh_for(&p)?;
        let init = match out.last() {
            Some(prev) => prev.interpolate_onto(&mesh),
            None => seed_profile(&p, &mesh, seed),
        };
        let mut sol = solve_newton(&p, &mesh, &init, opts)?;
        let mut path: Vec<f64> = out
            .last()
            .map(|s| s.diagnostics.path.clone())
            .unwrap_or_default();
        path.push(eps);
        sol.diagnostics.path = path;
        out.push(sol);
    }
    Ok(out)
}

/// Robin solution from a zero-mean Neumann solution by a constant shift.
pub fn robin_transform(neumann: &Solution, eta: f64) -> Solution {
    let p = &neumann.params;
    let boundary_value =
        eta * p.radius * (p.b - p.a) / (p.epsilon * p.epsilon * p.dim as f64 * p.g_boundary());
    let mut sol = neumann.shifted(boundary_value - neumann.u_boundary());
    sol.gauge = Gauge::Robin { eta };
    sol.params.eta = Some(eta);
    sol
}

pub fn evaluate_solution(sol: &Solution, r: f64) -> Result<PointValue> {
    sol.evaluate(r)
}

pub(crate) fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let k = xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}

impl Solution {
    pub fn eps(&self) -> f64 {
        self.params.epsilon
    }

    pub fn ip(&self) -> f64 {
        self.log_ip.exp()
    }

    pub fn iq(&self) -> f64 {
        self.log_iq.exp()
    }

    pub fn u_boundary(&self) -> f64 {
        *self.u.last().unwrap()
    }

    pub fn u_center(&self) -> f64 {
        self.u[0]
    }

    /// Adds a constant to the potential; fluxes are unchanged.
    pub fn shifted(&self, shift: f64) -> Solution {
        let mut s = self.clone();
        s.u.iter_mut().for_each(|x| *x += shift);
        s.log_ip += self.params.p * shift;
        s.log_iq -= self.params.q * shift;
        s
    }

    /// Same profile in the `U(R) = 0` gauge.
    pub fn pinned_at_boundary(&self) -> Solution {
        let mut s = self.shifted(-self.u_boundary());
        s.gauge = Gauge::BoundaryPinned;
        s
    }

    /// `A e^{pU} / I_p - B e^{-qU} / I_q` for a potential value.
    pub fn bracket(&self, u: f64) -> f64 {
        let p = &self.params;
        p.a * (p.p * u - self.log_ip).exp() - p.b * (-p.q * u - self.log_iq).exp()
    }

    /// `p A e^{pU} / I_p + q B e^{-qU} / I_q`.
    pub fn weighted_sum(&self, u: f64) -> f64 {
        let p = &self.params;
        p.p * p.a * (p.p * u - self.log_ip).exp() + p.q * p.b * (-p.q * u - self.log_iq).exp()
    }

    pub fn rho_of(&self, u: f64) -> f64 {
        -self.params.ball_measure() * self.bracket(u)
    }

    pub fn rho_nodal(&self) -> Vec<f64> {
        self.u.iter().map(|&u| self.rho_of(u)).collect()
    }

    /// Flux `g r^{N-1} U'` interpolated linearly between face knots.
    pub fn flux_at(&self, r: f64) -> f64 {
        interp_linear(&face_knots(&self.mesh), &self.face_flux, r)
    }

    /// `U'` at every node, from the interpolated face flux (zero at `r = 0`).
    pub fn du_nodal(&self) -> Vec<f64> {
        let knots = face_knots(&self.mesh);
        let nodes = self.mesh.nodes();
        let last = nodes.len() - 1;
        nodes
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                if i == 0 {
                    return 0.0;
                }
                let v = if i == last {
                    self.face_flux[last + 1]
                } else {
                    let (l, m) = (knots[i], knots[i + 1]);
                    let t = (r - l) / (m - l);
                    self.face_flux[i] + t * (self.face_flux[i + 1] - self.face_flux[i])
                };
                v / (self.params.g(r) * self.params.radial_factor(r))
            })
            .collect()
    }

    pub fn evaluate(&self, r: f64) -> Result<PointValue> {
        let radius = self.params.radius;
        if !(0.0..=radius).contains(&r) {
            return Err(Error::OutOfDomain { r, radius });
        }
        let u = interp_linear(self.mesh.nodes(), &self.u, r);
        let du = if r == 0.0 {
            0.0
        } else {
            self.flux_at(r) / (self.params.g(r) * self.params.radial_factor(r))
        };
        Ok(PointValue {
            u,
            du,
            rho: self.rho_of(u),
        })
    }

    pub fn interpolate_onto(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.nodes()
            .iter()
            .map(|&r| interp_linear(self.mesh.nodes(), &self.u, r.min(self.params.radius)))
            .collect()
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            epsilon: self.eps(),
            nodes: self.mesh.len(),
            ip: self.ip(),
            iq: self.iq(),
            u_center: self.u_center(),
            u_boundary: self.u_boundary(),
            iterations: self.diagnostics.iterations,
            residual: self.diagnostics.residual,
            gauge: self.gauge,
        }
    }

    /// Writes `r,U,dU_dr,rho` rows at every node.
    pub fn write_profile_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,U,dU_dr,rho")?;
        let du = self.du_nodal();
        for (i, r) in self.mesh.nodes().iter().enumerate() {
            writeln!(
                out,
                "{r:.16e},{:.16e},{:.16e},{:.16e}",
                self.u[i],
                du[i],
                self.rho_of(self.u[i])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSummary {
    pub epsilon: f64,
    pub nodes: usize,
    pub ip: f64,
    pub iq: f64,
    pub u_center: f64,
    pub u_boundary: f64,
    pub iterations: usize,
    pub residual: f64,
    pub gauge: Gauge,
}
