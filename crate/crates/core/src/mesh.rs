//! Boundary-layer-adapted radial grids on `[0, R]` with trapezoidal quadrature.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const DEFAULT_NODE_CAP: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSpec {
    Uniform {
        cells: usize,
    },
    /// Spacing `h0` at `r = R`, multiplied by `ratio` per cell moving inwards
    /// until it reaches `cap`, then uniform with spacing at most `cap`.
    Geometric {
        h0: f64,
        ratio: f64,
        cap: f64,
    },
    /// Uniform on `[0, transition]` and on `[transition, R]`.
    TwoZone {
        transition: f64,
        inner_cells: usize,
        outer_cells: usize,
    },
}

impl MeshSpec {
    /// `h0 = eps^2 R / 20`, `ratio = 1.15`, `cap = R / 200`.
    pub fn geometric_default(params: &ModelParams) -> Self {
        let eps = params.epsilon;
        MeshSpec::Geometric {
            h0: eps * eps * params.radius / 20.0,
            ratio: 1.15,
            cap: params.radius / 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    /// `r^{N-1} dr`
    Radial,
    /// `dr`
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh {
    nodes: Vec<f64>,
    radial_weights: Vec<f64>,
    plain_weights: Vec<f64>,
    spec: MeshSpec,
    dim: usize,
}

pub fn build_mesh(params: &ModelParams, spec: &MeshSpec) -> Result<Mesh> {
    build_mesh_capped(params, spec, DEFAULT_NODE_CAP)
}

pub fn build_mesh_capped(params: &ModelParams, spec: &MeshSpec, cap: usize) -> Result<Mesh> {
    let radius = params.radius;
    let nodes = match *spec {
        MeshSpec::Uniform { cells } => {
            if cells == 0 {
                return Err(Error::DegenerateSpec(
                    "uniform mesh needs at least one cell".into(),
                ));
            }
            check_cap(cells + 1, cap)?;
            let mut nodes: Vec<f64> = (0..=cells)
                .map(|i| radius * i as f64 / cells as f64)
                .collect();
            nodes[cells] = radius;
            nodes
        }
        MeshSpec::Geometric {
            h0,
            ratio,
            cap: hmax,
        } => geometric_nodes(radius, h0, ratio, hmax, cap)?,
        MeshSpec::TwoZone {
            transition,
            inner_cells,
            outer_cells,
        } => {
            if !(transition > 0.0 && transition < radius) || inner_cells == 0 || outer_cells == 0 {
                return Err(Error::DegenerateSpec(format!(
                    "two-zone mesh needs 0 < transition < R and nonzero cell counts (transition {transition})"
                )));
            }
            check_cap(inner_cells + outer_cells + 1, cap)?;
            let mut nodes: Vec<f64> = (0..inner_cells)
                .map(|i| transition * i as f64 / inner_cells as f64)
                .collect();
            nodes.extend(
                (0..=outer_cells)
                    .map(|i| transition + (radius - transition) * i as f64 / outer_cells as f64),
            );
            nodes[inner_cells + outer_cells] = radius;
            nodes
        }
    };
    Ok(Mesh::from_nodes(nodes, spec.clone(), params.dim))
}

fn check_cap(nodes: usize, cap: usize) -> Result<()> {
    if nodes > cap {
        Err(Error::MeshTooLarge { nodes, cap })
    } else {
        Ok(())
    }
}

fn geometric_nodes(radius: f64, h0: f64, ratio: f64, hmax: f64, cap: usize) -> Result<Vec<f64>> {
    if !(h0 > 0.0 && h0 < radius) {
        return Err(Error::DegenerateSpec(format!(
            "h0 = {h0} must lie in (0, R)"
        )));
    }
    if !(ratio > 1.0 && ratio <= 2.0) {
        return Err(Error::DegenerateSpec(format!(
            "ratio = {ratio} must lie in (1, 2]"
        )));
    }
    if !(hmax >= h0) {
        return Err(Error::DegenerateSpec(format!(
            "cap = {hmax} must be at least h0 = {h0}"
        )));
    }
    // distances from R, growing inwards
    let mut dist = vec![0.0];
    let mut h = h0;
    loop {
        let d = *dist.last().unwrap();
        if h >= hmax {
            let rest = radius - d;
            let cells = (rest / hmax).ceil().max(1.0) as usize;
            check_cap(dist.len() + cells, cap)?;
            for k in 1..cells {
                dist.push(d + rest * k as f64 / cells as f64);
            }
            break;
        }
        if d + h >= radius {
            let rest = radius - d;
            let prev = if dist.len() > 1 {
                d - dist[dist.len() - 2]
            } else {
                h
            };
            if rest < 0.5 * prev && dist.len() > 1 {
                dist.pop();
            }
            break;
        }
        dist.push(d + h);
        check_cap(dist.len() + 1, cap)?;
        h = (h * ratio).min(hmax);
    }
    dist.push(radius);
    let mut nodes: Vec<f64> = dist.iter().rev().map(|d| radius - d).collect();
    nodes[0] = 0.0;
    *nodes.last_mut().unwrap() = radius;
    Ok(nodes)
}

impl Mesh {
    /// Builds a mesh from strictly increasing nodes starting at 0.
    pub fn from_nodes(nodes: Vec<f64>, spec: MeshSpec, dim: usize) -> Mesh {
        debug_assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        let m = nodes.len();
        let mut plain = vec![0.0; m];
        for i in 0..m - 1 {
            let h = nodes[i + 1] - nodes[i];
            plain[i] += 0.5 * h;
            plain[i + 1] += 0.5 * h;
        }
        let radial = plain
            .iter()
            .zip(&nodes)
            .map(|(w, r)| w * r.powi(dim as i32 - 1))
            .collect();
        Mesh {
            nodes,
            radial_weights: radial,
            plain_weights: plain,
            spec,
            dim,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn spacing(&self, cell: usize) -> f64 {
        self.nodes[cell + 1] - self.nodes[cell]
    }

    pub fn midpoint(&self, cell: usize) -> f64 {
        0.5 * (self.nodes[cell] + self.nodes[cell + 1])
    }

    pub fn weights(&self, weight: Weight) -> &[f64] {
        match weight {
            Weight::Radial => &self.radial_weights,
            Weight::Plain => &self.plain_weights,
        }
    }

    /// Trapezoidal value of `int_0^R f(r) r^{N-1} dr` or `int_0^R f(r) dr`.
    pub fn integrate(&self, samples: &[f64], weight: Weight) -> Result<f64> {
        if samples.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: samples.len(),
            });
        }
        Ok(self
            .weights(weight)
            .iter()
            .zip(samples)
            .map(|(w, f)| w * f)
            .sum())
    }

    /// Splits every cell in two.
    pub fn refined(&self) -> Mesh {
        let mut nodes = Vec::with_capacity(2 * self.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.radius());
        Mesh::from_nodes(nodes, self.spec.clone(), self.dim)
    }

    /// Index of the cell containing `r` (the last cell for `r = R`).
    pub fn locate(&self, r: f64) -> usize {
        self.nodes
            .partition_point(|&x| x <= r)
            .saturating_sub(1)
            .min(self.cells() - 1)
    }

    /// Index of the node closest to `r`.
    pub fn nearest_node(&self, r: f64) -> usize {
        let c = self.locate(r);
        if (r - self.nodes[c]).abs() <= (self.nodes[c + 1] - r).abs() {
            c
        } else {
            c + 1
        }
    }

    /// Number of nodes in the closed interval `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.nodes.iter().filter(|&&r| r >= lo && r <= hi).count()
    }

    /// Writes `node,r,radial_weight,plain_weight` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node,r,radial_weight,plain_weight")?;
        for (i, r) in self.nodes.iter().enumerate() {
            writeln!(
                out,
                "{i},{r:.16e},{:.16e},{:.16e}",
                self.radial_weights[i], self.plain_weights[i]
            )?;
        }
        Ok(())
    }
}

/// Free-function form of [`Mesh::integrate`].
pub fn integrate_radial(mesh: &Mesh, samples: &[f64], weight: Weight) -> Result<f64> {
    mesh.integrate(samples, weight)
}
