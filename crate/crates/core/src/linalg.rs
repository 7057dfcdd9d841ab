//! Structured solves for the Newton systems.
//!
//! The Jacobian of the discrete problem is a tridiagonal matrix plus two rank-one
//! terms coming from the non-local integrals, bordered by the zero-mean
//! constraint row and column:
//!
//! ```text
//! [ T + u1 v1^T + u2 v2^T   c ] [x]   [f]
//! [ c^T                     0 ] [m] = [g]
//! ```
//!
//! `T` is factored once; the border is eliminated through the Schur complement
//! `c^T T^{-1} c` and the two rank-one terms through a 2x2 capacitance matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Tridiagonal {
            lower: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas factorization without pivoting.
    pub fn factor(&self) -> Result<TridiagonalLu> {
        let n = self.len();
        let scale = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut pivots = Vec::with_capacity(n);
        let mut multipliers = Vec::with_capacity(n.saturating_sub(1));
        let mut prev = self.diag[0];
        for i in 0..n {
            if i > 0 {
                let l = self.lower[i - 1] / prev;
                multipliers.push(l);
                prev = self.diag[i] - l * self.upper[i - 1];
            }
            if !prev.is_finite() || prev.abs() <= f64::EPSILON * scale * 1e-4 {
                return Err(Error::SingularLinearSystem);
            }
            pivots.push(prev);
        }
        Ok(TridiagonalLu {
            pivots,
            multipliers,
            upper: self.upper.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    pivots: Vec<f64>,
    multipliers: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.pivots.len();
        let mut y = b.to_vec();
        for i in 1..n {
            y[i] -= self.multipliers[i - 1] * y[i - 1];
        }
        y[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            y[i] = (y[i] - self.upper[i] * y[i + 1]) / self.pivots[i];
        }
        y
    }
}

/// `T + sum_k u_k v_k^T`, bordered by `c`.
#[derive(Debug, Clone)]
pub struct BorderedJacobian {
    pub local: Tridiagonal,
    pub low_rank: Vec<(Vec<f64>, Vec<f64>)>,
    pub border: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BorderedJacobian {
    pub fn len(&self) -> usize {
        self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty()
    }

    /// Applies the unbordered block `T + U V^T`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.local.matvec(x);
        for (u, v) in &self.low_rank {
            let s = dot(v, x);
            y.iter_mut().zip(u).for_each(|(yi, ui)| *yi += ui * s);
        }
        y
    }

    /// Dense `(n+1) x (n+1)` form including the border.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            m[(i, i)] = self.local.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.local.upper[i];
                m[(i + 1, i)] = self.local.lower[i];
            }
            m[(i, n)] = self.border[i];
            m[(n, i)] = self.border[i];
        }
        for (u, v) in &self.low_rank {
            for i in 0..n {
                if u[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m[(i, j)] += u[i] * v[j];
                }
            }
        }
        m
    }

    /// Solves the bordered system by tridiagonal factorization, Schur
    /// elimination of the border and a Woodbury correction for the low-rank part.
    pub fn solve(&self, f: &[f64], g: f64) -> Result<(Vec<f64>, f64)> {
        let lu = self.local.factor()?;
        let z = lu.solve(&self.border);
        let schur = dot(&self.border, &z);
        let scale = dot(&self.border, &self.border).sqrt() * dot(&z, &z).sqrt();
        if !(schur.abs() > 1e-14 * scale) {
            return Err(Error::SingularLinearSystem);
        }
        let base = |rhs: &[f64], g: f64| -> (Vec<f64>, f64) {
            let y = lu.solve(rhs);
            let mu = (dot(&self.border, &y) - g) / schur;
            let x = y.iter().zip(&z).map(|(yi, zi)| yi - zi * mu).collect();
            (x, mu)
        };

        let (mut x, mut mu) = base(f, g);
        let k = self.low_rank.len();
        if k == 0 {
            return Ok((x, mu));
        }
        let cols: Vec<(Vec<f64>, f64)> = self.low_rank.iter().map(|(u, _)| base(u, 0.0)).collect();
        let mut cap = DMatrix::identity(k, k);
        let mut rhs = DVector::zeros(k);
        for (i, (_, v)) in self.low_rank.iter().enumerate() {
            for (j, (wx, _)) in cols.iter().enumerate() {
                cap[(i, j)] += dot(v, wx);
            }
            rhs[i] = dot(v, &x);
        }
        let alpha = cap.lu().solve(&rhs).ok_or(Error::SingularLinearSystem)?;
        for (j, (wx, wmu)) in cols.iter().enumerate() {
            x.iter_mut().zip(wx).for_each(|(xi, w)| *xi -= alpha[j] * w);
            mu -= alpha[j] * wmu;
        }
        if x.iter().any(|v| !v.is_finite()) || !mu.is_finite() {
            return Err(Error::SingularLinearSystem);
        }
        Ok((x, mu))
    }

    /// Dense LU solve of the full bordered system.
    pub fn solve_dense(&self, f: &[f64], g: f64) -> Result<(Vec<f64>, f64)> {
        let n = self.len();
        let mut rhs = DVector::zeros(n + 1);
        rhs.as_mut_slice()[..n].copy_from_slice(f);
        rhs[n] = g;
        let sol = self
            .to_dense()
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularLinearSystem)?;
        Ok((sol.as_slice()[..n].to_vec(), sol[n]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> BorderedJacobian {
        let mut t = Tridiagonal::zeros(n);
        for i in 0..n {
            t.diag[i] = -2.0 - 0.1 * i as f64;
            if i + 1 < n {
                t.upper[i] = 0.7 + 0.01 * i as f64;
                t.lower[i] = 0.9 - 0.02 * i as f64;
            }
        }
        let u1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let v1: Vec<f64> = (0..n).map(|i| 0.1 + (i as f64 * 0.7).cos().abs()).collect();
        let u2: Vec<f64> = (0..n).map(|i| 0.05 * i as f64).collect();
        let v2: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        BorderedJacobian {
            local: t,
            low_rank: vec![(u1, v1), (u2, v2)],
            border: (0..n).map(|i| 0.5 + i as f64 / n as f64).collect(),
        }
    }

    #[test]
    fn thomas_matches_dense() {
        let j = sample(12);
        let b: Vec<f64> = (0..12).map(|i| (i as f64).cos()).collect();
        let x = j.local.factor().unwrap().solve(&b);
        let back = j.local.matvec(&x);
        for (a, b) in back.iter().zip(&b) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn structured_matches_dense() {
        for n in [3, 8, 33, 64] {
            let j = sample(n);
            let f: Vec<f64> = (0..n).map(|i| (1.3 * i as f64).sin()).collect();
            let (xs, ms) = j.solve(&f, 0.25).unwrap();
            let (xd, md) = j.solve_dense(&f, 0.25).unwrap();
            let err = xs
                .iter()
                .zip(&xd)
                .map(|(a, b)| (a - b).abs())
                .fold((ms - md).abs(), f64::max);
            assert!(err < 1e-10, "n={n} err={err}");
        }
    }

    #[test]
    fn residual_of_structured_solve() {
        let j = sample(20);
        let f: Vec<f64> = (0..20).map(|i| i as f64 * 0.1 - 1.0).collect();
        let (x, mu) = j.solve(&f, -0.5).unwrap();
        let ax = j.apply(&x);
        for i in 0..20 {
            assert!((ax[i] + j.border[i] * mu - f[i]).abs() < 1e-11);
        }
        assert!((dot(&j.border, &x) + 0.5).abs() < 1e-11);
    }

    #[test]
    fn singular_tridiagonal_detected() {
        let t = Tridiagonal {
            lower: vec![1.0],
            diag: vec![1.0, 1.0],
            upper: vec![1.0],
        };
        assert!(matches!(t.factor(), Err(Error::SingularLinearSystem)));
    }
}
