//! Best rank-one approximation by tensor power iteration with tensor-SVD
//! initialization, plus residual diagnostics for the singular-value
//! identities.

use crate::error::{Error, Result};
use crate::mat::{dot, normalize, Mat};
use crate::rng;
use crate::spectral::leading_eigenvector;
use crate::tensor::{contract2, contract3, Tensor3};

/// Rank-one factor `(lambda, u, v, w)` with unit vectors and `lambda >= 0`.
#[derive(Debug, Clone)]
pub struct RankOneFactor {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

/// Initialization of the power iteration.
#[derive(Debug, Clone)]
pub enum InitStrategy {
    /// Leading singular vectors of the three unfoldings.
    Svd,
    /// Caller-provided starting triple.
    Given(Vec<f64>, Vec<f64>, Vec<f64>),
    /// Normalized Gaussian vectors from the given seed.
    Random(u64),
}

#[derive(Debug, Clone)]
pub struct PowerIterConfig {
    /// Stop when the largest per-mode vector change over a sweep drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub init: InitStrategy,
}

impl Default for PowerIterConfig {
    fn default() -> Self {
        PowerIterConfig {
            tol: 1e-10,
            max_iter: 1000,
            init: InitStrategy::Svd,
        }
    }
}

/// Gram matrix of the mode-`mode` unfolding (a `p x p` matrix).
fn unfolding_gram(t: &Tensor3, mode: usize) -> Mat {
    let p = t.dim();
    let mut g = Mat::zeros(p, p);
    match mode {
        1 => {
            for i in 0..p {
                let si = t.slab1(i);
                for i2 in i..p {
                    let v = dot(si, t.slab1(i2));
                    g.set(i, i2, v);
                    g.set(i2, i, v);
                }
            }
        }
        2 => {
            for i in 0..p {
                for j in 0..p {
                    let fj = t.fiber3(i, j);
                    for j2 in j..p {
                        let v = dot(fj, t.fiber3(i, j2));
                        g.set(j, j2, g.get(j, j2) + v);
                    }
                }
            }
            for j in 0..p {
                for j2 in (j + 1)..p {
                    g.set(j2, j, g.get(j, j2));
                }
            }
        }
        _ => {
            for i in 0..p {
                for j in 0..p {
                    let f = t.fiber3(i, j);
                    for k in 0..p {
                        let fk = f[k];
                        if fk == 0.0 {
                            continue;
                        }
                        let row = g.row_mut(k);
                        for k2 in k..p {
                            row[k2] += fk * f[k2];
                        }
                    }
                }
            }
            for k in 0..p {
                for k2 in (k + 1)..p {
                    g.set(k2, k, g.get(k, k2));
                }
            }
        }
    }
    g
}

/// Leading left singular vectors of the three unfoldings, each unit-norm with
/// a deterministic sign.
pub fn svd_init(t: &Tensor3) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if t.frobenius_norm() == 0.0 {
        return Err(Error::DegenerateInput("zero tensor has no singular vectors".into()));
    }
    let (_, u) = leading_eigenvector(&unfolding_gram(t, 1))?;
    let (_, v) = leading_eigenvector(&unfolding_gram(t, 2))?;
    let (_, w) = leading_eigenvector(&unfolding_gram(t, 3))?;
    Ok((u, v, w))
}

/// Residual norms of the three defining identities at a factor:
/// `||T(.,v,w) - lambda u||` and cyclic.
pub fn residuals(t: &Tensor3, f: &RankOneFactor) -> Result<(f64, f64, f64)> {
    let cu = contract2(t, &f.v, &f.w, 1)?;
    let cv = contract2(t, &f.u, &f.w, 2)?;
    let cw = contract2(t, &f.u, &f.v, 3)?;
    let r = |c: &[f64], x: &[f64]| {
        c.iter()
            .zip(x)
            .map(|(a, b)| (a - f.lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    Ok((r(&cu, &f.u), r(&cv, &f.v), r(&cw, &f.w)))
}

/// Tensor power iteration: cyclically replaces each vector by the normalized
/// contraction of the other two until a full sweep moves nothing.
pub fn power_iteration(t: &Tensor3, cfg: &PowerIterConfig) -> Result<RankOneFactor> {
    if t.frobenius_norm() == 0.0 {
        return Err(Error::DegenerateInput("zero tensor has no rank-one factor".into()));
    }
    let p = t.dim();
    let (mut u, mut v, mut w) = match &cfg.init {
        InitStrategy::Svd => svd_init(t)?,
        InitStrategy::Given(u0, v0, w0) => {
            let mut u = u0.clone();
            let mut v = v0.clone();
            let mut w = w0.clone();
            if u.len() != p || v.len() != p || w.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: u.len() });
            }
            normalize(&mut u)?;
            normalize(&mut v)?;
            normalize(&mut w)?;
            (u, v, w)
        }
        InitStrategy::Random(seed) => {
            let mut r = rng::stream(*seed);
            let mut u = rng::gaussian_vec(&mut r, p);
            let mut v = rng::gaussian_vec(&mut r, p);
            let mut w = rng::gaussian_vec(&mut r, p);
            normalize(&mut u)?;
            normalize(&mut v)?;
            normalize(&mut w)?;
            (u, v, w)
        }
    };

    let mut last_delta = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let mut nu = contract2(t, &v, &w, 1)?;
        if normalize(&mut nu).is_err() {
            return Err(Error::DegenerateInput(
                "zero contraction encountered during power iteration".into(),
            ));
        }
        let mut nv = contract2(t, &nu, &w, 2)?;
        if normalize(&mut nv).is_err() {
            return Err(Error::DegenerateInput(
                "zero contraction encountered during power iteration".into(),
            ));
        }
        let mut nw = contract2(t, &nu, &nv, 3)?;
        if normalize(&mut nw).is_err() {
            return Err(Error::DegenerateInput(
                "zero contraction encountered during power iteration".into(),
            ));
        }
        let delta = vec_delta(&nu, &u).max(vec_delta(&nv, &v)).max(vec_delta(&nw, &w));
        u = nu;
        v = nv;
        w = nw;
        if delta < cfg.tol {
            let mut lambda = contract3(t, &u, &v, &w)?;
            if lambda < 0.0 {
                // flip one vector so the reported scalar is nonnegative
                for x in &mut u {
                    *x = -*x;
                }
                lambda = -lambda;
            }
            return Ok(RankOneFactor { lambda, u, v, w });
        }
        last_delta = delta;
    }
    Err(Error::NoConvergence {
        context: "tensor power iteration",
        iterations: cfg.max_iter,
        residual: last_delta,
    })
}

fn vec_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
