//! Dense order-3 cubic tensors: storage, contractions, norms, and generation
//! of rank-two spiked models with exactly controlled component correlation.
//!
//! Storage is row-major with the third index fastest: entry `(i, j, k)` lives
//! at flat offset `(i*p + j)*p + k`. CSV dumps follow the same order.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mat::{dot, normalize, Mat};
use crate::rng;

/// Dense order-3 tensor with equal mode dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("tensor dimension must be >= 1".into()));
        }
        Ok(Tensor3 {
            dim,
            data: vec![0.0; dim * dim * dim],
        })
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("tensor dimension must be >= 1".into()));
        }
        if data.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateInput("tensor entries must be finite".into()));
        }
        Ok(Tensor3 { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = v;
    }

    /// Flat view in the documented `(i, j, k)`, k-fastest order.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Contiguous slab `T[i, j, :]`.
    #[inline]
    pub fn fiber3(&self, i: usize, j: usize) -> &[f64] {
        let off = (i * self.dim + j) * self.dim;
        &self.data[off..off + self.dim]
    }

    /// Contiguous slab `T[i, :, :]` of length `p*p`.
    #[inline]
    pub fn slab1(&self, i: usize) -> &[f64] {
        let pp = self.dim * self.dim;
        &self.data[i * pp..(i + 1) * pp]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self - s * x ⊗ y ⊗ z`, used when peeling an estimated component.
    pub fn subtract_rank_one(&self, s: f64, x: &[f64], y: &[f64], z: &[f64]) -> Result<Tensor3> {
        self.check_len(x)?;
        self.check_len(y)?;
        self.check_len(z)?;
        let p = self.dim;
        let mut out = self.clone();
        for i in 0..p {
            let sx = s * x[i];
            for j in 0..p {
                let sxy = sx * y[j];
                let off = (i * p + j) * p;
                for k in 0..p {
                    out.data[off + k] -= sxy * z[k];
                }
            }
        }
        Ok(out)
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Debug-scale CSV dump: header line `p`, the dimension on the next line,
    /// then one entry per line in `(i, j, k)` order with `k` fastest.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.data.len() * 20 + 16);
        out.push_str("p\n");
        out.push_str(&format!("{}\n", self.dim));
        for v in &self.data {
            out.push_str(&format!("{v}\n"));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Tensor3> {
        let f = std::fs::File::open(path)?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty tensor file".into()))??;
        if header.trim() != "p" {
            return Err(Error::Parse(format!("expected header 'p', got '{header}'")));
        }
        let dim: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("missing dimension line".into()))??
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad dimension: {e}")))?;
        let mut data = Vec::with_capacity(dim * dim * dim);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            data.push(
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad entry '{t}': {e}")))?,
            );
        }
        Tensor3::from_flat(dim, data)
    }
}

/// Outer product `x ⊗ y ⊗ z`.
pub fn outer3(x: &[f64], y: &[f64], z: &[f64]) -> Result<Tensor3> {
    let p = x.len();
    if y.len() != p || z.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: y.len().max(z.len()),
        });
    }
    let mut t = Tensor3::zeros(p)?;
    for i in 0..p {
        for j in 0..p {
            let xy = x[i] * y[j];
            let off = (i * p + j) * p;
            for k in 0..p {
                t.data[off + k] = xy * z[k];
            }
        }
    }
    Ok(t)
}

/// Contraction of one mode with a vector; the result is a matrix over the two
/// remaining modes in their original order:
/// mode 1 → `[j,k]`, mode 2 → `[i,k]`, mode 3 → `[i,j]`.
pub fn contract1(t: &Tensor3, v: &[f64], mode: usize) -> Result<Mat> {
    t.check_len(v)?;
    let p = t.dim;
    let mut out = Mat::zeros(p, p);
    match mode {
        1 => {
            for i in 0..p {
                let vi = v[i];
                if vi == 0.0 {
                    continue;
                }
                let slab = t.slab1(i);
                for j in 0..p {
                    let row = out.row_mut(j);
                    let fib = &slab[j * p..(j + 1) * p];
                    for k in 0..p {
                        row[k] += vi * fib[k];
                    }
                }
            }
        }
        2 => {
            for i in 0..p {
                let row = out.row_mut(i);
                for j in 0..p {
                    let vj = v[j];
                    if vj == 0.0 {
                        continue;
                    }
                    let fib = t.fiber3(i, j);
                    for k in 0..p {
                        row[k] += vj * fib[k];
                    }
                }
            }
        }
        3 => {
            for i in 0..p {
                let row = out.row_mut(i);
                for j in 0..p {
                    row[j] = dot(t.fiber3(i, j), v);
                }
            }
        }
        _ => return Err(Error::InvalidParameter(format!("mode must be 1..=3, got {mode}"))),
    }
    Ok(out)
}

/// Contraction on two vectors, leaving `free_mode` open.
pub fn contract2(t: &Tensor3, a: &[f64], b: &[f64], free_mode: usize) -> Result<Vec<f64>> {
    t.check_len(a)?;
    t.check_len(b)?;
    let p = t.dim;
    let mut out = vec![0.0; p];
    match free_mode {
        // out[i] = sum_{jk} a_j b_k T[i,j,k]
        1 => {
            for i in 0..p {
                let mut s = 0.0;
                for j in 0..p {
                    if a[j] == 0.0 {
                        continue;
                    }
                    s += a[j] * dot(t.fiber3(i, j), b);
                }
                out[i] = s;
            }
        }
        // out[j] = sum_{ik} a_i b_k T[i,j,k]
        2 => {
            for j in 0..p {
                let mut s = 0.0;
                for i in 0..p {
                    if a[i] == 0.0 {
                        continue;
                    }
                    s += a[i] * dot(t.fiber3(i, j), b);
                }
                out[j] = s;
            }
        }
        // out[k] = sum_{ij} a_i b_j T[i,j,k]
        3 => {
            for i in 0..p {
                let ai = a[i];
                if ai == 0.0 {
                    continue;
                }
                for j in 0..p {
                    let ab = ai * b[j];
                    if ab == 0.0 {
                        continue;
                    }
                    let fib = t.fiber3(i, j);
                    for k in 0..p {
                        out[k] += ab * fib[k];
                    }
                }
            }
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "free_mode must be 1..=3, got {free_mode}"
            )))
        }
    }
    Ok(out)
}

/// Full contraction on three vectors.
pub fn contract3(t: &Tensor3, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    t.check_len(u)?;
    t.check_len(v)?;
    t.check_len(w)?;
    let p = t.dim;
    let mut s = 0.0;
    for i in 0..p {
        if u[i] == 0.0 {
            continue;
        }
        let mut si = 0.0;
        for j in 0..p {
            if v[j] == 0.0 {
                continue;
            }
            si += v[j] * dot(t.fiber3(i, j), w);
        }
        s += u[i] * si;
    }
    Ok(s)
}

/// Mode-1 tensor-matrix product: `out[i,j,k] = sum_{i'} M[i,i'] T[i',j,k]`.
pub fn mode1_matmul(t: &Tensor3, m: &Mat) -> Result<Tensor3> {
    let p = t.dim;
    if m.rows() != p || m.cols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: m.rows().max(m.cols()),
        });
    }
    let pp = p * p;
    let mut out = Tensor3::zeros(p)?;
    for i in 0..p {
        let mrow = m.row(i);
        let dst = &mut out.data[i * pp..(i + 1) * pp];
        for (ip, &c) in mrow.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let src = &t.data[ip * pp..(ip + 1) * pp];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += c * s;
            }
        }
    }
    Ok(out)
}

/// Mode-2 tensor-matrix product: `out[i,j,k] = sum_{j'} M[j,j'] T[i,j',k]`.
pub fn mode2_matmul(t: &Tensor3, m: &Mat) -> Result<Tensor3> {
    let p = t.dim;
    if m.rows() != p || m.cols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: m.rows().max(m.cols()),
        });
    }
    let mut out = Tensor3::zeros(p)?;
    for i in 0..p {
        for j in 0..p {
            let mrow = m.row(j);
            let off = (i * p + j) * p;
            for (jp, &c) in mrow.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let src = t.fiber3(i, jp);
                let dst = &mut out.data[off..off + p];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
    }
    Ok(out)
}

/// Generation parameters of the rank-two spiked model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpikedModel {
    pub p: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl SpikedModel {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidParameter(
                "spiked model needs dimension p >= 2".into(),
            ));
        }
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0) {
            return Err(Error::InvalidParameter("SNRs must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Planted components and the raw (unscaled) noise tensor of one realization.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub noise: Tensor3,
}

/// Draws a unit vector pair with inner product exactly `alpha`.
fn correlated_pair(rng: &mut rng::Stream, p: usize, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut g1 = rng::gaussian_vec(rng, p);
    let mut g2 = rng::gaussian_vec(rng, p);
    normalize(&mut g1)?;
    let c = dot(&g2, &g1);
    for (v, x) in g2.iter_mut().zip(&g1) {
        *v -= c * x;
    }
    normalize(&mut g2)?;
    let s = (1.0 - alpha * alpha).sqrt();
    let second: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| alpha * a + s * b).collect();
    Ok((g1, second))
}

/// Generates `T = beta1 x1⊗y1⊗z1 + beta2 x2⊗y2⊗z2 + W/sqrt(3p)` together
/// with the planted components. Deterministic given the seed.
pub fn gen_spiked(model: &SpikedModel) -> Result<(Tensor3, GroundTruth)> {
    model.validate()?;
    let p = model.p;
    let mut rng = rng::stream(model.seed);
    let (x1, x2) = correlated_pair(&mut rng, p, model.alpha)?;
    let (y1, y2) = correlated_pair(&mut rng, p, model.alpha)?;
    let (z1, z2) = correlated_pair(&mut rng, p, model.alpha)?;

    let n = 3 * p; // mode dimensions are equal, n is never user-supplied
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut noise = Tensor3::zeros(p)?;
    for v in &mut noise.data {
        *v = rng::gaussian(&mut rng);
    }

    let mut t = Tensor3::zeros(p)?;
    for i in 0..p {
        for j in 0..p {
            let c1 = model.beta1 * x1[i] * y1[j];
            let c2 = model.beta2 * x2[i] * y2[j];
            let off = (i * p + j) * p;
            let nf = &noise.data[off..off + p];
            let tf = &mut t.data[off..off + p];
            for k in 0..p {
                tf[k] = c1 * z1[k] + c2 * z2[k] + inv_sqrt_n * nf[k];
            }
        }
    }

    Ok((
        t,
        GroundTruth {
            x1,
            x2,
            y1,
            y2,
            z1,
            z2,
            noise,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::norm;

    fn unit(p: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; p];
        v[i] = 1.0;
        v
    }

    fn random_tensor(p: usize, seed: u64) -> Tensor3 {
        let mut r = rng::stream(seed);
        Tensor3::from_flat(p, rng::gaussian_vec(&mut r, p * p * p)).unwrap()
    }

    fn random_vec(p: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed);
        rng::gaussian_vec(&mut r, p)
    }

    // Naive reference contractions used as oracles.
    fn ref_contract1(t: &Tensor3, v: &[f64], mode: usize) -> Mat {
        let p = t.dim();
        let mut out = Mat::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    let e = t.get(i, j, k);
                    match mode {
                        1 => out.set(j, k, out.get(j, k) + v[i] * e),
                        2 => out.set(i, k, out.get(i, k) + v[j] * e),
                        _ => out.set(i, j, out.get(i, j) + v[k] * e),
                    }
                }
            }
        }
        out
    }

    fn ref_contract2(t: &Tensor3, a: &[f64], b: &[f64], free: usize) -> Vec<f64> {
        let p = t.dim();
        let mut out = vec![0.0; p];
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    let e = t.get(i, j, k);
                    match free {
                        1 => out[i] += a[j] * b[k] * e,
                        2 => out[j] += a[i] * b[k] * e,
                        _ => out[k] += a[i] * b[j] * e,
                    }
                }
            }
        }
        out
    }

    #[test]
    fn outer3_basis_case() {
        let e1 = unit(3, 0);
        let t = outer3(&e1, &e1, &e1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let want = if (i, j, k) == (0, 0, 0) { 1.0 } else { 0.0 };
                    assert_eq!(t.get(i, j, k), want);
                }
            }
        }
    }

    #[test]
    fn outer3_norm_identity() {
        let (x, y, z) = (random_vec(7, 1), random_vec(7, 2), random_vec(7, 3));
        let t = outer3(&x, &y, &z).unwrap();
        // brute-force Frobenius norm
        let mut s = 0.0;
        for i in 0..7 {
            for j in 0..7 {
                for k in 0..7 {
                    s += t.get(i, j, k) * t.get(i, j, k);
                }
            }
        }
        let want = norm(&x) * norm(&y) * norm(&z);
        assert!((s.sqrt() - want).abs() / want < 1e-12);
    }

    #[test]
    fn outer3_multilinearity() {
        let (x, y, z) = (random_vec(4, 4), random_vec(4, 5), random_vec(4, 6));
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let a = outer3(&x2, &y, &z).unwrap();
        let b = outer3(&x, &y, &z).unwrap();
        for (av, bv) in a.data().iter().zip(b.data()) {
            assert!((av - 2.0 * bv).abs() < 1e-13);
        }
    }

    #[test]
    fn contract1_rank_one_identity() {
        let mut x = random_vec(5, 7);
        let mut y = random_vec(5, 8);
        let mut z = random_vec(5, 9);
        normalize(&mut x).unwrap();
        normalize(&mut y).unwrap();
        normalize(&mut z).unwrap();
        let t = outer3(&x, &y, &z).unwrap();
        let m = contract1(&t, &x, 1).unwrap();
        for j in 0..5 {
            for k in 0..5 {
                assert!((m.get(j, k) - y[j] * z[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn contractions_match_triple_loop() {
        for p in 2..=5 {
            let t = random_tensor(p, 100 + p as u64);
            let v = random_vec(p, 200 + p as u64);
            let b = random_vec(p, 300 + p as u64);
            for mode in 1..=3 {
                let fast = contract1(&t, &v, mode).unwrap();
                let slow = ref_contract1(&t, &v, mode);
                for i in 0..p {
                    for j in 0..p {
                        assert!((fast.get(i, j) - slow.get(i, j)).abs() < 1e-13);
                    }
                }
                let fast2 = contract2(&t, &v, &b, mode).unwrap();
                let slow2 = ref_contract2(&t, &v, &b, mode);
                for i in 0..p {
                    assert!((fast2[i] - slow2[i]).abs() < 1e-13);
                }
            }
            let w = random_vec(p, 400 + p as u64);
            let fast3 = contract3(&t, &v, &b, &w).unwrap();
            let mut slow3 = 0.0;
            for i in 0..p {
                for j in 0..p {
                    for k in 0..p {
                        slow3 += v[i] * b[j] * w[k] * t.get(i, j, k);
                    }
                }
            }
            assert!((fast3 - slow3).abs() < 1e-13);
        }
    }

    #[test]
    fn contract1_zero_vector() {
        let t = random_tensor(4, 11);
        for mode in 1..=3 {
            let m = contract1(&t, &[0.0; 4], mode).unwrap();
            assert!(m.data().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn contract2_rank_one_identity() {
        let mut x = random_vec(6, 21);
        let mut y = random_vec(6, 22);
        let z = random_vec(6, 23);
        normalize(&mut x).unwrap();
        normalize(&mut y).unwrap();
        let t = outer3(&x, &y, &z).unwrap();
        let out = contract2(&t, &x, &y, 3).unwrap();
        for k in 0..6 {
            assert!((out[k] - z[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn contract3_frobenius_inner_product() {
        let p = 4;
        let t = random_tensor(p, 31);
        let (u, v, w) = (random_vec(p, 32), random_vec(p, 33), random_vec(p, 34));
        let got = contract3(&t, &u, &v, &w).unwrap();
        let rank_one = outer3(&u, &v, &w).unwrap();
        let want: f64 = t.data().iter().zip(rank_one.data()).map(|(a, b)| a * b).sum();
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn contract3_path_equivalence() {
        let p = 4;
        let t = random_tensor(p, 41);
        let (u, v, w) = (random_vec(p, 42), random_vec(p, 43), random_vec(p, 44));
        let direct = contract3(&t, &u, &v, &w).unwrap();
        // contract mode 1 first, then the remaining matrix on (v, w)
        let m1 = contract1(&t, &u, 1).unwrap();
        let path1: f64 = (0..p).map(|j| v[j] * dot(m1.row(j), &w)).sum();
        // mode 2 first
        let m2 = contract1(&t, &v, 2).unwrap();
        let path2: f64 = (0..p).map(|i| u[i] * dot(m2.row(i), &w)).sum();
        // mode 3 first
        let m3 = contract1(&t, &w, 3).unwrap();
        let path3: f64 = (0..p).map(|i| u[i] * dot(m3.row(i), &v)).sum();
        for path in [path1, path2, path3] {
            assert!((direct - path).abs() < 1e-12);
        }
    }

    #[test]
    fn mode1_matmul_identity_and_zero() {
        let t = random_tensor(5, 51);
        let same = mode1_matmul(&t, &Mat::identity(5)).unwrap();
        assert_eq!(t, same);
        let zero = mode1_matmul(&t, &Mat::zeros(5, 5)).unwrap();
        assert!(zero.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mode1_matmul_projection_identity() {
        // T x1 (I - g u u^T) == T - g u ⊗ T(u, ., .)
        let p = 5;
        let gamma = 0.7;
        let t = random_tensor(p, 61);
        let mut u = random_vec(p, 62);
        normalize(&mut u).unwrap();
        let left = mode1_matmul(&t, &Mat::projector(&u, gamma)).unwrap();
        let tu = contract1(&t, &u, 1).unwrap();
        let mut right = t.clone();
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    let v = right.get(i, j, k) - gamma * u[i] * tu.get(j, k);
                    right.set(i, j, k, v);
                }
            }
        }
        for (a, b) in left.data().iter().zip(right.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mode2_matmul_matches_loops() {
        let p = 4;
        let t = random_tensor(p, 71);
        let mut rows = Vec::new();
        for r in 0..p {
            rows.push(random_vec(p, 80 + r as u64));
        }
        let m = Mat::from_rows(&rows).unwrap();
        let got = mode2_matmul(&t, &m).unwrap();
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    let mut want = 0.0;
                    for jp in 0..p {
                        want += m.get(j, jp) * t.get(i, jp, k);
                    }
                    assert!((got.get(i, j, k) - want).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn gen_spiked_ground_truth_constraints() {
        for alpha in [0.0, 0.3, 0.8] {
            let model = SpikedModel {
                p: 40,
                beta1: 3.0,
                beta2: 2.0,
                alpha,
                seed: 7,
            };
            let (_, truth) = gen_spiked(&model).unwrap();
            for v in [&truth.x1, &truth.x2, &truth.y1, &truth.y2, &truth.z1, &truth.z2] {
                assert!((norm(v) - 1.0).abs() < 1e-12);
            }
            assert!((dot(&truth.x1, &truth.x2) - alpha).abs() < 1e-12);
            assert!((dot(&truth.y1, &truth.y2) - alpha).abs() < 1e-12);
            assert!((dot(&truth.z1, &truth.z2) - alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn gen_spiked_determinism() {
        let model = SpikedModel {
            p: 12,
            beta1: 5.0,
            beta2: 4.0,
            alpha: 0.5,
            seed: 99,
        };
        let (a, _) = gen_spiked(&model).unwrap();
        let (b, _) = gen_spiked(&model).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gen_spiked_rejects_bad_alpha() {
        for alpha in [1.0, -0.1, 1.5] {
            let model = SpikedModel {
                p: 10,
                beta1: 1.0,
                beta2: 1.0,
                alpha,
                seed: 1,
            };
            assert!(gen_spiked(&model).is_err());
        }
    }

    #[test]
    fn gen_spiked_pure_noise_frobenius() {
        // E||T||_F^2 = p^3/(3p) = p^2/3 when both SNRs vanish.
        let p = 20;
        let mut mean = 0.0;
        let draws = 50;
        for s in 0..draws {
            let model = SpikedModel {
                p,
                beta1: 0.0,
                beta2: 0.0,
                alpha: 0.0,
                seed: 1000 + s,
            };
            let (t, _) = gen_spiked(&model).unwrap();
            mean += t.frobenius_norm().powi(2);
        }
        mean /= draws as f64;
        let want = (p * p) as f64 / 3.0;
        assert!(
            (mean - want).abs() / want < 0.05,
            "mean {mean} vs expected {want}"
        );
    }

    #[test]
    fn tensor_csv_roundtrip() {
        let t = random_tensor(3, 123);
        let dir = std::env::temp_dir().join("tendefl_tensor_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        t.dump_csv(&path).unwrap();
        let back = Tensor3::load_csv(&path).unwrap();
        assert_eq!(t, back);
        std::fs::remove_file(&path).ok();
    }
}
