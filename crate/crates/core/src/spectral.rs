//! Block contraction matrices of a noise tensor, their symmetric
//! eigendecomposition, empirical spectral measures and empirical Stieltjes
//! transforms.
//!
//! The 3p x 3p block matrix pairs each mode contraction of the tensor with a
//! unit vector: off-diagonal blocks hold the three contractions scaled by
//! 1/sqrt(3p), diagonal blocks are zero.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mat::{dot, Mat};
use crate::tensor::{contract1, Tensor3};

/// Symmetric `3p x 3p` block contraction matrix.
#[derive(Debug, Clone)]
pub struct SymBlockMatrix {
    p: usize,
    mat: Mat,
}

impl SymBlockMatrix {
    pub fn n(&self) -> usize {
        3 * self.p
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }
}

/// Which block matrix a spectrum came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SpectrumSource {
    /// First-deflation contraction matrix (three plain contractions).
    N,
    /// Second-deflation contraction matrix (mode-1 contraction replaced by
    /// the gamma-projected combination).
    M,
}

/// Full real spectrum of a block contraction matrix, ascending.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub source: SpectrumSource,
    pub n: usize,
    pub p: usize,
}

impl SpectrumResult {
    /// Two-column CSV `index,eigenvalue`.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("index,eigenvalue\n");
        for (i, ev) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{i},{ev}\n"));
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }
}

fn assemble(p: usize, b12: Mat, b13: Mat, b23: Mat) -> SymBlockMatrix {
    let n = 3 * p;
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut mat = Mat::zeros(n, n);
    for i in 0..p {
        for j in 0..p {
            let v12 = inv_sqrt_n * b12.get(i, j);
            let v13 = inv_sqrt_n * b13.get(i, j);
            let v23 = inv_sqrt_n * b23.get(i, j);
            mat.set(i, p + j, v12);
            mat.set(p + j, i, v12);
            mat.set(i, 2 * p + j, v13);
            mat.set(2 * p + j, i, v13);
            mat.set(p + i, 2 * p + j, v23);
            mat.set(2 * p + j, p + i, v23);
        }
    }
    SymBlockMatrix { p, mat }
}

fn check_unit(name: &str, v: &[f64], p: usize) -> Result<()> {
    if v.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: v.len() });
    }
    let n = dot(v, v).sqrt();
    if (n - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be unit-norm (norm {n})"
        )));
    }
    Ok(())
}

/// Builds the first-deflation block matrix from a tensor and the three unit
/// vectors. Any tensor may be passed: the bulk spectrum is insensitive to
/// low-rank signal parts, so both the raw noise and the full observation work.
pub fn build_n(w: &Tensor3, u: &[f64], v: &[f64], wv: &[f64]) -> Result<SymBlockMatrix> {
    let p = w.dim();
    check_unit("u", u, p)?;
    check_unit("v", v, p)?;
    check_unit("w", wv, p)?;
    let b12 = contract1(w, wv, 3)?; // [i,j]
    let b13 = contract1(w, v, 2)?; // [i,k]
    let b23 = contract1(w, u, 1)?; // [j,k]
    Ok(assemble(p, b12, b13, b23))
}

/// Builds the second-deflation block matrix. The mode-1 contraction vector is
/// `u2 - gamma*<u1,u2>*u1`, the other two blocks use `v2` and `w2` directly.
pub fn build_m(
    w: &Tensor3,
    u1: &[f64],
    u2: &[f64],
    v2: &[f64],
    w2: &[f64],
    gamma: f64,
) -> Result<SymBlockMatrix> {
    let p = w.dim();
    check_unit("u1", u1, p)?;
    check_unit("u2", u2, p)?;
    check_unit("v2", v2, p)?;
    check_unit("w2", w2, p)?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    let kappa = dot(u1, u2);
    let u3: Vec<f64> = u2
        .iter()
        .zip(u1)
        .map(|(a, b)| a - gamma * kappa * b)
        .collect();
    let b12 = contract1(w, w2, 3)?;
    let b13 = contract1(w, v2, 2)?;
    let b23 = contract1(w, &u3, 1)?;
    Ok(assemble(p, b12, b13, b23))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Stops when the off-diagonal Frobenius norm falls below
/// `1e-12 * ||A||_F`. Returns eigenvalues ascending; when `vectors` is
/// requested the i-th column of the returned matrix pairs with the i-th
/// eigenvalue.
pub fn jacobi_eigen(a: &Mat, want_vectors: bool) -> Result<(Vec<f64>, Option<Mat>)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.cols() });
    }
    if a.symmetry_defect() > 1e-10 * (1.0 + a.frobenius_norm()) {
        return Err(Error::InvalidParameter("matrix is not symmetric".into()));
    }
    let mut m = a.clone();
    let mut vecs = if want_vectors { Some(Mat::identity(n)) } else { None };
    let total = a.frobenius_norm();
    let tol = 1e-12 * total.max(1e-300);
    let max_sweeps = 60;

    let off_norm = |m: &Mat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = m.get(i, j);
                s += 2.0 * v * v;
            }
        }
        s.sqrt()
    };

    let mut converged = total == 0.0;
    for _ in 0..max_sweeps {
        if off_norm(&m) <= tol {
            converged = true;
            break;
        }
        for pidx in 0..(n - 1) {
            for q in (pidx + 1)..n {
                let apq = m.get(pidx, q);
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = m.get(pidx, pidx);
                let aqq = m.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e154 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // rotate rows/columns p and q
                for k in 0..n {
                    let akp = m.get(k, pidx);
                    let akq = m.get(k, q);
                    m.set(k, pidx, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(pidx, k);
                    let aqk = m.get(q, k);
                    m.set(pidx, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
                if let Some(vm) = vecs.as_mut() {
                    for k in 0..n {
                        let vkp = vm.get(k, pidx);
                        let vkq = vm.get(k, q);
                        vm.set(k, pidx, c * vkp - s * vkq);
                        vm.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
    }
    if !converged && off_norm(&m) > tol {
        return Err(Error::NoConvergence {
            context: "jacobi eigensolver",
            iterations: max_sweeps,
            residual: off_norm(&m),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = vecs.map(|vm| {
        let mut sorted = Mat::zeros(n, n);
        for (newcol, &oldcol) in order.iter().enumerate() {
            for k in 0..n {
                sorted.set(k, newcol, vm.get(k, oldcol));
            }
        }
        sorted
    });
    Ok((eigenvalues, vectors))
}

/// Leading (largest-eigenvalue) unit eigenvector of a symmetric matrix, with
/// a deterministic sign: the entry of largest magnitude is positive.
pub fn leading_eigenvector(a: &Mat) -> Result<(f64, Vec<f64>)> {
    let n = a.rows();
    let (vals, vecs) = jacobi_eigen(a, true)?;
    let vecs = vecs.expect("vectors requested");
    let lead = n - 1;
    let mut v: Vec<f64> = (0..n).map(|k| vecs.get(k, lead)).collect();
    let mut imax = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[imax].abs() {
            imax = i;
        }
    }
    if v[imax] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    Ok((vals[lead], v))
}

/// Full spectrum of a block contraction matrix.
pub fn sym_eigenvalues(s: &SymBlockMatrix, source: SpectrumSource) -> Result<SpectrumResult> {
    let (eigenvalues, _) = jacobi_eigen(&s.mat, false)?;
    Ok(SpectrumResult {
        eigenvalues,
        source,
        n: s.n(),
        p: s.p,
    })
}

/// Empirical Stieltjes transform `(1/n) sum 1/(lambda_i - z)`.
pub fn empirical_stieltjes(spec: &SpectrumResult, z: Complex64) -> Result<Complex64> {
    if spec.eigenvalues.is_empty() {
        return Err(Error::DegenerateInput("empty spectrum".into()));
    }
    if z.im == 0.0 {
        let closest = spec
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, ev| m.min((ev - z.re).abs()));
        if closest < 1e-12 {
            return Err(Error::PoleCollision(z.re));
        }
    }
    let n = spec.eigenvalues.len() as f64;
    let mut s = Complex64::new(0.0, 0.0);
    for &ev in &spec.eigenvalues {
        s += 1.0 / (Complex64::new(ev, 0.0) - z);
    }
    Ok(s / n)
}

/// Normalized histogram over `[min, max]` with equal-width bins; the table
/// integrates to one. A single-point spectrum gets one unit-width bin.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub width: f64,
}

impl Histogram {
    pub fn integral(&self) -> f64 {
        self.densities.iter().sum::<f64>() * self.width
    }

    /// CSV `bin_center,density`.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("bin_center,density\n");
        for (c, d) in self.centers.iter().zip(&self.densities) {
            out.push_str(&format!("{c},{d}\n"));
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }
}

pub fn histogram(spec: &SpectrumResult, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be >= 1".into()));
    }
    if spec.eigenvalues.is_empty() {
        return Err(Error::DegenerateInput("empty spectrum".into()));
    }
    let lo = spec.eigenvalues[0];
    let hi = *spec.eigenvalues.last().unwrap();
    if hi - lo < 1e-300 {
        return Ok(Histogram {
            centers: vec![lo],
            densities: vec![1.0],
            width: 1.0,
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &ev in &spec.eigenvalues {
        let mut b = ((ev - lo) / width) as usize;
        if b >= bins {
            b = bins - 1;
        }
        counts[b] += 1;
    }
    let n = spec.eigenvalues.len() as f64;
    let centers = (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let densities = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    Ok(Histogram {
        centers,
        densities,
        width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tensor::outer3;

    fn random_unit(p: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed);
        let mut v = rng::gaussian_vec(&mut r, p);
        crate::mat::normalize(&mut v).unwrap();
        v
    }

    fn random_tensor(p: usize, seed: u64) -> Tensor3 {
        let mut r = rng::stream(seed);
        Tensor3::from_flat(p, rng::gaussian_vec(&mut r, p * p * p)).unwrap()
    }

    /// Independent classical Jacobi (largest-pivot variant) used as an oracle.
    fn classical_jacobi_reference(a: &Mat) -> Vec<f64> {
        let n = a.rows();
        let mut m = a.clone();
        for _ in 0..20000 {
            let (mut bp, mut bq, mut best) = (0, 1, 0.0f64);
            for i in 0..n {
                for j in (i + 1)..n {
                    if m.get(i, j).abs() > best {
                        best = m.get(i, j).abs();
                        bp = i;
                        bq = j;
                    }
                }
            }
            if best < 1e-14 {
                break;
            }
            let apq = m.get(bp, bq);
            let theta = 0.5 * (m.get(bq, bq) - m.get(bp, bp)) / apq;
            let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
            let t = sign / (theta.abs() + (1.0 + theta * theta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            for k in 0..n {
                let akp = m.get(k, bp);
                let akq = m.get(k, bq);
                m.set(k, bp, c * akp - s * akq);
                m.set(k, bq, s * akp + c * akq);
            }
            for k in 0..n {
                let apk = m.get(bp, k);
                let aqk = m.get(bq, k);
                m.set(bp, k, c * apk - s * aqk);
                m.set(bq, k, s * apk + c * aqk);
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d
    }

    #[test]
    fn build_n_zero_tensor() {
        let p = 4;
        let t = Tensor3::zeros(p).unwrap();
        let u = random_unit(p, 1);
        let s = build_n(&t, &u, &u, &u).unwrap();
        assert!(s.mat().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn build_n_structure() {
        let p = 10;
        let t = random_tensor(p, 5);
        let (u, v, w) = (random_unit(p, 6), random_unit(p, 7), random_unit(p, 8));
        let s = build_n(&t, &u, &v, &w).unwrap();
        assert!(s.mat().symmetry_defect() < 1e-12);
        for bi in 0..3 {
            for i in 0..p {
                for j in 0..p {
                    assert_eq!(s.get(bi * p + i, bi * p + j), 0.0);
                }
            }
        }
        assert_eq!(s.mat().trace(), 0.0);
    }

    #[test]
    fn build_n_entries_match_direct_contraction() {
        let p = 4;
        let t = random_tensor(p, 9);
        let (u, v, w) = (random_unit(p, 10), random_unit(p, 11), random_unit(p, 12));
        let s = build_n(&t, &u, &v, &w).unwrap();
        let inv_sqrt_n = 1.0 / (3.0 * p as f64).sqrt();
        for i in 0..p {
            for j in 0..p {
                // (i, p+j) block: contraction with w on mode 3
                let mut want = 0.0;
                for k in 0..p {
                    want += w[k] * t.get(i, j, k);
                }
                assert!((s.get(i, p + j) - inv_sqrt_n * want).abs() < 1e-13);
                // (p+j, 2p+k) block: contraction with u on mode 1
                let mut want23 = 0.0;
                for ii in 0..p {
                    want23 += u[ii] * t.get(ii, i, j);
                }
                assert!((s.get(p + i, 2 * p + j) - inv_sqrt_n * want23).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn build_m_gamma_zero_equals_n() {
        let p = 5;
        let t = random_tensor(p, 21);
        let (u1, u2, v2, w2) = (
            random_unit(p, 22),
            random_unit(p, 23),
            random_unit(p, 24),
            random_unit(p, 25),
        );
        let m = build_m(&t, &u1, &u2, &v2, &w2, 0.0).unwrap();
        let n = build_n(&t, &u2, &v2, &w2).unwrap();
        for (a, b) in m.mat().data().iter().zip(n.mat().data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn build_m_orthogonal_u1_u2_equals_n() {
        let p = 6;
        let t = random_tensor(p, 31);
        let u1 = random_unit(p, 32);
        // orthogonalize u2 against u1
        let mut u2 = random_unit(p, 33);
        let c = dot(&u1, &u2);
        for (a, b) in u2.iter_mut().zip(&u1) {
            *a -= c * b;
        }
        crate::mat::normalize(&mut u2).unwrap();
        let (v2, w2) = (random_unit(p, 34), random_unit(p, 35));
        let m = build_m(&t, &u1, &u2, &v2, &w2, 0.77).unwrap();
        let n = build_n(&t, &u2, &v2, &w2).unwrap();
        for (a, b) in m.mat().data().iter().zip(n.mat().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn build_m_block_entries() {
        let p = 4;
        let t = random_tensor(p, 41);
        let (u1, u2, v2, w2) = (
            random_unit(p, 42),
            random_unit(p, 43),
            random_unit(p, 44),
            random_unit(p, 45),
        );
        let gamma = 0.6;
        let kappa = dot(&u1, &u2);
        let m = build_m(&t, &u1, &u2, &v2, &w2, gamma).unwrap();
        let inv_sqrt_n = 1.0 / (3.0 * p as f64).sqrt();
        for j in 0..p {
            for k in 0..p {
                let mut wu2 = 0.0;
                let mut wu1 = 0.0;
                for i in 0..p {
                    wu2 += u2[i] * t.get(i, j, k);
                    wu1 += u1[i] * t.get(i, j, k);
                }
                let want = inv_sqrt_n * (wu2 - gamma * kappa * wu1);
                assert!((m.get(p + j, 2 * p + k) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobi_two_by_two_blocks() {
        // [[0, c], [c, 0]] has eigenvalues ±c.
        let c = 1.75;
        let a = Mat::from_rows(&[vec![0.0, c], vec![c, 0.0]]).unwrap();
        let (vals, _) = jacobi_eigen(&a, false).unwrap();
        assert!((vals[0] + c).abs() < 1e-13);
        assert!((vals[1] - c).abs() < 1e-13);
    }

    #[test]
    fn jacobi_matches_independent_reference() {
        let n = 6;
        let mut r = rng::stream(77);
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng::gaussian(&mut r);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let (vals, _) = jacobi_eigen(&a, false).unwrap();
        let oracle = classical_jacobi_reference(&a);
        for (x, y) in vals.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn jacobi_eigenvectors_reconstruct() {
        let n = 5;
        let mut r = rng::stream(78);
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng::gaussian(&mut r);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let (vals, vecs) = jacobi_eigen(&a, true).unwrap();
        let vecs = vecs.unwrap();
        for c in 0..n {
            let col: Vec<f64> = (0..n).map(|k| vecs.get(k, c)).collect();
            let av = a.matvec(&col).unwrap();
            for k in 0..n {
                assert!((av[k] - vals[c] * col[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn spectrum_trace_and_frobenius_identities() {
        let p = 100; // n = 300
        let model = crate::tensor::SpikedModel {
            p,
            beta1: 4.0,
            beta2: 3.0,
            alpha: 0.4,
            seed: 5150,
        };
        let (_, truth) = crate::tensor::gen_spiked(&model).unwrap();
        let (u, v, w) = (random_unit(p, 51), random_unit(p, 52), random_unit(p, 53));
        let s = build_n(&truth.noise, &u, &v, &w).unwrap();
        let spec = sym_eigenvalues(&s, SpectrumSource::N).unwrap();
        let n = spec.eigenvalues.len();
        assert_eq!(n, 3 * p);
        let sum: f64 = spec.eigenvalues.iter().sum();
        assert!(sum.abs() < n as f64 * 1e-10, "trace residual {sum}");
        let sq: f64 = spec.eigenvalues.iter().map(|x| x * x).sum();
        let fro2 = s.mat().frobenius_norm().powi(2);
        assert!((sq - fro2).abs() / fro2 < 1e-8);
        for wnd in spec.eigenvalues.windows(2) {
            assert!(wnd[0] <= wnd[1]);
        }
    }

    #[test]
    fn empirical_stieltjes_basics() {
        let spec = SpectrumResult {
            eigenvalues: vec![0.0],
            source: SpectrumSource::N,
            n: 1,
            p: 1,
        };
        let g = empirical_stieltjes(&spec, Complex64::new(2.0, 0.0)).unwrap();
        assert!((g.re + 0.5).abs() < 1e-15 && g.im == 0.0);
        assert!(matches!(
            empirical_stieltjes(&spec, Complex64::new(0.0, 0.0)),
            Err(Error::PoleCollision(_))
        ));
        let spec2 = SpectrumResult {
            eigenvalues: vec![-1.0, 0.5, 2.0],
            source: SpectrumSource::N,
            n: 3,
            p: 1,
        };
        let z = Complex64::new(0.3, 0.7);
        let a = empirical_stieltjes(&spec2, z).unwrap();
        let b = empirical_stieltjes(&spec2, z.conj()).unwrap();
        assert!((a.conj() - b).norm() < 1e-14);
    }

    #[test]
    fn histogram_normalization_and_degenerate() {
        let spec = SpectrumResult {
            eigenvalues: vec![1.0, 1.0, 1.0],
            source: SpectrumSource::N,
            n: 3,
            p: 1,
        };
        let h = histogram(&spec, 10).unwrap();
        assert_eq!(h.centers.len(), 1);
        assert!((h.integral() - 1.0).abs() < 1e-12);

        let spec2 = SpectrumResult {
            eigenvalues: (0..100).map(|i| i as f64 / 10.0).collect(),
            source: SpectrumSource::M,
            n: 100,
            p: 1,
        };
        let h2 = histogram(&spec2, 13).unwrap();
        assert!((h2.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_contraction_blocks_are_rank_one() {
        // sanity: blocks built from an outer product follow the rank-one pattern
        let p = 4;
        let (x, y, z) = (random_unit(p, 61), random_unit(p, 62), random_unit(p, 63));
        let t = outer3(&x, &y, &z).unwrap();
        let s = build_n(&t, &x, &y, &z).unwrap();
        let inv_sqrt_n = 1.0 / (3.0 * p as f64).sqrt();
        // block (1,2) = T(.,.,w=z) = x y^T when contracted with z
        for i in 0..p {
            for j in 0..p {
                assert!((s.get(i, p + j) - inv_sqrt_n * x[i] * y[j]).abs() < 1e-13);
            }
        }
    }
}
