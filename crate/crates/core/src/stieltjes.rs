//! Limiting spectral laws of the block contraction matrices: the closed-form
//! semicircle Stieltjes transform, the deformed-law fixed point, densities via
//! the inverse formula, and support-edge location.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Right edge of the semicircle support, `2*sqrt(2/3)`.
pub const SEMICIRCLE_EDGE: f64 = 1.632993161855452;

/// Semicircle Stieltjes transform `r(z) = (3/4)(-z + sqrt(z^2 - 8/3))`.
///
/// The square root is evaluated as `sqrt(z - e) * sqrt(z + e)` with principal
/// branches, which selects the Stieltjes branch on both half planes: `r` is
/// real negative on `(e, inf)`, real positive on `(-inf, -e)`, maps the upper
/// half plane to itself and decays at infinity.
pub fn r_semicircle(z: Complex64) -> Result<Complex64> {
    let e = SEMICIRCLE_EDGE;
    if z.im == 0.0 && z.re.abs() < e {
        return Err(Error::InsideSupport { x: z.re, edge: e });
    }
    let root = (z - e).sqrt() * (z + e).sqrt();
    Ok(0.75 * (-z + root))
}

/// Semicircle transform at a real point outside the support.
pub fn r_semicircle_real(x: f64) -> Result<f64> {
    Ok(r_semicircle(Complex64::new(x, 0.0))?.re)
}

/// `f_r(z) = z + r(z)`.
pub fn f_r(x: f64) -> Result<f64> {
    Ok(x + r_semicircle_real(x)?)
}

/// `h_r(z) = z + (2/3) r(z) = -1/r(z)`.
pub fn h_r(x: f64) -> Result<f64> {
    Ok(x + 2.0 / 3.0 * r_semicircle_real(x)?)
}

/// Semicircle density `(3/4pi) * sqrt((8/3 - x^2)^+)`.
pub fn semicircle_density(x: f64) -> f64 {
    let v = 8.0 / 3.0 - x * x;
    if v <= 0.0 {
        0.0
    } else {
        3.0 / (4.0 * std::f64::consts::PI) * v.sqrt()
    }
}

/// Semicircle CDF, closed form.
pub fn semicircle_cdf(x: f64) -> f64 {
    let e = SEMICIRCLE_EDGE;
    if x <= -e {
        return 0.0;
    }
    if x >= e {
        return 1.0;
    }
    let a2 = 8.0 / 3.0;
    0.5 + 3.0 / (8.0 * std::f64::consts::PI) * (x * (a2 - x * x).sqrt() + a2 * (x / a2.sqrt()).asin())
}

/// Converged state of the deformed-law fixed point at one evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct StieltjesState {
    pub z: Complex64,
    pub tau: f64,
    pub a: Complex64,
    pub b: Complex64,
    /// Stieltjes transform value `q = a + 2b`.
    pub q: Complex64,
    pub iterations: usize,
}

impl StieltjesState {
    /// Residuals of the two defining equations.
    pub fn residuals(&self) -> (f64, f64) {
        let one_third = Complex64::new(1.0 / 3.0, 0.0);
        let r1 = (2.0 * self.b + self.z) * self.a + one_third;
        let r2 = (self.a + self.z - self.tau * self.b) * self.b + one_third;
        (r1.norm(), r2.norm())
    }
}

/// Controls for the fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            tol: 1e-13,
            max_iter: 400_000,
        }
    }
}

/// Plain alternation `a <- -1/(3(2b+z))`, `b <- -1/(3(a+z-tau*b))` from the
/// semicircle starting values, with half-step damping once the update
/// oscillates. Returns `(a, b, iterations)`.
fn fixed_point_alternation(
    z: Complex64,
    tau: f64,
    cfg: &FixedPointConfig,
) -> Result<(Complex64, Complex64, usize)> {
    let init = match r_semicircle(z) {
        Ok(r) => r / 3.0,
        Err(_) => -1.0 / (3.0 * z),
    };
    let mut a = init;
    let mut b = init;
    let mut damping = false;
    let mut prev_delta = f64::INFINITY;
    let mut grew = 0u32;
    for it in 0..cfg.max_iter {
        let denom_a = 3.0 * (2.0 * b + z);
        if denom_a.norm() < 1e-300 {
            return Err(Error::Numeric(format!(
                "fixed point pivot vanished at z = {z}, tau = {tau}"
            )));
        }
        let a_prop = -1.0 / denom_a;
        let a_new = if damping { 0.5 * a + 0.5 * a_prop } else { a_prop };
        let denom_b = 3.0 * (a_new + z - tau * b);
        if denom_b.norm() < 1e-300 {
            return Err(Error::Numeric(format!(
                "fixed point pivot vanished at z = {z}, tau = {tau}"
            )));
        }
        let b_prop = -1.0 / denom_b;
        let b_new = if damping { 0.5 * b + 0.5 * b_prop } else { b_prop };

        let delta = (a_new - a).norm().max((b_new - b).norm());
        a = a_new;
        b = b_new;
        if delta < cfg.tol {
            return Ok((a, b, it + 1));
        }
        if delta > prev_delta {
            grew += 1;
            if grew >= 2 {
                damping = true;
            }
        } else {
            grew = 0;
        }
        prev_delta = delta;
    }
    Err(Error::NoConvergence {
        context: "stieltjes fixed point",
        iterations: cfg.max_iter,
        residual: prev_delta,
    })
}

/// Coefficients of the cubic satisfied by `b` after eliminating `a`:
/// `-6 tau b^3 + 3 z (2 - tau) b^2 + (3 z^2 + 1) b + z = 0`.
fn b_cubic_coeffs(z: Complex64, tau: f64) -> [Complex64; 4] {
    [
        Complex64::new(-6.0 * tau, 0.0),
        3.0 * z * (2.0 - tau),
        3.0 * z * z + 1.0,
        z,
    ]
}

fn b_cubic_eval(c: &[Complex64; 4], b: Complex64) -> Complex64 {
    ((c[0] * b + c[1]) * b + c[2]) * b + c[3]
}

/// All finite roots of the `b` cubic. Degenerates to the quadratic when the
/// leading coefficient vanishes (`tau = 0`).
fn b_cubic_roots(z: Complex64, tau: f64) -> Vec<Complex64> {
    let c = b_cubic_coeffs(z, tau);
    if c[0].norm() < 1e-12 {
        // quadratic c1 b^2 + c2 b + c3
        let (a2, b2, c2) = (c[1], c[2], c[3]);
        if a2.norm() < 1e-300 {
            return vec![-c2 / b2];
        }
        let disc = (b2 * b2 - 4.0 * a2 * c2).sqrt();
        // the sign choice that avoids cancellation
        let sgn = if (b2.conj() * disc).re >= 0.0 { 1.0 } else { -1.0 };
        let qq = -0.5 * (b2 + sgn * disc);
        let mut roots = vec![qq / a2];
        if qq.norm() > 1e-300 {
            roots.push(c2 / qq);
        } else {
            roots.push(Complex64::new(0.0, 0.0));
        }
        return roots;
    }
    // monic reduction and Cardano with complex arithmetic
    let p2 = c[1] / c[0];
    let p1 = c[2] / c[0];
    let p0 = c[3] / c[0];
    let shift = p2 / 3.0;
    let p = p1 - p2 * p2 / 3.0;
    let q = 2.0 * p2 * p2 * p2 / 27.0 - p2 * p1 / 3.0 + p0;
    let d = (0.25 * q * q + p * p * p / 27.0).sqrt();
    let mut w = -0.5 * q + d;
    if w.norm() < 1e-300 {
        w = -0.5 * q - d;
    }
    let cbrt = if w.norm() == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        w.powf(1.0 / 3.0)
    };
    let omega = Complex64::new(-0.5, 0.75f64.sqrt());
    let mut roots = Vec::with_capacity(3);
    for k in 0..3 {
        let rot = match k {
            0 => Complex64::new(1.0, 0.0),
            1 => omega,
            _ => omega.conj(),
        };
        let cc = cbrt * rot;
        let t = if cc.norm() < 1e-300 { cc } else { cc - p / (3.0 * cc) };
        roots.push(t - shift);
    }
    // a few Newton polish steps recover the precision lost to the reduction
    let cc = c;
    for r in &mut roots {
        for _ in 0..4 {
            let f = b_cubic_eval(&cc, *r);
            let df = (3.0 * cc[0] * *r + 2.0 * cc[1]) * *r + cc[2];
            if df.norm() < 1e-300 {
                break;
            }
            *r -= f / df;
        }
    }
    roots
}

fn state_from_b(z: Complex64, tau: f64, b: Complex64, iterations: usize) -> StieltjesState {
    let a = -1.0 / (3.0 * (2.0 * b + z));
    StieltjesState {
        z,
        tau,
        a,
        b,
        q: a + 2.0 * b,
        iterations,
    }
}

/// The Stieltjes branch of the `b` cubic at `z`, identified by continuation
/// from high in the upper half plane, where the transform is close to
/// `-1/(3z)` and the branch is unambiguous.
fn herglotz_b_by_continuation(z: Complex64, tau: f64) -> Complex64 {
    let x = z.re;
    let im_target = z.im.max(1e-9);
    let top = (2.0 * z.norm()).max(4.0);
    let mut im = top;
    let mut zz = Complex64::new(x, im);
    let mut b = -1.0 / (3.0 * zz);
    loop {
        zz = Complex64::new(x, im);
        let roots = b_cubic_roots(zz, tau);
        b = roots
            .into_iter()
            .min_by(|r1, r2| (r1 - b).norm().partial_cmp(&(r2 - b).norm()).unwrap())
            .expect("cubic has roots");
        if im <= im_target {
            break;
        }
        im = (im * 0.6).max(im_target);
    }
    if z.im == 0.0 {
        // land exactly on the real axis
        let roots = b_cubic_roots(z, tau);
        b = roots
            .into_iter()
            .min_by(|r1, r2| (r1 - b).norm().partial_cmp(&(r2 - b).norm()).unwrap())
            .expect("cubic has roots");
        if b.im.abs() < 1e-7 {
            b = Complex64::new(b.re, 0.0);
            let c = b_cubic_coeffs(z, tau);
            for _ in 0..3 {
                let f = b_cubic_eval(&c, b);
                let df = (3.0 * c[0] * b + 2.0 * c[1]) * b + c[2];
                if df.norm() < 1e-300 {
                    break;
                }
                b = Complex64::new((b - f / df).re, 0.0);
            }
        }
    }
    b
}

/// Solves the deformed-law system at one point by the alternation
/// `a <- -1/(3(2b+z))`, `b <- -1/(3(a+z-tau*b))` started from the semicircle
/// values. The converged point is branch-checked against the exact root of
/// the eliminated cubic continued down from high imaginary part; the
/// alternation occasionally locks onto a spurious near-real root inside the
/// bulk, in which case (or when it runs out of iterations) the continued
/// root is returned instead.
pub fn stieltjes_fixed_point(
    z: Complex64,
    tau: f64,
    cfg: &FixedPointConfig,
) -> Result<StieltjesState> {
    let alt = fixed_point_alternation(z, tau, cfg);
    if let Ok((a, b, iters)) = alt {
        let q = a + 2.0 * b;
        // an O(1) imaginary part can only belong to the Herglotz member of
        // the unique complex-conjugate root pair
        if z.im > 0.0 && q.im >= 0.01 {
            return Ok(StieltjesState { z, tau, a, b, q, iterations: iters });
        }
        let b_ref = herglotz_b_by_continuation(z, tau);
        if (b - b_ref).norm() <= 1e-8 * (1.0 + b_ref.norm()) {
            return Ok(StieltjesState { z, tau, a, b, q, iterations: iters });
        }
        return Ok(state_from_b(z, tau, b_ref, iters));
    }
    let b_ref = herglotz_b_by_continuation(z, tau);
    let state = state_from_b(z, tau, b_ref, cfg.max_iter);
    let (r1, r2) = state.residuals();
    if r1 > 1e-10 || r2 > 1e-10 {
        return Err(Error::NoConvergence {
            context: "stieltjes fixed point",
            iterations: cfg.max_iter,
            residual: r1.max(r2),
        });
    }
    Ok(state)
}

/// Fixed point at a real evaluation point outside the support; the iteration
/// stays real there.
pub fn fixed_point_real(x: f64, tau: f64, cfg: &FixedPointConfig) -> Result<StieltjesState> {
    stieltjes_fixed_point(Complex64::new(x, 0.0), tau, cfg)
}

/// Density table on an explicit grid.
#[derive(Debug, Clone)]
pub struct DensityTable {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityTable {
    pub fn trapezoid_integral(&self) -> f64 {
        let mut s = 0.0;
        for i in 1..self.grid.len() {
            s += 0.5 * (self.values[i] + self.values[i - 1]) * (self.grid[i] - self.grid[i - 1]);
        }
        s
    }

    /// CSV `x,density`.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x,density\n");
        for (x, d) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{x},{d}\n"));
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }

    /// CDF by cumulative trapezoid rule, clamped to [0, 1].
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for i in 1..self.grid.len() {
            out[i] = out[i - 1]
                + 0.5 * (self.values[i] + self.values[i - 1]) * (self.grid[i] - self.grid[i - 1]);
        }
        for v in &mut out {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }
}

/// Deformed-law density via the Stieltjes inverse formula,
/// `nu(x) = (1/pi) Im q(x + i*eps)`, clipped at zero.
pub fn nu_density(x_grid: &[f64], tau: f64, eps: f64) -> Result<DensityTable> {
    if eps <= 0.0 {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    let cfg = FixedPointConfig::default();
    let mut values = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let state = stieltjes_fixed_point(Complex64::new(x, eps), tau, &cfg).map_err(|e| {
            Error::Numeric(format!("density evaluation failed at x = {x}: {e}"))
        })?;
        values.push((state.q.im / std::f64::consts::PI).max(0.0));
    }
    Ok(DensityTable {
        grid: x_grid.to_vec(),
        values,
    })
}

/// Right edge of the support of the deformed law: the smallest nonnegative
/// point past which the smoothed density stays below 1e-4. Located on a
/// coarse grid first, then refined by bisection.
pub fn support_right_edge(tau: f64) -> f64 {
    const EPS: f64 = 1e-6;
    const THRESHOLD: f64 = 1e-4;
    let cfg = FixedPointConfig::default();
    let dens = |x: f64| -> f64 {
        match stieltjes_fixed_point(Complex64::new(x, EPS), tau, &cfg) {
            Ok(s) => (s.q.im / std::f64::consts::PI).max(0.0),
            // treat a failed point as still inside the bulk
            Err(_) => 1.0,
        }
    };
    // Scan downward so internal spectral gaps (the law can have one for
    // small deformation) do not masquerade as the outer edge.
    let coarse = 0.05;
    let x_max = 4.0;
    let steps = (x_max / coarse) as usize;
    let mut lo = 0.0;
    let mut hi = x_max;
    let mut found = false;
    for i in (0..steps).rev() {
        let x0 = i as f64 * coarse;
        if dens(x0) >= THRESHOLD {
            lo = x0;
            hi = x0 + coarse;
            found = true;
            break;
        }
    }
    if !found {
        return 0.0;
    }
    if hi >= x_max {
        return x_max;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if dens(mid) >= THRESHOLD {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Rng};

    #[test]
    fn r_semicircle_closed_form_points() {
        // edge value: r(e) = -(3/4)*2*sqrt(2/3) = -sqrt(3/2)
        let r_edge = r_semicircle_real(SEMICIRCLE_EDGE).unwrap();
        assert!((r_edge + 1.224744871391589).abs() < 1e-9);
        // r(2) = (3/4)(-2 + sqrt(4/3))
        let r2 = r_semicircle_real(2.0).unwrap();
        assert!((r2 + 0.6339745962155614).abs() < 1e-12);
        // decay at infinity
        let rr = r_semicircle_real(1e6).unwrap();
        assert!(rr.abs() < 2e-6);
        // left of the support the transform is positive
        assert!(r_semicircle_real(-2.0).unwrap() > 0.0);
        // inside the support only complex arguments are allowed
        assert!(r_semicircle(Complex64::new(0.3, 0.0)).is_err());
    }

    #[test]
    fn r_semicircle_herglotz() {
        let mut r = rng::stream(3);
        for _ in 0..200 {
            let z = Complex64::new(r.random_range(-3.0..3.0), r.random_range(1e-6..2.0));
            let v = r_semicircle(z).unwrap();
            assert!(v.im > 0.0, "Im r({z}) = {}", v.im);
        }
    }

    #[test]
    fn h_r_identity() {
        // h_r(z) = z + (2/3) r(z) = -1/r(z)
        for i in 0..20 {
            let x = SEMICIRCLE_EDGE + 0.01 + 0.5 * i as f64;
            let r = r_semicircle_real(x).unwrap();
            let h = h_r(x).unwrap();
            assert!((h + 1.0 / r).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn semicircle_density_values() {
        assert!((semicircle_density(0.0) - 0.38984840061683806).abs() < 1e-12);
        assert_eq!(semicircle_density(SEMICIRCLE_EDGE), 0.0);
        assert_eq!(semicircle_density(-SEMICIRCLE_EDGE), 0.0);
        assert_eq!(semicircle_density(2.0), 0.0);
    }

    #[test]
    fn semicircle_density_integrates_to_one() {
        let n = 4001;
        let (lo, hi) = (-1.7, 1.7);
        let h = (hi - lo) / (n - 1) as f64;
        let mut s = 0.0;
        for i in 0..n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            s += w * semicircle_density(x);
        }
        s *= h;
        assert!((s - 1.0).abs() < 1e-4, "integral {s}");
    }

    #[test]
    fn semicircle_cdf_endpoints_and_monotone() {
        assert_eq!(semicircle_cdf(-2.0), 0.0);
        assert_eq!(semicircle_cdf(2.0), 1.0);
        assert!((semicircle_cdf(0.0) - 0.5).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 0..=100 {
            let x = -1.7 + 3.4 * i as f64 / 100.0;
            let c = semicircle_cdf(x);
            assert!(c >= prev - 1e-15);
            prev = c;
        }
    }

    #[test]
    fn fixed_point_collapses_to_semicircle_at_tau_minus_one() {
        let cfg = FixedPointConfig::default();
        for &x in &[2.0, 3.0] {
            let s = fixed_point_real(x, -1.0, &cfg).unwrap();
            let r = r_semicircle_real(x).unwrap();
            assert!((s.a.re - r / 3.0).abs() < 1e-10);
            assert!((s.b.re - r / 3.0).abs() < 1e-10);
            assert!((s.q.re - r).abs() < 1e-10);
            assert!(s.a.im.abs() < 1e-14);
            let (r1, r2) = s.residuals();
            assert!(r1 < 1e-12 && r2 < 1e-12);
        }
    }

    #[test]
    fn fixed_point_residuals_random_draws() {
        let cfg = FixedPointConfig::default();
        let mut r = rng::stream(11);
        let mut checked = 0;
        for _ in 0..100 {
            let tau = r.random_range(-1.0..1.0);
            let z = Complex64::new(r.random_range(-4.0..4.0), r.random_range(0.01..2.0));
            let s = stieltjes_fixed_point(z, tau, &cfg).unwrap();
            let (r1, r2) = s.residuals();
            assert!(r1 < 1e-12 && r2 < 1e-12, "z {z} tau {tau}: {r1} {r2}");
            // Herglotz property of the transform
            assert!(s.q.im > -1e-12);
            checked += 1;
        }
        assert_eq!(checked, 100);
    }

    #[test]
    fn nu_density_reduces_to_semicircle() {
        let n = 401;
        let grid: Vec<f64> = (0..n).map(|i| -1.8 + 3.6 * i as f64 / (n - 1) as f64).collect();
        let table = nu_density(&grid, -1.0, 1e-6).unwrap();
        for (x, v) in table.grid.iter().zip(&table.values) {
            assert!(
                (v - semicircle_density(*x)).abs() < 0.002,
                "x {x}: {v} vs {}",
                semicircle_density(*x)
            );
            assert!(*v >= 0.0);
        }
        let integral = table.trapezoid_integral();
        assert!((0.99..=1.01).contains(&integral), "integral {integral}");
    }

    #[test]
    fn nu_density_deformed_tau_nonnegative_normalized() {
        // tau in the range produced by a partial projection
        let n = 601;
        let grid: Vec<f64> = (0..n).map(|i| -2.2 + 4.4 * i as f64 / (n - 1) as f64).collect();
        for tau in [-0.85, -0.5, -0.25] {
            let table = nu_density(&grid, tau, 1e-6).unwrap();
            assert!(table.values.iter().all(|v| *v >= 0.0));
            let integral = table.trapezoid_integral();
            assert!((0.99..=1.01).contains(&integral), "tau {tau}: {integral}");
        }
    }

    #[test]
    fn support_edge_semicircle_and_continuity() {
        let e = support_right_edge(-1.0);
        assert!((e - SEMICIRCLE_EDGE).abs() < 5e-3, "edge {e}");
        // continuity in tau and positivity
        let mut prev = support_right_edge(-1.0);
        for i in 1..=20 {
            let tau = -1.0 + 2.0 * i as f64 / 20.0;
            let e = support_right_edge(tau);
            assert!(e > 0.0);
            assert!((e - prev).abs() < 0.25, "jump at tau {tau}: {prev} -> {e}");
            prev = e;
        }
        let t0 = -1.0 + 2.0 * 7.0 / 20.0;
        assert!((support_right_edge(t0) - support_right_edge(t0 + 1e-3)).abs() < 0.05);
    }

    #[test]
    fn tau_collapse_on_real_axis_range() {
        let cfg = FixedPointConfig::default();
        for i in 0..20 {
            let x = SEMICIRCLE_EDGE + 0.01 + (10.0 - 0.01) * i as f64 / 19.0;
            let s = fixed_point_real(x, -1.0, &cfg).unwrap();
            let r = r_semicircle_real(x).unwrap();
            assert!((s.q.re - r).abs() < 1e-10, "x {x}");
        }
    }
}
