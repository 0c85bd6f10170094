//! Estimation of the hidden model parameters (both SNRs and the component
//! correlation) together with all alignments, from the three observables of a
//! single realization: the two singular values and the overlap of the second
//! mode singular vectors.

use crate::asymptotics::{newton_solve, SolverConfig};
use crate::error::{Error, Result};
use crate::stieltjes::{f_r, h_r, r_semicircle_real, SEMICIRCLE_EDGE};

/// Observables of one deflation run at full projection strength.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Observables {
    pub lambda1_hat: f64,
    pub lambda2_hat: f64,
    /// `|<v1, v2>|`.
    pub eta_hat: f64,
}

impl Observables {
    pub fn validate(&self) -> Result<()> {
        if self.lambda1_hat <= SEMICIRCLE_EDGE {
            return Err(Error::ImpossibleRegime {
                lambda: self.lambda1_hat,
                edge: SEMICIRCLE_EDGE,
            });
        }
        if self.lambda2_hat <= SEMICIRCLE_EDGE {
            return Err(Error::ImpossibleRegime {
                lambda: self.lambda2_hat,
                edge: SEMICIRCLE_EDGE,
            });
        }
        if !(0.0..=1.0).contains(&self.eta_hat) {
            return Err(Error::InvalidParameter(format!(
                "eta_hat must lie in [0, 1], got {}",
                self.eta_hat
            )));
        }
        Ok(())
    }
}

/// Recovered model parameters and alignments.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModelEstimate {
    pub beta1_hat: f64,
    pub beta2_hat: f64,
    pub alpha_hat: f64,
    pub rho11: f64,
    pub rho12: f64,
    pub theta21: f64,
    pub theta22: f64,
    pub rho21: f64,
    pub rho22: f64,
    /// Re-evaluated infinity norm of the nine residuals at the estimate.
    pub residual_norm: f64,
    /// Set when the recovered correlation leaves the model range `[0, 1)`;
    /// the raw value is kept, reports may clamp it.
    pub alpha_out_of_model: bool,
}

/// Starting point of the nine-dimensional solve.
#[derive(Debug, Clone, Copy)]
pub struct EstimateInit {
    pub beta1: f64,
    pub beta2: f64,
    pub alpha: f64,
    pub rho11: f64,
    pub rho12: f64,
    pub theta21: f64,
    pub theta22: f64,
    pub rho21: f64,
    pub rho22: f64,
}

impl EstimateInit {
    /// Crude plug-in initializer: the stronger SNR starts at the first
    /// singular value, the weaker at half of it, the correlation at the
    /// observed overlap; first-step alignments start high, second-step ones
    /// split toward the weaker component.
    pub fn plug_in(obs: &Observables) -> Self {
        let alpha0 = obs.eta_hat;
        EstimateInit {
            beta1: obs.lambda1_hat,
            beta2: obs.lambda1_hat / 2.0,
            alpha: alpha0,
            rho11: 0.9,
            rho12: alpha0 * 0.9,
            theta21: 0.3,
            theta22: 0.7,
            rho21: 0.3,
            rho22: 0.7,
        }
    }

    fn to_vec(self) -> Vec<f64> {
        vec![
            self.beta1,
            self.beta2,
            self.alpha,
            self.rho11,
            self.rho12,
            self.theta21,
            self.theta22,
            self.rho21,
            self.rho22,
        ]
    }
}

fn alpha_cross(alpha: f64, i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        alpha
    }
}

/// The nine-component residual map linking parameters, observables and
/// alignments: the first three rows are the first-step system, the remaining
/// six the full-strength second-step system.
///
/// Layouts: `beta = (beta1, beta2, alpha)`, `lambda = (lambda1, lambda2,
/// eta)`, `rho = (rho11, rho12, theta21, theta22, rho21, rho22)`.
pub fn psi(beta: &[f64; 3], lambda: &[f64; 3], rho: &[f64; 6]) -> Result<Vec<f64>> {
    let (b, alpha) = ([beta[0], beta[1]], beta[2]);
    let (l1, l2, eta) = (lambda[0], lambda[1], lambda[2]);
    for l in [l1, l2] {
        if l <= SEMICIRCLE_EDGE {
            return Err(Error::InsideSupport { x: l, edge: SEMICIRCLE_EDGE });
        }
    }
    let rho1 = [rho[0], rho[1]];
    let theta = [rho[2], rho[3]];
    let rho2 = [rho[4], rho[5]];
    let r1 = r_semicircle_real(l1)?;
    let h1 = h_r(l1)?;
    let h2 = h_r(l2)?;
    let s_rho1_rho2: f64 = (0..2).map(|i| b[i] * rho1[i] * rho2[i] * rho2[i]).sum();

    let mut out = vec![0.0; 9];
    out[0] = f_r(l1)? - (0..2).map(|i| b[i] * rho1[i].powi(3)).sum::<f64>();
    for j in 0..2 {
        let s: f64 = (0..2)
            .map(|i| b[i] * alpha_cross(alpha, i, j) * rho1[i] * rho1[i])
            .sum();
        out[1 + j] = h1 * rho1[j] - s;
    }
    out[3] = f_r(l2)? - (0..2).map(|i| b[i] * theta[i] * rho2[i] * rho2[i]).sum::<f64>();
    for j in 0..2 {
        let s_alpha: f64 = (0..2)
            .map(|i| b[i] * alpha_cross(alpha, i, j) * rho2[i] * rho2[i])
            .sum();
        out[4 + j] = h2 * theta[j] - (eta * eta / 3.0) * r1 * rho1[j] - s_alpha
            + rho1[j] * s_rho1_rho2;
    }
    for j in 0..2 {
        let s: f64 = (0..2)
            .map(|i| b[i] * theta[i] * rho2[i] * alpha_cross(alpha, i, j))
            .sum();
        out[6 + j] = h2 * rho2[j] - s;
    }
    out[8] = h2 * eta - (0..2).map(|i| b[i] * theta[i] * rho1[i] * rho2[i]).sum::<f64>();
    Ok(out)
}

/// Solves the nine equations in the nine unknowns (two SNRs, the correlation
/// and six alignments) with the observables pinned; orders the output so the
/// first SNR is the larger one.
///
/// When the solve from `init` fails, a deterministic ladder of sign and
/// component-order variants of `init` is tried: at strong correlation the
/// root can carry mixed signs that an all-positive start never reaches.
pub fn estimate(obs: &Observables, init: &EstimateInit) -> Result<ModelEstimate> {
    obs.validate()?;
    let lambda = [obs.lambda1_hat, obs.lambda2_hat, obs.eta_hat];
    let f = |x: &[f64]| {
        let beta = [x[0], x[1], x[2]];
        let rho = [x[3], x[4], x[5], x[6], x[7], x[8]];
        psi(&beta, &lambda, &rho)
    };
    let cfg = SolverConfig {
        tol: 1e-10,
        max_iter: 300,
        ..Default::default()
    };
    let mut starts = vec![init.to_vec()];
    let (t1, t2) = (init.theta21.abs(), init.theta22.abs());
    let (r1, r2) = (init.rho21.abs(), init.rho22.abs());
    for &(m1, m2, n1, n2) in &[(t1, t2, r1, r2), (t2, t1, r2, r1)] {
        for &(s1, s2) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let mut v = init.to_vec();
            v[5] = s1 * m1;
            v[6] = s2 * m2;
            v[7] = n1;
            v[8] = n2;
            starts.push(v);
        }
    }
    let mut x = None;
    let mut last_err = None;
    for start in starts {
        match newton_solve(&f, &start, &cfg) {
            Ok(sol) => {
                x = Some(sol);
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    let x = x.ok_or_else(|| {
        Error::Estimation(last_err.map(|e| e.to_string()).unwrap_or_default())
    })?;
    let residual = f(&x)?;
    let residual_norm = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut est = ModelEstimate {
        beta1_hat: x[0],
        beta2_hat: x[1],
        alpha_hat: x[2],
        rho11: x[3],
        rho12: x[4],
        theta21: x[5],
        theta22: x[6],
        rho21: x[7],
        rho22: x[8],
        residual_norm,
        alpha_out_of_model: false,
    };
    if est.beta1_hat < est.beta2_hat {
        std::mem::swap(&mut est.beta1_hat, &mut est.beta2_hat);
        std::mem::swap(&mut est.rho11, &mut est.rho12);
        std::mem::swap(&mut est.theta21, &mut est.theta22);
        std::mem::swap(&mut est.rho21, &mut est.rho22);
    }
    est.alpha_out_of_model = !(0.0..1.0).contains(&est.alpha_hat);
    Ok(est)
}
