//! Deterministic equation systems for both deflation steps: the three
//! first-step equations, the seven general second-step equations alternated
//! with the deformed-law fixed point, and the reduced system at full
//! projection strength.

use crate::error::{Error, Result};
use crate::mat::{dot, solve_linear, Mat};
use crate::rank_one::{power_iteration, PowerIterConfig};
use crate::stieltjes::{
    f_r, fixed_point_real, h_r, r_semicircle_real, support_right_edge, FixedPointConfig,
    SEMICIRCLE_EDGE,
};
use crate::tensor::{gen_spiked, mode1_matmul, SpikedModel};

/// Deformation parameter of the second-step limiting law.
///
/// Equals minus the squared norm of the projected contraction vector
/// `u2 - gamma*<u1,u2>*u1`, so it is `-1` exactly when the projection removes
/// nothing (`gamma = 0`) or the factors are already orthogonal.
pub fn deformation_tau(gamma: f64, kappa: f64) -> f64 {
    gamma * (2.0 - gamma) * kappa * kappa - 1.0
}

/// Solution of the first-step system.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FirstStepSolution {
    pub lambda1: f64,
    pub rho11: f64,
    pub rho12: f64,
}

/// Solution of the second-step system at a given projection strength.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SecondStepSolution {
    pub lambda2: f64,
    pub theta21: f64,
    pub theta22: f64,
    pub rho21: f64,
    pub rho22: f64,
    pub kappa: f64,
    pub eta: f64,
    pub gamma: f64,
    /// Deformation parameter implied by `gamma` and `kappa`.
    pub tau: f64,
}

impl SecondStepSolution {
    pub fn unknowns(&self) -> [f64; 7] {
        [
            self.lambda2,
            self.theta21,
            self.theta22,
            self.rho21,
            self.rho22,
            self.kappa,
            self.eta,
        ]
    }
}

/// Newton controls.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Cap on the outer alternation between the equation system and the
    /// deformation-parameter refresh.
    pub outer_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-11,
            max_iter: 200,
            outer_iter: 60,
        }
    }
}

/// Joint tolerance of the alternated second-step solve.
pub const JOINT_TOL: f64 = 1e-9;

/// Damped Newton with a central-difference Jacobian.
///
/// The residual closure may fail (for example when an iterate leaves the
/// domain of a transform); failures during a trial step shrink the step, a
/// failure at the starting point aborts.
pub fn newton_solve<F>(f: &F, x0: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    if fx.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: fx.len() });
    }
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut res = inf(&fx);
    if !res.is_finite() {
        return Err(Error::Numeric("residual not finite at initial point".into()));
    }
    for it in 0..cfg.max_iter {
        if res < cfg.tol {
            return Ok(x);
        }
        let mut jac = Mat::zeros(k, k);
        for j in 0..k {
            let h = 1e-7 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            // one-sided fallback at domain boundaries
            let (fp, fm, denom) = match (f(&xp), f(&xm)) {
                (Ok(a), Ok(b)) => (a, b, 2.0 * h),
                (Ok(a), Err(_)) => (a, fx.clone(), h),
                (Err(_), Ok(b)) => (fx.clone(), b, h),
                (Err(_), Err(e)) => return Err(e),
            };
            for i in 0..k {
                jac.set(i, j, (fp[i] - fm[i]) / denom);
            }
        }
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let step =
            solve_linear(jac, rhs).map_err(|_| Error::SingularJacobian { iterations: it })?;

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + scale * s).collect();
            if let Ok(ft) = f(&trial) {
                let rt = inf(&ft);
                if rt.is_finite() && rt < res {
                    x = trial;
                    fx = ft;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::Stagnation { residual: res });
        }
    }
    if res < cfg.tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            context: "newton",
            iterations: cfg.max_iter,
            residual: res,
        })
    }
}

fn alpha_cross(alpha: f64, i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        alpha
    }
}

/// Residuals of the first-step system at `(lambda1, rho11, rho12)`.
pub fn first_step_residual(beta: [f64; 2], alpha: f64, x: &[f64]) -> Result<Vec<f64>> {
    let (l1, r11, r12) = (x[0], x[1], x[2]);
    if l1 <= SEMICIRCLE_EDGE {
        return Err(Error::InsideSupport { x: l1, edge: SEMICIRCLE_EDGE });
    }
    let rho = [r11, r12];
    let f1 = f_r(l1)? - beta[0] * r11.powi(3) - beta[1] * r12.powi(3);
    let h = h_r(l1)?;
    let mut out = vec![f1, 0.0, 0.0];
    for j in 0..2 {
        let mut s = 0.0;
        for i in 0..2 {
            s += beta[i] * alpha_cross(alpha, i, j) * rho[i] * rho[i];
        }
        out[j + 1] = h * rho[j] - s;
    }
    Ok(out)
}

/// Solves the first-step system from the given initializer.
pub fn solve_first(
    beta1: f64,
    beta2: f64,
    alpha: f64,
    init: &FirstStepSolution,
    cfg: &SolverConfig,
) -> Result<FirstStepSolution> {
    if init.lambda1 <= SEMICIRCLE_EDGE {
        return Err(Error::ImpossibleRegime {
            lambda: init.lambda1,
            edge: SEMICIRCLE_EDGE,
        });
    }
    let beta = [beta1, beta2];
    let f = |x: &[f64]| first_step_residual(beta, alpha, x);
    let x0 = vec![init.lambda1, init.rho11, init.rho12];
    let x = newton_solve(&f, &x0, cfg).map_err(map_regime(init.lambda1))?;
    Ok(FirstStepSolution {
        lambda1: x[0],
        rho11: x[1],
        rho12: x[2],
    })
}

fn map_regime(lambda: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Stagnation { .. } | Error::InsideSupport { .. } => Error::ImpossibleRegime {
            lambda,
            edge: SEMICIRCLE_EDGE,
        },
        other => other,
    }
}

/// Deformed-law values entering the second-step residuals.
struct LawAt {
    a: f64,
    b: f64,
    q: f64,
}

fn law_at(lambda2: f64, tau: f64, edge: f64) -> Result<LawAt> {
    if lambda2 <= edge + 1e-9 {
        return Err(Error::InsideSupport { x: lambda2, edge });
    }
    let s = fixed_point_real(lambda2, tau, &FixedPointConfig::default())?;
    Ok(LawAt {
        a: s.a.re,
        b: s.b.re,
        q: s.q.re,
    })
}

/// Residuals of the seven second-step equations at fixed deformation `tau`.
///
/// Unknown layout: `(lambda2, theta21, theta22, rho21, rho22, kappa, eta)`.
/// `edge` is the right support edge of the law at `tau`.
pub fn second_step_residual(
    beta: [f64; 2],
    alpha: f64,
    gamma: f64,
    first: &FirstStepSolution,
    tau: f64,
    edge: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let l2 = x[0];
    let theta = [x[1], x[2]];
    let rho2 = [x[3], x[4]];
    let kappa = x[5];
    let eta = x[6];
    let law = law_at(l2, tau, edge)?;
    let r1 = r_semicircle_real(first.lambda1)?;
    let rho1 = [first.rho11, first.rho12];

    let fq = l2 + law.q;
    let s_theta_rho2: f64 = (0..2).map(|i| beta[i] * theta[i] * rho2[i] * rho2[i]).sum();
    let s_rho1_rho2: f64 = (0..2).map(|i| beta[i] * rho1[i] * rho2[i] * rho2[i]).sum();
    let s_theta_rho1_rho2: f64 = (0..2).map(|i| beta[i] * theta[i] * rho1[i] * rho2[i]).sum();
    let s_rho1sq_rho2: f64 = (0..2).map(|i| beta[i] * rho1[i] * rho1[i] * rho2[i]).sum();

    let mut out = vec![0.0; 7];
    out[0] = fq - (gamma * kappa * eta * eta / 3.0) * r1 - 2.0 * gamma * kappa * kappa * law.b
        - s_theta_rho2
        + gamma * kappa * s_rho1_rho2;
    for j in 0..2 {
        let s_alpha_rho2: f64 = (0..2)
            .map(|i| beta[i] * alpha_cross(alpha, i, j) * rho2[i] * rho2[i])
            .sum();
        out[1 + j] = (fq - law.a) * theta[j]
            - gamma * rho1[j] * ((eta * eta / 3.0) * r1 + 2.0 * kappa * law.b)
            - s_alpha_rho2
            + gamma * rho1[j] * s_rho1_rho2;
    }
    out[3] = (l2 + 2.0 * (1.0 - gamma) * law.b) * kappa
        - (1.0 - gamma) * (s_rho1_rho2 - (eta * eta / 3.0) * r1);
    for j in 0..2 {
        let s_theta_rho2_alpha: f64 = (0..2)
            .map(|i| beta[i] * theta[i] * rho2[i] * alpha_cross(alpha, i, j))
            .sum();
        let s_rho1_rho2_alpha: f64 = (0..2)
            .map(|i| beta[i] * rho1[i] * rho2[i] * alpha_cross(alpha, i, j))
            .sum();
        out[4 + j] = (fq - (1.0 + gamma * kappa * kappa) * law.b) * rho2[j]
            - s_theta_rho2_alpha
            + gamma * kappa * (s_rho1_rho2_alpha - (rho1[j] * eta / 3.0) * r1);
    }
    out[6] = (l2
        + law.a
        + (1.0 - gamma * kappa * kappa) * law.b
        + (kappa * (1.0 - 2.0 * gamma) / 3.0) * r1)
        * eta
        - s_theta_rho1_rho2
        + gamma * kappa * s_rho1sq_rho2;
    Ok(out)
}

/// Residuals of the reduced six-equation system at full projection strength
/// (`gamma = 1`: the factors decouple through the plain semicircle law).
///
/// Unknown layout: `(lambda2, theta21, theta22, rho21, rho22, eta)`.
pub fn gamma1_residual(
    beta: [f64; 2],
    alpha: f64,
    first: &FirstStepSolution,
    x: &[f64],
) -> Result<Vec<f64>> {
    let l2 = x[0];
    let theta = [x[1], x[2]];
    let rho2 = [x[3], x[4]];
    let eta = x[5];
    if l2 <= SEMICIRCLE_EDGE {
        return Err(Error::InsideSupport { x: l2, edge: SEMICIRCLE_EDGE });
    }
    let r1 = r_semicircle_real(first.lambda1)?;
    let rho1 = [first.rho11, first.rho12];
    let h2 = h_r(l2)?;
    let s_rho1_rho2: f64 = (0..2).map(|i| beta[i] * rho1[i] * rho2[i] * rho2[i]).sum();

    let mut out = vec![0.0; 6];
    out[0] = f_r(l2)? - (0..2).map(|i| beta[i] * theta[i] * rho2[i] * rho2[i]).sum::<f64>();
    for j in 0..2 {
        let s_alpha: f64 = (0..2)
            .map(|i| beta[i] * alpha_cross(alpha, i, j) * rho2[i] * rho2[i])
            .sum();
        out[1 + j] =
            h2 * theta[j] - (eta * eta / 3.0) * r1 * rho1[j] - s_alpha + rho1[j] * s_rho1_rho2;
    }
    for j in 0..2 {
        let s: f64 = (0..2)
            .map(|i| beta[i] * theta[i] * rho2[i] * alpha_cross(alpha, i, j))
            .sum();
        out[3 + j] = h2 * rho2[j] - s;
    }
    out[5] = h2 * eta - (0..2).map(|i| beta[i] * theta[i] * rho1[i] * rho2[i]).sum::<f64>();
    Ok(out)
}

fn check_degenerate(beta1: f64, beta2: f64) -> Result<()> {
    if beta1.min(beta2) < 1e-12 {
        return Err(Error::DegenerateComponent(
            "second deflation step needs both signal strengths positive".into(),
        ));
    }
    Ok(())
}

/// Solves the reduced system at `gamma = 1`.
///
/// The start from `init` is tried as given first; if Newton stalls, sign
/// variants of the first-mode alignments are tried, since at strong
/// correlation the root need not be all-positive while measured initializers
/// are.
pub fn solve_second_gamma1(
    beta1: f64,
    beta2: f64,
    alpha: f64,
    first: &FirstStepSolution,
    init: &SecondStepSolution,
    cfg: &SolverConfig,
) -> Result<SecondStepSolution> {
    check_degenerate(beta1, beta2)?;
    let beta = [beta1, beta2];
    let f = |x: &[f64]| gamma1_residual(beta, alpha, first, x);
    let mut last_err = None;
    for &(s1, s2) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let x0 = vec![
            init.lambda2,
            s1 * init.theta21,
            s2 * init.theta22,
            init.rho21,
            init.rho22,
            init.eta,
        ];
        match newton_solve(&f, &x0, cfg) {
            Ok(x) => {
                return Ok(SecondStepSolution {
                    lambda2: x[0],
                    theta21: x[1],
                    theta22: x[2],
                    rho21: x[3],
                    rho22: x[4],
                    kappa: 0.0,
                    eta: x[5],
                    gamma: 1.0,
                    tau: -1.0,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(map_regime(init.lambda2)(last_err.expect("at least one attempt")))
}

/// Solves the seven-equation second-step system, alternating a full Newton
/// pass at fixed deformation with a refresh of the deformation parameter
/// from the current overlap, until the joint residual drops below
/// [`JOINT_TOL`].
pub fn solve_second(
    beta1: f64,
    beta2: f64,
    alpha: f64,
    gamma: f64,
    first: &FirstStepSolution,
    init: &SecondStepSolution,
    cfg: &SolverConfig,
) -> Result<SecondStepSolution> {
    check_degenerate(beta1, beta2)?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    let beta = [beta1, beta2];
    let mut x = init.unknowns().to_vec();
    let mut tau = deformation_tau(gamma, x[5]);
    let mut edge = support_right_edge(tau);
    let mut edge_tau = tau;
    if x[0] <= edge + 1e-9 {
        return Err(Error::ImpossibleRegime { lambda: x[0], edge });
    }
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));

    for outer in 0..cfg.outer_iter {
        let tau_now = tau;
        let edge_now = edge;
        let f =
            |y: &[f64]| second_step_residual(beta, alpha, gamma, first, tau_now, edge_now, y);
        x = match newton_solve(&f, &x, cfg) {
            Ok(sol) => sol,
            Err(primary) if outer == 0 => {
                // retry from sign variants of the measured start
                let mut found = None;
                'ladder: for &sk in &[1.0, -1.0] {
                    for &(s1, s2) in &[(1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, 1.0)] {
                        if (sk, s1, s2) == (1.0, 1.0, 1.0) {
                            continue;
                        }
                        let mut y = init.unknowns().to_vec();
                        y[1] *= s1;
                        y[2] *= s2;
                        y[5] *= sk;
                        if let Ok(sol) = newton_solve(&f, &y, cfg) {
                            found = Some(sol);
                            break 'ladder;
                        }
                    }
                }
                match found {
                    Some(sol) => sol,
                    None => return Err(map_regime(x[0])(primary)),
                }
            }
            Err(e) => return Err(map_regime(x[0])(e)),
        };

        tau = deformation_tau(gamma, x[5]);
        // the edge moves continuously with tau; refresh only on real drift
        if (tau - edge_tau).abs() > 1e-3 {
            edge = support_right_edge(tau);
            edge_tau = tau;
        }
        let joint = second_step_residual(beta, alpha, gamma, first, tau, edge, &x)
            .map_err(map_regime(x[0]))?;
        if inf(&joint) < JOINT_TOL {
            let sol = SecondStepSolution {
                lambda2: x[0],
                theta21: x[1],
                theta22: x[2],
                rho21: x[3],
                rho22: x[4],
                kappa: x[5],
                eta: x[6],
                gamma,
                tau,
            };
            let final_edge = support_right_edge(tau);
            if sol.lambda2 <= final_edge + 1e-6 {
                return Err(Error::ImpossibleRegime {
                    lambda: sol.lambda2,
                    edge: final_edge,
                });
            }
            return Ok(sol);
        }
    }
    Err(Error::NoConvergence {
        context: "second-step alternation",
        iterations: cfg.outer_iter,
        residual: f64::NAN,
    })
}

/// Runs one simulated deflation step and measures the quantities that seed
/// the first-step solver.
pub fn simulated_first_init(
    beta1: f64,
    beta2: f64,
    alpha: f64,
    p: usize,
    seed: u64,
) -> Result<FirstStepSolution> {
    let model = SpikedModel {
        p,
        beta1,
        beta2,
        alpha,
        seed,
    };
    let (t, truth) = gen_spiked(&model)?;
    let f1 = power_iteration(&t, &PowerIterConfig::default())?;
    Ok(FirstStepSolution {
        lambda1: f1.lambda,
        rho11: dot(&f1.u, &truth.x1).abs(),
        rho12: dot(&f1.u, &truth.x2).abs(),
    })
}

/// Runs a full simulated two-step deflation at the given projection strength
/// and measures everything needed to seed both solvers.
pub fn simulated_init(
    beta1: f64,
    beta2: f64,
    alpha: f64,
    gamma: f64,
    p: usize,
    seed: u64,
) -> Result<(FirstStepSolution, SecondStepSolution)> {
    let model = SpikedModel {
        p,
        beta1,
        beta2,
        alpha,
        seed,
    };
    let (t, truth) = gen_spiked(&model)?;
    let f1 = power_iteration(&t, &PowerIterConfig::default())?;
    let proj = Mat::projector(&f1.u, gamma);
    let t2 = mode1_matmul(&t, &proj)?;
    let f2 = power_iteration(&t2, &PowerIterConfig::default())?;
    let first = FirstStepSolution {
        lambda1: f1.lambda,
        rho11: dot(&f1.u, &truth.x1).abs(),
        rho12: dot(&f1.u, &truth.x2).abs(),
    };
    let kappa = dot(&f1.u, &f2.u).abs();
    let second = SecondStepSolution {
        lambda2: f2.lambda,
        theta21: dot(&f2.u, &truth.x1).abs(),
        theta22: dot(&f2.u, &truth.x2).abs(),
        rho21: dot(&f2.v, &truth.y1).abs(),
        rho22: dot(&f2.v, &truth.y2).abs(),
        kappa,
        eta: dot(&f1.v, &f2.v).abs(),
        gamma,
        tau: deformation_tau(gamma, kappa),
    };
    Ok((first, second))
}

/// Continuation sweep over the projection strength: solves the second-step
/// system on a descending grid of `gamma` values, seeding each point with the
/// previous solution. Points where the solver fails carry the error message.
pub fn sweep_gamma(
    beta1: f64,
    beta2: f64,
    alpha: f64,
    first: &FirstStepSolution,
    start: &SecondStepSolution,
    gammas: &[f64],
    cfg: &SolverConfig,
) -> Vec<(f64, std::result::Result<SecondStepSolution, String>)> {
    let mut out = Vec::with_capacity(gammas.len());
    let mut seed = *start;
    for &g in gammas {
        let mut init = seed;
        if init.kappa.abs() < 1e-9 && g < 1.0 {
            // give the overlap a direction to grow from, as the reduced
            // solution at full strength has it pinned at zero
            init.kappa = 1e-5;
        }
        match solve_second(beta1, beta2, alpha, g, first, &init, cfg) {
            Ok(sol) => {
                seed = sol;
                out.push((g, Ok(sol)));
            }
            Err(e) => out.push((g, Err(e.to_string()))),
        }
    }
    out
}
