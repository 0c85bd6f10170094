//! Implementations of the experiment commands and figure presets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use tendefl_core::asymptotics::{
    deformation_tau, second_step_residual, simulated_init, solve_first, solve_second,
    solve_second_gamma1, FirstStepSolution, SecondStepSolution, SolverConfig,
};
use tendefl_core::estimation::{estimate, EstimateInit, ModelEstimate, Observables};
use tendefl_core::pipeline::{
    deflate, improved_deflation, measure_alignments, AlignmentRecord, DeflationRun,
    ImprovedConfig,
};
use tendefl_core::rank_one::{power_iteration, PowerIterConfig};
use tendefl_core::spectral::{build_m, build_n, histogram, sym_eigenvalues, SpectrumSource};
use tendefl_core::stieltjes::{nu_density, semicircle_density, support_right_edge};
use tendefl_core::tensor::{gen_spiked, GroundTruth, SpikedModel};

use crate::config::{Config, ConfigError};
use crate::manifest::{finalize, write_atomic};
use crate::svg;

pub enum CliError {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Numeric(String),
    /// Exit code 1.
    Io(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<tendefl_core::Error> for CliError {
    fn from(e: tendefl_core::Error) -> Self {
        match e {
            tendefl_core::Error::InvalidParameter(m) => CliError::Config(m),
            tendefl_core::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub struct Ctx {
    pub out_dir: PathBuf,
    pub svg: bool,
    pub full: bool,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Power-iteration budget for experiment runs; near the recovery threshold
/// convergence is slow and a run that exceeds this is recorded as failed.
fn power_cfg() -> PowerIterConfig {
    PowerIterConfig {
        max_iter: 3000,
        ..Default::default()
    }
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), CliError> {
    let mut content = String::with_capacity(rows.len() * 64 + header.len() + 1);
    content.push_str(header);
    content.push('\n');
    for r in rows {
        content.push_str(r);
        content.push('\n');
    }
    write_atomic(path, content.as_bytes())?;
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn config_snapshot(cfg: &Config) -> BTreeMap<String, String> {
    cfg.entries().clone()
}

/// One realization, first factor, block matrix of the noise, spectrum files.
pub fn cmd_spectrum(cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&[
        "p", "beta1", "beta2", "alpha", "gamma", "seed", "bins",
    ])?;
    let started = Instant::now();
    let p = cfg.get_usize("p", 200)?;
    let model = SpikedModel {
        p,
        beta1: cfg.get_f64("beta1", 20.0)?,
        beta2: cfg.get_f64("beta2", 15.0)?,
        alpha: cfg.get_f64("alpha", 0.8)?,
        seed: cfg.get_u64("seed", 42)?,
    };
    let bins = cfg.get_usize("bins", 40)?;
    let gamma = cfg.get_str("gamma").map(|_| cfg.require_f64("gamma")).transpose()?;

    let (t, truth) = gen_spiked(&model)?;
    let mut outputs = Vec::new();

    let f1 = power_iteration(&t, &power_cfg())?;
    let n_mat = build_n(&truth.noise, &f1.u, &f1.v, &f1.w)?;
    let spec = sym_eigenvalues(&n_mat, SpectrumSource::N)?;
    let ev_path = ctx.path("eigenvalues.csv");
    spec.dump_csv(&ev_path)?;
    outputs.push(ev_path);

    let hist = histogram(&spec, bins)?;
    let hist_path = ctx.path("histogram.csv");
    hist.dump_csv(&hist_path)?;
    outputs.push(hist_path);

    let grid: Vec<f64> = (0..721).map(|i| -1.8 + 3.6 * i as f64 / 720.0).collect();
    let dens_rows: Vec<String> = grid
        .iter()
        .map(|x| format!("{x},{}", semicircle_density(*x)))
        .collect();
    let dens_path = ctx.path("density.csv");
    write_csv(&dens_path, "x,density", &dens_rows)?;
    outputs.push(dens_path);

    if ctx.svg {
        let overlay: Vec<f64> = grid.iter().map(|x| semicircle_density(*x)).collect();
        let chart = svg::column_chart(
            "first-step contraction spectrum",
            &hist.centers,
            &hist.densities,
            Some((&grid, &overlay)),
        );
        let p = ctx.path("histogram.svg");
        write_atomic(&p, chart.as_bytes())?;
        outputs.push(p);
    }

    if let Some(g) = gamma {
        let run = deflate(&t, g, Some(&truth), &power_cfg())?;
        let m_mat = build_m(
            &truth.noise,
            &run.factor1.u,
            &run.factor2.u,
            &run.factor2.v,
            &run.factor2.w,
            g,
        )?;
        let m_spec = sym_eigenvalues(&m_mat, SpectrumSource::M)?;
        let m_ev = ctx.path("m_eigenvalues.csv");
        m_spec.dump_csv(&m_ev)?;
        outputs.push(m_ev);
        let m_hist = histogram(&m_spec, bins)?;
        let m_hist_path = ctx.path("m_histogram.csv");
        m_hist.dump_csv(&m_hist_path)?;
        outputs.push(m_hist_path);

        // deformation parameter from the solved second-step system
        let al = run.truth_alignments.as_ref().expect("truth provided");
        let first_init = FirstStepSolution {
            lambda1: run.factor1.lambda,
            rho11: al.rho1(0),
            rho12: al.rho1(1),
        };
        let first = solve_first(model.beta1, model.beta2, model.alpha, &first_init, &SolverConfig::default())?;
        let second_init = SecondStepSolution {
            lambda2: run.factor2.lambda,
            theta21: al.theta2(0),
            theta22: al.theta2(1),
            rho21: al.rho2(0),
            rho22: al.rho2(1),
            kappa: run.kappa.max(1e-5),
            eta: run.eta,
            gamma: g,
            tau: deformation_tau(g, run.kappa),
        };
        let second = solve_second(
            model.beta1,
            model.beta2,
            model.alpha,
            g,
            &first,
            &second_init,
            &SolverConfig::default(),
        )?;
        let lo = m_spec.eigenvalues.first().copied().unwrap_or(-2.0) - 0.1;
        let hi = m_spec.eigenvalues.last().copied().unwrap_or(2.0) + 0.1;
        let m_grid: Vec<f64> = (0..801).map(|i| lo + (hi - lo) * i as f64 / 800.0).collect();
        let table = nu_density(&m_grid, second.tau, 1e-6)?;
        let m_dens = ctx.path("m_density.csv");
        table.dump_csv(&m_dens)?;
        outputs.push(m_dens);
        if ctx.svg {
            let chart = svg::column_chart(
                &format!("projected spectrum, gamma = {g}, tau = {:.4}", second.tau),
                &m_hist.centers,
                &m_hist.densities,
                Some((&table.grid, &table.values)),
            );
            let p = ctx.path("m_histogram.svg");
            write_atomic(&p, chart.as_bytes())?;
            outputs.push(p);
        }
    }

    finalize(
        &ctx.out_dir,
        "spectrum",
        config_snapshot(cfg),
        vec![model.seed],
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}

struct DeflateRow {
    seed: u64,
    run: DeflationRun,
}

fn deflate_trials(
    model_base: &SpikedModel,
    gamma: f64,
    seeds: u64,
) -> Vec<(u64, Result<(DeflationRun, GroundTruth), String>)> {
    (0..seeds)
        .into_par_iter()
        .map(|trial| {
            let seed = model_base.seed.wrapping_add(trial);
            let model = SpikedModel { seed, ..*model_base };
            let out = (|| {
                let (t, truth) = gen_spiked(&model).map_err(|e| e.to_string())?;
                let run = deflate(&t, gamma, Some(&truth), &power_cfg()).map_err(|e| e.to_string())?;
                Ok((run, truth))
            })();
            (seed, out)
        })
        .collect()
}

const DEFLATE_HEADER: &str = "seed,gamma,lambda1,lambda2,kappa,eta,rho11,rho12,theta21,theta22,rho21,rho22,mode_spread";

fn deflate_row(seed: u64, run: &DeflationRun) -> String {
    let al = run.truth_alignments.as_ref().expect("truth measured");
    format!(
        "{seed},{},{},{},{},{},{},{},{},{},{},{},{}",
        run.gamma,
        run.factor1.lambda,
        run.factor2.lambda,
        run.kappa,
        run.eta,
        al.rho1(0),
        al.rho1(1),
        al.theta2(0),
        al.theta2(1),
        al.rho2(0),
        al.rho2(1),
        al.mode_spread()
    )
}

/// Multi-seed deflation runs with alignment CSVs.
pub fn cmd_deflate(cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&["p", "beta1", "beta2", "alpha", "gamma", "seeds", "seed"])?;
    let started = Instant::now();
    let model = SpikedModel {
        p: cfg.get_usize("p", 150)?,
        beta1: cfg.get_f64("beta1", 6.0)?,
        beta2: cfg.get_f64("beta2", 5.7)?,
        alpha: cfg.get_f64("alpha", 0.3)?,
        seed: cfg.get_u64("seed", 1)?,
    };
    model.validate()?;
    let gamma = cfg.get_f64("gamma", 1.0)?;
    let seeds = cfg.get_u64("seeds", 1)?;

    let results = deflate_trials(&model, gamma, seeds);
    let mut ok_rows: Vec<DeflateRow> = Vec::new();
    let mut rows = Vec::new();
    for (seed, res) in results {
        match res {
            Ok((run, _)) => {
                rows.push(deflate_row(seed, &run));
                ok_rows.push(DeflateRow { seed, run });
            }
            Err(e) => rows.push(format!("{seed},{gamma},,,,,,,,,,,{e:?}")),
        }
    }
    if ok_rows.is_empty() {
        return Err(CliError::Numeric("no deflation run converged".into()));
    }
    let runs_path = ctx.path("runs.csv");
    write_csv(&runs_path, DEFLATE_HEADER, &rows)?;
    let mut outputs = vec![runs_path];

    // per-quantity mean and standard deviation across the converged seeds
    let columns: [(&str, Box<dyn Fn(&DeflateRow) -> f64>); 11] = [
        ("lambda1", Box::new(|r| r.run.factor1.lambda)),
        ("lambda2", Box::new(|r| r.run.factor2.lambda)),
        ("kappa", Box::new(|r| r.run.kappa)),
        ("eta", Box::new(|r| r.run.eta)),
        ("rho11", Box::new(|r| r.run.truth_alignments.as_ref().unwrap().rho1(0))),
        ("rho12", Box::new(|r| r.run.truth_alignments.as_ref().unwrap().rho1(1))),
        ("theta21", Box::new(|r| r.run.truth_alignments.as_ref().unwrap().theta2(0))),
        ("theta22", Box::new(|r| r.run.truth_alignments.as_ref().unwrap().theta2(1))),
        ("rho21", Box::new(|r| r.run.truth_alignments.as_ref().unwrap().rho2(0))),
        ("rho22", Box::new(|r| r.run.truth_alignments.as_ref().unwrap().rho2(1))),
        ("mode_spread", Box::new(|r| r.run.truth_alignments.as_ref().unwrap().mode_spread())),
    ];
    let mut srows = Vec::new();
    for (name, get) in &columns {
        let vals: Vec<f64> = ok_rows.iter().map(|r| get(r)).collect();
        let (m, s) = mean_std(&vals);
        srows.push(format!("{name},{m},{s}"));
    }
    let sum_path = ctx.path("summary.csv");
    write_csv(&sum_path, "quantity,mean,std", &srows)?;
    outputs.push(sum_path);

    if seeds == 1 {
        let r = &ok_rows[0];
        let al = r.run.truth_alignments.as_ref().unwrap();
        let doc = json!({
            "model": { "p": model.p, "beta1": model.beta1, "beta2": model.beta2,
                        "alpha": model.alpha, "seed": r.seed },
            "gamma": gamma,
            "lambda1": r.run.factor1.lambda,
            "lambda2": r.run.factor2.lambda,
            "kappa": r.run.kappa,
            "eta": r.run.eta,
            "alignments": al,
        });
        let json_path = ctx.path("run.json");
        write_atomic(&json_path, serde_json::to_string_pretty(&doc).unwrap().as_bytes())?;
        outputs.push(json_path);
    }

    finalize(
        &ctx.out_dir,
        "deflate",
        config_snapshot(cfg),
        (0..seeds).map(|t| model.seed.wrapping_add(t)).collect(),
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}

const SWEEP_HEADER: &str = "swept,lambda1,rho11,rho12,first_residual,lambda2,theta21,theta22,rho21,rho22,kappa,eta,tau,second_residual,status";

fn second_residual_norm(
    beta: [f64; 2],
    alpha: f64,
    sol: &SecondStepSolution,
    first: &FirstStepSolution,
) -> f64 {
    let edge = support_right_edge(sol.tau);
    match second_step_residual(beta, alpha, sol.gamma, first, sol.tau, edge, &sol.unknowns()) {
        Ok(res) => res.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        Err(_) => f64::NAN,
    }
}

/// Asymptotic sweeps: either the projection strength at fixed SNRs, or one
/// SNR at fixed projection strength.
pub fn cmd_solve(cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&[
        "kind", "p", "beta1", "beta2", "alpha", "gamma", "gamma_min", "gamma_max", "gamma_step",
        "snr_fixed", "snr_min", "snr_max", "snr_step", "seed",
    ])?;
    let started = Instant::now();
    let kind = cfg.get_str("kind").unwrap_or("gamma").to_string();
    let p = cfg.get_usize("p", 100)?;
    let seed = cfg.get_u64("seed", 1)?;
    let scfg = SolverConfig::default();
    let mut rows = Vec::new();

    match kind.as_str() {
        "gamma" => {
            let beta1 = cfg.get_f64("beta1", 10.0)?;
            let beta2 = cfg.get_f64("beta2", 8.0)?;
            let alpha = cfg.get_f64("alpha", 0.6)?;
            let g_min = cfg.get_f64("gamma_min", 0.0)?;
            let g_max = cfg.get_f64("gamma_max", 1.0)?;
            let g_step = cfg.get_f64("gamma_step", 0.02)?;
            if g_step <= 0.0 || g_max < g_min {
                return Err(CliError::Config("bad gamma grid".into()));
            }
            let (fi, si) = simulated_init(beta1, beta2, alpha, 1.0, p, seed)?;
            let first = solve_first(beta1, beta2, alpha, &fi, &scfg)?;
            let start = solve_second_gamma1(beta1, beta2, alpha, &first, &si, &scfg)?;
            // continuation downward from full strength
            let mut gammas = Vec::new();
            let mut g = g_max;
            while g >= g_min - 1e-12 {
                gammas.push(g.max(0.0));
                g -= g_step;
            }
            let swept = tendefl_core::asymptotics::sweep_gamma(
                beta1, beta2, alpha, &first, &start, &gammas, &scfg,
            );
            let fres = tendefl_core::asymptotics::first_step_residual(
                [beta1, beta2],
                alpha,
                &[first.lambda1, first.rho11, first.rho12],
            )
            .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .unwrap_or(f64::NAN);
            for (g, res) in swept.iter().rev() {
                match res {
                    Ok(sol) => {
                        let sres = second_residual_norm([beta1, beta2], alpha, sol, &first);
                        rows.push(format!(
                            "{g},{},{},{},{fres},{},{},{},{},{},{},{},{},{sres},ok",
                            first.lambda1,
                            first.rho11,
                            first.rho12,
                            sol.lambda2,
                            sol.theta21,
                            sol.theta22,
                            sol.rho21,
                            sol.rho22,
                            sol.kappa,
                            sol.eta,
                            sol.tau
                        ));
                    }
                    Err(e) => rows.push(format!(
                        "{g},{},{},{},{fres},,,,,,,,,,{:?}",
                        first.lambda1, first.rho11, first.rho12, e
                    )),
                }
            }
        }
        "snr" => {
            let fixed = cfg.get_f64("snr_fixed", 5.0)?;
            let alpha = cfg.get_f64("alpha", 0.5)?;
            let gamma = cfg.get_f64("gamma", 1.0)?;
            let s_min = cfg.get_f64("snr_min", 0.0)?;
            let s_max = cfg.get_f64("snr_max", 15.0)?;
            let s_step = cfg.get_f64("snr_step", 1.0)?;
            if s_step <= 0.0 || s_max < s_min {
                return Err(CliError::Config("bad snr grid".into()));
            }
            let mut swept = s_min;
            let mut idx = 0u64;
            let mut prev: Option<(FirstStepSolution, SecondStepSolution)> = None;
            while swept <= s_max + 1e-12 {
                let row = solve_snr_point(fixed, swept, alpha, gamma, p, seed + idx, &prev, &scfg);
                match row {
                    Ok((first, second, fres, sres)) => {
                        rows.push(format!(
                            "{swept},{},{},{},{fres},{},{},{},{},{},{},{},{},{sres},ok",
                            first.lambda1,
                            first.rho11,
                            first.rho12,
                            second.lambda2,
                            second.theta21,
                            second.theta22,
                            second.rho21,
                            second.rho22,
                            second.kappa,
                            second.eta,
                            second.tau
                        ));
                        prev = Some((first, second));
                    }
                    Err(e) => rows.push(format!("{swept},,,,,,,,,,,,,,{:?}", e)),
                }
                swept += s_step;
                idx += 1;
            }
        }
        other => return Err(CliError::Config(format!("unknown kind '{other}'"))),
    }

    let path = ctx.path("sweep.csv");
    write_csv(&path, SWEEP_HEADER, &rows)?;
    let mut outputs = vec![path];
    if ctx.svg {
        outputs.push(sweep_svg(ctx, &rows)?);
    }
    finalize(
        &ctx.out_dir,
        "solve",
        config_snapshot(cfg),
        vec![seed],
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}

fn sweep_svg(ctx: &Ctx, rows: &[String]) -> Result<PathBuf, CliError> {
    let mut x = Vec::new();
    let mut t22 = Vec::new();
    let mut r22 = Vec::new();
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        if f.last() == Some(&"ok") {
            x.push(f[0].parse().unwrap_or(f64::NAN));
            t22.push(f[7].parse().unwrap_or(f64::NAN));
            r22.push(f[9].parse().unwrap_or(f64::NAN));
        }
    }
    let chart = svg::line_chart(
        "solved second-step alignments",
        &x,
        &[("theta22", t22), ("rho22", r22)],
    );
    let p = ctx.path("sweep.svg");
    write_atomic(&p, chart.as_bytes())?;
    Ok(p)
}

type SnrPoint = (FirstStepSolution, SecondStepSolution, f64, f64);

fn solve_snr_point(
    fixed: f64,
    swept: f64,
    alpha: f64,
    gamma: f64,
    p: usize,
    seed: u64,
    prev: &Option<(FirstStepSolution, SecondStepSolution)>,
    scfg: &SolverConfig,
) -> tendefl_core::Result<SnrPoint> {
    let (beta1, beta2) = (fixed, swept);
    // primary route: seed from one simulated realization; fallback: continue
    // from the previous grid point
    let attempt = |fi: &FirstStepSolution,
                   si: &SecondStepSolution|
     -> tendefl_core::Result<(FirstStepSolution, SecondStepSolution)> {
        let first = solve_first(beta1, beta2, alpha, fi, scfg)?;
        let second = if gamma >= 1.0 {
            solve_second_gamma1(beta1, beta2, alpha, &first, si, scfg)?
        } else {
            solve_second(beta1, beta2, alpha, gamma, &first, si, scfg)?
        };
        Ok((first, second))
    };
    let simulated = simulated_init(beta1, beta2, alpha, gamma, p, seed);
    let solved = match simulated {
        Ok((fi, si)) => attempt(&fi, &si).or_else(|e| match prev {
            Some((pf, ps)) => attempt(pf, ps).map_err(|_| e),
            None => Err(e),
        }),
        Err(e) => match prev {
            Some((pf, ps)) => attempt(pf, ps).map_err(|_| tendefl_core::Error::Numeric(e.to_string())),
            None => Err(e),
        },
    }?;
    let (first, second) = solved;
    let fres = tendefl_core::asymptotics::first_step_residual(
        [beta1, beta2],
        alpha,
        &[first.lambda1, first.rho11, first.rho12],
    )?
    .iter()
    .fold(0.0f64, |m, v| m.max(v.abs()));
    let sres = if gamma >= 1.0 {
        tendefl_core::asymptotics::gamma1_residual(
            [beta1, beta2],
            alpha,
            &first,
            &[
                second.lambda2,
                second.theta21,
                second.theta22,
                second.rho21,
                second.rho22,
                second.eta,
            ],
        )?
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        second_residual_norm([beta1, beta2], alpha, &second, &first)
    };
    Ok((first, second, fres, sres))
}

const ESTIMATE_HEADER: &str = "seed,lambda1_hat,lambda2_hat,eta_hat,beta1_hat,beta2_hat,alpha_hat,rho11_hat,rho12_hat,theta21_hat,theta22_hat,rho21_hat,rho22_hat,residual,alpha_out_of_model,status";

fn estimate_row(seed: u64, obs: &Observables, est: &ModelEstimate) -> String {
    format!(
        "{seed},{},{},{},{},{},{},{},{},{},{},{},{},{},{},ok",
        obs.lambda1_hat,
        obs.lambda2_hat,
        obs.eta_hat,
        est.beta1_hat,
        est.beta2_hat,
        est.alpha_hat,
        est.rho11,
        est.rho12,
        est.theta21,
        est.theta22,
        est.rho21,
        est.rho22,
        est.residual_norm,
        est.alpha_out_of_model
    )
}

/// Parameter-estimation trials, either from simulated realizations or from
/// explicitly given observables.
pub fn cmd_estimate(cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&[
        "mode", "p", "beta1", "beta2", "alpha", "seeds", "seed", "lambda1", "lambda2", "eta",
    ])?;
    let started = Instant::now();
    let mode = cfg.get_str("mode").unwrap_or("simulate").to_string();
    let mut outputs = Vec::new();
    let mut seeds_used = Vec::new();

    match mode.as_str() {
        "observables" => {
            let obs = Observables {
                lambda1_hat: cfg.require_f64("lambda1")?,
                lambda2_hat: cfg.require_f64("lambda2")?,
                eta_hat: cfg.require_f64("eta")?,
            };
            let est = estimate(&obs, &EstimateInit::plug_in(&obs)).map_err(|e| {
                CliError::Numeric(format!(
                    "estimation refused: {e} (the singular values must exceed the bulk edge 2*sqrt(2/3) = 1.63299)"
                ))
            })?;
            let path = ctx.path("estimates.csv");
            write_csv(&path, ESTIMATE_HEADER, &[estimate_row(0, &obs, &est)])?;
            outputs.push(path);
        }
        "simulate" => {
            let model = SpikedModel {
                p: cfg.get_usize("p", 150)?,
                beta1: cfg.get_f64("beta1", 8.0)?,
                beta2: cfg.get_f64("beta2", 5.0)?,
                alpha: cfg.get_f64("alpha", 0.5)?,
                seed: cfg.get_u64("seed", 1)?,
            };
            model.validate()?;
            let seeds = cfg.get_u64("seeds", 20)?;
            seeds_used = (0..seeds).map(|t| model.seed.wrapping_add(t)).collect();
            let results: Vec<(u64, Result<(Observables, ModelEstimate), String>)> = (0..seeds)
                .into_par_iter()
                .map(|trial| {
                    let seed = model.seed.wrapping_add(trial);
                    let m = SpikedModel { seed, ..model };
                    let out = (|| {
                        let (t, truth) = gen_spiked(&m).map_err(|e| e.to_string())?;
                        let run = deflate(&t, 1.0, Some(&truth), &power_cfg())
                            .map_err(|e| e.to_string())?;
                        let obs = Observables {
                            lambda1_hat: run.factor1.lambda,
                            lambda2_hat: run.factor2.lambda,
                            eta_hat: run.eta.clamp(0.0, 1.0),
                        };
                        let est = estimate(&obs, &EstimateInit::plug_in(&obs))
                            .map_err(|e| e.to_string())?;
                        Ok((obs, est))
                    })();
                    (seed, out)
                })
                .collect();
            let mut rows = Vec::new();
            let mut b1 = Vec::new();
            let mut b2 = Vec::new();
            let mut av = Vec::new();
            for (seed, r) in &results {
                match r {
                    Ok((obs, est)) => {
                        rows.push(estimate_row(*seed, obs, est));
                        b1.push(est.beta1_hat);
                        b2.push(est.beta2_hat);
                        av.push(est.alpha_hat);
                    }
                    Err(e) => rows.push(format!("{seed},,,,,,,,,,,,,,,{e:?}")),
                }
            }
            let path = ctx.path("estimates.csv");
            write_csv(&path, ESTIMATE_HEADER, &rows)?;
            outputs.push(path);

            let (m1, s1) = mean_std(&b1);
            let (m2, s2) = mean_std(&b2);
            let (ma, sa) = mean_std(&av);
            let big1 = model.beta1.max(model.beta2);
            let big2 = model.beta1.min(model.beta2);
            let srows = vec![
                format!("beta1,{big1},{m1},{},{s1},{}", m1 - big1, b1.len()),
                format!("beta2,{big2},{m2},{},{s2},{}", m2 - big2, b2.len()),
                format!("alpha,{},{ma},{},{sa},{}", model.alpha, ma - model.alpha, av.len()),
            ];
            let spath = ctx.path("estimate_summary.csv");
            write_csv(&spath, "parameter,true,mean,bias,std,valid_seeds", &srows)?;
            outputs.push(spath);
        }
        other => return Err(CliError::Config(format!("unknown mode '{other}'"))),
    }

    finalize(
        &ctx.out_dir,
        "estimate",
        config_snapshot(cfg),
        seeds_used,
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}

/// Components assigned to planted signals by maximal alignment; returns
/// (first-component alignment, second-component alignment) where "first" is
/// the stronger planted component and readings are second-mode based.
fn assigned_alignments(al: &AlignmentRecord, beta1: f64, beta2: f64) -> (f64, f64) {
    let (strong, weak) = if beta1 >= beta2 { (0, 1) } else { (1, 0) };
    // factor1 -> one component, factor2 -> the other; pick the pairing with
    // the larger total alignment
    let direct = al.v1_y[strong] + al.v2_y[weak];
    let crossed = al.v1_y[weak] + al.v2_y[strong];
    if direct >= crossed {
        (al.v1_y[strong], al.v2_y[weak])
    } else {
        (al.v2_y[strong], al.v1_y[weak])
    }
}

const IMPROVE_HEADER: &str = "seed,gamma_star,lambda1,lambda2,base_first,base_second,improved_first,improved_second,beta1_hat,beta2_hat,alpha_hat,status";

struct ImproveOutcome {
    gamma_star: f64,
    lambda1: f64,
    lambda2: f64,
    base_first: f64,
    base_second: f64,
    improved_first: f64,
    improved_second: f64,
    estimate: Option<ModelEstimate>,
    diagnostic: Option<String>,
}

fn improve_one(model: &SpikedModel, eps_step: f64) -> Result<ImproveOutcome, String> {
    let (t, truth) = gen_spiked(model).map_err(|e| e.to_string())?;
    let cfg = ImprovedConfig {
        power: power_cfg(),
        solver: SolverConfig::default(),
    };
    let improved = improved_deflation(&t, eps_step, &cfg).map_err(|e| e.to_string())?;
    let base_al = measure_alignments(
        &improved.baseline.factor1,
        &improved.baseline.factor2,
        &truth,
    );
    let star_al = measure_alignments(&improved.factor1_star, &improved.factor2_star, &truth);
    let (bf, bs) = assigned_alignments(&base_al, model.beta1, model.beta2);
    let (if_, is_) = assigned_alignments(&star_al, model.beta1, model.beta2);
    Ok(ImproveOutcome {
        gamma_star: improved.gamma_star,
        lambda1: improved.baseline.factor1.lambda,
        lambda2: improved.baseline.factor2.lambda,
        base_first: bf,
        base_second: bs,
        improved_first: if_,
        improved_second: is_,
        estimate: improved.estimate,
        diagnostic: improved.diagnostic,
    })
}

/// Full improved-deflation runs with sweep traces.
pub fn cmd_improve(cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&["p", "beta1", "beta2", "alpha", "seeds", "seed", "eps_step"])?;
    let started = Instant::now();
    let model = SpikedModel {
        p: cfg.get_usize("p", 150)?,
        beta1: cfg.get_f64("beta1", 6.0)?,
        beta2: cfg.get_f64("beta2", 5.7)?,
        alpha: cfg.get_f64("alpha", 0.5)?,
        seed: cfg.get_u64("seed", 1)?,
    };
    model.validate()?;
    let eps_step = cfg.get_f64("eps_step", 0.02)?;
    let seeds = cfg.get_u64("seeds", 1)?;

    let results: Vec<(u64, Result<ImproveOutcome, String>)> = (0..seeds)
        .into_par_iter()
        .map(|trial| {
            let seed = model.seed.wrapping_add(trial);
            let m = SpikedModel { seed, ..model };
            (seed, improve_one(&m, eps_step))
        })
        .collect();

    let mut rows = Vec::new();
    let mut ok = 0;
    for (seed, r) in &results {
        match r {
            Ok(o) => {
                ok += 1;
                let (b1h, b2h, ah) = o
                    .estimate
                    .as_ref()
                    .map(|e| (e.beta1_hat, e.beta2_hat, e.alpha_hat))
                    .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
                rows.push(format!(
                    "{seed},{},{},{},{},{},{},{},{b1h},{b2h},{ah},{}",
                    o.gamma_star,
                    o.lambda1,
                    o.lambda2,
                    o.base_first,
                    o.base_second,
                    o.improved_first,
                    o.improved_second,
                    o.diagnostic.clone().unwrap_or_else(|| "ok".into()).replace(',', ";")
                ));
            }
            Err(e) => rows.push(format!("{seed},,,,,,,,,,,{:?}", e.replace(',', ";"))),
        }
    }
    if ok == 0 {
        return Err(CliError::Numeric("no improved run succeeded".into()));
    }
    let path = ctx.path("improve.csv");
    write_csv(&path, IMPROVE_HEADER, &rows)?;
    let mut outputs = vec![path];

    if seeds == 1 {
        if let (_, Ok(_o)) = &results[0] {
            // re-run serially to capture the trace document
            let (t, _) = gen_spiked(&model).map_err(CliError::from)?;
            let improved = improved_deflation(
                &t,
                eps_step,
                &ImprovedConfig {
                    power: power_cfg(),
                    solver: SolverConfig::default(),
                },
            )
            .map_err(CliError::from)?;
            let doc = json!({
                "model": { "p": model.p, "beta1": model.beta1, "beta2": model.beta2,
                            "alpha": model.alpha, "seed": model.seed },
                "eps_step": eps_step,
                "gamma_star": improved.gamma_star,
                "estimate": improved.estimate,
                "sweep_trace": improved.sweep_trace,
                "diagnostic": improved.diagnostic,
            });
            let tpath = ctx.path("trace.json");
            write_atomic(&tpath, serde_json::to_string_pretty(&doc).unwrap().as_bytes())?;
            outputs.push(tpath);
        }
    }

    finalize(
        &ctx.out_dir,
        "improve",
        config_snapshot(cfg),
        (0..seeds).map(|t| model.seed.wrapping_add(t)).collect(),
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}

/// Figure presets. Desk-scale trial counts by default; `--full` restores the
/// published counts.
pub fn cmd_figure(name: &str, cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    match name {
        "fig1" => fig1(cfg, ctx),
        "fig2" => {
            let mut c = cfg.clone();
            for (k, v) in [("p", "200"), ("beta1", "20"), ("beta2", "15"), ("alpha", "0.8"), ("bins", "40")] {
                if c.get_str(k).is_none() {
                    c.set(k, v.into());
                }
            }
            cmd_spectrum(&c, ctx)
        }
        "fig3" => fig3_style(cfg, ctx, 1.0),
        "fig4" => {
            let mut c = cfg.clone();
            for (k, v) in [("p", "200"), ("beta1", "20"), ("beta2", "15"), ("alpha", "0.8"), ("bins", "40"), ("gamma", "0.85")] {
                if c.get_str(k).is_none() {
                    c.set(k, v.into());
                }
            }
            cmd_spectrum(&c, ctx)
        }
        "fig5" => {
            let mut c = cfg.clone();
            for (k, v) in [("kind", "gamma"), ("beta1", "10"), ("beta2", "8"), ("alpha", "0.6"), ("gamma_step", "0.02")] {
                if c.get_str(k).is_none() {
                    c.set(k, v.into());
                }
            }
            cmd_solve(&c, ctx)
        }
        "fig6" => fig6(cfg, ctx),
        "fig7" => fig7(cfg, ctx),
        "fig8" => fig8(cfg, ctx),
        "fig9" => fig3_style(cfg, ctx, 0.8),
        other => Err(CliError::Config(format!(
            "unknown figure '{other}' (expected fig1..fig9)"
        ))),
    }
}

fn fig1(cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&["p", "beta1", "seeds", "seed"])?;
    let started = Instant::now();
    let p = cfg.get_usize("p", 150)?;
    let beta1 = cfg.get_f64("beta1", 12.0)?;
    let seeds = cfg.get_u64("seeds", if ctx.full { 20 } else { 5 })?;
    let base_seed = cfg.get_u64("seed", 1)?;
    let mut outputs = Vec::new();
    for (tag, alpha) in [("00", 0.0), ("05", 0.5)] {
        let grid: Vec<f64> = (1..=20).map(|b| b as f64).collect();
        let rows: Vec<String> = grid
            .par_iter()
            .map(|&beta2| {
                let mut acc = [0.0f64; 4];
                let mut n = 0usize;
                for t in 0..seeds {
                    let model = SpikedModel {
                        p,
                        beta1,
                        beta2,
                        alpha,
                        seed: base_seed.wrapping_add(t).wrapping_add((beta2 * 1000.0) as u64),
                    };
                    let Ok((tensor, truth)) = gen_spiked(&model) else { continue };
                    let Ok(run) = deflate(&tensor, 1.0, Some(&truth), &power_cfg()) else {
                        continue;
                    };
                    let al = run.truth_alignments.unwrap();
                    acc[0] += al.u1_x[0];
                    acc[1] += al.u1_x[1];
                    acc[2] += al.u2_x[0];
                    acc[3] += al.u2_x[1];
                    n += 1;
                }
                if n == 0 {
                    format!("{beta2},,,,0")
                } else {
                    let k = n as f64;
                    format!(
                        "{beta2},{},{},{},{},{n}",
                        acc[0] / k,
                        acc[1] / k,
                        acc[2] / k,
                        acc[3] / k
                    )
                }
            })
            .collect();
        let path = ctx.path(&format!("fig1_alpha{tag}.csv"));
        write_csv(&path, "beta2,u1_x1,u1_x2,u2_x1,u2_x2,valid_seeds", &rows)?;
        outputs.push(path);
        if ctx.svg {
            let mut x = Vec::new();
            let mut s1 = Vec::new();
            let mut s2 = Vec::new();
            let mut s3 = Vec::new();
            let mut s4 = Vec::new();
            for r in &rows {
                let f: Vec<&str> = r.split(',').collect();
                if f[1].is_empty() {
                    continue;
                }
                x.push(f[0].parse().unwrap_or(f64::NAN));
                s1.push(f[1].parse().unwrap_or(f64::NAN));
                s2.push(f[2].parse().unwrap_or(f64::NAN));
                s3.push(f[3].parse().unwrap_or(f64::NAN));
                s4.push(f[4].parse().unwrap_or(f64::NAN));
            }
            let chart = svg::line_chart(
                &format!("first/second factor alignments, alpha = 0.{tag}"),
                &x,
                &[("u1_x1", s1), ("u1_x2", s2), ("u2_x1", s3), ("u2_x2", s4)],
            );
            let sp = ctx.path(&format!("fig1_alpha{tag}.svg"));
            write_atomic(&sp, chart.as_bytes())?;
            outputs.push(sp);
        }
    }
    finalize(
        &ctx.out_dir,
        "figure fig1",
        config_snapshot(cfg),
        (0..seeds).map(|t| base_seed.wrapping_add(t)).collect(),
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}

const FIG3_HEADER: &str = "beta2,valid_seeds,lambda1_sim,rho11_sim,rho12_sim,lambda2_sim,theta21_sim,theta22_sim,rho21_sim,rho22_sim,kappa_sim,eta_sim,lambda1_asym,rho11_asym,rho12_asym,lambda2_asym,theta21_asym,theta22_asym,rho21_asym,rho22_asym,kappa_asym,eta_asym,second_residual,status";

/// Simulated means against solved asymptotics over an SNR sweep.
fn fig3_style(cfg: &Config, ctx: &Ctx, gamma: f64) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&["p", "snr_fixed", "alpha", "seeds", "seed", "snr_step", "snr_max"])?;
    let started = Instant::now();
    let p = cfg.get_usize("p", 100)?;
    let fixed = cfg.get_f64("snr_fixed", 5.0)?;
    let alpha = cfg.get_f64("alpha", 0.5)?;
    let seeds = cfg.get_u64("seeds", 10)?;
    let base_seed = cfg.get_u64("seed", 1)?;
    let s_max = cfg.get_f64("snr_max", 15.0)?;
    let s_step = cfg.get_f64("snr_step", 1.0)?;
    let scfg = SolverConfig::default();

    let mut grid = Vec::new();
    let mut b = 0.0;
    while b <= s_max + 1e-12 {
        grid.push(b);
        b += s_step;
    }
    let sims: Vec<(f64, Vec<[f64; 10]>)> = grid
        .par_iter()
        .map(|&beta2| {
            let mut measured = Vec::new();
            for t in 0..seeds {
                let model = SpikedModel {
                    p,
                    beta1: fixed,
                    beta2,
                    alpha,
                    seed: base_seed
                        .wrapping_add(t)
                        .wrapping_add((beta2 * 7919.0) as u64),
                };
                let Ok((tensor, truth)) = gen_spiked(&model) else { continue };
                let Ok(run) = deflate(&tensor, gamma, Some(&truth), &power_cfg()) else {
                    continue;
                };
                let al = run.truth_alignments.unwrap();
                measured.push([
                    run.factor1.lambda,
                    al.rho1(0),
                    al.rho1(1),
                    run.factor2.lambda,
                    al.theta2(0),
                    al.theta2(1),
                    al.rho2(0),
                    al.rho2(1),
                    run.kappa,
                    run.eta,
                ]);
            }
            (beta2, measured)
        })
        .collect();

    let mut rows = Vec::new();
    let mut prev: Option<(FirstStepSolution, SecondStepSolution)> = None;
    for (beta2, measured) in sims {
        let n = measured.len();
        if n == 0 {
            rows.push(format!("{beta2},0{}", ",".repeat(22) + "no simulation converged"));
            continue;
        }
        let mut mean = [0.0f64; 10];
        for m in &measured {
            for k in 0..10 {
                mean[k] += m[k];
            }
        }
        for v in &mut mean {
            *v /= n as f64;
        }
        // seed the solvers from the measured means
        let fi = FirstStepSolution {
            lambda1: mean[0],
            rho11: mean[1],
            rho12: mean[2],
        };
        let si = SecondStepSolution {
            lambda2: mean[3],
            theta21: mean[4],
            theta22: mean[5],
            rho21: mean[6],
            rho22: mean[7],
            kappa: mean[8].max(1e-5),
            eta: mean[9],
            gamma,
            tau: deformation_tau(gamma, mean[8]),
        };
        let solved = (|| -> tendefl_core::Result<(FirstStepSolution, SecondStepSolution)> {
            let first = solve_first(fixed, beta2, alpha, &fi, &scfg)?;
            let second = if gamma >= 1.0 {
                solve_second_gamma1(fixed, beta2, alpha, &first, &si, &scfg)?
            } else {
                solve_second(fixed, beta2, alpha, gamma, &first, &si, &scfg)?
            };
            Ok((first, second))
        })()
        .or_else(|e| match &prev {
            Some((pf, ps)) => (|| -> tendefl_core::Result<_> {
                let first = solve_first(fixed, beta2, alpha, pf, &scfg)?;
                let second = if gamma >= 1.0 {
                    solve_second_gamma1(fixed, beta2, alpha, &first, ps, &scfg)?
                } else {
                    solve_second(fixed, beta2, alpha, gamma, &first, ps, &scfg)?
                };
                Ok((first, second))
            })()
            .map_err(|_| e),
            None => Err(e),
        });
        let sim_part = format!(
            "{beta2},{n},{},{},{},{},{},{},{},{},{},{}",
            mean[0], mean[1], mean[2], mean[3], mean[4], mean[5], mean[6], mean[7], mean[8], mean[9]
        );
        match solved {
            Ok((first, second)) => {
                let sres = if gamma >= 1.0 {
                    tendefl_core::asymptotics::gamma1_residual(
                        [fixed, beta2],
                        alpha,
                        &first,
                        &[
                            second.lambda2,
                            second.theta21,
                            second.theta22,
                            second.rho21,
                            second.rho22,
                            second.eta,
                        ],
                    )
                    .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                    .unwrap_or(f64::NAN)
                } else {
                    second_residual_norm([fixed, beta2], alpha, &second, &first)
                };
                rows.push(format!(
                    "{sim_part},{},{},{},{},{},{},{},{},{},{},{sres},ok",
                    first.lambda1,
                    first.rho11,
                    first.rho12,
                    second.lambda2,
                    second.theta21,
                    second.theta22,
                    second.rho21,
                    second.rho22,
                    second.kappa,
                    second.eta
                ));
                prev = Some((first, second));
            }
            Err(e) => rows.push(format!("{sim_part},,,,,,,,,,,,{:?}", e.to_string().replace(',', ";"))),
        }
    }
    let name = if gamma >= 1.0 { "fig3.csv" } else { "fig9.csv" };
    let path = ctx.path(name);
    write_csv(&path, FIG3_HEADER, &rows)?;
    let mut outputs = vec![path];
    if ctx.svg {
        let mut x = Vec::new();
        let mut sim = Vec::new();
        let mut asym = Vec::new();
        for r in &rows {
            let f: Vec<&str> = r.split(',').collect();
            if f.last() == Some(&"ok") {
                x.push(f[0].parse().unwrap_or(f64::NAN));
                sim.push(f[9].parse().unwrap_or(f64::NAN));
                asym.push(f[19].parse().unwrap_or(f64::NAN));
            }
        }
        let chart = svg::line_chart(
            "weaker-component alignment: simulated vs asymptotic",
            &x,
            &[("rho22_sim", sim), ("rho22_asym", asym)],
        );
        let sp = ctx.path(if gamma >= 1.0 { "fig3.svg" } else { "fig9.svg" });
        write_atomic(&sp, chart.as_bytes())?;
        outputs.push(sp);
    }
    finalize(
        &ctx.out_dir,
        if gamma >= 1.0 { "figure fig3" } else { "figure fig9" },
        config_snapshot(cfg),
        (0..seeds).map(|t| base_seed.wrapping_add(t)).collect(),
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}

fn fig6(cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&["p", "beta1", "beta2", "seeds", "seed", "eps_step", "alpha_step"])?;
    let started = Instant::now();
    let p = cfg.get_usize("p", 150)?;
    let beta1 = cfg.get_f64("beta1", 6.0)?;
    let beta2 = cfg.get_f64("beta2", 5.7)?;
    let seeds = cfg.get_u64("seeds", if ctx.full { 200 } else { 50 })?;
    let base_seed = cfg.get_u64("seed", 1)?;
    let eps_step = cfg.get_f64("eps_step", 0.02)?;
    let alpha_step = cfg.get_f64("alpha_step", 0.1)?;

    let mut alphas = Vec::new();
    let mut a: f64 = 0.0;
    while a <= 0.8 + 1e-12 {
        alphas.push((a * 100.0).round() / 100.0);
        a += alpha_step;
    }

    let mut raw_rows = Vec::new();
    let mut summary_rows = Vec::new();
    for &alpha in &alphas {
        let results: Vec<(u64, Result<ImproveOutcome, String>)> = (0..seeds)
            .into_par_iter()
            .map(|t| {
                let seed = base_seed
                    .wrapping_add(t)
                    .wrapping_add((alpha * 104729.0) as u64);
                let model = SpikedModel {
                    p,
                    beta1,
                    beta2,
                    alpha,
                    seed,
                };
                (seed, improve_one(&model, eps_step))
            })
            .collect();
        let mut bf = Vec::new();
        let mut bs = Vec::new();
        let mut imf = Vec::new();
        let mut ims = Vec::new();
        let mut gs = Vec::new();
        for (seed, r) in &results {
            match r {
                Ok(o) => {
                    raw_rows.push(format!(
                        "{alpha},{seed},{},{},{},{},{},ok",
                        o.gamma_star, o.base_first, o.base_second, o.improved_first, o.improved_second
                    ));
                    bf.push(o.base_first);
                    bs.push(o.base_second);
                    imf.push(o.improved_first);
                    ims.push(o.improved_second);
                    gs.push(o.gamma_star);
                }
                Err(e) => raw_rows.push(format!("{alpha},{seed},,,,,,{:?}", e.replace(',', ";"))),
            }
        }
        let (bfm, bfs) = mean_std(&bf);
        let (bsm, bss) = mean_std(&bs);
        let (ifm, ifs) = mean_std(&imf);
        let (ism, iss) = mean_std(&ims);
        let (gm, _) = mean_std(&gs);
        summary_rows.push(format!(
            "{alpha},baseline,{bfm},{bfs},{bsm},{bss},,{}",
            bf.len()
        ));
        summary_rows.push(format!(
            "{alpha},improved,{ifm},{ifs},{ism},{iss},{gm},{}",
            imf.len()
        ));
    }
    let raw_path = ctx.path("fig6_runs.csv");
    write_csv(
        &raw_path,
        "alpha,seed,gamma_star,base_first,base_second,improved_first,improved_second,status",
        &raw_rows,
    )?;
    let sum_path = ctx.path("fig6_summary.csv");
    write_csv(
        &sum_path,
        "alpha,mode,first_mean,first_std,second_mean,second_std,gamma_star_mean,valid_seeds",
        &summary_rows,
    )?;
    let outputs = vec![raw_path, sum_path];
    finalize(
        &ctx.out_dir,
        "figure fig6",
        config_snapshot(cfg),
        (0..seeds).map(|t| base_seed.wrapping_add(t)).collect(),
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}

fn fig7(cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&["p", "beta2", "alpha", "seeds", "seed"])?;
    let started = Instant::now();
    let p = cfg.get_usize("p", 150)?;
    let beta2 = cfg.get_f64("beta2", 5.0)?;
    let alpha = cfg.get_f64("alpha", 0.5)?;
    let seeds = cfg.get_u64("seeds", if ctx.full { 100 } else { 20 })?;
    let base_seed = cfg.get_u64("seed", 1)?;
    let mut rows = Vec::new();
    for &beta1 in &[6.0, 8.0, 10.0, 12.0] {
        let ests: Vec<Option<ModelEstimate>> = (0..seeds)
            .into_par_iter()
            .map(|t| {
                let model = SpikedModel {
                    p,
                    beta1,
                    beta2,
                    alpha,
                    seed: base_seed.wrapping_add(t).wrapping_add((beta1 * 331.0) as u64),
                };
                let (tensor, truth) = gen_spiked(&model).ok()?;
                let run = deflate(&tensor, 1.0, Some(&truth), &power_cfg()).ok()?;
                let obs = Observables {
                    lambda1_hat: run.factor1.lambda,
                    lambda2_hat: run.factor2.lambda,
                    eta_hat: run.eta.clamp(0.0, 1.0),
                };
                estimate(&obs, &EstimateInit::plug_in(&obs)).ok()
            })
            .collect();
        let b1: Vec<f64> = ests.iter().flatten().map(|e| e.beta1_hat).collect();
        let b2: Vec<f64> = ests.iter().flatten().map(|e| e.beta2_hat).collect();
        let av: Vec<f64> = ests.iter().flatten().map(|e| e.alpha_hat).collect();
        let (m1, s1) = mean_std(&b1);
        let (m2, s2) = mean_std(&b2);
        let (ma, sa) = mean_std(&av);
        rows.push(format!(
            "{beta1},{beta2},{alpha},{m1},{},{s1},{m2},{},{s2},{ma},{},{sa},{}",
            m1 - beta1,
            m2 - beta2,
            ma - alpha,
            b1.len()
        ));
    }
    let path = ctx.path("fig7_summary.csv");
    write_csv(
        &path,
        "beta1_true,beta2_true,alpha_true,beta1_mean,beta1_bias,beta1_std,beta2_mean,beta2_bias,beta2_std,alpha_mean,alpha_bias,alpha_std,valid_seeds",
        &rows,
    )?;
    let outputs = vec![path];
    finalize(
        &ctx.out_dir,
        "figure fig7",
        config_snapshot(cfg),
        (0..seeds).map(|t| base_seed.wrapping_add(t)).collect(),
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}

fn fig8(cfg: &Config, ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_keys(&["p", "beta1", "beta2", "seeds", "seed"])?;
    let started = Instant::now();
    let p = cfg.get_usize("p", 100)?;
    let beta1 = cfg.get_f64("beta1", 15.0)?;
    let beta2 = cfg.get_f64("beta2", 5.0)?;
    let seeds = cfg.get_u64("seeds", if ctx.full { 100 } else { 20 })?;
    let base_seed = cfg.get_u64("seed", 1)?;
    let mut rows = Vec::new();
    for k in 0..=8u32 {
        let alpha = k as f64 * 0.1;
        let pairs: Vec<Option<(AlignmentRecord, ModelEstimate)>> = (0..seeds)
            .into_par_iter()
            .map(|t| {
                let model = SpikedModel {
                    p,
                    beta1,
                    beta2,
                    alpha,
                    seed: base_seed.wrapping_add(t).wrapping_add(k as u64 * 4099),
                };
                let (tensor, truth) = gen_spiked(&model).ok()?;
                let run = deflate(&tensor, 1.0, Some(&truth), &power_cfg()).ok()?;
                let al = run.truth_alignments.unwrap();
                let obs = Observables {
                    lambda1_hat: run.factor1.lambda,
                    lambda2_hat: run.factor2.lambda,
                    eta_hat: run.eta.clamp(0.0, 1.0),
                };
                let est = estimate(&obs, &EstimateInit::plug_in(&obs)).ok()?;
                Some((al, est))
            })
            .collect();
        let valid: Vec<&(AlignmentRecord, ModelEstimate)> = pairs.iter().flatten().collect();
        if valid.is_empty() {
            rows.push(format!("{alpha},0{}", ",".repeat(8)));
            continue;
        }
        let n = valid.len() as f64;
        let mut sim = [0.0f64; 4];
        let mut est_m = [0.0f64; 4];
        for (al, est) in &valid {
            sim[0] += al.rho1(0);
            sim[1] += al.rho1(1);
            sim[2] += al.rho2(0);
            sim[3] += al.rho2(1);
            est_m[0] += est.rho11.abs();
            est_m[1] += est.rho12.abs();
            est_m[2] += est.rho21.abs();
            est_m[3] += est.rho22.abs();
        }
        rows.push(format!(
            "{alpha},{},{},{},{},{},{},{},{},{}",
            valid.len(),
            sim[0] / n,
            sim[1] / n,
            sim[2] / n,
            sim[3] / n,
            est_m[0] / n,
            est_m[1] / n,
            est_m[2] / n,
            est_m[3] / n
        ));
    }
    let path = ctx.path("fig8.csv");
    write_csv(
        &path,
        "alpha,valid_seeds,rho11_sim,rho12_sim,rho21_sim,rho22_sim,rho11_est,rho12_est,rho21_est,rho22_est",
        &rows,
    )?;
    let outputs = vec![path];
    finalize(
        &ctx.out_dir,
        "figure fig8",
        config_snapshot(cfg),
        (0..seeds).map(|t| base_seed.wrapping_add(t)).collect(),
        started.elapsed().as_secs_f64(),
        &outputs,
    )?;
    Ok(outputs)
}
