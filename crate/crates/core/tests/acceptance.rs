//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{Complex, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sideband_core::io::{scan_to_csv, to_json_string};
use sideband_core::preparation::prepare_psi2;
use sideband_core::reconstruct::{
    imbalance_direction, IdentifiabilityGrids, DISTINGUISHABLE_ABOVE, INDISTINGUISHABLE_BELOW,
};
use sideband_core::{
    canonical_hd_state, compare_states, fit_hd_curve, fit_rd_power_curve, hd_scan, identifiability_report, linspace,
    prepare_rho, prepare_rho_r, rd_locked_scan, rd_scan, reconstruct_covariance, s_hd, Cavity, Coupling, GridSpec,
    ModeIndex, NoiseModel, PreparationParams, ReconstructOptions, State, Technique,
};

const OMEGA_MHZ: f64 = 17.0;
const GAMMA_MHZ: f64 = 6.0;
const W: f64 = OMEGA_MHZ / GAMMA_MHZ;
const KAPPA: f64 = 10.0 / 19.0;
const BETA0_SQ: f64 = 16.0;

type Outcome = Result<String, String>;

fn analysis_cavity() -> Cavity {
    Cavity::new(0.04, GAMMA_MHZ, Coupling::Overcoupled, 0.935).unwrap()
}

fn benchmark_params() -> PreparationParams<f64> {
    PreparationParams {
        beta: Complex::new(0.0, 0.0),
        kappa: KAPPA,
        beta0_sq: BETA0_SQ,
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sql_flatness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vac = State::vacuum();
    let phases = linspace(0.0, 2.0 * PI, 100);
    let detunings = linspace(-10.0, 10.0, 200);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let cavity = common::random_cavity(&mut rng);
        let w = rng.random_range(0.5..6.0);
        let v = rng.random_range(0.5..1.0);
        let hd = hd_scan(&vac, &phases, v, None).map_err(|e| e.to_string())?;
        let rd = rd_scan(&vac, &cavity, &detunings, w, None).map_err(|e| e.to_string())?;
        for x in hd.values.iter().chain(&rd.values) {
            worst = worst.max((x - 1.0).abs());
        }
    }
    check(worst < 1e-12, format!("max |S - 1| = {worst:.2e}"))
}

fn hd_blindness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let phases = linspace(0.0, PI, 100);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = common::random_state(&mut rng);
        let mimic = canonical_hd_state(&s.hd_coefficients()).map_err(|e| e.to_string())?;
        for &phi in &phases {
            let d = s_hd(&s, phi, 1.0).unwrap() - s_hd(&mimic, phi, 1.0).unwrap();
            worst = worst.max(d.abs());
        }
    }
    check(worst < 1e-12, format!("max |S_HD(V) - S_HD(mimic)| = {worst:.2e}"))
}

fn benchmark_distinguishability() -> Outcome {
    let cavity = analysis_cavity();
    let rho = prepare_rho(&benchmark_params()).map_err(|e| e.to_string())?;
    let mimic = canonical_hd_state(&rho.hd_coefficients()).map_err(|e| e.to_string())?;

    let fine = linspace(-8.0, 8.0, 3201);
    let a = rd_scan(&rho, &cavity, &fine, W, None).map_err(|e| e.to_string())?;
    let b = rd_scan(&mimic, &cavity, &fine, W, None).map_err(|e| e.to_string())?;
    let (peak_at, peak) = a
        .abscissa
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .map(|(x, (u, v))| (*x, u - v))
        .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
        .unwrap();

    // comparison grid spans both sideband resonances
    let grid = linspace(-4.0, 4.0, 161);
    let noise = |seed| NoiseModel::new(200, seed).unwrap();
    let rd_a = rd_scan(&rho, &cavity, &grid, W, Some(&noise(31))).map_err(|e| e.to_string())?;
    let rd_b = rd_scan(&mimic, &cavity, &grid, W, Some(&noise(32))).map_err(|e| e.to_string())?;
    let rd_chi = compare_states(&rd_a, &rd_b)
        .map_err(|e| e.to_string())?
        .chi_square_per_dof;

    let phases = linspace(0.0, PI, 100);
    let hd_a = hd_scan(&rho, &phases, 1.0, Some(&noise(33))).map_err(|e| e.to_string())?;
    let hd_b = hd_scan(&mimic, &phases, 1.0, Some(&noise(34))).map_err(|e| e.to_string())?;
    let hd_chi = compare_states(&hd_a, &hd_b)
        .map_err(|e| e.to_string())?
        .chi_square_per_dof;

    let ok = (peak_at - W).abs() <= 0.3 && rd_chi > DISTINGUISHABLE_ABOVE && hd_chi < INDISTINGUISHABLE_BELOW;
    check(
        ok,
        format!(
            "difference extremum {peak:+.3} at delta = {peak_at:+.3} (target {W:+.3}); RD chi2/dof = {rd_chi:.2}; HD chi2/dof = {hd_chi:.2}"
        ),
    )
}

fn coefficient_model_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cavity = analysis_cavity();
    let grid = GridSpec::default_detuning().points::<f64>();
    let (mut worst_rms, mut worst_imb) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let s = common::random_state(&mut rng);
        let curve = rd_scan(&s, &cavity, &grid, W, None).map_err(|e| e.to_string())?;
        let fit = fit_rd_power_curve(&curve, &cavity, W).map_err(|e| e.to_string())?;
        let e = s.energy_summary();
        worst_rms = worst_rms.max(fit.residual_rms);
        worst_imb = worst_imb.max((fit.get("energy_imbalance").unwrap() - (e.e_upper - e.e_lower)).abs());
    }
    check(
        worst_rms < 1e-9 && worst_imb < 1e-8,
        format!("max residual_rms = {worst_rms:.2e}; max imbalance error = {worst_imb:.2e}"),
    )
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn full_reconstruction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cavity = analysis_cavity();
    let grid = GridSpec::default_detuning().points::<f64>();
    let opts = ReconstructOptions::default();
    let mut worst = 0.0f64;
    let mut min_rank = usize::MAX;
    for _ in 0..50 {
        let s = common::random_state(&mut rng);
        let locked = rd_locked_scan(&s, &cavity, &grid, W, None).map_err(|e| e.to_string())?;
        let res = reconstruct_covariance(&locked, &cavity, W, opts).map_err(|e| e.to_string())?;
        worst = worst.max((res.state.cov() - s.cov()).norm());
        min_rank = min_rank.min(res.report.design_rank);
    }

    let target = common::random_state(&mut rng);
    let sizes = [50usize, 200, 800, 3200];
    let replicas = 40;
    let mut errors = Vec::new();
    for &n in &sizes {
        let sq: f64 = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let noise = NoiseModel::new(n, (n * 1000 + r) as u64).unwrap();
                let locked = rd_locked_scan(&target, &cavity, &grid, W, Some(&noise)).unwrap();
                let res = reconstruct_covariance(&locked, &cavity, W, opts).unwrap();
                (res.state.cov() - target.cov()).norm_squared()
            })
            .sum();
        errors.push((sq / replicas as f64).sqrt());
    }
    let ns: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&ns, &errors);
    check(
        worst < 1e-8 && min_rank == 10 && (slope + 0.5).abs() <= 0.1,
        format!("max Frobenius error = {worst:.2e}; min rank = {min_rank}; noise slope = {slope:.3}"),
    )
}

fn identifiability_ladder() -> Outcome {
    let grids = IdentifiabilityGrids {
        phi: linspace(0.0, PI, 100),
        delta: GridSpec::default_detuning().points::<f64>(),
        omega_over_gamma: W,
    };
    let cavity = analysis_cavity();
    let report = |t| identifiability_report(t, &grids, &cavity).map_err(|e| e.to_string());
    let hd = report(Technique::Hd)?;
    let power = report(Technique::RdPower)?;
    let locked = report(Technique::RdLocked)?;
    let component = hd.null_component(&imbalance_direction());
    let ok = (hd.rank, power.rank, locked.rank) == (3, 4, 10)
        && hd.null_space.len() > power.null_space.len()
        && power.null_space.len() > locked.null_space.len()
        && component > 0.999;
    check(
        ok,
        format!(
            "ranks HD/RD-power/RD-locked = {}/{}/{}; null dims {}/{}/{}; imbalance component in HD null space = {component:.6}",
            hd.rank,
            power.rank,
            locked.rank,
            hd.null_space.len(),
            power.null_space.len(),
            locked.null_space.len()
        ),
    )
}

/// Largest `|empirical − closed form| / standard error` over the covariance
/// entries and the two single-mode isotropy conditions.
fn monte_carlo_z(kappa: f64, samples: usize, seed: u64) -> Result<f64, String> {
    let sd = (BETA0_SQ / 2.0).sqrt();
    let chunks = 64;
    let per_chunk = samples / chunks;
    let (sum, outer) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut sum = Vector4::<f64>::zeros();
            let mut outer = Matrix4::<f64>::zeros();
            for _ in 0..per_chunk {
                let re: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
                let im: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
                let psi2 = prepare_psi2(&PreparationParams {
                    beta: Complex::new(re, im),
                    kappa,
                    beta0_sq: BETA0_SQ,
                })
                .unwrap();
                let m = psi2.mean();
                sum += m;
                outer += m * m.transpose();
            }
            (sum, outer)
        })
        .reduce(|| (Vector4::zeros(), Matrix4::zeros()), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = (per_chunk * chunks) as f64;
    let mean = sum / n;
    let classical = (outer - mean * mean.transpose() * n) / (n - 1.0);

    let closed = prepare_rho(&PreparationParams {
        beta: Complex::new(0.0, 0.0),
        kappa,
        beta0_sq: BETA0_SQ,
    })
    .map_err(|e| e.to_string())?;
    let truth = closed.cov() - Matrix4::identity();
    let se = |i: usize, j: usize| ((truth[(i, i)] * truth[(j, j)] + truth[(i, j)].powi(2)) / n).sqrt();
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in i..4 {
            let s = se(i, j);
            if s > 0.0 {
                worst = worst.max((classical[(i, j)] - truth[(i, j)]).abs() / s);
            }
        }
    }
    for mode in ModeIndex::BOTH {
        let o = if mode == ModeIndex::Upper { 0 } else { 2 };
        let s = se(o, o);
        if s > 0.0 {
            worst = worst.max((classical[(o, o)] - classical[(o + 1, o + 1)]).abs() / (s * 2f64.sqrt()));
            worst = worst.max(classical[(o, o + 1)].abs() / se(o, o + 1));
        }
    }
    Ok(worst)
}

fn preparation_oracles() -> Outcome {
    let z_rho = monte_carlo_z(KAPPA, 1_000_000, 7)?;
    let z_ref = monte_carlo_z(1.0, 1_000_000, 8)?;
    let rho = prepare_rho(&benchmark_params()).map_err(|e| e.to_string())?;
    let rho_r = prepare_rho_r(BETA0_SQ).map_err(|e| e.to_string())?;
    let isotropic = [&rho, &rho_r].iter().all(|s| {
        ModeIndex::BOTH
            .iter()
            .all(|m| s.single_mode_marginal(*m).is_isotropic(1e-12))
    });
    let ratio = rho.energy_summary().ratio_lower_upper().unwrap_or(f64::NAN);
    check(
        z_rho < 3.0 && z_ref < 3.0 && isotropic && (ratio - 0.28).abs() < 0.005,
        format!(
            "max |z| rho = {z_rho:.2}, rho_r = {z_ref:.2}; marginals isotropic = {isotropic}; E_low/E_up = {ratio:.4}"
        ),
    )
}

/// prepare, scan, fit and compare; returns every emitted artifact.
fn end_to_end(seed: u64) -> Vec<String> {
    let cavity = analysis_cavity();
    let rho = prepare_rho(&benchmark_params()).unwrap();
    let mimic = canonical_hd_state(&rho.hd_coefficients()).unwrap();
    let grid = GridSpec::default_detuning().points::<f64>();
    let phases = linspace(0.0, PI, 100);
    let a = rd_scan(&rho, &cavity, &grid, W, Some(&NoiseModel::new(200, seed).unwrap())).unwrap();
    let b = rd_scan(
        &mimic,
        &cavity,
        &grid,
        W,
        Some(&NoiseModel::new(200, seed + 1).unwrap()),
    )
    .unwrap();
    let h = hd_scan(&rho, &phases, 1.0, Some(&NoiseModel::new(200, seed + 2).unwrap())).unwrap();
    let locked = rd_locked_scan(&rho, &cavity, &grid, W, Some(&NoiseModel::new(200, seed + 3).unwrap())).unwrap();
    let cmp = compare_states(&a, &b).unwrap();
    vec![
        to_json_string(&rho).unwrap(),
        scan_to_csv(&a).unwrap(),
        scan_to_csv(&b).unwrap(),
        scan_to_csv(&h).unwrap(),
        to_json_string(&locked).unwrap(),
        to_json_string(&fit_rd_power_curve(&a, &cavity, W).unwrap()).unwrap(),
        to_json_string(&fit_hd_curve(&h).unwrap()).unwrap(),
        to_json_string(&reconstruct_covariance(&locked, &cavity, W, ReconstructOptions::default()).unwrap()).unwrap(),
        format!("{} {:?}", cmp.chi_square, cmp.verdict),
    ]
}

fn determinism() -> Outcome {
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| end_to_end(2024))
    };
    let first = in_pool(1);
    let runs = [in_pool(1), in_pool(4), in_pool(8), end_to_end(2024)];
    let identical = runs.iter().all(|r| *r == first);
    let other_seed_differs = end_to_end(2025) != first;
    let bytes: usize = first.iter().map(String::len).sum();
    check(
        identical && other_seed_differs,
        format!(
            "{} artifacts, {bytes} bytes; identical across 1/4/8 threads = {identical}",
            first.len()
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Duration);
    let criteria: [Criterion; 8] = [
        ("SQL flatness", sql_flatness, Duration::from_secs(1)),
        ("HD blindness", hd_blindness, Duration::from_secs(1)),
        (
            "benchmark distinguishability",
            benchmark_distinguishability,
            Duration::from_secs(5),
        ),
        (
            "coefficient model consistency",
            coefficient_model_consistency,
            Duration::from_secs(60),
        ),
        ("full reconstruction", full_reconstruction, Duration::from_secs(60)),
        ("identifiability ladder", identifiability_ladder, Duration::from_secs(1)),
        ("preparation oracles", preparation_oracles, Duration::from_secs(30)),
        ("determinism", determinism, Duration::from_secs(60)),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= *budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; exceeded {budget:?}")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!(
            "acceptance {} {name}: {status} ({detail}; {:.2} s)",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
