use std::fmt;
use std::path::Path;

use serde::Serialize;
use sideband_core::io::{from_json_str, scan_from_csv, scan_from_json, scan_to_csv, to_json_string};
use sideband_core::preparation::prepare_psi2;
use sideband_core::{
    canonical_hd_state, compare_states, fit_rd_power_curve, hd_scan, linspace, prepare_psi1, prepare_rho,
    prepare_rho_r, rd_locked_scan, rd_scan, reconstruct_covariance, Curve, Error, Locked, ModeIndex, NoiseModel,
    PreparationParams, ReconstructOptions, ScanKind, State,
};

use crate::config::{RunConfig, Stage};
use crate::output::{fnv1a, write_atomic};
use crate::{FitModel, ScanTechnique, WignerMode};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Input(String),
    Numerical(String),
    Output(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Output(_) => 1,
            Failure::Config(_) => 2,
            Failure::Input(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    /// Classifies an error raised while computing from already-loaded inputs.
    fn compute(e: Error) -> Self {
        match e {
            e if e.is_numerical() => Failure::Numerical(e.to_string()),
            Error::InvalidParameter(m) => Failure::Config(m),
            e => Failure::Input(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration: {m}"),
            Failure::Input(m) => write!(f, "input: {m}"),
            Failure::Numerical(m) => write!(f, "numerical: {m}"),
            Failure::Output(m) => write!(f, "output: {m}"),
        }
    }
}

pub struct Context {
    pub config: RunConfig,
    pub quiet: bool,
}

impl Context {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = write_atomic(&self.config.output_dir, name, contents)
            .map_err(|e| Failure::Output(format!("{}: {e}", self.config.output_dir.join(name).display())))?;
        self.say(format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<(), Failure> {
        let text = to_json_string(value).map_err(|e| Failure::Output(e.to_string()))?;
        self.write(name, &text)
    }

    /// Noise model for the artifact `stem`; streams differ between stems.
    fn noise_for(&self, stem: &str) -> Result<Option<NoiseModel>, Failure> {
        match (self.config.noise.samples_per_point, self.config.noise.seed) {
            (Some(n), Some(seed)) => NoiseModel::new(n, seed ^ fnv1a(stem))
                .map(Some)
                .map_err(|e| Failure::Config(e.to_string())),
            (Some(_), None) => Err(Failure::Config("noise.seed is required for noisy scans".into())),
            _ => Ok(None),
        }
    }

    fn cavity(&self) -> Result<sideband_core::Cavity, Failure> {
        self.config
            .analysis_cavity()
            .map_err(|e| Failure::Config(e.to_string()))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_state(path: &Path) -> Result<State, Failure> {
    from_json_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_curve(path: &Path) -> Result<Curve, Failure> {
    let text = read(path)?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => scan_from_json(&text),
        _ => scan_from_csv(&text),
    };
    parsed.map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn prepared_state(config: &RunConfig) -> sideband_core::Result<State> {
    let p = &config.preparation;
    let params = PreparationParams {
        beta: nalgebra::Complex::new(p.beta_re, p.beta_im),
        kappa: p.kappa,
        beta0_sq: p.beta0_sq,
    };
    params.validate()?;
    match p.stage {
        Stage::Vacuum => Ok(State::vacuum()),
        Stage::Psi1 => Ok(prepare_psi1(params.beta)),
        Stage::Psi2 => prepare_psi2(&params),
        Stage::Rho => prepare_rho(&params),
        Stage::RhoR => prepare_rho_r(p.beta0_sq),
        Stage::Mimic => canonical_hd_state(&prepare_rho(&params)?.hd_coefficients()),
    }
}

#[derive(Serialize)]
struct EnergySidecar {
    experiment: String,
    stage: Stage,
    e_upper: f64,
    e_lower: f64,
    sum: f64,
    imbalance: f64,
    ratio_lower_upper: Option<f64>,
    purity: f64,
}

pub fn prepare(ctx: &Context, name: &str) -> Result<(), Failure> {
    let state = prepared_state(&ctx.config).map_err(Failure::compute)?;
    let e = state.energy_summary();
    let purity = state.purity().map_err(Failure::compute)?;
    let sidecar = EnergySidecar {
        experiment: ctx.config.experiment.clone(),
        stage: ctx.config.preparation.stage.clone(),
        e_upper: e.e_upper,
        e_lower: e.e_lower,
        sum: e.sum,
        imbalance: e.imbalance,
        ratio_lower_upper: e.ratio_lower_upper(),
        purity,
    };
    ctx.write_json(&format!("{name}.json"), &state)?;
    ctx.write_json(&format!("{name}_energy.json"), &sidecar)?;
    ctx.say(format!(
        "E_upper = {:.6}  E_lower = {:.6}  imbalance = {:.6}  purity = {:.6}",
        e.e_upper, e.e_lower, e.imbalance, purity
    ));
    if let Some(r) = e.ratio_lower_upper() {
        ctx.say(format!("E_lower / E_upper = {r:.4}"));
    }
    Ok(())
}

#[derive(Serialize)]
struct ScanSummary {
    experiment: String,
    technique: &'static str,
    kind: &'static str,
    points: usize,
    dropped_points: usize,
    sql_reference: f64,
    omega_over_gamma: Option<f64>,
    visibility: Option<f64>,
    samples_per_point: Option<usize>,
    seed: Option<u64>,
    min_value: f64,
    max_value: f64,
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn scan(ctx: &Context, technique: ScanTechnique, state_path: &Path, name: Option<&str>) -> Result<(), Failure> {
    let state = load_state(state_path)?;
    let cfg = &ctx.config;
    let w = cfg.omega_over_gamma();
    let (label, default_stem) = match technique {
        ScanTechnique::Hd => ("hd", "hd"),
        ScanTechnique::Rd => ("rd", "rd"),
        ScanTechnique::RdLocked => ("rd-locked", "rd_locked"),
    };
    let stem = name.unwrap_or(default_stem);
    let noise = ctx.noise_for(stem)?;
    let mut summary = ScanSummary {
        experiment: cfg.experiment.clone(),
        technique: label,
        kind: ScanKind::ResonatorDetuning.as_str(),
        points: 0,
        dropped_points: 0,
        sql_reference: 1.0,
        omega_over_gamma: Some(w),
        visibility: None,
        samples_per_point: noise.map(|n| n.samples_per_point),
        seed: noise.map(|n| n.seed),
        min_value: 0.0,
        max_value: 0.0,
    };
    match technique {
        ScanTechnique::Hd | ScanTechnique::Rd => {
            let (curve, requested) = if technique == ScanTechnique::Hd {
                let grid = cfg.phase_grid.points::<f64>();
                summary.kind = ScanKind::HomodynePhase.as_str();
                summary.omega_over_gamma = None;
                summary.visibility = Some(cfg.visibility);
                (hd_scan(&state, &grid, cfg.visibility, noise.as_ref()), grid.len())
            } else {
                let grid = cfg.detuning_grid.points::<f64>();
                (rd_scan(&state, &ctx.cavity()?, &grid, w, noise.as_ref()), grid.len())
            };
            let curve = curve.map_err(Failure::compute)?;
            summary.points = curve.len();
            summary.dropped_points = requested - curve.len();
            (summary.min_value, summary.max_value) = extent(curve.values.iter().copied());
            ctx.write(
                &format!("{stem}.csv"),
                &scan_to_csv(&curve).map_err(|e| Failure::Output(e.to_string()))?,
            )?;
        }
        ScanTechnique::RdLocked => {
            let grid = cfg.detuning_grid.points::<f64>();
            let locked = rd_locked_scan(&state, &ctx.cavity()?, &grid, w, noise.as_ref()).map_err(Failure::compute)?;
            summary.points = locked.points.len();
            summary.dropped_points = grid.len() - locked.points.len();
            (summary.min_value, summary.max_value) = extent(locked.points.iter().map(|p| p.moments.noise_power()));
            ctx.write_json(&format!("{stem}.json"), &locked)?;
        }
    }
    ctx.write_json(&format!("{stem}_summary.json"), &summary)?;
    ctx.say(format!(
        "{label}: {} points ({} dropped), noise power {:.4} .. {:.4} SQL",
        summary.points, summary.dropped_points, summary.min_value, summary.max_value
    ));
    Ok(())
}

pub fn fit(ctx: &Context, model: FitModel, curve_path: &Path, name: Option<&str>) -> Result<(), Failure> {
    let curve = load_curve(curve_path)?;
    let (expected, stem) = match model {
        FitModel::Hd => (ScanKind::HomodynePhase, name.unwrap_or("fit_hd")),
        FitModel::RdPower => (ScanKind::ResonatorDetuning, name.unwrap_or("fit_rd_power")),
    };
    if curve.kind != expected {
        return Err(Failure::Input(format!(
            "{}: expected a {} curve, found {}",
            curve_path.display(),
            expected.as_str(),
            curve.kind.as_str()
        )));
    }
    let report = match model {
        FitModel::Hd => sideband_core::reconstruct::fit_hd_curve_with_visibility(&curve, ctx.config.visibility),
        FitModel::RdPower => fit_rd_power_curve(&curve, &ctx.cavity()?, ctx.config.omega_over_gamma()),
    }
    .map_err(Failure::compute)?;
    ctx.write_json(&format!("{stem}.json"), &report)?;
    for c in &report.coefficients {
        ctx.say(format!(
            "{:>18} = {:+.6e} +/- {:.2e}",
            c.name,
            c.value,
            report.std_error(&c.name).unwrap_or(f64::NAN)
        ));
    }
    ctx.say(format!(
        "residual_rms = {:.3e}  rank = {}  condition = {:.3e}",
        report.residual_rms, report.design_rank, report.condition_number
    ));
    if report.is_ill_conditioned() {
        eprintln!(
            "warning: condition number {:.3e} exceeds {:.0e}; coefficients are poorly determined",
            report.condition_number,
            sideband_core::reconstruct::CONDITION_WARNING
        );
    }
    Ok(())
}

pub fn reconstruct(ctx: &Context, locked_path: &Path, project: bool, name: &str) -> Result<(), Failure> {
    let locked: Locked =
        from_json_str(&read(locked_path)?).map_err(|e| Failure::Input(format!("{}: {e}", locked_path.display())))?;
    let result = reconstruct_covariance(
        &locked,
        &ctx.cavity()?,
        ctx.config.omega_over_gamma(),
        ReconstructOptions {
            project_physical: project,
        },
    )
    .map_err(Failure::compute)?;
    ctx.write_json(&format!("{name}.json"), &result)?;
    let e = &result.energies;
    ctx.say(format!(
        "rank = {}  condition = {:.3e}  residual_rms = {:.3e}",
        result.report.design_rank, result.report.condition_number, result.report.residual_rms
    ));
    ctx.say(format!(
        "E_upper = {:.6}  E_lower = {:.6}  imbalance = {:.6}",
        e.e_upper, e.e_lower, e.imbalance
    ));
    match result.purity {
        Some(p) => ctx.say(format!("purity = {p:.6}")),
        None => ctx.say("purity undefined: estimated covariance is not positive definite"),
    }
    let check = result.state.physicality_check();
    if !check.passed {
        eprintln!(
            "warning: reconstructed state is not physical (margin {:.3e}); rerun with --project",
            check.margin
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ComparisonDoc {
    chi_square: f64,
    dof: usize,
    chi_square_per_dof: f64,
    verdict: sideband_core::Verdict,
}

pub fn compare(ctx: &Context, a: &Path, b: &Path, name: &str) -> Result<(), Failure> {
    let (ca, cb) = (load_curve(a)?, load_curve(b)?);
    let cmp = compare_states(&ca, &cb).map_err(|e| match e {
        Error::Mismatch(m) => Failure::Input(m),
        e => Failure::compute(e),
    })?;
    let doc = ComparisonDoc {
        chi_square: cmp.chi_square,
        dof: cmp.dof,
        chi_square_per_dof: cmp.chi_square_per_dof,
        verdict: cmp.verdict,
    };
    ctx.write_json(&format!("{name}.json"), &doc)?;
    ctx.say(format!(
        "chi2/dof = {:.4} over {} points: {}",
        cmp.chi_square_per_dof,
        cmp.dof,
        format!("{:?}", doc.verdict).to_lowercase()
    ));
    Ok(())
}

pub fn wigner(
    ctx: &Context,
    state_path: &Path,
    mode: WignerMode,
    span: Option<f64>,
    count: usize,
    name: &str,
) -> Result<(), Failure> {
    let state = load_state(state_path)?.in_sideband();
    if count < 2 {
        return Err(Failure::Config(format!("--count must be >= 2, got {count}")));
    }
    let modes: &[ModeIndex] = match mode {
        WignerMode::Upper => &[ModeIndex::Upper],
        WignerMode::Lower => &[ModeIndex::Lower],
        WignerMode::Both => &ModeIndex::BOTH,
    };
    let marginals: Vec<_> = modes.iter().map(|m| state.single_mode_marginal(*m)).collect();
    let half = match span {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Failure::Config(format!("--span must be > 0, got {s}"))),
        None => marginals
            .iter()
            .map(|m| {
                let width = m.cov[(0, 0)].max(m.cov[(1, 1)]).sqrt();
                4.0 * width + m.mean.amax()
            })
            .fold(0.0, f64::max),
    };
    let axis = linspace(-half, half, count);
    let mut csv = String::from("mode,p,q,w\n");
    for m in &marginals {
        let field = m.wigner_eval(&axis, &axis).map_err(Failure::compute)?;
        let label = match m.mode {
            ModeIndex::Upper => "upper",
            ModeIndex::Lower => "lower",
        };
        for (i, p) in field.p_axis.iter().enumerate() {
            for (j, q) in field.q_axis.iter().enumerate() {
                csv.push_str(&format!("{label},{p},{q},{}\n", field.values[(i, j)]));
            }
        }
        ctx.say(format!(
            "{label}: var_p = {:.4}  var_q = {:.4}  cov_pq = {:.2e}  isotropic = {}",
            m.cov[(0, 0)],
            m.cov[(1, 1)],
            m.cov[(0, 1)],
            m.is_isotropic(1e-9 * (1.0 + m.cov.amax()))
        ));
    }
    ctx.write(&format!("{name}.csv"), &csv)
}
