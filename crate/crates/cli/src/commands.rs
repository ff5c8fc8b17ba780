use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nvsvi_core::inference::log_grid;
use nvsvi_core::spin::{interference, phase_grid};
use nvsvi_core::{
    f_closed_form, f_quadrature, fit_phase, limit_at, simulate_readout, time_domain_phase,
    transfer_factor, CouplingHypothesis, PhaseDatum, SystematicEntry,
};

use crate::config::{ExperimentConfig, Reference, Variant};
use crate::error::CliError;
use crate::output::{num, Table};

const PER_UM: f64 = 1e6;

pub struct Common {
    pub config: ExperimentConfig,
    pub out: Option<PathBuf>,
    pub method: Option<String>,
}

impl Common {
    fn method<'a>(&'a self, allowed: &[&'a str], default: &'a str) -> Result<&'a str, CliError> {
        match self.method.as_deref() {
            None => Ok(default),
            Some(m) if allowed.contains(&m) => Ok(m),
            Some(m) => Err(CliError::Config(format!(
                "--method: unknown method {m:?}, expected one of {}",
                allowed.join(", ")
            ))),
        }
    }

    fn table(&self, command: &str, header: Vec<&'static str>) -> Table {
        Table::new(command, &self.config.digest(), header)
    }
}

pub struct FieldArgs {
    pub d_min_um: f64,
    pub d_max_um: f64,
    pub n_points: usize,
}

pub fn field(common: &Common, args: &FieldArgs) -> Result<Table, CliError> {
    common.method(&["quadrature"], "quadrature")?;
    let cfg = &common.config;
    let geometry = cfg.geometry()?;
    let tol = cfg.analysis.quad_tol;
    if !(args.d_min_um > 0.0 && args.d_max_um >= args.d_min_um) {
        return Err(CliError::Config(
            "--d-min-um/--d-max-um: need 0 < min ≤ max".into(),
        ));
    }
    let distances = match args.n_points {
        0 => return Err(CliError::Config("--n-points: must be at least 1".into())),
        1 => vec![args.d_min_um / PER_UM],
        n if args.d_max_um == args.d_min_um => vec![args.d_min_um / PER_UM; n],
        n => log_grid(args.d_min_um / PER_UM, args.d_max_um / PER_UM, n)?,
    };

    let mut table = common.table(
        "field",
        vec![
            "lambda_m",
            "d_m",
            "f_closed_per_m",
            "f_quad_per_m",
            "f_quad_err_per_m",
            "rel_diff",
        ],
    );
    for lambda in cfg.lambdas()? {
        for &d in &distances {
            let quad = f_quadrature(lambda, &geometry, d, tol)?;
            let (closed, rel) = if geometry.is_half_sphere_on_axis() {
                let c = f_closed_form(lambda, &geometry, d)?;
                let rel = if c == 0.0 {
                    (quad.value - c).abs()
                } else {
                    (quad.value - c).abs() / c.abs()
                };
                (num(c), num(rel))
            } else {
                ("NA".into(), "NA".into())
            };
            table.push(vec![
                num(lambda),
                num(d),
                closed,
                num(quad.value),
                num(quad.error),
                rel,
            ]);
        }
    }
    Ok(table)
}

pub fn phase(common: &Common) -> Result<Table, CliError> {
    let method = common.method(&["analytic", "timedomain"], "analytic")?;
    let cfg = &common.config;
    let experiment = cfg.experiment()?;
    let g = cfg.hypothesis.g;
    let variant = match cfg.sensor.variant {
        Variant::Plus => "plus",
        Variant::Minus => "minus",
    };

    let mut table = common.table(
        "phase",
        vec![
            "lambda_m",
            "g",
            "variant",
            "method",
            "phi_rad",
            "transfer_factor_rad",
        ],
    );
    for lambda in cfg.lambdas()? {
        let hyp = CouplingHypothesis::new(lambda, g)?;
        let phi = match method {
            "analytic" => experiment.phase(&hyp)?,
            _ => {
                time_domain_phase(
                    &hyp,
                    &experiment.geometry,
                    &experiment.vibration,
                    experiment.theta,
                    &experiment.sequence,
                    &experiment.constants,
                    cfg.analysis.time_steps,
                    cfg.analysis.quad_tol,
                )?
                .phi
            }
        };
        let k = transfer_factor(lambda, &experiment)?;
        table.push(vec![
            num(lambda),
            num(g),
            variant.into(),
            method.into(),
            num(phi),
            num(k),
        ]);
    }
    Ok(table)
}

pub fn read_dataset(path: &Path) -> Result<Vec<PhaseDatum>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: missing column {name:?}", path.display())))
    };
    let (c_phi, c_i, c_s) = (column("phi_mw_rad")?, column("I")?, column("sigma_I")?);

    let mut data = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::io(path, e))?;
        let field = |c: usize, name: &str| -> Result<f64, CliError> {
            let raw = record.get(c).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Config(format!(
                    "{}: data row {}: {name} = {raw:?} is not a finite number",
                    path.display(),
                    row + 1
                ))),
            }
        };
        data.push(PhaseDatum {
            phi_mw: field(c_phi, "phi_mw_rad")?,
            interference: field(c_i, "I")?,
            sigma: field(c_s, "sigma_I")?,
        });
    }
    if data.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(data)
}

pub fn fit(common: &Common, data_path: &Path) -> Result<Table, CliError> {
    common.method(&["linear"], "linear")?;
    let data = read_dataset(data_path)?;
    let est = fit_phase(&data)?;
    let mut table = common.table("fit", vec!["phi_central_rad", "sigma_stat_rad", "n_points"]);
    table.push(vec![
        num(est.phi_central),
        num(est.sigma_stat),
        data.len().to_string(),
    ]);
    Ok(table)
}

/// Applies a `--method` override of the budget reference phase.
pub fn apply_reference_method(
    config: &mut ExperimentConfig,
    method: Option<&str>,
) -> Result<(), CliError> {
    config.analysis.budget_reference = match method {
        None => return Ok(()),
        Some("bound") => Reference::Bound,
        Some("central") => Reference::Central,
        Some(m) => {
            return Err(CliError::Config(format!(
                "--method: unknown method {m:?}, expected one of bound, central"
            )))
        }
    };
    Ok(())
}

pub fn budget(common: &Common) -> Result<Table, CliError> {
    let cfg = &common.config;
    let analysis = cfg.analysis()?;
    let mut table = common.table(
        "budget",
        vec![
            "lambda_m", "source", "assumed", "measured", "sigma", "delta_g", "sigma_g",
        ],
    );
    for lambda in cfg.lambdas()? {
        let report = limit_at(lambda, &analysis)?;
        table.note(format!(
            "lambda_m={} transfer_factor_rad={} reference_phase_rad={} g_limit={}",
            num(lambda),
            num(report.transfer_factor),
            num(report.budget.reference_phase),
            num(report.point.g_limit)
        ));
        for SystematicEntry { source, correction } in &report.budget.entries {
            table.push(vec![
                num(lambda),
                source.kind.name().into(),
                num(source.assumed),
                num(source.measured),
                num(source.sigma),
                num(correction.central),
                num(correction.sigma),
            ]);
        }
        let total = report.budget.total;
        table.push(vec![
            num(lambda),
            "total".into(),
            "NA".into(),
            "NA".into(),
            "NA".into(),
            num(total.central),
            num(total.sigma),
        ]);
    }
    Ok(table)
}

pub struct CurveArgs {
    pub lambda_min_um: f64,
    pub lambda_max_um: f64,
    pub n_points: usize,
}

pub fn curve(common: &Common, args: &CurveArgs) -> Result<Table, CliError> {
    let cfg = &common.config;
    let analysis = cfg.analysis()?;
    let (lo, hi) = (args.lambda_min_um / PER_UM, args.lambda_max_um / PER_UM);
    if !(0.1e-6..=10e-3).contains(&lo) || !(0.1e-6..=10e-3).contains(&hi) || lo >= hi {
        return Err(CliError::Config(
            "--lambda-min-um/--lambda-max-um: need 0.1 ≤ min < max ≤ 10000".into(),
        ));
    }
    if args.n_points < 2 {
        return Err(CliError::Config("--n-points: must be at least 2".into()));
    }
    let lambdas = log_grid(lo, hi, args.n_points)?;
    let points = nvsvi_core::exclusion_curve(&lambdas, &analysis)?;
    let mut table = common.table("curve", vec!["lambda_m", "m_b_eV", "g_limit"]);
    table.note(format!("cl={}", analysis.cl));
    for p in points {
        table.push(vec![num(p.lambda), num(p.mass_ev), num(p.g_limit)]);
    }
    Ok(table)
}

pub struct SimulateArgs {
    pub phi_rad: Option<f64>,
}

/// Synthetic interference scan at a known anomalous phase.
pub fn simulate(common: &Common, args: &SimulateArgs) -> Result<Table, CliError> {
    common.method(&["binomial"], "binomial")?;
    let cfg = &common.config;
    let s = &cfg.sensor;
    let phi = args.phi_rad.unwrap_or(cfg.analysis.phi_central_rad);
    if !phi.is_finite() {
        return Err(CliError::Config("--phi-rad: must be finite".into()));
    }
    let per_point = s.shots / s.phase_points as u64;
    if per_point == 0 {
        return Err(CliError::config(
            "sensor.shots",
            "fewer shots than phase points",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.analysis.seed);
    let mut table = common.table("simulate", vec!["phi_mw_rad", "I", "sigma_I"]);
    table.note(format!(
        "phi_true_rad={} shots_per_point={per_point}",
        num(phi)
    ));
    for phi_mw in phase_grid(s.phase_points) {
        let r = simulate_readout(interference(phi, phi_mw), per_point, s.contrast, &mut rng)?;
        table.push(vec![num(phi_mw), num(r.interference), num(r.std_error)]);
    }
    Ok(table)
}
