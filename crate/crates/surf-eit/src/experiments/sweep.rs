//! Stability sweeps: the full boundary-to-dilatation pipeline per ε, the
//! log-log regressions and the plot data.

use std::fs::{self, File};
use std::io::{BufWriter, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::{ExperimentConfig, SweepConfig, Tolerances};
use super::model::Model;
use super::runs::write_json;
use crate::argument_principle::{induced_embedding, reconstruct_surface, EmbeddingSpec, ReconstructedSurface};
use crate::boundary_calculus::DNMatrix;
use crate::correspondence::{
    descend_to_base, lower_bound_check, nearest_point_map, semi_geodesic_coords, sup_log_k, SemiGeodesicChart, StabilityReport,
};
use crate::error::{Result, SurfError};
use crate::forward_models::{dn_fem, perturb_metric, PerturbationMode, PerturbationSpec};
use crate::trace_equations::{default_trials, null_space, AdmissibleMapHandle, NullSpaceBasis, NullSpaceConfig, TransferConfig};

/// Least-squares fit of log y = a log x + b.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence half-width of the slope; `None` with two points.
    pub half_width: Option<f64>,
    pub points: usize,
}

/// Fits over the pairs with x, y > 0; needs two distinct abscissae.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let half_width = (n > 2).then(|| {
        let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let se = (sse / (nf - 2.0) / sxx).sqrt();
        let q = StudentsT::new(0.0, 1.0, nf - 2.0).map(|t| t.inverse_cdf(0.975)).unwrap_or(1.96);
        q * se
    });
    Some(SlopeFit { slope, intercept, half_width, points: n })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub report: Option<StabilityReport>,
    pub error: Option<String>,
    /// t ≥ noise floor; only these rows enter the fits.
    pub above_floor: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub family: String,
    pub mode: PerturbationMode,
    pub h: f64,
    pub kmax: usize,
    /// Codimension of the null set; 0 makes the transfer map the identity.
    pub codim: usize,
    pub tolerances: Tolerances,
    pub mesh_error: Option<f64>,
    /// d_op of the largest conformal perturbation, a pure discretization effect.
    pub null_level: f64,
    pub noise_floor: f64,
    /// The pipeline run with Λ' = Λ.
    pub null_run: Option<StabilityReport>,
    pub rows: Vec<SweepRow>,
    pub dt_fit: Option<SlopeFit>,
    pub dh_fit: Option<SlopeFit>,
    pub transfer_fit: Option<SlopeFit>,
    /// max/min of the lower-bound constant over the rows.
    pub lower_bound_spread: Option<f64>,
    pub transfer_monotone: bool,
    pub verdicts: Vec<Verdict>,
}

impl SweepResult {
    pub fn failed_fraction(&self) -> f64 {
        self.rows.iter().filter(|r| r.report.is_none()).count() as f64 / self.rows.len().max(1) as f64
    }

    /// At most the configured fraction of rows failed.
    pub fn within_failure_budget(&self) -> bool {
        self.failed_fraction() <= self.tolerances.max_failed_fraction
    }

    pub fn reports(&self) -> impl Iterator<Item = &StabilityReport> {
        self.rows.iter().filter_map(|r| r.report.as_ref())
    }
}

/// Unperturbed data shared by every row.
struct Baseline {
    model: Model,
    spec: EmbeddingSpec,
    handle: AdmissibleMapHandle,
    basis: NullSpaceBasis,
    surface: ReconstructedSurface,
    chart: SemiGeodesicChart,
}

impl Baseline {
    fn new(cfg: &ExperimentConfig) -> Result<Baseline> {
        let model = Model::build(cfg)?;
        model.mesh()?;
        let spec = model.embedding(cfg.tolerances.tol_null)?;
        let handle = AdmissibleMapHandle::new(model.lambda.clone(), model.orientable);
        let basis = null_space(&handle, None, &NullSpaceConfig { seed: cfg.seed, tol_null: cfg.tolerances.tol_null, ..NullSpaceConfig::for_handle(&handle) })?;
        let surface = reconstruct_surface(&spec, &cfg.reconstruct_config())?;
        let chart = semi_geodesic_coords(&surface, &cfg.geodesic_config())?;
        Ok(Baseline { model, spec, handle, basis, surface, chart })
    }

    /// Compares the baseline with Λ' (`None` for Λ' = Λ).
    fn row(&self, cfg: &ExperimentConfig, epsilon: f64, perturbed: Option<(&DNMatrix, f64)>) -> Result<StabilityReport> {
        let tol = &cfg.tolerances;
        let lambda = &self.model.lambda;
        let (lambda_new, log_k_true) = perturbed.unwrap_or((lambda, 0.0));
        let t = lambda_new.d_op(lambda, self.model.kmax)?;
        let transfer = TransferConfig { tol_null: tol.tol_null, ..TransferConfig::default() };
        let induced = induced_embedding(lambda, lambda_new, &self.spec, &self.handle, &self.basis, &transfer)?;
        let rebuilt;
        let (surface, chart) = if perturbed.is_some() {
            let s = reconstruct_surface(&induced.spec, &cfg.reconstruct_config())?;
            let c = semi_geodesic_coords(&s, &cfg.geodesic_config())?;
            rebuilt = (s, c);
            (&rebuilt.0, &rebuilt.1)
        } else {
            (&self.surface, &self.chart)
        };
        let map = nearest_point_map(&self.surface, &self.chart, surface, chart, &cfg.map_config())?;
        let log_k = sup_log_k(&map)?;
        let mut stages = vec![
            ("map_failed".to_string(), map.failed as f64),
            ("far_apart".to_string(), if map.far_apart { 1.0 } else { 0.0 }),
            ("boundary_residual".to_string(), map.boundary_residual(surface, chart)),
            ("mirror_defect".to_string(), surface.mirror_defect),
            ("quadrature_error".to_string(), surface.quadrature_error.iter().copied().fold(0.0, f64::max)),
            ("chart_orthogonality".to_string(), chart.orthogonality),
        ];
        let equivariance = if self.spec.symmetric {
            let base = descend_to_base(&map, tol.tol_equivariance)?;
            stages.push(("base_sup_log_k".into(), base.base_sup_log_k));
            stages.push(("pair_mismatch".into(), base.pair_mismatch));
            Some(base.equivariance)
        } else {
            None
        };
        let lower = lower_bound_check(lambda, lambda_new, log_k_true, &default_trials(lambda))?;
        Ok(StabilityReport {
            epsilon,
            t,
            d_h: map.d_h,
            sup_log_k: log_k,
            dt_estimate: 0.5 * log_k,
            dt_unsquared: 0.25 * log_k,
            log_k_true: Some(log_k_true),
            excluded_fraction: map.excluded_fraction(),
            trace_closeness: induced.closeness,
            transfer_c4: induced.real_shift_c4.iter().copied().fold(0.0, f64::max),
            lower_bound_constant: lower.constant,
            equivariance,
            stages,
        })
    }
}

fn perturbed_map(model: &Model, sweep: &SweepConfig, mode: PerturbationMode, epsilon: f64) -> Result<(DNMatrix, f64)> {
    let mesh = perturb_metric(model.mesh()?, &PerturbationSpec { epsilon, mode, profile: sweep.profile.clone(), preserve_boundary: true })?;
    Ok((dn_fem(&mesh, model.kmax)?, mesh.ground_truth_log_k))
}

fn verdict(name: &str, value: Option<f64>, threshold: f64, pass: bool) -> Verdict {
    Verdict { name: name.into(), value, threshold, pass }
}

/// Runs the sweep and writes `sweep.csv`, `sweep.json`, `sweep.dat` and
/// `sweep.gp` to the output directory. Row failures are recorded, not
/// raised; see [`SweepResult::within_failure_budget`].
pub fn run_stability_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| SurfError::Config("missing [sweep] table".into()))?;
    let tol = &cfg.tolerances;
    let base = Baseline::new(cfg)?;
    let eps_max = *sweep.epsilons.last().expect("validated non-empty");
    let (conformal, _) = perturbed_map(&base.model, sweep, PerturbationMode::Conformal, eps_max)?;
    let null_level = conformal.d_op(&base.model.lambda, base.model.kmax)?;
    let noise_floor = tol.noise_factor * null_level;
    let null_run = base.row(cfg, 0.0, None).ok();

    let outcomes = crate::par::map_slice(&sweep.epsilons, |&eps| -> Result<StabilityReport> {
        let (l2, log_k_true) = perturbed_map(&base.model, sweep, sweep.mode, eps)?;
        base.row(cfg, eps, Some((&l2, log_k_true)))
    });
    let rows: Vec<SweepRow> = sweep
        .epsilons
        .iter()
        .zip(outcomes)
        .map(|(&epsilon, r)| match r {
            Ok(rep) => SweepRow { epsilon, above_floor: rep.t >= noise_floor, report: Some(rep), error: None },
            Err(e) => SweepRow { epsilon, report: None, error: Some(e.to_string()), above_floor: false },
        })
        .collect();

    let fitted: Vec<&StabilityReport> = rows.iter().filter(|r| r.above_floor).filter_map(|r| r.report.as_ref()).collect();
    let ts: Vec<f64> = fitted.iter().map(|r| r.t).collect();
    let dt_fit = fit_loglog(&ts, &fitted.iter().map(|r| r.dt_estimate).collect::<Vec<_>>());
    let dh_fit = fit_loglog(&ts, &fitted.iter().map(|r| r.d_h).collect::<Vec<_>>());
    let transfer_fit = fit_loglog(&ts, &fitted.iter().map(|r| r.transfer_c4).collect::<Vec<_>>());
    let constants: Vec<f64> = rows.iter().filter_map(|r| r.report.as_ref()?.lower_bound_constant).filter(|c| *c > 0.0).collect();
    let lower_bound_spread = (!constants.is_empty()).then(|| constants.iter().copied().fold(0.0, f64::max) / constants.iter().copied().fold(f64::INFINITY, f64::min));
    let c4: Vec<f64> = rows.iter().filter_map(|r| r.report.as_ref().map(|r| r.transfer_c4)).collect();
    let transfer_monotone = c4.windows(2).all(|w| w[1] > w[0]);

    let mut verdicts = Vec::new();
    if let Some(n) = &null_run {
        verdicts.push(verdict("null_sup_log_k", Some(n.sup_log_k), tol.null_log_k, n.sup_log_k <= tol.null_log_k));
        verdicts.push(verdict("null_d_h", Some(n.d_h), tol.null_d_h, n.d_h <= tol.null_d_h));
    } else {
        verdicts.push(verdict("null_sup_log_k", None, tol.null_log_k, false));
    }
    match sweep.mode {
        PerturbationMode::Conformal => {
            let worst = rows.iter().filter_map(|r| r.report.as_ref()).map(|r| r.sup_log_k).fold(0.0, f64::max);
            verdicts.push(verdict("conformal_sup_log_k", Some(worst), tol.null_log_k, worst <= tol.null_log_k));
        }
        PerturbationMode::Shear => {
            let slope = |f: &Option<SlopeFit>| f.as_ref().map(|f| f.slope);
            let ok = |f: &Option<SlopeFit>| slope(f).is_some_and(|s| s >= tol.min_slope);
            verdicts.push(verdict("dt_slope", slope(&dt_fit), tol.min_slope, ok(&dt_fit)));
            verdicts.push(verdict("dh_slope", slope(&dh_fit), tol.min_slope, ok(&dh_fit)));
            if base.basis.codim() == 0 {
                let worst = c4.iter().copied().fold(0.0, f64::max);
                verdicts.push(verdict("transfer_identity", Some(worst), 0.0, !c4.is_empty() && worst == 0.0));
            } else {
                verdicts.push(verdict("transfer_slope", slope(&transfer_fit), tol.min_slope, ok(&transfer_fit) && transfer_monotone));
            }
            verdicts.push(verdict(
                "lower_bound_spread",
                lower_bound_spread,
                tol.lower_bound_spread,
                lower_bound_spread.is_some_and(|s| s <= tol.lower_bound_spread),
            ));
        }
    }
    let failed = rows.iter().filter(|r| r.report.is_none()).count() as f64 / rows.len() as f64;
    verdicts.push(verdict("failed_fraction", Some(failed), tol.max_failed_fraction, failed <= tol.max_failed_fraction));

    let result = SweepResult {
        family: base.model.family.name().into(),
        mode: sweep.mode,
        h: cfg.surface.h,
        kmax: base.model.kmax,
        codim: base.basis.codim(),
        tolerances: tol.clone(),
        mesh_error: base.model.mesh_error,
        null_level,
        noise_floor,
        null_run,
        rows,
        dt_fit,
        dh_fit,
        transfer_fit,
        lower_bound_spread,
        transfer_monotone,
        verdicts,
    };
    write_outputs(cfg, &result)?;
    Ok(result)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

const EXTRA_HEADER: [&str; 15] = [
    "dT_unsquared",
    "trace_closeness",
    "transfer_c4",
    "lower_bound_constant",
    "equivariance",
    "above_floor",
    "status",
    "error",
    "h",
    "kmax",
    "tol_null",
    "tol_sym",
    "tol_equivariance",
    "null_log_k",
    "noise_floor",
];

/// One CSV row per ε; every row repeats the tolerances it was judged by.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let io = |e: csv::Error| SurfError::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = StabilityReport::CSV_HEADER.iter().chain(EXTRA_HEADER.iter()).copied().collect();
    w.write_record(&header).map_err(io)?;
    let tol = &result.tolerances;
    for row in &result.rows {
        let mut rec: Vec<String> = match &row.report {
            Some(r) => r.csv_row().to_vec(),
            None => {
                let mut v = vec![String::new(); StabilityReport::CSV_HEADER.len()];
                v[0] = format!("{:e}", row.epsilon);
                v
            }
        };
        let r = row.report.as_ref();
        rec.extend([
            opt(r.map(|r| r.dt_unsquared)),
            opt(r.map(|r| r.trace_closeness)),
            opt(r.map(|r| r.transfer_c4)),
            opt(r.and_then(|r| r.lower_bound_constant)),
            opt(r.and_then(|r| r.equivariance)),
            row.above_floor.to_string(),
            if r.is_some() { "ok".into() } else { "failed".into() },
            row.error.clone().unwrap_or_default(),
            format!("{:e}", result.h),
            result.kmax.to_string(),
            format!("{:e}", tol.tol_null),
            format!("{:e}", tol.tol_sym),
            format!("{:e}", tol.tol_equivariance),
            format!("{:e}", tol.null_log_k),
            format!("{:e}", result.noise_floor),
        ]);
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated columns for gnuplot: t, d_T estimate, d_H,
/// transfer C⁴ shift, true log K, above-floor flag.
pub fn write_plot_data<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    writeln!(out, "# t dT_estimate d_H transfer_c4 logK_true above_floor")?;
    for row in &result.rows {
        if let Some(r) = &row.report {
            writeln!(out, "{:e} {:e} {:e} {:e} {:e} {}", r.t, r.dt_estimate, r.d_h, r.transfer_c4, r.log_k_true.unwrap_or(0.0), u8::from(row.above_floor))?;
        }
    }
    Ok(())
}

/// Gnuplot script plotting `sweep.dat` with the fitted power laws.
pub fn plot_script(result: &SweepResult) -> String {
    let law = |name: &str, f: &Option<SlopeFit>| match f {
        Some(f) => format!("{name}(x) = exp({:e}) * x**{:e}\n", f.intercept, f.slope),
        None => format!("{name}(x) = NaN\n"),
    };
    let mut s = String::new();
    s.push_str("set terminal pngcairo size 900,600\nset output 'sweep.png'\nset logscale xy\n");
    s.push_str("set xlabel 't = d_op(Λ, Λ′)'\nset key left top\n");
    s.push_str(&law("dt", &result.dt_fit));
    s.push_str(&law("dh", &result.dh_fit));
    s.push_str(&law("c4", &result.transfer_fit));
    s.push_str(&format!("set arrow from {:e}, graph 0 to {:e}, graph 1 nohead dashtype 2\n", result.noise_floor.max(f64::MIN_POSITIVE), result.noise_floor.max(f64::MIN_POSITIVE)));
    s.push_str(
        "plot 'sweep.dat' using 1:2 with points pt 7 title 'd_T estimate', dt(x) title 'fit', \\\n     \
         'sweep.dat' using 1:3 with points pt 5 title 'd_H', dh(x) title 'fit', \\\n     \
         'sweep.dat' using 1:4 with points pt 9 title 'transfer C^4', c4(x) title 'fit'\n",
    );
    s
}

fn write_outputs(cfg: &ExperimentConfig, result: &SweepResult) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    write_sweep_csv(result, BufWriter::new(File::create(cfg.out.join("sweep.csv"))?))?;
    write_plot_data(result, BufWriter::new(File::create(cfg.out.join("sweep.dat"))?))?;
    fs::write(cfg.out.join("sweep.gp"), plot_script(result))?;
    write_json(&cfg.out, "sweep.json", result)
}
