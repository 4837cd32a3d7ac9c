use std::fs;
use std::path::{Path, PathBuf};

use eprsim::analysis::{
    analyze_run, fit_efficiencies, AnalysisReport, ComboLabel, FitResult, Observation, ObservedQuadrature, R0Mode,
};
use eprsim::config::RunConfig;
use eprsim::io::{write_frames, FrameFile};
use eprsim::lock::LockResult;
use eprsim::predict::{predict as predict_levels, sweep_gain as sweep_levels, Prediction, SweepRow};
use eprsim::spectral::{ExperimentParams, Quadrature};
use eprsim::synth::{shot_source, signal_source, FrameSource};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{emit, ensure_dir, export_frame_csv, to_json, write_curves};
use crate::{Common, SHOT_FILE, SIGNAL_P_FILE, SIGNAL_X_FILE};

const DEFAULT_OUT: &str = "eprsim-out";

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::reference(),
    };
    if let Some(seed) = common.seed {
        cfg.acquisition.seed = seed;
    }
    Ok(cfg)
}

/// `--out`, then the configured directory.
fn out_dir(common: &Common, cfg: &RunConfig) -> Option<PathBuf> {
    common.out.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
}

fn required_out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    out_dir(common, cfg).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[derive(Serialize)]
struct LockSummary<'a> {
    total_rms_rad: f64,
    loop_rms_rad: &'a [f64],
}

impl<'a> From<&'a LockResult> for LockSummary<'a> {
    fn from(r: &'a LockResult) -> Self {
        Self {
            total_rms_rad: r.total_rms_rad,
            loop_rms_rad: &r.loop_rms_rad,
        }
    }
}

#[derive(Serialize)]
struct PredictOutput<'a> {
    params: &'a ExperimentParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    lock: Option<LockSummary<'a>>,
    prediction: &'a Prediction,
}

pub fn predict(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let (params, lock) = cfg.resolve()?;
    let prediction = predict_levels(&params, &cfg.acquisition, &cfg.analysis_options()?)?;
    let out = PredictOutput {
        params: &params,
        lock: lock.as_ref().map(LockSummary::from),
        prediction: &prediction,
    };
    emit(out_dir(common, &cfg).as_deref(), "prediction.json", &to_json("prediction", &out, common.reproducible)?)?;
    Ok(())
}

pub fn simulate(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let (params, lock) = cfg.resolve()?;
    let dir = required_out_dir(common, &cfg);
    ensure_dir(&dir)?;
    let acq = &cfg.acquisition;
    let x = signal_source(&params, Quadrature::X, acq)?;
    let p = signal_source(&params, Quadrature::P, acq)?;
    let shot = shot_source(&params, Quadrature::X, acq)?;
    write_frames(&dir.join(SIGNAL_X_FILE), &x)?;
    write_frames(&dir.join(SIGNAL_P_FILE), &p)?;
    write_frames(&dir.join(SHOT_FILE), &shot)?;
    fs::write(dir.join("run_config.json"), cfg.to_json()? + "\n")?;
    if let Some(lock) = &lock {
        fs::write(dir.join("lock.json"), to_json("lock", lock, common.reproducible)?)?;
    }
    if cfg.output.csv {
        let csv_dir = dir.join("csv");
        ensure_dir(&csv_dir)?;
        let n = cfg.output.csv_frames.min(acq.n_frames);
        for i in 0..n {
            export_frame_csv(&x, i, &csv_dir.join(format!("signal_x_{i:04}.csv")))?;
            export_frame_csv(&p, i, &csv_dir.join(format!("signal_p_{i:04}.csv")))?;
            export_frame_csv(&shot, i, &csv_dir.join(format!("shot_{i:04}.csv")))?;
        }
    }
    println!("wrote {} frames x {} points to {}", acq.n_frames, acq.n_points, dir.display());
    Ok(())
}

fn write_report_curves(dir: &Path, report: &AnalysisReport) -> CliResult<()> {
    let mut curves: Vec<(&str, &eprsim::analysis::AutoCorrelation)> =
        report.combos.iter().map(|c| (c.label.as_str(), &c.autocorrelation)).collect();
    curves.push(("shot", &report.shot_autocorrelation));
    write_curves(&dir.join("autocorrelation.csv"), &curves)
}

fn analyze_sources<A, B, C>(cfg: &RunConfig, x: &A, p: &B, shot: &C) -> CliResult<AnalysisReport>
where
    A: FrameSource,
    B: FrameSource,
    C: FrameSource,
{
    let mut opts = cfg.analysis_options()?;
    // sample the mode on the grid the frames were recorded on
    opts.mode = Some(cfg.mode.sample(shot.meta().fs_hz)?);
    let mut report = analyze_run(x, p, shot, &opts)?;
    report.mode = Some(cfg.mode.clone());
    Ok(report)
}

pub fn analyze(common: &Common, frames: &Path) -> CliResult<()> {
    let cfg = load_config(common)?;
    let open = |name: &str| FrameFile::open(&frames.join(name));
    let (x, p, shot) = (open(SIGNAL_X_FILE)?, open(SIGNAL_P_FILE)?, open(SHOT_FILE)?);
    let report = analyze_sources(&cfg, &x, &p, &shot)?;
    let dir = required_out_dir(common, &cfg);
    ensure_dir(&dir)?;
    fs::write(dir.join("report.json"), to_json("analysis", &report, common.reproducible)?)?;
    write_report_curves(&dir, &report)?;
    print_summary(&report, None);
    Ok(())
}

fn sweep_csv(rows: &[SweepRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "gain_db",
        "eta_meas",
        "eta_total",
        "x_minus_db",
        "x_plus_db",
        "p_plus_db",
        "p_minus_db",
        "x_minus_pointwise_db",
        "x_plus_pointwise_db",
        "p_plus_pointwise_db",
        "p_minus_pointwise_db",
    ])?;
    for r in rows {
        let mut rec = vec![r.gain_db.to_string(), r.eta_meas.to_string(), r.eta_total.to_string()];
        rec.extend(r.low_frequency_db.iter().map(|v| v.to_string()));
        rec.extend(r.pointwise_db.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

fn check_gains(gains: &[f64]) -> CliResult<()> {
    if gains.is_empty() {
        return Err(CliError::config("empty gain list"));
    }
    if let Some(g) = gains.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
        return Err(CliError::config(format!("gain {g} dB is not a finite non-negative value")));
    }
    Ok(())
}

pub fn sweep_gain(common: &Common, gains: &[f64]) -> CliResult<()> {
    check_gains(gains)?;
    let cfg = load_config(common)?;
    let (params, _) = cfg.resolve()?;
    let rows = sweep_levels(&params, gains, &cfg.acquisition)?;
    emit(out_dir(common, &cfg).as_deref(), "sweep.csv", &sweep_csv(&rows)?)?;
    Ok(())
}

pub struct FitArgs {
    pub common: Common,
    pub observations: PathBuf,
    pub r0: Option<String>,
}

fn parse_quadrature(s: &str) -> CliResult<ObservedQuadrature> {
    match s.trim() {
        "" | "squeezed" => Ok(ObservedQuadrature::Squeezed),
        "anti_squeezed" | "anti-squeezed" => Ok(ObservedQuadrature::AntiSqueezed),
        other => Err(CliError::config(format!("unknown quadrature '{other}'"))),
    }
}

/// Read observations from CSV; see the `fit` subcommand help for columns.
pub fn read_observations(path: &Path) -> CliResult<Vec<Observation>> {
    let file = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (gain_col, gain_in_db) = match (col("gain_db"), col("gain")) {
        (Some(c), _) => (c, true),
        (None, Some(c)) => (c, false),
        _ => return Err(CliError::config("observations need a 'gain_db' or 'gain' column")),
    };
    let level_col = col("db")
        .or_else(|| col("x_minus_db"))
        .ok_or_else(|| CliError::config("observations need a 'db' or 'x_minus_db' column"))?;
    let quad_col = col("quadrature");
    let anti_col = col("x_plus_db");
    let num = |rec: &csv::StringRecord, c: usize, line: usize| -> CliResult<f64> {
        rec.get(c)
            .unwrap_or("")
            .parse::<f64>()
            .map_err(|_| CliError::config(format!("row {line}: '{}' is not a number", rec.get(c).unwrap_or(""))))
    };
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let g = num(&rec, gain_col, line)?;
        let gain = if gain_in_db { 10f64.powf(g / 10.0) } else { g };
        let quadrature = match quad_col {
            Some(c) => parse_quadrature(rec.get(c).unwrap_or(""))?,
            None => ObservedQuadrature::Squeezed,
        };
        out.push(Observation {
            gain,
            db: num(&rec, level_col, line)?,
            quadrature,
        });
        if let Some(c) = anti_col {
            out.push(Observation::anti_squeezed(gain, num(&rec, c, line)?));
        }
    }
    if out.is_empty() {
        return Err(CliError::config("observation file has no rows"));
    }
    Ok(out)
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let observations = read_observations(&args.observations)?;
    let mode = match args.r0.as_deref() {
        Some("free") => R0Mode::Free,
        Some(v) => R0Mode::Fixed(
            v.parse()
                .map_err(|_| CliError::config(format!("--r0 expects a number or 'free', got '{v}'")))?,
        ),
        None if args.common.config.is_some() => R0Mode::Fixed(load_config(&args.common)?.resolve()?.0.r0),
        None => R0Mode::Free,
    };
    let result = fit_efficiencies(&observations, mode)?;
    let dir = args.common.out.as_deref();
    emit(dir, "fit.json", &to_json("fit", &result, args.common.reproducible)?)?;
    Ok(())
}

#[derive(Serialize)]
struct FullReport<'a> {
    config: &'a RunConfig,
    params: &'a ExperimentParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    lock: Option<LockSummary<'a>>,
    prediction: &'a Prediction,
    analysis: &'a AnalysisReport,
}

/// Default gain grid for the efficiency fit in `report`.
fn report_gains() -> Vec<f64> {
    (0..=15).map(|k| 2.0 * k as f64).collect()
}

fn fit_from_sweep(params: &ExperimentParams, cfg: &RunConfig) -> CliResult<FitResult> {
    let rows = sweep_levels(params, &report_gains(), &cfg.acquisition)?;
    let obs: Vec<Observation> = rows
        .iter()
        .map(|r| Observation::squeezed(10f64.powf(r.gain_db / 10.0), r.low_frequency_db[0]))
        .collect();
    Ok(fit_efficiencies(&obs, R0Mode::Fixed(params.r0))?)
}

pub fn report(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let (params, lock) = cfg.resolve()?;
    let acq = &cfg.acquisition;
    let prediction = predict_levels(&params, acq, &cfg.analysis_options()?)?;
    let x = signal_source(&params, Quadrature::X, acq)?;
    let p = signal_source(&params, Quadrature::P, acq)?;
    let shot = shot_source(&params, Quadrature::X, acq)?;
    let mut analysis = analyze_sources(&cfg, &x, &p, &shot)?;
    analysis.fit = Some(fit_from_sweep(&params, &cfg)?);

    let dir = required_out_dir(common, &cfg);
    ensure_dir(&dir)?;
    let full = FullReport {
        config: &cfg,
        params: &params,
        lock: lock.as_ref().map(LockSummary::from),
        prediction: &prediction,
        analysis: &analysis,
    };
    fs::write(dir.join("report.json"), to_json("report", &full, common.reproducible)?)?;
    write_report_curves(&dir, &analysis)?;
    print_summary(&analysis, Some(&prediction));
    Ok(())
}

fn print_summary(report: &AnalysisReport, prediction: Option<&Prediction>) {
    println!("{:<8} {:>10} {:>10} {:>10} {:>10}", "combo", "tau0_db", "band_db", "wave_db", "fwhm_ps");
    for label in [ComboLabel::XMinus, ComboLabel::PPlus, ComboLabel::XPlus, ComboLabel::PMinus] {
        let Some(c) = report.combo(label) else { continue };
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<8} {:>10.3} {:>10} {:>10} {:>10}",
            label.as_str(),
            c.noise_power_db,
            opt(c.band_db),
            opt(c.wavepacket_db),
            opt(c.correlation_width_s.map(|w| w * 1e12)),
        );
        if let Some(pc) = prediction.and_then(|p| p.combo(label)) {
            println!(
                "{:<8} {:>10.3} {:>10} {:>10} {:>10}",
                "  model",
                pc.pointwise_db,
                opt(pc.band_db),
                opt(pc.wavepacket_db),
                opt(pc.correlation_width_s.map(|w| w * 1e12)),
            );
        }
    }
    println!(
        "duan {:.4} +/- {:.4} ({})",
        report.duan.value,
        report.duan.standard_error,
        if report.duan.entangled { "inseparable" } else { "not shown inseparable" }
    );
    if let Some(f) = &report.fit {
        println!("fit eta_pre {:.4} eta_post {:.4} rms residual {:.2e} dB", f.eta_pre, f.eta_post, f.residual);
    }
}
