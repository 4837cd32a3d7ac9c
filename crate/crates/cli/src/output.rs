use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use eprsim::analysis::AutoCorrelation;
use eprsim::synth::FrameSource;
use serde::Serialize;

use crate::error::CliResult;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_unix_s: Option<u64>,
    kind: &'static str,
    result: &'a T,
}

pub fn to_json<T: Serialize>(kind: &'static str, value: &T, reproducible: bool) -> CliResult<String> {
    let generated_unix_s = if reproducible {
        None
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    };
    let env = Envelope {
        tool: "eprsim",
        version: env!("CARGO_PKG_VERSION"),
        generated_unix_s,
        kind,
        result: value,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Write `text` to `dir/name`, or to stdout when `dir` is `None`.
pub fn emit(dir: Option<&Path>, name: &str, text: &str) -> CliResult<Option<PathBuf>> {
    match dir {
        Some(d) => {
            ensure_dir(d)?;
            let path = d.join(name);
            fs::write(&path, text)?;
            Ok(Some(path))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(None)
        }
    }
}

/// One column per curve, sharing the lag grid of the first.
pub fn write_curves(path: &Path, curves: &[(&str, &AutoCorrelation)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["lag_s".to_string()];
    header.extend(curves.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    let n = curves.iter().map(|(_, c)| c.values.len()).min().unwrap_or(0);
    for k in 0..n {
        let mut row = vec![format!("{:e}", curves[0].1.lags_s[k])];
        row.extend(curves.iter().map(|(_, c)| format!("{}", c.values[k])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Export one frame as `t_s,ch1,ch2`.
pub fn export_frame_csv<S: FrameSource>(source: &S, frame: usize, path: &Path) -> CliResult<()> {
    let fs = source.meta().fs_hz;
    let rows = source.with_frame(frame, |a, b| {
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(t, (x, y))| [format!("{:e}", t as f64 / fs), x.to_string(), y.to_string()])
            .collect::<Vec<_>>()
    })?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t_s", "ch1", "ch2"])?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}
