//! CSV and text outputs of a closed-loop run.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::bench::{median, BenchRow};
use crate::harness::sim::SimLog;

/// 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let wrap = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Column sums of timing.csv.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimingSummary {
    pub steps: usize,
    pub shooting_ms: f64,
    pub condensing_ms: f64,
    pub qp_ms: f64,
    pub total_ms: f64,
    pub qp_iters: usize,
}

pub fn timing_summary(log: &SimLog) -> TimingSummary {
    let mut s = TimingSummary {
        steps: log.samples.len(),
        ..TimingSummary::default()
    };
    for r in &log.samples {
        s.shooting_ms += ms(r.timings.shooting);
        s.condensing_ms += ms(r.timings.condensing);
        s.qp_ms += ms(r.timings.qp);
        s.total_ms += ms(r.timings.total());
        s.qp_iters += r.qp_iterations;
    }
    s
}

/// Console summary of a run: timing sums, medians and maxima, KKT median and flags.
pub fn summary_text(log: &SimLog) -> String {
    let s = timing_summary(log);
    let stat = |f: &dyn Fn(&crate::harness::sim::SampleRecord) -> f64| {
        let mut v: Vec<f64> = log.samples.iter().map(f).collect();
        let max = v.iter().copied().fold(f64::NAN, f64::max);
        (median(&mut v), max)
    };
    let (cond_med, cond_max) = stat(&|r| ms(r.timings.condensing));
    let (tot_med, tot_max) = stat(&|r| ms(r.timings.total()));
    let (kkt_med, kkt_max) = stat(&|r| r.kkt.total);
    let flagged = log.flagged_samples().count();
    let mut out = format!(
        "scheme {}: {} steps\n\
         sum [ms]: shooting {:.6} condensing {:.6} qp {:.6} total {:.6}; qp iterations {}\n\
         condensing [ms]: median {:.6} max {:.6}\n\
         total [ms]: median {:.6} max {:.6}\n\
         kkt: median {:.3e} max {:.3e}\n\
         flagged samples: {}\n",
        log.scheme,
        s.steps,
        s.shooting_ms,
        s.condensing_ms,
        s.qp_ms,
        s.total_ms,
        s.qp_iters,
        cond_med,
        cond_max,
        tot_med,
        tot_max,
        kkt_med,
        kkt_max,
        flagged
    );
    if let Some(reason) = &log.aborted {
        out.push_str(&format!("aborted: {reason}\n"));
    }
    out
}

/// Writes traj.csv, kkt.csv, timing.csv and meta.txt into `dir`.
pub fn write_outputs(log: &SimLog, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let nx = log.samples.first().map_or(4, |s| s.x.len());
    let nu = log.samples.first().map_or(1, |s| s.u.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..nx).map(|i| format!("x{i}")));
    header.extend((0..nu).map(|i| format!("u{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        &dir.join("traj.csv"),
        &header_refs,
        log.samples.iter().map(|s| {
            std::iter::once(s.t)
                .chain(s.x.iter().copied())
                .chain(s.u.iter().copied())
                .map(fmt_num)
                .collect()
        }),
    )?;

    write_rows(
        &dir.join("kkt.csv"),
        &["t", "stationarity", "eq", "ineq", "total"],
        log.samples.iter().map(|s| {
            [s.t, s.kkt.stationarity, s.kkt.eq_residual, s.kkt.ineq_violation, s.kkt.total]
                .into_iter()
                .map(fmt_num)
                .collect()
        }),
    )?;

    write_rows(
        &dir.join("timing.csv"),
        &["step", "shooting_ms", "condensing_ms", "qp_ms", "total_ms", "qp_iters"],
        log.samples.iter().enumerate().map(|(i, s)| {
            let t = &s.timings;
            let mut row = vec![i.to_string()];
            row.extend([ms(t.shooting), ms(t.condensing), ms(t.qp), ms(t.total())].into_iter().map(fmt_num));
            row.push(s.qp_iterations.to_string());
            row
        }),
    )?;

    let mut meta = format!("moveblock {}\nscheme {}\nsamples {}\n", log.version, log.scheme, log.samples.len());
    if let Some(reason) = &log.aborted {
        meta.push_str(&format!("aborted {reason}\n"));
    }
    for (i, s) in log.flagged_samples() {
        meta.push_str(&format!(
            "flagged step {i}: qp {:?}, bound violation {}\n",
            s.qp_status, s.bound_violation
        ));
    }
    meta.push_str("\n[config]\n");
    meta.push_str(&log.config_echo);
    let path = dir.join("meta.txt");
    fs::write(&path, meta).map_err(|e| Error::io(&path, e))
}

/// Writes the benchmark table as scaling.csv.
pub fn write_bench(rows: &[BenchRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows(
        &dir.join("scaling.csv"),
        &[
            "N",
            "M",
            "tailored_ms",
            "naive_ms",
            "tailored_mults",
            "naive_mults",
            "predicted_mults",
        ],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.m.to_string(),
                fmt_num(r.tailored_s * 1e3),
                fmt_num(r.naive_s * 1e3),
                r.tailored_multiplies.to_string(),
                r.naive_multiplies.to_string(),
                r.predicted_multiplies.to_string(),
            ]
        }),
    )
}
