//! CSV and table output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use masi_model::{Attention, History};

use crate::error::{EvalError, Result};
use crate::harness::DomainShiftReport;
use crate::score::EvalReport;

/// Everything one run can emit.
#[derive(Debug, Clone, Default)]
pub struct RunResults {
    pub reports: Vec<EvalReport>,
    pub domain_shift: Vec<DomainShiftReport>,
    /// Training histories keyed by a file-name-safe run name.
    pub histories: Vec<(String, History)>,
    /// Attention weights per sample keyed by run name.
    pub attention: Vec<(String, Vec<Attention>)>,
}

impl RunResults {
    pub fn is_empty(&self) -> bool {
        self.reports.is_empty() && self.domain_shift.is_empty() && self.histories.is_empty() && self.attention.is_empty()
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let data = |e: csv::Error| EvalError::Data(e.to_string());
    w.write_record(header).map_err(data)?;
    for r in rows {
        w.write_record(&r).map_err(data)?;
    }
    w.into_inner().map_err(|e| EvalError::Data(e.to_string()))
}

pub fn report_csv(reports: &[EvalReport]) -> Result<String> {
    let rows = reports.iter().map(|r| {
        vec![
            r.framework.label().to_string(),
            format!("{}", r.horizon_s),
            format!("{}", r.radius),
            format!("{}", r.mu),
            format!("{}", r.sigma),
            format!("{}", r.baseline_mu),
            r.n_samples.to_string(),
        ]
    });
    let b = csv_bytes(&["framework", "horizon_s", "radius_m", "mu", "sigma", "baseline_mu", "n_samples"], rows)?;
    Ok(String::from_utf8(b).expect("ASCII output"))
}

pub fn domain_shift_csv(reports: &[DomainShiftReport]) -> Result<String> {
    let rows = reports.iter().map(|r| {
        vec![
            r.framework.label().to_string(),
            format!("{}", r.source.horizon_s),
            format!("{}", r.source.radius),
            format!("{}", r.source.mu),
            format!("{}", r.source.sigma),
            format!("{}", r.target.mu),
            format!("{}", r.target.sigma),
            r.source.n_samples.to_string(),
            r.target.n_samples.to_string(),
        ]
    });
    let b = csv_bytes(
        &["framework", "horizon_s", "radius_m", "mu_10", "sigma_10", "mu_100", "sigma_100", "n_10", "n_100"],
        rows,
    )?;
    Ok(String::from_utf8(b).expect("ASCII output"))
}

/// Fixed-width table of report rows.
pub fn report_table(reports: &[EvalReport]) -> String {
    let mut s = format!(
        "{:<9} {:>9} {:>8} {:>8} {:>8} {:>11} {:>9}\n",
        "framework", "horizon_s", "radius_m", "mu", "sigma", "baseline_mu", "n_samples"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<9} {:>9.1} {:>8.1} {:>8.4} {:>8.4} {:>11.4} {:>9}",
            r.framework.label(),
            r.horizon_s,
            r.radius,
            r.mu,
            r.sigma,
            r.baseline_mu,
            r.n_samples
        );
    }
    s
}

pub fn domain_shift_table(reports: &[DomainShiftReport]) -> String {
    let mut s = format!(
        "{:<9} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "framework", "horizon_s", "radius_m", "mu_10", "sigma_10", "mu_100", "sigma_100"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<9} {:>9.1} {:>8.1} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.framework.label(),
            r.source.horizon_s,
            r.source.radius,
            r.source.mu,
            r.source.sigma,
            r.target.mu,
            r.target.sigma
        );
    }
    s
}

/// Two CSV documents: input attention (`sample,step,w0..`) and temporal
/// attention (`sample,step,w0..`). Every row sums to one.
pub fn attention_csv(attention: &[Attention]) -> Result<(String, String)> {
    let doc = |pick: fn(&Attention) -> &Vec<Vec<f64>>| -> Result<String> {
        let width = attention.first().and_then(|a| pick(a).first()).map_or(0, Vec::len);
        let mut header = vec!["sample".to_string(), "step".to_string()];
        header.extend((0..width).map(|i| format!("w{i}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = attention.iter().enumerate().flat_map(|(i, a)| {
            pick(a).iter().enumerate().map(move |(t, row)| {
                let mut r = vec![i.to_string(), t.to_string()];
                r.extend(row.iter().map(|w| format!("{w}")));
                r
            })
        });
        Ok(String::from_utf8(csv_bytes(&header_refs, rows)?).expect("ASCII output"))
    };
    Ok((doc(|a| &a.input)?, doc(|a| &a.temporal)?))
}

fn write(dir: &Path, name: &str, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| EvalError::Data(format!("cannot write {}: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

/// Writes every non-empty part of `results` into `out_dir` and returns the
/// written paths.
pub fn emit_reports(results: &RunResults, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(EvalError::usage("nothing to emit"));
    }
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| EvalError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    if !results.reports.is_empty() {
        write(dir, "report.csv", &report_csv(&results.reports)?, &mut written)?;
    }
    if !results.domain_shift.is_empty() {
        write(dir, "domain_shift.csv", &domain_shift_csv(&results.domain_shift)?, &mut written)?;
    }
    for (name, h) in &results.histories {
        write(dir, &format!("history_{name}.csv"), &h.to_csv(), &mut written)?;
    }
    for (name, a) in &results.attention {
        let (input, temporal) = attention_csv(a)?;
        write(dir, &format!("attention_input_{name}.csv"), &input, &mut written)?;
        write(dir, &format!("attention_temporal_{name}.csv"), &temporal, &mut written)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::ReportFramework;

    fn report(f: ReportFramework) -> EvalReport {
        EvalReport {
            framework: f,
            horizon_s: 3.2,
            radius: 1.2,
            mu: 0.464,
            sigma: 0.22,
            baseline_mu: 0.5,
            n_samples: 40,
        }
    }

    #[test]
    fn one_row_per_report() {
        let reports: Vec<EvalReport> = ReportFramework::ALL.iter().map(|&f| report(f)).collect();
        let csv = report_csv(&reports).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "framework,horizon_s,radius_m,mu,sigma,baseline_mu,n_samples");
        assert_eq!(lines[3], "\"F^ts,1\",3.2,1.2,0.464,0.22,0.5,40");
        assert_eq!(report_table(&reports).lines().count(), 5);
    }

    #[test]
    fn emit_writes_files_and_rejects_empty_results() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_reports(&RunResults::default(), dir.path()), Err(EvalError::Usage(_))));
        let results = RunResults {
            reports: vec![report(ReportFramework::Qtc4)],
            attention: vec![(
                "qtc4".into(),
                vec![Attention {
                    input: vec![vec![0.25, 0.75]],
                    temporal: vec![vec![0.5, 0.5], vec![1.0, 0.0]],
                }],
            )],
            ..RunResults::default()
        };
        let files = emit_reports(&results, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let temporal = std::fs::read_to_string(dir.path().join("attention_temporal_qtc4.csv")).unwrap();
        assert_eq!(temporal, "sample,step,w0,w1\n0,0,0.5,0.5\n0,1,1,0\n");
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        assert!(matches!(emit_reports(&results, blocker.join("sub")), Err(EvalError::Data(_))));
    }
}
