use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hj_core::orchestrator::Solution;
use hj_core::scenario::Scenario;
use hj_core::verify::ConvergenceStudy;
use serde::Serialize;

use crate::{CliResult, Failure};

fn file_err(fp: Option<&str>, path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(fp, format!("{}: {e}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::new(None, e))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| file_err(None, dir, e))?;
    let path = dir.join(name);
    let text = to_json(value)? + "\n";
    fs::write(&path, text).map_err(|e| file_err(None, &path, e))
}

/// `snapshots.csv` (`t,x,u`, two rows at open jumps), one
/// `traces_jump_<j>.csv` (`t,left_trace,right_trace`) per jump, `report.json`.
pub fn write_run(dir: &Path, s: &Scenario, sol: &Solution) -> CliResult<()> {
    let fp = s.fingerprint();
    fs::create_dir_all(dir).map_err(|e| file_err(Some(fp), dir, e))?;

    let path = dir.join("snapshots.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| file_err(Some(fp), &path, e))?;
    w.write_record(["t", "x", "u"]).map_err(|e| file_err(Some(fp), &path, e))?;
    for r in &sol.records {
        for i in sol.window().filter(|&i| r.is_active(i)) {
            let x = sol.x(i);
            let (l, rv) = r.pair(i);
            w.serialize((r.t, x, l)).map_err(|e| file_err(Some(fp), &path, e))?;
            if r.is_open(i) {
                w.serialize((r.t, x, rv)).map_err(|e| file_err(Some(fp), &path, e))?;
            }
        }
    }
    w.flush().map_err(|e| file_err(Some(fp), &path, e))?;

    for (j, jump) in sol.jumps.iter().enumerate() {
        let path = dir.join(format!("traces_jump_{j}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| file_err(Some(fp), &path, e))?;
        w.write_record(["t", "left_trace", "right_trace"])
            .map_err(|e| file_err(Some(fp), &path, e))?;
        for p in &jump.series {
            w.serialize((p.t, p.left, p.right)).map_err(|e| file_err(Some(fp), &path, e))?;
        }
        w.flush().map_err(|e| file_err(Some(fp), &path, e))?;
    }

    write_json(dir, "report.json", &sol.report(s)).map_err(|e| Failure::new(Some(fp), e.message))
}

pub fn rate_table(study: &ConvergenceStudy) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "{:>12} {:>12} {:>12} {:>12} {:>12}", "h", "sup", "l1", "tau", "trace");
    for d in &study.distances {
        let _ = writeln!(
            t,
            "{:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            d.h, d.sup, d.l1, d.tau, d.trace
        );
    }
    let _ = writeln!(t, "{:>12} {:>12} {:>12} {:>12} {:>12}", "rate", "sup", "l1", "tau", "trace");
    for (k, m) in study.rates.iter().enumerate() {
        let _ = write!(t, "{k:>12}");
        for key in ["sup", "l1", "tau", "trace"] {
            match m[key] {
                r if r.is_finite() => write!(t, " {r:>12.3}"),
                _ => write!(t, " {:>12}", "-"),
            }
            .ok();
        }
        t.push('\n');
    }
    t
}
