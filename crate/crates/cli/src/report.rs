//! Report assembly and output files.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use errbound::Config;

use crate::analysis::{Outcome, Table};
use crate::spec::AnalysisSpec;

pub const REPORT_VERSION: u32 = 1;

pub struct ResultEntry {
    pub index: usize,
    pub analysis: AnalysisSpec,
    pub status: Outcome,
    pub output: Value,
    pub error: Option<String>,
}

/// Exit status of a run: analysis errors dominate, then failures, then
/// inconclusive results. Informational results are neutral.
pub fn exit_code(results: &[ResultEntry]) -> i32 {
    let has = |o: Outcome| results.iter().any(|r| r.status == o);
    if has(Outcome::Error) {
        3
    } else if has(Outcome::Fails) {
        1
    } else if has(Outcome::Inconclusive) {
        2
    } else {
        0
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Report<'a> {
    pub spec_bytes: &'a [u8],
    pub spec: Value,
    pub cfg: &'a Config,
    pub dim: usize,
    pub results: &'a [ResultEntry],
    pub tables: &'a [Table],
    pub wall_time_s: f64,
}

impl Report<'_> {
    pub fn to_json(&self) -> Value {
        let count = |o: Outcome| self.results.iter().filter(|r| r.status == o).count();
        let results: Vec<Value> = self
            .results
            .iter()
            .map(|r| {
                let mut v = json!({
                    "index": r.index,
                    "type": r.analysis.name(),
                    "parameters": serde_json::to_value(&r.analysis).unwrap_or(Value::Null),
                    "status": r.status,
                    "output": r.output,
                });
                if let Some(e) = &r.error {
                    v["error"] = json!(e);
                }
                v
            })
            .collect();
        json!({
            "report_version": REPORT_VERSION,
            "spec": { "sha256": sha256_hex(self.spec_bytes), "parsed": self.spec },
            "environment": {
                "seed": self.cfg.seed,
                "grid": self.cfg.grid,
                "resolution": self.cfg.resolution(self.dim),
                "tol": self.cfg.tol,
                "norm": self.cfg.norm,
                "crate_version": env!("CARGO_PKG_VERSION"),
                "wall_time_s": self.wall_time_s,
            },
            "results": results,
            "summary": {
                "holds": count(Outcome::Holds),
                "fails": count(Outcome::Fails),
                "inconclusive": count(Outcome::Inconclusive),
                "info": count(Outcome::Info),
                "error": count(Outcome::Error),
            },
            "exit_code": exit_code(self.results),
            "plots": self.tables,
        })
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_json(dir: &Path, report: &Report) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(&report.to_json()).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(dir.join("report.json"), text)
}

/// `results.csv` with one row per analysis and one file per table.
pub fn write_csv(dir: &Path, report: &Report) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut out = String::from("index,type,status,error\n");
    for r in report.results {
        let status = serde_json::to_value(r.status).unwrap_or(Value::Null);
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.index,
            r.analysis.name(),
            status.as_str().unwrap_or(""),
            csv_field(r.error.as_deref().unwrap_or(""))
        ));
    }
    fs::write(dir.join("results.csv"), out)?;
    for t in report.tables {
        fs::write(dir.join(format!("{}.csv", t.name)), &t.csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(status: Outcome) -> ResultEntry {
        ResultEntry { index: 0, analysis: AnalysisSpec::SipSolve, status, output: Value::Null, error: None }
    }

    #[test]
    fn exit_code_precedence() {
        assert_eq!(exit_code(&[entry(Outcome::Info)]), 0);
        assert_eq!(exit_code(&[entry(Outcome::Holds), entry(Outcome::Inconclusive)]), 2);
        assert_eq!(exit_code(&[entry(Outcome::Holds), entry(Outcome::Info)]), 0);
        assert_eq!(exit_code(&[entry(Outcome::Fails), entry(Outcome::Inconclusive)]), 1);
        assert_eq!(exit_code(&[entry(Outcome::Fails), entry(Outcome::Error)]), 3);
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn csv_fields_are_quoted() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
