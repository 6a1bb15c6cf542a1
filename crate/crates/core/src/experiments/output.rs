use std::io::Write;

use super::ResultRecord;
use crate::error::Result;

pub const CSV_HEADER: &str = "scenario,p,d,c_A,sigma_A_kind,sigma_B_kind,replicate,seed,method,component,statistic,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn write<W: Write>(&self, records: &[ResultRecord], out: W) -> Result<()> {
        match self {
            OutputFormat::Csv => write_csv(records, out),
            OutputFormat::Jsonl => write_jsonl(records, out),
        }
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv<W: Write>(records: &[ResultRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let value = r.value.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            field(&r.scenario),
            r.p,
            r.d,
            r.c_a,
            field(&r.sigma_a_kind),
            field(&r.sigma_b_kind),
            r.replicate,
            r.seed,
            field(&r.method),
            field(&r.component),
            field(&r.statistic),
            value
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(records: &[ResultRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
