//! Plain-text dataset and mean-squares files.
//!
//! Dataset: one header line `sire,dam,individual,trait_1,…,trait_p`, then one
//! row per observation with 1-based indices (dam within sire, individual
//! within dam). Rows may come in any order but every cell of the balanced
//! layout must appear exactly once.
//!
//! Mean squares: a `design,I,J,K,p` line followed by `A,…`, `B,…` and `E,…`
//! lines, each holding the `p × p` matrix in row-major order.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{DesignSpec, PhenotypeDataset};
use crate::stats::MeanSquares;

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn write_dataset<W: Write>(data: &PhenotypeDataset, mut out: W) -> Result<()> {
    let d = &data.design;
    let header: Vec<String> = (1..=d.traits()).map(|t| format!("trait_{t}")).collect();
    writeln!(out, "sire,dam,individual,{}", header.join(","))?;
    for i in 0..d.sires() {
        for j in 0..d.dams_per_sire() {
            for k in 0..d.offspring_per_dam() {
                write!(out, "{},{},{}", i + 1, j + 1, k + 1)?;
                for v in data.observation(i, j, k).iter() {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Read a dataset; the layout is inferred from the largest indices. The
/// intercept is unknown from data alone and is set to zero.
pub fn read_dataset<R: BufRead>(input: R) -> Result<PhenotypeDataset> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
    let header = header?;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if cols.len() < 4 || cols[..3] != ["sire", "dam", "individual"] {
        return Err(perr(1, "header must start with sire,dam,individual and name at least one trait"));
    }
    let p = cols.len() - 3;

    let mut rows: Vec<([usize; 3], Vec<f64>)> = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let ln = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != p + 3 {
            return Err(perr(ln, format!("expected {} fields, found {}", p + 3, fields.len())));
        }
        let mut idx = [0usize; 3];
        for (slot, f) in idx.iter_mut().zip(&fields[..3]) {
            *slot = f.parse().map_err(|_| perr(ln, format!("bad index `{f}`")))?;
            if *slot == 0 {
                return Err(perr(ln, "indices are 1-based"));
            }
        }
        let vals = fields[3..]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| perr(ln, format!("bad value `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((idx, vals));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max = |c: usize| rows.iter().map(|(i, _)| i[c]).max().unwrap_or(0);
    let design = DesignSpec::new(max(0), max(1), max(2), p)?;
    if rows.len() != design.n_obs() {
        return Err(Error::InvalidParameter(format!(
            "unbalanced data: {} rows for a {}x{}x{} layout",
            rows.len(),
            design.sires(),
            design.dams_per_sire(),
            design.offspring_per_dam()
        )));
    }
    let mut y = DMatrix::zeros(design.n_obs(), p);
    let mut seen = vec![false; design.n_obs()];
    for ([i, j, k], vals) in rows {
        let r = design.row(i - 1, j - 1, k - 1);
        if std::mem::replace(&mut seen[r], true) {
            return Err(Error::InvalidParameter(format!("duplicate observation sire {i}, dam {j}, individual {k}")));
        }
        y.row_mut(r).copy_from_slice(&vals);
    }
    PhenotypeDataset::new(design, DVector::zeros(p), y)
}

pub fn write_mean_squares<W: Write>(ms: &MeanSquares, design: &DesignSpec, mut out: W) -> Result<()> {
    writeln!(
        out,
        "design,{},{},{},{}",
        design.sires(),
        design.dams_per_sire(),
        design.offspring_per_dam(),
        design.traits()
    )?;
    for (tag, m) in [("A", &ms.m_a), ("B", &ms.m_b), ("E", &ms.m_e)] {
        write!(out, "{tag}")?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                write!(out, ",{}", m[(i, j)])?;
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_mean_squares<R: BufRead>(input: R) -> Result<(MeanSquares, DesignSpec)> {
    let mut design = None;
    let mut mats: [Option<DMatrix<f64>>; 3] = [None, None, None];
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let ln = n + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match fields[0] {
            "" => continue,
            "design" => {
                let v = fields[1..]
                    .iter()
                    .map(|f| f.parse::<usize>().map_err(|_| perr(ln, format!("bad design entry `{f}`"))))
                    .collect::<Result<Vec<_>>>()?;
                if v.len() != 4 {
                    return Err(perr(ln, "design line needs I,J,K,p"));
                }
                design = Some(DesignSpec::new(v[0], v[1], v[2], v[3])?);
            }
            tag @ ("A" | "B" | "E") => {
                let d: &DesignSpec = design.as_ref().ok_or_else(|| perr(ln, "design line must come first"))?;
                let p = d.traits();
                let v = fields[1..]
                    .iter()
                    .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| perr(ln, format!("bad value `{f}`"))))
                    .collect::<Result<Vec<_>>>()?;
                if v.len() != p * p {
                    return Err(perr(ln, format!("expected {} entries, found {}", p * p, v.len())));
                }
                let slot = ["A", "B", "E"].iter().position(|t| *t == tag).expect("matched tag");
                mats[slot] = Some(DMatrix::from_row_slice(p, p, &v));
            }
            other => return Err(perr(ln, format!("unknown line tag `{other}`"))),
        }
    }
    let design = design.ok_or(Error::EmptyInput)?;
    let [a, b, e] = mats;
    let missing = |t: &str| Error::InvalidParameter(format!("mean-squares file has no `{t}` line"));
    let ms = MeanSquares::new(a.ok_or_else(|| missing("A"))?, b.ok_or_else(|| missing("B"))?, e.ok_or_else(|| missing("E"))?, &design)?;
    Ok((ms, design))
}

/// Read either file kind, telling them apart by the first non-empty line.
pub fn read_mean_squares_or_dataset<R: BufRead>(mut input: R) -> Result<(MeanSquares, DesignSpec)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).ok_or(Error::EmptyInput)?;
    if first.trim_start().starts_with("design") {
        read_mean_squares(text.as_bytes())
    } else {
        let data = read_dataset(text.as_bytes())?;
        Ok((crate::stats::mean_squares(&data), data.design))
    }
}
