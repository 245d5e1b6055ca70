//! `RSCBASIS` text export of a sampled basis.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{BasisSpec, SteerableBasis};
use crate::error::{Error, Result};

/// Format a float with 17 significant digits.
pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_basis_text(basis: &SteerableBasis) -> String {
    let spec = basis.spec();
    let mut out = String::new();
    out.push_str("RSCBASIS 1\n");
    let _ = writeln!(out, "N {} S {} R {}", spec.n, spec.s, spec.r);
    out.push('T');
    for t in basis.cutoffs() {
        let _ = write!(out, " {t}");
    }
    out.push('\n');
    for (j, &(s, t)) in basis.labels().iter().enumerate() {
        let _ = write!(out, "{s} {t}");
        for z in basis.column(j) {
            let _ = write!(out, " {} {}", fmt17(z.re), fmt17(z.im));
        }
        out.push('\n');
    }
    out
}

/// A parsed `RSCBASIS` file: the resolved spec and every labeled column.
#[derive(Clone, Debug)]
pub struct BasisText {
    pub spec: BasisSpec,
    pub columns: Vec<((usize, i32), Vec<Complex64>)>,
}

fn bad_in(magic: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("{magic} line {}: {}", line + 1, msg.into()))
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    bad_in("RSCBASIS", line, msg)
}

pub(crate) fn parse_header(
    lines: &[&str],
    magic: &str,
    extra_key: Option<&str>,
) -> Result<(BasisSpec, Option<usize>)> {
    let bad = |line: usize, msg: String| bad_in(magic, line, msg);
    if lines.first().map(|l| l.trim()) != Some(&format!("{magic} 1")[..]) {
        return Err(bad(0, format!("expected `{magic} 1`")));
    }
    let fields: Vec<&str> = lines
        .get(1)
        .ok_or_else(|| bad(1, "missing size line".into()))?
        .split_whitespace()
        .collect();
    let want = if extra_key.is_some() { 8 } else { 6 };
    if fields.len() != want || fields[0] != "N" || fields[2] != "S" || fields[4] != "R" {
        return Err(bad(1, "expected `N <n> S <s> R <r>`".into()));
    }
    let num = |i: usize| -> Result<usize> {
        fields[i]
            .parse()
            .map_err(|_| bad(1, format!("bad integer `{}`", fields[i])))
    };
    let (n, s, r) = (num(1)?, num(3)?, num(5)?);
    let extra = match extra_key {
        Some(k) => {
            if fields[6] != k {
                return Err(bad(1, format!("expected `{k}`")));
            }
            Some(num(7)?)
        }
        None => None,
    };
    let tline: Vec<&str> = lines
        .get(2)
        .ok_or_else(|| bad(2, "missing cutoff line".into()))?
        .split_whitespace()
        .collect();
    if tline.first() != Some(&"T") || tline.len() != s + 1 {
        return Err(bad(2, format!("expected `T` followed by {s} cutoffs")));
    }
    let t = tline[1..]
        .iter()
        .map(|v| v.parse().map_err(|_| bad(2, format!("bad cutoff `{v}`"))))
        .collect::<Result<Vec<usize>>>()?;
    let spec = BasisSpec {
        n,
        s,
        t: Some(t),
        r,
    };
    spec.validate()?;
    Ok((spec, extra))
}

pub fn read_basis_text(text: &str) -> Result<BasisText> {
    let lines: Vec<&str> = text.lines().collect();
    let (spec, _) = parse_header(&lines, "RSCBASIS", None)?;
    let mut columns = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(3) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 2 || f.len() % 2 != 0 {
            return Err(bad(i, "expected `s t` followed by re/im pairs"));
        }
        let s = f[0].parse().map_err(|_| bad(i, "bad annulus index"))?;
        let t = f[1].parse().map_err(|_| bad(i, "bad frequency"))?;
        let vals = f[2..]
            .chunks(2)
            .map(|p| {
                let re: f64 = p[0].parse().map_err(|_| bad(i, "bad float"))?;
                let im: f64 = p[1].parse().map_err(|_| bad(i, "bad float"))?;
                Ok(Complex64::new(re, im))
            })
            .collect::<Result<Vec<_>>>()?;
        columns.push(((s, t), vals));
    }
    Ok(BasisText { spec, columns })
}
