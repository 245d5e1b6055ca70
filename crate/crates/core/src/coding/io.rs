//! `RSCDICT` dictionary files and code CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{CodeEntry, Dictionary, SparseCode};
use crate::error::{Error, Result};
use crate::steerbasis::export::{fmt17, parse_header};
use crate::steerbasis::SteerableCoeffs;

pub(crate) fn dictionary_to_text(dict: &Dictionary) -> String {
    let spec = &dict.spec;
    let mut out = String::from("RSCDICT 1\n");
    let _ = writeln!(
        out,
        "N {} S {} R {} M {}",
        spec.n,
        spec.s,
        spec.r,
        dict.len()
    );
    out.push('T');
    for t in spec.t.iter().flatten() {
        let _ = write!(out, " {t}");
    }
    out.push('\n');
    for a in &dict.atoms {
        let mut first = true;
        for z in &a.0 {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{} {}", fmt17(z.re), fmt17(z.im));
        }
        out.push('\n');
    }
    out
}

fn line_offsets(text: &str) -> Vec<usize> {
    let mut offs = vec![0];
    offs.extend(text.match_indices('\n').map(|(i, _)| i + 1));
    offs
}

pub(crate) fn dictionary_from_text(text: &str, path: &Path) -> Result<Dictionary> {
    let lines: Vec<&str> = text.lines().collect();
    let offs = line_offsets(text);
    let at = |line: usize| offs.get(line).copied().unwrap_or(text.len());
    let (spec, m) = parse_header(&lines, "RSCDICT", Some("M")).map_err(|e| match e {
        Error::InvalidArgument(msg) | Error::InvalidSpec(msg) => Error::format(path, 0, msg),
        other => other,
    })?;
    let m = m.expect("extra key requested");
    let basis = crate::steerbasis::SteerableBasis::new(&spec)
        .map_err(|e| Error::format(path, at(2), e.to_string()))?;
    let b = basis.cols();
    let body: Vec<(usize, &str)> = lines
        .iter()
        .enumerate()
        .skip(3)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i, *l))
        .collect();
    if body.len() != m {
        return Err(Error::format(
            path,
            at(3),
            format!("expected {m} atom lines, found {}", body.len()),
        ));
    }
    let mut atoms = Vec::with_capacity(m);
    for (i, line) in body {
        let vals = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::format(path, at(i), format!("bad float: {e}")))?;
        if vals.len() != 2 * b {
            return Err(Error::format(
                path,
                at(i),
                format!("expected {} values, found {}", 2 * b, vals.len()),
            ));
        }
        atoms.push(SteerableCoeffs(
            vals.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect(),
        ));
    }
    Ok(Dictionary { spec, atoms })
}

pub fn write_dictionary(path: impl AsRef<Path>, dict: &Dictionary) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dictionary_to_text(dict)).map_err(|e| Error::io(path, e))
}

/// Read an `RSCDICT` file. Atom count and lengths are checked against the
/// basis described by the header.
pub fn read_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dictionary_from_text(&text, path)
}

pub(crate) fn codes_to_csv(codes: &[SparseCode]) -> String {
    let mut out = String::from("patch,m,r,w\n");
    for (p, c) in codes.iter().enumerate() {
        for e in &c.entries {
            let _ = writeln!(out, "{p},{},{},{}", e.m, e.r, fmt17(e.w));
        }
    }
    out
}

pub fn write_codes_csv(path: impl AsRef<Path>, codes: &[SparseCode]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, codes_to_csv(codes)).map_err(|e| Error::io(path, e))
}

/// Read a code CSV. `patches` sets the number of codes returned (patches with
/// no rows get an empty code); `None` uses the largest patch index seen.
pub fn read_codes_csv(path: impl AsRef<Path>, patches: Option<usize>) -> Result<Vec<SparseCode>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let offs = line_offsets(&text);
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "patch,m,r,w" => {}
        _ => return Err(Error::format(path, 0, "expected header `patch,m,r,w`")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |msg: &str| Error::format(path, offs[i], msg.to_string());
        if f.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let p: usize = f[0].parse().map_err(|_| bad("bad patch index"))?;
        let m: usize = f[1].parse().map_err(|_| bad("bad atom index"))?;
        let r: usize = f[2].parse().map_err(|_| bad("bad rotation index"))?;
        let w: f64 = f[3].parse().map_err(|_| bad("bad weight"))?;
        rows.push((p, CodeEntry { m, r, w }));
    }
    let count = patches.unwrap_or_else(|| rows.iter().map(|(p, _)| p + 1).max().unwrap_or(0));
    let mut codes = vec![SparseCode::default(); count];
    for (p, e) in rows {
        codes
            .get_mut(p)
            .ok_or_else(|| Error::format(path, 0, format!("patch index {p} >= {count}")))?
            .entries
            .push(e);
    }
    Ok(codes)
}
