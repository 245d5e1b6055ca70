//! Patch sets as CSV: header `patch,v0,..,v{P-1}`, one row per patch in
//! disk-mask order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::PatchSet;
use crate::error::{Error, Result};
use crate::steerbasis::disk_mask;
use crate::steerbasis::export::fmt17;

pub fn write_patches_csv(path: impl AsRef<Path>, set: &PatchSet) -> Result<()> {
    let path = path.as_ref();
    let mut csv = String::from("patch");
    for i in 0..set.mask.len() {
        let _ = write!(csv, ",v{i}");
    }
    csv.push('\n');
    for (p, values) in set.patches.iter().enumerate() {
        let _ = write!(csv, "{p}");
        for v in values {
            let _ = write!(csv, ",{}", fmt17(*v));
        }
        csv.push('\n');
    }
    fs::write(path, csv).map_err(|e| Error::io(path, e))
}

/// Smallest odd `N` whose disk mask has `pixels` samples.
fn diameter_for(pixels: usize) -> Option<usize> {
    (3..)
        .step_by(2)
        .map(|n| (n, disk_mask(n).map(|m| m.len()).unwrap_or(0)))
        .take_while(|&(_, len)| len <= pixels)
        .find(|&(_, len)| len == pixels)
        .map(|(n, _)| n)
}

pub fn read_patches_csv(path: impl AsRef<Path>) -> Result<PatchSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().unwrap_or("").trim();
    offset += text.split_inclusive('\n').next().map_or(0, str::len);
    if !header.starts_with("patch,v0") {
        return Err(Error::format(path, 0, "expected header `patch,v0,..`"));
    }
    let pixels = header.split(',').count() - 1;
    let n = diameter_for(pixels).ok_or_else(|| {
        Error::format(path, 0, format!("{pixels} values match no disk patch size"))
    })?;
    let mut patches = Vec::new();
    for line in lines {
        let start = offset;
        offset += line.len();
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::format(path, start, "bad patch value"))?;
        if values.len() != pixels {
            return Err(Error::format(
                path,
                start,
                format!("expected {pixels} values, got {}", values.len()),
            ));
        }
        patches.push(values);
    }
    Ok(PatchSet {
        n,
        mask: disk_mask(n)?,
        patches,
        origins: Vec::new(),
        normalized: false,
        dropped: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patches::synth_crosses;

    #[test]
    fn round_trip_is_exact() {
        let (set, _) = synth_crosses(5, 9, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("patches.csv");
        write_patches_csv(&p, &set).unwrap();
        let back = read_patches_csv(&p).unwrap();
        assert_eq!(back.n, 9);
        assert_eq!(back.patches, set.patches);
    }

    #[test]
    fn size_inference() {
        assert_eq!(diameter_for(97), Some(11));
        assert_eq!(diameter_for(96), None);
    }

    #[test]
    fn short_row_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        let header = format!(
            "patch{}\n",
            (0..9).map(|i| format!(",v{i}")).collect::<String>()
        );
        let text = format!("{header}0,1,2\n");
        fs::write(&p, &text).unwrap();
        match read_patches_csv(&p) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, header.len()),
            other => panic!("{other:?}"),
        }
    }
}
