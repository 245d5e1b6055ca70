//! Model directories and sweep tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ClassParams, ClassifierModel, CvRow, TrainMode};
use crate::coding::{read_dictionary, write_dictionary};
use crate::error::{Error, Result};
use crate::steerbasis::export::fmt17;

fn dict_name(class: usize) -> String {
    format!("class_{class}.rsc")
}

/// Write `class_<c>.rsc` per class, `model.csv` with the training histograms,
/// and `params.csv` with the coding parameters the dictionaries alone do not
/// record.
pub fn save_model(model: &ClassifierModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (c, d) in model.dicts.iter().enumerate() {
        write_dictionary(dir.join(dict_name(c)), d)?;
    }
    let mut csv = String::from("image,label");
    for c in 0..model.classes() {
        let _ = write!(csv, ",h{c}");
    }
    csv.push('\n');
    for (i, (f, l)) in model.features.iter().zip(&model.labels).enumerate() {
        let _ = write!(csv, "{i},{l}");
        for v in f {
            let _ = write!(csv, ",{}", fmt17(*v));
        }
        csv.push('\n');
    }
    let path = dir.join("model.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;

    let p = &model.params;
    let params = format!(
        "key,value\nmode,{}\nN,{}\nM,{}\nK,{}\nR,{}\niterations,{}\npatches_per_image,{}\nstride,{}\n",
        model.mode, p.n, p.atoms, p.sparsity, p.rotations, p.iterations, p.patches_per_image, p.stride
    );
    let path = dir.join("params.csv");
    fs::write(&path, params).map_err(|e| Error::io(&path, e))
}

fn read_params(path: &Path) -> Result<(ClassParams, TrainMode)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut params = ClassParams::default();
    let mut mode = None;
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let line = line.trim();
        if i == 0 || line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::format(path, start, m);
        let (k, v) = line
            .split_once(',')
            .ok_or_else(|| bad("expected key,value".into()))?;
        if k == "mode" {
            mode = Some(v.parse::<TrainMode>().map_err(|e| bad(e.to_string()))?);
            continue;
        }
        let num: usize = v.parse().map_err(|_| bad(format!("bad value for {k}")))?;
        match k {
            "N" => params.n = num,
            "M" => params.atoms = num,
            "K" => params.sparsity = num,
            "R" => params.rotations = num,
            "iterations" => params.iterations = num,
            "patches_per_image" => params.patches_per_image = num,
            "stride" => params.stride = num,
            _ => return Err(bad(format!("unknown key {k}"))),
        }
    }
    let mode = mode.ok_or_else(|| Error::format(path, 0, "missing mode"))?;
    Ok((params, mode))
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<ClassifierModel> {
    let dir = dir.as_ref();
    let (params, mode) = read_params(&dir.join("params.csv"))?;
    let path = dir.join("model.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(&path, 0, "empty model.csv"))?;
    let classes = header.split(',').count().saturating_sub(2);
    if classes == 0 || !header.starts_with("image,label,h0") {
        return Err(Error::format(
            &path,
            0,
            "expected header `image,label,h0..`",
        ));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut offset = header.len() + 1;
    for line in lines {
        let start = offset;
        offset += line.len() + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != classes + 2 {
            return Err(Error::format(
                &path,
                start,
                format!("expected {} fields", classes + 2),
            ));
        }
        labels.push(
            f[1].parse()
                .map_err(|_| Error::format(&path, start, "bad label"))?,
        );
        features.push(
            f[2..]
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::format(&path, start, "bad histogram value"))?,
        );
    }
    let dicts = (0..classes)
        .map(|c| read_dictionary(dir.join(dict_name(c))))
        .collect::<Result<Vec<_>>>()?;
    ClassifierModel::from_parts(params, mode, dicts, features, labels)
}

pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[CvRow]) -> Result<()> {
    let path = path.as_ref();
    let mut csv = String::from("N,K,M,mode,accuracy_mean,accuracy_std\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.n,
            r.k,
            r.m,
            r.mode,
            fmt17(r.accuracy_mean),
            fmt17(r.accuracy_std)
        );
    }
    fs::write(path, csv).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patches::{synth_textures, Split};

    #[test]
    fn model_round_trip() {
        let set = synth_textures(2, 2, 20, 8).unwrap();
        let params = ClassParams {
            n: 7,
            atoms: 3,
            sparsity: 2,
            rotations: 6,
            iterations: 2,
            patches_per_image: 30,
            stride: 3,
        };
        let model = ClassifierModel::train(&set, &params, TrainMode::Rotational, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(&model, dir.path()).unwrap();
        let back = load_model(dir.path()).unwrap();
        assert_eq!(back.params, model.params);
        assert_eq!(back.mode, model.mode);
        assert_eq!(back.dicts, model.dicts);
        assert_eq!(back.features, model.features);
        assert_eq!(back.labels, model.labels);
        for item in set.split(Split::Test) {
            assert_eq!(
                back.classify(&item.image).unwrap(),
                model.classify(&item.image).unwrap()
            );
        }
        let text = fs::read_to_string(dir.path().join("model.csv")).unwrap();
        assert!(text.starts_with("image,label,h0,h1\n"));
    }

    #[test]
    fn missing_dictionary_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("params.csv"), "key,value\nmode,standard\n").unwrap();
        fs::write(dir.path().join("model.csv"), "image,label,h0\n0,0,1\n").unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Io { .. })));
    }
}
