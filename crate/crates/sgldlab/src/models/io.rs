//! Dataset serialization: CSV with a header row plus a JSON metadata
//! sidecar (written next to the CSV as `<path>.meta.json`).

use super::{GaussianConjugateModel, LogisticRegressionModel, ModelError};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DatasetMeta {
    Gaussian {
        sigma_theta_sq: f64,
        sigma_y_sq: f64,
        n: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Logistic {
        d: usize,
        n: usize,
        prior_variance: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    s.into()
}

fn io_err(e: impl std::fmt::Display) -> ModelError {
    ModelError::InvalidParameter(format!("dataset io: {e}"))
}

pub fn save_gaussian_csv(
    model: &GaussianConjugateModel,
    path: &Path,
    seed: Option<u64>,
) -> Result<(), ModelError> {
    let mut out = String::from("y\n");
    for y in model.data() {
        out.push_str(&format!("{y:.17e}\n"));
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io_err)?;
    let meta = DatasetMeta::Gaussian {
        sigma_theta_sq: model.sigma_theta_sq(),
        sigma_y_sq: model.sigma_y_sq(),
        n: model.data().len(),
        seed,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta).map_err(io_err)?)
        .map_err(io_err)
}

pub fn load_gaussian_csv(path: &Path) -> Result<GaussianConjugateModel, ModelError> {
    let meta: DatasetMeta = serde_json::from_str(
        &fs::read_to_string(sidecar_path(path)).map_err(io_err)?,
    )
    .map_err(io_err)?;
    let DatasetMeta::Gaussian { sigma_theta_sq, sigma_y_sq, .. } = meta else {
        return Err(ModelError::InvalidParameter("sidecar is not a gaussian dataset".into()));
    };
    let text = fs::read_to_string(path).map_err(io_err)?;
    let mut lines = text.lines();
    if lines.next() != Some("y") {
        return Err(ModelError::InvalidParameter("expected header 'y'".into()));
    }
    let data = lines
        .map(|l| l.trim().parse::<f64>().map_err(io_err))
        .collect::<Result<Vec<_>, _>>()?;
    GaussianConjugateModel::new(sigma_theta_sq, sigma_y_sq, data)
}

pub fn save_logistic_csv(
    model: &LogisticRegressionModel,
    path: &Path,
    seed: Option<u64>,
) -> Result<(), ModelError> {
    use super::PosteriorModel;
    let d = model.dim();
    let mut out = String::new();
    for j in 1..=d {
        out.push_str(&format!("x{j},"));
    }
    out.push_str("y\n");
    for i in 0..model.data_len() {
        for x in model.covariate_row(i) {
            out.push_str(&format!("{x:.17e},"));
        }
        out.push_str(&format!("{}\n", model.label(i)));
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io_err)?;
    let meta = DatasetMeta::Logistic {
        d,
        n: model.data_len(),
        prior_variance: model.prior_variance(),
        seed,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta).map_err(io_err)?)
        .map_err(io_err)
}

pub fn load_logistic_csv(path: &Path) -> Result<LogisticRegressionModel, ModelError> {
    let meta: DatasetMeta = serde_json::from_str(
        &fs::read_to_string(sidecar_path(path)).map_err(io_err)?,
    )
    .map_err(io_err)?;
    let DatasetMeta::Logistic { d, prior_variance, .. } = meta else {
        return Err(ModelError::InvalidParameter("sidecar is not a logistic dataset".into()));
    };
    let text = fs::read_to_string(path).map_err(io_err)?;
    let mut lines = text.lines();
    let _header = lines.next().ok_or_else(|| io_err("empty file"))?;
    let mut covariates = Vec::new();
    let mut labels = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != d + 1 {
            return Err(ModelError::InvalidParameter(format!(
                "expected {} fields, got {}",
                d + 1,
                fields.len()
            )));
        }
        let row = fields[..d]
            .iter()
            .map(|f| f.parse::<f64>().map_err(io_err))
            .collect::<Result<Vec<_>, _>>()?;
        covariates.push(row);
        labels.push(fields[d].parse::<u8>().map_err(io_err)?);
    }
    LogisticRegressionModel::new(covariates, labels, prior_variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{generate_logreg_data, PosteriorModel};

    #[test]
    fn gaussian_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gauss.csv");
        let m = GaussianConjugateModel::new(1.5, 0.5, vec![0.25, -1.0, 3.5]).unwrap();
        save_gaussian_csv(&m, &path, Some(9)).unwrap();
        let back = load_gaussian_csv(&path).unwrap();
        assert_eq!(back.data(), m.data());
        assert_eq!(back.sigma_theta_sq(), 1.5);
        assert_eq!(back.sigma_y_sq(), 0.5);
    }

    #[test]
    fn logistic_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("logreg.csv");
        let m = generate_logreg_data(3, 20, 10.0, 42).unwrap();
        save_logistic_csv(&m, &path, Some(42)).unwrap();
        let back = load_logistic_csv(&path).unwrap();
        assert_eq!(back.data_len(), 20);
        for i in 0..20 {
            assert_eq!(back.covariate_row(i), m.covariate_row(i));
            assert_eq!(back.label(i), m.label(i));
        }
    }
}
