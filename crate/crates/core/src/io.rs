//! Basis files, run configuration files and atomic writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, Basis};
use crate::catalog::CorpusSpec;
use crate::spaces::{Field, NormSpec, Space};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FieldName {
    #[default]
    Real,
    Complex,
}

impl FieldName {
    pub fn to_field(self, net_order: usize) -> Field {
        match self {
            FieldName::Real => Field::Real,
            FieldName::Complex => Field::Complex { net_order },
        }
    }
}

fn default_net_order() -> usize {
    4
}

/// `{dim, field, netOrder?, norm, matrix}` with the matrix row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BasisFile {
    pub dim: usize,
    pub field: FieldName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net_order: Option<usize>,
    pub norm: NormSpec,
    pub matrix: Vec<f64>,
}

impl BasisFile {
    pub fn from_basis(basis: &Basis) -> Self {
        let n = basis.dim();
        let (field, net_order) = match basis.space().field() {
            Field::Real => (FieldName::Real, None),
            Field::Complex { net_order } => (FieldName::Complex, Some(net_order)),
        };
        let x = basis.matrix();
        BasisFile {
            dim: n,
            field,
            net_order,
            norm: basis.space().norm_spec().clone(),
            matrix: (0..n).flat_map(|i| (0..n).map(move |j| x[(i, j)])).collect(),
        }
    }

    pub fn to_basis(&self) -> Result<Basis> {
        let n = self.dim;
        if self.matrix.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: self.matrix.len(),
            });
        }
        let field = self.field.to_field(self.net_order.unwrap_or_else(default_net_order));
        let space = Space::new(n, field, self.norm.clone())?;
        build_basis(space, DMatrix::from_row_slice(n, n, &self.matrix))
    }

    pub fn load(path: &Path) -> Result<Basis> {
        let file: BasisFile = read_json(path)?;
        file.to_basis()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Settings shared by the subcommands; command-line flags override them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis_file: Option<String>,
    pub field: FieldName,
    pub net_order: usize,
    pub corpus: CorpusSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    pub threads: usize,
    pub format: Format,
    pub closure_rounds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            basis: None,
            basis_file: None,
            field: FieldName::Real,
            net_order: default_net_order(),
            corpus: CorpusSpec::default(),
            output: None,
            budget: None,
            threads: 1,
            format: Format::Json,
            closure_rounds: 6,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "serialising config".into(),
            source,
        })
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })
}

/// Writes through a temporary file in the same directory and renames it
/// over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(contents).and_then(|_| f.sync_all()).map_err(io_err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}
