//! On-disk formats: a JSON sidecar next to a raw little-endian payload, plus
//! JSON manifests tying several arrays together.
//!
//! An array named `x` lives in `x.json` and `x.bin`. The payload holds
//! `product(shape)` row-major elements, each an 8-byte LE float (`f64`) or two
//! of them, real then imaginary (`c128`). All writes go to a temporary file in
//! the destination directory followed by a rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::sbgm::{SbgmModel, VarianceForm, Variances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    C128,
    F64,
}

impl Dtype {
    pub fn bytes_per_element(self) -> usize {
        match self {
            Dtype::C128 => 16,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub order: String,
    pub endianness: String,
    pub role: String,
    #[serde(default)]
    pub units: Option<String>,
    #[serde(default)]
    pub provenance: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    Complex(Vec<C64>),
    Real(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayContainer {
    pub shape: Vec<usize>,
    pub data: ArrayData,
    pub role: String,
    pub units: Option<String>,
    pub provenance: Value,
}

impl ArrayContainer {
    pub fn complex(shape: Vec<usize>, data: Vec<C64>, role: &str) -> Result<Self> {
        Self::new(shape, ArrayData::Complex(data), role)
    }

    pub fn real(shape: Vec<usize>, data: Vec<f64>, role: &str) -> Result<Self> {
        Self::new(shape, ArrayData::Real(data), role)
    }

    fn new(shape: Vec<usize>, data: ArrayData, role: &str) -> Result<Self> {
        let len = match &data {
            ArrayData::Complex(v) => v.len(),
            ArrayData::Real(v) => v.len(),
        };
        if shape.iter().product::<usize>() != len {
            return Err(Error::invalid(format!("shape {shape:?} does not hold {len} elements")));
        }
        Ok(Self {
            shape,
            data,
            role: role.to_string(),
            units: None,
            provenance: Value::Null,
        })
    }

    pub fn with_units(mut self, units: &str) -> Self {
        self.units = Some(units.to_string());
        self
    }

    pub fn with_provenance(mut self, provenance: Value) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            ArrayData::Complex(_) => Dtype::C128,
            ArrayData::Real(_) => Dtype::F64,
        }
    }

    /// Stacks equal-length vectors as the rows of a `[n, dim]` array.
    pub fn from_rows(rows: &[CVector], dim: usize, role: &str) -> Result<Self> {
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows have differing lengths"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::complex(vec![rows.len(), dim], data, role)
    }

    pub fn to_rows(&self) -> Result<Vec<CVector>> {
        let (ArrayData::Complex(data), [n, dim]) = (&self.data, self.shape.as_slice()) else {
            return Err(Error::Format(format!("{}: expected a 2-D complex array", self.role)));
        };
        if *dim == 0 {
            return Ok(vec![CVector::zeros(0); *n]);
        }
        Ok(data.chunks_exact(*dim).map(CVector::from_column_slice).collect())
    }

    pub fn as_real(&self) -> Result<&[f64]> {
        match &self.data {
            ArrayData::Real(v) => Ok(v),
            ArrayData::Complex(_) => Err(Error::Format(format!("{}: expected a real array", self.role))),
        }
    }

    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.shape.iter().product::<usize>() * self.dtype().bytes_per_element());
        match &self.data {
            ArrayData::Complex(v) => {
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            ArrayData::Real(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            shape: self.shape.clone(),
            dtype: self.dtype(),
            order: "row-major".into(),
            endianness: "LE".into(),
            role: self.role.clone(),
            units: self.units.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Writes `dir/name.json` and `dir/name.bin`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<()> {
        write_atomic(&dir.join(format!("{name}.bin")), &self.payload())?;
        write_json(&dir.join(format!("{name}.json")), &self.sidecar())
    }

    pub fn read(dir: &Path, name: &str) -> Result<Self> {
        let side: Sidecar = read_json(&dir.join(format!("{name}.json")))?;
        if side.order != "row-major" || side.endianness != "LE" {
            return Err(Error::Format(format!("{name}: unsupported order/endianness")));
        }
        let path = dir.join(format!("{name}.bin"));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let count: usize = side.shape.iter().product();
        if bytes.len() != count * side.dtype.bytes_per_element() {
            return Err(Error::Format(format!(
                "{name}: payload has {} bytes, expected {}",
                bytes.len(),
                count * side.dtype.bytes_per_element()
            )));
        }
        let floats: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let data = match side.dtype {
            Dtype::F64 => ArrayData::Real(floats),
            Dtype::C128 => ArrayData::Complex(floats.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()),
        };
        Ok(Self {
            shape: side.shape,
            data,
            role: side.role,
            units: side.units,
            provenance: side.provenance,
        })
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = temp_path(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Header of a model file; the payload holds the weights, then every
/// component's variances (Doppler factors of all components, then delay
/// factors, in the Kronecker form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub format: String,
    pub components: usize,
    pub variance_form: VarianceForm,
    pub sparse_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_size: Option<usize>,
    pub floor: f64,
    pub dtype: Dtype,
    pub endianness: String,
    #[serde(default)]
    pub provenance: Value,
}

const MODEL_FORMAT: &str = "chansbgm-model/1";

pub fn write_model(dir: &Path, name: &str, model: &SbgmModel, provenance: Value) -> Result<()> {
    let k = model.components();
    let mut floats = model.weights().to_vec();
    let (st, sf) = match model.variances() {
        Variances::Full(g) => {
            g.iter().for_each(|v| floats.extend_from_slice(v));
            (None, None)
        }
        Variances::Kronecker { time, freq } => {
            time.iter().chain(freq).for_each(|v| floats.extend_from_slice(v));
            (Some(time[0].len()), Some(freq[0].len()))
        }
    };
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        components: k,
        variance_form: model.form(),
        sparse_dim: model.sparse_dim(),
        doppler_size: st,
        delay_size: sf,
        floor: model.floor(),
        dtype: Dtype::F64,
        endianness: "LE".into(),
        provenance,
    };
    let bytes: Vec<u8> = floats.iter().flat_map(|x| x.to_le_bytes()).collect();
    write_atomic(&dir.join(format!("{name}.bin")), &bytes)?;
    write_json(&dir.join(format!("{name}.json")), &header)
}

pub fn read_model(dir: &Path, name: &str) -> Result<(SbgmModel, ModelHeader)> {
    let header: ModelHeader = read_json(&dir.join(format!("{name}.json")))?;
    if header.format != MODEL_FORMAT || header.dtype != Dtype::F64 || header.endianness != "LE" {
        return Err(Error::Format(format!("{name}: unsupported model format")));
    }
    let path = dir.join(format!("{name}.bin"));
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let floats: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let k = header.components;
    let per = match header.variance_form {
        VarianceForm::Full => header.sparse_dim,
        VarianceForm::Kronecker => {
            let (Some(st), Some(sf)) = (header.doppler_size, header.delay_size) else {
                return Err(Error::Format("Kronecker model without factor sizes".into()));
            };
            if st * sf != header.sparse_dim {
                return Err(Error::Format("factor sizes do not multiply to the sparse dimension".into()));
            }
            st + sf
        }
    };
    if bytes.len() % 8 != 0 || floats.len() != k + k * per {
        return Err(Error::Format(format!("{name}: payload size does not match the header")));
    }
    let weights = floats[..k].to_vec();
    let rest = &floats[k..];
    let model = match header.variance_form {
        VarianceForm::Full => {
            let g = rest.chunks_exact(per).map(<[f64]>::to_vec).collect();
            SbgmModel::full(weights, g, header.floor)?
        }
        VarianceForm::Kronecker => {
            let st = header.doppler_size.unwrap_or(0);
            let sf = header.delay_size.unwrap_or(0);
            let (t, f) = rest.split_at(k * st);
            let time = t.chunks_exact(st).map(<[f64]>::to_vec).collect();
            let freq = f.chunks_exact(sf).map(<[f64]>::to_vec).collect();
            SbgmModel::kronecker(weights, time, freq, header.floor)?
        }
    };
    Ok((model, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbgm::DEFAULT_FLOOR;

    #[test]
    fn complex_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = vec![C64::new(1.0, -0.0), C64::new(f64::MIN_POSITIVE, 3.5e300), C64::new(-2.25, 1.0 / 3.0)];
        let a = ArrayContainer::complex(vec![3, 1], data, "test").unwrap().with_units("rad");
        a.write(dir.path(), "a").unwrap();
        let b = ArrayContainer::read(dir.path(), "a").unwrap();
        assert_eq!(a, b);
        let ArrayData::Complex(v) = &b.data else { panic!() };
        assert_eq!(v[0].im.to_bits(), (-0.0f64).to_bits());
        assert_eq!(std::fs::metadata(dir.path().join("a.bin")).unwrap().len(), 48);
    }

    #[test]
    fn empty_and_real_arrays() {
        let dir = tempfile::tempdir().unwrap();
        let a = ArrayContainer::complex(vec![0, 5], vec![], "empty").unwrap();
        a.write(dir.path(), "e").unwrap();
        assert_eq!(ArrayContainer::read(dir.path(), "e").unwrap().to_rows().unwrap().len(), 0);
        let r = ArrayContainer::real(vec![2], vec![0.5, -1.0], "r").unwrap();
        r.write(dir.path(), "r").unwrap();
        assert_eq!(ArrayContainer::read(dir.path(), "r").unwrap(), r);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        ArrayContainer::real(vec![2], vec![0.5, -1.0], "r").unwrap().write(dir.path(), "r").unwrap();
        std::fs::write(dir.path().join("r.bin"), [0u8; 12]).unwrap();
        assert!(matches!(ArrayContainer::read(dir.path(), "r"), Err(Error::Format(_))));
        assert!(ArrayContainer::real(vec![3], vec![1.0], "bad").is_err());
    }

    #[test]
    fn model_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let full = SbgmModel::full(vec![0.25, 0.75], vec![vec![1.0, 2.0, 3.0], vec![0.1, 1e-7, 9.0]], DEFAULT_FLOOR).unwrap();
        write_model(dir.path(), "m", &full, Value::Null).unwrap();
        assert_eq!(read_model(dir.path(), "m").unwrap().0, full);

        let kr = SbgmModel::kronecker(vec![1.0], vec![vec![1.0, 2.0]], vec![vec![3.0, 4.0, 5.0]], DEFAULT_FLOOR).unwrap();
        write_model(dir.path(), "k", &kr, Value::Null).unwrap();
        let (back, header) = read_model(dir.path(), "k").unwrap();
        assert_eq!(back, kr);
        assert_eq!(header.sparse_dim, 6);
        assert_eq!(std::fs::metadata(dir.path().join("k.bin")).unwrap().len(), 8 * 6);
    }
}
