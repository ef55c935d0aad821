//! Dataset directories: `manifest.json` plus one raw little-endian f64 file per stored component.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{DatasetManifest, FieldEntry, SCHEMA_VERSION};
use crate::constraints::InitialDataSet;
use crate::error::{Error, Result};
use crate::fields::{Chart, Field, Valence};

const MANIFEST: &str = "manifest.json";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes the named fields (sampled onto the grid) and the manifest into `dir`.
pub fn save_fields(fields: &[(&str, &Field)], manifest: &DatasetManifest, dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut m = manifest.clone();
    let chart =
        fields.first().map(|f| f.1.chart.clone()).ok_or_else(|| Error::InvalidParameters("no fields".into()))?;
    m.grid_dims = vec![chart.dim; chart.n];
    m.fields.clear();
    for (name, f) in fields {
        let sampled = f.sample();
        let data = sampled.grid_data().expect("sampled field is grid-backed");
        let mut files = Vec::new();
        for (c, comp) in data.iter().enumerate() {
            let file = format!("{name}_{c}.f64");
            let mut bytes = Vec::with_capacity(comp.len() * 8);
            for v in comp.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            let p = dir.join(&file);
            fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
            files.push(file);
        }
        m.fields.push(FieldEntry {
            name: name.to_string(),
            cov: f.valence.cov,
            con: f.valence.con,
            symmetric: f.symmetric,
            files,
        });
    }
    let p = dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&m).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&p, json).map_err(|e| io_err(&p, e))?;
    Ok(m)
}

/// Saves `g` and `pi` of an initial data set.
pub fn save(ids: &InitialDataSet, manifest: &DatasetManifest, dir: &Path) -> Result<DatasetManifest> {
    save_fields(&[("g", &ids.g), ("pi", &ids.pi)], manifest, dir)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let p = dir.join(MANIFEST);
    let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
    let m: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::ManifestMismatch(format!("{}: {e}", p.display())))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(Error::ManifestMismatch(format!(
            "schema version {} (expected {SCHEMA_VERSION})",
            m.schema_version
        )));
    }
    Ok(m)
}

fn read_component(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() != expected * 8 {
        return Err(Error::Io(format!(
            "{}: {} bytes, expected {} ({} samples); data ends at offset {}{}",
            path.display(),
            bytes.len(),
            expected * 8,
            expected,
            bytes.len(),
            if bytes.len() % 8 != 0 { " (not a multiple of 8)" } else { "" }
        )));
    }
    Ok(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
}

/// Loads every field listed in the manifest of `dir`.
pub fn load_fields(dir: &Path) -> Result<(Vec<(String, Field)>, DatasetManifest)> {
    let m = read_manifest(dir)?;
    let chart: Arc<Chart> = m.chart.build(m.n)?;
    if m.grid_dims != vec![chart.dim; m.n] {
        return Err(Error::ManifestMismatch(format!(
            "grid dims {:?} disagree with the chart ({} axes of {})",
            m.grid_dims, m.n, chart.dim
        )));
    }
    let mut out = Vec::new();
    for e in &m.fields {
        let val = Valence { cov: e.cov, con: e.con };
        let want = crate::fields::stored_count(m.n, val, e.symmetric && val.rank() == 2);
        if e.files.len() != want {
            return Err(Error::ManifestMismatch(format!(
                "field {} lists {} component files, valence needs {want}",
                e.name,
                e.files.len()
            )));
        }
        let data = e.files.iter().map(|f| read_component(&dir.join(f), chart.total())).collect::<Result<Vec<_>>>()?;
        out.push((e.name.clone(), Field::grid(&chart, val, e.symmetric, data)?));
    }
    Ok((out, m))
}

/// Loads an initial data set; the convention must be "paper".
pub fn load(dir: &Path) -> Result<(InitialDataSet, DatasetManifest)> {
    let (fields, m) = load_fields(dir)?;
    if m.convention != "paper" {
        return Err(Error::ConventionNotPaper(m.convention.clone()));
    }
    let get = |name: &str| {
        fields
            .iter()
            .find(|f| f.0 == name)
            .map(|f| f.1.clone())
            .ok_or_else(|| Error::ManifestMismatch(format!("missing field {name}")))
    };
    let ids = InitialDataSet::new(get("g")?, get("pi")?, m.type_params)?;
    Ok((ids, m))
}
