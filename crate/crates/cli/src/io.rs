//! Files on disk: atomic writes, JSON, PNG and corpus listing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chartrefine_core::{ChartAnnotation, Raster};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

/// File names in an output directory that are not chart records.
/// Files the tool writes next to chart files; never read as charts.
pub const RESERVED_JSON: [&str; 6] = [
    "manifest.json",
    "run_manifest.json",
    "parse_summary.json",
    "scrm_report.json",
    "corpus_stats.json",
    "simulation_report.json",
];

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    ensure_dir(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_pretty(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn encode_png(image: &Raster) -> Vec<u8> {
    let buf = image::RgbImage::from_raw(image.width(), image.height(), image.as_raw().to_vec())
        .expect("raster buffer is width*height*3");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}

pub fn write_png(path: &Path, image: &Raster) -> Result<()> {
    write_atomic(path, &encode_png(image))
}

pub fn read_png(path: &Path) -> Result<Raster> {
    let img = image::open(path).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    Ok(Raster::from_raw(rgb.width(), rgb.height(), rgb.into_raw())?)
}

/// Chart JSON files directly inside `dir`, sorted by name.
pub fn list_chart_json(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if path.is_file() && name.ends_with(".json") && !RESERVED_JSON.contains(&name) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string()
}

/// One chart of a corpus directory.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub chart_id: String,
    pub annotation_path: PathBuf,
    pub image_path: PathBuf,
}

/// Charts of a generated corpus: every `<id>.json` with a sibling `<id>.png`.
pub fn list_corpus(dir: &Path) -> Result<Vec<CorpusEntry>> {
    Ok(list_chart_json(dir)?
        .into_iter()
        .filter_map(|annotation_path| {
            let image_path = annotation_path.with_extension("png");
            image_path.is_file().then(|| CorpusEntry {
                chart_id: stem(&annotation_path),
                annotation_path,
                image_path,
            })
        })
        .collect())
}

pub fn load_annotations(dir: &Path) -> Result<Vec<ChartAnnotation>> {
    list_corpus(dir)?
        .iter()
        .map(|e| read_json(&e.annotation_path))
        .collect()
}
