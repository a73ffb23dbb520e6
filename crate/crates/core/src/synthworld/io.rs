//! Line-delimited dataset files: a header record carrying the dataset spec and
//! the universe hash, then one JSON record per example. Floats are written in
//! shortest round-trip form, so files reload bit-exactly.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Caption, DatasetSpec, Example, LatentScene};
use crate::error::{Error, Result};

pub const DATASET_FORMAT: &str = "langsup-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub spec: Option<DatasetSpec>,
    pub universe_hash: String,
    pub count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    image: Vec<f64>,
    captions: Vec<Caption>,
    labels: Vec<usize>,
    saliences: Vec<f64>,
}

pub fn write_dataset<W: Write>(
    out: W,
    spec: Option<&DatasetSpec>,
    universe_hash: &str,
    examples: &[Example],
) -> Result<()> {
    let mut w = BufWriter::new(out);
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        spec: spec.cloned(),
        universe_hash: universe_hash.into(),
        count: examples.len(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for ex in examples {
        let rec = Record {
            image: ex.image.clone(),
            captions: ex.captions.clone(),
            labels: ex.scene.object_ids.clone(),
            saliences: ex.scene.saliences.clone(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<(DatasetHeader, Vec<Example>)> {
    let mut lines = BufReader::new(input).lines();
    let first = lines.next().ok_or_else(|| Error::format("empty dataset file"))??;
    let header: DatasetHeader = serde_json::from_str(&first)?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(Error::format(format!("unsupported dataset format {} v{}", header.format, header.version)));
    }
    let mut examples = Vec::with_capacity(header.count);
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)?;
        let scene = LatentScene::new(rec.labels, rec.saliences)?;
        if rec.captions.is_empty() {
            return Err(Error::format("example without captions"));
        }
        examples.push(Example { image: rec.image, captions: rec.captions, scene });
    }
    if examples.len() != header.count {
        return Err(Error::format(format!("header promises {} examples, found {}", header.count, examples.len())));
    }
    Ok((header, examples))
}

pub fn save_dataset(path: &Path, spec: Option<&DatasetSpec>, universe_hash: &str, examples: &[Example]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_dataset(f, spec, universe_hash, examples)
}

pub fn load_dataset(path: &Path) -> Result<(DatasetHeader, Vec<Example>)> {
    let f = std::fs::File::open(path)?;
    read_dataset(f).map_err(|e| match e {
        Error::Format { message, .. } => Error::Format { path: Some(path.to_path_buf()), message },
        other => other,
    })
}
