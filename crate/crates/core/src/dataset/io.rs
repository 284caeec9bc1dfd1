//! On-disk layout: `manifest.json` plus one JSONL file per split, each line
//! holding an image as base64 PNG, its boxes and its five captions.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use image::{ImageFormat, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{BoundingBox, Raster};

use super::{
    generate_scene, split_dataset, Background, CaptionSample, DatasetError, ObjectClass, PlacedObject, SceneSpec,
};

/// Bumped whenever caption wording changes.
pub const TEMPLATE_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub count: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub seed: u64,
    pub count: usize,
    pub template_version: u32,
    pub classes: Vec<ObjectClass>,
    pub backgrounds: Vec<Background>,
    pub splits: BTreeMap<String, SplitEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxRecord {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    class: ObjectClass,
    color: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    image_id: String,
    width: u32,
    height: u32,
    background: Background,
    image: String,
    boxes: Vec<BoxRecord>,
    captions: [String; 5],
}

fn encode_png(raster: &Raster) -> String {
    let img = RgbImage::from_raw(raster.width(), raster.height(), raster.to_rgb8()).expect("buffer matches extent");
    let mut bytes = std::io::Cursor::new(Vec::new());
    img.write_to(&mut bytes, ImageFormat::Png).expect("in-memory PNG encoding");
    STANDARD.encode(bytes.into_inner())
}

fn decode_png(data: &str, path: &str) -> Result<Raster, DatasetError> {
    let format = |message: String| DatasetError::Format {
        path: path.to_string(),
        message,
    };
    let bytes = STANDARD.decode(data).map_err(|e| format(e.to_string()))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map_err(|e| format(e.to_string()))?
        .to_rgb8();
    Raster::from_rgb8(img.width(), img.height(), img.as_raw()).map_err(|e| format(e.to_string()))
}

impl SampleRecord {
    fn from_sample(s: &CaptionSample) -> Self {
        Self {
            image_id: s.image_id.clone(),
            width: s.scene.width,
            height: s.scene.height,
            background: s.scene.background,
            image: encode_png(&s.raster),
            boxes: s
                .scene
                .objects
                .iter()
                .map(|o| BoxRecord {
                    cx: o.bbox.cx,
                    cy: o.bbox.cy,
                    w: o.bbox.w,
                    h: o.bbox.h,
                    class: o.class,
                    color: o.color,
                })
                .collect(),
            captions: s.captions.clone(),
        }
    }

    fn into_sample(self, path: &str) -> Result<CaptionSample, DatasetError> {
        let raster = decode_png(&self.image, path)?;
        let mut objects = Vec::with_capacity(self.boxes.len());
        for b in self.boxes {
            let bbox = BoundingBox::new(b.cx, b.cy, b.w, b.h).map_err(|e| DatasetError::Format {
                path: path.to_string(),
                message: e.to_string(),
            })?;
            objects.push(PlacedObject {
                class: b.class,
                bbox,
                color: b.color,
            });
        }
        Ok(CaptionSample {
            image_id: self.image_id,
            raster,
            scene: SceneSpec {
                width: self.width,
                height: self.height,
                background: self.background,
                objects,
            },
            captions: self.captions,
        })
    }
}

fn is_nonempty_dir(dir: &Path) -> Result<bool, DatasetError> {
    if !dir.exists() {
        return Ok(false);
    }
    Ok(fs::read_dir(dir)?.next().is_some())
}

/// Generates `count` scenes, splits them and writes the dataset to `dir`.
/// Refuses a non-empty directory unless `force` is set.
pub fn write_dataset(dir: &Path, seed: u64, count: usize, force: bool) -> Result<DatasetManifest, DatasetError> {
    let splits = split_dataset(count, seed)?;
    if !force && is_nonempty_dir(dir)? {
        return Err(DatasetError::NotEmpty(dir.display().to_string()));
    }
    fs::create_dir_all(dir)?;

    let mut entries = BTreeMap::new();
    for (name, indices) in SPLIT_NAMES.iter().zip([&splits.train, &splits.val, &splits.test]) {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        let lines: Vec<String> = sorted
            .par_iter()
            .map(|&i| {
                let rec = SampleRecord::from_sample(&generate_scene(seed, i));
                serde_json::to_string(&rec).expect("record serializes")
            })
            .collect();
        let file = format!("{name}.jsonl");
        let mut out = BufWriter::new(fs::File::create(dir.join(&file))?);
        for l in &lines {
            writeln!(out, "{l}")?;
        }
        out.flush()?;
        entries.insert(
            name.to_string(),
            SplitEntry {
                count: lines.len(),
                file,
            },
        );
    }

    let manifest = DatasetManifest {
        seed,
        count,
        template_version: TEMPLATE_VERSION,
        classes: ObjectClass::ALL.to_vec(),
        backgrounds: Background::ALL.to_vec(),
        splits: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST), json + "\n")?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Every sample of one split, in file order.
pub fn load_split(dir: &Path, split: &str) -> Result<Vec<CaptionSample>, DatasetError> {
    let manifest = load_dataset(dir)?;
    let entry = manifest
        .splits
        .get(split)
        .ok_or_else(|| DatasetError::UnknownSplit(split.to_string()))?;
    let path = dir.join(&entry.file);
    let shown = path.display().to_string();
    let reader = BufReader::new(fs::File::open(&path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| DatasetError::Format {
            path: format!("{shown}:{}", i + 1),
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    records.into_par_iter().map(|r| r.into_sample(&shown)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_dataset(dir.path(), 4, 12, false).unwrap();
        assert_eq!(m.splits["train"].count, 10);
        let train = load_split(dir.path(), "train").unwrap();
        for s in &train {
            let index: usize = s.image_id[3..].parse().unwrap();
            assert_eq!(*s, generate_scene(4, index));
        }
        assert!(matches!(
            write_dataset(dir.path(), 4, 12, false),
            Err(DatasetError::NotEmpty(_))
        ));
        let before = fs::read(dir.path().join("val.jsonl")).unwrap();
        write_dataset(dir.path(), 4, 12, true).unwrap();
        assert_eq!(before, fs::read(dir.path().join("val.jsonl")).unwrap());
    }
}
