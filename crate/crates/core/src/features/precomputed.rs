//! JSONL ingestion of externally computed features, one image per line:
//! `{"image_id", "object_features": n×d, "patch_features": n×d, "global_feature": d}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{stack_features, FeatureError, FeatureStack, InstanceFeature, Level};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecomputedRecord {
    pub image_id: String,
    pub object_features: Vec<Vec<f64>>,
    pub patch_features: Vec<Vec<f64>>,
    pub global_feature: Vec<f64>,
}

impl PrecomputedRecord {
    pub fn from_stack(image_id: impl Into<String>, stack: &FeatureStack) -> Self {
        let pick = |level| {
            stack
                .rows()
                .iter()
                .filter(|r| r.level == level)
                .map(|r| r.vector.clone())
                .collect::<Vec<_>>()
        };
        Self {
            image_id: image_id.into(),
            object_features: pick(Level::Object),
            patch_features: pick(Level::Patch),
            global_feature: stack.rows()[stack.slots() - 1].vector.clone(),
        }
    }

    pub fn to_stack(&self) -> Result<FeatureStack, FeatureError> {
        let wrap = |rows: &[Vec<f64>], level| {
            rows.iter()
                .map(|v| InstanceFeature {
                    level,
                    vector: v.clone(),
                })
                .collect()
        };
        stack_features(
            wrap(&self.object_features, Level::Object),
            wrap(&self.patch_features, Level::Patch),
            InstanceFeature {
                level: Level::Global,
                vector: self.global_feature.clone(),
            },
        )
    }
}

pub fn read_precomputed(path: &Path) -> Result<Vec<PrecomputedRecord>, FeatureError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PrecomputedRecord =
            serde_json::from_str(&line).map_err(|source| FeatureError::Json { line: i + 1, source })?;
        rec.to_stack()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_precomputed(path: &Path, records: &[PrecomputedRecord]) -> Result<(), FeatureError> {
    let mut w = BufWriter::new(File::create(path)?);
    for rec in records {
        let line = serde_json::to_string(rec).map_err(|source| FeatureError::Json { line: 0, source })?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let rec = PrecomputedRecord {
            image_id: "img-1".into(),
            object_features: vec![vec![0.1, 0.2], vec![0.3, 0.4]],
            patch_features: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            global_feature: vec![9.0, 8.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.jsonl");
        write_precomputed(&path, std::slice::from_ref(&rec)).unwrap();
        let back = read_precomputed(&path).unwrap();
        assert_eq!(back, vec![rec.clone()]);
        let stack = back[0].to_stack().unwrap();
        assert_eq!(stack.slots(), 5);
        assert_eq!(PrecomputedRecord::from_stack("img-1", &stack), rec);
    }

    #[test]
    fn rejects_ragged_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            r#"{"image_id":"x","object_features":[[1,2]],"patch_features":[[1]],"global_feature":[1,2]}"#,
        )
        .unwrap();
        assert!(matches!(read_precomputed(&path), Err(FeatureError::Shape { .. })));
    }
}
