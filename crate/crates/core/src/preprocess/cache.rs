//! Detection sidecar files.
//!
//! One line per sample:
//! `source,source_key,status,x,y,w,h,confidence,rex,rey,lex,ley,nx,ny,mrx,mry,mlx,mly`
//! where `status` is `ok` or `none`. `none` lines carry only the first three
//! fields; `ok` lines without landmarks carry eight. Floats are written in
//! shortest round-trip form, so a saved cache replays bit-identically.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{BoundingBox, FaceDetection, LandmarkSet, Point};
use crate::error::{Error, Result};
use crate::label::DatasetId;

/// Persisted map from `(source, source_key)` to a detection or "no face".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionCache {
    entries: BTreeMap<(DatasetId, String), Option<FaceDetection>>,
}

impl DetectionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, source: DatasetId, key: &str) -> Option<&Option<FaceDetection>> {
        self.entries.get(&(source, key.to_string()))
    }

    pub fn insert(&mut self, source: DatasetId, key: &str, detection: Option<FaceDetection>) {
        self.entries.insert((source, key.to_string()), detection);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(DatasetId, String), &Option<FaceDetection>)> {
        self.entries.iter()
    }

    pub fn to_sidecar(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .flexible(true)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for ((source, key), det) in &self.entries {
            let mut fields = vec![source.as_str().to_string(), key.clone()];
            match det {
                None => fields.push("none".into()),
                Some(d) => {
                    fields.push("ok".into());
                    let b = &d.bbox;
                    fields.extend([b.x, b.y, b.w, b.h, d.confidence].map(|v| v.to_string()));
                    if let Some(lm) = &d.landmarks {
                        for p in lm.points() {
                            fields.push(p.x.to_string());
                            fields.push(p.y.to_string());
                        }
                    }
                }
            }
            w.write_record(&fields).expect("memory write");
        }
        String::from_utf8(w.into_inner().expect("memory flush")).expect("utf-8 fields")
    }

    pub fn from_sidecar(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut cache = DetectionCache::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 1;
            let bad = |reason: String| Error::Sidecar { line, reason };
            let row = row.map_err(|e| bad(e.to_string()))?;
            if row.len() < 3 {
                return Err(bad("expected at least 3 fields".into()));
            }
            let source: DatasetId = row[0].trim().parse().map_err(bad)?;
            let key = row[1].to_string();
            let det = match row[2].trim() {
                "none" => None,
                "ok" => {
                    let nums: Vec<f64> = row
                        .iter()
                        .skip(3)
                        .map(|f| f.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(e.to_string()))?;
                    if !(nums.len() == 5 || nums.len() == 15) {
                        return Err(bad(format!(
                            "ok line needs 5 or 15 numbers, found {}",
                            nums.len()
                        )));
                    }
                    let landmarks = (nums.len() == 15).then(|| {
                        LandmarkSet::from_points(std::array::from_fn(|k| {
                            Point::new(nums[5 + 2 * k], nums[6 + 2 * k])
                        }))
                    });
                    let d = FaceDetection {
                        bbox: BoundingBox {
                            x: nums[0],
                            y: nums[1],
                            w: nums[2],
                            h: nums[3],
                        },
                        landmarks,
                        confidence: nums[4],
                    };
                    d.validate().map_err(bad)?;
                    Some(d)
                }
                other => return Err(bad(format!("unknown status {other:?}"))),
            };
            cache.insert(source, &key, det);
        }
        Ok(cache)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_sidecar(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_sidecar()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        -1e4f64..1e4
    }

    proptest! {
        #[test]
        fn sidecar_replay_is_bit_identical(
            x in finite(), y in finite(), w in 0.001f64..500.0, h in 0.001f64..500.0,
            conf in 0.0f64..=1.0, pts in proptest::collection::vec(finite(), 10),
            with_landmarks in any::<bool>(), key in "[a-z0-9/ ,\"]{1,12}",
        ) {
            let mut cache = DetectionCache::new();
            let landmarks = with_landmarks.then(|| LandmarkSet::from_points(
                std::array::from_fn(|k| Point::new(pts[2 * k], pts[2 * k + 1]))));
            cache.insert(DatasetId::Kdef, &key, Some(FaceDetection {
                bbox: BoundingBox { x, y, w, h }, landmarks, confidence: conf,
            }));
            cache.insert(DatasetId::Ferplus, &key, None);
            let back = DetectionCache::from_sidecar(&cache.to_sidecar()).unwrap();
            prop_assert_eq!(&back, &cache);
            prop_assert_eq!(back.to_sidecar(), cache.to_sidecar());
        }
    }

    #[test]
    fn parses_hand_written_lines() {
        let text = "# golden\nKDEF,AF01ANS.JPG,ok,1,2,30,40,0.99,5,6,20,6,12,15,7,25,18,25\nFERPLUS,row000003,none\nCKPLUS,x.png,ok,0,0,48,48,0.5\n";
        let c = DetectionCache::from_sidecar(text).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.get(DatasetId::Ferplus, "row000003"), Some(&None));
        let k = c.get(DatasetId::Kdef, "AF01ANS.JPG").unwrap().unwrap();
        assert_eq!(k.landmarks.unwrap().left_eye, Point::new(20.0, 6.0));
        assert!(c.get(DatasetId::Ckplus, "x.png").unwrap().unwrap().landmarks.is_none());
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in [
            "KDEF,a,maybe",
            "KDEF,a,ok,1,2,3",
            "KDEF,a,ok,1,2,0,4,0.5",
            "NOPE,a,none",
        ] {
            assert!(DetectionCache::from_sidecar(bad).is_err(), "{bad}");
        }
    }
}
