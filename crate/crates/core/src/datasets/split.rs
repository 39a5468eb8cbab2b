use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::rng;

const SPLIT_STREAM: u64 = 0x5370_6c69_74;

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        let ok = all.iter().all(|r| r.is_finite() && *r >= 0.0)
            && ((self.train + self.val + self.test) - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidRatios(all))
        }
    }

    /// Group counts `(train, val, test)` for `groups` groups: validation and
    /// test take `floor(ratio · groups)`, train takes the remainder.
    pub fn group_counts(&self, groups: usize) -> (usize, usize, usize) {
        let floor = |r: f64| ((r * groups as f64) + 1e-9).floor() as usize;
        let val = floor(self.val).min(groups);
        let test = floor(self.test).min(groups - val);
        (groups - val - test, val, test)
    }
}

/// Uniform random group-aware split. Every variant of an original image
/// lands in the same partition; the assignment depends only on the group
/// order and `seed`.
pub fn split(manifest: &DatasetManifest, ratios: SplitRatios, seed: u64) -> Result<DatasetManifest> {
    ratios.validate()?;
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let mut groups = manifest.groups();
    let (_, n_val, n_test) = ratios.group_counts(groups.len());
    groups.shuffle(&mut rng::stream(seed, &[SPLIT_STREAM]));

    let assignment: HashMap<&str, Split> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let split = if i < n_val {
                Split::Val
            } else if i < n_val + n_test {
                Split::Test
            } else {
                Split::Train
            };
            (g.as_str(), split)
        })
        .collect();
    let splits: Vec<Split> = manifest
        .samples()
        .iter()
        .map(|s| assignment[s.group_id().as_str()])
        .collect();
    let mut out = manifest.clone();
    out.set_splits(splits);
    out.header.seed = Some(seed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{ImageSample, Variant};
    use crate::frame::GrayFrame;
    use crate::label::{DatasetId, EmotionLabel};
    use proptest::prelude::*;

    fn manifest(groups: usize, variants: &[Variant]) -> DatasetManifest {
        let mut samples = Vec::new();
        for g in 0..groups {
            for &v in variants {
                samples.push(ImageSample {
                    pixels: GrayFrame::filled(48, 48, 0),
                    label: EmotionLabel::from_index(g % 7).unwrap(),
                    source: DatasetId::Synthetic,
                    source_key: format!("g{g}"),
                    variant: v,
                    split: Split::Unassigned,
                });
            }
        }
        DatasetManifest::from_samples(samples).unwrap()
    }

    #[test]
    fn ten_groups_split_eight_one_one() {
        let m = split(&manifest(10, &[Variant::Original]), SplitRatios::default(), 3).unwrap();
        let sizes = m.split_sizes();
        assert_eq!(sizes[&Split::Train], 8);
        assert_eq!(sizes[&Split::Val], 1);
        assert_eq!(sizes[&Split::Test], 1);
    }

    #[test]
    fn rounding_rule_on_full_corpus_size() {
        assert_eq!(
            SplitRatios::default().group_counts(39_134),
            (31_308, 3_913, 3_913)
        );
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let m = manifest(3, &[Variant::Original]);
        let r = SplitRatios {
            train: 0.8,
            val: 0.1,
            test: 0.2,
        };
        assert!(matches!(split(&m, r, 0), Err(Error::InvalidRatios(_))));
        assert!(matches!(
            split(&DatasetManifest::default(), SplitRatios::default(), 0),
            Err(Error::EmptyManifest)
        ));
    }

    #[test]
    fn same_seed_same_assignment() {
        let m = manifest(50, &[Variant::Original]);
        let a = split(&m, SplitRatios::default(), 9).unwrap();
        let b = split(&m, SplitRatios::default(), 9).unwrap();
        let c = split(&m, SplitRatios::default(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn no_group_spans_two_splits(groups in 1usize..60, seed in any::<u64>()) {
            let m = manifest(groups, &[Variant::Original, Variant::Aligned, Variant::Cropped]);
            let s = split(&m, SplitRatios::default(), seed).unwrap();
            // from_samples re-checks the group invariant
            s.validate().unwrap();
            let total: usize = s.split_sizes().values().sum();
            prop_assert_eq!(total, m.len());
            prop_assert!(!s.split_sizes().contains_key(&Split::Unassigned));
        }
    }
}
