use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const NUM_CLASSES: usize = 7;

/// The seven basic emotions in canonical index order.
///
/// The index order is shared by manifests, confusion-matrix axes and
/// reports. Contempt is never representable here; loaders see it only as a
/// [`RawLabel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EmotionLabel {
    Angry = 0,
    Disgust = 1,
    Fear = 2,
    Happy = 3,
    Neutral = 4,
    Sad = 5,
    Surprise = 6,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_CLASSES] = [
        EmotionLabel::Angry,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happy,
        EmotionLabel::Neutral,
        EmotionLabel::Sad,
        EmotionLabel::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Angry => "Angry",
            EmotionLabel::Disgust => "Disgust",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::Happy => "Happy",
            EmotionLabel::Neutral => "Neutral",
            EmotionLabel::Sad => "Sad",
            EmotionLabel::Surprise => "Surprise",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Label as seen by a loader before harmonization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RawLabel {
    Emotion(EmotionLabel),
    Contempt,
    Unknown,
}

impl RawLabel {
    /// Parses the emotion vocabularies used by the source datasets
    /// (`anger`/`angry`, `happiness`/`happy`, `sadness`/`sad`, ...).
    pub fn parse(name: &str) -> Option<Self> {
        let label = match name.trim().to_ascii_lowercase().as_str() {
            "angry" | "anger" => RawLabel::Emotion(EmotionLabel::Angry),
            "disgust" | "disgusted" => RawLabel::Emotion(EmotionLabel::Disgust),
            "fear" | "afraid" | "fearful" => RawLabel::Emotion(EmotionLabel::Fear),
            "happy" | "happiness" => RawLabel::Emotion(EmotionLabel::Happy),
            "neutral" => RawLabel::Emotion(EmotionLabel::Neutral),
            "sad" | "sadness" => RawLabel::Emotion(EmotionLabel::Sad),
            "surprise" | "surprised" => RawLabel::Emotion(EmotionLabel::Surprise),
            "contempt" => RawLabel::Contempt,
            "unknown" => RawLabel::Unknown,
            _ => return None,
        };
        Some(label)
    }

    pub fn canonical(self) -> Option<EmotionLabel> {
        match self {
            RawLabel::Emotion(label) => Some(label),
            _ => None,
        }
    }
}

impl fmt::Display for RawLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawLabel::Emotion(label) => label.fmt(f),
            RawLabel::Contempt => f.write_str("Contempt"),
            RawLabel::Unknown => f.write_str("Unknown"),
        }
    }
}

/// Source dataset of a sample. `Synthetic` marks generated desk-scale data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DatasetId {
    Ferplus,
    Ckplus,
    Kdef,
    Synthetic,
}

impl DatasetId {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Ferplus => "FERPLUS",
            DatasetId::Ckplus => "CKPLUS",
            DatasetId::Kdef => "KDEF",
            DatasetId::Synthetic => "SYNTHETIC",
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FERPLUS" | "FER+" => Ok(DatasetId::Ferplus),
            "CKPLUS" | "CK+" => Ok(DatasetId::Ckplus),
            "KDEF" => Ok(DatasetId::Kdef),
            "SYNTHETIC" => Ok(DatasetId::Synthetic),
            other => Err(format!("unknown dataset id {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_is_fixed() {
        let names: Vec<_> = EmotionLabel::ALL.iter().map(|l| l.name()).collect();
        assert_eq!(
            names,
            ["Angry", "Disgust", "Fear", "Happy", "Neutral", "Sad", "Surprise"]
        );
        for (i, label) in EmotionLabel::ALL.iter().enumerate() {
            assert_eq!(label.index(), i);
            assert_eq!(EmotionLabel::from_index(i), Some(*label));
        }
        assert_eq!(EmotionLabel::from_index(7), None);
    }

    #[test]
    fn contempt_is_not_canonical() {
        assert_eq!(RawLabel::parse("contempt"), Some(RawLabel::Contempt));
        assert_eq!(RawLabel::Contempt.canonical(), None);
        assert_eq!(
            RawLabel::parse("Happiness").and_then(RawLabel::canonical),
            Some(EmotionLabel::Happy)
        );
        assert_eq!(RawLabel::parse("bored"), None);
    }

    #[test]
    fn dataset_id_round_trips() {
        for id in [
            DatasetId::Ferplus,
            DatasetId::Ckplus,
            DatasetId::Kdef,
            DatasetId::Synthetic,
        ] {
            assert_eq!(id.as_str().parse::<DatasetId>().unwrap(), id);
        }
    }
}
