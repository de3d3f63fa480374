//! POPE yes/no probing scores. "Yes" is the positive class.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Deserializer, Serialize};

use super::{ratio, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YesNo {
    #[serde(alias = "Yes", alias = "YES")]
    Yes,
    #[serde(alias = "No", alias = "NO")]
    No,
}

impl std::fmt::Display for YesNo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            YesNo::Yes => "yes",
            YesNo::No => "no",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopeSetting {
    #[serde(alias = "Random")]
    Random,
    #[serde(alias = "Popular")]
    Popular,
    #[serde(alias = "Adversarial")]
    Adversarial,
}

impl std::fmt::Display for PopeSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PopeSetting::Random => "random",
            PopeSetting::Popular => "popular",
            PopeSetting::Adversarial => "adversarial",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopeSample {
    #[serde(deserialize_with = "string_or_number")]
    pub question_id: String,
    pub image_ref: String,
    pub question: String,
    pub label: YesNo,
    pub setting: PopeSetting,
}

/// Accepts `"17"` or `17` for identifier fields.
pub fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        S(String),
        N(serde_json::Number),
    }
    Ok(match Id::deserialize(d)? {
        Id::S(s) => s,
        Id::N(n) => n.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopeReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub yes_rate: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl PopeReport {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let total = tp + fp + fn_ + tn;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            accuracy: ratio(tp + tn, total),
            precision,
            recall,
            f1,
            yes_rate: ratio(tp + fp, total),
            tp,
            fp,
            fn_,
            tn,
        }
    }

    /// Builds the confusion matrix from (prediction, label) pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (YesNo, YesNo)>) -> Self {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for pair in pairs {
            match pair {
                (YesNo::Yes, YesNo::Yes) => tp += 1,
                (YesNo::Yes, YesNo::No) => fp += 1,
                (YesNo::No, YesNo::Yes) => fn_ += 1,
                (YesNo::No, YesNo::No) => tn += 1,
            }
        }
        Self::from_counts(tp, fp, fn_, tn)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// `Yes` iff a whole-word "yes" appears before any whole-word "no".
pub fn normalize_yes_no(model_text: &str) -> YesNo {
    let lower = model_text.to_lowercase();
    for word in lower.split(|c: char| !c.is_alphanumeric()) {
        match word {
            "yes" => return YesNo::Yes,
            "no" => return YesNo::No,
            _ => {}
        }
    }
    YesNo::No
}

fn pair_up<'a>(
    predictions: &[(String, YesNo)],
    samples: &'a [PopeSample],
) -> Result<Vec<(YesNo, &'a PopeSample)>, MetricsError> {
    let mut by_id: HashMap<&str, YesNo> = HashMap::with_capacity(predictions.len());
    for (id, answer) in predictions {
        if by_id.insert(id.as_str(), *answer).is_some() {
            return Err(MetricsError::IdMismatch(format!("duplicate prediction {id}")));
        }
    }
    let mut seen = HashMap::with_capacity(samples.len());
    let mut pairs = Vec::with_capacity(samples.len());
    for sample in samples {
        if seen.insert(sample.question_id.as_str(), ()).is_some() {
            return Err(MetricsError::IdMismatch(format!(
                "duplicate sample {}",
                sample.question_id
            )));
        }
        let prediction = by_id
            .get(sample.question_id.as_str())
            .ok_or_else(|| MetricsError::IdMismatch(format!("no prediction for {}", sample.question_id)))?;
        pairs.push((*prediction, sample));
    }
    if let Some((id, _)) = predictions.iter().find(|(id, _)| !seen.contains_key(id.as_str())) {
        return Err(MetricsError::IdMismatch(format!("prediction {id} has no sample")));
    }
    Ok(pairs)
}

/// Scores predictions against samples matched one-to-one on `question_id`.
pub fn pope_scores(predictions: &[(String, YesNo)], samples: &[PopeSample]) -> Result<PopeReport, MetricsError> {
    let pairs = pair_up(predictions, samples)?;
    Ok(PopeReport::from_pairs(pairs.into_iter().map(|(p, s)| (p, s.label))))
}

/// [`pope_scores`] split by sampling setting.
pub fn pope_scores_by_setting(
    predictions: &[(String, YesNo)],
    samples: &[PopeSample],
) -> Result<BTreeMap<PopeSetting, PopeReport>, MetricsError> {
    let pairs = pair_up(predictions, samples)?;
    let mut grouped: BTreeMap<PopeSetting, Vec<(YesNo, YesNo)>> = BTreeMap::new();
    for (prediction, sample) in pairs {
        grouped
            .entry(sample.setting)
            .or_default()
            .push((prediction, sample.label));
    }
    Ok(grouped
        .into_iter()
        .map(|(setting, pairs)| (setting, PopeReport::from_pairs(pairs)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn yes_no_normalization() {
        assert_eq!(normalize_yes_no("Yes, there is a dog."), YesNo::Yes);
        assert_eq!(normalize_yes_no("No."), YesNo::No);
        assert_eq!(normalize_yes_no("There might be one."), YesNo::No);
        assert_eq!(normalize_yes_no("No, but yes a cat"), YesNo::No);
        assert_eq!(normalize_yes_no("Eyes open: yes"), YesNo::Yes);
        assert_eq!(normalize_yes_no("Nobody knows, yes"), YesNo::Yes);
        assert_eq!(normalize_yes_no(""), YesNo::No);
    }

    fn sample(id: &str, label: YesNo) -> PopeSample {
        PopeSample {
            question_id: id.into(),
            image_ref: "img".into(),
            question: "Is there a dog in the image?".into(),
            label,
            setting: PopeSetting::Random,
        }
    }

    #[test]
    fn sample_json() {
        let s: PopeSample = serde_json::from_str(
            r#"{"question_id":3,"image_ref":"a.jpg","question":"Is there a cat?","label":"Yes","setting":"adversarial"}"#,
        )
        .unwrap();
        assert_eq!(s.question_id, "3");
        assert_eq!(s.label, YesNo::Yes);
        assert_eq!(s.setting, PopeSetting::Adversarial);
    }

    #[test]
    fn hand_built_confusion_matrix() {
        let r = PopeReport::from_counts(40, 10, 10, 40);
        for v in [r.accuracy, r.precision, r.recall, r.f1] {
            assert!((v - 0.8).abs() < 1e-9);
        }
        assert!((r.yes_rate - 0.5).abs() < 1e-9);
    }

    #[test]
    fn degenerate_denominators() {
        let r = PopeReport::from_counts(0, 0, 0, 0);
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1, r.yes_rate),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
        let all_no = PopeReport::from_counts(0, 0, 5, 5);
        assert_eq!((all_no.precision, all_no.f1, all_no.yes_rate), (0.0, 0.0, 0.0));
    }

    #[test]
    fn id_alignment() {
        let samples = vec![sample("1", YesNo::Yes), sample("2", YesNo::No)];
        let ok = vec![("2".to_string(), YesNo::No), ("1".to_string(), YesNo::Yes)];
        assert_eq!(pope_scores(&ok, &samples).unwrap().accuracy, 1.0);

        let missing = vec![("1".to_string(), YesNo::Yes)];
        assert!(matches!(
            pope_scores(&missing, &samples),
            Err(MetricsError::IdMismatch(_))
        ));
        let extra = vec![
            ("1".to_string(), YesNo::Yes),
            ("2".to_string(), YesNo::No),
            ("3".to_string(), YesNo::No),
        ];
        assert!(matches!(
            pope_scores(&extra, &samples),
            Err(MetricsError::IdMismatch(_))
        ));
        let dup = vec![("1".to_string(), YesNo::Yes), ("1".to_string(), YesNo::No)];
        assert!(matches!(pope_scores(&dup, &samples), Err(MetricsError::IdMismatch(_))));
    }

    #[test]
    fn per_setting_split() {
        let mut samples = vec![sample("1", YesNo::Yes), sample("2", YesNo::No)];
        samples[1].setting = PopeSetting::Popular;
        let preds = vec![("1".to_string(), YesNo::Yes), ("2".to_string(), YesNo::Yes)];
        let by = pope_scores_by_setting(&preds, &samples).unwrap();
        assert_eq!(by[&PopeSetting::Random].tp, 1);
        assert_eq!(by[&PopeSetting::Popular].fp, 1);
    }

    proptest! {
        #[test]
        fn f1_between_precision_and_recall(tp in 1u64..200, fp in 0u64..200, fn_ in 0u64..200, tn in 0u64..200) {
            let r = PopeReport::from_counts(tp, fp, fn_, tn);
            let lo = r.precision.min(r.recall);
            let hi = r.precision.max(r.recall);
            prop_assert!(r.f1 >= lo - 1e-12 && r.f1 <= hi + 1e-12);
            for v in [r.accuracy, r.precision, r.recall, r.f1, r.yes_rate] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
