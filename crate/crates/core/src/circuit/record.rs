use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct RecordEntry {
    pub label: String,
    pub bit: u8,
    /// Born probability of `bit` given everything before it.
    pub probability: f64,
}

/// Ordered measurement outcomes of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementRecord {
    entries: Vec<RecordEntry>,
}

impl MeasurementRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits<S: Into<String>>(bits: impl IntoIterator<Item = (S, u8)>) -> Self {
        MeasurementRecord {
            entries: bits
                .into_iter()
                .map(|(label, bit)| RecordEntry {
                    label: label.into(),
                    bit,
                    probability: 1.0,
                })
                .collect(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, bit: u8, probability: f64) {
        self.entries.push(RecordEntry {
            label: label.into(),
            bit,
            probability,
        });
    }

    pub fn get(&self, label: &str) -> Option<u8> {
        self.entries
            .iter()
            .find(|e| e.label == label)
            .map(|e| e.bit)
    }

    pub fn entries(&self) -> &[RecordEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bits(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.bit).collect()
    }

    /// Product of the branch probabilities.
    pub fn probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).product()
    }

    /// Canonical `label=bit` key, space separated, used to compare outcome
    /// distributions across backends.
    pub fn outcome_key(&self) -> String {
        outcome_key(self.entries.iter().map(|e| (e.label.as_str(), e.bit)))
    }
}

pub(crate) fn outcome_key<'a>(bits: impl Iterator<Item = (&'a str, u8)>) -> String {
    bits.map(|(l, b)| format!("{l}={b}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for MeasurementRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.outcome_key())
    }
}
