use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::{Error, Result};

/// Trimmed, case-folded label with internal whitespace collapsed.
pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct OptionSet {
    labels: Vec<String>,
    bits: Vec<u8>,
}

/// Static mapping from response-option sets to per-option bits.
///
/// Each option set is stored under a key and is also reachable through its
/// ordered, normalized label list.
#[derive(Debug, Clone, Default)]
pub struct BinarizationMap {
    sets: BTreeMap<String, OptionSet>,
    by_labels: HashMap<Vec<String>, String>,
}

// Most frequent option sets and their codings.
const BUILTIN: &[(&[&str], &[u8])] = &[
    (&["yes", "no"], &[1, 0]),
    (
        &[
            "strongly agree",
            "agree",
            "neither agree nor disagree",
            "disagree",
            "strongly disagree",
        ],
        &[1, 1, 0, 0, 0],
    ),
    (
        &["strongly agree", "agree", "disagree", "strongly disagree"],
        &[1, 1, 0, 0],
    ),
    (&["mentioned", "not mentioned"], &[1, 0]),
    (
        &["very likely", "somewhat likely", "not very likely", "not at all likely"],
        &[1, 1, 0, 0],
    ),
    (&["too little", "about right", "too much"], &[0, 0, 1]),
    (&["true", "false"], &[1, 0]),
    (
        &[
            "strongly agree",
            "agree",
            "not agree/disagree",
            "disagree",
            "strongly disagree",
        ],
        &[1, 1, 0, 0, 0],
    ),
    (&["agree", "disagree"], &[1, 0]),
    (
        &["strongly agree", "agree", "neither", "disagree", "strongly disagree"],
        &[1, 1, 0, 0, 0],
    ),
    (&["often", "sometimes", "rarely", "never"], &[1, 1, 0, 0]),
    (
        &[
            "agree strongly",
            "agree",
            "neither agree nor disagree",
            "disagree",
            "disagree strongly",
        ],
        &[1, 1, 0, 0, 0],
    ),
    (
        &["not at all", "1 or 2 times", "3-5 times", "6 or more times"],
        &[0, 0, 1, 1],
    ),
    (
        &[
            "1 most desirable",
            "3 most desirable",
            "not mentioned",
            "3 least desirable",
            "1 least desirable",
        ],
        &[1, 1, 0, 0, 0],
    ),
    (
        &[
            "strongly favor",
            "favor",
            "neither favor nor oppose",
            "oppose",
            "strongly oppose",
        ],
        &[1, 1, 0, 0, 0],
    ),
    (&["never", "1-2 times", "3-5 times", "more than 5 times"], &[0, 0, 1, 1]),
    (
        &["strongly agree", "agree", "disagree, or", "strongly disagree?"],
        &[1, 1, 0, 0],
    ),
    (
        &[
            "definitely allowed",
            "probably allowed",
            "prob not allowed",
            "definitely not allowed",
        ],
        &[1, 1, 0, 0],
    ),
    (
        &["very likely", "somewhat likely", "somewhat unlikely", "very unlikely"],
        &[1, 1, 0, 0],
    ),
    (
        &["very true", "somewhat true", "not too true", "not at all true"],
        &[1, 1, 0, 0],
    ),
    (
        &[
            "definitely should",
            "probably should",
            "probably should not",
            "definitely should not",
        ],
        &[1, 1, 0, 0],
    ),
    (
        &[
            "like very much",
            "like it",
            "mixed feelings",
            "dislike it",
            "dislike very much",
        ],
        &[1, 1, 0, 0, 0],
    ),
    (
        &[
            "spend much more",
            "spend more",
            "spend same",
            "spend less",
            "spend much less",
        ],
        &[1, 1, 0, 0, 0],
    ),
    (
        &[
            "very important",
            "important",
            "somewhat important",
            "not at all important",
        ],
        &[1, 1, 0, 0],
    ),
    (
        &[
            "very likely",
            "somewhat likely",
            "mixed",
            "somewhat unlikely",
            "very unlikely",
        ],
        &[1, 1, 0, 0, 0],
    ),
    (
        &[
            "essential",
            "very important",
            "fairly important",
            "not very important",
            "not important at all",
        ],
        &[1, 1, 1, 0, 0],
    ),
    (&["did", "didn't"], &[1, 0]),
    (
        &[
            "strongly agree",
            "somewhat agree",
            "somewhat disagree",
            "strongly disagree",
        ],
        &[1, 1, 0, 0],
    ),
    (
        &[
            "definitely willing",
            "probably willing",
            "probably unwilling",
            "definitely unwilling",
        ],
        &[1, 1, 0, 0],
    ),
    (&["should", "should not"], &[1, 0]),
    (
        &[
            "strongly agree",
            "agree somewhat",
            "disagree somewhat",
            "strongly disagree",
        ],
        &[1, 1, 0, 0],
    ),
    (
        &[
            "definitely expect",
            "probably expect",
            "probably not expect",
            "definitely not expect",
        ],
        &[1, 1, 0, 0],
    ),
    (
        &[
            "a great deal of influence",
            "a fair amount",
            "a little influence",
            "none at all",
        ],
        &[1, 1, 0, 0],
    ),
    (
        &["strongly agree", "agree", "uncertain", "disagree", "strongly disagree"],
        &[1, 1, 0, 0, 0],
    ),
    (&["a reason", "not a reason"], &[1, 0]),
    (&["major reason", "minor reason", "not a reason"], &[1, 0, 0]),
    (
        &[
            "no",
            "yes, respondent",
            "yes, someone respondent knows",
            "yes, both respondent and someone respondent knows",
        ],
        &[0, 1, 1, 1],
    ),
    (
        &["1 not at all effective", "2", "3", "4", "5 extremely effective"],
        &[0, 0, 0, 1, 1],
    ),
    (&["remove", "not remove"], &[1, 0]),
    (&["a great deal", "only some", "hardly any"], &[1, 0, 0]),
    (
        &["most important", "2nd most imp.", "3rd most imp.", "not chosen"],
        &[1, 1, 0, 0],
    ),
    (
        &["very likely", "somewhat likely", "not too likely", "not likely at all"],
        &[1, 1, 0, 0],
    ),
    (
        &[
            "definitely true",
            "probably true",
            "probably not true",
            "definitely not true",
        ],
        &[1, 1, 0, 0],
    ),
    (&["allowed", "not allowed"], &[1, 0]),
    (&["no", "yes"], &[0, 1]),
    (&["too much", "about the right amount", "too little"], &[1, 0, 0]),
    (
        &[
            "extremely likely",
            "somewhat likely",
            "not too likely",
            "not likely at all",
        ],
        &[1, 1, 0, 0],
    ),
    (
        &[
            "extremely dangerous",
            "very dangerous",
            "somewhat dangerous",
            "not very dangerous",
            "not dangerous",
        ],
        &[1, 1, 1, 0, 0],
    ),
    (&["excellent", "very good", "good", "fair", "poor"], &[1, 1, 1, 0, 0]),
    (
        &[
            "many times a day",
            "every day",
            "most days",
            "some days",
            "once in a while",
            "never or almost never",
        ],
        &[1, 1, 1, 0, 0, 0],
    ),
];

impl BinarizationMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// The fifty most common option sets of the General Social Survey, keyed by
    /// their labels joined with `|`.
    pub fn builtin() -> Self {
        let mut map = Self::new();
        for (labels, bits) in BUILTIN {
            let key = labels.join("|");
            map.insert(&key, labels.iter().copied().zip(bits.iter().copied()))
                .expect("builtin table is consistent");
        }
        map
    }

    /// Adds (or extends) the option set `key` with `(label, bit)` pairs in order.
    pub fn insert<'a>(&mut self, key: &str, options: impl IntoIterator<Item = (&'a str, u8)>) -> Result<()> {
        let key = normalize_label(key);
        let mut set = self.sets.remove(&key).unwrap_or(OptionSet {
            labels: Vec::new(),
            bits: Vec::new(),
        });
        if let Some(old) = self.by_labels.iter().find(|(_, k)| **k == key).map(|(l, _)| l.clone()) {
            self.by_labels.remove(&old);
        }
        for (label, bit) in options {
            if bit > 1 {
                return Err(Error::Format(format!("bit {bit} for label {label:?} is not 0 or 1")));
            }
            let label = normalize_label(label);
            match set.labels.iter().position(|l| *l == label) {
                Some(i) if set.bits[i] != bit => {
                    return Err(Error::Format(format!(
                        "label {label:?} in option set {key:?} mapped to both 0 and 1"
                    )))
                }
                Some(_) => {}
                None => {
                    set.labels.push(label);
                    set.bits.push(bit);
                }
            }
        }
        self.by_labels.insert(set.labels.clone(), key.clone());
        self.sets.insert(key, set);
        Ok(())
    }

    /// Loads `option_set_key,option_label,bit` rows.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let mut map = Self::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            if row.len() < 3 {
                return Err(Error::Parse {
                    line,
                    message: "expected option_set_key,option_label,bit".into(),
                });
            }
            let bit: u8 = match row[2].trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("bit {other:?} is not 0 or 1"),
                    })
                }
            };
            map.insert(&row[0], [(&row[1], bit)])?;
        }
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Looks up `label` in the set stored under `key`. A key that is not
    /// registered is also tried as a `|`-separated label list.
    pub fn lookup(&self, key: &str, label: &str) -> Result<u8> {
        let norm = normalize_label(key);
        let set = match self.sets.get(&norm) {
            Some(s) => s,
            None => {
                let labels: Vec<String> = key.split('|').map(normalize_label).collect();
                self.by_labels
                    .get(&labels)
                    .and_then(|k| self.sets.get(k))
                    .ok_or(Error::UnmappedOptionSet(labels))?
            }
        };
        Self::bit_in(set, label, key)
    }

    fn bit_in(set: &OptionSet, label: &str, key: &str) -> Result<u8> {
        let label_n = normalize_label(label);
        set.labels
            .iter()
            .position(|l| *l == label_n)
            .map(|i| set.bits[i])
            .ok_or_else(|| Error::UnknownLabel {
                label: label.to_string(),
                option_set: key.to_string(),
            })
    }
}

/// Maps `raw_label` to its bit within the ordered option set `option_set`.
pub fn apply_binarization<S: AsRef<str>>(raw_label: &str, option_set: &[S], map: &BinarizationMap) -> Result<u8> {
    let labels: Vec<String> = option_set.iter().map(|s| normalize_label(s.as_ref())).collect();
    let key = map
        .by_labels
        .get(&labels)
        .ok_or_else(|| Error::UnmappedOptionSet(labels.clone()))?;
    BinarizationMap::bit_in(&map.sets[key], raw_label, &labels.join("|"))
}
