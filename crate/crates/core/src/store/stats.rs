use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::dataset::SurveyDataset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    pub variable: String,
    pub year: i32,
    pub count: usize,
    pub positive_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub individuals: usize,
    pub questions: usize,
    pub years: usize,
    pub records: usize,
    /// `records / (individuals · questions · years)`.
    pub sparsity: f64,
    pub cells: Vec<CellStats>,
    /// Responses per question across all years.
    pub question_counts: BTreeMap<String, usize>,
    /// Responses per year across all questions.
    pub year_counts: BTreeMap<i32, usize>,
}

impl DatasetStats {
    /// Cell lookup; absent cells report a zero count.
    pub fn cell(&self, variable: &str, year: i32) -> CellStats {
        self.cells
            .iter()
            .find(|c| c.variable == variable && c.year == year)
            .cloned()
            .unwrap_or(CellStats {
                variable: variable.to_string(),
                year,
                count: 0,
                positive_share: f64::NAN,
            })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variable", "year", "count", "positive_share"])?;
        for c in &self.cells {
            w.write_record([
                c.variable.clone(),
                c.year.to_string(),
                c.count.to_string(),
                c.positive_share.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn dataset_stats(ds: &SurveyDataset) -> DatasetStats {
    let mut cells: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut question_counts = BTreeMap::new();
    let mut year_counts = BTreeMap::new();
    for r in ds.responses() {
        let e = cells.entry((r.question, r.year)).or_default();
        e.0 += 1;
        e.1 += r.value as usize;
        *question_counts.entry(ds.variable(r.question).to_string()).or_insert(0) += 1;
        *year_counts.entry(ds.year_value(r.year)).or_insert(0) += 1;
    }
    let denom = (ds.num_individuals() * ds.num_questions() * ds.num_years()) as f64;
    DatasetStats {
        individuals: ds.num_individuals(),
        questions: ds.num_questions(),
        years: ds.num_years(),
        records: ds.len(),
        sparsity: if denom > 0.0 { ds.len() as f64 / denom } else { 0.0 },
        cells: cells
            .into_iter()
            .map(|((q, y), (count, pos))| CellStats {
                variable: ds.variable(q).to_string(),
                year: ds.year_value(y),
                count,
                positive_share: pos as f64 / count as f64,
            })
            .collect(),
        question_counts,
        year_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::ResponseRecord;

    fn sample() -> SurveyDataset {
        let rec = |year, key, var: &str, bit, weight| ResponseRecord {
            year,
            respondent_key: key,
            variable: var.into(),
            question_text: "...".into(),
            binarized: bit,
            weight,
        };
        SurveyDataset::from_records(vec![
            rec(1994, 19940001, "nomeat", 1, 1.0),
            rec(1994, 19940002, "nomeat", 0, 0.8),
            rec(1996, 19960001, "homosex", 1, 1.2),
        ])
        .unwrap()
    }

    #[test]
    fn sparsity_and_cells() {
        let s = dataset_stats(&sample());
        assert_eq!(s.sparsity, 0.25);
        let c = s.cell("nomeat", 1994);
        assert_eq!(c.count, 2);
        assert_eq!(c.positive_share, 0.5);
        assert_eq!(s.cell("homosex", 1994).count, 0);
    }
}
