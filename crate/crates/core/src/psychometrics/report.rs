//! Descriptive tables: response lengths and correctness proportions per
//! question, in a shape that plots directly.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::PsychometricsError;
use crate::domain::{count_words, StudentResponse};
use super::ScoreMatrix;
use crate::grading::{GradingOutcome, GradingPolicy, GradingRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseSummary {
    pub question_id: String,
    pub word_count: usize,
}

impl From<&StudentResponse> for ResponseSummary {
    fn from(r: &StudentResponse) -> Self {
        ResponseSummary {
            question_id: r.question_id.clone(),
            word_count: count_words(&r.text),
        }
    }
}

impl From<&GradingRecord> for ResponseSummary {
    fn from(r: &GradingRecord) -> Self {
        ResponseSummary {
            question_id: r.response_ref.question_id.clone(),
            word_count: count_words(&r.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSummary {
    pub question_id: String,
    pub policy: GradingPolicy,
    pub correct: bool,
}

impl From<&GradingOutcome> for OutcomeSummary {
    fn from(o: &GradingOutcome) -> Self {
        OutcomeSummary {
            question_id: o.response_ref.question_id.clone(),
            policy: o.policy,
            correct: o.correct,
        }
    }
}

impl From<&GradingRecord> for OutcomeSummary {
    fn from(r: &GradingRecord) -> Self {
        OutcomeSummary {
            question_id: r.response_ref.question_id.clone(),
            policy: r.policy,
            correct: r.correct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthRow {
    pub question_id: String,
    pub words: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessRow {
    pub question_id: String,
    pub policy: GradingPolicy,
    pub correct: usize,
    pub incorrect: usize,
    pub proportion_correct: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportTables {
    pub lengths: Vec<LengthRow>,
    pub correctness: Vec<CorrectnessRow>,
}

impl ReportTables {
    /// Word-count histogram of one question.
    pub fn histogram(&self, question_id: &str) -> BTreeMap<usize, usize> {
        self.lengths
            .iter()
            .filter(|r| r.question_id == question_id)
            .map(|r| (r.words, r.count))
            .collect()
    }

    pub fn write_lengths_csv<W: Write>(&self, writer: W) -> Result<(), PsychometricsError> {
        write_rows(writer, &self.lengths)
    }

    pub fn write_correctness_csv<W: Write>(&self, writer: W) -> Result<(), PsychometricsError> {
        write_rows(writer, &self.correctness)
    }
}

fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<(), PsychometricsError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| PsychometricsError::Csv(e.to_string()))?;
    Ok(())
}

pub fn descriptive_report<R, O>(responses: R, outcomes: O) -> ReportTables
where
    R: IntoIterator<Item = ResponseSummary>,
    O: IntoIterator<Item = OutcomeSummary>,
{
    let mut lengths: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for r in responses {
        *lengths.entry((r.question_id, r.word_count)).or_default() += 1;
    }
    let mut tallies: BTreeMap<(String, GradingPolicy), (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        let t = tallies.entry((o.question_id, o.policy)).or_default();
        if o.correct {
            t.0 += 1;
        } else {
            t.1 += 1;
        }
    }
    ReportTables {
        lengths: lengths
            .into_iter()
            .map(|((question_id, words), count)| LengthRow {
                question_id,
                words,
                count,
            })
            .collect(),
        correctness: tallies
            .into_iter()
            .map(|((question_id, policy), (correct, incorrect))| CorrectnessRow {
                question_id,
                policy,
                correct,
                incorrect,
                proportion_correct: correct as f64 / (correct + incorrect) as f64,
            })
            .collect(),
    }
}

/// Student-by-question matrix of one policy's scores. A student's cell is
/// the best partial score over their attempts; questions they never
/// answered stay unobserved. Rows and columns are sorted by id.
pub fn score_matrix(records: &[GradingRecord], policy: GradingPolicy) -> Result<ScoreMatrix, PsychometricsError> {
    let mut best: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.policy == policy) {
        let key = (r.response_ref.student_id.as_str(), r.response_ref.question_id.as_str());
        let cell = best.entry(key).or_insert(r.partial_score);
        *cell = cell.max(r.partial_score);
    }
    let students: Vec<String> = best
        .keys()
        .map(|(s, _)| s.to_string())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let items: Vec<String> = best
        .keys()
        .map(|(_, q)| q.to_string())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut m = ScoreMatrix::new(students.clone(), items.clone())?;
    for ((s, q), score) in best {
        let j = students.binary_search_by(|x| x.as_str().cmp(s)).expect("collected above");
        let i = items.binary_search_by(|x| x.as_str().cmp(q)).expect("collected above");
        m.set(j, i, Some(score))?;
    }
    Ok(m)
}
