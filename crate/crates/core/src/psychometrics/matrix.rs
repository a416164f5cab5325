use std::collections::HashSet;
use std::io::{Read, Write};

use super::PsychometricsError;

/// Students × items matrix of fractional scores in `[0, 1]`.
///
/// Cells are stored row-major (one row per student). A `None` cell was not
/// observed, which is the usual case when each student sees only a random
/// subset of the items.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    students: Vec<String>,
    items: Vec<String>,
    cells: Vec<Option<f64>>,
}

impl ScoreMatrix {
    pub fn new(students: Vec<String>, items: Vec<String>) -> Result<Self, PsychometricsError> {
        check_unique("student", &students)?;
        check_unique("item", &items)?;
        let cells = vec![None; students.len() * items.len()];
        Ok(ScoreMatrix {
            students,
            items,
            cells,
        })
    }

    /// Builds a fully observed matrix from row-major scores.
    pub fn from_dense(
        students: Vec<String>,
        items: Vec<String>,
        scores: &[f64],
    ) -> Result<Self, PsychometricsError> {
        let mut m = Self::new(students, items)?;
        if scores.len() != m.cells.len() {
            return Err(PsychometricsError::Shape {
                expected: m.cells.len(),
                found: scores.len(),
            });
        }
        for (idx, &s) in scores.iter().enumerate() {
            m.set(idx / m.items.len(), idx % m.items.len(), Some(s))?;
        }
        Ok(m)
    }

    pub fn students(&self) -> &[String] {
        &self.students
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n_students(&self) -> usize {
        self.students.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn get(&self, student: usize, item: usize) -> Option<f64> {
        self.cells[student * self.items.len() + item]
    }

    pub fn set(
        &mut self,
        student: usize,
        item: usize,
        score: Option<f64>,
    ) -> Result<(), PsychometricsError> {
        if let Some(s) = score {
            if !(0.0..=1.0).contains(&s) {
                return Err(PsychometricsError::ScoreOutOfRange {
                    student: self.students[student].clone(),
                    item: self.items[item].clone(),
                    score: s,
                });
            }
        }
        let n_items = self.items.len();
        self.cells[student * n_items + item] = score;
        Ok(())
    }

    pub fn row(&self, student: usize) -> &[Option<f64>] {
        let n = self.items.len();
        &self.cells[student * n..(student + 1) * n]
    }

    pub fn observed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Applies `f` to every observed score.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Result<Self, PsychometricsError> {
        let mut out = self.clone();
        for idx in 0..out.cells.len() {
            if let Some(s) = self.cells[idx] {
                out.set(idx / self.items.len(), idx % self.items.len(), Some(f(s)))?;
            }
        }
        Ok(out)
    }

    /// All-or-nothing version of the matrix: 1 where the score is at least
    /// `threshold`, else 0.
    pub fn thresholded(&self, threshold: f64) -> Self {
        let mut out = self.clone();
        for c in out.cells.iter_mut().flatten() {
            *c = if *c >= threshold { 1.0 } else { 0.0 };
        }
        out
    }

    /// Mean observed score per student (`None` for students with no data).
    pub fn student_means(&self) -> Vec<Option<f64>> {
        (0..self.n_students())
            .map(|j| mean(self.row(j).iter().flatten().copied()))
            .collect()
    }

    pub fn item_means(&self) -> Vec<Option<f64>> {
        (0..self.n_items())
            .map(|i| mean((0..self.n_students()).filter_map(|j| self.get(j, i))))
            .collect()
    }

    /// Checks the preconditions for fitting: at least one observation
    /// overall, per student and per item.
    pub fn check_fittable(&self) -> Result<(), PsychometricsError> {
        if self.observed_count() == 0 {
            return Err(PsychometricsError::EmptyMask);
        }
        if let Some(j) = (0..self.n_students()).find(|&j| self.row(j).iter().all(Option::is_none)) {
            return Err(PsychometricsError::Unobserved {
                kind: "student",
                id: self.students[j].clone(),
            });
        }
        if let Some(i) =
            (0..self.n_items()).find(|&i| (0..self.n_students()).all(|j| self.get(j, i).is_none()))
        {
            return Err(PsychometricsError::Unobserved {
                kind: "item",
                id: self.items[i].clone(),
            });
        }
        Ok(())
    }

    /// Reads the CSV layout: a header row of item ids after a leading
    /// student-id column, then one row per student. Blank cells are
    /// unobserved.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, PsychometricsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(PsychometricsError::Csv(
                "header needs a student column and at least one item".into(),
            ));
        }
        let items: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut students = Vec::new();
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let student = record.get(0).unwrap_or_default().to_string();
            if student.is_empty() {
                return Err(PsychometricsError::Csv(format!(
                    "row {}: empty student id",
                    line + 2
                )));
            }
            let mut row = Vec::with_capacity(items.len());
            for (i, _) in items.iter().enumerate() {
                let cell = record.get(i + 1).unwrap_or("");
                if cell.is_empty() {
                    row.push(None);
                } else {
                    let v: f64 = cell.parse().map_err(|_| {
                        PsychometricsError::Csv(format!(
                            "row {}, column {}: `{cell}` is not a number",
                            line + 2,
                            items[i]
                        ))
                    })?;
                    row.push(Some(v));
                }
            }
            students.push(student);
            rows.push(row);
        }
        let mut m = Self::new(students, items)?;
        for (j, row) in rows.into_iter().enumerate() {
            for (i, cell) in row.into_iter().enumerate() {
                m.set(j, i, cell)?;
            }
        }
        Ok(m)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PsychometricsError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["student_id".to_string()];
        header.extend(self.items.iter().cloned());
        w.write_record(&header)?;
        for j in 0..self.n_students() {
            let mut rec = vec![self.students[j].clone()];
            rec.extend(
                self.row(j)
                    .iter()
                    .map(|c| c.map(|s| s.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| PsychometricsError::Csv(e.to_string()))?;
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn check_unique(kind: &'static str, ids: &[String]) -> Result<(), PsychometricsError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(PsychometricsError::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}
