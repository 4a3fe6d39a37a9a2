use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::gridworld::StateFeatures;
use crate::scalar::{parse_scalar, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum QTableFormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

const MAGIC: &str = "eaa-qtable v1";

/// Action-value table keyed by exact feature vectors. Rows hold one value per
/// action id; unseen states read as `default`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<F: Scalar> {
    num_actions: usize,
    default: F,
    rows: HashMap<StateFeatures<F>, Vec<F>>,
}

impl<F: Scalar> QTable<F> {
    pub fn new(num_actions: usize, default: F) -> Self {
        QTable {
            num_actions,
            default,
            rows: HashMap::new(),
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn default_value(&self) -> F {
        self.default
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, s: &StateFeatures<F>, action: usize) -> F {
        self.rows.get(s).map_or(self.default, |row| row[action])
    }

    pub fn row(&self, s: &StateFeatures<F>) -> Option<&[F]> {
        self.rows.get(s).map(Vec::as_slice)
    }

    pub fn set(&mut self, s: &StateFeatures<F>, action: usize, value: F) {
        let (n, d) = (self.num_actions, self.default);
        let row = self.rows.entry(s.clone()).or_insert_with(|| vec![d; n]);
        row[action] = value;
    }

    /// Q-values restricted to `valid` actions, in the order given.
    pub fn values_for(&self, s: &StateFeatures<F>, valid: &[usize]) -> Vec<F> {
        match self.rows.get(s) {
            Some(row) => valid.iter().map(|&a| row[a]).collect(),
            None => vec![self.default; valid.len()],
        }
    }

    /// Greedy value `max_a Q(s, a)` over `valid`; zero for an empty set.
    pub fn max_value(&self, s: &StateFeatures<F>, valid: &[usize]) -> F {
        self.values_for(s, valid)
            .into_iter()
            .reduce(F::max)
            .unwrap_or_else(F::zero)
    }

    /// Argmax over `valid` with ties going to the lowest action id.
    pub fn greedy_action(&self, s: &StateFeatures<F>, valid: &[usize]) -> Option<usize> {
        let values = self.values_for(s, valid);
        let mut best: Option<(usize, F)> = None;
        for (&a, &v) in valid.iter().zip(&values) {
            best = match best {
                Some((ba, bv)) if bv > v || (bv == v && ba < a) => Some((ba, bv)),
                _ => Some((a, v)),
            };
        }
        best.map(|(a, _)| a)
    }

    /// Canonical text dump: a header, then one `key<TAB>action<TAB>value`
    /// line per stored entry with keys in lexicographic order. Keys are the
    /// comma-separated feature values.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        self.write_body(&mut out);
        out
    }

    pub(crate) fn write_body(&self, out: &mut String) {
        let _ = writeln!(out, "actions {}", self.num_actions);
        let _ = writeln!(out, "default {}", self.default);
        let _ = writeln!(out, "rows {}", self.rows.len());
        let mut keys: Vec<&StateFeatures<F>> = self.rows.keys().collect();
        keys.sort_by(|a, b| a.cmp_lex(b));
        for key in keys {
            let k = key
                .values()
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",");
            for (a, v) in self.rows[key].iter().enumerate() {
                let _ = writeln!(out, "{k}\t{a}\t{v}");
            }
        }
    }

    pub fn from_text(text: &str) -> Result<Self, QTableFormatError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => {
                return Err(QTableFormatError::Parse {
                    line: 1,
                    message: format!("expected `{MAGIC}` header"),
                })
            }
        }
        let mut lines = lines.peekable();
        Self::read_body(&mut lines)
    }

    pub(crate) fn read_body<'a, I>(
        lines: &mut std::iter::Peekable<I>,
    ) -> Result<Self, QTableFormatError>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let mut header = |key: &str| -> Result<(usize, String), QTableFormatError> {
            let (line, text) = lines.next().ok_or(QTableFormatError::Parse {
                line: 0,
                message: format!("missing `{key}` line"),
            })?;
            let rest =
                text.strip_prefix(key)
                    .map(str::trim)
                    .ok_or_else(|| QTableFormatError::Parse {
                        line,
                        message: format!("expected `{key} <value>`"),
                    })?;
            Ok((line, rest.to_string()))
        };
        let err = |line: usize, message: String| QTableFormatError::Parse { line, message };

        let (line, n) = header("actions")?;
        let num_actions: usize = n
            .parse()
            .map_err(|_| err(line, format!("bad action count `{n}`")))?;
        let (line, d) = header("default")?;
        let default: F = parse_scalar(&d).map_err(|m| err(line, m))?;
        let (line, r) = header("rows")?;
        let rows: usize = r
            .parse()
            .map_err(|_| err(line, format!("bad row count `{r}`")))?;

        let mut table = QTable::new(num_actions, default);
        for _ in 0..rows * num_actions {
            let (line, text) = lines
                .next()
                .ok_or_else(|| err(0, "unexpected end of table".into()))?;
            let mut parts = text.split('\t');
            let (Some(k), Some(a), Some(v), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(err(line, "expected `key<TAB>action<TAB>value`".into()));
            };
            let key = if k.is_empty() {
                Vec::new()
            } else {
                k.split(',')
                    .map(parse_scalar::<F>)
                    .collect::<Result<Vec<F>, _>>()
                    .map_err(|m| err(line, m))?
            };
            let action: usize = a
                .parse()
                .map_err(|_| err(line, format!("bad action `{a}`")))?;
            if action >= num_actions {
                return Err(err(line, format!("action {action} out of range")));
            }
            let value: F = parse_scalar(v).map_err(|m| err(line, m))?;
            table.set(&StateFeatures::new(key), action, value);
        }
        if table.len() != rows {
            return Err(err(
                0,
                format!("expected {rows} rows, found {}", table.len()),
            ));
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(v: &[f64]) -> StateFeatures<f64> {
        StateFeatures::new(v.to_vec())
    }

    #[test]
    fn lookups_do_not_mutate() {
        let t: QTable<f64> = QTable::new(3, 0.0);
        assert_eq!(t.get(&key(&[1.0]), 2), 0.0);
        assert_eq!(t.max_value(&key(&[1.0]), &[0, 1]), 0.0);
        assert!(t.is_empty());
    }

    #[test]
    fn greedy_ties_go_low() {
        let mut t: QTable<f64> = QTable::new(3, 0.0);
        let s = key(&[0.0]);
        t.set(&s, 0, 5.0);
        t.set(&s, 1, 5.0);
        assert_eq!(t.greedy_action(&s, &[0, 1]), Some(0));
        assert_eq!(t.greedy_action(&s, &[1, 2]), Some(1));
        t.set(&s, 2, 6.0);
        assert_eq!(t.greedy_action(&s, &[0, 1, 2]), Some(2));
        assert_eq!(t.greedy_action(&s, &[]), None);
    }

    #[test]
    fn text_round_trip_exact() {
        let mut t: QTable<f64> = QTable::new(4, 0.0);
        t.set(&key(&[1.0, 0.0, 1.0]), 2, 0.1 + 0.2);
        t.set(&key(&[0.0, 3.0, 1.0]), 0, -1.0 / 3.0);
        t.set(&key(&[0.0, 3.0, 1.0]), 3, 9.5e-12);
        let text = t.to_text();
        let back = QTable::<f64>::from_text(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn rejects_garbage() {
        assert!(QTable::<f64>::from_text("nope").is_err());
        let bad = "eaa-qtable v1\nactions 2\ndefault 0\nrows 1\n1,2\t5\t0.5\n1,2\t1\t0\n";
        assert!(QTable::<f64>::from_text(bad).is_err());
    }
}
