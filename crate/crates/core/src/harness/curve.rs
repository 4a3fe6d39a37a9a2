//! Learning curves: per-episode statistics across trials.

use std::io;

use super::trial::{exhaustion_episode, EpisodeRecord};
use super::HarnessError;
use crate::scalar::Scalar;

pub const CURVE_HEADER: [&str; 7] = [
    "episode",
    "mean_reward",
    "std_reward",
    "mean_advice_issued",
    "mean_advice_reused",
    "exhaustion_episode_min",
    "exhaustion_episode_max",
];

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub episode: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_advice_issued: f64,
    pub mean_advice_reused: f64,
    /// Earliest and latest budget-exhaustion episode over the trials that
    /// exhausted; the same on every row.
    pub exhaustion_episode_min: Option<usize>,
    pub exhaustion_episode_max: Option<usize>,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_lengths<F: Scalar>(trials: &[Vec<EpisodeRecord<F>>]) -> Result<usize, HarnessError> {
    let len = trials.first().map_or(0, Vec::len);
    if let Some(bad) = trials.iter().find(|t| t.len() != len) {
        return Err(HarnessError::Ragged {
            expected: len,
            got: bad.len(),
        });
    }
    Ok(len)
}

/// Pointwise statistics over trials of equal length.
pub fn aggregate<F: Scalar>(
    trials: &[Vec<EpisodeRecord<F>>],
) -> Result<Vec<CurveRow>, HarnessError> {
    let len = check_lengths(trials)?;
    let exhaustion: Vec<usize> = trials
        .iter()
        .filter_map(|t| exhaustion_episode(t))
        .collect();
    let (ex_min, ex_max) = (
        exhaustion.iter().min().copied(),
        exhaustion.iter().max().copied(),
    );
    let f = |x: F| x.to_f64().unwrap_or(f64::NAN);
    Ok((0..len)
        .map(|k| {
            let rewards: Vec<f64> = trials.iter().map(|t| f(t[k].reward)).collect();
            let (mean_reward, std_reward) = mean_std(&rewards);
            let issued: Vec<f64> = trials.iter().map(|t| t[k].advice_issued as f64).collect();
            let reused: Vec<f64> = trials.iter().map(|t| t[k].advice_reused as f64).collect();
            CurveRow {
                episode: trials[0][k].episode,
                mean_reward,
                std_reward,
                mean_advice_issued: mean_std(&issued).0,
                mean_advice_reused: mean_std(&reused).0,
                exhaustion_episode_min: ex_min,
                exhaustion_episode_max: ex_max,
            }
        })
        .collect())
}

/// Trailing-window mean of reward and its deviation; `window = 1` leaves
/// the table unchanged.
pub fn smooth(rows: &[CurveRow], window: usize) -> Vec<CurveRow> {
    let w = window.max(1);
    (0..rows.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            let span = &rows[lo..=i];
            let n = span.len() as f64;
            CurveRow {
                mean_reward: span.iter().map(|r| r.mean_reward).sum::<f64>() / n,
                std_reward: span.iter().map(|r| r.std_reward).sum::<f64>() / n,
                ..rows[i].clone()
            }
        })
        .collect()
}

fn opt(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the curve table. Numbers use the shortest representation that
/// parses back exactly.
pub fn export_csv<W: io::Write>(rows: &[CurveRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.mean_reward.to_string(),
            r.std_reward.to_string(),
            r.mean_advice_issued.to_string(),
            r.mean_advice_reused.to_string(),
            opt(r.exhaustion_episode_min),
            opt(r.exhaustion_episode_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: io::Read>(input: R) -> Result<Vec<CurveRow>, HarnessError> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(CURVE_HEADER) {
        return Err(HarnessError::Format("unexpected curve CSV header".into()));
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let bad =
            |k: usize| HarnessError::Format(format!("row {}: bad {}", i + 2, CURVE_HEADER[k]));
        let real = |k: usize| row[k].parse::<f64>().map_err(|_| bad(k));
        let maybe = |k: usize| -> Result<Option<usize>, HarnessError> {
            if row[k].is_empty() {
                Ok(None)
            } else {
                row[k].parse().map(Some).map_err(|_| bad(k))
            }
        };
        out.push(CurveRow {
            episode: row[0].parse().map_err(|_| bad(0))?,
            mean_reward: real(1)?,
            std_reward: real(2)?,
            mean_advice_issued: real(3)?,
            mean_advice_reused: real(4)?,
            exhaustion_episode_min: maybe(5)?,
            exhaustion_episode_max: maybe(6)?,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub episode: usize,
    pub mean_eval_reward: f64,
    pub std_eval_reward: f64,
}

/// Statistics of the greedy evaluations, at the episodes where every trial
/// evaluated.
pub fn aggregate_eval<F: Scalar>(
    trials: &[Vec<EpisodeRecord<F>>],
) -> Result<Vec<EvalRow>, HarnessError> {
    let len = check_lengths(trials)?;
    Ok((0..len)
        .filter_map(|k| {
            let evals: Option<Vec<f64>> = trials
                .iter()
                .map(|t| t[k].eval_reward.and_then(|e| e.to_f64()))
                .collect();
            let evals = evals?;
            let (mean, std) = mean_std(&evals);
            Some(EvalRow {
                episode: trials[0][k].episode,
                mean_eval_reward: mean,
                std_eval_reward: std,
            })
        })
        .collect())
}

pub fn export_eval_csv<W: io::Write>(rows: &[EvalRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "mean_eval_reward", "std_eval_reward"])?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.mean_eval_reward.to_string(),
            r.std_eval_reward.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(seed: u64, rewards: &[f64], exhaust_at: Option<usize>) -> Vec<EpisodeRecord<f64>> {
        rewards
            .iter()
            .enumerate()
            .map(|(k, &r)| EpisodeRecord {
                seed,
                episode: k,
                reward: r,
                length: 3,
                advice_issued: k,
                advice_reused: 2 * k,
                advice_rejected: 0,
                budget_exhausted: exhaust_at.is_some_and(|e| k >= e),
                eval_reward: (k % 2 == 1).then_some(r),
            })
            .collect()
    }

    #[test]
    fn single_trial_has_zero_std() {
        let rows = aggregate(&[trial(0, &[1.0, 4.0, 2.0], None)]).unwrap();
        assert!(rows.iter().all(|r| r.std_reward == 0.0));
        assert_eq!(rows[1].mean_reward, 4.0);
        assert_eq!(rows[0].exhaustion_episode_min, None);
    }

    #[test]
    fn two_constant_trials() {
        let rows =
            aggregate(&[trial(0, &[0.0; 4], Some(1)), trial(1, &[10.0; 4], Some(3))]).unwrap();
        for r in &rows {
            assert_eq!((r.mean_reward, r.std_reward), (5.0, 5.0));
            assert_eq!(
                (r.exhaustion_episode_min, r.exhaustion_episode_max),
                (Some(1), Some(3))
            );
        }
    }

    #[test]
    fn ragged_trials_error() {
        let err = aggregate(&[trial(0, &[0.0; 4], None), trial(1, &[0.0; 3], None)]).unwrap_err();
        assert!(matches!(
            err,
            HarnessError::Ragged {
                expected: 4,
                got: 3
            }
        ));
    }

    #[test]
    fn smoothing_is_trailing() {
        let rows = aggregate(&[trial(0, &[0.0, 10.0, 20.0, 30.0], None)]).unwrap();
        let s = smooth(&rows, 2);
        let means: Vec<f64> = s.iter().map(|r| r.mean_reward).collect();
        assert_eq!(means, vec![0.0, 5.0, 15.0, 25.0]);
        assert_eq!(smooth(&rows, 1), rows);
    }

    #[test]
    fn header_and_empty_table() {
        let mut buf = Vec::new();
        export_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "episode,mean_reward,std_reward,mean_advice_issued,mean_advice_reused,exhaustion_episode_min,exhaustion_episode_max\n"
        );
    }

    #[test]
    fn eval_rows_only_where_all_evaluated() {
        let rows = aggregate_eval(&[
            trial(0, &[1.0, 2.0, 3.0, 4.0], None),
            trial(1, &[1.0, 6.0, 3.0, 8.0], None),
        ])
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].episode, 1);
        assert_eq!(
            (rows[0].mean_eval_reward, rows[0].std_eval_reward),
            (4.0, 2.0)
        );
    }
}
