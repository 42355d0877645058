//! Forward-backward stepwise selection.
//!
//! Entry needs both `p ≤ α` for the new term and a higher adjusted R² than the
//! current model; among admissible candidates the smallest p wins, ties going
//! to the lexicographically first name. Exit removes the term with the largest
//! `p > α`, one at a time. The loop stops at a fixed point.

use super::ols::{ols_fit, RegressionFit};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepAction {
    Add,
    Remove,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub action: StepAction,
    pub variable: String,
    pub p_value: Option<f64>,
    pub adj_r_squared: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepwiseTrace {
    pub steps: Vec<Step>,
}

struct Data<'a> {
    response: &'a str,
    columns: &'a [(String, Vec<f64>)],
    y: &'a [f64],
}

impl Data<'_> {
    fn fit(&self, model: &[String]) -> Result<RegressionFit> {
        let cols: Vec<(&str, &[f64])> = model
            .iter()
            .map(|name| {
                let (n, c) = self.columns.iter().find(|(n, _)| n == name).expect("known column");
                (n.as_str(), c.as_slice())
            })
            .collect();
        ols_fit(self.response, &cols, self.y)
    }
}

fn p_of(fit: &RegressionFit, name: &str) -> f64 {
    fit.coefficient(name).map_or(f64::NAN, |c| c.p_value)
}

/// Runs stepwise selection starting from `baseline` (which may be empty for
/// an intercept-only start). Every other column in `columns` is a candidate.
pub fn stepwise_select(
    response: &str,
    columns: &[(String, Vec<f64>)],
    y: &[f64],
    baseline: &[&str],
    alpha: f64,
) -> Result<(RegressionFit, StepwiseTrace)> {
    for b in baseline {
        if !columns.iter().any(|(n, _)| n == b) {
            return Err(Error::Config(format!("baseline variable {b:?} not among the columns")));
        }
    }
    let data = Data { response, columns, y };
    let mut model: Vec<String> = baseline.iter().map(|s| s.to_string()).collect();
    let mut current = data.fit(&model)?;
    let mut trace = StepwiseTrace::default();
    let mut skipped: HashSet<String> = HashSet::new();
    let mut visited: HashSet<BTreeSet<String>> = HashSet::new();
    visited.insert(model.iter().cloned().collect());

    let mut candidates: Vec<&String> = columns.iter().map(|(n, _)| n).collect();
    candidates.sort();
    let max_rounds = 4 * (columns.len() + 1);

    for _ in 0..max_rounds {
        let mut changed = false;

        let mut best: Option<(String, f64, RegressionFit)> = None;
        for &name in &candidates {
            if model.contains(name) {
                continue;
            }
            let mut trial = model.clone();
            trial.push(name.clone());
            if visited.contains(&trial.iter().cloned().collect::<BTreeSet<_>>()) {
                continue;
            }
            let fit = match data.fit(&trial) {
                Ok(fit) => fit,
                Err(e @ (Error::RankDeficient | Error::TooFewObservations { .. })) => {
                    if skipped.insert(name.clone()) {
                        trace.steps.push(Step {
                            action: StepAction::Skip,
                            variable: name.clone(),
                            p_value: None,
                            adj_r_squared: None,
                            note: Some(e.to_string()),
                        });
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let p = p_of(&fit, name);
            if p <= alpha && fit.adj_r_squared > current.adj_r_squared && best.as_ref().is_none_or(|b| p < b.1) {
                best = Some((name.clone(), p, fit));
            }
        }
        if let Some((name, p, fit)) = best {
            model.push(name.clone());
            visited.insert(model.iter().cloned().collect());
            trace.steps.push(Step {
                action: StepAction::Add,
                variable: name,
                p_value: Some(p),
                adj_r_squared: Some(fit.adj_r_squared),
                note: None,
            });
            current = fit;
            changed = true;
        }

        loop {
            let worst = model
                .iter()
                .map(|name| (name, p_of(&current, name)))
                .filter(|(_, p)| *p > alpha || p.is_nan())
                .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(a.0)));
            let Some((name, p)) = worst.map(|(n, p)| (n.clone(), p)) else {
                break;
            };
            model.retain(|m| *m != name);
            visited.insert(model.iter().cloned().collect());
            current = data.fit(&model)?;
            trace.steps.push(Step {
                action: StepAction::Remove,
                variable: name,
                p_value: Some(p),
                adj_r_squared: Some(current.adj_r_squared),
                note: None,
            });
            changed = true;
        }

        if !changed {
            break;
        }
    }

    Ok((current, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn insignificant_candidate_not_added() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = noise(&mut rng, 21);
        let c = noise(&mut rng, 21);
        let y: Vec<f64> = u
            .iter()
            .zip(noise(&mut rng, 21))
            .map(|(a, e)| 2.0 * a + 0.1 * e)
            .collect();
        let fit = ols_fit("y", &[("u", &u), ("c", &c)], &y).unwrap();
        assert!(fit.coefficient("c").unwrap().p_value > 0.05);
        let cols = vec![("uptime".to_string(), u), ("c".to_string(), c)];
        let (fit, trace) = stepwise_select("y", &cols, &y, &["uptime"], 0.05).unwrap();
        assert_eq!(fit.predictors, vec!["uptime"]);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn recovers_true_predictors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        let a = noise(&mut rng, n);
        let b = noise(&mut rng, n);
        let c = noise(&mut rng, n);
        let d = noise(&mut rng, n);
        let e = noise(&mut rng, n);
        let y: Vec<f64> = (0..n).map(|i| 3.0 * a[i] - 2.0 * b[i] + 0.05 * e[i]).collect();
        let cols = vec![
            ("a".to_string(), a),
            ("b".to_string(), b),
            ("c".to_string(), c),
            ("d".to_string(), d),
        ];
        let (fit, trace) = stepwise_select("y", &cols, &y, &[], 0.05).unwrap();
        assert!(fit.predictors.contains(&"a".to_string()) && fit.predictors.contains(&"b".to_string()));
        assert!(fit.coefficients.iter().skip(1).all(|c| c.p_value <= 0.05));
        assert!(trace.steps.iter().filter(|s| s.action == StepAction::Add).count() >= 2);
    }

    #[test]
    fn duplicate_column_is_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = noise(&mut rng, 30);
        let y: Vec<f64> = a.iter().zip(noise(&mut rng, 30)).map(|(x, e)| x + 0.1 * e).collect();
        let cols = vec![("a".to_string(), a.clone()), ("a_copy".to_string(), a)];
        let (fit, trace) = stepwise_select("y", &cols, &y, &[], 0.05).unwrap();
        assert_eq!(fit.predictors, vec!["a"]);
        let skip = trace.steps.iter().find(|s| s.action == StepAction::Skip).unwrap();
        assert_eq!(skip.variable, "a_copy");
    }

    #[test]
    fn final_terms_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 25;
        let cols: Vec<(String, Vec<f64>)> = (0..5).map(|i| (format!("x{i}"), noise(&mut rng, n))).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| cols[0].1[i] + 0.5 * cols[3].1[i] + 0.4 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (fit, trace) = stepwise_select("y", &cols, &y, &["x1"], 0.05).unwrap();
        for name in &fit.predictors {
            assert!(fit.coefficient(name).unwrap().p_value <= 0.05);
        }
        let mut prev = f64::NEG_INFINITY;
        for s in trace.steps.iter().filter(|s| s.action == StepAction::Add) {
            assert!(s.adj_r_squared.unwrap() > prev || prev == f64::NEG_INFINITY);
            prev = s.adj_r_squared.unwrap();
        }
    }

    #[test]
    fn unknown_baseline_rejected() {
        let cols = vec![("a".to_string(), vec![1.0, 2.0, 3.0])];
        assert!(stepwise_select("y", &cols, &[1.0, 2.0, 3.0], &["zzz"], 0.05).is_err());
    }
}
