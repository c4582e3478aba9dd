use std::collections::BTreeMap;

use crate::{Error, Result};

fn check(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Empty("no labels to score".into()));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Unweighted mean of per-class recall over the classes present in `truth`.
pub fn balanced_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred, truth)?;
    let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (p, t) in pred.iter().zip(truth) {
        let e = tally.entry(*t).or_default();
        e.1 += 1;
        if p == t {
            e.0 += 1;
        }
    }
    let sum: f64 = tally.values().map(|&(hit, n)| hit as f64 / n as f64).sum();
    Ok(sum / tally.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn examples() {
        assert_eq!(accuracy(&[1, 2, 0], &[1, 2, 0]).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[1, 2, 0], &[1, 2, 0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0, 0, 0], &[0, 0, 0, 1]).unwrap(), 0.75);
        assert_eq!(balanced_accuracy(&[0, 0, 0, 0], &[0, 0, 0, 1]).unwrap(), 0.5);
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn balanced_accuracy_matches_tally() {
        let mut rng = crate::seed::rng(42);
        let truth: Vec<usize> = (0..200).map(|_| rng.random_range(0..5)).collect();
        let pred: Vec<usize> = (0..200).map(|_| rng.random_range(0..6)).collect();
        let mut recalls = Vec::new();
        for c in 0..5 {
            let members: Vec<usize> = (0..200).filter(|&i| truth[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let hits = members.iter().filter(|&&i| pred[i] == c).count();
            recalls.push(hits as f64 / members.len() as f64);
        }
        let want = recalls.iter().sum::<f64>() / recalls.len() as f64;
        assert!((balanced_accuracy(&pred, &truth).unwrap() - want).abs() < 1e-15);
    }
}
