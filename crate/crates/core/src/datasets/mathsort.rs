//! Ten `digit op digit` expressions to sort by value.

use std::collections::HashSet;

use num_rational::Ratio;
use rand::Rng;

use super::{DatasetError, SortTask, TaskKind};
use crate::ranking::{ItemList, Ranking};
use crate::rng::stream_rng;

pub const MATHSORT_SIZE: usize = 10;
const OPS: [char; 4] = ['+', '-', '*', '/'];

/// Exact value of an expression such as `3 / 5`.
pub fn evaluate_expression(expr: &str) -> Option<Ratio<i64>> {
    let tokens: Vec<&str> = expr.split_whitespace().collect();
    let [a, op, b] = tokens.as_slice() else {
        return None;
    };
    let a = Ratio::from_integer(a.parse::<i64>().ok()?);
    let b = Ratio::from_integer(b.parse::<i64>().ok()?);
    match *op {
        "+" => Some(a + b),
        "-" => Some(a - b),
        "*" => Some(a * b),
        "/" if b != Ratio::from_integer(0) => Some(a / b),
        _ => None,
    }
}

fn draw_task<R: Rng>(rng: &mut R) -> Vec<(String, Ratio<i64>)> {
    let mut exprs: Vec<(String, Ratio<i64>)> = Vec::with_capacity(MATHSORT_SIZE);
    while exprs.len() < MATHSORT_SIZE {
        let a = rng.random_range(1..=9);
        let op = OPS[rng.random_range(0..OPS.len())];
        let b = rng.random_range(1..=9);
        let text = format!("{a} {op} {b}");
        let value = evaluate_expression(&text).expect("generated expressions are valid");
        if exprs.iter().all(|(_, v)| *v != value) {
            exprs.push((text, value));
        }
    }
    exprs
}

/// `count` tasks of ten expressions with distinct exact values in every task.
///
/// Task `t` draws from stream `t` of `seed`; a draw whose expression set
/// repeats an earlier task is redrawn from the same stream.
pub fn gen_mathsort(count: usize, seed: u64) -> Result<Vec<SortTask>, DatasetError> {
    if count == 0 {
        return Err(DatasetError::EmptyCount);
    }
    let mut seen = HashSet::new();
    let mut tasks = Vec::with_capacity(count);
    for t in 0..count {
        let mut rng = stream_rng(seed, t as u64);
        let exprs = (0..1000)
            .map(|_| draw_task(&mut rng))
            .find(|e| {
                let mut key: Vec<&str> = e.iter().map(|(s, _)| s.as_str()).collect();
                key.sort_unstable();
                seen.insert(key.join(","))
            })
            .ok_or(DatasetError::Exhausted { requested: count })?;
        let mut gold: Vec<usize> = (0..exprs.len()).collect();
        gold.sort_by_key(|&i| exprs[i].1);
        let items = ItemList::from_texts(exprs.into_iter().map(|(s, _)| s));
        tasks.push(SortTask::new(
            format!("math-{t}"),
            items,
            Ranking::from_zero_based(gold)?,
            TaskKind::Math,
        )?);
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_is_exact() {
        assert_eq!(evaluate_expression("3 / 5"), Some(Ratio::new(3, 5)));
        assert_eq!(evaluate_expression("2 - 9"), Some(Ratio::from_integer(-7)));
        assert_eq!(evaluate_expression("6 * 5"), Some(Ratio::from_integer(30)));
        assert_eq!(evaluate_expression("1 / 0"), None);
        assert_eq!(evaluate_expression("1 ^ 2"), None);
        assert_eq!(evaluate_expression("12"), None);
    }

    #[test]
    fn tasks_are_well_formed() {
        let tasks = gen_mathsort(100, 0).unwrap();
        let mut lists = HashSet::new();
        for task in &tasks {
            assert_eq!(task.len(), MATHSORT_SIZE);
            let values: Vec<Ratio<i64>> = task.items.texts().map(|t| evaluate_expression(t).unwrap()).collect();
            let along_gold: Vec<Ratio<i64>> = task.gold.as_slice().iter().map(|&i| values[i]).collect();
            assert!(along_gold.windows(2).all(|w| w[0] < w[1]));
            for text in task.items.texts() {
                let tokens: Vec<&str> = text.split_whitespace().collect();
                assert_eq!(tokens.len(), 3);
                assert!(matches!(tokens[0].parse::<u8>(), Ok(1..=9)));
                assert!(["+", "-", "*", "/"].contains(&tokens[1]));
                assert!(matches!(tokens[2].parse::<u8>(), Ok(1..=9)));
            }
            lists.insert(task.items.texts().collect::<Vec<_>>().join("|"));
        }
        assert_eq!(lists.len(), 100);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(gen_mathsort(20, 7).unwrap(), gen_mathsort(20, 7).unwrap());
        assert_ne!(gen_mathsort(5, 7).unwrap(), gen_mathsort(5, 8).unwrap());
        // prefixes agree, so datasets of different sizes nest
        assert_eq!(gen_mathsort(5, 7).unwrap()[..], gen_mathsort(20, 7).unwrap()[..5]);
        assert!(matches!(gen_mathsort(0, 7), Err(DatasetError::EmptyCount)));
    }
}
