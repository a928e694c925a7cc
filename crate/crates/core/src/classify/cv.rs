//! Repeated stratified k-fold cross-validation and grid search over the
//! logistic-regression C parameter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::{lr_fit, lr_predict, LrModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::corpus::{shuffle, Label};
use crate::error::{Error, Result};
use crate::vectorize::SparseMatrix;

/// Fold assignments: within each repeat, the folds partition all row
/// indices and per-fold class counts stay within one of proportional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    /// `folds[repeat][fold]` → sorted row indices.
    folds: Vec<Vec<Vec<usize>>>,
}

impl CvPlan {
    pub fn folds(&self, repeat: usize) -> &[Vec<usize>] {
        &self.folds[repeat]
    }

    pub fn iter_splits(&self) -> impl Iterator<Item = (usize, usize, &Vec<usize>)> {
        self.folds
            .iter()
            .enumerate()
            .flat_map(|(r, folds)| folds.iter().enumerate().map(move |(f, idx)| (r, f, idx)))
    }
}

/// Builds the plan: per repeat, each class's indices are shuffled with a
/// ChaCha8 stream seeded once from `seed`, then dealt round-robin to the
/// k folds.
pub fn repeated_stratified_kfold(
    y: &[Label],
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<CvPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be positive".into()));
    }
    let mut largest_class = 0;
    for class in Label::ALL {
        let count = y.iter().filter(|&&l| l == class).count();
        if count == 0 {
            return Err(Error::InvalidArgument(format!(
                "class {class} has no members; stratification needs both classes"
            )));
        }
        largest_class = largest_class.max(count);
    }
    // a class smaller than k spreads over a subset of folds (some folds
    // get zero of it); the largest class must reach every fold so no fold
    // is empty
    if k > largest_class {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the largest class count {largest_class}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let mut repeat_folds: Vec<Vec<usize>> = vec![Vec::new(); k];
        for class in Label::ALL {
            let mut indices: Vec<usize> = y
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == class)
                .map(|(i, _)| i)
                .collect();
            shuffle(&mut indices, &mut rng);
            for (i, idx) in indices.into_iter().enumerate() {
                repeat_folds[i % k].push(idx);
            }
        }
        for fold in &mut repeat_folds {
            fold.sort_unstable();
        }
        folds.push(repeat_folds);
    }
    Ok(CvPlan {
        k,
        repeats,
        seed,
        folds,
    })
}

#[derive(Debug, Clone)]
pub struct GridEntry {
    pub c: f64,
    pub mean_error: f64,
    /// Validation error percentage of every (repeat, fold) split, in plan
    /// order.
    pub fold_errors: Vec<f64>,
}

#[derive(Debug)]
pub struct GridSearchResult {
    pub entries: Vec<GridEntry>,
    pub best_index: usize,
    /// Refit on the full data with the best C.
    pub best_model: LrModel,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridEntry {
        &self.entries[self.best_index]
    }
}

/// Evaluates every C in `grid` with the cross-validation plan and refits
/// on the full data with the winner. The best combination minimizes mean
/// validation error; exact ties go to the smallest C.
pub fn grid_search(
    x: &SparseMatrix,
    y: &[Label],
    grid: &[f64],
    plan: &CvPlan,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    if x.n_rows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "matrix has {} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let all_rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut entries = Vec::with_capacity(grid.len());
    for &c in grid {
        let mut fold_errors = Vec::with_capacity(plan.repeats * plan.k);
        for (repeat, fold, validation) in plan.iter_splits() {
            let _ = (repeat, fold);
            let in_validation: std::collections::HashSet<usize> =
                validation.iter().copied().collect();
            let train_rows: Vec<usize> = all_rows
                .iter()
                .copied()
                .filter(|i| !in_validation.contains(i))
                .collect();
            let x_train = x.select_rows(&train_rows);
            let y_train: Vec<Label> = train_rows.iter().map(|&i| y[i]).collect();
            let model = lr_fit(&x_train, &y_train, c, DEFAULT_TOL, DEFAULT_MAX_ITER)?;

            let x_val = x.select_rows(validation);
            let y_val: Vec<Label> = validation.iter().map(|&i| y[i]).collect();
            let (predicted, _) = lr_predict(&model, &x_val)?;
            let mismatches = predicted.iter().zip(&y_val).filter(|(p, g)| p != g).count();
            fold_errors.push(100.0 * mismatches as f64 / y_val.len() as f64);
        }
        let mean_error = fold_errors.iter().sum::<f64>() / fold_errors.len() as f64;
        entries.push(GridEntry {
            c,
            mean_error,
            fold_errors,
        });
    }

    let best_index = entries
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.mean_error
                .total_cmp(&b.mean_error)
                .then_with(|| a.c.total_cmp(&b.c))
        })
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let best_model = lr_fit(x, y, entries[best_index].c, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(GridSearchResult {
        entries,
        best_index,
        best_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_stratification() {
        let y = [Label::Positive, Label::Positive, Label::Negative, Label::Negative];
        let plan = repeated_stratified_kfold(&y, 2, 1, 0).unwrap();
        for fold in plan.folds(0) {
            assert_eq!(fold.len(), 2);
            let pos = fold.iter().filter(|&&i| y[i] == Label::Positive).count();
            assert_eq!(pos, 1, "each fold holds exactly one of each class");
        }
    }

    #[test]
    fn seven_three_split_into_five_folds() {
        let y: Vec<Label> = (0..10)
            .map(|i| if i < 7 { Label::Positive } else { Label::Negative })
            .collect();
        let plan = repeated_stratified_kfold(&y, 5, 1, 9).unwrap();
        let mut all: Vec<usize> = Vec::new();
        for fold in plan.folds(0) {
            let pos = fold.iter().filter(|&&i| y[i] == Label::Positive).count();
            let neg = fold.len() - pos;
            assert!((1..=2).contains(&pos), "pos per fold in {{1,2}}, got {pos}");
            assert!(neg <= 1, "neg per fold in {{0,1}}, got {neg}");
            all.extend(fold.iter().copied());
        }
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>(), "folds partition indices");
    }

    #[test]
    fn plans_are_deterministic_per_seed() {
        let y: Vec<Label> = (0..40)
            .map(|i| if i % 3 == 0 { Label::Negative } else { Label::Positive })
            .collect();
        let a = repeated_stratified_kfold(&y, 4, 3, 11).unwrap();
        let b = repeated_stratified_kfold(&y, 4, 3, 11).unwrap();
        assert_eq!(a, b);
        let c = repeated_stratified_kfold(&y, 4, 3, 12).unwrap();
        assert_ne!(a, c);
        // repeats reshuffle
        assert_ne!(a.folds(0), a.folds(1));
    }

    #[test]
    fn degenerate_plans_are_rejected() {
        let y = [Label::Positive, Label::Positive, Label::Negative];
        // k exceeding the largest class would leave empty folds
        assert!(matches!(
            repeated_stratified_kfold(&y, 3, 1, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            repeated_stratified_kfold(&y, 1, 1, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            repeated_stratified_kfold(&[Label::Positive; 4], 2, 1, 0),
            Err(Error::InvalidArgument(_))
        ));
        // a class smaller than k is fine: its members spread over a
        // subset of the folds
        let plan = repeated_stratified_kfold(&y, 2, 1, 0).unwrap();
        assert_eq!(plan.folds(0).len(), 2);
    }

    fn toy_xy() -> (SparseMatrix, Vec<Label>) {
        // x₀ sign decides the class, 12 samples
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..12 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let magnitude = 1.0 + (i % 3) as f64;
            rows.push(vec![(0u32, sign * magnitude), (1u32, (i % 5) as f64 - 2.5)]);
            labels.push(if sign > 0.0 { Label::Positive } else { Label::Negative });
        }
        (SparseMatrix::from_rows(rows, 2), labels)
    }

    #[test]
    fn singleton_grid_returns_that_combination() {
        let (x, y) = toy_xy();
        let plan = repeated_stratified_kfold(&y, 3, 1, 5).unwrap();
        let result = grid_search(&x, &y, &[10.0], &plan).unwrap();
        assert_eq!(result.entries.len(), 1);
        assert_eq!(result.best_index, 0);
        assert_eq!(result.best().c, 10.0);
        assert_eq!(result.best_model.c, 10.0);
    }

    #[test]
    fn mean_error_is_arithmetic_mean_of_fold_errors() {
        let (x, y) = toy_xy();
        let plan = repeated_stratified_kfold(&y, 3, 2, 5).unwrap();
        let result = grid_search(&x, &y, &[0.1, 10.0], &plan).unwrap();
        for entry in &result.entries {
            assert_eq!(entry.fold_errors.len(), 6);
            let mean = entry.fold_errors.iter().sum::<f64>() / 6.0;
            assert!((entry.mean_error - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_mean_errors_tie_toward_smaller_c() {
        let (x, y) = toy_xy();
        let plan = repeated_stratified_kfold(&y, 3, 1, 5).unwrap();
        // separable data: several C values reach identical (zero) error
        let result = grid_search(&x, &y, &[100.0, 1.0, 10.0], &plan).unwrap();
        let best = result.best();
        let min_error = result
            .entries
            .iter()
            .map(|e| e.mean_error)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best.mean_error, min_error);
        for entry in &result.entries {
            if entry.mean_error == best.mean_error {
                assert!(best.c <= entry.c, "tie must go to the smallest C");
            }
        }
    }

    #[test]
    fn empty_grid_is_rejected() {
        let (x, y) = toy_xy();
        let plan = repeated_stratified_kfold(&y, 3, 1, 5).unwrap();
        assert!(matches!(
            grid_search(&x, &y, &[], &plan),
            Err(Error::InvalidArgument(_))
        ));
    }
}
