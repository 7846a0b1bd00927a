//! Two-stage cross-validation over the bandwidth constant and the ambiguity
//! radius: first the bandwidth at radius zero, then the radius at the chosen
//! bandwidth. Ties resolve to the smaller parameter.

use crate::error::BenchError;

/// Runs the two-stage search. `score(c_h, lambda)` returns the validation
/// objective (higher is better) of one parameter pair.
pub fn cross_validate<F>(
    c_h_grid: &[f64],
    lambda_grid: &[f64],
    mut score: F,
) -> Result<(f64, f64), BenchError>
where
    F: FnMut(f64, f64) -> Result<f64, BenchError>,
{
    if c_h_grid.is_empty() || lambda_grid.is_empty() {
        return Err(BenchError::Config("cross-validation grids are empty".into()));
    }
    let mut best_c_h = c_h_grid[0];
    let mut best_score = f64::NEG_INFINITY;
    for &c_h in c_h_grid {
        let s = score(c_h, 0.0)?;
        if s > best_score {
            best_score = s;
            best_c_h = c_h;
        }
    }
    let mut best_lambda = lambda_grid[0];
    let mut best_score = f64::NEG_INFINITY;
    for &lambda in lambda_grid {
        let s = score(best_c_h, lambda)?;
        if s > best_score {
            best_score = s;
            best_lambda = lambda;
        }
    }
    Ok((best_c_h, best_lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_grids_pass_through() {
        let (c, l) = cross_validate(&[3.0], &[0.7], |_, _| Ok(1.0)).unwrap();
        assert_eq!((c, l), (3.0, 0.7));
    }

    #[test]
    fn ties_pick_smaller_parameter() {
        let (c, l) = cross_validate(&[1.0, 2.0, 3.0], &[0.1, 0.2], |_, _| Ok(5.0)).unwrap();
        assert_eq!((c, l), (1.0, 0.1));
    }

    #[test]
    fn two_stage_structure() {
        // Stage 1 must run at lambda = 0; stage 2 at the stage-1 winner.
        let mut calls = Vec::new();
        let (c, l) = cross_validate(&[1.0, 2.0], &[0.5, 1.5], |c_h, lambda| {
            calls.push((c_h, lambda));
            // c_h = 2 wins stage 1; lambda = 1.5 wins stage 2.
            Ok(c_h + if lambda == 1.5 { 10.0 } else { 0.0 })
        })
        .unwrap();
        assert_eq!((c, l), (2.0, 1.5));
        assert_eq!(calls[0], (1.0, 0.0));
        assert_eq!(calls[1], (2.0, 0.0));
        assert_eq!(calls[2], (2.0, 0.5));
        assert_eq!(calls[3], (2.0, 1.5));
    }
}
