//! Finite-difference validation of the loss models the solvers rely on, at
//! random non-kink points, and consistency between the boxed loss models and
//! the solver-internal loss evaluations.

use ndarray::{array, Array1, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ctxopt_core::estimator::LossModel;
use ctxopt_core::solvers::{newsvendor_loss, wind_loss};

const FD_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;
const POINTS: usize = 20;

fn portfolio_loss_model() -> LossModel {
    // Negative portfolio return with returns declared in [-1.5, 1.5] and
    // allocations on the simplex.
    LossModel::new(
        Box::new(|x: ArrayView1<'_, f64>, xi: ArrayView1<'_, f64>| -xi.dot(&x)),
        Box::new(|_x, xi| -&xi.to_owned()),
        1.5 * 3f64.sqrt(),
        (-1.5, 1.5),
    )
    .unwrap()
}

fn newsvendor_loss_model() -> LossModel {
    let (b, h) = (10.0, 6.0);
    LossModel::new(
        Box::new(move |x: ArrayView1<'_, f64>, xi: ArrayView1<'_, f64>| {
            newsvendor_loss(x[0], xi[0], b, h)
        }),
        Box::new(move |x, xi| {
            // Right derivative at the kink.
            let slope = if x[0] >= xi[0] { h } else { -b };
            array![slope]
        }),
        10.0,
        (0.0, 10.0 * 100.0),
    )
    .unwrap()
}

/// Wind commitment loss with the outcome vector holding prices in the first
/// half and production in the second half.
fn wind_loss_model(hours: usize) -> LossModel {
    LossModel::new(
        Box::new(move |x: ArrayView1<'_, f64>, xi: ArrayView1<'_, f64>| {
            let prices = xi.slice(ndarray::s![..hours]);
            let production = xi.slice(ndarray::s![hours..]);
            wind_loss(x, prices, production)
        }),
        Box::new(move |x, xi| {
            let mut grad = Array1::zeros(hours);
            for j in 0..hours {
                let price = xi[j];
                let production = xi[hours + j];
                grad[j] = if x[j] >= production { price } else { -price };
            }
            grad
        }),
        3.0 * 100.0,
        (-100.0 * 1000.0 * 24.0, 2.0 * 100.0 * 1000.0 * 24.0),
    )
    .unwrap()
}

#[test]
fn portfolio_subgradient_matches_finite_differences() {
    let model = portfolio_loss_model();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..POINTS {
        let x = array![
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0)
        ];
        let xi = array![
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0)
        ];
        let gap = model.subgradient_gap(x.view(), xi.view(), FD_STEP);
        assert!(gap < FD_TOL, "finite-difference gap {gap}");
    }
}

#[test]
fn newsvendor_subgradient_matches_finite_differences() {
    let model = newsvendor_loss_model();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < POINTS {
        let q = rng.gen_range(30.0..90.0);
        let xi = rng.gen_range(30.0..90.0_f64);
        if (q - xi).abs() < 10.0 * FD_STEP {
            continue; // skip the kink
        }
        let gap = model.subgradient_gap(array![q].view(), array![xi].view(), FD_STEP);
        assert!(gap < FD_TOL, "finite-difference gap {gap} at q={q}, xi={xi}");
        checked += 1;
    }
}

#[test]
fn wind_subgradient_matches_finite_differences() {
    let hours = 4;
    let model = wind_loss_model(hours);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < POINTS {
        let x: Array1<f64> = (0..hours).map(|_| rng.gen_range(0.0..500.0)).collect();
        let mut xi = Array1::zeros(2 * hours);
        for j in 0..hours {
            xi[j] = rng.gen_range(10.0..80.0);
            xi[hours + j] = rng.gen_range(0.0..500.0);
        }
        if (0..hours).any(|j| (x[j] - xi[hours + j]).abs() < 10.0 * FD_STEP) {
            continue; // skip the kinks
        }
        let gap = model.subgradient_gap(x.view(), xi.view(), FD_STEP);
        assert!(gap < FD_TOL, "finite-difference gap {gap}");
        checked += 1;
    }
}

#[test]
fn loss_models_agree_with_solver_internals() {
    let news = newsvendor_loss_model();
    assert_eq!(
        news.evaluate_raw(array![55.0].view(), array![60.0].view()),
        newsvendor_loss(55.0, 60.0, 10.0, 6.0)
    );

    let hours = 3;
    let wind = wind_loss_model(hours);
    let x = array![100.0, 200.0, 50.0];
    let xi = array![30.0, 20.0, 25.0, 80.0, 250.0, 40.0];
    let direct = wind_loss(
        x.view(),
        xi.slice(ndarray::s![..hours]),
        xi.slice(ndarray::s![hours..]),
    );
    assert_eq!(wind.evaluate_raw(x.view(), xi.view()), direct);
}
