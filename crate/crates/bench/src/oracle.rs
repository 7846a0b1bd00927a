//! Brute-force verification oracle for the worst-case weighted expectation.
//!
//! Independent of the closed-form/active-set solver: feasible lower bounds
//! come from projected gradient ascent (Dykstra projections onto the
//! simplex-ellipsoid intersection) started from many random simplex points,
//! plus a refining dense grid for three or fewer atoms; a matching upper
//! bound comes from a one-dimensional Lagrangian dual minimized by golden
//! section with a water-filling inner solve. The two bracket the true value.

use ctxopt_core::solvers::project_simplex;
use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Feasible primal value and dual upper bound for one instance.
#[derive(Debug, Clone, Copy)]
pub struct OracleBracket {
    pub primal: f64,
    pub dual: f64,
}

fn ball_distance(w: &[f64], center: &[f64]) -> f64 {
    w.iter()
        .zip(center.iter())
        .map(|(wi, ci)| (wi - ci) * (wi - ci) / (2.0 * ci))
        .sum()
}

/// Euclidean projection onto { u : sum (u_i - c_i)^2 / (2 c_i) <= rho }.
fn project_ellipsoid(v: &Array1<f64>, center: &[f64], rho: f64) -> Array1<f64> {
    if ball_distance(v.as_slice().unwrap(), center) <= rho {
        return v.clone();
    }
    let point = |mu: f64| -> Array1<f64> {
        Array1::from_iter(
            v.iter()
                .zip(center.iter())
                .map(|(vi, ci)| ci * (2.0 * vi + mu) / (2.0 * ci + mu)),
        )
    };
    let dist = |mu: f64| ball_distance(point(mu).as_slice().unwrap(), center);
    let mut hi = 1.0;
    while dist(hi) > rho {
        hi *= 2.0;
        if hi > 1e40 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..56 {
        let mid = 0.5 * (lo + hi);
        if dist(mid) > rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    point(hi)
}

/// Dykstra's alternating projections onto simplex and ellipsoid, finished by
/// a shrink towards the center so the returned point is exactly feasible.
fn project_intersection(v: ArrayView1<'_, f64>, center: &[f64], rho: f64) -> Array1<f64> {
    let mut x = project_simplex(v);
    let mut p = Array1::<f64>::zeros(v.len());
    let mut q = Array1::<f64>::zeros(v.len());
    for _ in 0..30 {
        let y = project_ellipsoid(&(&x + &p), center, rho);
        p = &x + &p - &y;
        let x_next = project_simplex((&y + &q).view());
        q = &y + &q - &x_next;
        let moved: f64 = (&x_next - &x).iter().map(|d| d * d).sum();
        x = x_next;
        if moved < 1e-26 {
            break;
        }
    }
    // x lies on the simplex; pull towards the (feasible, interior) center
    // until the ball constraint holds exactly.
    let d = ball_distance(x.as_slice().unwrap(), center);
    if d > rho {
        let t = (rho / d).sqrt() * (1.0 - 1e-12);
        for (xi, ci) in x.iter_mut().zip(center.iter()) {
            *xi = ci + t * (*xi - ci);
        }
    }
    x
}

/// Projected gradient ascent for the linear objective over the intersection.
fn ascent_from(
    start: ArrayView1<'_, f64>,
    z: &[f64],
    center: &[f64],
    rho: f64,
    iterations: usize,
) -> f64 {
    let zv = Array1::from_vec(z.to_vec());
    let z_norm = zv.dot(&zv).sqrt();
    if z_norm == 0.0 {
        return 0.0;
    }
    let base_step = (0.5 * (2.0 * rho).sqrt() + 1e-3) / z_norm;
    let mut x = project_intersection(start, center, rho);
    let mut best = x.dot(&zv);
    let mut step = base_step;
    let mut stalls = 0;
    for t in 1..=iterations {
        let proposal = &x + &(&zv * step);
        let x_next = project_intersection(proposal.view(), center, rho);
        let moved: f64 = (&x_next - &x).iter().map(|d| d * d).sum();
        x = x_next;
        let value = x.dot(&zv);
        if value > best {
            best = value;
            stalls = 0;
        } else {
            stalls += 1;
        }
        if moved < 1e-28 || stalls > 40 {
            // Polish with shrinking steps before giving up.
            if step > base_step / 512.0 {
                step *= 0.25;
                stalls = 0;
            } else {
                break;
            }
        }
        if t % 50 == 0 {
            step *= 0.7;
        }
    }
    best
}

/// Water-filling weights of the inner Lagrangian maximizer at penalty mu.
fn lagrangian_weights(z: &[f64], center: &[f64], mu: f64) -> Vec<f64> {
    let z_min = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let z_max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weight = |alpha: f64| -> Vec<f64> {
        z.iter()
            .zip(center.iter())
            .map(|(zi, ci)| (ci * (1.0 + (zi - alpha) / mu)).max(0.0))
            .collect()
    };
    let mut lo = z_min - 2.0 * mu;
    let mut hi = z_max;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if weight(mid).iter().sum::<f64>() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut w = weight(0.5 * (lo + hi));
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    w
}

/// Feasible primal candidate reconstructed from the dual water-filling point
/// at penalty mu: renormalized onto the simplex, then shrunk towards the
/// center until the ball constraint holds.
fn primal_from_dual(z: &[f64], center: &[f64], rho: f64, mu: f64) -> f64 {
    if mu <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut w = lagrangian_weights(z, center, mu);
    let d = ball_distance(&w, center);
    if d > rho {
        let t = (rho / d).sqrt() * (1.0 - 1e-13);
        for (wi, ci) in w.iter_mut().zip(center.iter()) {
            *wi = ci + t * (*wi - ci);
        }
    }
    w.iter().zip(z.iter()).map(|(wi, zi)| wi * zi).sum()
}

/// Water-filling inner maximizer of the Lagrangian at penalty mu > 0:
/// max over the simplex of sum w_i z_i - mu (w_i - c_i)^2 / (2 c_i).
fn lagrangian_inner(z: &[f64], center: &[f64], mu: f64) -> f64 {
    let z_min = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let z_max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weight_sum = |alpha: f64| -> f64 {
        z.iter()
            .zip(center.iter())
            .map(|(zi, ci)| (ci * (1.0 + (zi - alpha) / mu)).max(0.0))
            .sum()
    };
    let mut lo = z_min - 2.0 * mu;
    let mut hi = z_max;
    debug_assert!(weight_sum(lo) >= 1.0 && weight_sum(hi) <= 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if weight_sum(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    z.iter()
        .zip(center.iter())
        .map(|(zi, ci)| {
            let w = (ci * (1.0 + (zi - alpha) / mu)).max(0.0);
            w * zi - mu * (w - ci) * (w - ci) / (2.0 * ci)
        })
        .sum()
}

/// Lagrangian dual minimized over the penalty by golden section. Returns the
/// dual upper bound together with the feasible primal value reconstructed at
/// the near-optimal penalty.
fn dual_bracket(z: &[f64], center: &[f64], rho: f64) -> (f64, f64) {
    let z_max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dual_at = |mu: f64| -> f64 {
        if mu <= 0.0 {
            z_max
        } else {
            lagrangian_inner(z, center, mu) + mu * rho
        }
    };
    let mut hi = 1e-3;
    while dual_at(2.0 * hi) < dual_at(hi) && hi < 1e12 {
        hi *= 2.0;
    }
    hi *= 2.0;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (dual_at(c), dual_at(d));
    for _ in 0..160 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = dual_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = dual_at(d);
        }
        if b - a < 1e-14 * (1.0 + b.abs()) {
            break;
        }
    }
    let mu_star = 0.5 * (a + b);
    let dual = dual_at(mu_star).min(dual_at(a)).min(dual_at(b));
    let mut primal = f64::NEG_INFINITY;
    for scale in [1.0, 1.0 + 1e-6, 1.0 - 1e-6, 1.0 + 1e-3, 1.0 - 1e-3] {
        primal = primal.max(primal_from_dual(z, center, rho, mu_star * scale));
    }
    (dual, primal)
}

/// Exact value for two atoms: the feasible set is an interval in the first
/// weight and the linear objective peaks at an endpoint.
fn exact_two_atoms(z: &[f64], center: &[f64], rho: f64) -> f64 {
    let a = 1.0 / (2.0 * center[0]) + 1.0 / (2.0 * center[1]);
    let half_width = (rho / a).sqrt();
    let lo = (center[0] - half_width).max(0.0);
    let hi = (center[0] + half_width).min(1.0);
    let value = |t: f64| t * z[0] + (1.0 - t) * z[1];
    value(lo).max(value(hi))
}

/// Refining dense grid over the 2-simplex for three atoms.
fn grid_three_atoms(z: &[f64], center: &[f64], rho: f64) -> f64 {
    let mut best_value = center.iter().zip(z.iter()).map(|(c, v)| c * v).sum::<f64>();
    let mut best_point = [center[0], center[1]];
    let mut half = 0.5f64;
    let steps = 32;
    let mut box_center = [0.5, 0.5];
    for _level in 0..8 {
        for i in 0..=steps {
            for j in 0..=steps {
                let w1 = box_center[0] - half + 2.0 * half * i as f64 / steps as f64;
                let w2 = box_center[1] - half + 2.0 * half * j as f64 / steps as f64;
                let w3 = 1.0 - w1 - w2;
                if w1 < 0.0 || w2 < 0.0 || w3 < 0.0 {
                    continue;
                }
                let w = [w1, w2, w3];
                if ball_distance(&w, center) > rho {
                    continue;
                }
                let value = w1 * z[0] + w2 * z[1] + w3 * z[2];
                if value > best_value {
                    best_value = value;
                    best_point = [w1, w2];
                }
            }
        }
        box_center = best_point;
        half *= 3.0 / steps as f64;
    }
    best_value
}

/// Primal/dual bracket of the worst-case expectation, independent of the
/// production solver. Tightens the ascent budget until the bracket closes to
/// 1e-6 or the attempt budget runs out.
pub fn worst_case_bracket(
    z: &[f64],
    center: &[f64],
    lambda: f64,
    rng: &mut ChaCha8Rng,
) -> OracleBracket {
    let n = z.len();
    let nominal: f64 = center.iter().zip(z.iter()).map(|(c, v)| c * v).sum();
    if lambda == 0.0 {
        return OracleBracket {
            primal: nominal,
            dual: nominal,
        };
    }
    let rho = 0.5 * lambda * lambda;
    let (dual, reconstructed) = dual_bracket(z, center, rho);

    let mut primal = nominal.max(reconstructed);
    match n {
        2 => primal = primal.max(exact_two_atoms(z, center, rho)),
        3 => primal = primal.max(grid_three_atoms(z, center, rho)),
        _ => {}
    }

    let mut deep_budget = 300;
    let mut restart_budget = 70;
    for _attempt in 0..3 {
        // One deep ascent from the center, then random restarts.
        primal = primal.max(ascent_from(
            Array1::from_vec(center.to_vec()).view(),
            z,
            center,
            rho,
            deep_budget,
        ));
        for _ in 0..49 {
            let start: Array1<f64> =
                Array1::from_iter((0..n).map(|_| rng.gen_range(0.0..1.0)));
            let total = start.sum().max(1e-12);
            let start = start / total;
            primal = primal.max(ascent_from(start.view(), z, center, rho, restart_budget));
        }
        if dual - primal <= 1e-6 {
            break;
        }
        deep_budget *= 8;
        restart_budget *= 4;
    }
    OracleBracket { primal, dual }
}
