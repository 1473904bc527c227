//! Bounded Nelder-Mead simplex minimizer.
//!
//! The search runs in coordinates scaled to the unit box, so the convergence
//! tolerance is relative to each parameter's bound range. Candidate points
//! are projected back onto the box after every simplex move, which keeps the
//! method derivative-free and strictly feasible.

/// Tuning knobs for one simplex run.
#[derive(Debug, Clone)]
pub struct NmOptions {
    pub max_iter: usize,
    /// Relative simplex-size convergence threshold.
    pub tol: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-8,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Minimize `f` over the box `[lo, hi]`, starting from `x0`.
///
/// NaN objective values are treated as +inf so a single bad evaluation
/// cannot poison the simplex ordering.
pub fn minimize<F>(f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &NmOptions) -> NmOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(lo.len(), n);
    assert_eq!(hi.len(), n);

    let span: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
    let to_physical = |z: &[f64]| -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, v)| lo[j] + v * span[j])
            .collect()
    };
    let mut evaluations = 0usize;
    let mut eval = |z: &[f64]| -> f64 {
        evaluations += 1;
        let v = f(&to_physical(z));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: x0 plus a 5%-of-range step along each axis, stepping
    // inward when the step would leave the box.
    let z0: Vec<f64> = x0
        .iter()
        .enumerate()
        .map(|(j, v)| {
            if span[j] > 0.0 {
                ((v - lo[j]) / span[j]).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&z0);
    simplex.push((z0.clone(), v0));
    for j in 0..n {
        let mut z = z0.clone();
        let step = 0.05;
        z[j] = if z[j] + step <= 1.0 { z[j] + step } else { z[j] - step };
        let v = eval(&z);
        simplex.push((z, v));
    }

    let sort_simplex = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    sort_simplex(&mut simplex);

    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;

        // Relative simplex size: largest coordinate distance to the best
        // vertex, in unit-box coordinates.
        let size = simplex[1..]
            .iter()
            .map(|(z, _)| {
                z.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if size < opts.tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (z, _) in simplex.iter().take(n) {
            for (c, v) in centroid.iter_mut().zip(z) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();

        let mut reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + opts.reflection * (c - w))
            .collect();
        project(&mut reflected);
        let f_reflected = eval(&reflected);

        if f_reflected < simplex[0].1 {
            let mut expanded: Vec<f64> = centroid
                .iter()
                .zip(&reflected)
                .map(|(c, r)| c + opts.expansion * (r - c))
                .collect();
            project(&mut expanded);
            let f_expanded = eval(&expanded);
            simplex[n] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
        } else if f_reflected < simplex[n - 1].1 {
            simplex[n] = (reflected, f_reflected);
        } else {
            let (mut contracted, against): (Vec<f64>, f64) = if f_reflected < worst.1 {
                // Outside contraction, between centroid and reflected point.
                (
                    centroid
                        .iter()
                        .zip(&reflected)
                        .map(|(c, r)| c + opts.contraction * (r - c))
                        .collect(),
                    f_reflected,
                )
            } else {
                // Inside contraction, between centroid and worst vertex.
                (
                    centroid
                        .iter()
                        .zip(&worst.0)
                        .map(|(c, w)| c + opts.contraction * (w - c))
                        .collect(),
                    worst.1,
                )
            };
            project(&mut contracted);
            let f_contracted = eval(&contracted);
            if f_contracted < against {
                simplex[n] = (contracted, f_contracted);
            } else {
                // Shrink everything towards the best vertex.
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let mut z: Vec<f64> = best
                        .iter()
                        .zip(&entry.0)
                        .map(|(b, v)| b + opts.shrink * (v - b))
                        .collect();
                    project(&mut z);
                    let fv = eval(&z);
                    *entry = (z, fv);
                }
            }
        }
        sort_simplex(&mut simplex);
    }

    NmOutcome {
        x: to_physical(&simplex[0].0),
        value: simplex[0].1,
        iterations,
        evaluations,
        converged,
    }
}

const HALTON_BASES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut fraction = 1.0 / base as f64;
    while index > 0 {
        result += (index % base) as f64 * fraction;
        index /= base;
        fraction /= base as f64;
    }
    result
}

/// The `index`-th point of the Halton low-discrepancy sequence in the unit
/// cube of dimension `dim` (at most 10). Deterministic by construction, which
/// keeps multi-start fits reproducible across platforms.
pub fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= HALTON_BASES.len());
    HALTON_BASES[..dim]
        .iter()
        .map(|&b| radical_inverse(index + 1, b))
        .collect()
}
