//! Derivative-free minimization for small parametric strategy searches.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop once the simplex's value spread falls below this.
    pub ftol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iter: 4000,
            ftol: 1e-15,
            initial_step: 0.3,
        }
    }
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½). Returns the best vertex.
pub fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let along = |from: &[f64], to: &[f64], t: f64| -> Vec<f64> {
        from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
    };
    for _ in 0..opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[n].1 - simplex[0].1 <= opts.ftol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v.0[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].0.clone();
        let refl = along(&worst, &centroid, 2.0);
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = along(&worst, &centroid, 3.0);
            let fe = f(&exp);
            simplex[n] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (refl, fr);
        } else {
            let (target, ft) = if fr < simplex[n].1 {
                (&refl, fr)
            } else {
                (&worst, simplex[n].1)
            };
            let con = along(&centroid, target, 0.5);
            let fc = f(&con);
            if fc < ft {
                simplex[n] = (con, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = along(&best, &v.0, 0.5);
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Nelder–Mead from each given start plus `random` uniform starts in `[lo, hi)^n`; best result wins.
pub fn multistart(
    f: &impl Fn(&[f64]) -> f64,
    starts: &[Vec<f64>],
    random: usize,
    (lo, hi): (f64, f64),
    rng: &mut ChaCha8Rng,
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64) {
    let n = starts.first().map(Vec::len).unwrap_or(0);
    let mut all = starts.to_vec();
    all.extend((0..random).map(|_| (0..n).map(|_| rng.random_range(lo..hi)).collect()));
    all.iter()
        .map(|x0| {
            // A restart from the first result escapes premature collapse of the simplex.
            let (x, _) = nelder_mead(f, x0, opts);
            nelder_mead(
                f,
                &x,
                &NelderMeadOptions {
                    initial_step: opts.initial_step * 0.1,
                    ..*opts
                },
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or_else(|| (Vec::new(), f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn finds_rosenbrock_minimum() {
        let rosen = |v: &[f64]| (1.0 - v[0]).powi(2) + 100.0 * (v[1] - v[0] * v[0]).powi(2);
        let (x, fx) = nelder_mead(&rosen, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!(fx < 1e-10, "{fx}");
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn multistart_escapes_local_minimum() {
        // Double well with the deeper minimum at x = −1.
        let f = |v: &[f64]| (v[0] * v[0] - 1.0).powi(2) + 0.3 * v[0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, _) = multistart(
            &f,
            &[vec![1.0]],
            8,
            (-2.0, 2.0),
            &mut rng,
            &NelderMeadOptions::default(),
        );
        assert!(x[0] < 0.0);
    }
}
