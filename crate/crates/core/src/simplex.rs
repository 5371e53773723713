//! Nelder-Mead downhill simplex for unconstrained value-only minimisation.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iter: usize,
    /// Stop once every vertex lies within this distance of the best one.
    pub xtol: f64,
    /// Stop once `f_worst - f_best <= ftol * (1 + |f_best|)`.
    pub ftol: f64,
    /// Initial edge length along each coordinate.
    pub step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iter: 2000,
            xtol: 1e-12,
            ftol: 1e-14,
            step: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

pub fn minimize<F>(f: F, x0: &[f64], opts: &SimplexOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if dim == 0 {
        return Minimum {
            x: Vec::new(),
            value: eval(x0),
            iterations: 0,
        };
    }

    let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    pts.push((x0.to_vec(), eval(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += opts.step;
        let v = eval(&x);
        pts.push((x, v));
    }

    let mut iterations = 0;
    while iterations < opts.max_iter {
        pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = pts[0].1;
        let worst = pts[dim].1;
        let size = pts[1..]
            .iter()
            .map(|(x, _)| dist(x, &pts[0].0))
            .fold(0.0, f64::max);
        if size <= opts.xtol || (worst - best) <= opts.ftol * (1.0 + best.abs()) {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &pts[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let toward = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[dim].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = toward(-1.0);
        let fr = eval(&xr);
        if fr < pts[0].1 {
            let xe = toward(-2.0);
            let fe = eval(&xe);
            pts[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[dim - 1].1 {
            pts[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < pts[dim].1 {
            let xc = toward(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = toward(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < pts[dim].1.min(fr) {
            pts[dim] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = pts[0].0.clone();
        for p in pts.iter_mut().skip(1) {
            for (xi, bi) in p.0.iter_mut().zip(&best_x) {
                *xi = bi + 0.5 * (*xi - bi);
            }
            p.1 = eval(&p.0);
        }
    }
    pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (x, value) = pts.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iter: 5000,
            ftol: 0.0,
            ..Default::default()
        };
        let m = minimize(f, &[-1.2, 1.0], &opts);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn nonsmooth_max_of_abs() {
        let f = |x: &[f64]| (x[0] - 0.3).abs().max((x[1] + 2.0).abs()) + (x[2] - 1.0).abs();
        let m = minimize(f, &[0.0, 0.0, 0.0], &SimplexOptions::default());
        assert!(m.value < 1e-6, "{m:?}");
    }

    #[test]
    fn respects_iteration_cap() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let opts = SimplexOptions {
            max_iter: 3,
            ..Default::default()
        };
        assert!(minimize(f, &[5.0, 5.0], &opts).iterations <= 3);
    }
}
