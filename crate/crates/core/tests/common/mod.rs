#![allow(dead_code, clippy::needless_range_loop)]

use autotune::rbgs::Grid;
use autotune::NumericalOptimizer;

/// Textbook Nelder-Mead in closed-loop form. The cost function is called
/// directly and every evaluated point is appended to the returned trace.
/// Reflection and expansion are clipped to `[-1, 1]`. `max_evals == 0`
/// means no cap.
pub fn batch_nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    start: Vec<Vec<f64>>,
    tol: f64,
    max_evals: usize,
) -> Vec<Vec<f64>> {
    struct Budget<F> {
        f: F,
        trace: Vec<Vec<f64>>,
        cap: usize,
    }
    impl<F: Fn(&[f64]) -> f64> Budget<F> {
        fn eval(&mut self, x: &[f64]) -> Option<f64> {
            if self.cap > 0 && self.trace.len() >= self.cap {
                return None;
            }
            self.trace.push(x.to_vec());
            Some((self.f)(x))
        }
    }

    let n = start.len() - 1;
    let mut b = Budget {
        f,
        trace: Vec::new(),
        cap: max_evals,
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::new();
    for x in start {
        let Some(fx) = b.eval(&x) else { return b.trace };
        simplex.push((x, fx));
    }

    let clip = |v: f64| v.clamp(-1.0, 1.0);
    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let fs: Vec<f64> = simplex.iter().map(|s| s.1).collect();
        let mean = fs.iter().sum::<f64>() / fs.len() as f64;
        let var = fs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if var.sqrt() < tol {
            return b.trace;
        }

        let mut shrink = (fs[n] - fs[0]).abs() <= 1e-15;
        if !shrink {
            let mut xo = vec![0.0; n];
            for (d, c) in xo.iter_mut().enumerate() {
                let mut s = 0.0;
                for v in &simplex[..n] {
                    s += v.0[d];
                }
                *c = s / n as f64;
            }
            let worst = simplex[n].0.clone();
            let xr: Vec<f64> = (0..n).map(|d| clip(xo[d] + (xo[d] - worst[d]))).collect();
            let Some(fr) = b.eval(&xr) else {
                return b.trace;
            };

            if fr < fs[0] {
                let xe: Vec<f64> = (0..n)
                    .map(|d| clip(xo[d] + 2.0 * (xr[d] - xo[d])))
                    .collect();
                let Some(fe) = b.eval(&xe) else {
                    return b.trace;
                };
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < fs[n - 1] {
                simplex[n] = (xr, fr);
            } else if fr < fs[n] {
                let xc: Vec<f64> = (0..n).map(|d| xo[d] + 0.5 * (xr[d] - xo[d])).collect();
                let Some(fc) = b.eval(&xc) else {
                    return b.trace;
                };
                if fc <= fr {
                    simplex[n] = (xc, fc);
                } else {
                    shrink = true;
                }
            } else {
                let xc: Vec<f64> = (0..n).map(|d| xo[d] + 0.5 * (worst[d] - xo[d])).collect();
                let Some(fc) = b.eval(&xc) else {
                    return b.trace;
                };
                if fc < fs[n] {
                    simplex[n] = (xc, fc);
                } else {
                    shrink = true;
                }
            }
        }

        if shrink {
            let best = simplex[0].0.clone();
            for i in 1..=n {
                let x: Vec<f64> = (0..n)
                    .map(|d| best[d] + 0.5 * (simplex[i].0[d] - best[d]))
                    .collect();
                let Some(fx) = b.eval(&x) else { return b.trace };
                simplex[i] = (x, fx);
            }
        }
    }
}

/// Drives a staged optimizer on `f` and returns every point it asked to
/// have evaluated (the final answer is not included).
pub fn staged_trace(opt: &mut dyn NumericalOptimizer, f: impl Fn(&[f64]) -> f64) -> Vec<Vec<f64>> {
    let mut trace = Vec::new();
    let mut cost = f64::NAN;
    loop {
        let p = opt.run(cost);
        if opt.is_end() {
            return trace;
        }
        cost = f(p.coords());
        trace.push(p.into_coords());
    }
}

/// Serial red-black Gauss-Seidel sweep: cells with odd `i + j` first, then
/// even, in plain row-major order. Returns the summed absolute change.
pub fn serial_sweep(g: &mut Grid) -> f64 {
    let n = g.n();
    let mut diff = 0.0;
    for parity in [1, 0] {
        for i in 1..=n {
            for j in 1..=n {
                if (i + j) % 2 != parity {
                    continue;
                }
                let old = g.get(i, j);
                let new =
                    0.25 * (g.get(i - 1, j) + g.get(i + 1, j) + g.get(i, j - 1) + g.get(i, j + 1));
                g.set(i, j, new);
                diff += (new - old).abs();
            }
        }
    }
    diff
}

/// Grid with an uneven boundary and a scrambled interior.
pub fn scrambled_grid(n: usize) -> Grid {
    let mut g = Grid::with_boundary(n, 0.0, |i, j| ((i * 7 + j * 3) % 5) as f64).unwrap();
    for i in 1..=n {
        for j in 1..=n {
            g.set(i, j, ((i * 31 + j * 17) % 11) as f64 / 11.0);
        }
    }
    g
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
