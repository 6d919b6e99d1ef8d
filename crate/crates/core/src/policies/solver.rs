//! Deterministic maximization of a reward over a confidence box.
//!
//! Scalar intervals use golden-section search seeded by a 33-point grid, so
//! monotone, unimodal and mildly multimodal objectives are all handled.
//! Two-dimensional boxes use a 33×33 grid refined by one local
//! coordinate-descent pass. Argument tolerance is 1e-6.

/// Grid points per dimension for the seeding pass.
const GRID: usize = 33;
/// Argument tolerance of the refinement search.
const ARG_TOL: f64 = 1e-6;
const MAX_GOLDEN_ITERS: usize = 200;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a box maximization.
#[derive(Debug, Clone)]
pub struct BoxMax {
    pub argmax: Vec<f64>,
    pub value: f64,
    /// Set when refinement did not reach tolerance and the grid value was
    /// used as-is.
    pub fallback: bool,
}

/// Maximizes `f` over the axis-aligned box `[lo_i, hi_i]` per dimension.
pub fn maximize_over_box<F: Fn(&[f64]) -> f64>(f: F, lo: &[f64], hi: &[f64]) -> BoxMax {
    assert_eq!(lo.len(), hi.len(), "box bounds must agree in dimension");
    assert!(!lo.is_empty(), "box must have at least one dimension");
    let bounds: Vec<(f64, f64)> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| (a.min(b), a.max(b)))
        .collect();

    if bounds.iter().all(|(a, b)| b - a <= ARG_TOL) {
        let x: Vec<f64> = bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect();
        let value = f(&x);
        return BoxMax {
            argmax: x,
            value,
            fallback: false,
        };
    }

    match bounds.len() {
        1 => maximize_1d(f, bounds[0]),
        2 => maximize_2d(f, bounds[0], bounds[1]),
        _ => maximize_nd(f, &bounds),
    }
}

fn grid_coord(lo: f64, hi: f64, i: usize) -> f64 {
    lo + (hi - lo) * i as f64 / (GRID - 1) as f64
}

fn maximize_1d<F: Fn(&[f64]) -> f64>(f: F, (lo, hi): (f64, f64)) -> BoxMax {
    let g = |x: f64| f(&[x]);
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    let mut best_x = lo;
    for i in 0..GRID {
        let x = grid_coord(lo, hi, i);
        let v = g(x);
        if v > best_v {
            best_v = v;
            best_i = i;
            best_x = x;
        }
    }
    // refine inside the bracket around the best grid point
    let a = grid_coord(lo, hi, best_i.saturating_sub(1));
    let b = grid_coord(lo, hi, (best_i + 1).min(GRID - 1));
    let (x, v, converged) = golden_max(&g, a, b);
    if v > best_v {
        best_v = v;
        best_x = x;
    }
    BoxMax {
        argmax: vec![best_x],
        value: best_v,
        fallback: !converged,
    }
}

/// Golden-section maximization on `[a, b]`; returns the best probe, its
/// value, and whether the bracket shrank below tolerance.
fn golden_max<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64) -> (f64, f64, bool) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    let mut iters = 0;
    while b - a > ARG_TOL && iters < MAX_GOLDEN_ITERS {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = g(x2);
        }
        iters += 1;
    }
    let converged = b - a <= ARG_TOL;
    if f1 >= f2 {
        (x1, f1, converged)
    } else {
        (x2, f2, converged)
    }
}

fn maximize_2d<F: Fn(&[f64]) -> f64>(f: F, bx: (f64, f64), by: (f64, f64)) -> BoxMax {
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for i in 0..GRID {
        let x = grid_coord(bx.0, bx.1, i);
        for j in 0..GRID {
            let y = grid_coord(by.0, by.1, j);
            let v = f(&[x, y]);
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    let (mut best_v, bi, bj) = best;
    let mut best_pt = [grid_coord(bx.0, bx.1, bi), grid_coord(by.0, by.1, bj)];

    // one coordinate-descent pass, bracketed one grid cell around the best
    let mut converged = true;
    let step_x = (bx.1 - bx.0) / (GRID - 1) as f64;
    let step_y = (by.1 - by.0) / (GRID - 1) as f64;
    for dim in 0..2 {
        let (lo, hi, step) = if dim == 0 {
            (bx.0, bx.1, step_x)
        } else {
            (by.0, by.1, step_y)
        };
        let a = (best_pt[dim] - step).max(lo);
        let b = (best_pt[dim] + step).min(hi);
        if b - a <= ARG_TOL {
            continue;
        }
        let other = best_pt[1 - dim];
        let g = |t: f64| {
            let pt = if dim == 0 { [t, other] } else { [other, t] };
            f(&pt)
        };
        let (t, v, ok) = golden_max(&g, a, b);
        converged &= ok;
        if v > best_v {
            best_v = v;
            best_pt[dim] = t;
        }
    }
    BoxMax {
        argmax: best_pt.to_vec(),
        value: best_v,
        fallback: !converged,
    }
}

/// Higher-dimensional boxes: coordinate descent from the box center and both
/// corners, two sweeps each. Not exercised by the shipped environments.
fn maximize_nd<F: Fn(&[f64]) -> f64>(f: F, bounds: &[(f64, f64)]) -> BoxMax {
    let n = bounds.len();
    let starts = [
        bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>(),
        bounds.iter().map(|(a, _)| *a).collect::<Vec<_>>(),
        bounds.iter().map(|(_, b)| *b).collect::<Vec<_>>(),
    ];
    let mut best_pt = starts[0].clone();
    let mut best_v = f(&best_pt);
    let mut converged = true;
    for start in &starts {
        let mut pt = start.clone();
        let mut v = f(&pt);
        for _sweep in 0..2 {
            for dim in 0..n {
                let (lo, hi) = bounds[dim];
                if hi - lo <= ARG_TOL {
                    continue;
                }
                let g = |t: f64| {
                    let mut p = pt.clone();
                    p[dim] = t;
                    f(&p)
                };
                let (t, gv, ok) = golden_max(&g, lo, hi);
                converged &= ok;
                if gv > v {
                    v = gv;
                    pt[dim] = t;
                }
            }
        }
        if v > best_v {
            best_v = v;
            best_pt = pt;
        }
    }
    BoxMax {
        argmax: best_pt,
        value: best_v,
        fallback: !converged,
    }
}
