//! Small numerical kernels shared by the models: scaled Bessel I0,
//! adaptive Gauss-Kronrod quadrature, a Nelder-Mead simplex minimizer and
//! a few sample statistics.

/// Exponentially scaled modified Bessel function of the first kind,
/// `exp(-|x|) * I0(x)`.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 25.0 {
        // power series, all terms positive
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // asymptotic expansion, truncated at its smallest term
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
            if next < 1e-17 * sum || next > term {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// Natural log of `I0(x)`, safe for large arguments.
pub fn ln_bessel_i0(x: f64) -> f64 {
    bessel_i0e(x).ln() + x.abs()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel; returns (estimate, error estimate).
pub fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// The interval is first cut into `panels` equal pieces so that narrow
/// peaks are not missed, then each piece is bisected until its error
/// estimate falls under its share of `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut stack: Vec<(f64, f64, f64, usize)> = Vec::with_capacity(64);
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        stack.push((lo, hi, abs_tol / panels as f64, 0));
        while let Some((lo, hi, tol, depth)) = stack.pop() {
            let (est, err) = gauss_kronrod_15(&f, lo, hi);
            if err <= tol || depth >= 40 || hi - lo < 1e-14 * (1.0 + lo.abs()) {
                total += est;
            } else {
                let mid = 0.5 * (lo + hi);
                stack.push((lo, mid, 0.5 * tol, depth + 1));
                stack.push((mid, hi, 0.5 * tol, depth + 1));
            }
        }
    }
    total
}

/// Result of a simplex minimization.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead downhill simplex minimizer.
///
/// `step` gives the initial simplex edge along each coordinate. Stops when
/// the spread of function values drops below `f_tol` and the simplex
/// diameter below `x_tol`, or after `max_evals` evaluations.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    step: &[f64],
    f_tol: f64,
    x_tol: f64,
    max_evals: usize,
) -> Minimum {
    let dim = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(start, &mut evals);
    simplex.push((start.to_vec(), v0));
    for i in 0..dim {
        let mut x = start.to_vec();
        x[i] += step[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (worst - best).abs() <= f_tol * (1.0 + best.abs()) && diameter <= x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let along = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = along(alpha, &simplex[dim].0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(gamma, &simplex[dim].0);
            let fe = eval(&xe, &mut evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[dim].1 {
            let xc = along(rho, &simplex[dim].0);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho, &simplex[dim].0);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < simplex[dim].1.min(fr) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            for (xi, bi) in vertex.0.iter_mut().zip(&best_x) {
                *xi = bi + sigma * (*xi - bi);
            }
            vertex.1 = eval(&vertex.0, &mut evals);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations: evals,
        converged,
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pearson correlation coefficient of two equally long samples.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}
