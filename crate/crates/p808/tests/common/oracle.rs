//! Brute-force reference implementations, written from the textbook
//! definitions and sharing no code with the library.

use p808_core::stats::{fisher_z_test, fit_mapping, icc_2_1, pcc, rmse, srcc, Aggregate, RunMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub const TOL: f64 = 1e-9;

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        sx += x[i];
        sy += y[i];
    }
    let (mx, my) = (sx / n, sy / n);
    for i in 0..x.len() {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Rank by counting: 1 + values below + half the other ties.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let below = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

pub fn root_mean_square(x: &[f64], y: &[f64]) -> f64 {
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    (s / x.len() as f64).sqrt()
}

/// Least squares through the normal equations on standardized x, solved by
/// Gauss-Jordan elimination. Returns the fitted values at `at`.
pub fn polyfit_predict(x: &[f64], y: &[f64], order: usize, at: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let s = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    let z = |v: f64| (v - m) / s;
    let p = order + 1;
    let mut a = vec![vec![0.0; p + 1]; p];
    for (xi, yi) in x.iter().zip(y) {
        let zi = z(*xi);
        for (r, row) in a.iter_mut().enumerate() {
            for (c, cell) in row[..p].iter_mut().enumerate() {
                *cell += zi.powi((r + c) as i32);
            }
            row[p] += zi.powi(r as i32) * yi;
        }
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot[col];
                for (cell, pv) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *cell -= f * pv;
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|r| a[r][p] / a[r][r]).collect();
    at.iter()
        .map(|v| beta.iter().enumerate().map(|(k, b)| b * z(*v).powi(k as i32)).sum())
        .collect()
}

/// ICC(2,1) from explicit sums of squares; rows are targets.
pub fn icc21(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let k = m[0].len();
    let grand = m.iter().flatten().sum::<f64>() / (n * k) as f64;
    let row: Vec<f64> = m.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let col: Vec<f64> = (0..k).map(|j| m.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let ssr: f64 = row.iter().map(|r| k as f64 * (r - grand).powi(2)).sum();
    let ssc: f64 = col.iter().map(|c| n as f64 * (c - grand).powi(2)).sum();
    let mut sse = 0.0;
    for i in 0..n {
        for j in 0..k {
            sse += (m[i][j] - row[i] - col[j] + grand).powi(2);
        }
    }
    let msr = ssr / (n - 1) as f64;
    let msc = ssc / (k - 1) as f64;
    let mse = sse / ((n - 1) * (k - 1)) as f64;
    (msr - mse) / (msr + (k - 1) as f64 * mse + k as f64 / n as f64 * (msc - mse))
}

pub fn fisher(r1: f64, n1: usize, r2: f64, n2: usize, alpha: f64) -> (f64, bool) {
    let atanh = |r: f64| 0.5 * ((1.0 + r) / (1.0 - r)).ln();
    let z = (atanh(r1) - atanh(r2)) / (1.0 / (n1 as f64 - 3.0) + 1.0 / (n2 as f64 - 3.0)).sqrt();
    let crit = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha / 2.0);
    (z, z.abs() > crit)
}

/// Mean, sample SD and t-based 95% half-width.
pub fn summary(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 1.0).unwrap().inverse_cdf(0.975);
    (mean, sd, t * sd / n.sqrt())
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol * want.abs().max(1.0) {
        Ok(())
    } else {
        Err(format!("{what}: library {got} vs oracle {want}"))
    }
}

fn sample(rng: &mut ChaCha8Rng, n: usize, tied: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if tied {
                rng.random_range(1..=5) as f64
            } else {
                rng.random_range(-5.0..5.0)
            }
        })
        .collect()
}

fn varied(v: &[f64]) -> bool {
    v.iter().any(|a| (a - v[0]).abs() > 1e-3)
}

/// Checks every statistic against its oracle on `instances` random inputs
/// of size at most 10. Returns the number of comparisons made.
pub fn run_suite(instances: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    let mut done = 0;
    while done < instances {
        let n = rng.random_range(4..=10);
        let tied = rng.random_bool(0.3);
        let x = sample(&mut rng, n, tied);
        let y = sample(&mut rng, n, tied);
        if !varied(&x) || !varied(&y) {
            continue;
        }
        done += 1;
        let ctx = |e: String| format!("instance {done} (n = {n}): {e}");

        close("pcc", pcc(&x, &y).map_err(|e| e.to_string())?, pearson(&x, &y), TOL).map_err(ctx)?;
        close("srcc", srcc(&x, &y).map_err(|e| e.to_string())?, spearman(&x, &y), TOL).map_err(ctx)?;
        close(
            "rmse",
            rmse(&x, &y).map_err(|e| e.to_string())?,
            root_mean_square(&x, &y),
            TOL,
        )
        .map_err(ctx)?;

        let distinct = {
            let mut d = x.clone();
            d.sort_by(f64::total_cmp);
            d.dedup();
            d.len()
        };
        for order in [1, 3] {
            if distinct < order + 1 {
                continue;
            }
            let model = fit_mapping(&x, &y, order).map_err(|e| ctx(format!("fit order {order}: {e}")))?;
            let want = polyfit_predict(&x, &y, order, &x);
            for (g, w) in model.apply_all(&x).iter().zip(&want) {
                close(&format!("mapping order {order}"), *g, *w, TOL).map_err(ctx)?;
            }
            close("fit rmse", model.fit_rmse, root_mean_square(&want, &y), TOL).map_err(ctx)?;
            checks += 2;
        }

        let k = rng.random_range(2..=5);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| sample(&mut rng, k, false)).collect();
        let icc = icc_2_1(&RunMatrix::new(rows.clone()).map_err(|e| e.to_string())?);
        close("icc", icc.icc, icc21(&rows), TOL).map_err(ctx)?;

        let (r1, r2) = (rng.random_range(-0.99..0.99), rng.random_range(-0.99..0.99));
        let (n1, n2) = (rng.random_range(4..=60), rng.random_range(4..=60));
        let f = fisher_z_test(r1, n1, r2, n2, 0.05).map_err(|e| e.to_string())?;
        let (z, sig) = fisher(r1, n1, r2, n2, 0.05);
        close("fisher z", f.z_stat, z, TOL).map_err(ctx)?;
        if f.significant != sig {
            return Err(ctx(format!("fisher decision differs at z = {z}")));
        }

        let agg = Aggregate::from_values("k", &x).unwrap();
        let (m, sd, ci) = summary(&x);
        close("mos", agg.mos, m, TOL).map_err(ctx)?;
        close("sd", agg.sd.unwrap(), sd, TOL).map_err(ctx)?;
        close("ci95", agg.ci95.unwrap(), ci, TOL).map_err(ctx)?;
        checks += 9;
    }
    Ok(checks)
}
