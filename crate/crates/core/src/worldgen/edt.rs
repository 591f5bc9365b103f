//! Exact squared Euclidean distance transform on N-d grids.
//!
//! Separable lower-envelope-of-parabolas pass along each axis. Distances are
//! in cell units; with integer inputs every output is an exact integer.

/// Squared distance from every cell center to the nearest cell with
/// `feature[c] == true`. Cells with no feature anywhere get `f64::INFINITY`.
/// Layout: axis 0 varies fastest.
pub fn squared_edt(shape: &[usize], feature: &[bool]) -> Vec<f64> {
    let len: usize = shape.iter().product();
    assert_eq!(len, feature.len());
    let mut grid: Vec<f64> = feature
        .iter()
        .map(|&f| if f { 0.0 } else { f64::INFINITY })
        .collect();

    let max_n = shape.iter().copied().max().unwrap_or(0);
    let mut line = vec![0.0; max_n];
    let mut out = vec![0.0; max_n];
    let mut v = vec![0usize; max_n];
    let mut z = vec![0.0; max_n + 1];

    let mut stride = 1;
    for &n in shape {
        // Each line along this axis starts at a base index whose coordinate
        // on the axis is zero.
        for base in 0..len {
            if (base / stride) % n != 0 {
                continue;
            }
            for q in 0..n {
                line[q] = grid[base + q * stride];
            }
            lower_envelope(&line[..n], &mut out[..n], &mut v, &mut z);
            for q in 0..n {
                grid[base + q * stride] = out[q];
            }
        }
        stride *= n;
    }
    grid
}

fn lower_envelope(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}
