//! Uniform-grid stencils shared by the solver and the verifier.

/// Fourth-order first derivative: central in the interior, one-sided at the two
/// outermost points on each side. Needs n ≥ 5.
pub fn d1_4(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    assert!(n >= 5 && out.len() == n);
    const E0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const E1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    let r = 1.0 / (12.0 * h);
    for i in 2..n - 2 {
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * r;
    }
    let dot = |c: &[f64; 5], g: &dyn Fn(usize) -> f64| c.iter().enumerate().map(|(k, c)| c * g(k)).sum::<f64>();
    out[0] = dot(&E0, &|k| f[k]) * r;
    out[1] = dot(&E1, &|k| f[k]) * r;
    out[n - 1] = -dot(&E0, &|k| f[n - 1 - k]) * r;
    out[n - 2] = -dot(&E1, &|k| f[n - 1 - k]) * r;
}

pub fn d1_4_vec(f: &[f64], h: f64) -> Vec<f64> {
    let mut o = vec![0.0; f.len()];
    d1_4(f, h, &mut o);
    o
}

/// Peak of the modified wavenumber of the central stencil, in units of 1/h.
pub fn d1_4_peak_wavenumber() -> f64 {
    let c = (8.0 - 96f64.sqrt()) / 8.0;
    let th = c.acos();
    (8.0 * th.sin() - (2.0 * th).sin()) / 6.0
}

/// Fourth-order increments ∫ f over each cell [k, k+1] of a uniform grid. Needs n ≥ 4.
pub fn cell_integrals(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4);
    let w = h / 24.0;
    (0..n - 1)
        .map(|k| {
            if k == 0 {
                w * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
            } else if k == n - 2 {
                w * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4])
            } else {
                w * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2])
            }
        })
        .collect()
}

/// Running integral with value 0 at index 0.
pub fn cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    out.push(0.0);
    let mut acc = 0.0;
    for v in cell_integrals(f, h) {
        acc += v;
        out.push(acc);
    }
    out
}

/// Lagrange weights for nodes 0..m−1 at fractional position s.
pub fn lagrange_weights(s: f64, m: usize, w: &mut [f64]) {
    for k in 0..m {
        let mut p = 1.0;
        for l in 0..m {
            if l != k {
                p *= (s - l as f64) / (k as f64 - l as f64);
            }
        }
        w[k] = p;
    }
}

/// log2(e_coarse / e_fine).
pub fn order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}
