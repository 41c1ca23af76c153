//! Dense row-major helpers on flat slices.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `uᵀ·M·v` for a square `n×n` matrix.
pub fn bilinear(u: &[f64], m: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    debug_assert_eq!(m.len(), n * n);
    u.iter()
        .enumerate()
        .map(|(i, ui)| ui * dot(&m[i * n..(i + 1) * n], v))
        .sum()
}

/// `out = M·x` with `M` of shape `rows × x.len()`.
pub fn matvec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(m.len(), out.len() * cols);
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * cols..(i + 1) * cols], x);
    }
}

/// `out += Mᵀ·y` with `M` of shape `y.len() × out.len()`.
pub fn matvec_t_add(m: &[f64], y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    debug_assert_eq!(m.len(), y.len() * cols);
    for (i, yi) in y.iter().enumerate() {
        if *yi == 0.0 {
            continue;
        }
        for (o, mij) in out.iter_mut().zip(&m[i * cols..(i + 1) * cols]) {
            *o += mij * yi;
        }
    }
}

/// `M += scale · a·bᵀ`.
pub fn add_outer(m: &mut [f64], a: &[f64], b: &[f64], scale: f64) {
    let cols = b.len();
    debug_assert_eq!(m.len(), a.len() * cols);
    for (i, ai) in a.iter().enumerate() {
        let s = scale * ai;
        if s == 0.0 {
            continue;
        }
        for (mij, bj) in m[i * cols..(i + 1) * cols].iter_mut().zip(b) {
            *mij += s * bj;
        }
    }
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
