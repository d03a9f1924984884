//! Raw matrix kernels over row-major slices. All loops run in a fixed
//! order so results are bit-reproducible.

/// `c[m,n] += a[m,k] · b[k,n]`
pub(crate) fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (c_ij, &b_pj) in c_row.iter_mut().zip(b_row) {
                *c_ij += a_ip * b_pj;
            }
        }
    }
}

/// `c[m,k] += g[m,n] · b[k,n]ᵀ`
pub(crate) fn gemm_nt(g: &[f64], b: &[f64], c: &mut [f64], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            let mut acc = 0.0;
            for (x, y) in g_row.iter().zip(b_row) {
                acc += x * y;
            }
            c[i * k + p] += acc;
        }
    }
}

/// `c[k,n] += a[m,k]ᵀ · g[m,n]`
pub(crate) fn gemm_tn(a: &[f64], g: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let g_row = &g[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (c_pj, &g_ij) in c_row.iter_mut().zip(g_row) {
                *c_pj += a_ip * g_ij;
            }
        }
    }
}
