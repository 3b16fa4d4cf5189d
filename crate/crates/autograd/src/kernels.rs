//! Dense f64 kernels with runtime AVX2/FMA dispatch on x86-64.

#[inline(always)]
fn fmadd<const FMA: bool>(a: f64, b: f64, c: f64) -> f64 {
    if FMA {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

#[inline(always)]
fn dot_impl<const FMA: bool>(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for j in 0..8 {
            acc[j] = fmadd::<FMA>(x[j], y[j], acc[j]);
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = fmadd::<FMA>(*x, *y, tail);
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline(always)]
fn axpy_impl<const FMA: bool>(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = fmadd::<FMA>(alpha, *xi, *yi);
    }
}

#[inline(always)]
fn matvec_impl<const FMA: bool>(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o = dot_impl::<FMA>(row, x);
    }
}

#[inline(always)]
fn matvec_t_acc_impl<const FMA: bool>(w: &[f64], cols: usize, dy: &[f64], dx: &mut [f64]) {
    for (g, row) in dy.iter().zip(w.chunks_exact(cols)) {
        if *g != 0.0 {
            axpy_impl::<FMA>(dx, *g, row);
        }
    }
}

#[inline(always)]
fn outer_acc_impl<const FMA: bool>(dw: &mut [f64], cols: usize, dy: &[f64], x: &[f64]) {
    for (g, row) in dy.iter().zip(dw.chunks_exact_mut(cols)) {
        if *g != 0.0 {
            axpy_impl::<FMA>(row, *g, x);
        }
    }
}

macro_rules! dispatch {
    ($(#[$doc:meta])* pub fn $name:ident($($arg:ident: $ty:ty),*) $(-> $ret:ty)? => $imp:ident) => {
        $(#[$doc])*
        pub fn $name($($arg: $ty),*) $(-> $ret)? {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx2,fma")]
                unsafe fn fast($($arg: $ty),*) $(-> $ret)? {
                    $imp::<true>($($arg),*)
                }
                if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
                    // SAFETY: the required CPU features were detected at runtime.
                    return unsafe { fast($($arg),*) };
                }
            }
            $imp::<false>($($arg),*)
        }
    };
}

dispatch!(
    /// Inner product over the common prefix of `a` and `b`.
    pub fn dot(a: &[f64], b: &[f64]) -> f64 => dot_impl
);
dispatch!(
    /// `y += alpha * x`
    pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) => axpy_impl
);
dispatch!(
    /// `out = W x` for row-major `W` with `cols` columns.
    pub fn matvec(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) => matvec_impl
);
dispatch!(
    /// `dx += W^T dy`
    pub fn matvec_t_acc(w: &[f64], cols: usize, dy: &[f64], dx: &mut [f64]) => matvec_t_acc_impl
);
dispatch!(
    /// `dW += dy x^T`
    pub fn outer_acc(dw: &mut [f64], cols: usize, dy: &[f64], x: &[f64]) => outer_acc_impl
);

/// `out = A B` with `A: [m, k]`, `B: [k, n]`, all row-major.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s != 0.0 {
                axpy(row, s, &b[p * n..(p + 1) * n]);
            }
        }
    }
}
