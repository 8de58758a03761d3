//! Dense kernels shared by the tape and by tape-free inference.

use super::Real;

/// Read-only strided matrix view.
#[derive(Clone, Copy)]
pub struct Mat<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a, T> Mat<'a, T> {
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        Mat { data, rows, cols, rs: cols, cs: 1 }
    }

    pub fn strided(data: &'a [T], rows: usize, cols: usize, rs: usize) -> Self {
        Mat { data, rows, cols, rs, cs: 1 }
    }

    pub fn t(self) -> Self {
        Mat { rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs, ..self }
    }

    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            let last = (self.rows - 1) * self.rs + (self.cols - 1) * self.cs;
            assert!(last < self.data.len(), "matrix view out of bounds");
        }
    }
}

/// Writable strided matrix view.
pub struct MatMut<'a, T> {
    pub data: &'a mut [T],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
}

impl<'a, T> MatMut<'a, T> {
    pub fn new(data: &'a mut [T], rows: usize, cols: usize) -> Self {
        MatMut { data, rows, cols, rs: cols }
    }

    pub fn strided(data: &'a mut [T], rows: usize, cols: usize, rs: usize) -> Self {
        MatMut { data, rows, cols, rs }
    }
}

/// `c = alpha·a·b + beta·c`.
pub fn gemm<T: Real>(alpha: T, a: Mat<T>, b: Mat<T>, beta: T, c: MatMut<T>) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!(a.rows, c.rows, "gemm rows");
    assert_eq!(b.cols, c.cols, "gemm cols");
    a.check();
    b.check();
    if c.rows > 0 && c.cols > 0 {
        assert!((c.rows - 1) * c.rs + c.cols - 1 < c.data.len(), "output view out of bounds");
        assert!(c.rs >= c.cols, "output rows overlap");
    }
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    if a.rows <= 4 && (b.cs == 1 || b.rs == 1) {
        small_rows(alpha, a, b, beta, c);
        return;
    }
    // SAFETY: every index touched is bounded by the checks above, and the
    // output rows do not overlap, so no element is written twice.
    unsafe {
        T::gemm_raw(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr(),
            c.rs as isize,
            1,
        );
    }
}

/// Few-row product without packing; `b` must be contiguous along one axis.
fn small_rows<T: Real>(alpha: T, a: Mat<T>, b: Mat<T>, beta: T, c: MatMut<T>) {
    let n = b.cols;
    for i in 0..a.rows {
        let out = &mut c.data[i * c.rs..i * c.rs + n];
        if beta == T::zero() {
            out.iter_mut().for_each(|v| *v = T::zero());
        } else if beta != T::one() {
            out.iter_mut().for_each(|v| *v *= beta);
        }
        let arow = |k: usize| a.data[i * a.rs + k * a.cs];
        if b.cs == 1 {
            for k in 0..a.cols {
                let s = alpha * arow(k);
                if s == T::zero() {
                    continue;
                }
                let brow = &b.data[k * b.rs..k * b.rs + n];
                for (o, &bv) in out.iter_mut().zip(brow) {
                    *o += s * bv;
                }
            }
        } else {
            for (j, o) in out.iter_mut().enumerate() {
                let bcol = &b.data[j * b.cs..j * b.cs + a.cols];
                let mut acc = T::zero();
                for (k, &bv) in bcol.iter().enumerate() {
                    acc += arow(k) * bv;
                }
                *o += alpha * acc;
            }
        }
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Buffers saved by a GRU forward pass for backward.
pub struct GruTrace<T> {
    /// Input projections plus bias, `[rows, 3H]` in (z, r, candidate) order.
    pub gates_in: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub cand: Vec<T>,
    /// `r ⊙ h_prev`
    pub rh: Vec<T>,
    pub h_prev: Vec<T>,
}

/// Weights of one GRU layer:
/// `z = σ(x·Wz + h·Uz + bz)`, `r = σ(x·Wr + h·Ur + br)`,
/// `h̃ = tanh(x·Wh + (r⊙h)·Uh + bh)`, `h' = (1−z)⊙h + z⊙h̃`.
#[derive(Clone, Copy)]
pub struct GruWeights<'a, T> {
    /// `[in, 3H]`
    pub wx: &'a [T],
    /// `[H, 2H]`
    pub uzr: &'a [T],
    /// `[H, H]`
    pub uh: &'a [T],
    /// `[3H]`
    pub b: &'a [T],
    pub input: usize,
    pub hidden: usize,
}

/// Runs a GRU over `x` of shape `[n, steps, in]` from `h0` (`[n, H]`).
/// Returns all hidden states `[n, steps, H]` and the trace.
pub fn gru_forward<T: Real>(
    w: GruWeights<T>,
    x: &[T],
    h0: &[T],
    n: usize,
    steps: usize,
) -> (Vec<T>, GruTrace<T>) {
    let hd = w.hidden;
    let g3 = 3 * hd;
    let rows = n * steps;
    let mut gates_in = vec![T::zero(); rows * g3];
    for row in gates_in.chunks_exact_mut(g3) {
        row.copy_from_slice(w.b);
    }
    gemm(
        T::one(),
        Mat::new(x, rows, w.input),
        Mat::new(w.wx, w.input, g3),
        T::one(),
        MatMut::new(&mut gates_in, rows, g3),
    );
    let mut out = vec![T::zero(); rows * hd];
    let mut trace = GruTrace {
        gates_in,
        z: vec![T::zero(); rows * hd],
        r: vec![T::zero(); rows * hd],
        cand: vec![T::zero(); rows * hd],
        rh: vec![T::zero(); rows * hd],
        h_prev: vec![T::zero(); rows * hd],
    };
    let mut h = h0.to_vec();
    let mut zr_rec = vec![T::zero(); n * 2 * hd];
    let mut c_rec = vec![T::zero(); n * hd];
    let mut rh_step = vec![T::zero(); n * hd];
    for t in 0..steps {
        gemm(
            T::one(),
            Mat::new(&h, n, hd),
            Mat::new(w.uzr, hd, 2 * hd),
            T::zero(),
            MatMut::new(&mut zr_rec, n, 2 * hd),
        );
        for i in 0..n {
            let row = i * steps + t;
            let gi = &trace.gates_in[row * g3..(row + 1) * g3];
            let hp = &h[i * hd..(i + 1) * hd];
            let rec = &zr_rec[i * 2 * hd..(i + 1) * 2 * hd];
            let o = row * hd;
            trace.h_prev[o..o + hd].copy_from_slice(hp);
            for k in 0..hd {
                let z = sigmoid(gi[k] + rec[k]);
                let r = sigmoid(gi[hd + k] + rec[hd + k]);
                trace.z[o + k] = z;
                trace.r[o + k] = r;
                let rh = r * hp[k];
                trace.rh[o + k] = rh;
                rh_step[i * hd + k] = rh;
            }
        }
        gemm(
            T::one(),
            Mat::new(&rh_step, n, hd),
            Mat::new(w.uh, hd, hd),
            T::zero(),
            MatMut::new(&mut c_rec, n, hd),
        );
        for i in 0..n {
            let row = i * steps + t;
            let o = row * hd;
            for k in 0..hd {
                let c = (trace.gates_in[row * g3 + 2 * hd + k] + c_rec[i * hd + k]).tanh();
                trace.cand[o + k] = c;
                let z = trace.z[o + k];
                let hp = h[i * hd + k];
                let hn = (T::one() - z) * hp + z * c;
                out[o + k] = hn;
                h[i * hd + k] = hn;
            }
        }
    }
    (out, trace)
}

/// Gradients of one GRU layer.
pub struct GruGrads<T> {
    pub dx: Vec<T>,
    pub dh0: Vec<T>,
    pub dwx: Vec<T>,
    pub duzr: Vec<T>,
    pub duh: Vec<T>,
    pub db: Vec<T>,
}

/// Backpropagation through time. `dout` is the gradient with respect to
/// every hidden state, `[n, steps, H]`.
pub fn gru_backward<T: Real>(
    w: GruWeights<T>,
    x: &[T],
    trace: &GruTrace<T>,
    dout: &[T],
    n: usize,
    steps: usize,
) -> GruGrads<T> {
    let hd = w.hidden;
    let g3 = 3 * hd;
    let rows = n * steps;
    let mut dgates = vec![T::zero(); rows * g3];
    let mut carry = vec![T::zero(); n * hd];
    let mut dcand_step = vec![T::zero(); n * hd];
    let mut drh = vec![T::zero(); n * hd];
    let mut dzr_step = vec![T::zero(); n * 2 * hd];
    let mut dh_acc = vec![T::zero(); n * hd];
    for t in (0..steps).rev() {
        for i in 0..n {
            let o = (i * steps + t) * hd;
            for k in 0..hd {
                let dh = dout[o + k] + carry[i * hd + k];
                let z = trace.z[o + k];
                let c = trace.cand[o + k];
                let hp = trace.h_prev[o + k];
                dh_acc[i * hd + k] = dh * (T::one() - z);
                let dz = dh * (c - hp);
                dzr_step[i * 2 * hd + k] = dz * z * (T::one() - z);
                dcand_step[i * hd + k] = dh * z * (T::one() - c * c);
            }
        }
        gemm(
            T::one(),
            Mat::new(&dcand_step, n, hd),
            Mat::new(w.uh, hd, hd).t(),
            T::zero(),
            MatMut::new(&mut drh, n, hd),
        );
        for i in 0..n {
            let o = (i * steps + t) * hd;
            for k in 0..hd {
                let r = trace.r[o + k];
                let d = drh[i * hd + k];
                dh_acc[i * hd + k] += d * r;
                dzr_step[i * 2 * hd + hd + k] = d * trace.h_prev[o + k] * r * (T::one() - r);
            }
            let g = (i * steps + t) * g3;
            dgates[g..g + 2 * hd].copy_from_slice(&dzr_step[i * 2 * hd..(i + 1) * 2 * hd]);
            dgates[g + 2 * hd..g + g3].copy_from_slice(&dcand_step[i * hd..(i + 1) * hd]);
        }
        gemm(
            T::one(),
            Mat::new(&dzr_step, n, 2 * hd),
            Mat::new(w.uzr, hd, 2 * hd).t(),
            T::one(),
            MatMut::new(&mut dh_acc, n, hd),
        );
        std::mem::swap(&mut carry, &mut dh_acc);
    }
    let mut duzr = vec![T::zero(); hd * 2 * hd];
    gemm(
        T::one(),
        Mat::new(&trace.h_prev, rows, hd).t(),
        Mat::strided(&dgates, rows, 2 * hd, g3),
        T::zero(),
        MatMut::new(&mut duzr, hd, 2 * hd),
    );
    let mut duh = vec![T::zero(); hd * hd];
    gemm(
        T::one(),
        Mat::new(&trace.rh, rows, hd).t(),
        Mat::strided(&dgates[2 * hd..], rows, hd, g3),
        T::zero(),
        MatMut::new(&mut duh, hd, hd),
    );
    let mut dwx = vec![T::zero(); w.input * g3];
    gemm(
        T::one(),
        Mat::new(x, rows, w.input).t(),
        Mat::new(&dgates, rows, g3),
        T::zero(),
        MatMut::new(&mut dwx, w.input, g3),
    );
    let mut dx = vec![T::zero(); rows * w.input];
    gemm(
        T::one(),
        Mat::new(&dgates, rows, g3),
        Mat::new(w.wx, w.input, g3).t(),
        T::zero(),
        MatMut::new(&mut dx, rows, w.input),
    );
    let db = column_sums(&dgates, g3);
    GruGrads { dx, dh0: carry, dwx, duzr, duh, db }
}

/// Column sums of a row-major matrix with `cols` columns, accumulated in f64.
pub fn column_sums<T: Real>(m: &[T], cols: usize) -> Vec<T> {
    let mut acc = vec![0f64; cols];
    for row in m.chunks_exact(cols) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v.to_f64().unwrap();
        }
    }
    acc.into_iter().map(|v| T::from_f64(v).unwrap()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_with_transpose_and_stride() {
        // a = [[1,2],[3,4]]; b rows start every fourth entry
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 0.0, 0.0, 7.0, 8.0, 0.0, 0.0];
        let mut c = [0.0; 4];
        gemm(1.0, Mat::new(&a, 2, 2).t(), Mat::strided(&b, 2, 2, 4), 0.0, MatMut::new(&mut c, 2, 2));
        // aᵀ = [[1,3],[2,4]], b = [[5,6],[7,8]]
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
    }

    #[test]
    fn small_row_path_matches_packed_gemm() {
        let a: Vec<f64> = (0..3 * 7).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..7 * 5).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut want = vec![0.5; 15];
        let mut got = want.clone();
        // packed reference via the unsafe kernel directly
        unsafe {
            f64::gemm_raw(3, 7, 5, 2.0, a.as_ptr(), 7, 1, b.as_ptr(), 5, 1, 0.5, want.as_mut_ptr(), 5, 1);
        }
        gemm(2.0, Mat::new(&a, 3, 7), Mat::new(&b, 7, 5), 0.5, MatMut::new(&mut got, 3, 5));
        for (x, y) in want.iter().zip(&got) {
            assert!((x - y).abs() < 1e-12);
        }
        let bt: Vec<f64> = (0..5 * 7).map(|i| (i as f64 * 0.23).cos()).collect();
        unsafe {
            f64::gemm_raw(3, 7, 5, 1.0, a.as_ptr(), 7, 1, bt.as_ptr(), 1, 7, 0.0, want.as_mut_ptr(), 5, 1);
        }
        gemm(1.0, Mat::new(&a, 3, 7), Mat::new(&bt, 5, 7).t(), 0.0, MatMut::new(&mut got, 3, 5));
        for (x, y) in want.iter().zip(&got) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0f32), 0.0);
        assert_eq!(sigmoid(1000.0f32), 1.0);
        assert!((sigmoid(0.0f64) - 0.5).abs() < 1e-15);
    }
}
