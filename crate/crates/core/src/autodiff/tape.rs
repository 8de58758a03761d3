use super::kernels::{
    column_sums, gemm, gru_backward, gru_forward, sigmoid, GruTrace, GruWeights, Mat, MatMut,
};
use super::{AutodiffError, Real, Tensor};

/// Log-variances are clamped to this magnitude before exponentiation.
pub const LOGVAR_CLAMP: f64 = 30.0;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Parameters of one GRU layer on the tape; see [`GruWeights`] for layout.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub wx: Var,
    pub uzr: Var,
    pub uh: Var,
    pub b: Var,
}

enum Op<T> {
    Leaf,
    Dense { x: Var, w: Var, b: Var },
    Conv1d { x: Var, k: Var, b: Var },
    Tanh(Var),
    Sigmoid(Var),
    Add(Var, Var),
    Scale(Var, T),
    Concat(Var, Var),
    Repeat { x: Var, steps: usize },
    Reshape(Var),
    Gru { x: Var, h0: Var, w: GruVars, trace: Box<GruTrace<T>> },
    SoftmaxXent { logits: Var, targets: Vec<usize>, probs: Vec<T> },
    GaussSample { mu: Var, logvar: Var, eps: Vec<T> },
    Kl { mu: Var, logvar: Var },
    WeightedSum { x: Var, w: Vec<T> },
    Mse { pred: Var, target: Vec<T> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Linear record of a forward computation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar with respect to every recorded value.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient for `v`; zeros when the loss does not depend on it.
    pub fn get(&self, v: Var) -> Tensor<T> {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor { shape, data: g.clone() },
            None => Tensor::zeros(&shape),
        }
    }

    /// Moves the gradient out, leaving nothing behind.
    pub fn take(&mut self, v: Var) -> Tensor<T> {
        let shape = self.shapes[v.0].clone();
        match self.grads[v.0].take() {
            Some(data) => Tensor { shape, data },
            None => Tensor::zeros(&shape),
        }
    }
}

fn mismatch(op: &'static str, expected: &[usize], got: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch { op, expected: expected.to_vec(), got: got.to_vec() }
}

fn clamp_lv<T: Real>(lv: T) -> (T, bool) {
    let c = T::of(LOGVAR_CLAMP);
    if lv > c {
        (c, false)
    } else if lv < -c {
        (-c, false)
    } else {
        (lv, true)
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    /// `x·w + b` over the last axis of `x`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, AutodiffError> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if ws.len() != 2 || xs.is_empty() || xs[xs.len() - 1] != ws[0] {
            return Err(mismatch("dense", &[*xs.last().unwrap_or(&0), 0], ws));
        }
        if bs != [ws[1]] {
            return Err(mismatch("dense", &[ws[1]], bs));
        }
        let (inp, out) = (ws[0], ws[1]);
        let mut shape = xs.to_vec();
        *shape.last_mut().unwrap() = out;
        let xv = self.value(x);
        let rows = xv.rows();
        let mut data = Vec::with_capacity(rows * out);
        for _ in 0..rows {
            data.extend_from_slice(&self.value(b).data);
        }
        gemm(
            T::one(),
            Mat::new(&xv.data, rows, inp),
            Mat::new(&self.value(w).data, inp, out),
            T::one(),
            MatMut::new(&mut data, rows, out),
        );
        Ok(self.push(Tensor { shape, data }, Op::Dense { x, w, b }))
    }

    /// Valid-mode 1-D cross-correlation: `x` `[n, len, cin]`, kernels
    /// `[width, cin, cout]`, bias `[cout]`, output `[n, len-width+1, cout]`.
    pub fn conv1d(&mut self, x: Var, k: Var, b: Var) -> Result<Var, AutodiffError> {
        let (xs, ks, bs) = (self.shape(x), self.shape(k), self.shape(b));
        if xs.len() != 3 || ks.len() != 3 || xs[2] != ks[1] {
            return Err(mismatch("conv1d", &[0, 0, *ks.get(1).unwrap_or(&0)], xs));
        }
        let (n, len, cin) = (xs[0], xs[1], xs[2]);
        let (width, cout) = (ks[0], ks[2]);
        if width == 0 || width > len {
            return Err(AutodiffError::InvalidArgument {
                op: "conv1d",
                message: format!("kernel width {width} for length {len}"),
            });
        }
        if bs != [cout] {
            return Err(mismatch("conv1d", &[cout], bs));
        }
        let lout = len - width + 1;
        let mut data = Vec::with_capacity(n * lout * cout);
        for _ in 0..n * lout {
            data.extend_from_slice(&self.value(b).data);
        }
        let xv = &self.value(x).data;
        let kv = &self.value(k).data;
        for s in 0..n {
            let xs = &xv[s * len * cin..(s + 1) * len * cin];
            gemm(
                T::one(),
                Mat::strided(xs, lout, width * cin, cin),
                Mat::new(kv, width * cin, cout),
                T::one(),
                MatMut::new(&mut data[s * lout * cout..(s + 1) * lout * cout], lout, cout),
            );
        }
        Ok(self.push(Tensor { shape: vec![n, lout, cout], data }, Op::Conv1d { x, k, b }))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|a| a.tanh()).collect() };
        self.push(out, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|&a| sigmoid(a)).collect() };
        self.push(out, Op::Sigmoid(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("add", self.shape(a), self.shape(b)));
        }
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data.iter().zip(&vb.data).map(|(&p, &q)| p + q).collect();
        Ok(self.push(Tensor { shape: va.shape.clone(), data }, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let v = self.value(x);
        let out = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|&a| a * c).collect() };
        self.push(out, Op::Scale(x, c))
    }

    /// Concatenation along the last axis; leading axes must agree.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.is_empty() || sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(mismatch("concat", sa, sb));
        }
        let (va, vb) = (self.value(a), self.value(b));
        let (da, db) = (va.last_dim(), vb.last_dim());
        let mut data = Vec::with_capacity(va.len() + vb.len());
        for (ra, rb) in va.data.chunks_exact(da.max(1)).zip(vb.data.chunks_exact(db.max(1))) {
            data.extend_from_slice(ra);
            data.extend_from_slice(rb);
        }
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = da + db;
        Ok(self.push(Tensor { shape, data }, Op::Concat(a, b)))
    }

    /// `[n, d]` → `[n, steps, d]` by copying each row.
    pub fn repeat(&mut self, x: Var, steps: usize) -> Result<Var, AutodiffError> {
        let s = self.shape(x);
        if s.len() != 2 {
            return Err(mismatch("repeat", &[0, 0], s));
        }
        let (n, d) = (s[0], s[1]);
        let v = &self.value(x).data;
        let mut data = Vec::with_capacity(n * steps * d);
        for row in v.chunks_exact(d.max(1)).take(n) {
            for _ in 0..steps {
                data.extend_from_slice(row);
            }
        }
        Ok(self.push(Tensor { shape: vec![n, steps, d], data }, Op::Repeat { x, steps }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let v = self.value(x);
        if shape.iter().product::<usize>() != v.len() {
            return Err(mismatch("reshape", shape, &v.shape));
        }
        let out = Tensor { shape: shape.to_vec(), data: v.data.clone() };
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// GRU over a whole sequence: `x` `[n, steps, in]`, `h0` `[n, H]`,
    /// output every hidden state `[n, steps, H]`.
    pub fn gru(&mut self, x: Var, h0: Var, w: GruVars) -> Result<Var, AutodiffError> {
        let xs = self.shape(x).to_vec();
        let uh = self.shape(w.uh).to_vec();
        if uh.len() != 2 || uh[0] != uh[1] {
            return Err(mismatch("gru", &[0, 0], &uh));
        }
        let hd = uh[0];
        if xs.len() != 3 {
            return Err(mismatch("gru", &[0, 0, 0], &xs));
        }
        let (n, steps, inp) = (xs[0], xs[1], xs[2]);
        let checks: [(&[usize], Vec<usize>); 4] = [
            (self.shape(w.wx), vec![inp, 3 * hd]),
            (self.shape(w.uzr), vec![hd, 2 * hd]),
            (self.shape(w.b), vec![3 * hd]),
            (self.shape(h0), vec![n, hd]),
        ];
        for (got, want) in checks {
            if got != want.as_slice() {
                return Err(mismatch("gru", &want, got));
            }
        }
        let weights = GruWeights {
            wx: &self.value(w.wx).data,
            uzr: &self.value(w.uzr).data,
            uh: &self.value(w.uh).data,
            b: &self.value(w.b).data,
            input: inp,
            hidden: hd,
        };
        let (data, trace) = gru_forward(weights, &self.value(x).data, &self.value(h0).data, n, steps);
        Ok(self.push(
            Tensor { shape: vec![n, steps, hd], data },
            Op::Gru { x, h0, w, trace: Box::new(trace) },
        ))
    }

    /// Single GRU step: `x` `[n, in]`, `h` `[n, H]` → `[n, H]`.
    pub fn gru_cell(&mut self, x: Var, h: Var, w: GruVars) -> Result<Var, AutodiffError> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 2 {
            return Err(mismatch("gru_cell", &[0, 0], &xs));
        }
        let x3 = self.reshape(x, &[xs[0], 1, xs[1]])?;
        let out = self.gru(x3, h, w)?;
        let hd = self.shape(out)[2];
        self.reshape(out, &[xs[0], hd])
    }

    /// Mean over rows of `−log softmax(logits)[target]`. `targets` holds one
    /// class index per row of `logits` viewed as `[rows, vocab]`.
    pub fn softmax_xent(&mut self, logits: Var, targets: &[usize]) -> Result<Var, AutodiffError> {
        let v = self.value(logits);
        let vocab = v.last_dim();
        let rows = v.rows();
        if targets.len() != rows || rows == 0 {
            return Err(mismatch("softmax_xent", &[rows], &[targets.len()]));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= vocab) {
            return Err(AutodiffError::InvalidArgument {
                op: "softmax_xent",
                message: format!("target {bad} outside vocabulary of {vocab}"),
            });
        }
        let mut probs = vec![T::zero(); v.len()];
        let mut total = 0f64;
        for (r, (row, p)) in v.data.chunks_exact(vocab).zip(probs.chunks_exact_mut(vocab)).enumerate() {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for (pi, &l) in p.iter_mut().zip(row) {
                *pi = (l - max).exp();
                sum += *pi;
            }
            for pi in p.iter_mut() {
                *pi /= sum;
            }
            let log_p = row[targets[r]] - max - sum.ln();
            total -= log_p.to_f64().unwrap();
        }
        let loss = T::of(total / rows as f64);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent { logits, targets: targets.to_vec(), probs },
        ))
    }

    /// `mu + exp(logvar/2)·eps`.
    pub fn gauss_sample(&mut self, mu: Var, logvar: Var, eps: &Tensor<T>) -> Result<Var, AutodiffError> {
        let (sm, sl) = (self.shape(mu), self.shape(logvar));
        if sm != sl || sm != eps.shape.as_slice() {
            return Err(mismatch("gauss_sample", sm, if sm != sl { sl } else { &eps.shape }));
        }
        let half = T::of(0.5);
        let (vm, vl) = (self.value(mu), self.value(logvar));
        let data = vm
            .data
            .iter()
            .zip(&vl.data)
            .zip(&eps.data)
            .map(|((&m, &lv), &e)| m + (clamp_lv(lv).0 * half).exp() * e)
            .collect();
        let out = Tensor { shape: vm.shape.clone(), data };
        Ok(self.push(out, Op::GaussSample { mu, logvar, eps: eps.data.clone() }))
    }

    /// `−½ Σ (1 + logvar − mu² − exp(logvar))` over the last axis, averaged
    /// over rows.
    pub fn kl_std_normal(&mut self, mu: Var, logvar: Var) -> Result<Var, AutodiffError> {
        let (sm, sl) = (self.shape(mu), self.shape(logvar));
        if sm != sl {
            return Err(mismatch("kl_std_normal", sm, sl));
        }
        let (vm, vl) = (self.value(mu), self.value(logvar));
        let rows = vm.rows().max(1);
        let mut total = 0f64;
        for (&m, &lv) in vm.data.iter().zip(&vl.data) {
            let m = m.to_f64().unwrap();
            let lv = clamp_lv(lv).0.to_f64().unwrap();
            total += -0.5 * (1.0 + lv - m * m - lv.exp());
        }
        let loss = T::of(total / rows as f64);
        Ok(self.push(Tensor::scalar(loss), Op::Kl { mu, logvar }))
    }

    /// `Σ x⊙w` for a constant `w`.
    pub fn weighted_sum(&mut self, x: Var, w: &Tensor<T>) -> Result<Var, AutodiffError> {
        let v = self.value(x);
        if v.shape != w.shape {
            return Err(mismatch("weighted_sum", &v.shape, &w.shape));
        }
        let s: f64 = v.data.iter().zip(&w.data).map(|(&a, &b)| (a * b).to_f64().unwrap()).sum();
        Ok(self.push(Tensor::scalar(T::of(s)), Op::WeightedSum { x, w: w.data.clone() }))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var, AutodiffError> {
        let v = self.value(pred);
        if v.shape != target.shape {
            return Err(mismatch("mse", &v.shape, &target.shape));
        }
        let s: f64 = v
            .data
            .iter()
            .zip(&target.data)
            .map(|(&a, &b)| (a - b).to_f64().unwrap().powi(2))
            .sum();
        let loss = T::of(s / v.len().max(1) as f64);
        Ok(self.push(Tensor::scalar(loss), Op::Mse { pred, target: target.data.clone() }))
    }

    /// Reverse pass from a scalar. Nodes are visited in exact reverse
    /// recording order.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, AutodiffError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AutodiffError::NotScalar(lv.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backprop(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape.clone()).collect(),
        })
    }

    fn backprop(&self, idx: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        let half = T::of(0.5);
        match &node.op {
            Op::Leaf => {}
            Op::Dense { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (inp, out) = (wv.shape[0], wv.shape[1]);
                let rows = xv.rows();
                let mut dx = vec![T::zero(); xv.len()];
                gemm(T::one(), Mat::new(g, rows, out), Mat::new(&wv.data, inp, out).t(), T::zero(), MatMut::new(&mut dx, rows, inp));
                let mut dw = vec![T::zero(); wv.len()];
                gemm(T::one(), Mat::new(&xv.data, rows, inp).t(), Mat::new(g, rows, out), T::zero(), MatMut::new(&mut dw, inp, out));
                accumulate(grads, *x, dx);
                accumulate(grads, *w, dw);
                accumulate(grads, *b, column_sums(g, out));
            }
            Op::Conv1d { x, k, b } => {
                let (xv, kv) = (self.value(*x), self.value(*k));
                let (n, len, cin) = (xv.shape[0], xv.shape[1], xv.shape[2]);
                let (width, cout) = (kv.shape[0], kv.shape[2]);
                let lout = len - width + 1;
                let mut dk = vec![T::zero(); kv.len()];
                let mut dx = vec![T::zero(); xv.len()];
                let mut dpatch = vec![T::zero(); lout * width * cin];
                for s in 0..n {
                    let xs = &xv.data[s * len * cin..(s + 1) * len * cin];
                    let gs = &g[s * lout * cout..(s + 1) * lout * cout];
                    gemm(
                        T::one(),
                        Mat::strided(xs, lout, width * cin, cin).t(),
                        Mat::new(gs, lout, cout),
                        T::one(),
                        MatMut::new(&mut dk, width * cin, cout),
                    );
                    gemm(
                        T::one(),
                        Mat::new(gs, lout, cout),
                        Mat::new(&kv.data, width * cin, cout).t(),
                        T::zero(),
                        MatMut::new(&mut dpatch, lout, width * cin),
                    );
                    let dxs = &mut dx[s * len * cin..(s + 1) * len * cin];
                    for (p, row) in dpatch.chunks_exact(width * cin).enumerate() {
                        for (d, &v) in dxs[p * cin..p * cin + width * cin].iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                }
                accumulate(grads, *x, dx);
                accumulate(grads, *k, dk);
                accumulate(grads, *b, column_sums(g, cout));
            }
            Op::Tanh(x) => {
                let y = &node.value.data;
                let d = g.iter().zip(y).map(|(&gi, &yi)| gi * (T::one() - yi * yi)).collect();
                accumulate(grads, *x, d);
            }
            Op::Sigmoid(x) => {
                let y = &node.value.data;
                let d = g.iter().zip(y).map(|(&gi, &yi)| gi * yi * (T::one() - yi)).collect();
                accumulate(grads, *x, d);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.to_vec());
                accumulate(grads, *b, g.to_vec());
            }
            Op::Scale(x, c) => {
                accumulate(grads, *x, g.iter().map(|&v| v * *c).collect());
            }
            Op::Concat(a, b) => {
                let (da, db) = (self.value(*a).last_dim(), self.value(*b).last_dim());
                let rows = self.value(*a).rows();
                let mut ga = Vec::with_capacity(rows * da);
                let mut gb = Vec::with_capacity(rows * db);
                for row in g.chunks_exact(da + db) {
                    ga.extend_from_slice(&row[..da]);
                    gb.extend_from_slice(&row[da..]);
                }
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::Repeat { x, steps } => {
                let d = self.value(*x).last_dim();
                let mut dx = vec![T::zero(); self.value(*x).len()];
                for (i, row) in g.chunks_exact(d * steps).enumerate() {
                    let acc = &mut dx[i * d..(i + 1) * d];
                    for step in row.chunks_exact(d) {
                        for (a, &v) in acc.iter_mut().zip(step) {
                            *a += v;
                        }
                    }
                }
                accumulate(grads, *x, dx);
            }
            Op::Reshape(x) => accumulate(grads, *x, g.to_vec()),
            Op::Gru { x, h0, w, trace } => {
                let xv = self.value(*x);
                let (n, steps, inp) = (xv.shape[0], xv.shape[1], xv.shape[2]);
                let weights = GruWeights {
                    wx: &self.value(w.wx).data,
                    uzr: &self.value(w.uzr).data,
                    uh: &self.value(w.uh).data,
                    b: &self.value(w.b).data,
                    input: inp,
                    hidden: self.value(w.uh).shape[0],
                };
                let gg = gru_backward(weights, &xv.data, trace, g, n, steps);
                accumulate(grads, *x, gg.dx);
                accumulate(grads, *h0, gg.dh0);
                accumulate(grads, w.wx, gg.dwx);
                accumulate(grads, w.uzr, gg.duzr);
                accumulate(grads, w.uh, gg.duh);
                accumulate(grads, w.b, gg.db);
            }
            Op::SoftmaxXent { logits, targets, probs } => {
                let vocab = self.value(*logits).last_dim();
                let scale = g[0] / T::of(targets.len() as f64);
                let mut d: Vec<T> = probs.iter().map(|&p| p * scale).collect();
                for (r, &t) in targets.iter().enumerate() {
                    d[r * vocab + t] -= scale;
                }
                accumulate(grads, *logits, d);
            }
            Op::GaussSample { mu, logvar, eps } => {
                let lv = &self.value(*logvar).data;
                let dlv = g
                    .iter()
                    .zip(lv)
                    .zip(eps)
                    .map(|((&gi, &l), &e)| {
                        let (c, live) = clamp_lv(l);
                        if live { gi * e * half * (c * half).exp() } else { T::zero() }
                    })
                    .collect();
                accumulate(grads, *mu, g.to_vec());
                accumulate(grads, *logvar, dlv);
            }
            Op::Kl { mu, logvar } => {
                let (vm, vl) = (self.value(*mu), self.value(*logvar));
                let s = g[0] / T::of(vm.rows().max(1) as f64);
                accumulate(grads, *mu, vm.data.iter().map(|&m| m * s).collect());
                let dlv = vl
                    .data
                    .iter()
                    .map(|&l| {
                        let (c, live) = clamp_lv(l);
                        if live { half * (c.exp() - T::one()) * s } else { T::zero() }
                    })
                    .collect();
                accumulate(grads, *logvar, dlv);
            }
            Op::WeightedSum { x, w } => {
                accumulate(grads, *x, w.iter().map(|&v| v * g[0]).collect());
            }
            Op::Mse { pred, target } => {
                let p = &self.value(*pred).data;
                let s = T::of(2.0) * g[0] / T::of(p.len().max(1) as f64);
                accumulate(grads, *pred, p.iter().zip(target).map(|(&a, &b)| (a - b) * s).collect());
            }
        }
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, d: Vec<T>) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(d) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(d),
    }
}
