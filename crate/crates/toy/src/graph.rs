//! Minimal reverse-mode autodiff over row-major `f64` matrices.

use ndarray::{concatenate, s, Array2, Axis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// Matrix plus a broadcast `1 x n` row.
    AddRow(Var, Var),
    /// Matrix times a broadcast `1 x n` row, elementwise.
    MulRow(Var, Var),
    Scale(Var, f64),
    Softmax(Var),
    LayerNorm(Var),
    Silu(Var),
    Square(Var),
    Transpose(Var),
    Mean(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize, usize),
    SliceCols(Var, usize, usize),
    /// Rotate consecutive column pairs by per-row angles.
    Rotary(Var, Array2<f64>),
}

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Default)]
pub struct Graph {
    values: Vec<Array2<f64>>,
    ops: Vec<Op>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.values[v.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row expects a single row");
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "mul_row expects a single row");
        let v = self.value(a) * self.value(row);
        self.push(v, Op::MulRow(a, row))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let sum = row.sum();
            row /= sum;
        }
        self.push(v, Op::Softmax(a))
    }

    /// Per-row standardization without affine parameters.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.fold(0.0, |acc, &x| acc + (x - mean) * (x - mean)) / n;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|x| (x - mean) * inv);
        }
        self.push(v, Op::LayerNorm(a))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x / (1.0 + (-x).exp()));
        self.push(v, Op::Silu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    /// Mean of all entries as a `1 x 1` matrix.
    pub fn mean(&mut self, a: Var) -> Var {
        let m = self.value(a).mean().unwrap_or(0.0);
        self.push(Array2::from_elem((1, 1), m), Op::Mean(a))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("matching column counts");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("matching row counts");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start, end))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start, end))
    }

    /// `angles` has one row per input row and half as many columns.
    pub fn rotary(&mut self, a: Var, angles: Array2<f64>) -> Var {
        let x = self.value(a);
        assert_eq!(x.ncols() % 2, 0, "rotary needs an even width");
        assert_eq!(angles.dim(), (x.nrows(), x.ncols() / 2));
        let mut v = x.clone();
        for r in 0..x.nrows() {
            for p in 0..x.ncols() / 2 {
                let (c, s) = (angles[[r, p]].cos(), angles[[r, p]].sin());
                let (x0, x1) = (x[[r, 2 * p]], x[[r, 2 * p + 1]]);
                v[[r, 2 * p]] = x0 * c - x1 * s;
                v[[r, 2 * p + 1]] = x0 * s + x1 * c;
            }
        }
        self.push(v, Op::Rotary(a, angles))
    }

    /// Gradients of the sum of `out`'s entries with respect to every node.
    pub fn backward(&self, out: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.values.len()];
        grads[out.0] = Some(Array2::ones(self.values[out.0].dim()));
        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients(grads)
    }

    fn propagate(&self, idx: usize, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let mut acc = |v: Var, d: Array2<f64>| match &mut grads[v.0] {
            Some(existing) => *existing += &d,
            slot => *slot = Some(d),
        };
        let y = &self.values[idx];
        match &self.ops[idx] {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, g.dot(&self.value(*b).t()));
                acc(*b, self.value(*a).t().dot(g));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                acc(*a, g * self.value(*b));
                acc(*b, g * self.value(*a));
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::MulRow(a, row) => {
                acc(*a, g * self.value(*row));
                acc(*row, (g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Scale(a, k) => acc(*a, g * *k),
            Op::Softmax(a) => {
                let mut d = g * y;
                for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                    let dot = drow.sum();
                    drow.zip_mut_with(&yrow, |dv, &yv| *dv -= yv * dot);
                }
                acc(*a, d);
            }
            Op::LayerNorm(a) => {
                let x = self.value(*a);
                let mut d = Array2::zeros(x.dim());
                for r in 0..x.nrows() {
                    let row = x.row(r);
                    let n = row.len() as f64;
                    let mean = row.sum() / n;
                    let var = row.fold(0.0, |s, &v| s + (v - mean) * (v - mean)) / n;
                    let inv = 1.0 / (var + LN_EPS).sqrt();
                    let gr = g.row(r);
                    let yr = y.row(r);
                    let gm = gr.sum() / n;
                    let gy = gr.dot(&yr) / n;
                    for c in 0..row.len() {
                        d[[r, c]] = inv * (gr[c] - gm - yr[c] * gy);
                    }
                }
                acc(*a, d);
            }
            Op::Silu(a) => {
                let d = ndarray::Zip::from(g).and(self.value(*a)).map_collect(|&gv, &x| {
                    let s = 1.0 / (1.0 + (-x).exp());
                    gv * s * (1.0 + x * (1.0 - s))
                });
                acc(*a, d);
            }
            Op::Square(a) => acc(*a, g * self.value(*a) * 2.0),
            Op::Transpose(a) => acc(*a, g.t().to_owned()),
            Op::Mean(a) => {
                let x = self.value(*a);
                acc(*a, Array2::from_elem(x.dim(), g[[0, 0]] / x.len() as f64));
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for p in parts {
                    let n = self.value(*p).nrows();
                    acc(*p, g.slice(s![start..start + n, ..]).to_owned());
                    start += n;
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let n = self.value(*p).ncols();
                    acc(*p, g.slice(s![.., start..start + n]).to_owned());
                    start += n;
                }
            }
            Op::SliceRows(a, start, end) => {
                let mut d = Array2::zeros(self.value(*a).dim());
                d.slice_mut(s![*start..*end, ..]).assign(g);
                acc(*a, d);
            }
            Op::SliceCols(a, start, end) => {
                let mut d = Array2::zeros(self.value(*a).dim());
                d.slice_mut(s![.., *start..*end]).assign(g);
                acc(*a, d);
            }
            Op::Rotary(a, angles) => {
                let mut d = g.clone();
                for r in 0..g.nrows() {
                    for p in 0..g.ncols() / 2 {
                        let (c, s) = (angles[[r, p]].cos(), angles[[r, p]].sin());
                        let (g0, g1) = (g[[r, 2 * p]], g[[r, 2 * p + 1]]);
                        d[[r, 2 * p]] = g0 * c + g1 * s;
                        d[[r, 2 * p + 1]] = -g0 * s + g1 * c;
                    }
                }
                acc(*a, d);
            }
        }
    }
}

pub struct Gradients(Vec<Option<Array2<f64>>>);

impl Gradients {
    /// Zero-shaped `None` means the node does not influence the output.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.0.get(v.0).and_then(|g| g.as_ref())
    }
}

/// `|a - b| / max(|a|, |b|)` in the Frobenius norm; 0 when both vanish.
pub fn relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = (a - b).mapv(|x| x * x).sum().sqrt();
    let scale = a.mapv(|x| x * x).sum().sqrt().max(b.mapv(|x| x * x).sum().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}
