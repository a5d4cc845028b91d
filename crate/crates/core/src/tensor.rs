//! Dense `f64` tensors and a single-use reverse-mode tape.
//!
//! Only the operations needed by the scale-fusion block are provided. Every
//! operation records its inputs on the [`Tape`]; [`Tape::backward`] walks the
//! nodes in reverse creation order once and accumulates gradients.

use crate::binarization::sigmoid;
use crate::error::{shape_mismatch, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(shape_mismatch(&shape, &[data.len()]));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::ShapeMismatch {
                expected: vec![0, 0, 0],
                actual: self.shape.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d { input: Var, weight: Var, bias: Var },
    Sigmoid(Var),
    Relu(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Vec<Var>),
    Slice { input: Var, start: usize },
    ChannelMean(Var),
    Upsample { input: Var, factor: usize },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

/// Strides of `shape` with zero stride on broadcast (size-1) axes.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for d in (0..shape.len()).rev() {
        strides[d] = if shape[d] == 1 && out[d] != 1 { 0 } else { acc };
        acc *= shape[d];
    }
    strides
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(shape_mismatch(a, b));
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Ok(x),
            (1, y) => Ok(y),
            (x, 1) => Ok(x),
            _ => Err(shape_mismatch(a, b)),
        })
        .collect()
}

/// Source flat index in an operand with `strides` for each output index.
fn broadcast_index(out_shape: &[usize], strides: &[usize]) -> Vec<usize> {
    let n: usize = out_shape.iter().product();
    let mut idx = vec![0usize; out_shape.len()];
    let mut res = Vec::with_capacity(n);
    for _ in 0..n {
        res.push(idx.iter().zip(strides).map(|(i, s)| i * s).sum());
        for d in (0..out_shape.len()).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    res
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` output with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same-size cross-correlation with zero padding `(k - 1) / 2`.
    /// `input` is `[C_in, H, W]`, `weight` `[C_out, C_in, kh, kw]` with odd
    /// kernel sides, `bias` `[C_out]`.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let (cin, h, wd) = x.chw()?;
        let [cout, wcin, kh, kw] = w.shape[..] else {
            return Err(shape_mismatch(&[0, cin, 3, 3], &w.shape));
        };
        if wcin != cin || kh % 2 == 0 || kw % 2 == 0 {
            return Err(shape_mismatch(&[cout, cin, 3, 3], &w.shape));
        }
        if b.shape != [cout] {
            return Err(shape_mismatch(&[cout], &b.shape));
        }
        let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
        let mut out = vec![0.0; cout * h * wd];
        for co in 0..cout {
            let plane = &mut out[co * h * wd..(co + 1) * h * wd];
            plane.fill(b.data[co]);
            for ci in 0..cin {
                let xin = &x.data[ci * h * wd..(ci + 1) * h * wd];
                for ki in 0..kh {
                    for kj in 0..kw {
                        let wv = w.data[((co * cin + ci) * kh + ki) * kw + kj];
                        for i in 0..h {
                            let si = i as isize + ki as isize - ph as isize;
                            if si < 0 || si >= h as isize {
                                continue;
                            }
                            let si = si as usize;
                            for j in 0..wd {
                                let sj = j as isize + kj as isize - pw as isize;
                                if sj < 0 || sj >= wd as isize {
                                    continue;
                                }
                                plane[i * wd + j] += wv * xin[si * wd + sj as usize];
                            }
                        }
                    }
                }
            }
        }
        let t = Tensor::new(vec![cout, h, wd], out)?;
        Ok(self.push(t, Op::Conv2d { input, weight, bias }))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let t = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&x| sigmoid(x)).collect(),
        };
        self.push(t, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let t = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&x| x.max(0.0)).collect(),
        };
        self.push(t, Op::Relu(a))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape(&ta.shape, &tb.shape)?;
        let ia = broadcast_index(&shape, &broadcast_strides(&ta.shape, &shape));
        let ib = broadcast_index(&shape, &broadcast_strides(&tb.shape, &shape));
        let data = ia.iter().zip(&ib).map(|(&i, &j)| f(ta.data[i], tb.data[j])).collect();
        Tensor::new(shape, data)
    }

    /// Elementwise sum; size-1 axes broadcast.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    /// Elementwise product; size-1 axes broadcast, so a `[1, H, W]` map
    /// scales every channel of a `[C, H, W]` tensor.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    /// Concatenates along the leading axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Domain("concat of zero tensors".into()))?;
        let tail = self.value(*first).shape[1..].to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape.is_empty() || t.shape[1..] != tail[..] {
                let mut expect = vec![t.shape.first().copied().unwrap_or(0)];
                expect.extend(&tail);
                return Err(shape_mismatch(&expect, &t.shape));
            }
            lead += t.shape[0];
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![lead];
        shape.extend(tail);
        let t = Tensor::new(shape, data)?;
        Ok(self.push(t, Op::Concat(parts.to_vec())))
    }

    /// Rows `start..start + len` of the leading axis.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let v = self.value(a);
        if v.shape.is_empty() || start + len > v.shape[0] || len == 0 {
            return Err(Error::Domain(format!("slice {start}..{} of {:?}", start + len, v.shape)));
        }
        let inner: usize = v.shape[1..].iter().product();
        let mut shape = v.shape.clone();
        shape[0] = len;
        let data = v.data[start * inner..(start + len) * inner].to_vec();
        let t = Tensor::new(shape, data)?;
        Ok(self.push(t, Op::Slice { input: a, start }))
    }

    /// `[C, H, W] -> [1, H, W]` mean over channels.
    pub fn channel_mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        let (c, h, w) = v.chw()?;
        let mut out = vec![0.0; h * w];
        for ci in 0..c {
            for (o, x) in out.iter_mut().zip(&v.data[ci * h * w..(ci + 1) * h * w]) {
                *o += x;
            }
        }
        let inv = 1.0 / c as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        let t = Tensor::new(vec![1, h, w], out)?;
        Ok(self.push(t, Op::ChannelMean(a)))
    }

    /// Nearest-neighbour `[C, H, W] -> [C, H f, W f]`.
    pub fn upsample_nearest(&mut self, a: Var, factor: usize) -> Result<Var> {
        if factor == 0 {
            return Err(Error::Domain("upsample factor must be >= 1".into()));
        }
        let v = self.value(a);
        let (c, h, w) = v.chw()?;
        let (oh, ow) = (h * factor, w * factor);
        let mut out = Vec::with_capacity(c * oh * ow);
        for ci in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    out.push(v.data[(ci * h + i / factor) * w + j / factor]);
                }
            }
        }
        let t = Tensor::new(vec![c, oh, ow], out)?;
        Ok(self.push(t, Op::Upsample { input: a, factor }))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Populates gradients of the scalar `output` with respect to every node.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        let out = &self.nodes[output.0].value;
        if out.numel() != 1 {
            return Err(Error::NonScalarOutput(out.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![1.0]);
        for id in (0..=output.0).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.backprop_node(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        self.grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| {
                g.map(|data| Tensor {
                    shape: n.value.shape.clone(),
                    data,
                })
            })
            .collect();
        Ok(())
    }

    fn backprop_node(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => {}
            Op::Sigmoid(a) => {
                let y = &node.value.data;
                let ga = acc(grads, *a, y.len());
                for i in 0..y.len() {
                    ga[i] += g[i] * y[i] * (1.0 - y[i]);
                }
            }
            Op::Relu(a) => {
                let x = &self.value(*a).data;
                let ga = acc(grads, *a, x.len());
                for i in 0..x.len() {
                    if x[i] > 0.0 {
                        ga[i] += g[i];
                    }
                }
            }
            Op::Add(a, b) | Op::Mul(a, b) => {
                let is_mul = matches!(node.op, Op::Mul(..));
                let out_shape = &node.value.shape;
                let (ta, tb) = (self.value(*a), self.value(*b));
                let ia = broadcast_index(out_shape, &broadcast_strides(&ta.shape, out_shape));
                let ib = broadcast_index(out_shape, &broadcast_strides(&tb.shape, out_shape));
                let (na, nb) = (ta.numel(), tb.numel());
                {
                    let ga = acc(grads, *a, na);
                    for k in 0..g.len() {
                        ga[ia[k]] += if is_mul { g[k] * tb.data[ib[k]] } else { g[k] };
                    }
                }
                let gb = acc(grads, *b, nb);
                for k in 0..g.len() {
                    gb[ib[k]] += if is_mul { g[k] * ta.data[ia[k]] } else { g[k] };
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = self.value(*p).numel();
                    let gp = acc(grads, *p, n);
                    for i in 0..n {
                        gp[i] += g[off + i];
                    }
                    off += n;
                }
            }
            Op::Slice { input, start } => {
                let t = self.value(*input);
                let inner: usize = t.shape[1..].iter().product();
                let gi = acc(grads, *input, t.numel());
                let base = start * inner;
                for (i, gv) in g.iter().enumerate() {
                    gi[base + i] += gv;
                }
            }
            Op::ChannelMean(a) => {
                let t = self.value(*a);
                let plane = g.len();
                let inv = 1.0 / t.shape[0] as f64;
                let ga = acc(grads, *a, t.numel());
                for (i, v) in ga.iter_mut().enumerate() {
                    *v += g[i % plane] * inv;
                }
            }
            Op::Upsample { input, factor } => {
                let t = self.value(*input);
                let (c, h, w) = (t.shape[0], t.shape[1], t.shape[2]);
                let (oh, ow) = (h * factor, w * factor);
                let gi = acc(grads, *input, t.numel());
                for ci in 0..c {
                    for i in 0..oh {
                        for j in 0..ow {
                            gi[(ci * h + i / factor) * w + j / factor] += g[(ci * oh + i) * ow + j];
                        }
                    }
                }
            }
            Op::Sum(a) => {
                let n = self.value(*a).numel();
                let ga = acc(grads, *a, n);
                ga.iter_mut().for_each(|v| *v += g[0]);
            }
            Op::Conv2d { input, weight, bias } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (cin, h, wd) = (x.shape[0], x.shape[1], x.shape[2]);
                let (cout, kh, kw) = (w.shape[0], w.shape[2], w.shape[3]);
                let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
                let mut gx = vec![0.0; x.numel()];
                let mut gw = vec![0.0; w.numel()];
                let mut gb = vec![0.0; cout];
                for co in 0..cout {
                    let gplane = &g[co * h * wd..(co + 1) * h * wd];
                    gb[co] = gplane.iter().sum();
                    for ci in 0..cin {
                        let xin = &x.data[ci * h * wd..(ci + 1) * h * wd];
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let widx = ((co * cin + ci) * kh + ki) * kw + kj;
                                let wv = w.data[widx];
                                let mut wsum = 0.0;
                                for i in 0..h {
                                    let si = i as isize + ki as isize - ph as isize;
                                    if si < 0 || si >= h as isize {
                                        continue;
                                    }
                                    let si = si as usize;
                                    for j in 0..wd {
                                        let sj = j as isize + kj as isize - pw as isize;
                                        if sj < 0 || sj >= wd as isize {
                                            continue;
                                        }
                                        let src = ci * h * wd + si * wd + sj as usize;
                                        let go = gplane[i * wd + j];
                                        wsum += go * xin[si * wd + sj as usize];
                                        gx[src] += go * wv;
                                    }
                                }
                                gw[widx] += wsum;
                            }
                        }
                    }
                }
                for (var, local) in [(*input, gx), (*weight, gw), (*bias, gb)] {
                    let dst = acc(grads, var, local.len());
                    for (d, s) in dst.iter_mut().zip(local) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// Largest `|analytic - central difference| / max(1, |central difference|)`
/// over the coordinates of `input`, for a scalar-valued tape function.
pub fn grad_check<F>(f: F, input: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let eval = |x: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone());
        let y = f(&mut tape, v)?;
        let out = tape.value(y);
        out.item().ok_or_else(|| Error::NonScalarOutput(out.shape.clone()))
    };
    let mut tape = Tape::new();
    let v = tape.leaf(input.clone());
    let y = f(&mut tape, v)?;
    tape.backward(y)?;
    let analytic = tape.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(input.shape()));

    let mut probe = input.clone();
    let mut worst: f64 = 0.0;
    for i in 0..input.numel() {
        let orig = probe.data[i];
        probe.data[i] = orig + eps;
        let up = eval(&probe)?;
        probe.data[i] = orig - eps;
        let down = eval(&probe)?;
        probe.data[i] = orig;
        let fd = (up - down) / (2.0 * eps);
        worst = worst.max((analytic.data[i] - fd).abs() / fd.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3(c: usize, h: usize, w: usize, f: impl Fn(usize) -> f64) -> Tensor {
        Tensor::new(vec![c, h, w], (0..c * h * w).map(f).collect()).unwrap()
    }

    #[test]
    fn identity_1x1_conv() {
        let mut tape = Tape::new();
        let x = tape.leaf(t3(2, 3, 3, |i| i as f64 * 0.1));
        let mut w = Tensor::zeros(&[2, 2, 1, 1]);
        w.data_mut()[0] = 1.0;
        w.data_mut()[3] = 1.0;
        let w = tape.leaf(w);
        let b = tape.leaf(Tensor::zeros(&[2]));
        let y = tape.conv2d(x, w, b).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn ones_kernel_counts_window() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::filled(&[1, 3, 3], 1.0));
        let w = tape.leaf(Tensor::filled(&[1, 1, 3, 3], 1.0));
        let b = tape.leaf(Tensor::zeros(&[1]));
        let y = tape.conv2d(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn zero_weight_gives_bias() {
        let mut tape = Tape::new();
        let x = tape.leaf(t3(1, 4, 4, |i| i as f64));
        let w = tape.leaf(Tensor::zeros(&[2, 1, 3, 3]));
        let b = tape.leaf(Tensor::new(vec![2], vec![0.7, -1.5]).unwrap());
        let y = tape.conv2d(x, w, b).unwrap();
        let d = tape.value(y).data();
        assert!(d[..16].iter().all(|&v| v == 0.7));
        assert!(d[16..].iter().all(|&v| v == -1.5));
    }

    #[test]
    fn conv_shape_errors() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[2, 3, 3]));
        let w = tape.leaf(Tensor::zeros(&[1, 3, 3, 3]));
        let b = tape.leaf(Tensor::zeros(&[1]));
        assert!(matches!(tape.conv2d(x, w, b), Err(Error::ShapeMismatch { .. })));
        let w = tape.leaf(Tensor::zeros(&[1, 2, 2, 2]));
        assert!(tape.conv2d(x, w, b).is_err());
    }

    #[test]
    fn elementwise_basics() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[1, 2, 2]));
        let s = tape.sigmoid(x);
        assert!(tape.value(s).data().iter().all(|&v| v == 0.5));
        let same = tape.leaf(t3(1, 2, 2, |i| i as f64));
        let three = tape.concat(&[same, same, same]).unwrap();
        let m = tape.channel_mean(three).unwrap();
        assert_eq!(tape.value(m), tape.value(same));
    }

    #[test]
    fn concat_then_slice_roundtrip() {
        let mut tape = Tape::new();
        let a = tape.leaf(t3(2, 2, 3, |i| i as f64));
        let b = tape.leaf(t3(3, 2, 3, |i| -(i as f64)));
        let c = tape.concat(&[a, b]).unwrap();
        assert_eq!(tape.value(c).shape(), &[5, 2, 3]);
        let a2 = tape.slice(c, 0, 2).unwrap();
        let b2 = tape.slice(c, 2, 3).unwrap();
        assert_eq!(tape.value(a2), tape.value(a));
        assert_eq!(tape.value(b2), tape.value(b));
        let bad = tape.leaf(Tensor::zeros(&[1, 3, 3]));
        assert!(tape.concat(&[a, bad]).is_err());
    }

    #[test]
    fn sum_backward_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(t3(2, 3, 3, |i| i as f64));
        let y = tape.sum(x);
        tape.backward(y).unwrap();
        assert!(tape.grad(x).unwrap().data().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn sigmoid_backward_at_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[1, 2, 2]));
        let s = tape.sigmoid(x);
        let y = tape.sum(s);
        tape.backward(y).unwrap();
        assert!(tape.grad(x).unwrap().data().iter().all(|&g| g == 0.25));
    }

    #[test]
    fn non_scalar_backward_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[1, 2, 2]));
        assert!(matches!(tape.backward(x), Err(Error::NonScalarOutput(_))));
    }

    #[test]
    fn grad_check_linear_and_constant() {
        let x = t3(1, 3, 3, |i| i as f64 * 0.37 - 1.0);
        let lin = grad_check(|t, v| Ok(t.sum(v)), &x, 1e-4).unwrap();
        assert!(lin <= 1e-9);
        let constant = grad_check(
            |t, _| {
                let c = t.leaf(Tensor::scalar(3.0));
                Ok(c)
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert_eq!(constant, 0.0);
    }

    #[test]
    fn upsample_values() {
        let mut tape = Tape::new();
        let x = tape.leaf(t3(1, 1, 2, |i| i as f64 + 1.0));
        let u = tape.upsample_nearest(x, 2).unwrap();
        assert_eq!(tape.value(u).data(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
        let y = tape.sum(u);
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[4.0, 4.0]);
    }
}
