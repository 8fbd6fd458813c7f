//! Minimal dense tensor and the numerical kernels the model is built from.
//!
//! Storage is flat row-major. Every kernel accumulates in f64 regardless of
//! the element type and is purely sequential, so results are bit-reproducible
//! run to run. Kernels report their multiply-accumulate counts to [`crate::macs`].

use crate::error::{Error, Result};
use crate::macs;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    pub fn from_f64(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        let data = values.iter().map(|&v| T::from_f(v)).collect();
        Tensor::new(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> T {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[i * self.shape[1] + j]
    }

    #[inline]
    pub fn set2(&mut self, i: usize, j: usize, v: T) {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[i * self.shape[1] + j] = v;
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[T] {
        debug_assert_eq!(self.shape.len(), 2);
        let n = self.shape[1];
        &self.data[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        debug_assert_eq!(self.shape.len(), 2);
        let n = self.shape[1];
        &mut self.data[i * n..(i + 1) * n]
    }

    /// [m x n] -> [n x m].
    pub fn transpose2(&self) -> Tensor<T> {
        debug_assert_eq!(self.shape.len(), 2);
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Tensor {
            shape: vec![n, m],
            data: out,
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a.to_f() - b.to_f()).abs())
            .fold(0.0, f64::max)
    }

    pub fn assert_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite value in {what}")));
        }
        Ok(())
    }
}

fn check_conv_args(cin: usize, cout: usize, k: usize, stride: usize, groups: usize) -> Result<()> {
    if groups == 0 || cin % groups != 0 || cout % groups != 0 {
        return Err(Error::Config(format!(
            "channels ({cin} in, {cout} out) not divisible by groups {groups}"
        )));
    }
    if k == 0 || stride == 0 {
        return Err(Error::Config("kernel and stride must be >= 1".into()));
    }
    Ok(())
}

/// Output length of a 1-d convolution, or an error when it would be empty.
pub fn conv1d_out_len(l: usize, k: usize, stride: usize, pad: (usize, usize)) -> Result<usize> {
    let padded = l + pad.0 + pad.1;
    if padded < k {
        return Err(Error::Config(format!(
            "conv input {l} with padding {pad:?} shorter than kernel {k}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Grouped 1-d convolution.
///
/// `x`: [Cin x L], `w`: [Cout x Cin/G x K], `bias`: [Cout]; output [Cout x L'].
pub fn conv1d<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: (usize, usize),
    groups: usize,
) -> Result<Tensor<T>> {
    let (cin, l) = (x.shape()[0], x.shape()[1]);
    let (cout, cin_g, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    check_conv_args(cin, cout, k, stride, groups)?;
    if cin_g != cin / groups {
        return Err(Error::Shape(format!(
            "weight expects {cin_g} channels per group, input has {}",
            cin / groups
        )));
    }
    if bias.len() != cout {
        return Err(Error::Shape("bias length != out channels".into()));
    }
    let l_out = conv1d_out_len(l, k, stride, pad)?;
    let cout_g = cout / groups;

    let mut out = Tensor::zeros(vec![cout, l_out]);
    for co in 0..cout {
        let g = co / cout_g;
        let b = bias.data()[co].to_f();
        for t in 0..l_out {
            let mut acc = 0.0f64;
            for cg in 0..cin_g
            {
                let ci = g * cin_g + cg;
                for kk in 0..k {
                    // position in the padded input
                    let p = t * stride + kk;
                    if p < pad.0 {
                        continue;
                    }
                    let src = p - pad.0;
                    if src >= l {
                        continue;
                    }
                    acc += w.data()[(co * cin_g + cg) * k + kk].to_f()
                        * x.data()[ci * l + src].to_f();
                }
            }
            out.data_mut()[co * l_out + t] = T::from_f(acc + b);
        }
    }
    macs::add((l_out * cout * cin_g * k) as u64);
    Ok(out)
}

/// Transposed grouped 1-d convolution; the adjoint of [`conv1d`] with the
/// same hyperparameters.
///
/// `x`: [Cin x L], `w`: [Cin x Cout/G x K], `bias`: [Cout];
/// output [Cout x L''] with L'' = (L-1)*stride + K - pad.0 - pad.1.
pub fn conv_transpose1d<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: (usize, usize),
    groups: usize,
) -> Result<Tensor<T>> {
    let (cin, l) = (x.shape()[0], x.shape()[1]);
    let (w_cin, cout_g, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    if w_cin != cin {
        return Err(Error::Shape("weight in-channels != input channels".into()));
    }
    let cout = cout_g * groups;
    check_conv_args(cin, cout, k, stride, groups)?;
    if bias.len() != cout {
        return Err(Error::Shape("bias length != out channels".into()));
    }
    let full = (l - 1) * stride + k;
    if full < pad.0 + pad.1 + 1 {
        return Err(Error::Config("transposed conv output would be empty".into()));
    }
    let l_out = full - pad.0 - pad.1;
    let cin_g = cin / groups;

    // accumulate in f64, round once at the end
    let mut acc = vec![0.0f64; cout * l_out];
    for ci in 0..cin {
        let g = ci / cin_g;
        for t in 0..l {
            let xv = x.data()[ci * l + t].to_f();
            for cg in 0..cout_g {
                let co = g * cout_g + cg;
                for kk in 0..k {
                    let p = t * stride + kk;
                    if p < pad.0 {
                        continue;
                    }
                    let dst = p - pad.0;
                    if dst >= l_out {
                        continue;
                    }
                    acc[co * l_out + dst] += xv * w.data()[(ci * cout_g + cg) * k + kk].to_f();
                }
            }
        }
    }
    let mut out = Tensor::zeros(vec![cout, l_out]);
    for co in 0..cout {
        let b = bias.data()[co].to_f();
        for t in 0..l_out {
            out.data_mut()[co * l_out + t] = T::from_f(acc[co * l_out + t] + b);
        }
    }
    macs::add((l * cin * cout_g * k) as u64);
    Ok(out)
}

/// Exact row-major GEMM: [m x k] * [k x n] -> [m x n].
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, ka) = (a.shape()[0], a.shape()[1]);
    let (kb, n) = (b.shape()[0], b.shape()[1]);
    if ka != kb {
        return Err(Error::Shape(format!(
            "matmul inner dims disagree: {ka} vs {kb}"
        )));
    }
    let mut out = Tensor::zeros(vec![m, n]);
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0f64;
            for p in 0..ka {
                acc += a.data()[i * ka + p].to_f() * b.data()[p * n + j].to_f();
            }
            out.data_mut()[i * n + j] = T::from_f(acc);
        }
    }
    macs::add((m * ka * n) as u64);
    Ok(out)
}

/// Row-wise softmax with an optional additive mask (entries 0 or -inf).
///
/// Masked positions come out exactly 0; rows are stabilized by max
/// subtraction. A fully-masked row is a contract violation.
pub fn softmax_rows<T: Real>(x: &Tensor<T>, additive_mask: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let (m, n) = (x.shape()[0], x.shape()[1]);
    if let Some(mask) = additive_mask {
        if mask.shape() != x.shape() {
            return Err(Error::Shape("softmax mask shape mismatch".into()));
        }
    }
    let mut out = Tensor::zeros(vec![m, n]);
    for i in 0..m {
        let masked_out = |j: usize| -> bool {
            additive_mask
                .map(|mk| mk.at2(i, j).to_f() == f64::NEG_INFINITY)
                .unwrap_or(false)
        };
        let mut row_max = f64::NEG_INFINITY;
        for j in 0..n {
            if !masked_out(j) {
                row_max = row_max.max(x.at2(i, j).to_f());
            }
        }
        if row_max == f64::NEG_INFINITY {
            return Err(Error::Contract(format!("fully-masked softmax row {i}")));
        }
        let mut denom = 0.0f64;
        let mut exps = vec![0.0f64; n];
        for j in 0..n {
            if !masked_out(j) {
                let e = (x.at2(i, j).to_f() - row_max).exp();
                exps[j] = e;
                denom += e;
            }
        }
        for j in 0..n {
            out.set2(i, j, T::from_f(exps[j] / denom));
        }
    }
    Ok(out)
}

/// RMS group normalization over the channel axis of an [L x D] sequence.
///
/// Per position, per channel group: y = x / sqrt(mean(x^2) + eps) * gamma.
pub fn rms_group_norm<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    groups: usize,
    eps: f64,
) -> Result<Tensor<T>> {
    let (l, d) = (x.shape()[0], x.shape()[1]);
    if groups == 0 || d % groups != 0 {
        return Err(Error::Config(format!(
            "dim {d} not divisible by norm groups {groups}"
        )));
    }
    if gamma.len() != d {
        return Err(Error::Shape("gamma length != dim".into()));
    }
    let gs = d / groups;
    let mut out = Tensor::zeros(vec![l, d]);
    for i in 0..l {
        for g in 0..groups {
            let mut ms = 0.0f64;
            for c in g * gs..(g + 1) * gs {
                let v = x.at2(i, c).to_f();
                ms += v * v;
            }
            let inv = 1.0 / (ms / gs as f64 + eps).sqrt();
            for c in g * gs..(g + 1) * gs {
                out.set2(
                    i,
                    c,
                    T::from_f(x.at2(i, c).to_f() * inv * gamma.data()[c].to_f()),
                );
            }
        }
    }
    Ok(out)
}

/// Elementwise x * sigmoid(x).
pub fn swish<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let data = x.data().iter().map(|&v| T::from_f(swish_scalar(v.to_f()))).collect();
    Tensor {
        shape: x.shape().to_vec(),
        data,
    }
}

pub fn swish_scalar(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Naive triple-loop convolution; the independent oracle for conv1d.
    fn conv1d_naive(
        x: &Tensor<f64>,
        w: &Tensor<f64>,
        bias: &[f64],
        stride: usize,
        pad: (usize, usize),
        groups: usize,
    ) -> (Tensor<f64>, u64) {
        let (cin, l) = (x.shape()[0], x.shape()[1]);
        let (cout, cin_g, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        let mut padded = vec![0.0f64; cin * (l + pad.0 + pad.1)];
        let lp = l + pad.0 + pad.1;
        for c in 0..cin {
            for t in 0..l {
                padded[c * lp + pad.0 + t] = x.data()[c * l + t];
            }
        }
        let l_out = (lp - k) / stride + 1;
        let cout_g = cout / groups;
        let mut out = Tensor::zeros(vec![cout, l_out]);
        let mut mac_count = 0u64;
        for co in 0..cout {
            let g = co / cout_g;
            for t in 0..l_out {
                let mut acc = bias[co];
                for cg in 0..cin_g {
                    for kk in 0..k {
                        acc += w.data()[(co * cin_g + cg) * k + kk]
                            * padded[(g * cin_g + cg) * lp + t * stride + kk];
                        mac_count += 1;
                    }
                }
                out.data_mut()[co * l_out + t] = acc;
            }
        }
        (out, mac_count)
    }

    fn rand_tensor(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
        let mut rng = crate::rng::Xoshiro256::seeded(seed);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.uniform(1.0)).collect();
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn conv1d_matches_naive_oracle_basic() {
        // Cin=Cout=2, L=10, K=4, S=1, pad=(1,1), G=1 -> L'=9
        let x = rand_tensor(vec![2, 10], 1);
        let w = rand_tensor(vec![2, 2, 4], 2);
        let b = [0.3, -0.7];
        let bias = Tensor::new(vec![2], b.to_vec()).unwrap();
        let got = conv1d(&x, &w, &bias, 1, (1, 1), 1).unwrap();
        assert_eq!(got.shape(), &[2, 9]);
        let (want, _) = conv1d_naive(&x, &w, &b, 1, (1, 1), 1);
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn conv1d_zero_input_zero_bias_gives_zeros() {
        let x = Tensor::<f64>::zeros(vec![3, 8]);
        let w = rand_tensor(vec![3, 3, 4], 3);
        let bias = Tensor::zeros(vec![3]);
        let y = conv1d(&x, &w, &bias, 1, (1, 2), 1).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv1d_identity_kernel_passes_input_through() {
        // K=1, S=1, G=1, w = identity per channel
        let x = rand_tensor(vec![2, 6], 4);
        let mut w = Tensor::<f64>::zeros(vec![2, 2, 1]);
        w.data_mut()[0 * 2 + 0] = 1.0; // out0 <- in0
        w.data_mut()[1 * 2 + 1] = 1.0; // out1 <- in1
        let bias = Tensor::zeros(vec![2]);
        let y = conv1d(&x, &w, &bias, 1, (0, 0), 1).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn conv1d_length_formula_matches_naive_over_random_tuples() {
        let mut rng = crate::rng::Xoshiro256::seeded(99);
        for _ in 0..1000 {
            let groups = 1 + (rng.next_u64() % 3) as usize;
            let cin = groups * (1 + (rng.next_u64() % 3) as usize);
            let cout = groups * (1 + (rng.next_u64() % 3) as usize);
            let k = 1 + (rng.next_u64() % 5) as usize;
            let stride = 1 + (rng.next_u64() % 4) as usize;
            let pl = (rng.next_u64() % 4) as usize;
            let pr = (rng.next_u64() % 4) as usize;
            let l = k + (rng.next_u64() % 30) as usize;
            let x = rand_tensor(vec![cin, l], rng.next_u64());
            let w = rand_tensor(vec![cout, cin / groups, k], rng.next_u64());
            let b: Vec<f64> = (0..cout).map(|_| rng.uniform(0.5)).collect();
            let bias = Tensor::new(vec![cout], b.clone()).unwrap();
            let got = conv1d(&x, &w, &bias, stride, (pl, pr), groups).unwrap();
            let (want, _) = conv1d_naive(&x, &w, &b, stride, (pl, pr), groups);
            assert_eq!(got.shape(), want.shape());
            assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn conv_transpose_is_adjoint_of_conv() {
        // <conv(x), y> == <x, conv_T(y)> for shared weights, zero bias
        let mut rng = crate::rng::Xoshiro256::seeded(11);
        // lengths chosen so (L + pad - K) divides the stride exactly and the
        // adjoint's output shape matches the input
        for &(stride, pad, groups, l) in &[
            (1usize, (1usize, 2usize), 1usize, 16usize),
            (2, (1, 2), 1, 17),
            (4, (1, 2), 2, 17),
            (1, (3, 0), 1, 16),
        ] {
            let cin = 4;
            let cout = 6;
            let x = rand_tensor(vec![cin, l], rng.next_u64());
            // conv weight [cout, cin/g, k]
            let w = rand_tensor(vec![cout, cin / groups, 4], rng.next_u64());
            let zeros_out = Tensor::zeros(vec![cout]);
            let cy = conv1d(&x, &w, &zeros_out, stride, pad, groups).unwrap();
            let y = rand_tensor(cy.shape().to_vec(), rng.next_u64());

            // adjoint maps cout -> cin with weight viewed as [cout, cin/g, k]
            let zeros_in = Tensor::zeros(vec![cin]);
            let xt = conv_transpose1d(&y, &w, &zeros_in, stride, pad, groups).unwrap();
            assert_eq!(xt.shape(), x.shape());

            let lhs: f64 = cy
                .data()
                .iter()
                .zip(y.data())
                .map(|(a, b)| a * b)
                .sum();
            let rhs: f64 = x
                .data()
                .iter()
                .zip(xt.data())
                .map(|(a, b)| a * b)
                .sum();
            assert!((lhs - rhs).abs() < 1e-9, "adjoint identity broken: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn conv_transpose_zero_input_gives_zeros() {
        let x = Tensor::<f64>::zeros(vec![4, 7]);
        let w = rand_tensor(vec![4, 2, 4], 5);
        let bias = Tensor::zeros(vec![4]);
        let y = conv_transpose1d(&x, &w, &bias, 2, (0, 0), 2).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_identity_and_zeros() {
        let b = rand_tensor(vec![3, 4], 6);
        let mut eye = Tensor::<f64>::zeros(vec![3, 3]);
        for i in 0..3 {
            eye.set2(i, i, 1.0);
        }
        let y = matmul(&eye, &b).unwrap();
        assert!(y.max_abs_diff(&b) < 1e-15);

        let z = Tensor::<f64>::zeros(vec![4, 2]);
        let y2 = matmul(&b, &z).unwrap();
        assert!(y2.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_two_by_two_pencil_case() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let y = matmul(&a, &b).unwrap();
        assert_eq!(y.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_shape_mismatch_rejected() {
        let a = Tensor::<f64>::zeros(vec![2, 3]);
        let b = Tensor::<f64>::zeros(vec![4, 2]);
        assert!(matmul(&a, &b).is_err());
    }

    #[test]
    fn softmax_zero_row_is_uniform() {
        let x = Tensor::<f64>::zeros(vec![1, 5]);
        let y = softmax_rows(&x, None).unwrap();
        for j in 0..5 {
            assert!((y.at2(0, j) - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_single_unmasked_entry_gets_all_mass() {
        let x = rand_tensor(vec![2, 4], 8);
        let mut mask = Tensor::filled(vec![2, 4], f64::NEG_INFINITY);
        mask.set2(0, 2, 0.0);
        mask.set2(1, 0, 0.0);
        let y = softmax_rows(&x, Some(&mask)).unwrap();
        assert_eq!(y.at2(0, 2), 1.0);
        assert_eq!(y.at2(1, 0), 1.0);
        assert_eq!(y.at2(0, 0), 0.0);
        assert_eq!(y.at2(1, 3), 0.0);
    }

    #[test]
    fn softmax_matches_direct_exponentiation() {
        let x = rand_tensor(vec![3, 3], 9);
        let y = softmax_rows(&x, None).unwrap();
        for i in 0..3 {
            let exps: Vec<f64> = (0..3).map(|j| x.at2(i, j).exp()).collect();
            let s: f64 = exps.iter().sum();
            for j in 0..3 {
                assert!((y.at2(i, j) - exps[j] / s).abs() < 1e-12);
            }
            let row_sum: f64 = (0..3).map(|j| y.at2(i, j)).sum();
            assert!((row_sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_fully_masked_row_is_contract_error() {
        let x = Tensor::<f64>::zeros(vec![1, 3]);
        let mask = Tensor::filled(vec![1, 3], f64::NEG_INFINITY);
        assert!(softmax_rows(&x, Some(&mask)).is_err());
    }

    #[test]
    fn rms_group_norm_unit_rms_is_identity_up_to_eps() {
        // build x with unit RMS per group of 2
        let x = Tensor::new(vec![1, 4], vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        let gamma = Tensor::filled(vec![4], 1.0);
        let y = rms_group_norm(&x, &gamma, 2, 1e-12).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-6);
    }

    #[test]
    fn rms_group_norm_zero_gamma_zeroes_output() {
        let x = rand_tensor(vec![3, 4], 10);
        let gamma = Tensor::zeros(vec![4]);
        let y = rms_group_norm(&x, &gamma, 2, 1e-5).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rms_group_norm_matches_brute_force() {
        let x = rand_tensor(vec![2, 6], 11);
        let gamma = rand_tensor(vec![6], 12);
        let g = 3;
        let eps = 1e-5;
        let y = rms_group_norm(&x, &gamma, g, eps).unwrap();
        for i in 0..2 {
            for grp in 0..g {
                let gs = 2;
                let mut ms = 0.0;
                for c in grp * gs..(grp + 1) * gs {
                    ms += x.at2(i, c) * x.at2(i, c);
                }
                let denom = (ms / gs as f64 + eps).sqrt();
                for c in grp * gs..(grp + 1) * gs {
                    let want = x.at2(i, c) / denom * gamma.data()[c];
                    assert!((y.at2(i, c) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rms_group_norm_divisibility_enforced() {
        let x = Tensor::<f64>::zeros(vec![1, 5]);
        let gamma = Tensor::filled(vec![5], 1.0);
        assert!(rms_group_norm(&x, &gamma, 2, 1e-5).is_err());
    }

    #[test]
    fn swish_fixed_points() {
        assert_eq!(swish_scalar(0.0), 0.0);
        // asymptote: swish(x) -> x for large x
        assert!((swish_scalar(20.0) - 20.0).abs() < 1e-6);
        // scalar oracle: swish(1) = sigmoid(1)
        let sig1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((swish_scalar(1.0) - sig1).abs() < 1e-15);
    }

    #[test]
    fn kernels_are_deterministic() {
        let x = rand_tensor(vec![3, 12], 13);
        let w = rand_tensor(vec![3, 3, 4], 14);
        let bias = rand_tensor(vec![3], 15);
        let a = conv1d(&x, &w, &bias, 2, (1, 2), 1).unwrap();
        let b = conv1d(&x, &w, &bias, 2, (1, 2), 1).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn mac_meter_matches_naive_loop_count() {
        let mut rng = crate::rng::Xoshiro256::seeded(77);
        for _ in 0..50 {
            let groups = 1 + (rng.next_u64() % 2) as usize;
            let cin = groups * (1 + (rng.next_u64() % 3) as usize);
            let cout = groups * (1 + (rng.next_u64() % 3) as usize);
            let k = 1 + (rng.next_u64() % 4) as usize;
            let stride = 1 + (rng.next_u64() % 3) as usize;
            let l = k + (rng.next_u64() % 20) as usize;
            let x = rand_tensor(vec![cin, l], rng.next_u64());
            let w = rand_tensor(vec![cout, cin / groups, k], rng.next_u64());
            let b: Vec<f64> = vec![0.0; cout];
            let bias = Tensor::new(vec![cout], b.clone()).unwrap();
            crate::macs::reset();
            conv1d(&x, &w, &bias, stride, (1, 1), groups).unwrap();
            let metered = crate::macs::total();
            let (_, counted) = conv1d_naive(&x, &w, &b, stride, (1, 1), groups);
            assert_eq!(metered, counted);
        }
    }
}
